import hashlib
import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from hetchain import hashtree as ht

VECTORS = json.loads((Path(__file__).parent / "oracles" / "hash_vectors.json").read_text())
TREES = [bytes.fromhex(t) for t in VECTORS["trees"]]

digests = st.binary(min_size=32, max_size=32)


def test_empty_root_is_hash_of_empty_string():
    assert ht.merkle_root([]).hex() == VECTORS["empty_root"]
    assert ht.merkle_root([]) == hashlib.sha256(b"").digest()


def test_single_leaf_matches_oracle():
    assert ht.merkle_root([b"a"]).hex() == VECTORS["leaf_a"]


def test_three_leaves_duplicate_last_padding():
    assert ht.merkle_root([b"a", b"b", b"c"]).hex() == VECTORS["abc_root"]
    # padding duplicates the last node, so [a, b, c] and [a, b, c, c] coincide
    assert ht.merkle_root([b"a", b"b", b"c"]) == ht.merkle_root([b"a", b"b", b"c", b"c"])


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_merkle_branches_verify(n):
    leaves = [bytes([i]) * 3 for i in range(n)]
    root = ht.merkle_root(leaves)
    for i, leaf in enumerate(leaves):
        assert ht.verify_branch(root, leaf, ht.merkle_branch(leaves, i))
    assert not ht.verify_branch(root, b"zzz", ht.merkle_branch(leaves, 0))


def test_stream_single_tree():
    root, hs = ht.stream_root(TREES[:1])
    assert root.hex() == VECTORS["stream1_h0"]
    assert hs == [root]


def test_stream_two_trees_hand_fold():
    root, _ = ht.stream_root(TREES[:2])
    assert root.hex() == VECTORS["stream2_h0"]


def test_stream_seven_intermediates():
    root, hs = ht.stream_root(TREES)
    assert [h.hex() for h in hs] == VECTORS["stream7"]
    assert hs[3] == ht.stream_node(TREES[3], hs[4])
    assert root == hs[0]


def test_empty_stream_rejected():
    with pytest.raises(ht.StreamError, match="empty stream"):
        ht.stream_root([])


def test_prefix_cut_two_of_seven():
    _, hs = ht.stream_root(TREES)
    p = ht.prefix_proof(TREES, 2)
    assert p.trees == tuple(TREES[:3])
    assert p.tail == hs[3]
    assert ht.verify_prefix(hs[0], p)


def test_prefix_full_stream_of_one():
    p = ht.prefix_proof(TREES[:1], 0)
    assert p.tail is None and p.is_full
    assert ht.verify_prefix(ht.stream_root(TREES[:1])[0], p)


def test_prefix_fold_equals_root():
    p = ht.prefix_proof(TREES[:4], 1)
    assert ht.fold(p.trees, p.tail) == ht.stream_root(TREES[:4])[0]


def test_cut_beyond_stream():
    with pytest.raises(ht.StreamError, match="cut beyond stream"):
        ht.prefix_proof(TREES[:3], 3)


def test_every_single_bit_flip_in_trees_rejected():
    root, _ = ht.stream_root(TREES)
    p = ht.prefix_proof(TREES, 3)
    for i in range(len(p.trees)):
        for j in range(32):
            for bit in range(8):
                t = bytearray(p.trees[i])
                t[j] ^= 1 << bit
                trees = list(p.trees)
                trees[i] = bytes(t)
                assert not ht.verify_prefix(root, ht.StreamPrefix(tuple(trees), p.tail, p.root))


def test_swapped_tail_rejected():
    rng = random.Random(1234)
    root, _ = ht.stream_root(TREES)
    p = ht.prefix_proof(TREES, 2)
    for _ in range(50):
        fake = bytes(rng.getrandbits(8) for _ in range(32))
        assert not ht.verify_prefix(root, ht.StreamPrefix(p.trees, fake, p.root))


def test_extend_two_to_four():
    _, hs = ht.stream_root(TREES)
    p = ht.prefix_proof(TREES, 2)
    q = ht.extend_prefix(p, TREES[3:5], hs[5])
    assert q.cut == 4 and q.tail == hs[5]
    assert ht.verify_prefix(hs[0], q)
    assert q == ht.prefix_proof(TREES, 4)


def test_extend_empty_identity():
    p = ht.prefix_proof(TREES, 2)
    assert ht.extend_prefix(p, [], p.tail) is p
    full = ht.prefix_proof(TREES, len(TREES) - 1)
    assert ht.extend_prefix(full, [], None) is full
    with pytest.raises(ht.StreamError, match="already the full stream"):
        ht.extend_prefix(full, TREES[:1], None)


def test_extend_forged_tree_rejected():
    _, hs = ht.stream_root(TREES)
    p = ht.prefix_proof(TREES, 2)
    forged = bytes(32)
    with pytest.raises(ht.StreamError, match="append authentication failed"):
        ht.extend_prefix(p, [forged, TREES[4]], hs[5])


def test_truncate_two_to_one():
    _, hs = ht.stream_root(TREES)
    p = ht.prefix_proof(TREES, 2)
    q = ht.truncate_prefix(p, 1)
    assert q.trees == tuple(TREES[:2]) and q.tail == hs[2]
    assert ht.truncate_prefix(p, 2) is p
    with pytest.raises(ht.StreamError, match="cannot truncate upward"):
        ht.truncate_prefix(q, 2)


def test_truncate_then_extend_round_trip():
    root, hs = ht.stream_root(TREES)
    p = ht.prefix_proof(TREES, 4)
    q = ht.truncate_prefix(p, 0)
    r = ht.extend_prefix(q, TREES[1:5], hs[5])
    assert ht.verify_prefix(root, r) and r.trees == p.trees


def test_wire_format_layout():
    p = ht.prefix_proof(TREES, 1)
    raw = p.to_bytes()
    assert raw[:4] == (2).to_bytes(4, "little")
    assert raw[4:68] == TREES[0] + TREES[1]
    assert raw[68] == 1 and raw[69:] == p.tail
    assert ht.StreamPrefix.from_bytes(raw) == p
    full = ht.prefix_proof(TREES[:2], 1).to_bytes()
    assert full[-1] == 0 and len(full) == 4 + 64 + 1


def test_hash_function_indirection():
    try:
        ht.set_hash_function(lambda b: hashlib.blake2s(b).digest())
        assert ht.merkle_root([]) == hashlib.blake2s(b"").digest()
    finally:
        ht.set_hash_function(None)
    assert ht.merkle_root([]) == hashlib.sha256(b"").digest()


@settings(max_examples=60, deadline=None)
@given(st.lists(digests, min_size=1, max_size=16), st.data())
def test_prefix_properties(trees, data):
    root, hs = ht.stream_root(trees)
    cut = data.draw(st.integers(0, len(trees) - 1))
    p = ht.prefix_proof(trees, cut)
    assert ht.verify_prefix(root, p)
    assert ht.StreamPrefix.from_bytes(p.to_bytes()) == p
    low = data.draw(st.integers(0, cut))
    q = ht.truncate_prefix(p, low)
    assert ht.verify_prefix(root, q)
    tail = hs[cut + 1] if cut + 1 < len(trees) else None
    assert ht.extend_prefix(q, trees[low + 1:cut + 1], tail) == p if low < cut else q is p
