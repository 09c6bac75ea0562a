"""Merkle trees and stream trees.

A stream folds an ordered list of tree roots from the right::

    h_n = H(0x02 || t_n)
    h_y = H(0x02 || t_y || h_{y+1})

so any prefix ``t_0 .. t_y`` is authenticated against ``h_0`` by the single
tail value ``h_{y+1}``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

DIGEST_SIZE = 32

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
STREAM_PREFIX = b"\x02"


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


# Single indirection point for the hash function; tests may swap it.
_hash_fn: Callable[[bytes], bytes] = _sha256


def set_hash_function(fn: Optional[Callable[[bytes], bytes]]) -> None:
    """Replace the hash used by every structure (``None`` restores SHA-256)."""
    global _hash_fn
    _hash_fn = fn or _sha256


def H(data: bytes) -> bytes:
    return _hash_fn(data)


class StreamError(ValueError):
    pass


def check_digest(value: bytes) -> bytes:
    if not isinstance(value, (bytes, bytearray)) or len(value) != DIGEST_SIZE:
        raise ValueError("digest must be exactly 32 bytes")
    return bytes(value)


# -- Merkle ---------------------------------------------------------------


def leaf_hash(data: bytes) -> bytes:
    return H(LEAF_PREFIX + data)


def node_hash(left: bytes, right: bytes) -> bytes:
    return H(NODE_PREFIX + left + right)


EMPTY_ROOT_INPUT = b""


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    """Binary Merkle root with duplicate-last padding on odd levels.

    The empty tree hashes to ``H(b"")``.
    """
    if not leaves:
        return H(EMPTY_ROOT_INPUT)
    level = [leaf_hash(leaf) for leaf in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def merkle_branch(leaves: Sequence[bytes], index: int) -> list[tuple[bytes, bool]]:
    """Sibling path for ``leaves[index]``; each entry is (sibling, sibling_is_right)."""
    if not 0 <= index < len(leaves):
        raise IndexError("leaf index out of range")
    level = [leaf_hash(leaf) for leaf in leaves]
    path = []
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        sibling = index ^ 1
        path.append((level[sibling], sibling > index))
        level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        index //= 2
    return path


def verify_branch(root: bytes, leaf: bytes, path: Sequence[tuple[bytes, bool]]) -> bool:
    acc = leaf_hash(leaf)
    for sibling, is_right in path:
        acc = node_hash(acc, sibling) if is_right else node_hash(sibling, acc)
    return acc == root


@dataclass(frozen=True)
class MerkleTree:
    leaves: tuple[bytes, ...]
    root: bytes

    @classmethod
    def build(cls, leaves: Sequence[bytes]) -> "MerkleTree":
        leaves = tuple(bytes(leaf) for leaf in leaves)
        return cls(leaves, merkle_root(leaves))


# -- Streams --------------------------------------------------------------


def stream_node(tree: bytes, tail: Optional[bytes]) -> bytes:
    if tail is None:
        return H(STREAM_PREFIX + tree)
    return H(STREAM_PREFIX + tree + tail)


def stream_root(trees: Sequence[bytes]) -> tuple[bytes, list[bytes]]:
    """Return ``(h_0, [h_0, ..., h_n])`` for the tree roots ``t_0 .. t_n``."""
    if not trees:
        raise StreamError("empty stream")
    out: list[bytes] = [b""] * len(trees)
    acc: Optional[bytes] = None
    for y in range(len(trees) - 1, -1, -1):
        acc = stream_node(check_digest(trees[y]), acc)
        out[y] = acc
    return out[0], out


def fold(trees: Sequence[bytes], tail: Optional[bytes]) -> bytes:
    acc = tail
    for tree in reversed(trees):
        acc = stream_node(tree, acc)
    if acc is None:
        raise StreamError("empty stream")
    return acc


@dataclass(frozen=True)
class StreamPrefix:
    """Trees ``t_0 .. t_y`` plus the tail ``h_{y+1}`` (``None`` for a full stream).

    ``intermediates`` caches ``h_1 .. h_y`` so the prefix can be truncated
    without refolding.
    """

    trees: tuple[bytes, ...]
    tail: Optional[bytes]
    root: bytes
    intermediates: tuple[bytes, ...] = ()

    @property
    def cut(self) -> int:
        return len(self.trees) - 1

    @property
    def is_full(self) -> bool:
        return self.tail is None

    @classmethod
    def make(cls, trees: Sequence[bytes], tail: Optional[bytes]) -> "StreamPrefix":
        trees = tuple(trees)
        if not trees:
            raise StreamError("empty stream")
        hs: list[bytes] = []
        acc = tail
        for tree in reversed(trees):
            acc = stream_node(tree, acc)
            hs.append(acc)
        hs.reverse()
        return cls(trees, tail, hs[0], tuple(hs[1:]))

    def to_bytes(self) -> bytes:
        parts = [struct.pack("<I", len(self.trees)), *self.trees]
        if self.tail is None:
            parts.append(b"\x00")
        else:
            parts += [b"\x01", self.tail]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "StreamPrefix":
        prefix, used = cls.decode(data, 0)
        if used != len(data):
            raise ValueError("trailing bytes after stream prefix")
        return prefix

    @classmethod
    def decode(cls, data: bytes, pos: int) -> tuple["StreamPrefix", int]:
        if len(data) < pos + 4:
            raise ValueError("truncated stream prefix")
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        end = pos + count * DIGEST_SIZE
        if count == 0 or len(data) < end + 1:
            raise ValueError("truncated stream prefix")
        trees = [data[p:p + DIGEST_SIZE] for p in range(pos, end, DIGEST_SIZE)]
        flag = data[end]
        pos = end + 1
        tail = None
        if flag == 1:
            if len(data) < pos + DIGEST_SIZE:
                raise ValueError("truncated stream prefix")
            tail = data[pos:pos + DIGEST_SIZE]
            pos += DIGEST_SIZE
        elif flag != 0:
            raise ValueError("bad tail flag")
        return cls.make(trees, tail), pos


def prefix_proof(trees: Sequence[bytes], cut: int) -> StreamPrefix:
    if not trees:
        raise StreamError("empty stream")
    if cut < 0 or cut >= len(trees):
        raise StreamError("cut beyond stream")
    _, hs = stream_root(trees)
    tail = hs[cut + 1] if cut + 1 < len(trees) else None
    return StreamPrefix(tuple(trees[:cut + 1]), tail, hs[0], tuple(hs[1:cut + 1]))


def verify_prefix(root: bytes, prefix: StreamPrefix) -> bool:
    try:
        if not prefix.trees:
            return False
        return fold(prefix.trees, prefix.tail) == root
    except (StreamError, TypeError):
        return False


def extend_prefix(
    current: StreamPrefix, appended: Sequence[bytes], new_tail: Optional[bytes]
) -> StreamPrefix:
    """Append withheld trees, authenticating them against the stored tail."""
    appended = tuple(appended)
    if not appended:
        if new_tail != current.tail:
            raise StreamError("append authentication failed")
        return current
    if current.tail is None:
        raise StreamError("prefix is already the full stream")
    if fold(appended, new_tail) != current.tail:
        raise StreamError("append authentication failed")
    return StreamPrefix.make(current.trees + appended, new_tail)


def truncate_prefix(current: StreamPrefix, new_cut: int) -> StreamPrefix:
    if new_cut > current.cut:
        raise StreamError("cannot truncate upward")
    if new_cut < 0:
        raise StreamError("cut below zero")
    if new_cut == current.cut:
        return current
    return StreamPrefix(
        current.trees[:new_cut + 1],
        current.intermediates[new_cut],  # h_{new_cut+1}
        current.root,
        current.intermediates[:new_cut],
    )
