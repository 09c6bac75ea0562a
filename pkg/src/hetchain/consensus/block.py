"""Sub-blocks, blocks, headers and their canonical byte layouts.

Sub-block::

    height u32 | drop_tx u32 | n_trees u32 | (offset u32 | drop u32)*
    | n_tx u32 | blob(tx)* | per tree: n_claims u32 | blob(claim)*

Its digest is the root of an inner stream over
``[merkle(meta), merkle(txs), merkle(claims offset 1), merkle(claims offset 2), ...]``
where ``meta`` is the header part up to and including the tree table.

Header::

    index u64 | prev[32] | top u32 | stream_root[32] | has_coinbase u8
    | (address | amount u64)? | nonce u64

Block = header | n_sub u32 | blob(sub-block)*.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence

from ..codec import Reader, Writer
from ..hashtree import (
    DIGEST_SIZE,
    H,
    StreamPrefix,
    merkle_root,
    prefix_proof,
    stream_root,
    verify_prefix,
)
from ..ledger import Address, Claim, Transaction
from .rules import ConsensusError

ZERO = bytes(DIGEST_SIZE)


@dataclass(frozen=True)
class ClaimTree:
    offset: int
    drop: int = 0
    claims: tuple[Claim, ...] = ()

    @property
    def root(self) -> bytes:
        return merkle_root([c.serialized for c in self.claims])

    @property
    def total(self) -> int:
        return sum(c.amount for c in self.claims)


@dataclass(frozen=True)
class SubBlock:
    height: int
    txs: tuple[Transaction, ...] = ()
    claim_trees: tuple[ClaimTree, ...] = ()
    drop_tx: int = 0

    def meta_bytes(self) -> bytes:
        w = Writer().u32(self.height).u32(self.drop_tx).u32(len(self.claim_trees))
        for t in self.claim_trees:
            w.u32(t.offset).u32(t.drop)
        return w.getvalue()

    @cached_property
    def tx_root(self) -> bytes:
        return merkle_root([tx.serialized for tx in self.txs])

    @cached_property
    def digest(self) -> bytes:
        leaves = [merkle_root([self.meta_bytes()]), self.tx_root]
        leaves += [t.root for t in self.claim_trees]
        return stream_root(leaves)[0]

    @property
    def size(self) -> int:
        """Bytes counted against the height's budget: transactions plus claims."""
        return sum(tx.size for tx in self.txs) + sum(
            len(c.serialized) for t in self.claim_trees for c in t.claims
        )

    @property
    def fees(self) -> int:
        return sum(tx.fee for tx in self.txs)

    @property
    def claimed(self) -> int:
        return sum(t.total for t in self.claim_trees)

    def tree(self, offset: int) -> Optional[ClaimTree]:
        for t in self.claim_trees:
            if t.offset == offset:
                return t
        return None

    def to_bytes(self) -> bytes:
        w = Writer().raw(self.meta_bytes()).u32(len(self.txs))
        for tx in self.txs:
            w.blob(tx.serialized)
        for t in self.claim_trees:
            w.u32(len(t.claims))
            for c in t.claims:
                w.blob(c.serialized)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SubBlock":
        r = Reader(data)
        height, drop_tx, n_trees = r.u32(), r.u32(), r.u32()
        table = [(r.u32(), r.u32()) for _ in range(n_trees)]
        txs = tuple(Transaction.from_bytes(r.blob()) for _ in range(r.u32()))
        trees = []
        for offset, drop in table:
            claims = []
            for _ in range(r.u32()):
                cr = Reader(r.blob())
                claims.append(Claim.decode(cr))
                cr.expect_done()
            trees.append(ClaimTree(offset, drop, tuple(claims)))
        r.expect_done()
        return cls(height, txs, tuple(trees), drop_tx)


@dataclass(frozen=True)
class Header:
    index: int
    prev: bytes
    top: int
    stream_root: bytes
    coinbase: Optional[tuple[Address, int]] = None
    nonce: int = 0

    def encode(self, w: Writer) -> None:
        w.u64(self.index).raw(self.prev).u32(self.top).raw(self.stream_root)
        if self.coinbase is None:
            w.u8(0)
        else:
            w.u8(1)
            self.coinbase[0].encode(w)
            w.u64(self.coinbase[1])
        w.u64(self.nonce)

    def to_bytes(self) -> bytes:
        w = Writer()
        self.encode(w)
        return w.getvalue()

    @classmethod
    def decode(cls, r: Reader) -> "Header":
        index, prev, top, root = r.u64(), r.raw(DIGEST_SIZE), r.u32(), r.raw(DIGEST_SIZE)
        coinbase = None
        if r.u8():
            coinbase = (Address.decode(r), r.u64())
        return cls(index, prev, top, root, coinbase, r.u64())

    @cached_property
    def hash(self) -> bytes:
        return H(self.to_bytes())

    @property
    def coinbase_outpoint_txid(self) -> bytes:
        return H(b"coinbase" + self.index.to_bytes(8, "little") + self.prev)


def pow_ok(header: Header, bits: int) -> bool:
    if bits <= 0:
        return True
    return int.from_bytes(header.hash, "big") >> (256 - bits) == 0


@dataclass(frozen=True)
class Block:
    header: Header
    subblocks: tuple[SubBlock, ...]

    @property
    def index(self) -> int:
        return self.header.index

    @property
    def top(self) -> int:
        return self.header.top

    @property
    def digests(self) -> list[bytes]:
        return [sb.digest for sb in self.subblocks]

    def prefix(self, cut: int) -> StreamPrefix:
        return prefix_proof(self.digests, min(cut, self.top))

    def message(self, cutoff: int) -> "BlockMessage":
        cut = min(cutoff, self.top)
        return BlockMessage(self.header, self.prefix(cut), self.subblocks[: cut + 1])

    def to_bytes(self) -> bytes:
        w = Writer()
        self.header.encode(w)
        w.u32(len(self.subblocks))
        for sb in self.subblocks:
            w.blob(sb.to_bytes())
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        r = Reader(data)
        header = Header.decode(r)
        subs = tuple(SubBlock.from_bytes(r.blob()) for _ in range(r.u32()))
        r.expect_done()
        return cls(header, subs)


@dataclass(frozen=True)
class BlockMessage:
    """Header plus the stream prefix and sub-blocks up to the receiver's cutoff."""

    header: Header
    prefix: StreamPrefix
    subblocks: tuple[SubBlock, ...]

    def authenticate(self, pow_bits: int = 0) -> None:
        if not pow_ok(self.header, pow_bits):
            raise ConsensusError("proof of work")
        if not verify_prefix(self.header.stream_root, self.prefix):
            raise ConsensusError("prefix verification failed")
        if len(self.subblocks) != len(self.prefix.trees):
            raise ConsensusError("prefix verification failed")
        expected_full = self.header.top + 1
        if self.prefix.is_full != (len(self.subblocks) == expected_full):
            raise ConsensusError("prefix verification failed")
        for h, (sb, digest) in enumerate(zip(self.subblocks, self.prefix.trees)):
            if sb.height != h or sb.digest != digest:
                raise ConsensusError("prefix verification failed")


def seal(
    index: int,
    prev: bytes,
    subblocks: Sequence[SubBlock],
    coinbase: Optional[tuple[Address, int]],
    pow_bits: int,
) -> Block:
    """Compute the stream root and search a nonce meeting the difficulty."""
    subblocks = tuple(subblocks)
    root, _ = stream_root([sb.digest for sb in subblocks])
    header = Header(index, prev, len(subblocks) - 1, root, coinbase, 0)
    while not pow_ok(header, pow_bits):
        header = replace(header, nonce=header.nonce + 1)
    return Block(header, subblocks)


def genesis_block(max_height: int, pow_bits: int = 0) -> Block:
    from .rules import claim_offsets

    subs = [
        SubBlock(h, (), tuple(ClaimTree(o) for o in claim_offsets(h, max_height, max_height)))
        for h in range(max_height + 1)
    ]
    return seal(0, ZERO, subs, None, pow_bits)
