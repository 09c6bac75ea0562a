"""Height-scoped money: addresses, coins, transactions, claims and per-height UTXO sets.

Byte layouts (all integers little-endian; ``blob`` = u32 length + bytes)::

    Address     id[32] | base_height u32 | dyn u8 | (lock u64 | step u64 | created u64)?
    Outpoint    txid[32] | index u32
    Transaction height u32 | kind u8 | param u32
                | n_in u32 | (outpoint | amount u64)*
                | n_out u32 | (address | amount u64)*
                | n_sig u32 | blob(sig)*
    Claim       recipient address | amount u64 | source_height u32
                | matching_txid[32] | index u32

``txid`` is SHA-256 over the transaction *without* the signature section,
so signatures commit to it.  A claim's coin lives at the synthetic outpoint
``(H(claim bytes), 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Optional, Protocol

from .codec import Reader, Writer
from .hashtree import DIGEST_SIZE, H

MAX_HEIGHT = 16


class LedgerError(ValueError):
    pass


# -- addresses ------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Dynamic-height schedule, in height-0 block counts."""

    lock_period: int
    step_period: int
    created_at: int

    def __post_init__(self) -> None:
        if self.lock_period <= 0 or self.step_period <= 0:
            raise ValueError("lock_period and step_period must be positive")


@dataclass(frozen=True)
class Address:
    id: bytes
    base_height: int
    dynamic: Optional[Schedule] = None

    def __post_init__(self) -> None:
        if len(self.id) != DIGEST_SIZE:
            raise ValueError("address id must be 32 bytes")
        if self.base_height < 0:
            raise ValueError("negative height")

    def encode(self, w: Writer) -> None:
        w.raw(self.id).u32(self.base_height)
        if self.dynamic is None:
            w.u8(0)
        else:
            d = self.dynamic
            w.u8(1).u64(d.lock_period).u64(d.step_period).u64(d.created_at)

    @classmethod
    def decode(cls, r: Reader) -> "Address":
        aid = r.raw(DIGEST_SIZE)
        height = r.u32()
        dyn = None
        if r.u8():
            dyn = Schedule(r.u64(), r.u64(), r.u64())
        return cls(aid, height, dyn)

    def to_bytes(self) -> bytes:
        w = Writer()
        self.encode(w)
        return w.getvalue()

    def __str__(self) -> str:
        tag = "d" if self.dynamic else ""
        return f"{self.id.hex()[:12]}@{self.base_height}{tag}"


def effective_height(addr: Address, now: int, max_height: int = MAX_HEIGHT) -> int:
    """Height at which the address's coins are spendable at block index ``now``.

    A dynamic address stays at its base height while
    ``now - created_at <= lock_period`` and climbs one height on the next
    block, then one more every ``step_period`` blocks.
    """
    if addr.dynamic is None:
        return addr.base_height
    d = addr.dynamic
    over = now - d.created_at - d.lock_period
    steps = max(0, math.ceil(over / d.step_period)) if over > 0 else 0
    return min(addr.base_height + steps, max_height)


# -- signatures -----------------------------------------------------------


class SignatureScheme(Protocol):
    sig_size: int

    def sign(self, secret: bytes, message: bytes) -> bytes: ...

    def verify(self, key_id: bytes, message: bytes, signature: bytes) -> bool: ...


class TestScheme:
    """Simulation-only scheme: ``sig = H(secret || message)``.

    Verification looks the secret up in a registry keyed by address id, so
    it is only meaningful inside one simulated world.
    """

    __test__ = False  # keep pytest from collecting this
    sig_size = DIGEST_SIZE

    def __init__(self) -> None:
        self.registry: dict[bytes, bytes] = {}

    def keypair(self, name: str) -> tuple[bytes, bytes]:
        secret = H(b"secret:" + name.encode())
        key_id = H(b"id:" + secret)
        self.registry[key_id] = secret
        return secret, key_id

    def sign(self, secret: bytes, message: bytes) -> bytes:
        return H(secret + message)

    def verify(self, key_id: bytes, message: bytes, signature: bytes) -> bool:
        secret = self.registry.get(key_id)
        return secret is not None and H(secret + message) == signature


class Ed25519Scheme:
    """Real signatures; address ids are raw 32-byte public keys."""

    sig_size = 64

    def sign(self, secret: bytes, message: bytes) -> bytes:
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        return Ed25519PrivateKey.from_private_bytes(secret).sign(message)

    def verify(self, key_id: bytes, message: bytes, signature: bytes) -> bool:
        from cryptography.exceptions import InvalidSignature
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

        try:
            Ed25519PublicKey.from_public_bytes(key_id).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


# -- coins and transactions -----------------------------------------------


@dataclass(frozen=True, order=True)
class Outpoint:
    txid: bytes
    index: int

    def encode(self, w: Writer) -> None:
        w.raw(self.txid).u32(self.index)

    @classmethod
    def decode(cls, r: Reader) -> "Outpoint":
        return cls(r.raw(DIGEST_SIZE), r.u32())


REGULAR = "regular"
COINBASE = "coinbase"
CLAIM = "claim"
_ORIGIN_CODE = {REGULAR: 0, COINBASE: 1, CLAIM: 2}


@dataclass(frozen=True)
class Coin:
    outpoint: Outpoint
    owner: Address
    amount: int
    height: int
    maturity: int = 0
    origin: str = REGULAR
    source_height: Optional[int] = None

    def __post_init__(self) -> None:
        if self.amount < 1:
            raise ValueError("coin amount must be >= 1")

    def to_bytes(self) -> bytes:
        w = Writer()
        self.outpoint.encode(w)
        self.owner.encode(w)
        w.u64(self.amount).u32(self.height).u64(self.maturity)
        w.u8(_ORIGIN_CODE[self.origin]).u32(0 if self.source_height is None else self.source_height + 1)
        return w.getvalue()


class TxKind(IntEnum):
    SAME_HEIGHT = 0
    MOVE_UP = 1
    MOVE_DOWN = 2


@dataclass(frozen=True)
class TxInput:
    outpoint: Outpoint
    amount: int


@dataclass(frozen=True)
class TxOutput:
    address: Address
    amount: int


@dataclass(frozen=True)
class Transaction:
    """A transfer inserted at ``height``.

    ``param`` is the target height for ``MOVE_UP`` and the (power of two)
    offset for ``MOVE_DOWN``; it is 0 for same-height transfers.
    """

    height: int
    kind: TxKind
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]
    param: int = 0
    signatures: tuple[bytes, ...] = ()

    def _encode_body(self, w: Writer) -> None:
        w.u32(self.height).u8(int(self.kind)).u32(self.param)
        w.u32(len(self.inputs))
        for i in self.inputs:
            i.outpoint.encode(w)
            w.u64(i.amount)
        w.u32(len(self.outputs))
        for o in self.outputs:
            o.address.encode(w)
            w.u64(o.amount)

    @cached_property
    def body_bytes(self) -> bytes:
        w = Writer()
        self._encode_body(w)
        return w.getvalue()

    @cached_property
    def txid(self) -> bytes:
        return H(self.body_bytes)

    def encode(self, w: Writer) -> None:
        w.raw(self.body_bytes)
        w.u32(len(self.signatures))
        for s in self.signatures:
            w.blob(s)

    @cached_property
    def serialized(self) -> bytes:
        w = Writer()
        self.encode(w)
        return w.getvalue()

    def to_bytes(self) -> bytes:
        return self.serialized

    @classmethod
    def decode(cls, r: Reader) -> "Transaction":
        height, kind, param = r.u32(), r.u8(), r.u32()
        try:
            kind = TxKind(kind)
        except ValueError as exc:
            raise LedgerError("unknown transaction kind") from exc
        inputs = tuple(TxInput(Outpoint.decode(r), r.u64()) for _ in range(r.u32()))
        outputs = tuple(TxOutput(Address.decode(r), r.u64()) for _ in range(r.u32()))
        sigs = tuple(r.blob() for _ in range(r.u32()))
        return cls(height, kind, inputs, outputs, param, sigs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transaction":
        r = Reader(data)
        tx = cls.decode(r)
        r.expect_done()
        return tx

    @property
    def size(self) -> int:
        return len(self.serialized)

    @property
    def input_total(self) -> int:
        return sum(i.amount for i in self.inputs)

    @property
    def output_total(self) -> int:
        return sum(o.amount for o in self.outputs)

    @property
    def fee(self) -> int:
        return self.input_total - self.output_total

    @property
    def destination(self) -> int:
        if self.kind == TxKind.MOVE_UP:
            return self.param
        if self.kind == TxKind.MOVE_DOWN:
            return self.height - self.param
        return self.height

    def signed(self, scheme: SignatureScheme, secrets: Iterable[bytes]) -> "Transaction":
        sigs = tuple(scheme.sign(s, self.txid) for s in secrets)
        return replace(self, signatures=sigs)


@dataclass(frozen=True)
class Claim:
    """Assertion recorded at ``recipient.base_height`` that a coin moved down from ``source_height``."""

    recipient: Address
    amount: int
    source_height: int
    matching_txid: bytes
    index: int = 0

    def __post_init__(self) -> None:
        if self.amount < 1:
            raise ValueError("claim amount must be >= 1")
        if self.source_height <= self.recipient.base_height:
            raise ValueError("claim source must be above the recipient height")

    @property
    def height(self) -> int:
        return self.recipient.base_height

    def encode(self, w: Writer) -> None:
        self.recipient.encode(w)
        w.u64(self.amount).u32(self.source_height).raw(self.matching_txid).u32(self.index)

    @cached_property
    def serialized(self) -> bytes:
        w = Writer()
        self.encode(w)
        return w.getvalue()

    def to_bytes(self) -> bytes:
        return self.serialized

    @classmethod
    def decode(cls, r: Reader) -> "Claim":
        return cls(Address.decode(r), r.u64(), r.u32(), r.raw(DIGEST_SIZE), r.u32())

    @property
    def outpoint(self) -> Outpoint:
        return Outpoint(H(self.serialized), 0)


def claims_for(tx: Transaction) -> list[Claim]:
    """The claims that mirror a move-down transaction, one per output."""
    if tx.kind != TxKind.MOVE_DOWN:
        return []
    return [
        Claim(o.address, o.amount, tx.height, tx.txid, i)
        for i, o in enumerate(tx.outputs)
    ]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def validate_stateless(
    tx: Transaction,
    now: Optional[int] = None,
    max_height: int = MAX_HEIGHT,
    sig_size: int = DIGEST_SIZE,
) -> None:
    """Raise :class:`LedgerError` if ``tx`` is malformed on its own."""
    if not tx.inputs or not tx.outputs:
        raise LedgerError("empty transaction")
    if any(i.amount < 1 for i in tx.inputs) or any(o.amount < 1 for o in tx.outputs):
        raise LedgerError("non-positive amount")
    if tx.output_total > tx.input_total:
        raise LedgerError("unbalanced")
    if len({i.outpoint for i in tx.inputs}) != len(tx.inputs):
        raise LedgerError("double spend")

    def out_height(addr: Address) -> int:
        return addr.base_height if now is None else effective_height(addr, now, max_height)

    heights = {out_height(o.address) for o in tx.outputs}
    if tx.height > max_height:
        raise LedgerError("height mismatch for kind")
    if tx.kind == TxKind.SAME_HEIGHT:
        ok = tx.param == 0 and heights == {tx.height}
    elif tx.kind == TxKind.MOVE_UP:
        ok = tx.height < tx.param <= max_height and heights == {tx.param}
    else:
        ok = (
            _is_power_of_two(tx.param)
            and tx.height - tx.param >= 0
            and heights == {tx.height - tx.param}
        )
    if not ok:
        raise LedgerError("height mismatch for kind")
    if len(tx.signatures) != len(tx.inputs) or any(len(s) != sig_size for s in tx.signatures):
        raise LedgerError("bad signature encoding")


# -- per-height UTXO set --------------------------------------------------


@dataclass
class HeightLedger:
    height: int
    utxos: dict[Outpoint, Coin] = field(default_factory=dict)
    chain_length: int = 0

    def copy(self) -> "HeightLedger":
        return HeightLedger(self.height, dict(self.utxos), self.chain_length)

    def total(self, include_unsettled: bool = True) -> int:
        return sum(
            c.amount for c in self.utxos.values()
            if include_unsettled or c.origin != CLAIM
        )

    def digest(self) -> bytes:
        w = Writer().u32(self.height).u64(self.chain_length).u32(len(self.utxos))
        for op in sorted(self.utxos):
            w.blob(self.utxos[op].to_bytes())
        return H(w.getvalue())

    # In-place primitives used by chain views; the module-level functions
    # below wrap them with copies.

    def check_spend(
        self,
        tx: Transaction,
        now: int,
        scheme: Optional[SignatureScheme] = None,
        spent: Optional[set[Outpoint]] = None,
        max_height: int = MAX_HEIGHT,
    ) -> None:
        if tx.height != self.height:
            raise LedgerError("height mismatch for kind")
        for n, i in enumerate(tx.inputs):
            if spent is not None and i.outpoint in spent:
                raise LedgerError("double spend")
            coin = self.utxos.get(i.outpoint)
            if coin is None:
                raise LedgerError("unknown input")
            if coin.amount != i.amount:
                raise LedgerError("input amount mismatch")
            if coin.maturity > self.chain_length:
                raise LedgerError("immature coin")
            if effective_height(coin.owner, now, max_height) != self.height:
                raise LedgerError("coin migrated upward")
            if scheme is not None and not scheme.verify(coin.owner.id, tx.txid, tx.signatures[n]):
                raise LedgerError("bad signature")

    def remove_inputs(self, tx: Transaction) -> None:
        for i in tx.inputs:
            del self.utxos[i.outpoint]

    def add_outputs(self, tx: Transaction, maturity: int = 0) -> None:
        for n, o in enumerate(tx.outputs):
            op = Outpoint(tx.txid, n)
            self.utxos[op] = Coin(op, o.address, o.amount, self.height, maturity)

    def add_coin(self, coin: Coin) -> None:
        if coin.outpoint in self.utxos:
            raise LedgerError("duplicate claim outpoint" if coin.origin == CLAIM else "duplicate outpoint")
        self.utxos[coin.outpoint] = replace(coin, height=self.height)

    def add_claim(self, claim: Claim, settle_at: int) -> Coin:
        coin = Coin(
            claim.outpoint, claim.recipient, claim.amount, self.height,
            settle_at, CLAIM, claim.source_height,
        )
        self.add_coin(coin)
        return coin


def apply_same_height(
    ledger: HeightLedger,
    tx: Transaction,
    now: int,
    scheme: Optional[SignatureScheme] = None,
    max_height: int = MAX_HEIGHT,
) -> HeightLedger:
    if tx.kind != TxKind.SAME_HEIGHT:
        raise LedgerError("height mismatch for kind")
    validate_stateless(tx, now, max_height, getattr(scheme, "sig_size", DIGEST_SIZE))
    ledger.check_spend(tx, now, scheme, max_height=max_height)
    out = ledger.copy()
    out.remove_inputs(tx)
    out.add_outputs(tx)
    return out


def apply_move_up(
    src: HeightLedger,
    dst: Optional[HeightLedger],
    tx: Transaction,
    observer_cutoff: int,
    now: int,
    scheme: Optional[SignatureScheme] = None,
    max_height: int = MAX_HEIGHT,
) -> tuple[HeightLedger, Optional[HeightLedger]]:
    """Apply a move-up as seen by a miner with ``observer_cutoff``."""
    if tx.kind != TxKind.MOVE_UP:
        raise LedgerError("height mismatch for kind")
    if observer_cutoff < tx.height:
        return src, dst
    validate_stateless(tx, now, max_height, getattr(scheme, "sig_size", DIGEST_SIZE))
    src.check_spend(tx, now, scheme, max_height=max_height)
    new_src = src.copy()
    new_src.remove_inputs(tx)
    if observer_cutoff < tx.param:
        return new_src, dst
    if dst is None or dst.height != tx.param:
        raise LedgerError("destination ledger missing")
    new_dst = dst.copy()
    new_dst.add_outputs(tx)
    return new_src, new_dst


def apply_claim(dst: HeightLedger, claim: Claim, settle_at: int) -> HeightLedger:
    if claim.height != dst.height:
        raise LedgerError("claim height mismatch")
    out = dst.copy()
    out.add_claim(claim, settle_at)
    return out


def migrate(ledgers: dict[int, HeightLedger], now: int, max_height: int = MAX_HEIGHT) -> list[Coin]:
    """Move dynamic-height coins to their effective height at ``now``.

    Coins whose new height is not held in ``ledgers`` leave this view.
    Maturity is kept unchanged.  Returns the coins that moved.
    """
    moved = []
    for h in sorted(ledgers):
        ledger = ledgers[h]
        for op, coin in list(ledger.utxos.items()):
            if coin.owner.dynamic is None:
                continue
            eff = effective_height(coin.owner, now, max_height)
            if eff == h:
                continue
            del ledger.utxos[op]
            moved.append(coin)
            target = ledgers.get(eff)
            if target is not None:
                target.utxos[op] = replace(coin, height=eff)
    return moved
