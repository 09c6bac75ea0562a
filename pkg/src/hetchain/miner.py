"""Block assembly, cutoff changes and scripted adversaries."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .consensus.block import Block, ClaimTree, SubBlock, seal
from .consensus.rules import ConsensusError, Params, claim_offsets, size_budget
from .consensus.view import CL, TX, ChainView
from .hashtree import H
from .ledger import (
    Address,
    Claim,
    LedgerError,
    Outpoint,
    SignatureScheme,
    Transaction,
    TxInput,
    TxKind,
    TxOutput,
    claims_for,
    migrate,
    validate_stateless,
)

HONEST = "honest"
FALSE_CLAIMER = "false_claimer"
OVERCLAIMER = "overclaimer"
INVALID_UPPER = "invalid_upper"
BEHAVIORS = (HONEST, FALSE_CLAIMER, OVERCLAIMER, INVALID_UPPER)

# name -> fn(block, miner) -> Block, selected with behavior "script:<name>"
ADVERSARY_SCRIPTS: dict[str, Callable[[Block, "Miner"], Block]] = {}


def register_script(name: str):
    def deco(fn):
        ADVERSARY_SCRIPTS[name] = fn
        return fn
    return deco


@dataclass
class MinerConfig:
    id: str
    cutoff: int
    hashrate_weight: float = 1.0
    behavior: str = HONEST
    coinbase_address: Optional[Address] = None
    attack: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.hashrate_weight < 0:
            raise ValueError("hashrate_weight must be non-negative")
        if self.behavior not in BEHAVIORS and not self.behavior.startswith("script:"):
            raise ValueError(f"unknown behavior {self.behavior!r}")


class Mempool:
    def __init__(self, cutoff: int) -> None:
        self.cutoff = cutoff
        self.by_height: dict[int, dict[bytes, Transaction]] = {}

    def add(self, tx: Transaction) -> bool:
        if tx.height > self.cutoff:
            return False
        self.by_height.setdefault(tx.height, {})[tx.txid] = tx
        return True

    def discard(self, tx: Transaction) -> None:
        self.by_height.get(tx.height, {}).pop(tx.txid, None)

    def pending(self, h: int) -> list[Transaction]:
        return list(self.by_height.get(h, {}).values())

    def set_cutoff(self, cutoff: int) -> None:
        self.cutoff = cutoff
        for h in [h for h in self.by_height if h > cutoff]:
            del self.by_height[h]

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_height.values())


def priority(tx: Transaction) -> tuple:
    return (-Fraction(tx.fee, tx.size), tx.txid)


def greedy_fill(txs: Iterable[Transaction], capacity: int) -> list[Transaction]:
    """Fee-per-byte greedy selection; ties broken by txid."""
    out = []
    for tx in sorted(txs, key=priority):
        if tx.size <= capacity:
            out.append(tx)
            capacity -= tx.size
    return out


_STALE = ("unknown input", "double spend", "input amount mismatch", "bad signature", "coin migrated upward")


def assemble_block(
    mempool: Mempool,
    view: ChainView,
    config: MinerConfig,
    claim_cap: Optional[int] = None,
) -> Block:
    """Build the next block on ``view`` up to the miner's cutoff.

    Heights are filled from the top down so that claims mirroring move-down
    transactions can be charged to the destination sub-block before that
    sub-block is filled.  Once every height is filled, move-downs whose
    claims break the claim limit are taken out again, lowest priority first.
    ``claim_cap`` replaces that check with a plain cap on the claimed total.
    """
    p = view.params
    x = view.height
    top = min(config.cutoff, view.cutoff)
    cap_claims = (1 << 62) if claim_cap is None else claim_cap
    ledgers = {h: l.copy() for h, l in view.ledgers.items()}
    migrate(ledgers, x, p.max_height)
    sig_size = getattr(view.scheme, "sig_size", 32)

    used = [0] * (top + 1)
    chosen: dict[int, list[Transaction]] = {h: [] for h in range(top + 1)}
    claims: dict[tuple[int, int], list[Claim]] = {}
    claimed = 0
    for h in range(top, -1, -1):
        spent: set[Outpoint] = set()
        for tx in sorted(mempool.pending(h), key=priority):
            if used[h] + tx.size > size_budget(h, p.base_size):
                continue
            try:
                validate_stateless(tx, x, p.max_height, sig_size)
                ledgers[h].check_spend(tx, x, view.scheme, spent, p.max_height)
            except LedgerError as exc:
                if str(exc) in _STALE or not str(exc).startswith("immature"):
                    mempool.discard(tx)
                continue
            if tx.kind == TxKind.MOVE_DOWN:
                y = h - tx.param
                mirrored = claims_for(tx)
                need = sum(len(c.serialized) for c in mirrored)
                if used[y] + need > size_budget(y, p.base_size):
                    continue
                if claimed + tx.output_total > cap_claims:
                    continue
                used[y] += need
                claimed += tx.output_total
                claims.setdefault((y, tx.param), []).extend(mirrored)
            chosen[h].append(tx)
            used[h] += tx.size
            spent.update(i.outpoint for i in tx.inputs)

    if claim_cap is None:
        _enforce_claim_limit(chosen, claims, p.subsidy)

    subs = []
    for h in range(top + 1):
        trees = tuple(
            ClaimTree(
                o,
                x - view.tip((CL, h, o)) - 1,
                tuple(sorted(claims.get((h, o), []), key=lambda c: c.serialized)),
            )
            for o in claim_offsets(h, top, p.max_height)
        )
        subs.append(SubBlock(h, tuple(chosen[h]), trees, x - view.tip((TX, h)) - 1))

    fees = sum(sb.fees for sb in subs)
    amount = p.subsidy + fees
    coinbase = None
    if amount >= 1:
        addr = config.coinbase_address
        if addr is None:
            raise ConsensusError("miner has no coinbase address")
        sources = [h + t.offset for h, sb in enumerate(subs) for t in sb.claim_trees if t.claims]
        if sources and addr.base_height < max(sources):
            raise ConsensusError("coinbase height too low for included claims")
        if addr.base_height != top:
            raise ConsensusError("coinbase must be paid at the block's top height")
        coinbase = (addr, amount)
    return seal(x, view.tip_hash, subs, coinbase, p.pow_bits)


def _enforce_claim_limit(
    chosen: dict[int, list[Transaction]],
    claims: dict[tuple[int, int], list[Claim]],
    subsidy: int,
) -> None:
    """Drop move-downs until claimed_y <= mined + fees_0..y - claimed_0..y-1 holds everywhere."""
    while True:
        fees = claimed = 0
        bad = None
        for h in sorted(chosen):
            fees += sum(tx.fee for tx in chosen[h])
            here = sum(c.amount for (y, _), cs in claims.items() if y == h for c in cs)
            if here > subsidy + fees - claimed:
                bad = h
                break
            claimed += here
        if bad is None:
            return
        movers = [tx for z in chosen for tx in chosen[z]
                  if tx.kind == TxKind.MOVE_DOWN and tx.height - tx.param == bad]
        worst = max(movers, key=priority)
        chosen[worst.height].remove(worst)
        key = (bad, worst.param)
        claims[key] = [c for c in claims[key] if c.matching_txid != worst.txid]


def claim_room(subs: Sequence[SubBlock], y: int, subsidy: int) -> int:
    """Largest extra amount claimable at ``y`` without breaking the limit at any height >= y."""
    room = None
    fees = claimed = 0
    for n, sb in enumerate(subs):
        fees += sb.fees
        claimed += sb.claimed
        if n >= y:
            slack = subsidy + fees - claimed
            room = slack if room is None else min(room, slack)
    return max(room or 0, 0)


def _reseal(block: Block, subs: Sequence[SubBlock], pow_bits: int) -> Block:
    return seal(block.index, block.header.prev, subs, block.header.coinbase, pow_bits)


def adversary_mutate(block: Block, behavior: str, miner: "Miner") -> Block:
    """Corrupt an honestly assembled block according to ``behavior``."""
    p = miner.view.params
    attack = miner.config.attack
    subs = list(block.subblocks)
    top = block.top
    x = block.index
    if behavior == INVALID_UPPER:
        start = attack.get("corrupt_from", 1)
        for h in range(start, top + 1):
            bogus = Transaction(
                h, TxKind.SAME_HEIGHT,
                (TxInput(Outpoint(H(b"bogus" + x.to_bytes(8, "little") + bytes([h])), 0), 1),),
                (TxOutput(Address(miner.key_id, h), 1),),
                signatures=(bytes(32),),
            )
            subs[h] = replace(subs[h], txs=subs[h].txs + (bogus,))
    elif behavior in (FALSE_CLAIMER, OVERCLAIMER):
        offset = attack.get("offset", 1)
        y = attack.get("target_height", top - offset)
        if y < 0 or y + offset > top:
            return block
        amount = claim_room(subs, y, p.subsidy)
        if behavior == OVERCLAIMER:
            amount += attack.get("excess", 1)
        if amount < 1:
            return block
        fake = Claim(Address(miner.key_id, y), amount, y + offset, H(b"fake" + x.to_bytes(8, "little")))
        trees = tuple(
            replace(t, claims=tuple(sorted(t.claims + (fake,), key=lambda c: c.serialized)))
            if t.offset == offset else t
            for t in subs[y].claim_trees
        )
        subs[y] = replace(subs[y], claim_trees=trees)
    elif behavior.startswith("script:"):
        return ADVERSARY_SCRIPTS[behavior[len("script:"):]](block, miner)
    else:
        raise ValueError(f"not an adversarial behavior: {behavior!r}")
    return _reseal(block, subs, p.pow_bits)


class Miner:
    """A miner: configuration, chain view and mempool."""

    def __init__(
        self,
        config: MinerConfig,
        params: Params,
        key_id: bytes,
        premine: Sequence[tuple[Address, int]] = (),
        scheme: Optional[SignatureScheme] = None,
    ) -> None:
        self.config = config
        self.key_id = key_id
        self._derived_coinbase = config.coinbase_address is None
        self.view = ChainView(
            params, config.cutoff, premine, scheme, lenient=config.behavior == FALSE_CLAIMER
        )
        self.mempool = Mempool(self.view.cutoff)
        self.mutated = 0
        if self._derived_coinbase:
            self.config.coinbase_address = Address(key_id, self.view.cutoff)

    @property
    def id(self) -> str:
        return self.config.id

    @property
    def honest(self) -> bool:
        return self.config.behavior == HONEST

    def attacking(self, x: int) -> bool:
        if self.honest:
            return False
        a = self.config.attack
        if x < a.get("start", 0) or ("stop" in a and x >= a["stop"]):
            return False
        return "limit" not in a or self.mutated < a["limit"]

    def produce(self) -> Block:
        x = self.view.height
        attacking = self.attacking(x)
        cap = None
        if attacking and self.config.behavior == OVERCLAIMER:
            cap = 1 << 62
        block = assemble_block(self.mempool, self.view, self.config, claim_cap=cap)
        if attacking:
            block = adversary_mutate(block, self.config.behavior, self)
            self.mutated += 1
        return block


def adjust_cutoff(miner: Miner, new_cutoff: int, peer: Optional[ChainView] = None) -> Miner:
    """Lower (truncate and prune) or raise (fetch, authenticate, replay) a miner's cutoff."""
    if new_cutoff == miner.view.cutoff:
        return miner
    if new_cutoff > miner.view.cutoff and peer is None:
        raise ConsensusError("raising the cutoff needs a peer holding the withheld trees")
    miner.view = miner.view.rebuilt(new_cutoff, peer)
    miner.config.cutoff = miner.view.cutoff
    miner.mempool.set_cutoff(miner.view.cutoff)
    if miner._derived_coinbase:
        miner.config.coinbase_address = Address(miner.key_id, miner.view.cutoff)
    return miner
    miner.mempool.set_cutoff(miner.view.cutoff)
    if miner._derived_coinbase:
        miner.config.coinbase_address = Address(miner.key_id, miner.view.cutoff)
    return miner
