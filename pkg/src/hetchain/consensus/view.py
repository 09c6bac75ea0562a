"""One miner's partial view of the chain.

Every height carries its own chain of transaction trees, and every
``(destination, offset)`` pair its own chain of claim trees.  A sub-block
that drops ``n`` predecessors confirms the tree ``n + 1`` blocks back; the
canonical chain of each such unit is the longest chain of eligible nodes.
Eligibility ties the units together:

* a transaction tree needs the tree one height below (same block) to be
  canonical, and every claim tree of the block sourcing at or below it;
* a claim tree needs its containing transaction tree, the claim trees of
  the block with lower sources, and (until it expires) a valid source.

Ledgers are a function of the canonical sets.  On any reorg the view
reselects every unit and replays its ledgers from genesis; settled claims
survive replays.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from ..hashtree import H, StreamPrefix, extend_prefix, truncate_prefix
from ..ledger import (
    CLAIM,
    COINBASE,
    REGULAR,
    Address,
    Coin,
    HeightLedger,
    LedgerError,
    Outpoint,
    SignatureScheme,
    TxKind,
    claims_for,
    effective_height,
    migrate,
    validate_stateless,
)
from .block import Block, BlockMessage, Header, SubBlock, genesis_block
from .rules import (
    ACCEPT,
    ClaimBudget,
    ConsensusError,
    Params,
    Status,
    Verdict,
    claim_limit_check,
    claim_offsets,
    confirm_target,
    maturity_required,
    size_budget,
)

TX = "tx"
CL = "claim"

UnitKey = tuple  # ("tx", h) or ("claim", y, offset)


@dataclass
class Node:
    parent: int
    ok: bool
    rule: str = ""
    length: int = 0
    expired: bool = False


class Unit:
    def __init__(self, key: UnitKey) -> None:
        self.key = key
        self.nodes: dict[int, Node] = {}
        self.path: list[int] = []
        self.pos: dict[int, int] = {}

    def set_path(self, path: list[int]) -> None:
        self.path = path
        self.pos = {x: i for i, x in enumerate(path)}

    def extend(self, x: int) -> None:
        self.pos[x] = len(self.path)
        self.path.append(x)

    @property
    def tip(self) -> int:
        return self.path[-1]

    def confirmations(self, x: int) -> int:
        return len(self.path) - 1 - self.pos[x]


@dataclass
class BlockRecord:
    header: Header
    prefix: StreamPrefix
    subblocks: dict[int, SubBlock]
    static: dict[int, tuple[bool, str]] = field(default_factory=dict)
    verdicts: dict[int, Verdict] = field(default_factory=dict)
    claim_keys: list[UnitKey] = field(default_factory=list)

    @property
    def index(self) -> int:
        return self.header.index

    @property
    def top(self) -> int:
        return self.header.top

    def message(self) -> BlockMessage:
        subs = tuple(self.subblocks[h] for h in sorted(self.subblocks))
        return BlockMessage(self.header, self.prefix, subs)


def premine_outpoint(i: int) -> Outpoint:
    return Outpoint(H(b"premine" + i.to_bytes(4, "little")), 0)


class ChainView:
    """A miner's chain state truncated at ``cutoff``.

    ``lenient`` disables the claim/transaction agreement checks; adversaries
    use it to keep building on their own false claims.
    """

    def __init__(
        self,
        params: Params,
        cutoff: int,
        premine: Sequence[tuple[Address, int]] = (),
        scheme: Optional[SignatureScheme] = None,
        lenient: bool = False,
        genesis: Optional[Block] = None,
    ) -> None:
        self.params = params
        self.cutoff = min(cutoff, params.max_height)
        self.premine = list(premine)
        self.scheme = scheme
        self.lenient = lenient
        self.records: list[BlockRecord] = []
        self.units: dict[UnitKey, Unit] = {}
        self.ledgers: dict[int, HeightLedger] = {}
        self.settled: set[tuple[UnitKey, int]] = set()
        self.live_claims: set[tuple[UnitKey, int]] = set()
        self.ever_live: set[tuple[UnitKey, int]] = set()
        self.weak: set[tuple[UnitKey, int]] = set()
        self.max_reorg: dict[int, int] = defaultdict(int)
        self.settlements: list[dict] = []
        self.replays = 0
        self._order = self._selection_order()
        for key in self._order:
            self.units[key] = Unit(key)
        self._reset_ledgers()
        self.receive_block(genesis or genesis_block(params.max_height, params.pow_bits))

    # -- setup ----------------------------------------------------------

    def _selection_order(self) -> list[UnitKey]:
        c, top = self.cutoff, self.params.max_height
        order: list[UnitKey] = []
        for h in range(c + 1):
            for y in range(h):
                if h - y in claim_offsets(y, top, top):
                    order.append((CL, y, h - y))
            order.append((TX, h))
        for z in range(c + 1, top + 1):
            for y in range(c + 1):
                if z - y in claim_offsets(y, top, top):
                    order.append((CL, y, z - y))
        return order

    def _reset_ledgers(self) -> None:
        self.ledgers = {h: HeightLedger(h) for h in range(self.cutoff + 1)}
        for i, (addr, amount) in enumerate(self.premine):
            if addr.base_height <= self.cutoff:
                op = premine_outpoint(i)
                self.ledgers[addr.base_height].utxos[op] = Coin(op, addr, amount, addr.base_height)
        self.live_claims = set()

    # -- intake -----------------------------------------------------------

    @property
    def height(self) -> int:
        """Number of blocks held, genesis included."""
        return len(self.records)

    @property
    def tip_hash(self) -> bytes:
        return self.records[-1].header.hash

    def receive_block(self, block: Block) -> dict[int, Verdict]:
        return self.receive_message(block.message(self.cutoff))

    def receive_message(self, msg: BlockMessage) -> dict[int, Verdict]:
        msg.authenticate(self.params.pow_bits)
        header = msg.header
        x = len(self.records)
        if header.index != x:
            raise ConsensusError("out of order block")
        if x and header.prev != self.tip_hash:
            raise ConsensusError("bad prev")
        if header.top > self.params.max_height:
            raise ConsensusError("top above max height")
        cut = min(self.cutoff, header.top)
        if msg.prefix.cut < cut:
            raise ConsensusError("prefix shorter than cutoff")
        prefix = truncate_prefix(msg.prefix, cut)
        rec = BlockRecord(header, prefix, {h: msg.subblocks[h] for h in range(cut + 1)})
        self.records.append(rec)
        self._process(rec)
        return rec.verdicts

    # -- evaluation -------------------------------------------------------

    def _static_check(self, rec: BlockRecord, h: int) -> tuple[bool, str]:
        if h in rec.static:
            return rec.static[h]
        result = self._static_check_uncached(rec, h)
        rec.static[h] = result
        return result

    def _static_check_uncached(self, rec: BlockRecord, h: int) -> tuple[bool, str]:
        p = self.params
        x, top = rec.index, rec.top
        sb = rec.subblocks[h]
        if sb.height != h:
            return False, "shape"
        if x == 0:
            return True, ""
        if sb.size > size_budget(h, p.base_size):
            return False, "size"
        try:
            confirm_target(x, h, sb.drop_tx)
            for t in sb.claim_trees:
                confirm_target(x, h, t.drop)
        except ConsensusError:
            return False, "drops past genesis"
        offsets = [t.offset for t in sb.claim_trees]
        if any(h + o > top for o in offsets):
            return False, "claim-height"
        if offsets != claim_offsets(h, top, p.max_height):
            return False, "claim-shape"
        seen = set()
        for t in sb.claim_trees:
            for c in t.claims:
                if c.height != h or c.source_height != h + t.offset:
                    return False, "claim-shape"
                if c.outpoint in seen:
                    return False, "duplicate claim"
                seen.add(c.outpoint)
        sig_size = getattr(self.scheme, "sig_size", 32)
        for tx in sb.txs:
            if tx.height != h:
                return False, "tx-malformed:height"
            try:
                validate_stateless(tx, x, p.max_height, sig_size)
            except LedgerError as exc:
                return False, f"tx-malformed:{exc}"
        budget = ClaimBudget(
            p.subsidy,
            [rec.subblocks[n].fees for n in range(h + 1)],
            [rec.subblocks[n].claimed for n in range(h + 1)],
        )
        try:
            claim_limit_check(budget, h)
        except ConsensusError:
            return False, "claim-limit"
        if not self.lenient:
            rule = self._pair_check(rec, h)
            if rule:
                return False, rule
        if h == top and rec.header.coinbase is not None:
            addr, amount = rec.header.coinbase
            fees = sum(rec.subblocks[n].fees for n in range(top + 1))
            if addr.base_height != top or amount > p.subsidy + fees or amount < 1:
                return False, "coinbase"
        return True, ""

    def _pair_check(self, rec: BlockRecord, z: int) -> str:
        """Move-down transactions at ``z`` must match the claim trees below, exactly."""
        sb = rec.subblocks[z]
        by_offset: dict[int, list[bytes]] = defaultdict(list)
        for tx in sb.txs:
            if tx.kind == TxKind.MOVE_DOWN:
                by_offset[tx.param].extend(c.serialized for c in claims_for(tx))
        o = 1
        while o <= z:
            tree = rec.subblocks[z - o].tree(o)
            have = sorted(c.serialized for c in tree.claims) if tree else []
            if sorted(by_offset.pop(o, [])) != have:
                return "pair-mismatch"
            o *= 2
        if by_offset:
            return "pair-mismatch"
        return ""

    def _ledger_check(self, rec: BlockRecord, h: int, ledgers: dict[int, HeightLedger]) -> tuple[bool, str]:
        sb = rec.subblocks[h]
        ledger = ledgers[h]
        spent: set[Outpoint] = set()
        try:
            for tx in sb.txs:
                ledger.check_spend(tx, rec.index, self.scheme, spent, self.params.max_height)
                spent.update(i.outpoint for i in tx.inputs)
        except LedgerError as exc:
            return False, f"tx-ledger:{exc}"
        for t in sb.claim_trees:
            for c in t.claims:
                if c.outpoint in ledger.utxos:
                    return False, "duplicate claim"
        return True, ""

    def _evaluate(self, rec: BlockRecord, ledgers: dict[int, HeightLedger]) -> tuple[dict, dict]:
        cut = min(self.cutoff, rec.top)
        tx_ok: dict[int, tuple[bool, str]] = {}
        for h in range(cut + 1):
            ok, rule = self._static_check(rec, h)
            if ok and rec.index:
                ok, rule = self._ledger_check(rec, h, ledgers)
            tx_ok[h] = (ok, rule)
        claim_ok: dict[UnitKey, tuple[bool, str]] = {}
        for y in range(cut + 1):
            for t in rec.subblocks[y].claim_trees:
                z = y + t.offset
                ok, rule = True, ""
                if z > rec.top:
                    ok, rule = False, "claim-height"
                elif not self.lenient and z <= self.cutoff and not tx_ok[z][0]:
                    ok = False
                    rule = "pair-mismatch" if tx_ok[z][1] == "pair-mismatch" else "source-rejected"
                claim_ok[(CL, y, t.offset)] = (ok, rule)
        return tx_ok, claim_ok

    def _verdicts_from(self, rec: BlockRecord, tx_ok: dict, claim_ok: dict) -> dict[int, Verdict]:
        out: dict[int, Verdict] = {}
        for h in sorted(tx_ok):
            ok, rule = tx_ok[h]
            if not ok:
                out[h] = Verdict(Status.REJECT_STRONG, rule)
            elif h and out[h - 1].strong:
                out[h] = Verdict(Status.REJECT_STRONG, "cascade")
            else:
                weak = [
                    claim_ok[(CL, h, t.offset)][1]
                    for t in rec.subblocks[h].claim_trees
                    if not claim_ok.get((CL, h, t.offset), (True, ""))[0]
                ]
                out[h] = Verdict(Status.REJECT_WEAK, weak[0]) if weak else ACCEPT
        return out

    def evaluate_block(self, block: Block) -> dict[int, Verdict]:
        """Verdicts for a prospective next block, without changing the view."""
        cut = min(self.cutoff, block.top)
        rec = BlockRecord(block.header, block.prefix(cut), {h: block.subblocks[h] for h in range(cut + 1)})
        ledgers = {h: l.copy() for h, l in self.ledgers.items()}
        migrate(ledgers, rec.index, self.params.max_height)
        tx_ok, claim_ok = self._evaluate(rec, ledgers)
        return self._verdicts_from(rec, tx_ok, claim_ok)

    # -- selection --------------------------------------------------------

    def _eligible(self, key: UnitKey, x: int, node: Node) -> bool:
        if x == 0:
            return True
        rec = self.records[x]
        if key[0] == TX:
            h = key[1]
            if not node.ok:
                return False
            if h and x not in self.units[(TX, h - 1)].pos:
                return False
            for ck in rec.claim_keys:
                if ck[1] + ck[2] <= h and x not in self.units[ck].pos and (ck, x) not in self.settled:
                    return False
            return True
        _, y, o = key
        if (key, x) in self.settled:
            return True
        if x not in self.units[(TX, y)].pos:
            return False
        if node.expired:
            return True
        z = y + o
        if not node.ok:
            return False
        if z <= self.cutoff and not self.lenient and x not in self.units[(TX, z - 1)].pos:
            return False
        for ck in rec.claim_keys:
            if ck[1] + ck[2] < z and x not in self.units[ck].pos and (ck, x) not in self.settled:
                return False
        return True

    def _node_length(self, unit: Unit, x: int, node: Node) -> int:
        if x == 0:
            return 1
        parent = unit.nodes.get(node.parent)
        if parent is None or parent.length == 0:
            return 0
        return parent.length + 1 if self._eligible(unit.key, x, node) else 0

    def _select_unit(self, unit: Unit) -> None:
        best, best_len = 0, 0
        for x, node in unit.nodes.items():
            node.length = self._node_length(unit, x, node)
            if node.length > best_len:
                best, best_len = x, node.length
        path = []
        x = best
        while x >= 0:
            path.append(x)
            x = unit.nodes[x].parent
        path.reverse()
        unit.set_path(path)

    def reselect(self) -> None:
        old = {h: set(self.units[(TX, h)].path) for h in range(self.cutoff + 1)}
        for key in self._order:
            self._select_unit(self.units[key])
        for h in range(self.cutoff + 1):
            lost = len(old[h] - set(self.units[(TX, h)].path))
            self.max_reorg[h] = max(self.max_reorg[h], lost)

    def _fast_select(self, x: int) -> bool:
        """Extend canonical chains with block ``x``; return True if a reorg is needed."""
        for key in self._order:
            unit = self.units[key]
            node = unit.nodes.get(x)
            if node is None:
                continue
            node.length = self._node_length(unit, x, node)
            tip_len = len(unit.path)
            if node.length > tip_len:
                if node.parent != unit.tip:
                    return True
                unit.extend(x)
        return False

    # -- ledger effects ---------------------------------------------------

    def _apply_block(self, rec: BlockRecord) -> None:
        x, top = rec.index, rec.top
        p = self.params
        for h in range(min(self.cutoff, top) + 1):
            sb = rec.subblocks[h]
            ledger = self.ledgers[h]
            if x in self.units[(TX, h)].pos:
                for tx in sb.txs:
                    ledger.remove_inputs(tx)
                    if tx.kind == TxKind.SAME_HEIGHT:
                        ledger.add_outputs(tx)
                    elif tx.kind == TxKind.MOVE_UP and tx.param <= self.cutoff:
                        self.ledgers[tx.param].add_outputs(tx)
                ledger.chain_length += 1
                if h == top and rec.header.coinbase is not None and x:
                    addr, amount = rec.header.coinbase
                    op = Outpoint(rec.header.coinbase_outpoint_txid, 0)
                    ledger.add_coin(Coin(
                        op, addr, amount, h,
                        ledger.chain_length + maturity_required(h, p.base_conf), COINBASE,
                    ))
            for t in sb.claim_trees:
                key = (CL, h, t.offset)
                if (key, x) in self.settled:
                    for c in t.claims:
                        ledger.add_coin(Coin(c.outpoint, c.recipient, c.amount, h, 0, REGULAR, c.source_height))
                elif x in self.units[key].pos and x:
                    settle_at = ledger.chain_length + maturity_required(h + t.offset, p.base_conf)
                    for c in t.claims:
                        ledger.add_claim(c, settle_at)
                    if t.claims:
                        self.live_claims.add((key, x))
                        self.ever_live.add((key, x))

    def _members_ok(self, rec: BlockRecord) -> Optional[tuple[UnitKey, str]]:
        for h in range(min(self.cutoff, rec.top) + 1):
            if rec.index in self.units[(TX, h)].pos:
                ok, rule = self._ledger_check(rec, h, self.ledgers)
                if not ok:
                    return (TX, h), rule
        return None

    def replay(self) -> None:
        """Rebuild every ledger from genesis for the current canonical sets."""
        while True:
            self.replays += 1
            self._reset_ledgers()
            failure = None
            for rec in self.records:
                migrate(self.ledgers, rec.index, self.params.max_height)
                if rec.index:
                    bad = self._members_ok(rec)
                    if bad:
                        failure = (rec.index, *bad)
                        break
                self._apply_block(rec)
            if failure is None:
                return
            x, key, rule = failure
            node = self.units[key].nodes[x]
            node.ok, node.rule = False, rule
            self.reselect()

    # -- per-block driver -------------------------------------------------

    def _process(self, rec: BlockRecord) -> None:
        x = rec.index
        migrate(self.ledgers, x, self.params.max_height)
        tx_ok, claim_ok = self._evaluate(rec, self.ledgers)
        cut = min(self.cutoff, rec.top)
        for h in range(cut + 1):
            sb = rec.subblocks[h]
            parent = x - sb.drop_tx - 1 if x else -1
            ok, rule = tx_ok[h]
            self.units[(TX, h)].nodes[x] = Node(parent, ok, rule)
            for t in sb.claim_trees:
                key = (CL, h, t.offset)
                if key not in self.units or key not in claim_ok:
                    continue
                ok, rule = claim_ok[key]
                self.units[key].nodes[x] = Node(x - t.drop - 1 if x else -1, ok, rule)
                rec.claim_keys.append(key)
                if not ok:
                    self.weak.add((key, x))
        rec.verdicts = self._verdicts_from(rec, tx_ok, claim_ok)
        if x == 0:
            for key in self._order:
                if 0 in self.units[key].nodes:
                    self.units[key].nodes[0].length = 1
                    self.units[key].set_path([0])
            self._apply_block(rec)
            return
        if self._fast_select(x):
            self.reselect()
            self.replay()
        else:
            self._apply_block(rec)
        self._post_block()

    def _post_block(self) -> None:
        expired = False
        for key, x in sorted(self.weak):
            _, y, o = key
            tx_unit = self.units[(TX, y)]
            if x in tx_unit.pos and tx_unit.confirmations(x) >= maturity_required(y + o, self.params.base_conf):
                self.units[key].nodes[x].expired = True
                self.weak.discard((key, x))
                expired = True
        if expired:
            self.reselect()
            self.replay()
        self.settle_claims()

    def settle_claims(self) -> list[tuple[UnitKey, int]]:
        """Turn every claim past its maturity into regular, irreversible coins."""
        done = []
        for key, x in sorted(self.live_claims):
            _, y, o = key
            tx_unit = self.units[(TX, y)]
            if x not in self.units[key].pos or x not in tx_unit.pos:
                continue
            confs = tx_unit.confirmations(x)
            if confs < maturity_required(y + o, self.params.base_conf):
                continue
            ledger = self.ledgers[y]
            tree = self.records[x].subblocks[y].tree(o)
            for c in tree.claims:
                coin = ledger.utxos.get(c.outpoint)
                if coin is not None:
                    ledger.utxos[c.outpoint] = Coin(
                        coin.outpoint, coin.owner, coin.amount, y, 0, REGULAR, coin.source_height
                    )
            self.settled.add((key, x))
            self.live_claims.discard((key, x))
            self.settlements.append({
                "block": x, "height": y, "offset": o, "confirmations": confs,
                "amount": tree.total, "chain_length": ledger.chain_length,
            })
            done.append((key, x))
        return done

    def cascade_drop(self, x: int, y: int) -> None:
        """Drop sub-block ``(x, y)`` and, through eligibility, everything above it."""
        node = self.units[(TX, y)].nodes[x]
        node.ok, node.rule = False, "dropped"
        self.reselect()
        self.replay()

    # -- queries ----------------------------------------------------------

    def is_canonical(self, x: int, h: int) -> bool:
        unit = self.units.get((TX, h))
        return unit is not None and x in unit.pos

    def canonical_path(self, h: int) -> list[int]:
        return list(self.units[(TX, h)].path)

    def tip(self, key: UnitKey) -> int:
        return self.units[key].tip

    def chain_length(self, h: int) -> int:
        """Accepted sub-blocks at ``h``, genesis excluded."""
        return len(self.units[(TX, h)].path) - 1

    def ledger_digest(self, h: int) -> bytes:
        return self.ledgers[h].digest()

    def path_digest(self, h: int) -> bytes:
        path = self.units[(TX, h)].path
        return H(b"".join(self.records[x].header.hash for x in path))

    def supply_by_height(self, include_unsettled: bool = True) -> dict[int, int]:
        return {h: l.total(include_unsettled) for h, l in self.ledgers.items()}

    def total_supply(self, include_unsettled: bool = True) -> int:
        return sum(self.supply_by_height(include_unsettled).values())

    def expected_supply(self) -> int:
        """Supply recomputed from the canonical sets alone (accounting oracle)."""
        total = 0
        dynamic: dict[Outpoint, tuple[Address, int]] = {}
        spent: set[Outpoint] = set()

        def created(op: Outpoint, addr: Address, amount: int) -> None:
            if addr.dynamic is not None:
                dynamic[op] = (addr, amount)

        for i, (addr, amount) in enumerate(self.premine):
            if addr.base_height <= self.cutoff:
                total += amount
                created(premine_outpoint(i), addr, amount)
        for rec in self.records[1:]:
            x = rec.index
            for h in range(min(self.cutoff, rec.top) + 1):
                sb = rec.subblocks[h]
                if x in self.units[(TX, h)].pos:
                    for tx in sb.txs:
                        spent.update(i.outpoint for i in tx.inputs)
                        if tx.kind == TxKind.MOVE_DOWN:
                            total -= tx.input_total
                        elif tx.kind == TxKind.MOVE_UP and tx.param > self.cutoff:
                            total -= tx.input_total
                        else:
                            total -= tx.fee
                            for n, o in enumerate(tx.outputs):
                                created(Outpoint(tx.txid, n), o.address, o.amount)
                    if h == rec.top and rec.header.coinbase is not None:
                        total += rec.header.coinbase[1]
                        created(Outpoint(rec.header.coinbase_outpoint_txid, 0), *rec.header.coinbase)
                for t in sb.claim_trees:
                    key = (CL, h, t.offset)
                    if (key, x) in self.settled or x in self.units[key].pos:
                        total += t.total
                        for c in t.claims:
                            created(c.outpoint, c.recipient, c.amount)
        # unspent dynamic coins that have climbed past the cutoff left the view
        now = len(self.records) - 1
        for op, (addr, amount) in dynamic.items():
            if op not in spent and effective_height(addr, now, self.params.max_height) > self.cutoff:
                total -= amount
        return total

    def canonical_coinbases(self) -> int:
        n = 0
        for rec in self.records[1:]:
            if rec.top <= self.cutoff and rec.index in self.units[(TX, rec.top)].pos and rec.header.coinbase:
                n += 1
        return n

    def reversed_claims(self) -> int:
        return len(self.ever_live - self.live_claims - self.settled)

    def verdict_log(self) -> list[list[tuple[int, str, str]]]:
        return [
            [(h, v.status.value, v.rule) for h, v in sorted(rec.verdicts.items())]
            for rec in self.records
        ]

    # -- cutoff changes ---------------------------------------------------

    def serve(self, x: int, lo: int, hi: int) -> tuple[tuple[SubBlock, ...], Optional[bytes]]:
        """Sub-blocks ``lo..hi`` of block ``x`` plus the tail ``h_{hi+1}`` (None at the top)."""
        rec = self.records[x]
        hi = min(hi, rec.top)
        if hi > self.cutoff:
            raise ConsensusError("peer does not hold the requested heights")
        subs = tuple(rec.subblocks[h] for h in range(lo, hi + 1))
        prefix = rec.prefix
        if hi == prefix.cut:
            tail = prefix.tail
        else:
            tail = prefix.intermediates[hi]
        return subs, tail

    def rebuilt(self, new_cutoff: int, peer: Optional["ChainView"] = None) -> "ChainView":
        """A view at ``new_cutoff`` replayed from genesis over the same blocks.

        Lowering truncates every held prefix; raising fetches the withheld
        sub-blocks from ``peer`` and authenticates them against the stored tails.
        """
        messages = []
        for rec in self.records:
            want = min(new_cutoff, rec.top)
            prefix, subs = rec.prefix, tuple(rec.subblocks[h] for h in sorted(rec.subblocks))
            if want < prefix.cut:
                prefix, subs = truncate_prefix(prefix, want), subs[: want + 1]
            elif want > prefix.cut:
                if peer is None:
                    raise ConsensusError("raising the cutoff needs a peer")
                extra, tail = peer.serve(rec.index, prefix.cut + 1, want)
                try:
                    prefix = extend_prefix(prefix, [sb.digest for sb in extra], tail)
                except ValueError as exc:
                    raise ConsensusError("peer served unauthenticated trees") from exc
                subs = subs + extra
            messages.append(BlockMessage(rec.header, prefix, subs))
        view = ChainView(self.params, new_cutoff, self.premine, self.scheme, self.lenient)
        if view.records[0].header != messages[0].header:
            raise ConsensusError("genesis mismatch")
        for msg in messages[1:]:
            view.receive_message(msg)
        return view


def validate_subblock(view: ChainView, block: Block, y: int) -> Verdict:
    """Verdict on sub-block ``y`` of a prospective next block, from ``view``'s position."""
    if y > view.cutoff:
        raise ValueError("height above the view's cutoff")
    return view.evaluate_block(block)[y]
