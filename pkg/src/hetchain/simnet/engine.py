"""Discrete-event simulation of a population of miners.

One logical clock tick per block.  Each tick the producer is drawn by
hashrate weight among reachable miners, syncs every block it has not seen
yet, assembles a block and broadcasts it.  Every other miner receives the
header plus the stream prefix tailored to its own cutoff after a seeded
delay; per-receiver delivery is FIFO so views never see blocks out of order.
A passive observer at the maximum height receives every block at once and
backs the user wallets and the supply invariants.
"""

from __future__ import annotations

import hashlib
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..consensus.block import Block
from ..consensus.rules import Status, size_budget
from ..consensus.view import ChainView
from ..ledger import (
    CLAIM,
    Address,
    Coin,
    Schedule,
    TestScheme,
    Transaction,
    TxInput,
    TxKind,
    TxOutput,
    effective_height,
)
from ..miner import HONEST, Miner, MinerConfig, adjust_cutoff
from .config import ScenarioConfig


class InvariantViolation(RuntimeError):
    pass


class Streams:
    """Named, independent generators derived from one seed."""

    def __init__(self, seed: int) -> None:
        self.seed = seed
        self._streams: dict[str, np.random.Generator] = {}

    def __call__(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode()),))
            self._streams[name] = np.random.default_rng(ss)
        return self._streams[name]


@dataclass
class Sample:
    block: int
    producer: str
    total_supply: int
    settled_supply: int
    chain_lengths: list[int]
    mempool: int
    strong: int
    weak: int


@dataclass
class FalseClaimRecord:
    block: int
    amount: int
    budget: int


class Simulation:
    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg.validate()
        self.params = cfg.params
        self.rng = Streams(cfg.seed)
        self.scheme = TestScheme()
        self.keys = {u: self.scheme.keypair(f"user:{u}") for u in cfg.users}
        self.premine: list[tuple[Address, int]] = []
        for pm in cfg.premine:
            schedule = Schedule(pm.lock_period, pm.step_period, 0) if pm.dynamic else None
            self.premine.append((Address(self.keys[pm.user][1], pm.height, schedule), pm.amount))
        self.miners: list[Miner] = []
        for spec in cfg.miners:
            _, key_id = self.scheme.keypair(f"miner:{spec.id}")
            mc = MinerConfig(spec.id, spec.cutoff, spec.weight, spec.behavior, attack=dict(spec.attack))
            self.miners.append(Miner(mc, self.params, key_id, self.premine, self.scheme))
        self.by_id = {m.id: m for m in self.miners}
        self.weights = {m.id: float(m.config.hashrate_weight) for m in self.miners}
        self.observer = ChainView(self.params, self.params.max_height, self.premine, self.scheme)
        self.blocks: list[Block] = [self._genesis()]
        self.inbox: dict[str, deque] = {m.id: deque() for m in self.miners}
        self.last_delivery: dict[str, int] = {m.id: 0 for m in self.miners}
        self.locked: dict = {}
        self.samples: list[Sample] = []
        self.events: list[str] = []
        self.log = hashlib.sha256()
        self.false_claims: list[FalseClaimRecord] = []
        self.producers: dict[str, int] = {m.id: 0 for m in self.miners}
        self.injected = 0
        self.size_violations: list[tuple[int, int, int]] = []

    def _genesis(self) -> Block:
        rec = self.observer.records[0]
        return Block(rec.header, tuple(rec.subblocks[h] for h in sorted(rec.subblocks)))

    # -- bookkeeping ------------------------------------------------------

    def note(self, text: str) -> None:
        self.events.append(text)
        self.log.update(text.encode() + b"\n")

    def online(self, miner_id: str, x: int) -> bool:
        for part in self.cfg.network.partitions:
            if part.start <= x < part.end and miner_id in part.miners:
                return False
        return True

    def deliver(self, miner: Miner, upto: Optional[int]) -> None:
        box = self.inbox[miner.id]
        while box and (upto is None or box[0][0] <= upto):
            _, idx = box.popleft()
            if idx < miner.view.height:
                continue
            miner.view.receive_message(self.blocks[idx].message(miner.view.cutoff))

    def sync(self, miner: Miner) -> None:
        self.deliver(miner, None)
        while miner.view.height < len(self.blocks):
            miner.view.receive_block(self.blocks[miner.view.height])

    # -- events and traffic ----------------------------------------------

    def apply_events(self, x: int) -> None:
        for e in self.cfg.events:
            if e.at != x:
                continue
            miner = self.by_id[e.miner]
            if e.action == "set_weight":
                self.weights[e.miner] = float(e.value)
                miner.config.hashrate_weight = float(e.value)
            else:
                self.sync(miner)
                adjust_cutoff(miner, int(e.value), self.observer)
                for tx in self._pending_txs():
                    miner.mempool.add(tx)
            self.note(f"{x} event {e.action} {e.miner} {e.value}")

    def _pending_txs(self) -> list[Transaction]:
        return [tx for tx, _ in self.locked.values()]

    def spendable(self, user: str, height: int, now: int) -> list[Coin]:
        key_id = self.keys[user][1]
        ledger = self.observer.ledgers[height]
        out = []
        for op, coin in sorted(ledger.utxos.items()):
            if coin.owner.id != key_id or op in self.locked:
                continue
            if coin.maturity > ledger.chain_length or coin.origin == CLAIM:
                continue
            if effective_height(coin.owner, now, self.params.max_height) != height:
                continue
            out.append(coin)
        return out

    def release_locks(self, x: int) -> None:
        for op in list(self.locked):
            tx, at = self.locked[op]
            gone = all(
                i.outpoint not in self.observer.ledgers[tx.height].utxos for i in tx.inputs
            )
            if gone or x - at > 4 * self.params.base_conf + 20:
                del self.locked[op]

    def broadcast(self, tx: Transaction, x: int) -> None:
        for i in tx.inputs:
            self.locked[i.outpoint] = (tx, x)
        for m in self.miners:
            m.mempool.add(tx)
        self.injected += 1
        self.note(f"{x} tx {tx.txid.hex()[:16]} h{tx.height} k{int(tx.kind)}")

    def make_tx(self, user: str, coin: Coin, kind: str, dest: int, amount: int,
                fee: int, recipient: str) -> Optional[Transaction]:
        if coin.amount < amount + fee or amount < 1:
            return None
        h = coin.height
        to = Address(self.keys[recipient][1], dest)
        outputs = [TxOutput(to, amount)]
        change = coin.amount - amount - fee
        if change:
            outputs.append(TxOutput(Address(self.keys[user][1], dest if kind != "same" else h), change))
        if kind == "same":
            tk, param = TxKind.SAME_HEIGHT, 0
        elif kind == "up":
            tk, param = TxKind.MOVE_UP, dest
        else:
            tk, param = TxKind.MOVE_DOWN, h - dest
        tx = Transaction(h, tk, (TxInput(coin.outpoint, coin.amount),), tuple(outputs), param)
        return tx.signed(self.scheme, [self.keys[user][0]])

    def inject(self, x: int) -> None:
        for s in self.cfg.transactions:
            if s.at != x:
                continue
            coins = [c for c in self.spendable(s.user, s.height, x) if c.amount >= s.amount + s.fee]
            if not coins:
                self.note(f"{x} scripted tx skipped: no coin for {s.user}@{s.height}")
                continue
            coin = min(coins, key=lambda c: (c.amount, c.outpoint))
            tx = self.make_tx(s.user, coin, s.kind, s.destination, s.amount, s.fee, s.recipient or s.user)
            if tx is not None:
                self.broadcast(tx, x)
        t = self.cfg.traffic
        if t.rate <= 0 or x < t.start or (t.stop is not None and x >= t.stop):
            return
        rng = self.rng("traffic")
        kinds = sorted(t.mix)
        weights = np.array([t.mix[k] for k in kinds], dtype=float)
        weights /= weights.sum()
        users = list(t.users or self.cfg.users)
        top = self.params.max_height
        for _ in range(int(rng.poisson(t.rate))):
            user = users[int(rng.integers(len(users)))]
            kind = kinds[int(rng.choice(len(kinds), p=weights))]
            recipient = users[int(rng.integers(len(users)))]
            h = int(rng.integers(top + 1))
            coins = self.spendable(user, h, x)
            if not coins:
                continue
            coin = coins[int(rng.integers(len(coins)))]
            if kind == "up":
                if h == top:
                    continue
                dest = int(rng.integers(h + 1, top + 1))
                amount = coin.amount - t.fee
            elif kind == "down":
                if h == 0:
                    continue
                k = int(rng.integers(int(np.log2(h)) + 1))
                dest = h - (1 << k)
                amount = coin.amount - t.fee
                if amount > t.max_down:
                    continue
            else:
                dest = h
                amount = int(rng.integers(1, coin.amount)) if coin.amount > t.fee + 1 else coin.amount - t.fee
            tx = self.make_tx(user, coin, kind, dest, amount, t.fee, recipient)
            if tx is not None:
                self.broadcast(tx, x)

    # -- the loop ---------------------------------------------------------

    def draw_producer(self, x: int) -> Miner:
        live = [m for m in self.miners if self.online(m.id, x) and self.weights[m.id] > 0]
        if not live:
            live = [m for m in self.miners if self.weights[m.id] > 0] or self.miners
        w = np.array([self.weights[m.id] for m in live], dtype=float)
        if w.sum() <= 0:
            w = np.ones(len(live))
        i = int(self.rng("lottery").choice(len(live), p=w / w.sum()))
        return live[i]

    def step(self, x: int) -> None:
        self.apply_events(x)
        self.release_locks(x)
        self.inject(x)
        for m in self.miners:
            if self.online(m.id, x):
                self.deliver(m, x)
        producer = self.draw_producer(x)
        self.sync(producer)
        block = producer.produce()
        self.blocks.append(block)
        self.producers[producer.id] += 1
        for sb in block.subblocks:
            if sb.size > size_budget(sb.height, self.params.base_size):
                self.size_violations.append((x, sb.height, sb.size))
        producer.view.receive_block(block)
        verdicts = self.observer.receive_block(block)
        self.record_false_claims(block)
        delay = self.rng("delay")
        for m in self.miners:
            if m is producer:
                continue
            d = int(delay.integers(self.cfg.network.delay_min, self.cfg.network.delay_max + 1))
            at = max(x + d, self.last_delivery[m.id])
            self.last_delivery[m.id] = at
            self.inbox[m.id].append((at, x))
        rejected = ",".join(f"{h}:{v.rule}" for h, v in sorted(verdicts.items()) if v.status is not Status.ACCEPT)
        self.note(f"{x} block {producer.id} top{block.top} {block.header.hash.hex()[:16]} {rejected}")
        self.check_invariants(x)
        self.samples.append(self.sample(x, producer.id))

    def record_false_claims(self, block: Block) -> None:
        """Claims not mirroring any move-down transaction in the same block."""
        real = set()
        for sb in block.subblocks:
            for tx in sb.txs:
                if tx.kind == TxKind.MOVE_DOWN:
                    real.add(tx.txid)
        amount = sum(
            c.amount for sb in block.subblocks for t in sb.claim_trees for c in t.claims
            if c.matching_txid not in real
        )
        if amount:
            budget = self.params.subsidy + sum(sb.fees for sb in block.subblocks)
            self.false_claims.append(FalseClaimRecord(block.index, amount, budget))
            self.note(f"{block.index} false-claim {amount} budget {budget}")

    def check_invariants(self, x: int) -> None:
        views = [("observer", self.observer)] + [(m.id, m.view) for m in self.miners]
        for name, view in views:
            if view.expected_supply() != view.total_supply():
                raise InvariantViolation(
                    f"supply conservation failed for {name} at block {x}: "
                    f"expected {view.expected_supply()} got {view.total_supply()}"
                )
        cap = sum(a for _, a in self.premine) + self.params.subsidy * x
        settled = self.observer.total_supply(include_unsettled=False)
        if settled > cap:
            raise InvariantViolation(f"inflation at block {x}: settled {settled} > {cap}")
        gain = self.settled_false_gain_by_block()
        for rec in self.false_claims:
            if gain.get(rec.block, 0) > rec.budget:
                raise InvariantViolation(f"false claims in block {rec.block} settled above budget")

    def settled_false_gain_by_block(self) -> dict[int, int]:
        """Settled false-claim amount per block, worst case over every view."""
        fake = {r.block for r in self.false_claims}
        out: dict[int, int] = {}
        views = [self.observer] + [m.view for m in self.miners]
        for view in views:
            gain: dict[int, int] = {}
            for s in view.settlements:
                if s["block"] not in fake:
                    continue
                block = self.blocks[s["block"]]
                real = {tx.txid for sb in block.subblocks for tx in sb.txs if tx.kind == TxKind.MOVE_DOWN}
                tree = block.subblocks[s["height"]].tree(s["offset"])
                amt = sum(c.amount for c in tree.claims if c.matching_txid not in real)
                gain[s["block"]] = gain.get(s["block"], 0) + amt
            for b, amt in gain.items():
                out[b] = max(out.get(b, 0), amt)
        return out

    def sample(self, x: int, producer: str) -> Sample:
        o = self.observer
        strong = weak = 0
        for v in o.records[-1].verdicts.values():
            strong += v.status is Status.REJECT_STRONG
            weak += v.status is Status.REJECT_WEAK
        return Sample(
            x, producer, o.total_supply(), o.total_supply(include_unsettled=False),
            [o.chain_length(h) for h in range(self.params.max_height + 1)],
            sum(len(m.mempool) for m in self.miners), strong, weak,
        )

    def finish(self) -> None:
        """Heal the network: every miner catches up with every block."""
        for m in self.miners:
            self.sync(m)

    def run(self):
        from .report import build_report

        for x in range(1, self.cfg.duration + 1):
            self.step(x)
        self.finish()
        return build_report(self)


def run(cfg: ScenarioConfig, with_baseline: bool = True):
    """Run ``cfg``; adversarial scenarios also run their honest baseline."""
    sim = Simulation(cfg)
    report = sim.run()
    if with_baseline and any(m.behavior != HONEST for m in cfg.miners):
        base = Simulation(cfg.honest_baseline()).run()
        report.baseline = {
            "total_supply": base.total_supply,
            "settled_supply": base.settled_supply,
        }
        report.invariants["settled_supply_le_baseline"] = report.settled_supply <= base.settled_supply
    return report, sim
