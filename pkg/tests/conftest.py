"""Shared helpers: a tiny signed world of users, coins and views."""

import sys
from dataclasses import dataclass, field
from typing import Optional

import pytest

from hetchain.consensus import ChainView, Params
from hetchain.consensus.view import premine_outpoint
from hetchain.ledger import (
    Address,
    Schedule,
    TestScheme,
    Transaction,
    TxInput,
    TxKind,
    TxOutput,
)
from hetchain.miner import Miner, MinerConfig


@dataclass
class World:
    params: Params
    scheme: TestScheme = field(default_factory=TestScheme)
    premine: list = field(default_factory=list)

    def key(self, name: str) -> tuple[bytes, bytes]:
        return self.scheme.keypair(name)

    def addr(self, name: str, height: int, schedule: Optional[Schedule] = None) -> Address:
        return Address(self.key(name)[1], height, schedule)

    def fund(self, name: str, height: int, amount: int, schedule: Optional[Schedule] = None) -> int:
        self.premine.append((self.addr(name, height, schedule), amount))
        return len(self.premine) - 1

    def premine_input(self, i: int) -> TxInput:
        return TxInput(premine_outpoint(i), self.premine[i][1])

    def tx(self, owner: str, inputs, outputs, height: int, kind=TxKind.SAME_HEIGHT, param: int = 0) -> Transaction:
        tx = Transaction(height, kind, tuple(inputs), tuple(TxOutput(a, n) for a, n in outputs), param)
        return tx.signed(self.scheme, [self.key(owner)[0]] * len(inputs))

    def view(self, cutoff: int, lenient: bool = False) -> ChainView:
        return ChainView(self.params, cutoff, self.premine, self.scheme, lenient)

    def miner(self, name: str, cutoff: int, behavior: str = "honest", **attack) -> Miner:
        cfg = MinerConfig(name, cutoff, behavior=behavior, attack=attack)
        return Miner(cfg, self.params, self.key(f"miner:{name}")[1], self.premine, self.scheme)


def mine(miner: Miner, *others: ChainView, n: int = 1):
    """Produce ``n`` blocks with ``miner`` and feed them to ``others``."""
    blocks = []
    for _ in range(n):
        b = miner.produce()
        miner.view.receive_block(b)
        for v in others:
            v.receive_block(b)
        blocks.append(b)
    return blocks


@pytest.fixture
def world():
    return World(Params(base_size=1024, base_conf=2, max_height=3, subsidy=50, pow_bits=0))


def pytest_terminal_summary(terminalreporter):
    results = next(
        (m.ACCEPTANCE_RESULTS for m in list(sys.modules.values()) if hasattr(m, "ACCEPTANCE_RESULTS")),
        None,
    )
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, title, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
