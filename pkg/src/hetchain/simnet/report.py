"""Run reports, time series and figures."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from ..consensus.dump import Dump, write_dump
from ..consensus.rules import Status
from ..miner import HONEST

if TYPE_CHECKING:
    from .engine import Simulation


@dataclass
class RunReport:
    name: str
    seed: int
    blocks: int
    params: dict
    chain_lengths: dict[str, list[int]]
    supply_by_height: dict[str, int]
    total_supply: int
    settled_supply: int
    settled_claims: int
    reversed_claims: int
    max_reorg: dict[str, dict[str, int]]
    strong_rejections: list[list]
    weak_rejections: int
    false_claims: list[dict]
    false_claim_gain: dict[str, int]
    settlements: list[dict]
    producers: dict[str, int]
    transactions_injected: int
    invariants: dict[str, bool]
    agreement: dict[str, bool]
    event_log_digest: str
    baseline: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.invariants.values())

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [
            f"scenario {self.name} seed {self.seed}: {self.blocks} blocks",
            f"supply total {self.total_supply} settled {self.settled_supply}",
            f"claims settled {self.settled_claims} reversed {self.reversed_claims}",
            f"strong rejections {len(self.strong_rejections)} weak rejections {self.weak_rejections}",
        ]
        if self.baseline:
            lines.append(f"honest baseline settled supply {self.baseline['settled_supply']}")
        if self.false_claims:
            total = sum(self.false_claim_gain.values())
            lines.append(f"false claims {len(self.false_claims)}, settled false gain {total}")
        for b, h, rule in self.strong_rejections[:10]:
            lines.append(f"  strong reject block {b} height {h}: {rule}")
        lines.append("chain lengths:")
        for mid, lengths in sorted(self.chain_lengths.items()):
            reorg = self.max_reorg.get(mid, {})
            worst = max(reorg.values(), default=0)
            lines.append(f"  {mid:<10} {lengths} max reorg {worst}")
        lines.append("invariants:")
        for k, v in sorted({**self.invariants, **self.agreement}.items()):
            lines.append(f"  {'ok  ' if v else 'FAIL'} {k}")
        lines.append(f"event log {self.event_log_digest}")
        return "\n".join(lines) + "\n"


def build_report(sim: "Simulation") -> RunReport:
    o = sim.observer
    p = sim.params
    strong, weak = [], 0
    for rec in o.records[1:]:
        for h, v in sorted(rec.verdicts.items()):
            if v.status is Status.REJECT_STRONG:
                strong.append([rec.index, h, v.rule])
            elif v.status is Status.REJECT_WEAK:
                weak += 1
    chain_lengths = {"observer": [o.chain_length(h) for h in range(o.cutoff + 1)]}
    max_reorg = {"observer": {str(h): o.max_reorg[h] for h in range(o.cutoff + 1)}}
    for m in sim.miners:
        chain_lengths[m.id] = [m.view.chain_length(h) for h in range(m.view.cutoff + 1)]
        max_reorg[m.id] = {str(h): m.view.max_reorg[h] for h in range(m.view.cutoff + 1)}

    agreement = {}
    honest = [m for m in sim.miners if m.config.behavior == HONEST]
    for h in range(p.max_height + 1):
        group = [m.view.path_digest(h) for m in honest if m.view.cutoff >= h]
        if len(group) > 1:
            agreement[f"agree_height_{h}"] = len(set(group)) == 1

    gain = sim.settled_false_gain_by_block()
    premine = sum(a for _, a in sim.premine)
    invariants = {
        "supply_conservation": True,  # violations abort the run
        "no_inflation": o.total_supply(include_unsettled=False) <= premine + p.subsidy * (o.height - 1),
        "false_gain_within_budget": all(gain.get(r.block, 0) <= r.budget for r in sim.false_claims),
        "size_budget": not sim.size_violations,
    }
    return RunReport(
        name=sim.cfg.name,
        seed=sim.cfg.seed,
        blocks=o.height - 1,
        params=p.to_dict(),
        chain_lengths=chain_lengths,
        supply_by_height={str(h): v for h, v in o.supply_by_height().items()},
        total_supply=o.total_supply(),
        settled_supply=o.total_supply(include_unsettled=False),
        settled_claims=len(o.settled),
        reversed_claims=o.reversed_claims(),
        max_reorg=max_reorg,
        strong_rejections=strong,
        weak_rejections=weak,
        false_claims=[asdict(r) for r in sim.false_claims],
        false_claim_gain={str(k): v for k, v in sorted(gain.items())},
        settlements=list(o.settlements),
        producers=dict(sim.producers),
        transactions_injected=sim.injected,
        invariants=invariants,
        agreement=agreement,
        event_log_digest=sim.log.hexdigest(),
    )


def write_timeseries(sim: "Simulation", path: Path) -> None:
    n = sim.params.max_height + 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "producer", "total_supply", "settled_supply", "mempool",
                    "strong", "weak"] + [f"len_h{h}" for h in range(n)])
        for s in sim.samples:
            w.writerow([s.block, s.producer, s.total_supply, s.settled_supply, s.mempool,
                        s.strong, s.weak] + s.chain_lengths)


def write_figures(sim: "Simulation", out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [s.block for s in sim.samples]
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for h in range(sim.params.max_height + 1):
        ax.plot(xs, [s.chain_lengths[h] for s in sim.samples], label=f"h{h}", lw=1)
    ax.set_xlabel("block")
    ax.set_ylabel("canonical chain length")
    ax.set_title(f"{sim.cfg.name}: chain length per height")
    ax.legend(fontsize="small", ncol=3)
    fig.tight_layout()
    paths.append(out / "chain_lengths.png")
    fig.savefig(paths[-1], dpi=100)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(xs, [s.total_supply for s in sim.samples], label="total")
    ax.plot(xs, [s.settled_supply for s in sim.samples], label="settled", ls="--")
    ax.set_xlabel("block")
    ax.set_ylabel("coins")
    ax.set_title(f"{sim.cfg.name}: supply")
    ax.legend()
    fig.tight_layout()
    paths.append(out / "supply.png")
    fig.savefig(paths[-1], dpi=100)
    plt.close(fig)
    return paths


def chain_dump(sim: "Simulation") -> Dump:
    return Dump(
        sim.params, list(sim.premine), list(sim.blocks),
        [[list(v) for v in rec] for rec in sim.observer.verdict_log()],
        dict(sim.scheme.registry), {"scenario": sim.cfg.name, "seed": sim.cfg.seed},
    )


def write_outputs(report: RunReport, sim: "Simulation", out: Path | str, figures: bool = True) -> dict[str, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report": out / "report.json",
        "summary": out / "report.txt",
        "timeseries": out / "timeseries.csv",
        "dump": out / "chain.dump",
    }
    files["report"].write_text(report.to_json())
    files["summary"].write_text(report.to_text())
    write_timeseries(sim, files["timeseries"])
    write_dump(files["dump"], chain_dump(sim))
    if figures:
        for path in write_figures(sim, out):
            files[path.stem] = path
    return files
