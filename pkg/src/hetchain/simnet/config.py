"""Scenario configuration: YAML files <-> dataclasses."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from ..consensus.rules import Params
from ..miner import BEHAVIORS, HONEST

KINDS = ("same", "up", "down")
ACTIONS = ("set_weight", "set_cutoff")


class ConfigError(ValueError):
    pass


def _fail(name: str) -> ConfigError:
    return ConfigError(f"invalid config: {name}")


@dataclass
class MinerSpec:
    id: str
    cutoff: int
    weight: float = 1.0
    behavior: str = HONEST
    attack: dict = field(default_factory=dict)


@dataclass
class PremineSpec:
    user: str
    height: int
    amount: int
    lock_period: Optional[int] = None
    step_period: Optional[int] = None

    @property
    def dynamic(self) -> bool:
        return self.lock_period is not None


@dataclass
class TrafficSpec:
    rate: float = 0.0
    fee: int = 1
    mix: dict = field(default_factory=lambda: {"same": 1.0})
    start: int = 1
    stop: Optional[int] = None
    max_down: int = 10
    users: Optional[list[str]] = None


@dataclass
class ScriptedTx:
    at: int
    user: str
    kind: str
    height: int
    amount: int
    to: Optional[int] = None
    fee: int = 0
    recipient: Optional[str] = None

    @property
    def destination(self) -> int:
        return self.height if self.to is None else self.to


@dataclass
class Partition:
    start: int
    end: int
    miners: list[str]


@dataclass
class NetworkSpec:
    delay_min: int = 0
    delay_max: int = 0
    partitions: list[Partition] = field(default_factory=list)


@dataclass
class EventSpec:
    at: int
    action: str
    miner: str
    value: float


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    duration: int
    params: Params
    miners: list[MinerSpec]
    network: NetworkSpec = field(default_factory=NetworkSpec)
    users: list[str] = field(default_factory=list)
    premine: list[PremineSpec] = field(default_factory=list)
    traffic: TrafficSpec = field(default_factory=TrafficSpec)
    transactions: list[ScriptedTx] = field(default_factory=list)
    events: list[EventSpec] = field(default_factory=list)
    baseline: bool = False
    description: str = ""

    def validate(self) -> "ScenarioConfig":
        p = self.params
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise _fail("seed")
        if self.duration < 1:
            raise _fail("duration")
        if p.base_size < 1 or p.base_conf < 1 or p.subsidy < 0 or not 0 <= p.max_height <= 64:
            raise _fail("params")
        if not self.miners:
            raise _fail("miners")
        ids = [m.id for m in self.miners]
        if len(set(ids)) != len(ids):
            raise _fail("miners.id")
        for m in self.miners:
            if not 0 <= m.cutoff <= p.max_height:
                raise _fail(f"miners.{m.id}.cutoff")
            if not m.weight > 0:
                raise _fail(f"miners.{m.id}.weight")
            if m.behavior not in BEHAVIORS and not m.behavior.startswith("script:"):
                raise _fail(f"miners.{m.id}.behavior")
        if not any(m.behavior == HONEST for m in self.miners):
            raise _fail("miners (no honest miner)")
        n = self.network
        if n.delay_min < 0 or n.delay_max < n.delay_min:
            raise _fail("network.delay")
        for part in n.partitions:
            if part.end < part.start or set(part.miners) - set(ids):
                raise _fail("network.partitions")
        users = set(self.users)
        for pm in self.premine:
            if pm.user not in users or pm.amount < 1 or not 0 <= pm.height <= p.max_height:
                raise _fail(f"premine.{pm.user}")
            if (pm.lock_period is None) != (pm.step_period is None):
                raise _fail(f"premine.{pm.user}.dynamic")
            if pm.dynamic and (pm.lock_period < 1 or pm.step_period < 1):
                raise _fail(f"premine.{pm.user}.dynamic")
        t = self.traffic
        if t.rate < 0 or t.fee < 0 or set(t.mix) - set(KINDS) or any(v < 0 for v in t.mix.values()):
            raise _fail("traffic")
        if t.rate > 0 and (not users or sum(t.mix.values()) <= 0):
            raise _fail("traffic")
        if t.users is not None and (not t.users or set(t.users) - users):
            raise _fail("traffic.users")
        for s in self.transactions:
            if s.user not in users or s.kind not in KINDS or s.amount < 1 or s.fee < 0:
                raise _fail("transactions")
            if s.recipient is not None and s.recipient not in users:
                raise _fail("transactions.recipient")
            if not 0 <= s.height <= p.max_height or not 0 <= s.destination <= p.max_height:
                raise _fail("transactions.height")
        for e in self.events:
            if e.action not in ACTIONS or e.miner not in ids or not 1 <= e.at <= self.duration:
                raise _fail("events")
            if e.action == "set_cutoff" and not 0 <= int(e.value) <= p.max_height:
                raise _fail("events.value")
            if e.action == "set_weight" and e.value < 0:
                raise _fail("events.value")
        return self

    def honest_baseline(self) -> "ScenarioConfig":
        """Same world with every adversary replaced by an honest miner."""
        cfg = copy.deepcopy(self)
        for m in cfg.miners:
            m.behavior, m.attack = HONEST, {}
        cfg.baseline = False
        cfg.name = f"{self.name}-baseline"
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        return d

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _build(cls, data: Any, name: str):
    if not isinstance(data, dict):
        raise _fail(name)
    try:
        return cls(**data)
    except TypeError as exc:
        raise _fail(name) from exc


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise _fail("document")
    d = dict(data)
    try:
        params = Params(**d.pop("params", {}))
        net = dict(d.pop("network", {}) or {})
        parts = [_build(Partition, p, "network.partitions") for p in net.pop("partitions", [])]
        network = NetworkSpec(partitions=parts, **net)
        cfg = ScenarioConfig(
            name=d.pop("name"),
            seed=d.pop("seed"),
            duration=d.pop("duration"),
            params=params,
            miners=[_build(MinerSpec, m, "miners") for m in d.pop("miners")],
            network=network,
            users=list(d.pop("users", [])),
            premine=[_build(PremineSpec, p, "premine") for p in d.pop("premine", [])],
            traffic=_build(TrafficSpec, d.pop("traffic", {}) or {}, "traffic"),
            transactions=[_build(ScriptedTx, t, "transactions") for t in d.pop("transactions", [])],
            events=[_build(EventSpec, e, "events") for e in d.pop("events", [])],
            baseline=bool(d.pop("baseline", False)),
            description=d.pop("description", ""),
        )
    except KeyError as exc:
        raise _fail(exc.args[0]) from exc
    except TypeError as exc:
        raise _fail("params or network") from exc
    if d:
        raise _fail(sorted(d)[0])
    return cfg.validate()


def loads(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid config: unparsable ({exc.__class__.__name__})") from exc
    return from_dict(data)


def load(path: Path | str) -> ScenarioConfig:
    return loads(Path(path).read_text())
