"""Protocol parameters and the pure consensus rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from ..ledger import MAX_HEIGHT


class ConsensusError(ValueError):
    pass


@dataclass(frozen=True)
class Params:
    base_size: int = 1024
    base_conf: int = 100
    max_height: int = MAX_HEIGHT
    subsidy: int = 50
    pow_bits: int = 4

    def to_dict(self) -> dict:
        return {
            "base_size": self.base_size,
            "base_conf": self.base_conf,
            "max_height": self.max_height,
            "subsidy": self.subsidy,
            "pow_bits": self.pow_bits,
        }


def size_budget(y: int, base: int = 1024) -> int:
    """Byte budget of the sub-block at height ``y``: 1, 1, 2, 4, 8, ... times ``base``."""
    if y < 0:
        raise ValueError("negative height")
    return base if y == 0 else base << (y - 1)


def cumulative_budget(cutoff: int, base: int = 1024) -> int:
    return sum(size_budget(y, base) for y in range(cutoff + 1))


def confirm_target(x: int, y: int, drop_n: int) -> int:
    """Block index confirmed by the sub-block at ``(x, y)`` that drops ``drop_n`` predecessors."""
    target = x - drop_n - 1
    if target < 0 or drop_n < 0:
        raise ConsensusError("drops past genesis")
    return target


def maturity_required(source_height: int, base_conf: int = 100) -> int:
    return (source_height + 1) * base_conf


def claim_offsets(y: int, top: int, max_height: int = MAX_HEIGHT) -> list[int]:
    """Offsets ``2^k`` a sub-block at ``y`` carries claim trees for, in a block reaching ``top``."""
    out = []
    offset = 1
    while y + offset <= min(top, max_height):
        out.append(offset)
        offset *= 2
    return out


@dataclass
class ClaimBudget:
    mined: int
    fees_by_height: list[int] = field(default_factory=list)
    claimed_by_height: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.mined < 0 or min(self.fees_by_height + self.claimed_by_height, default=0) < 0:
            raise ValueError("budget entries must be non-negative")

    def allowance(self, y: int) -> int:
        """Largest admissible ``claimed_y`` given everything below it."""
        fees = sum(self.fees_by_height[: y + 1])
        below = sum(self.claimed_by_height[:y])
        return self.mined + fees - below


def claim_limit_check(budget: ClaimBudget, y: int) -> None:
    """Raise unless ``claimed_y <= mined + sum(fees_0..y) - sum(claimed_0..y-1)``."""
    claimed = budget.claimed_by_height[y] if y < len(budget.claimed_by_height) else 0
    if claimed > budget.allowance(y):
        raise ConsensusError(f"claim limit exceeded at height {y}")


def check_claim_limits(budget: ClaimBudget, upto: int) -> None:
    for y in range(upto + 1):
        claim_limit_check(budget, y)


class Status(str, Enum):
    ACCEPT = "accept"
    REJECT_WEAK = "reject_weak"
    REJECT_STRONG = "reject_strong"


@dataclass(frozen=True)
class Verdict:
    status: Status
    rule: str = ""

    @property
    def strong(self) -> bool:
        return self.status is Status.REJECT_STRONG


ACCEPT = Verdict(Status.ACCEPT)


@dataclass(frozen=True)
class Candidate:
    """A competing sub-block chain: the block indices of its members, genesis first."""

    blocks: tuple[int, ...]
    height: int = 0
    tip_digest: bytes = b""

    @property
    def length(self) -> int:
        return len(self.blocks)

    @property
    def tip(self) -> int:
        return self.blocks[-1]


def fork_key(c: Candidate) -> tuple:
    return (-c.length, c.tip, c.height, c.tip_digest)


def fork_choice(candidates: Sequence[Candidate]) -> Candidate:
    """Longest chain; ties go to the tip in the earlier block, then lower height, then digest."""
    if not candidates:
        raise ConsensusError("no candidates")
    return min(candidates, key=fork_key)
