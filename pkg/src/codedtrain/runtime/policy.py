"""Straggler emulation: which workers are slow, and how.

Delay is injected into the worker's compute task only, per iteration;
the encoding phase runs at full speed. FIXED_DELAY adds a constant sleep
before each partial product; SLOWDOWN stretches compute time by a factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["StragglerMode", "StragglerPolicy", "choose_stragglers"]


class StragglerMode(Enum):
    FIXED_DELAY = "fixed-delay"
    SLOWDOWN = "slowdown"


def choose_stragglers(n: int, count: int, seed: int) -> frozenset[int]:
    """Pick count distinct straggler ids out of n workers, seeded."""
    if not 0 <= count <= n:
        raise ValueError(f"straggler count {count} outside [0, {n}]")
    rng = np.random.default_rng(seed)
    return frozenset(int(i) for i in rng.choice(n, size=count, replace=False))


@dataclass(frozen=True)
class StragglerPolicy:
    """Straggler ids plus the slowdown mechanism applied to each."""

    straggler_ids: frozenset[int]
    mode: StragglerMode = StragglerMode.FIXED_DELAY
    # seconds for FIXED_DELAY, multiplier >= 1 for SLOWDOWN
    magnitude: float = 0.0

    def __post_init__(self) -> None:
        if self.mode is StragglerMode.SLOWDOWN and self.magnitude < 1.0:
            raise ValueError(f"slowdown factor must be >= 1, got {self.magnitude}")
        if self.mode is StragglerMode.FIXED_DELAY and self.magnitude < 0.0:
            raise ValueError(f"fixed delay must be >= 0, got {self.magnitude}")
        object.__setattr__(self, "straggler_ids", frozenset(int(i) for i in self.straggler_ids))

    @classmethod
    def none(cls) -> "StragglerPolicy":
        return cls(frozenset())

    @classmethod
    def fixed_delay(cls, ids, seconds: float) -> "StragglerPolicy":
        return cls(frozenset(ids), StragglerMode.FIXED_DELAY, seconds)

    @classmethod
    def slowdown(cls, ids, factor: float) -> "StragglerPolicy":
        return cls(frozenset(ids), StragglerMode.SLOWDOWN, factor)

    def for_worker(self, worker_id: int) -> tuple[StragglerMode, float] | None:
        if worker_id in self.straggler_ids:
            return (self.mode, self.magnitude)
        return None

    def validate(self, n: int) -> None:
        if len(self.straggler_ids) > n:
            raise ValueError("more stragglers than workers")
        for i in self.straggler_ids:
            if not 0 <= i < n:
                raise ValueError(f"straggler id {i} outside [0, {n})")
