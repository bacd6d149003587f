"""Counters collected during a coded run.

Per-worker rows come from the encoding phase; per-round rows from each
broadcast/collect/decode cycle (two per gradient-descent iteration, one for
each operand). Iteration rows aggregate the two rounds and attach the
training objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .wire import Operand, Role

__all__ = ["WorkerEncodeStats", "RoundStats", "IterationStats", "ExperimentMetrics"]


@dataclass
class WorkerEncodeStats:
    worker_id: int
    role: Role
    downloads_x: int
    downloads_xt: int
    encode_nanos: int  # load + download-wait + combine time at the worker

    @property
    def downloads(self) -> int:
        return self.downloads_x + self.downloads_xt


@dataclass
class RoundStats:
    index: int
    operand: Operand
    wall_nanos: int
    responders_used: int
    extra_workers: int
    cancelled: int


@dataclass
class IterationStats:
    iteration: int
    wall_nanos: int
    responders_used: int
    extra_workers: int
    cancelled: int
    objective: float


@dataclass
class ExperimentMetrics:
    workers: list[WorkerEncodeStats] = field(default_factory=list)
    rounds: list[RoundStats] = field(default_factory=list)
    iterations: list[IterationStats] = field(default_factory=list)
    block_responses_sent: int = 0
    late_partials: int = 0

    @property
    def total_downloads(self) -> int:
        return sum(w.downloads for w in self.workers)

    @property
    def total_encode_nanos(self) -> int:
        return sum(w.encode_nanos for w in self.workers)

    @property
    def total_iteration_nanos(self) -> int:
        return sum(r.wall_nanos for r in self.rounds)

    @property
    def total_extra_workers(self) -> int:
        return sum(r.extra_workers for r in self.rounds)

    @property
    def mean_extra_workers_per_round(self) -> float:
        return self.total_extra_workers / len(self.rounds) if self.rounds else 0.0

    def finalize_iterations(self, objectives: list[float]) -> None:
        """Fold the per-operand rounds into per-iteration rows.

        Expects exactly two rounds (X then XT) per objective entry.
        """
        if len(self.rounds) != 2 * len(objectives):
            raise ValueError(
                f"{len(self.rounds)} rounds for {len(objectives)} iterations"
            )
        self.iterations = []
        for t, obj in enumerate(objectives):
            a, b = self.rounds[2 * t], self.rounds[2 * t + 1]
            self.iterations.append(
                IterationStats(
                    iteration=t,
                    wall_nanos=a.wall_nanos + b.wall_nanos,
                    responders_used=a.responders_used + b.responders_used,
                    extra_workers=a.extra_workers + b.extra_workers,
                    cancelled=a.cancelled + b.cancelled,
                    objective=obj,
                )
            )
