"""Coordinator and decoder.

The master never encodes. It hands each worker the generator matrix, serves
block requests during the distributed encoding phase, then runs the
training loop: each matrix-vector product is one round of broadcast,
collect-until-decodable, cancel-the-rest, decode, reconstruct.
"""

from __future__ import annotations

import queue
import time

import numpy as np

from ..blocks import RowBlockPartition, reconstruct
from ..coding import (
    DecodableSet,
    GeneratorMatrix,
    ProtocolError,
    RankTracker,
    decodable,
    decode,
)
from ..trainers import MatvecEngine
from .metrics import ExperimentMetrics, RoundStats, WorkerEncodeStats
from .wire import (
    BlockRequest,
    BlockResponse,
    Cancel,
    EncodeComplete,
    IterationStart,
    Operand,
    PartialProduct,
    Role,
    SetGenerator,
    Shutdown,
)

__all__ = [
    "ConfigurationError",
    "IterationFailedError",
    "collect_until_decodable",
    "Master",
    "CodedEngine",
    "master_run",
]


class ConfigurationError(RuntimeError):
    """A worker was lost before the iteration phase began."""


class IterationFailedError(RuntimeError):
    """The remaining workers cannot supply a decodable set."""


def collect_until_decodable(
    g: GeneratorMatrix, arrivals
) -> tuple[DecodableSet, dict, list[int]]:
    """Consume (worker_id, vector) arrivals until their columns reach rank k.

    Returns the decodable set over the consumed prefix, the partials
    consumed, and the consumption order. Raises IterationFailedError when
    the stream ends short of full rank.
    """
    tracker = RankTracker(g.k)
    consumed: list[int] = []
    partials: dict[int, np.ndarray] = {}
    for wid, vec in arrivals:
        if wid in partials:
            continue
        consumed.append(wid)
        partials[wid] = vec
        tracker.add(g.coeffs[:, wid])
        if tracker.rank == g.k:
            ds = decodable(g, consumed)
            assert ds is not None
            return ds, partials, consumed
    raise IterationFailedError(
        f"arrivals exhausted at rank {tracker.rank} < {g.k}"
    )


class Master:
    def __init__(
        self,
        transport,
        g: GeneratorMatrix,
        x_partition: RowBlockPartition,
        xt_partition: RowBlockPartition,
        *,
        deadline: float | None = None,
    ):
        if x_partition.k != g.k or xt_partition.k != g.k:
            raise ValueError("partition block count must equal generator k")
        self.transport = transport
        self.g = g
        self.partitions = {Operand.X: x_partition, Operand.XT: xt_partition}
        self.deadline = deadline
        self.metrics = ExperimentMetrics()
        self.live: set[int] = set()
        self.roles: dict[int, Role] = {}
        self.round_index = 0
        self.phase = "setup"

    # -- phases ---------------------------------------------------------

    def setup(self) -> None:
        ids = self.transport.wait_for_workers()
        if sorted(ids) != list(range(self.g.n)):
            raise ConfigurationError(
                f"expected workers 0..{self.g.n - 1}, registered {sorted(ids)}"
            )
        self.live = set(ids)
        eye = np.eye(self.g.k)
        for wid in sorted(ids):
            col = self.g.coeffs[:, wid]
            systematic = wid < self.g.k and np.array_equal(col, eye[:, wid])
            role = Role.SYSTEMATIC if systematic else Role.REDUNDANT
            self.roles[wid] = role
            self.transport.send(
                wid, SetGenerator(self.g, role, (Operand.X, Operand.XT))
            )
        self.phase = "encoding"

    def run_encoding(self) -> None:
        pending = set(self.live)
        stats: dict[int, WorkerEncodeStats] = {}
        while pending:
            wid, msg = self._next_message()
            if msg is None:
                raise ConfigurationError(
                    f"worker {wid} disconnected during the encoding phase"
                )
            if isinstance(msg, BlockRequest):
                part = self.partitions[msg.operand]
                if not 0 <= msg.block_id < part.k:
                    raise ProtocolError(f"block id {msg.block_id} out of range")
                self.transport.send(
                    wid,
                    BlockResponse(msg.operand, msg.block_id, part.blocks[msg.block_id]),
                )
                self.metrics.block_responses_sent += 1
            elif isinstance(msg, EncodeComplete):
                stats[wid] = WorkerEncodeStats(
                    wid,
                    self.roles[wid],
                    msg.downloads_x,
                    msg.downloads_xt,
                    msg.encode_nanos,
                )
                pending.discard(wid)
            else:
                raise ProtocolError(
                    f"unexpected {type(msg).__name__} during encoding"
                )
        self.metrics.workers = [stats[w] for w in sorted(stats)]
        self.phase = "iterating"

    def matvec(self, operand: Operand, v: np.ndarray) -> np.ndarray:
        """One coded round: broadcast, collect, cancel, decode, stack."""
        if self.phase != "iterating":
            raise RuntimeError(f"matvec called in phase {self.phase}")
        rnd = self.round_index
        self.round_index += 1
        t0 = time.perf_counter_ns()
        targets = sorted(self.live)
        start = IterationStart(rnd, operand, np.asarray(v, dtype=np.float64))
        for wid in targets:
            self.transport.send(wid, start)
        arrivals = self._round_arrivals(rnd, operand, targets)
        try:
            ds, partials, consumed = collect_until_decodable(self.g, arrivals)
        finally:
            arrivals.close()
        used = set(consumed)
        cancelled = [w for w in targets if w not in used and w in self.live]
        for wid in cancelled:
            self.transport.send(wid, Cancel(rnd))
        blocks = decode(self.g, ds, partials)
        out = reconstruct(blocks, self.partitions[operand].pad_rows)
        self.metrics.rounds.append(
            RoundStats(
                index=rnd,
                operand=operand,
                wall_nanos=time.perf_counter_ns() - t0,
                responders_used=len(consumed),
                extra_workers=len(consumed) - self.g.k,
                cancelled=len(cancelled),
            )
        )
        return out

    def shutdown(self) -> None:
        # all channels, not just live ones, so no worker is left blocked
        for wid in range(self.g.n):
            self.transport.send(wid, Shutdown())
        self.phase = "done"

    # -- plumbing -------------------------------------------------------

    def _next_message(self, timeout: float | None = None):
        try:
            return self.transport.inbox.get(timeout=timeout)
        except queue.Empty:
            raise IterationFailedError("per-iteration deadline expired") from None

    def _mark_dead(self, wid: int) -> None:
        self.live.discard(wid)

    def _round_arrivals(self, rnd: int, operand: Operand, targets: list[int]):
        """Generator of (worker_id, vector) for one round.

        With a transport consumption order, responses are consumed in that
        fixed order (buffering out-of-order ones) so identical seeds replay
        identically; otherwise true arrival order is used. Stale partials
        are counted and dropped; a worker EOF marks it permanently gone.
        """
        order = self.transport.consumption_order
        if order is None:
            yield from self._arrivals_by_arrival(rnd, operand, targets)
        else:
            yield from self._arrivals_by_order(rnd, operand, targets, order)

    def _arrivals_by_arrival(self, rnd: int, operand: Operand, targets: list[int]):
        outstanding = set(targets)
        while outstanding:
            wid, msg = self._next_message(self.deadline)
            if msg is None:
                self._mark_dead(wid)
                outstanding.discard(wid)
                continue
            if not isinstance(msg, PartialProduct):
                raise ProtocolError(
                    f"unexpected {type(msg).__name__} during iteration"
                )
            if msg.iteration == rnd and msg.operand == operand and wid in outstanding:
                outstanding.discard(wid)
                yield wid, msg.vector
            else:
                self.metrics.late_partials += 1

    def _arrivals_by_order(
        self, rnd: int, operand: Operand, targets: list[int], order: list[int]
    ):
        buffered: dict[int, np.ndarray] = {}
        try:
            for target in order:
                if target not in self.live or target not in targets:
                    continue
                while target not in buffered and target in self.live:
                    wid, msg = self._next_message(self.deadline)
                    if msg is None:
                        self._mark_dead(wid)
                        continue
                    if not isinstance(msg, PartialProduct):
                        raise ProtocolError(
                            f"unexpected {type(msg).__name__} during iteration"
                        )
                    if msg.iteration == rnd and msg.operand == operand:
                        buffered[wid] = msg.vector
                    else:
                        self.metrics.late_partials += 1
                if target in buffered:
                    yield target, buffered.pop(target)
        finally:
            # responses fetched but never consumed count as unused arrivals
            self.metrics.late_partials += len(buffered)


class CodedEngine(MatvecEngine):
    """MatvecEngine backed by one coded round per product."""

    def __init__(self, master: Master):
        self._master = master
        self.n_features = master.partitions[Operand.X].cols

    def multiply_X(self, v):
        return self._master.matvec(Operand.X, v)

    def multiply_XT(self, v):
        return self._master.matvec(Operand.XT, v)


def master_run(
    transport,
    g: GeneratorMatrix,
    x_partition: RowBlockPartition,
    xt_partition: RowBlockPartition,
    trainer,
    *,
    deadline: float | None = None,
):
    """Drive the full protocol: setup, encoding, then the trainer callback.

    ``trainer(engine)`` runs the training loop against a CodedEngine whose
    every product is one broadcast/collect/decode round. Returns the
    trainer's result and the collected metrics.
    """
    master = Master(transport, g, x_partition, xt_partition, deadline=deadline)
    try:
        master.setup()
        master.run_encoding()
        result = trainer(CodedEngine(master))
    finally:
        try:
            master.shutdown()
        finally:
            transport.close()
    return result, master.metrics
