"""Worker process logic: one communication task, one computation task.

The communication task owns the channel's receive side and routes work to
the computation task through a queue; cancellations flow the other way via
a shared set. The computation task encodes the worker's sub-matrices (for
the redundant role, requesting blocks one at a time and folding each into
the accumulator before fetching the next) and computes one partial product
per round, checking for cancellation between row chunks and while a
straggler delay is pending.
"""

from __future__ import annotations

import queue
import threading
import time

import numpy as np

from ..coding import ProtocolError
from .policy import StragglerMode
from .wire import (
    BlockRequest,
    BlockResponse,
    Cancel,
    EncodeComplete,
    IterationStart,
    Operand,
    PartialProduct,
    Register,
    Role,
    SetGenerator,
    Shutdown,
)

__all__ = ["Worker", "worker_run"]

CHUNK_ROWS = 4096
_POLL = 0.001


class Worker:
    def __init__(
        self,
        channel,
        worker_id: int,
        *,
        delay: tuple[StragglerMode, float] | None = None,
        local_blocks=None,
        chunk_rows: int = CHUNK_ROWS,
    ):
        self.channel = channel
        self.worker_id = int(worker_id)
        self.delay = delay
        self.local_blocks = local_blocks
        self.chunk_rows = chunk_rows
        self._work: queue.Queue = queue.Queue()
        self._block_in: queue.Queue = queue.Queue()
        self._cancelled: set[int] = set()
        self._cancel_lock = threading.Lock()
        self._encoded: dict[Operand, np.ndarray] = {}
        self._failure: BaseException | None = None

    # -- communication task ----------------------------------------------

    def run(self) -> None:
        self.channel.send(Register(self.worker_id))
        compute = threading.Thread(target=self._compute_loop, daemon=True)
        compute.start()
        try:
            while True:
                msg = self.channel.recv()
                if msg is None or isinstance(msg, Shutdown):
                    break
                if isinstance(msg, SetGenerator):
                    self._work.put(msg)
                elif isinstance(msg, BlockResponse):
                    self._block_in.put(msg)
                elif isinstance(msg, IterationStart):
                    self._work.put(msg)
                elif isinstance(msg, Cancel):
                    with self._cancel_lock:
                        self._cancelled.add(msg.iteration)
                # anything else is not addressed to workers; ignore
        finally:
            self._work.put(None)
            compute.join()
        if self._failure is not None:
            raise self._failure

    # -- computation task --------------------------------------------------

    def _compute_loop(self) -> None:
        try:
            while True:
                item = self._work.get()
                if item is None:
                    return
                if isinstance(item, SetGenerator):
                    self._encode_phase(item)
                else:
                    self._round(item)
        except BaseException as exc:  # surfaced by run()
            self._failure = exc

    def _encode_phase(self, sg: SetGenerator) -> None:
        g = sg.generator
        if not 0 <= self.worker_id < g.n:
            raise ProtocolError(f"worker id {self.worker_id} outside generator width")
        column = g.coeffs[:, self.worker_id]
        downloads = {Operand.X: 0, Operand.XT: 0}
        t0 = time.perf_counter_ns()
        for op in sg.operands:
            mat, dls = self._build_coded_matrix(op, column, sg.role, g.k)
            self._encoded[op] = mat
            downloads[op] = dls
        nanos = time.perf_counter_ns() - t0
        self.channel.send(
            EncodeComplete(
                self.worker_id, downloads[Operand.X], downloads[Operand.XT], nanos
            )
        )

    def _build_coded_matrix(
        self, op: Operand, column: np.ndarray, role: Role, k: int
    ) -> tuple[np.ndarray, int]:
        if role == Role.SYSTEMATIC:
            if self.local_blocks is None:
                raise ProtocolError(
                    f"worker {self.worker_id} has systematic role but no local data"
                )
            return np.ascontiguousarray(self.local_blocks(op), dtype=np.float64), 0
        acc = None
        downloads = 0
        for i in range(k):
            c = column[i]
            if c == 0.0:
                continue
            if i == self.worker_id and self.local_blocks is not None:
                block = np.asarray(self.local_blocks(op), dtype=np.float64)
            else:
                self.channel.send(BlockRequest(op, i))
                block = self._await_block(op, i)
                downloads += 1
            if acc is None:
                acc = c * block
            else:
                acc += c * block
            # block goes out of scope here: one source block + accumulator
        if acc is None:
            raise ProtocolError(f"generator column {self.worker_id} is all zero")
        return acc, downloads

    def _await_block(self, op: Operand, block_id: int) -> np.ndarray:
        resp = self._block_in.get()
        if resp.operand != op or resp.block_id != block_id:
            raise ProtocolError(
                f"expected block ({op.name}, {block_id}), got "
                f"({resp.operand.name}, {resp.block_id})"
            )
        return resp.matrix

    def _round(self, start: IterationStart) -> None:
        it = start.iteration
        if self._is_cancelled(it):
            return
        if self.delay is not None and self.delay[0] is StragglerMode.FIXED_DELAY:
            if not self._nap(self.delay[1], it):
                return
        mat = self._encoded.get(start.operand)
        if mat is None:
            raise ProtocolError(f"no encoded matrix for operand {start.operand.name}")
        v = start.vector
        rows = mat.shape[0]
        out = np.empty(rows)
        slow = (
            self.delay[1]
            if self.delay is not None and self.delay[0] is StragglerMode.SLOWDOWN
            else None
        )
        for lo in range(0, rows, self.chunk_rows):
            if self._is_cancelled(it):
                return
            hi = min(lo + self.chunk_rows, rows)
            t0 = time.perf_counter()
            out[lo:hi] = mat[lo:hi] @ v
            if slow is not None:
                stretch = (slow - 1.0) * (time.perf_counter() - t0)
                if not self._nap(stretch, it):
                    return
        if self._is_cancelled(it):
            return
        self.channel.send(PartialProduct(self.worker_id, it, start.operand, out))

    def _is_cancelled(self, iteration: int) -> bool:
        with self._cancel_lock:
            return iteration in self._cancelled

    def _nap(self, seconds: float, iteration: int) -> bool:
        """Cancellable sleep; False when the round was cancelled meanwhile."""
        deadline = time.perf_counter() + seconds
        while True:
            if self._is_cancelled(iteration):
                return False
            remaining = deadline - time.perf_counter()
            if remaining <= 0:
                return True
            time.sleep(min(_POLL, remaining))


def worker_run(
    channel,
    worker_id: int,
    *,
    delay: tuple[StragglerMode, float] | None = None,
    local_blocks=None,
) -> None:
    """Run a worker until the master shuts it down or disconnects."""
    Worker(channel, worker_id, delay=delay, local_blocks=local_blocks).run()
