"""Desk-scale cluster launcher: one master plus n workers on this host.

The in-process transport runs workers as threads over queues and consumes
responses in a fixed order (non-stragglers first, ascending id) so a run
replays bit-identically from the same seeds. The loopback transport runs
the same worker code over real TCP frames in true arrival order.
"""

from __future__ import annotations

import threading
from enum import Enum

import numpy as np

from ..blocks import partition_rows
from ..coding import GeneratorMatrix, Scheme, rlnc, systematic_mds, vandermonde_rs
from ..trainers import LabeledDataset, Model, train
from .master import master_run
from .metrics import ExperimentMetrics
from .policy import StragglerPolicy
from .transport import (
    InProcessMasterTransport,
    LoopbackMasterTransport,
    connect_worker,
)
from .wire import Operand
from .worker import worker_run

__all__ = ["TransportKind", "make_generator", "launch_local_cluster"]


class TransportKind(Enum):
    IN_PROCESS = "in-process"
    LOOPBACK_SOCKETS = "loopback-sockets"


def make_generator(scheme, k: int, n: int, seed: int = 0) -> GeneratorMatrix:
    scheme = Scheme(scheme) if not isinstance(scheme, str) else {
        "mds": Scheme.SYSTEMATIC_MDS,
        "systematic-mds": Scheme.SYSTEMATIC_MDS,
        "rs": Scheme.VANDERMONDE_RS,
        "vandermonde": Scheme.VANDERMONDE_RS,
        "rlnc": Scheme.RLNC,
    }[scheme.lower()]
    if scheme is Scheme.SYSTEMATIC_MDS:
        return systematic_mds(k, n)
    if scheme is Scheme.VANDERMONDE_RS:
        return vandermonde_rs(k, n)
    return rlnc(k, n, seed)


def consumption_order(n: int, policy: StragglerPolicy) -> list[int]:
    """Non-stragglers in id order, then stragglers: the deterministic
    stand-in for 'fast workers arrive first'."""
    return sorted(range(n), key=lambda w: (w in policy.straggler_ids, w))


def _block_provider(xp, xtp, wid: int):
    def provider(op: Operand) -> np.ndarray:
        return xp.blocks[wid] if op is Operand.X else xtp.blocks[wid]

    return provider


def launch_local_cluster(
    n: int,
    k: int,
    scheme,
    dataset: LabeledDataset,
    model: Model,
    *,
    eta: float = 0.1,
    lam: float = 0.01,
    num_iter: int = 100,
    policy: StragglerPolicy | None = None,
    transport: TransportKind = TransportKind.IN_PROCESS,
    rlnc_seed: int = 0,
    init_seed: int = 0,
    deadline: float | None = None,
) -> tuple[np.ndarray, ExperimentMetrics]:
    """Run the full coded training protocol locally.

    Returns the trained weights and the collected metrics (per-worker
    encode stats, per-round and per-iteration counters, objectives).
    """
    if not 1 <= k <= n:
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    policy = policy or StragglerPolicy.none()
    policy.validate(n)
    g = make_generator(scheme, k, n, rlnc_seed)
    x = np.ascontiguousarray(dataset.x, dtype=np.float64)
    xp = partition_rows(x, k)
    xtp = partition_rows(np.ascontiguousarray(x.T), k)

    transport = TransportKind(transport)
    if transport is TransportKind.IN_PROCESS:
        master_tr = InProcessMasterTransport(n, consumption_order(n, policy))
        channel_factories = [
            (lambda wid=wid: master_tr.channel_for(wid)) for wid in range(n)
        ]
    else:
        master_tr = LoopbackMasterTransport(n)
        host, port = master_tr.host, master_tr.port
        channel_factories = [
            (lambda: connect_worker(host, port)) for _ in range(n)
        ]

    threads = []
    for wid in range(n):
        local = _block_provider(xp, xtp, wid) if wid < k else None

        def body(wid=wid, factory=channel_factories[wid], local=local):
            channel = factory()
            try:
                worker_run(
                    channel, wid, delay=policy.for_worker(wid), local_blocks=local
                )
            finally:
                channel.close()

        t = threading.Thread(target=body, name=f"worker-{wid}", daemon=True)
        t.start()
        threads.append(t)

    def trainer(engine):
        return train(
            model,
            engine,
            dataset.y,
            dataset.n_samples,
            eta=eta,
            lam=lam,
            num_iter=num_iter,
            init_seed=init_seed,
        )

    try:
        result, metrics = master_run(master_tr, g, xp, xtp, trainer, deadline=deadline)
    finally:
        for t in threads:
            t.join(timeout=30.0)
    metrics.finalize_iterations(result.objectives)
    return result.w, metrics
