"""Encoding-bandwidth cost model and decodability-overhead Monte Carlo.

The cost model counts sub-matrix transfers per redundant worker per
operand: a dense MDS column needs all k blocks, a fair-coin binary column
needs k/2 on average, and a fountain-style low-degree column needs about
log2(k). The Monte Carlo estimates how many worker results beyond k a
binary code consumes before the received columns reach full rank, under a
uniformly random completion order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "CostScheme",
    "BandwidthReport",
    "OverheadEstimate",
    "bandwidth_cost",
    "scale_table",
    "monte_carlo_extra_workers",
    "bandwidth_csv",
    "overhead_csv",
    "REFERENCE_EXTRA_WORKERS",
]

# Empirical extra-worker averages reported for a 22-node edge cluster
# running these code configurations; printed for context, never asserted
# (completion-time distributions are hardware-specific).
REFERENCE_EXTRA_WORKERS = {
    ("rlnc", 22, 16): 0.032,
    ("rlnc", 22, 12): 0.2132,
}

_MC_BATCH = 4096


class CostScheme(Enum):
    MDS = "mds"
    RLNC = "rlnc"
    LT = "lt"


@dataclass(frozen=True)
class BandwidthReport:
    """Expected sub-matrix transfers for one (scheme, n, k) configuration."""

    scheme: CostScheme
    n: int
    k: int
    per_redundant_worker: float
    total: float


@dataclass(frozen=True)
class OverheadEstimate:
    """Mean worker results consumed beyond k before decodability."""

    scheme: CostScheme
    n: int
    k: int
    trials: int
    completion_model: str
    mean_extra_workers: float
    stderr: float


def bandwidth_cost(scheme: CostScheme, n: int, k: int) -> BandwidthReport:
    """Model cost per redundant worker: MDS k, RLNC k/2, LT log2(k)."""
    if k < 1 or n < k:
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    scheme = CostScheme(scheme)
    if scheme is CostScheme.MDS:
        per = float(k)
    elif scheme is CostScheme.RLNC:
        per = k / 2.0
    else:
        per = math.log2(k)
    return BandwidthReport(scheme, n, k, per, (n - k) * per)


def scale_table(n: int = 220, k: int = 160) -> list[BandwidthReport]:
    """All three schemes at the large-scale configuration (default 220/160)."""
    return [bandwidth_cost(s, n, k) for s in CostScheme]


def monte_carlo_extra_workers(
    scheme: CostScheme, n: int, k: int, trials: int, seed: int = 0
) -> OverheadEstimate:
    """Estimate mean extra workers under uniformly random completion order.

    Each trial draws fresh fair-coin extension columns (all-zero columns
    redrawn) and a random completion order, then counts arrivals consumed
    until the consumed columns reach rank k, minus k. For MDS every set of
    k columns is independent, so the count is k for every order and the
    estimate is identically zero. LT generators are out of scope here; only
    their bandwidth cost model is implemented.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if k < 1 or n < k:
        raise ValueError(f"need n >= k >= 1, got n={n}, k={k}")
    scheme = CostScheme(scheme)
    if scheme is CostScheme.LT:
        raise ValueError("no generator model for LT codes; bandwidth cost only")
    if scheme is CostScheme.MDS:
        extras = np.zeros(trials)
    else:
        rng = np.random.default_rng(seed)
        chunks = []
        remaining = trials
        while remaining:
            batch = min(_MC_BATCH, remaining)
            chunks.append(_rlnc_extra_batch(rng, n, k, batch))
            remaining -= batch
        extras = np.concatenate(chunks)
    mean = float(extras.mean())
    stderr = float(extras.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return OverheadEstimate(
        scheme, n, k, trials, "uniform-random-order", mean, stderr
    )


def _rlnc_extra_batch(rng: np.random.Generator, n: int, k: int, batch: int) -> np.ndarray:
    """Extra-worker counts for one batch of trials, rank via batched SVD.

    Entries are 0/1 so the spectral-gap between zero and nonzero singular
    values dwarfs the rank tolerance at these sizes.
    """
    r = n - k
    ext = rng.integers(0, 2, size=(batch, k, r)).astype(np.float64)
    if r:
        zero = ~ext.any(axis=1)
        while zero.any():
            t_idx, c_idx = np.nonzero(zero)
            ext[t_idx, :, c_idx] = rng.integers(0, 2, size=(t_idx.size, k))
            zero = ~ext.any(axis=1)
    gen = np.concatenate(
        [np.broadcast_to(np.eye(k), (batch, k, k)), ext], axis=2
    )
    orders = np.argsort(rng.random((batch, n)), axis=1)
    ordered = np.take_along_axis(gen, orders[:, None, :], axis=2)
    extras = np.zeros(batch, dtype=np.int64)
    pending = np.arange(batch)
    width = k
    while pending.size:
        sub = ordered[pending, :, :width]
        sv = np.linalg.svd(sub, compute_uv=False)
        tol = sv[:, :1] * max(k, width) * np.finfo(np.float64).eps
        full = (sv > tol).sum(axis=1) == k
        extras[pending[full]] = width - k
        pending = pending[~full]
        if pending.size and width == n:
            # identity columns guarantee full rank once all n are consumed
            raise AssertionError("generator lost rank; unreachable")
        width += 1
    return extras.astype(np.float64)


def bandwidth_csv(reports: list[BandwidthReport]) -> str:
    lines = ["scheme,n,k,per_worker,total"]
    for r in reports:
        lines.append(
            f"{r.scheme.value},{r.n},{r.k},{r.per_redundant_worker:.6g},{r.total:.6g}"
        )
    return "\n".join(lines) + "\n"


def overhead_csv(estimates: list[OverheadEstimate]) -> str:
    lines = ["scheme,n,k,trials,mean_extra,stderr"]
    for e in estimates:
        lines.append(
            f"{e.scheme.value},{e.n},{e.k},{e.trials},{e.mean_extra_workers:.6g},{e.stderr:.6g}"
        )
    return "\n".join(lines) + "\n"
