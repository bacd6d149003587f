"""Generator matrices, decodability tests, and block decoding.

A (k, n) code is described by a k-by-n coefficient grid: column j holds the
weights with which worker j linearly combines the k information blocks.
Any subset of columns with rank k can be decoded back into the information
blocks by solving a k-by-k linear system over the reals.

Three constructions are provided:

* ``systematic_mds`` -- identity columns for the first k workers, plus
  extension columns evaluated at the nodes 1, 2, 3, ... so that every k
  columns stay linearly independent.
* ``vandermonde_rs`` -- the classic non-systematic construction where
  column j carries the powers of (j + 1).
* ``rlnc`` -- identity columns plus fair-coin 0/1 extension columns, which
  halves the expected number of blocks a redundant worker must fetch.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "Scheme",
    "GeneratorMatrix",
    "DecodableSet",
    "RankTracker",
    "ProtocolError",
    "systematic_mds",
    "vandermonde_rs",
    "rlnc",
    "decodable",
    "decode",
]

# Relative pivot threshold for float elimination; integer generators take the
# exact path and never rely on it.
PIVOT_RTOL = 1e-10

_HEADER = struct.Struct("<IIBQ")


class ProtocolError(RuntimeError):
    """A decode was attempted with missing or inconsistent partial results."""


class Scheme(IntEnum):
    """Generator construction tag (also the wire byte)."""

    SYSTEMATIC_MDS = 1
    VANDERMONDE_RS = 2
    RLNC = 3


def _check_dims(k: int, n: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValueError(f"need n >= k, got n={n} < k={k}")


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Immutable k-by-n coefficient grid plus its construction tag.

    ``coeffs[i, j]`` is the weight of information block i in worker j's
    coded block. ``seed`` records the PRNG seed for RLNC grids and is 0 for
    the deterministic schemes.
    """

    k: int
    n: int
    coeffs: np.ndarray
    scheme: Scheme
    seed: int = 0

    def __post_init__(self) -> None:
        _check_dims(self.k, self.n)
        coeffs = np.ascontiguousarray(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.k, self.n):
            raise ValueError(
                f"coefficient grid is {coeffs.shape}, expected {(self.k, self.n)}"
            )
        scheme = Scheme(self.scheme)
        if scheme in (Scheme.SYSTEMATIC_MDS, Scheme.RLNC):
            if not np.array_equal(coeffs[:, : self.k], np.eye(self.k)):
                raise ValueError(f"{scheme.name} requires identity columns 0..k-1")
        if scheme is Scheme.RLNC:
            ext = coeffs[:, self.k :]
            if not np.all((ext == 0.0) | (ext == 1.0)):
                raise ValueError("RLNC extension entries must be exactly 0 or 1")
            if ext.shape[1] and not ext.any(axis=0).all():
                raise ValueError("RLNC extension columns must be nonzero")
        if scheme is Scheme.VANDERMONDE_RS:
            expect = _vandermonde_grid(self.k, self.n)
            if not np.array_equal(coeffs, expect):
                raise ValueError("VANDERMONDE_RS grid does not match (j+1)^i")
        if scheme is not Scheme.RLNC and self.seed != 0:
            raise ValueError("seed must be 0 for deterministic schemes")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "scheme", scheme)
        object.__setattr__(self, "seed", int(self.seed))

    def column(self, j: int) -> np.ndarray:
        return self.coeffs[:, j]

    def is_integral(self) -> bool:
        """True when every coefficient is an exactly-representable integer."""
        c = self.coeffs
        return bool(
            np.all(np.isfinite(c))
            and np.all(c == np.rint(c))
            and np.all(np.abs(c) < 2.0**53)
        )

    def to_bytes(self) -> bytes:
        """u32 k, u32 n, u8 scheme, u64 seed, then k*n little-endian f64."""
        header = _HEADER.pack(self.k, self.n, int(self.scheme), self.seed)
        return header + self.coeffs.astype("<f8", copy=False).tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "GeneratorMatrix":
        if len(data) < _HEADER.size:
            raise ValueError("generator blob too short")
        k, n, tag, seed = _HEADER.unpack_from(data, 0)
        body = data[_HEADER.size :]
        if len(body) != 8 * k * n:
            raise ValueError(f"generator blob has {len(body)} body bytes, expected {8 * k * n}")
        coeffs = np.frombuffer(body, dtype="<f8").reshape(k, n).copy()
        return cls(k, n, coeffs, Scheme(tag), seed)


@dataclass(frozen=True)
class DecodableSet:
    """A set of worker columns of full rank, with k chosen pivot columns.

    ``pivot_columns`` are the first k columns (in ascending worker-id order)
    that each increased the rank, so the selection is reproducible.
    """

    worker_ids: tuple[int, ...]
    pivot_columns: tuple[int, ...]


def _vandermonde_grid(k: int, n: int) -> np.ndarray:
    nodes = np.arange(1, n + 1, dtype=np.float64)
    return nodes[None, :] ** np.arange(k, dtype=np.float64)[:, None]


def systematic_mds(k: int, n: int) -> GeneratorMatrix:
    """[I_k | V] with extension column m evaluated at node m+1.

    Extension entries are (m+1)**i, i the block index, so every square minor
    of the extension is nonzero and any k columns decode. Entries grow as
    (n-k)**(k-1); intended for the small k this runtime targets.
    """
    _check_dims(k, n)
    coeffs = np.zeros((k, n))
    coeffs[:, :k] = np.eye(k)
    if n > k:
        nodes = np.arange(1, n - k + 1, dtype=np.float64)
        coeffs[:, k:] = nodes[None, :] ** np.arange(k, dtype=np.float64)[:, None]
    return GeneratorMatrix(k, n, coeffs, Scheme.SYSTEMATIC_MDS, 0)


def vandermonde_rs(k: int, n: int) -> GeneratorMatrix:
    """Non-systematic grid with coeffs[i][j] = (j+1)**i."""
    _check_dims(k, n)
    return GeneratorMatrix(k, n, _vandermonde_grid(k, n), Scheme.VANDERMONDE_RS, 0)


def rlnc(k: int, n: int, seed: int) -> GeneratorMatrix:
    """[I_k | B] with B drawn entrywise as a fair coin from a seeded PRNG.

    An all-zero extension column (probability 2**-k) is redrawn until it has
    at least one 1, so every column contributes. Identical (k, n, seed)
    yields a bit-identical grid.
    """
    _check_dims(k, n)
    rng = np.random.default_rng(seed)
    coeffs = np.zeros((k, n))
    coeffs[:, :k] = np.eye(k)
    for j in range(k, n):
        col = rng.integers(0, 2, size=k)
        while not col.any():
            col = rng.integers(0, 2, size=k)
        coeffs[:, j] = col
    return GeneratorMatrix(k, n, coeffs, Scheme.RLNC, int(seed))


class RankTracker:
    """Incremental rank of a growing set of length-k columns.

    Columns that are all integers are reduced with fraction-free integer
    elimination, which is exact and immune to the conditioning problems of
    power-of-node columns. The first non-integral column demotes the state
    to float elimination with partial pivoting and relative pivot threshold
    ``PIVOT_RTOL``.
    """

    def __init__(self, k: int):
        self.k = int(k)
        self._exact = True
        # (pivot index, reduced column); every stored column is zero at all
        # pivot positions stored before it, so one forward sweep reduces a
        # newcomer completely.
        self._int_rows: list[tuple[int, tuple[int, ...]]] = []
        self._float_rows: list[tuple[int, np.ndarray]] = []
        self._scale = 0.0

    @property
    def rank(self) -> int:
        return len(self._int_rows) if self._exact else len(self._float_rows)

    def add(self, column: np.ndarray) -> bool:
        """Fold one column in; True if it increased the rank."""
        col = np.asarray(column, dtype=np.float64).reshape(-1)
        if col.shape != (self.k,):
            raise ValueError(f"column has length {col.size}, expected {self.k}")
        if self._exact and _is_integral(col):
            return self._add_exact(col)
        if self._exact:
            self._demote()
        return self._add_float(col)

    def _add_exact(self, col: np.ndarray) -> bool:
        v = [int(x) for x in col]
        for p, row in self._int_rows:
            if v[p]:
                vp, rp = v[p], row[p]
                v = [rp * a - vp * b for a, b in zip(v, row)]
        g = 0
        for x in v:
            g = math.gcd(g, abs(x))
        if g == 0:
            return False
        if g > 1:
            v = [x // g for x in v]
        pivot = next(i for i, x in enumerate(v) if x)
        self._int_rows.append((pivot, tuple(v)))
        return True

    def _add_float(self, col: np.ndarray) -> bool:
        v = col.copy()
        self._scale = max(self._scale, float(np.abs(v).max(initial=0.0)))
        for p, row in self._float_rows:
            v = v - (v[p] / row[p]) * row
        pivot = int(np.argmax(np.abs(v)))
        if abs(v[pivot]) <= PIVOT_RTOL * max(1.0, self._scale):
            return False
        self._float_rows.append((pivot, v))
        return True

    def _demote(self) -> None:
        self._exact = False
        for p, row in self._int_rows:
            arr = np.array(row, dtype=np.float64)
            self._scale = max(self._scale, float(np.abs(arr).max(initial=0.0)))
            self._float_rows.append((p, arr))
        self._int_rows.clear()


def _is_integral(col: np.ndarray) -> bool:
    return bool(
        np.all(np.isfinite(col))
        and np.all(col == np.rint(col))
        and np.all(np.abs(col) < 2.0**53)
    )


def decodable(g: GeneratorMatrix, worker_ids) -> DecodableSet | None:
    """Test whether the given columns reach rank k.

    Returns a DecodableSet naming k pivot columns (greedy, ascending worker
    id) when they do, or None when they do not. Out-of-range or duplicate
    ids raise ValueError.
    """
    ids = [int(w) for w in worker_ids]
    if len(set(ids)) != len(ids):
        raise ValueError("worker ids must be distinct")
    for w in ids:
        if not 0 <= w < g.n:
            raise ValueError(f"worker id {w} outside [0, {g.n})")
    ids.sort()
    if len(ids) < g.k:
        return None
    tracker = RankTracker(g.k)
    pivots = []
    for j in ids:
        if tracker.add(g.coeffs[:, j]):
            pivots.append(j)
            if len(pivots) == g.k:
                return DecodableSet(tuple(ids), tuple(pivots))
    return None


def decode(g: GeneratorMatrix, ds: DecodableSet, partials: dict) -> list[np.ndarray]:
    """Recover the k information-block products from pivot-column partials.

    Solves B^T U = P where B holds the pivot columns and row j of P is the
    partial result from pivot worker j. Identity pivots are returned
    verbatim with no solve.
    """
    k = g.k
    vecs = {}
    d = None
    for wid, vec in partials.items():
        v = np.asarray(vec, dtype=np.float64).reshape(-1)
        if d is None:
            d = v.size
        elif v.size != d:
            raise ValueError(
                f"partial from worker {wid} has length {v.size}, expected {d}"
            )
        vecs[int(wid)] = v
    rows = []
    for j in ds.pivot_columns:
        if j not in vecs:
            raise ProtocolError(f"missing partial result for pivot column {j}")
        rows.append(vecs[j])
    p = np.vstack(rows)
    b = g.coeffs[:, list(ds.pivot_columns)]
    if np.array_equal(b, np.eye(k)):
        u = p
    else:
        u = np.linalg.solve(b.T, p)
    return [u[i] for i in range(k)]
