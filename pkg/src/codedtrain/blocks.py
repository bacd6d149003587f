"""Row-block partitioning, streaming block encoding, and reconstruction.

Matrices are plain 2-D float64 numpy arrays. A matrix is split into k
equal-height row blocks (zero-padded at the bottom when k does not divide
the row count); a worker's coded sub-matrix is the linear combination of
those blocks given by its generator column, accumulated one block at a time
so only one source block and the accumulator are resident at once.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .coding import GeneratorMatrix, decodable, decode

__all__ = [
    "NotDecodableError",
    "RowBlockPartition",
    "EncodedBlock",
    "partition_rows",
    "encode_block",
    "partial_product",
    "reconstruct",
    "coded_matvec_reference",
    "matrix_to_bytes",
    "matrix_from_bytes",
    "save_matrix",
    "load_matrix",
]

_MAT_HEADER = struct.Struct("<QQ")


class NotDecodableError(RuntimeError):
    """The completed worker set does not span all information blocks."""


@dataclass(frozen=True)
class RowBlockPartition:
    """A matrix split into k row blocks of block_rows rows each.

    pad_rows zero rows were appended to the source before splitting;
    stacking the blocks and dropping the padding reproduces the original.
    """

    k: int
    rows: int
    cols: int
    block_rows: int
    pad_rows: int
    blocks: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class EncodedBlock:
    """One worker's coded sub-matrix plus its download cost.

    downloads counts the nonzero coefficients excluding the worker's own
    systematic block (worker j < k is assumed to hold block j locally).
    """

    worker_id: int
    coefficients: np.ndarray
    matrix: np.ndarray
    downloads: int


def partition_rows(m: np.ndarray, k: int) -> RowBlockPartition:
    """Split m into k equal-height blocks, zero-padding the bottom."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    mat = np.ascontiguousarray(m, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={mat.ndim}")
    rows, cols = mat.shape
    if rows < 1:
        raise ValueError("matrix must have at least one row")
    block_rows = -(-rows // k)
    pad_rows = block_rows * k - rows
    if pad_rows:
        mat = np.vstack([mat, np.zeros((pad_rows, cols))])
    blocks = []
    for i in range(k):
        b = np.ascontiguousarray(mat[i * block_rows : (i + 1) * block_rows])
        b.flags.writeable = False
        blocks.append(b)
    return RowBlockPartition(k, rows, cols, block_rows, pad_rows, tuple(blocks))


def encode_block(
    partition: RowBlockPartition, column: np.ndarray, worker_id: int
) -> EncodedBlock:
    """Combine blocks per the generator column, one block at a time."""
    col = np.asarray(column, dtype=np.float64).reshape(-1)
    if col.size != partition.k:
        raise ValueError(f"column has length {col.size}, expected {partition.k}")
    acc = np.zeros((partition.block_rows, partition.cols))
    downloads = 0
    own = worker_id if 0 <= worker_id < partition.k else None
    for i in range(partition.k):
        c = col[i]
        if c == 0.0:
            continue
        acc += c * partition.blocks[i]
        if i != own:
            downloads += 1
    acc.flags.writeable = False
    col = col.copy()
    col.flags.writeable = False
    return EncodedBlock(int(worker_id), col, acc, downloads)


def partial_product(eb: EncodedBlock, x: np.ndarray) -> np.ndarray:
    """The worker-side product: coded sub-matrix times the broadcast vector."""
    v = np.asarray(x, dtype=np.float64).reshape(-1)
    if v.size != eb.matrix.shape[1]:
        raise ValueError(
            f"vector has length {v.size}, expected {eb.matrix.shape[1]}"
        )
    return eb.matrix @ v


def reconstruct(decoded_blocks: list[np.ndarray], pad_rows: int) -> np.ndarray:
    """Stack the decoded block products and drop the padding rows."""
    vecs = [np.asarray(b, dtype=np.float64).reshape(-1) for b in decoded_blocks]
    if len({v.size for v in vecs}) > 1:
        raise ValueError("decoded block products have inconsistent lengths")
    out = np.concatenate(vecs)
    return out[: out.size - pad_rows] if pad_rows else out


def coded_matvec_reference(
    m: np.ndarray, x: np.ndarray, g: GeneratorMatrix, completed
) -> np.ndarray:
    """Single-process oracle: partition, encode, multiply, decode, stack.

    Runs the whole coded pipeline for the given completed worker set and
    returns the full matrix-vector product. Raises NotDecodableError when
    the completed set cannot decode.
    """
    ds = decodable(g, completed)
    if ds is None:
        raise NotDecodableError(f"worker set {sorted(completed)} is not decodable")
    partition = partition_rows(m, g.k)
    partials = {}
    for wid in ds.worker_ids:
        eb = encode_block(partition, g.column(wid), wid)
        partials[wid] = partial_product(eb, x)
    blocks = decode(g, ds, partials)
    return reconstruct(blocks, partition.pad_rows)


def matrix_to_bytes(m: np.ndarray) -> bytes:
    """u64 rows, u64 cols, then row-major little-endian f64 values."""
    mat = np.ascontiguousarray(m, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={mat.ndim}")
    return _MAT_HEADER.pack(*mat.shape) + mat.astype("<f8", copy=False).tobytes(order="C")


def matrix_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < _MAT_HEADER.size:
        raise ValueError("matrix blob too short")
    rows, cols = _MAT_HEADER.unpack_from(data, 0)
    body = data[_MAT_HEADER.size :]
    if len(body) != 8 * rows * cols:
        raise ValueError(f"matrix blob has {len(body)} body bytes, expected {8 * rows * cols}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).copy()


def save_matrix(path, m: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(matrix_to_bytes(m))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return matrix_from_bytes(fh.read())
