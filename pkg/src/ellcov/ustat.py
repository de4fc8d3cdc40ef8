"""U-statistic estimators of tr(S1^2), tr(S2^2) and tr(S1 S2).

The estimators are defined as sums over pairwise-distinct observation
indices.  The fast path evaluates them from Gram matrices in O(n^2 p) by
inclusion-exclusion; :func:`brute_force_estimates` enumerates the index
tuples literally and serves as the reference.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_MAX_ROWS = 30


class ShapeError(ValueError):
    """Raised when sample shapes violate an estimator precondition."""


@dataclass(frozen=True)
class GramBlock:
    """Gram matrices of two samples and their cross products.

    ``self1 = X1 X1^T``, ``self2 = X2 X2^T`` and ``cross = X1 X2^T``.
    Diagonals and row sums are cached because every estimator needs them.
    """

    self1: np.ndarray
    self2: np.ndarray
    cross: np.ndarray
    diag1: np.ndarray
    diag2: np.ndarray
    rowsum1: np.ndarray
    rowsum2: np.ndarray
    cross_rowsum: np.ndarray
    cross_colsum: np.ndarray


@dataclass(frozen=True)
class TraceEstimates:
    u1: float
    u2: float
    v: float
    t: float

    @classmethod
    def assemble(cls, u1: float, u2: float, v: float) -> "TraceEstimates":
        return cls(u1=u1, u2=u2, v=v, t=u1 + u2 - 2.0 * v)


def as_data_matrix(x, name: str = "sample") -> np.ndarray:
    """Validate and convert to a 2-D float64 array (rows are observations)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one column")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite entries")
    return arr


def _check_pair(x1: np.ndarray, x2: np.ndarray) -> None:
    if x1.shape[1] != x2.shape[1]:
        raise ShapeError(
            f"dimension mismatch: sample1 has shape {x1.shape}, "
            f"sample2 has shape {x2.shape}"
        )


def _check_rows(x: np.ndarray, minimum: int, name: str) -> None:
    if x.shape[0] < minimum:
        if minimum == 4:
            raise ShapeError(
                f"insufficient observations for (n)_4 normalization: "
                f"{name} has {x.shape[0]} rows, need at least 4"
            )
        raise ShapeError(
            f"insufficient observations: {name} has {x.shape[0]} rows, "
            f"need at least {minimum}"
        )


def _fsum(a: np.ndarray) -> float:
    # Vectors: correctly rounded, hence order-free.  Matrices: pairwise sums
    # per row, then an exact sum over rows.
    a = np.asarray(a)
    if a.ndim == 2:
        a = a.sum(axis=1)
    return math.fsum(a.tolist())


def falling_factorial(n: int, m: int) -> int:
    out = 1
    for i in range(m):
        out *= n - i
    return out


def gram(sample1, sample2) -> GramBlock:
    """Compute the self and cross Gram blocks of two samples."""
    x1 = as_data_matrix(sample1, "sample1")
    x2 = as_data_matrix(sample2, "sample2")
    _check_pair(x1, x2)
    g1 = x1 @ x1.T
    g2 = x2 @ x2.T
    h = x1 @ x2.T
    # Symmetrize so both triangles hold identical bits.
    g1 = 0.5 * (g1 + g1.T)
    g2 = 0.5 * (g2 + g2.T)
    return GramBlock(
        self1=g1,
        self2=g2,
        cross=h,
        diag1=np.diag(g1).copy(),
        diag2=np.diag(g2).copy(),
        rowsum1=g1.sum(axis=1),
        rowsum2=g2.sum(axis=1),
        cross_rowsum=h.sum(axis=1),
        cross_colsum=h.sum(axis=0),
    )


def _u_from_gram(g: np.ndarray, diag: np.ndarray, rowsum: np.ndarray) -> float:
    n = g.shape[0]
    off_rowsum = rowsum - diag
    sq_off = _fsum(g * g) - _fsum(diag * diag)  # sum_{j!=k} G_jk^2
    path = _fsum(off_rowsum * off_rowsum) - sq_off  # sum* G_jk G_kl
    total_off = _fsum(off_rowsum)  # sum_{j!=k} G_jk
    quad = total_off * total_off - 4.0 * _fsum(off_rowsum * off_rowsum) + 2.0 * sq_off
    return (
        sq_off / falling_factorial(n, 2)
        - 2.0 * path / falling_factorial(n, 3)
        + quad / falling_factorial(n, 4)
    )


def _v_from_cross(h: np.ndarray, rowsum: np.ndarray, colsum: np.ndarray) -> float:
    n1, n2 = h.shape
    sq = _fsum(h * h)
    row_sq = _fsum(rowsum * rowsum)
    col_sq = _fsum(colsum * colsum)
    total = _fsum(rowsum)
    pairs1 = col_sq - sq  # distinct pairs in sample 1, shared sample-2 index
    pairs2 = row_sq - sq  # distinct pairs in sample 2, shared sample-1 index
    both = total * total - row_sq - col_sq + sq
    return (
        sq / (n1 * n2)
        - pairs1 / (n1 * n2 * (n1 - 1))
        - pairs2 / (n1 * n2 * (n2 - 1))
        + both / (falling_factorial(n1, 2) * falling_factorial(n2, 2))
    )


def u_statistic(sample) -> float:
    """Unbiased estimator of tr(Sigma^2) from one sample.

    Parameters
    ----------
    sample : array_like, shape (n, p)
        Observations in rows; ``n >= 4``.

    Returns
    -------
    float
    """
    x = as_data_matrix(sample)
    _check_rows(x, 4, "sample")
    g = x @ x.T
    g = 0.5 * (g + g.T)
    return _u_from_gram(g, np.diag(g).copy(), g.sum(axis=1))


def v_statistic(sample1, sample2) -> float:
    """Unbiased estimator of tr(Sigma1 Sigma2) from two independent samples."""
    x1 = as_data_matrix(sample1, "sample1")
    x2 = as_data_matrix(sample2, "sample2")
    _check_pair(x1, x2)
    _check_rows(x1, 2, "sample1")
    _check_rows(x2, 2, "sample2")
    h = x1 @ x2.T
    return _v_from_cross(h, h.sum(axis=1), h.sum(axis=0))


def t_statistic(sample1, sample2) -> TraceEstimates:
    """All three estimators and ``T_n = U1 + U2 - 2 V`` from one Gram pass."""
    x1 = as_data_matrix(sample1, "sample1")
    x2 = as_data_matrix(sample2, "sample2")
    _check_pair(x1, x2)
    _check_rows(x1, 4, "sample1")
    _check_rows(x2, 4, "sample2")
    blk = gram(x1, x2)
    return estimates_from_gram(blk)


def estimates_from_gram(blk: GramBlock) -> TraceEstimates:
    u1 = _u_from_gram(blk.self1, blk.diag1, blk.rowsum1)
    u2 = _u_from_gram(blk.self2, blk.diag2, blk.rowsum2)
    v = _v_from_cross(blk.cross, blk.cross_rowsum, blk.cross_colsum)
    return TraceEstimates.assemble(u1, u2, v)


def _dot_table(x: np.ndarray, y: np.ndarray) -> list[list[float]]:
    return [[math.fsum(a * b for a, b in zip(xr, yr)) for yr in y] for xr in x]


def brute_force_u(x: np.ndarray) -> float:
    n = x.shape[0]
    g = _dot_table(x, x)
    idx = range(n)
    s2 = math.fsum(g[j][k] ** 2 for j, k in itertools.permutations(idx, 2))
    s3 = math.fsum(
        g[j][k] * g[k][l] for j, k, l in itertools.permutations(idx, 3)
    )
    s4 = math.fsum(
        g[j][k] * g[l][m] for j, k, l, m in itertools.permutations(idx, 4)
    )
    return (
        s2 / falling_factorial(n, 2)
        - 2.0 * s3 / falling_factorial(n, 3)
        + s4 / falling_factorial(n, 4)
    )


def brute_force_v(x1: np.ndarray, x2: np.ndarray) -> float:
    n1, n2 = x1.shape[0], x2.shape[0]
    h = _dot_table(x1, x2)
    s1 = math.fsum(h[i][j] ** 2 for i in range(n1) for j in range(n2))
    s2 = math.fsum(
        h[l][j] * h[k][j]
        for k, l in itertools.permutations(range(n1), 2)
        for j in range(n2)
    )
    s3 = math.fsum(
        h[j][l] * h[j][k]
        for k, l in itertools.permutations(range(n2), 2)
        for j in range(n1)
    )
    # (x_i^(1) . x_j^(2)) (x_k^(1) . x_l^(2)) with i != k and j != l
    s4 = math.fsum(
        h[i][j] * h[k][l]
        for i, k in itertools.permutations(range(n1), 2)
        for j, l in itertools.permutations(range(n2), 2)
    )
    return (
        s1 / (n1 * n2)
        - s2 / (n1 * n2 * (n1 - 1))
        - s3 / (n2 * n1 * (n2 - 1))
        + s4 / (falling_factorial(n1, 2) * falling_factorial(n2, 2))
    )


def brute_force_estimates(sample1, sample2) -> TraceEstimates:
    """Literal enumeration of the distinct-index sums.

    Cost is O(n^4) in the number of rows, so both samples are limited to
    :data:`BRUTE_FORCE_MAX_ROWS` rows.  Inner products are formed pair by
    pair; no Gram-matrix identities are used.
    """
    x1 = as_data_matrix(sample1, "sample1")
    x2 = as_data_matrix(sample2, "sample2")
    _check_pair(x1, x2)
    for x, name in ((x1, "sample1"), (x2, "sample2")):
        if x.shape[0] > BRUTE_FORCE_MAX_ROWS:
            raise ShapeError(
                f"{name} has {x.shape[0]} rows; brute force is limited to "
                f"{BRUTE_FORCE_MAX_ROWS}"
            )
        _check_rows(x, 4, name)
    return TraceEstimates.assemble(brute_force_u(x1), brute_force_u(x2), brute_force_v(x1, x2))
