"""Exponentiated kernels and overflow-safe sparse products.

Messages in the Sinkhorn recursions are products of up to ``T`` kernel
applications and easily leave the double-precision range for small
regularization.  Two representations are provided.

``ScaledVector`` / ``ScaledMatrix`` keep linear values with one log-offset per
vector or row, renormalized after each product.  That covers a wide range of
magnitudes but not a wide *spread* inside one row.

The solvers store messages as plain logarithms and multiply through
:func:`log_matmul`.  When the kernel and every input row each span at most
``BAND`` in log scale, one ``exp``, one sparse product and one ``log`` are
exact up to rounding.  Otherwise an exact log-sum-exp runs over the support,
one segment per output state.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph_model import StructureMatrix

TINY = np.finfo(float).tiny
BAND = 300.0


@dataclass
class ScaledVector:
    values: np.ndarray
    log_offset: float = 0.0

    @classmethod
    def normalized(cls, values, log_offset: float = 0.0) -> "ScaledVector":
        values = np.asarray(values, dtype=float)
        m = values.max(initial=0.0)
        if m <= 0.0:
            return cls(values, float(log_offset))
        return cls(values / m, float(log_offset) + float(np.log(m)))

    @classmethod
    def ones(cls, n: int) -> "ScaledVector":
        return cls(np.ones(n), 0.0)

    def value(self) -> np.ndarray:
        return self.values * np.exp(self.log_offset)

    def log(self) -> np.ndarray:
        """Elementwise log of the represented value (``-inf`` on zeros)."""
        with np.errstate(divide="ignore"):
            return np.log(self.values) + self.log_offset

    def copy(self) -> "ScaledVector":
        return ScaledVector(self.values.copy(), self.log_offset)


@dataclass
class ScaledMatrix:
    """``L x n`` matrix represented as ``values * exp(log_offset[:, None])``."""

    values: np.ndarray
    log_offset: np.ndarray

    @classmethod
    def normalized(cls, values, log_offset=None) -> "ScaledMatrix":
        values = np.asarray(values, dtype=float)
        if log_offset is None:
            log_offset = np.zeros(values.shape[0])
        m = values.max(axis=1, initial=0.0)
        safe = np.where(m > 0, m, 1.0)
        return cls(values / safe[:, None], np.asarray(log_offset, dtype=float) + np.log(safe))

    def value(self) -> np.ndarray:
        return self.values * np.exp(self.log_offset)[:, None]

    def log(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.values) + self.log_offset[:, None]

    def copy(self) -> "ScaledMatrix":
        return ScaledMatrix(self.values.copy(), self.log_offset.copy())


class SparseKernel:
    """``K = exp(-C / eps)`` on the support of a structure matrix."""

    def __init__(self, matrix: sp.csr_matrix):
        self.matrix = sp.csr_matrix(matrix)
        self.matrix_t = sp.csr_matrix(self.matrix.T)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __repr__(self) -> str:
        return f"SparseKernel(n={self.n}, nnz={self.nnz})"


def build_kernel(structure: StructureMatrix, epsilon: float) -> SparseKernel:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    vals = np.exp(-structure.data / epsilon)
    keep = vals >= TINY
    if not keep.all():
        warnings.warn(
            f"{int((~keep).sum())} kernel entries underflow at epsilon={epsilon}; "
            "treating them as infinite cost",
            RuntimeWarning,
            stacklevel=2,
        )
    rows = structure.rows[keep]
    mat = sp.csr_matrix((vals[keep], (rows, structure.indices[keep])), shape=(structure.n, structure.n))
    return SparseKernel(mat)


def build_commodity_kernel(C_L, epsilon: float) -> np.ndarray:
    """Dense ``exp(-C_L / eps)``; entries below the smallest normal become 0."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    K_L = np.exp(-np.asarray(C_L, dtype=float) / epsilon)
    small = K_L < TINY
    if small.any():
        warnings.warn(
            f"{int(small.sum())} commodity kernel entries underflow at epsilon={epsilon}",
            RuntimeWarning,
            stacklevel=2,
        )
        K_L[small] = 0.0
    return K_L


def kernel_vec(K: SparseKernel, v: ScaledVector, transpose: bool = False) -> ScaledVector:
    """``K v`` (or ``K^T v``), renormalized to max-norm 1."""
    mat = K.matrix_t if transpose else K.matrix
    return ScaledVector.normalized(mat @ v.values, v.log_offset)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("OTFLOW_THREADS", "1")))
    except ValueError:
        return 1


def kernel_mat(A: ScaledMatrix, K: SparseKernel, transpose: bool = False) -> ScaledMatrix:
    """Row-wise products ``A K`` (or ``A K^T``), each row renormalized."""
    # a K = (K^T a^T)^T, so right-multiplying rows by K uses the transposed CSR.
    mat = K.matrix if transpose else K.matrix_t
    vals = A.values
    workers = _threads()
    if workers > 1 and vals.shape[0] >= 2 * workers:
        chunks = np.array_split(np.arange(vals.shape[0]), workers)
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda idx: (mat @ vals[idx].T).T, chunks))
        out = np.vstack(parts)
    else:
        out = np.asarray((mat @ vals.T).T)
    return ScaledMatrix.normalized(out, A.log_offset)



class LogKernel:
    """``K = exp(log_data)`` on a sparse support.

    ``log_data`` and ``cost`` follow CSR order of the support (``rows``,
    ``cols``).  Entries are never dropped, however small.  When all entries
    lie within ``BAND`` of each other a linear-domain copy is kept for the
    fast path of :func:`log_matmul`.
    """

    def __init__(self, n: int, rows, cols, log_data, cost=None):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        log_data = np.asarray(log_data, dtype=float)
        order = np.lexsort((cols, rows))
        self.n = int(n)
        self.rows, self.cols, self.log_data = rows[order], cols[order], log_data[order]
        self.cost = None if cost is None else np.asarray(cost, dtype=float)[order]
        self.top = float(self.log_data.max()) if self.log_data.size else 0.0
        self.linear = None
        if self.log_data.size and self.top - self.log_data.min() <= BAND:
            mat = sp.csr_matrix((np.exp(self.log_data - self.top), (self.rows, self.cols)), shape=(n, n))
            self.linear = (mat, sp.csr_matrix(mat.T))
        # segment layouts for the exact sparse log-sum-exp, grouped by output index
        by_col = np.lexsort((self.rows, self.cols))
        self._segments = {False: self._layout(self.rows[by_col], self.cols[by_col], self.log_data[by_col]),
                          True: self._layout(self.cols, self.rows, self.log_data)}

    @staticmethod
    def _layout(src, dst, logv):
        starts = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]]) if dst.size else np.zeros(0, np.int64)
        counts = np.diff(np.r_[starts, dst.size])
        return src, logv, starts, counts, dst[starts]

    @property
    def nnz(self) -> int:
        return self.log_data.size

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.rows, self.cols] = np.exp(self.log_data)
        return out

    def indicator(self) -> "LogKernel":
        """Kernel with every support entry equal to one (for support counting)."""
        return LogKernel(self.n, self.rows, self.cols, np.zeros(self.nnz))

    def __repr__(self) -> str:
        return f"LogKernel(n={self.n}, nnz={self.nnz})"


def build_log_kernel(structure: StructureMatrix, epsilon: float) -> LogKernel:
    """``log K = -C / eps`` on the structure support."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return LogKernel(structure.n, structure.rows, structure.indices, -structure.data / epsilon, structure.data)


def _sparse_lse(A: np.ndarray, K: LogKernel, transpose: bool) -> np.ndarray:
    """Exact ``log sum_i exp(A[:, i] + log K[i, j])`` by segment reductions over the support."""
    src, logv, starts, counts, dst = K._segments[transpose]
    out = np.full((A.shape[0], K.n), -np.inf)
    if not src.size:
        return out
    # nonzeros along axis 0 keeps the reductions contiguous
    X = np.ascontiguousarray(A.T)[src] + logv[:, None]
    mx = np.maximum.reduceat(X, starts, axis=0)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out[:, dst] = (np.log(np.add.reduceat(np.exp(X - np.repeat(mx, counts, axis=0)), starts, axis=0)) + mx).T
    return out


def _log_matmul_rows(A: np.ndarray, K: LogKernel, transpose: bool) -> np.ndarray:
    finite = np.isfinite(A)
    with np.errstate(invalid="ignore"):
        m = np.where(finite, A, -np.inf).max(axis=1)
    m = np.where(np.isfinite(m), m, 0.0)
    rel = A - m[:, None]
    if K.linear is not None and (not finite.any() or rel[finite].min() >= -BAND):
        # every product term is above exp(-2 BAND): one linear-domain product is safe
        mat, mat_t = K.linear
        prod = np.asarray((mat if transpose else mat_t) @ np.exp(rel).T).T
        with np.errstate(divide="ignore"):
            return np.log(prod) + (m + K.top)[:, None]
    return _sparse_lse(A, K, transpose)


def log_matmul(logA: np.ndarray, K: LogKernel, transpose: bool = False) -> np.ndarray:
    """``log(exp(logA) @ K)`` (or ``@ K^T``) row by row, without under- or overflow.

    ``logA`` is ``(n,)`` or ``(L, n)``; ``-inf`` marks zeros.  Rows are split
    across ``OTFLOW_THREADS`` workers when that is above one.
    """
    logA = np.asarray(logA, dtype=float)
    vec = logA.ndim == 1
    A = np.atleast_2d(logA)
    workers = _threads()
    if workers > 1 and A.shape[0] >= 2 * workers:
        chunks = np.array_split(np.arange(A.shape[0]), workers)
        with ThreadPoolExecutor(workers) as pool:
            out = np.vstack(list(pool.map(lambda idx: _log_matmul_rows(A[idx], K, transpose), chunks)))
    else:
        out = _log_matmul_rows(A, K, transpose)
    return out[0] if vec else out
