"""Minimal sparse linear-algebra kernel.

Compressed sparse-column matrices with strict nonzero accounting, the
handful of structural operations needed by the set calculus (products,
concatenation, block diagonals), and an LDLT factorization for symmetric
quasi-definite systems.
"""

from __future__ import annotations

import threading

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee


class RankDeficiencyError(ValueError):
    """Raised when a pivot falls below the rank-deficiency threshold."""

    def __init__(self, pivot_index, pivot_value, message=None):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        if message is None:
            message = (
                f"rank-deficient matrix: |pivot| = {abs(pivot_value):.3e} at "
                f"index {pivot_index} is below threshold; the constraint rows "
                "are not full row rank (redundant constraints can be removed)"
            )
        super().__init__(message)


class SparseMat:
    """Immutable CSC matrix with no explicitly stored zeros.

    nnz counts structural nonzeros only: construction prunes explicit
    zeros and duplicate entries, so counts are deterministic regardless
    of how the matrix was assembled.
    """

    __slots__ = ("_m",)

    def __init__(self, data, shape=None):
        if isinstance(data, SparseMat):
            m = data._m
        elif sp.issparse(data):
            m = data.tocsc(copy=True)
        else:
            arr = np.atleast_2d(np.asarray(data, dtype=float))
            if shape is not None and arr.size == 0:
                arr = arr.reshape(shape)
            m = sp.csc_matrix(arr)
        if shape is not None and m.shape != tuple(shape):
            raise ValueError(f"data of shape {m.shape} does not match requested shape {tuple(shape)}")
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        m = m.astype(float)
        object.__setattr__(self, "_m", m)

    def __setattr__(self, name, value):
        raise AttributeError("SparseMat is immutable")

    @classmethod
    def zeros(cls, n_rows, n_cols):
        return cls(sp.csc_matrix((n_rows, n_cols)))

    @classmethod
    def eye(cls, n, scale=1.0):
        return cls(sp.identity(n, format="csc") * scale)

    @classmethod
    def diag(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(sp.diags(values).tocsc())

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape):
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsc())

    @property
    def shape(self):
        return self._m.shape

    @property
    def n_rows(self):
        return self._m.shape[0]

    @property
    def n_cols(self):
        return self._m.shape[1]

    @property
    def nnz(self):
        return int(self._m.nnz)

    def tocsc(self):
        """Copy of the underlying scipy CSC matrix."""
        return self._m.copy()

    def toarray(self):
        return self._m.toarray()

    def triplets(self):
        """(row, col, value) triplets in column-major order."""
        coo = self._m.tocoo()
        order = np.lexsort((coo.row, coo.col))
        return [(int(coo.row[i]), int(coo.col[i]), float(coo.data[i])) for i in order]

    def transpose(self):
        return SparseMat(self._m.T.tocsc())

    @property
    def T(self):
        return self.transpose()

    def scale(self, alpha):
        return SparseMat(self._m * float(alpha))

    def __neg__(self):
        return self.scale(-1.0)

    def __matmul__(self, other):
        return multiply(self, other)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n_cols:
            raise ValueError(f"cannot multiply {self.shape} by vector of length {x.shape[0]}")
        return self._m @ x

    def rmatvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n_rows:
            raise ValueError(f"cannot multiply transpose of {self.shape} by vector of length {x.shape[0]}")
        return self._m.T @ x

    def max_abs(self):
        return float(np.max(np.abs(self._m.data))) if self.nnz else 0.0

    def is_symmetric(self, rel_tol=1e-12):
        if self.n_rows != self.n_cols:
            return False
        diff = self._m - self._m.T
        if diff.nnz == 0:
            return True
        return float(np.max(np.abs(diff.data))) <= rel_tol * (1.0 + self.max_abs())

    def __repr__(self):
        return f"SparseMat(shape={self.shape}, nnz={self.nnz})"


def multiply(a: SparseMat, b):
    """Matrix product; entries cancelled to exactly zero are dropped.

    Accepts a dense vector/matrix on the right, in which case a dense
    result is returned.
    """
    if isinstance(b, SparseMat):
        if a.n_cols != b.n_rows:
            raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
        return SparseMat(a._m @ b._m)
    return a.matvec(b)


def hcat(*mats):
    mats = [SparseMat(m) if not isinstance(m, SparseMat) else m for m in mats]
    rows = {m.n_rows for m in mats}
    if len(rows) > 1:
        raise ValueError(f"cannot hcat matrices with row counts {[m.shape for m in mats]}")
    return SparseMat(sp.hstack([m._m for m in mats], format="csc"))


def vcat(*mats):
    mats = [SparseMat(m) if not isinstance(m, SparseMat) else m for m in mats]
    cols = {m.n_cols for m in mats}
    if len(cols) > 1:
        raise ValueError(f"cannot vcat matrices with column counts {[m.shape for m in mats]}")
    return SparseMat(sp.vstack([m._m for m in mats], format="csc"))


def blkdiag(*mats):
    mats = [SparseMat(m) if not isinstance(m, SparseMat) else m for m in mats]
    if not mats:
        return SparseMat.zeros(0, 0)
    return SparseMat(sp.block_diag([m._m for m in mats], format="csc"))


class LdltFactor:
    """L D L^T factorization of a permuted symmetric matrix.

    L is unit lower triangular (unit diagonal not stored), D holds the
    mixed-sign pivots. ``perm`` maps factor positions to original
    indices: P M P^T = L D L^T with P[i, perm[i]] = 1.

    The factor is immutable; solves allocate per-call scratch and are
    safe to run concurrently.
    """

    # below this dimension a dense copy of L is kept so back-solves can
    # use LAPACK triangular kernels instead of per-column python loops
    _DENSE_SOLVE_MAX_DIM = 2600

    __slots__ = ("n", "L", "D", "perm", "_Lp", "_Li", "_Lx", "_Ldense")

    def __init__(self, n, Lp, Li, Lx, D, perm=None):
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "_Lp", Lp)
        object.__setattr__(self, "_Li", Li)
        object.__setattr__(self, "_Lx", Lx)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "perm", perm)
        lower = sp.csc_matrix((Lx, Li, Lp), shape=(n, n))
        object.__setattr__(self, "L", SparseMat(lower + sp.identity(n, format="csc")))
        if n <= self._DENSE_SOLVE_MAX_DIM:
            dense = lower.toarray()
            np.fill_diagonal(dense, 1.0)
            object.__setattr__(self, "_Ldense", dense)
        else:
            object.__setattr__(self, "_Ldense", None)

    def __setattr__(self, name, value):
        raise AttributeError("LdltFactor is immutable")

    def solve(self, rhs):
        return ldlt_solve(self, rhs)


_symbolic_cache: dict = {}
_symbolic_lock = threading.Lock()
_SYMBOLIC_CACHE_MAX = 64


def _symbolic(n, Ap, Ai):
    """Elimination tree and column counts for the upper-triangular pattern.

    Cached on the pattern bytes: repeated factorizations with identical
    structure (e.g. a sliding estimation window) skip the symbolic pass.
    """
    key = (n, Ap.tobytes(), Ai.tobytes())
    with _symbolic_lock:
        hit = _symbolic_cache.get(key)
    if hit is not None:
        return hit

    parent = np.full(n, -1, dtype=np.int64)
    flag = np.full(n, -1, dtype=np.int64)
    lnz = np.zeros(n, dtype=np.int64)
    for k in range(n):
        flag[k] = k
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i < k:
                while flag[i] != k:
                    if parent[i] == -1:
                        parent[i] = k
                    lnz[i] += 1
                    flag[i] = k
                    i = parent[i]
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lnz, out=Lp[1:])
    result = (parent, Lp)
    with _symbolic_lock:
        if len(_symbolic_cache) >= _SYMBOLIC_CACHE_MAX:
            _symbolic_cache.clear()
        _symbolic_cache[key] = result
    return result


def ldlt_factorize(m: SparseMat, ordering="natural", pivot_rel_tol=1e-12) -> LdltFactor:
    """Sparse LDLT factorization with 1-by-1 pivots in fixed order.

    Suitable for symmetric quasi-definite matrices (positive-definite
    leading block, zero trailing block, full-row-rank coupling), for
    which this pivot sequence always exists. Exact zeros produced by
    cancellation during elimination are kept structurally so nonzero
    counts stay deterministic.

    ordering: "natural" (default) factorizes in given order; "rcm"
    applies a reverse-Cuthill-McKee fill-reducing permutation first.

    Raises RankDeficiencyError when a pivot magnitude falls below
    ``pivot_rel_tol * max|m|``, which signals that the coupling rows are
    not full row rank.
    """
    m = m if isinstance(m, SparseMat) else SparseMat(m)
    if m.n_rows != m.n_cols:
        raise ValueError(f"cannot factorize non-square matrix of shape {m.shape}")
    if not m.is_symmetric():
        raise ValueError("matrix is not symmetric within 1e-12 relative tolerance")

    csc = m._m
    perm = None
    if ordering == "rcm":
        perm = np.asarray(reverse_cuthill_mckee(csc, symmetric_mode=True), dtype=np.int64)
        # zero-diagonal rows (constraint rows of saddle systems) must be
        # eliminated after the definite block or a pivot is structurally zero
        diag = csc.diagonal()
        nonzero_diag = diag[perm] != 0.0
        perm = np.concatenate([perm[nonzero_diag], perm[~nonzero_diag]])
        csc = csc[perm][:, perm].tocsc()
        csc.sort_indices()
    elif ordering != "natural":
        raise ValueError(f"unknown ordering {ordering!r}")

    n = csc.shape[0]
    upper = sp.triu(csc, format="csc")
    upper.sort_indices()
    Ap = upper.indptr.astype(np.int64)
    Ai = upper.indices.astype(np.int64)
    Ax = upper.data

    threshold = pivot_rel_tol * (m.max_abs() if m.nnz else 1.0)
    parent, Lp = _symbolic(n, Ap, Ai)

    Li = np.zeros(Lp[-1], dtype=np.int64)
    Lx = np.zeros(Lp[-1], dtype=float)
    D = np.zeros(n, dtype=float)
    y = np.zeros(n, dtype=float)
    pattern = np.zeros(n, dtype=np.int64)
    flag = np.full(n, -1, dtype=np.int64)
    lnz = np.zeros(n, dtype=np.int64)

    for k in range(n):
        top = n
        flag[k] = k
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i > k:
                continue
            y[i] += Ax[p]
            chain_len = 0
            while flag[i] != k:
                pattern[chain_len] = i
                chain_len += 1
                flag[i] = k
                i = parent[i]
            while chain_len > 0:
                chain_len -= 1
                top -= 1
                pattern[top] = pattern[chain_len]
        D[k] = y[k]
        y[k] = 0.0
        for t in range(top, n):
            i = pattern[t]
            yi = y[i]
            y[i] = 0.0
            p0 = Lp[i]
            p1 = p0 + lnz[i]
            if p1 > p0:
                idx = Li[p0:p1]
                y[idx] -= Lx[p0:p1] * yi
            l_ki = yi / D[i]
            D[k] -= l_ki * yi
            Li[p1] = k
            Lx[p1] = l_ki
            lnz[i] += 1
        if abs(D[k]) <= threshold:
            raise RankDeficiencyError(k if perm is None else int(perm[k]), D[k])

    return LdltFactor(n, Lp, Li, Lx, D, perm=perm)


def _solve_lower_csc(Lp, Li, Lx, x):
    # x <- L^{-1} x, unit diagonal implied
    n = len(Lp) - 1
    for j in range(n):
        p0, p1 = Lp[j], Lp[j + 1]
        if p1 > p0:
            x[Li[p0:p1]] -= np.multiply.outer(Lx[p0:p1], x[j]) if x.ndim > 1 else Lx[p0:p1] * x[j]
    return x


def _solve_lower_t_csc(Lp, Li, Lx, x):
    # x <- L^{-T} x, unit diagonal implied
    n = len(Lp) - 1
    for j in range(n - 1, -1, -1):
        p0, p1 = Lp[j], Lp[j + 1]
        if p1 > p0:
            x[j] -= Lx[p0:p1] @ x[Li[p0:p1]]
    return x


def ldlt_solve(factor: LdltFactor, rhs):
    """Solve M x = rhs using the factorization of M.

    rhs may be a vector or a matrix of stacked right-hand sides; the
    result has the same shape.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != factor.n:
        raise ValueError(f"rhs of length {rhs.shape[0]} does not match system dimension {factor.n}")
    x = rhs.copy()
    if factor.perm is not None:
        x = x[factor.perm]
    d = factor.D if x.ndim == 1 else factor.D[:, None]
    if factor._Ldense is not None and factor.n > 0:
        x = scipy.linalg.solve_triangular(
            factor._Ldense, x, lower=True, unit_diagonal=True, check_finite=False,
            overwrite_b=True,
        )
        x /= d
        x = scipy.linalg.solve_triangular(
            factor._Ldense, x, lower=True, unit_diagonal=True, trans="T", check_finite=False,
            overwrite_b=True,
        )
    else:
        _solve_lower_csc(factor._Lp, factor._Li, factor._Lx, x)
        x /= d
        _solve_lower_t_csc(factor._Lp, factor._Li, factor._Lx, x)
    if factor.perm is not None:
        out = np.empty_like(x)
        out[factor.perm] = x
        x = out
    return x
