"""Reachable-set recursions for discrete-time linear systems.

Three equivalent constructions of the N-step reachable set of
x+ = A x + B u with state domain set S and input domain set U:

- standard:   X_{k+1} = (A X_k + B U) with a plain intersection with S;
- graph:      a lifted input/output set Psi is built once, then each
              step intersects Psi with (X_k x U) and projects;
- sparse:     X_{k+1} = [0 0 I]((X_k x U x S) intersected through
              [A B -I] with {0}), which keeps the generator matrix
              constant-size and the constraint growth linear.

All methods return the same sets; they differ only in the sparsity and
size of the matrices representing them. Measurement-update recursions
for set-valued state estimation follow the same standard/sparse split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sets import (
    ConZono,
    affine_map,
    cartesian_product,
    generalized_intersection,
    minkowski_sum,
    point_set,
)
from .sparse import SparseMat, hcat


@dataclass(frozen=True)
class LinearSystem:
    """x+ = A x + B u with state domain set S and input domain set U.

    C is an optional measurement map y = C x used by the estimation
    recursions.
    """

    A: SparseMat
    B: SparseMat
    S: ConZono
    U: ConZono
    C: SparseMat | None = None

    def __post_init__(self):
        A = self.A if isinstance(self.A, SparseMat) else SparseMat(self.A)
        B = self.B if isinstance(self.B, SparseMat) else SparseMat(self.B)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if self.C is not None and not isinstance(self.C, SparseMat):
            object.__setattr__(self, "C", SparseMat(self.C))
        if A.n_rows != A.n_cols:
            raise ValueError(f"state matrix must be square, got {A.shape}")
        if B.n_rows != A.n_rows:
            raise ValueError(f"input matrix rows {B.n_rows} do not match state dimension {A.n_rows}")
        if self.S.dim != self.n_x:
            raise ValueError(f"state domain set has dimension {self.S.dim}, expected {self.n_x}")
        if self.U.dim != self.n_u:
            raise ValueError(f"input domain set has dimension {self.U.dim}, expected {self.n_u}")

    @property
    def n_x(self):
        return self.A.n_rows

    @property
    def n_u(self):
        return self.B.n_cols


def _check_x0(X0: ConZono, sys: LinearSystem):
    if X0.dim != sys.n_x:
        raise ValueError(f"initial set has dimension {X0.dim}, expected {sys.n_x}")


def reach_standard(X0: ConZono, sys: LinearSystem, N, skip_domain=False):
    """Reachable sets X_0..X_N by the direct image/sum recursion.

    With ``skip_domain`` the per-step intersection with S is omitted,
    for systems whose states carry no a-priori bound; the iterates then
    stay zonotopes whenever the inputs are zonotopes.
    """
    _check_x0(X0, sys)
    sets = [X0]
    for _ in range(int(N)):
        propagated = minkowski_sum(affine_map(sys.A, sets[-1]), affine_map(sys.B, sys.U))
        if skip_domain:
            sets.append(propagated)
        else:
            sets.append(generalized_intersection(propagated, sys.S))
    return sets


def _graph_set(sys: LinearSystem) -> ConZono:
    # lifted set pairing (x, u) in S x U with their image A x + B u in S
    n_x, n_u = sys.n_x, sys.n_u
    lift = SparseMat(
        np.vstack([
            np.hstack([np.eye(n_x), np.zeros((n_x, n_u))]),
            np.hstack([np.zeros((n_u, n_x)), np.eye(n_u)]),
            np.hstack([sys.A.toarray(), sys.B.toarray()]),
        ])
    )
    domain = cartesian_product(sys.S, sys.U)
    project_out = hcat(SparseMat.zeros(n_x, n_x), SparseMat.zeros(n_x, n_u), SparseMat.eye(n_x))
    return generalized_intersection(affine_map(lift, domain), sys.S, project_out)


def reach_graph(X0: ConZono, sys: LinearSystem, N):
    """Reachable sets via the graph-of-function recursion.

    The lifted set is built once; each step intersects it with
    (X_k x U) through the selector of its first two blocks and projects
    onto the image block.
    """
    _check_x0(X0, sys)
    n_x, n_u = sys.n_x, sys.n_u
    psi = _graph_set(sys)
    select_xu = hcat(SparseMat.eye(n_x + n_u), SparseMat.zeros(n_x + n_u, n_x))
    project = hcat(SparseMat.zeros(n_x, n_x + n_u), SparseMat.eye(n_x))
    sets = [X0]
    for _ in range(int(N)):
        lifted = generalized_intersection(psi, cartesian_product(sets[-1], sys.U), select_xu)
        sets.append(affine_map(project, lifted))
    return sets


def reach_sparse(X0: ConZono, sys: LinearSystem, N):
    """Reachable sets via the sparsity-promoting recursion.

    Each step stacks (X_k x U x S), pins the dynamics with one
    intersection through [A B -I] against the origin, and projects onto
    the S block; the iterate generator matrix is always [0 0 G_S].
    """
    _check_x0(X0, sys)
    n_x, n_u = sys.n_x, sys.n_u
    dyn = hcat(sys.A, sys.B, SparseMat.eye(n_x, -1.0))
    origin = point_set(np.zeros(n_x))
    project = hcat(SparseMat.zeros(n_x, n_x + n_u), SparseMat.eye(n_x))
    sets = [X0]
    for _ in range(int(N)):
        stacked = cartesian_product(cartesian_product(sets[-1], sys.U), sys.S)
        pinned = generalized_intersection(stacked, origin, _pad_left(dyn, stacked.dim - dyn.n_cols))
        sets.append(affine_map(project, pinned))
    return sets


def _pad_left(R: SparseMat, extra_cols):
    if extra_cols == 0:
        return R
    return hcat(SparseMat.zeros(R.n_rows, extra_cols), R)


def svse_step_standard(Xk: ConZono, sys: LinearSystem, W: ConZono, V: ConZono, u, y_next) -> ConZono:
    """One measurement-updated step of set-valued state estimation.

    ((A X_k + B u + W) intersected through C with (y - V)) then
    intersected with S.
    """
    if sys.C is None:
        raise ValueError("system has no measurement map")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y_next = np.atleast_1d(np.asarray(y_next, dtype=float))
    if W.dim != sys.n_x:
        raise ValueError(f"process noise set has dimension {W.dim}, expected {sys.n_x}")
    if sys.C.n_rows != y_next.shape[0]:
        raise ValueError(f"measurement of length {y_next.shape[0]} does not match map rows {sys.C.n_rows}")
    propagated = minkowski_sum(affine_map(sys.A, Xk, sys.B.matvec(u)), W)
    meas_set = affine_map(SparseMat.eye(V.dim, -1.0), V, y_next)
    fused = generalized_intersection(propagated, meas_set, sys.C)
    return generalized_intersection(fused, sys.S)


def svse_step_sparse(Xk: ConZono, sys: LinearSystem, W: ConZono, V: ConZono, u, y_next) -> ConZono:
    """High-sparsity form of the measurement-updated estimation step.

    [0 0 I]((X_k x W x (S intersected through C with (y - V))) pinned
    through [A I -I] against {-B u}); set-equal to the standard form.
    """
    if sys.C is None:
        raise ValueError("system has no measurement map")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y_next = np.atleast_1d(np.asarray(y_next, dtype=float))
    n_x = sys.n_x
    meas_set = affine_map(SparseMat.eye(V.dim, -1.0), V, y_next)
    s_fused = generalized_intersection(sys.S, meas_set, sys.C)
    stacked = cartesian_product(cartesian_product(Xk, W), s_fused)
    dyn = hcat(sys.A, SparseMat.eye(n_x), SparseMat.eye(n_x, -1.0))
    target = point_set(-sys.B.matvec(u))
    pinned = generalized_intersection(stacked, target, _pad_left(dyn, stacked.dim - dyn.n_cols))
    project = hcat(SparseMat.zeros(n_x, stacked.dim - n_x), SparseMat.eye(n_x))
    return affine_map(project, pinned)


@dataclass(frozen=True)
class ComplexityPrediction:
    """Generator/constraint counts and structural nonzero bounds for X_N."""

    n_g: int
    n_c: int
    nnz_g_bound: int
    nnz_a_bound: int

    def __post_init__(self):
        for name in ("n_g", "n_c", "nnz_g_bound", "nnz_a_bound"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class ReachDims:
    """Dimension and set-size counts that determine memory complexity."""

    n_x: int
    n_u: int
    n_g0: int
    n_c0: int
    n_gs: int
    n_cs: int
    n_gu: int
    n_cu: int

    @classmethod
    def of(cls, X0: ConZono, sys: LinearSystem):
        return cls(
            n_x=sys.n_x, n_u=sys.n_u,
            n_g0=X0.n_g, n_c0=X0.n_c,
            n_gs=sys.S.n_g, n_cs=sys.S.n_c,
            n_gu=sys.U.n_g, n_cu=sys.U.n_c,
        )


def predict_complexity(method, N, dims: ReachDims) -> ComplexityPrediction:
    """Closed-form counts and nonzero upper bounds for the N-step set.

    Generator/constraint counts are exact for all three methods. The
    nonzero fields bound the generator and constraint matrices of X_N
    under the assumption that all input matrices and every matrix
    product are fully dense; structural zero blocks are propagated
    exactly, so actual counts never exceed the bounds.
    """
    N = int(N)
    if N < 0:
        raise ValueError("horizon must be nonnegative")
    d = dims
    if N == 0:
        return ComplexityPrediction(d.n_g0, d.n_c0, d.n_x * d.n_g0, d.n_c0 * d.n_g0)

    if method == "standard":
        n_g = N * (d.n_gs + d.n_gu) + d.n_g0
        n_c = N * (d.n_cs + d.n_cu + d.n_x) + d.n_c0
        # nonzero generator columns of X_k: k n_gu + n_g0 (the S block stays zero)
        nnz_g = d.n_x * (N * d.n_gu + d.n_g0)
        nnz_a = d.n_c0 * d.n_g0
        for k in range(N):
            nnz_a += d.n_x * (k * d.n_gu + d.n_g0)          # A G_{x,k}
            nnz_a += d.n_x * d.n_gu                         # B G_u
            nnz_a += d.n_x * d.n_gs                         # -G_s
            nnz_a += d.n_cs * d.n_gs + d.n_cu * d.n_gu      # A_s, A_u blocks
        return ComplexityPrediction(n_g, n_c, nnz_g, nnz_a)

    if method == "graph":
        n_g = 2 * N * (d.n_gs + d.n_gu) + d.n_g0
        # the lifted set contributes (2 n_cs + n_cu + n_x) rows per step and the
        # per-step intersection adds A_u plus (n_x + n_u) coupling rows
        n_c = N * (2 * d.n_cs + 2 * d.n_cu + 2 * d.n_x + d.n_u) + d.n_c0
        nnz_g = d.n_x * (d.n_gs + d.n_gu) if N >= 1 else d.n_x * d.n_g0
        nnz_psi_a = (
            2 * d.n_cs * d.n_gs + d.n_cu * d.n_gu
            + d.n_x * (2 * d.n_gs + d.n_gu)                 # [A G_s, B G_u, -G_s]
        )
        nnz_a = d.n_c0 * d.n_g0
        for k in range(N):
            gx_cols = d.n_g0 if k == 0 else d.n_gs + d.n_gu  # nonzero cols of G_{x,k}
            nnz_a += nnz_psi_a
            nnz_a += d.n_cu * d.n_gu                        # A_u block
            nnz_a += d.n_x * d.n_gs + d.n_x * gx_cols       # [G_s... , -G_{x,k}] rows
            nnz_a += 2 * d.n_u * d.n_gu                     # [G_u..., -G_u] rows
        return ComplexityPrediction(n_g, n_c, nnz_g, nnz_a)

    if method == "sparse":
        n_g = N * (d.n_gs + d.n_gu) + d.n_g0
        n_c = N * (d.n_cs + d.n_cu + d.n_x) + d.n_c0
        nnz_g = d.n_x * d.n_gs if N >= 1 else d.n_x * d.n_g0
        nnz_a = d.n_c0 * d.n_g0
        for k in range(N):
            gx_cols = d.n_g0 if k == 0 else d.n_gs           # nonzero cols of G_{x,k}
            nnz_a += d.n_x * gx_cols                        # A G_{x,k}
            nnz_a += d.n_x * d.n_gu                         # B G_u
            nnz_a += d.n_x * d.n_gs                         # -G_s
            nnz_a += d.n_cs * d.n_gs + d.n_cu * d.n_gu      # A_s, A_u blocks
        return ComplexityPrediction(n_g, n_c, nnz_g, nnz_a)

    raise ValueError(f"unknown method {method!r}")


REACH_METHODS = {
    "standard": reach_standard,
    "graph": reach_graph,
    "sparse": reach_sparse,
}
