"""Assemble control, estimation, and safety-verification problems.

Each builder unrolls a horizon with the high-sparsity reachability
identity, producing a constrained zonotope over the stacked trajectory
together with the matching quadratic cost blocks. Solutions map back to
per-step states and inputs through a recorded offset index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import AdmmSettings, check_empty, bounding_box
from .intervals import IntervalBox
from .reach import LinearSystem
from .sets import (
    ConZono,
    affine_map,
    cartesian_product,
    generalized_intersection,
    interval_to_zono,
    point_set,
)
from .sparse import SparseMat, blkdiag, hcat, multiply


@dataclass(frozen=True)
class TrajectoryIndex:
    """Offsets of each state and input (or noise) block inside the
    stacked decision vector."""

    x_offsets: tuple
    u_offsets: tuple
    n_x: int
    n_u: int
    total_dim: int

    def x_slice(self, k):
        o = self.x_offsets[k]
        return slice(o, o + self.n_x)

    def u_slice(self, k):
        o = self.u_offsets[k]
        return slice(o, o + self.n_u)


def extract_trajectory(z, idx: TrajectoryIndex):
    """Split a stacked decision vector into per-step states and inputs."""
    z = np.asarray(z, dtype=float)
    if z.shape[0] != idx.total_dim:
        raise ValueError(f"vector of length {z.shape[0]} does not match stacked dimension {idx.total_dim}")
    xs = [z[idx.x_slice(k)].copy() for k in range(len(idx.x_offsets))]
    us = [z[idx.u_slice(k)].copy() for k in range(len(idx.u_offsets))]
    return xs, us


def stack_trajectory(xs, us, idx: TrajectoryIndex):
    """Inverse of extract_trajectory."""
    z = np.zeros(idx.total_dim)
    for k, x in enumerate(xs):
        z[idx.x_slice(k)] = x
    for k, u in enumerate(us):
        z[idx.u_slice(k)] = u
    return z


@dataclass(frozen=True)
class MpcSpec:
    """Finite-horizon tracking problem with per-step state sets.

    state_sets[k-1] constrains x_k for k = 1..N; refs[k-1] is the state
    reference for the same step. The initial state is pinned exactly.
    """

    sys: LinearSystem
    x0: np.ndarray
    refs: list
    Q: SparseMat
    R: SparseMat
    Q_N: SparseMat
    N: int
    state_sets: list

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        for name in ("Q", "R", "Q_N"):
            m = getattr(self, name)
            if not isinstance(m, SparseMat):
                object.__setattr__(self, name, SparseMat(m))
        n_x, n_u = self.sys.n_x, self.sys.n_u
        if self.x0.shape[0] != n_x:
            raise ValueError(f"initial state of length {self.x0.shape[0]} does not match n_x={n_x}")
        if len(self.state_sets) != self.N or len(self.refs) != self.N:
            raise ValueError(
                f"need {self.N} state sets and references, got "
                f"{len(self.state_sets)} and {len(self.refs)}"
            )
        for name, dim in (("Q", n_x), ("R", n_u), ("Q_N", n_x)):
            m = getattr(self, name)
            if m.shape != (dim, dim):
                raise ValueError(f"{name} has shape {m.shape}, expected {(dim, dim)}")
            if not m.is_symmetric():
                raise ValueError(f"{name} is not symmetric")


def build_mpc(spec: MpcSpec):
    """Unroll the tracking problem into (Z, P, q, index).

    Per step the feasible set is extended by the input set and the
    step's state set, then the dynamics rows are pinned with a single
    intersection against the origin. Cost blocks stack Q/R with Q_N at
    the terminal state.
    """
    sys = spec.sys
    n_x, n_u = sys.n_x, sys.n_u
    Z = point_set(spec.x0)
    P = spec.Q
    q = np.zeros(n_x)
    x_offsets = [0]
    u_offsets = []
    offset = n_x
    dyn = hcat(sys.A, sys.B, SparseMat.eye(n_x, -1.0))
    origin = point_set(np.zeros(n_x))
    for k in range(1, spec.N + 1):
        S_k = spec.state_sets[k - 1]
        Z = cartesian_product(cartesian_product(Z, sys.U), S_k)
        pin = hcat(SparseMat.zeros(n_x, Z.dim - dyn.n_cols), dyn)
        Z = generalized_intersection(Z, origin, pin)
        u_offsets.append(offset)
        offset += n_u
        x_offsets.append(offset)
        offset += n_x
        weight = spec.Q_N if k == spec.N else spec.Q
        P = blkdiag(P, spec.R, weight)
        q = np.concatenate([q, np.zeros(n_u), -weight.matvec(np.asarray(spec.refs[k - 1], dtype=float))])
    idx = TrajectoryIndex(tuple(x_offsets), tuple(u_offsets), n_x, n_u, offset)
    return Z, P, q, idx


@dataclass(frozen=True)
class MheSpec:
    """Fixed-window estimation problem over bounded noise.

    inputs[j] and measurements[j] are u and y for the j-th step of the
    window (the measurement taken after applying the input). prior_set
    bounds the state at the window start; the quadratic weights are the
    inverse covariances.
    """

    sys: LinearSystem
    W: ConZono
    V: ConZono
    prior_set: ConZono
    prior_estimate: np.ndarray
    prior_info: SparseMat
    Q_inv: SparseMat
    R_inv: SparseMat
    inputs: list
    measurements: list
    N: int

    def __post_init__(self):
        object.__setattr__(
            self, "prior_estimate", np.atleast_1d(np.asarray(self.prior_estimate, dtype=float))
        )
        for name in ("prior_info", "Q_inv", "R_inv"):
            m = getattr(self, name)
            if not isinstance(m, SparseMat):
                object.__setattr__(self, name, SparseMat(m))
        if self.sys.C is None:
            raise ValueError("estimation needs a system with a measurement map")
        if len(self.inputs) != self.N or len(self.measurements) != self.N:
            raise ValueError(
                f"need {self.N} inputs and measurements, got "
                f"{len(self.inputs)} and {len(self.measurements)}"
            )
        if self.W.dim != self.sys.n_x:
            raise ValueError(f"process noise set has dimension {self.W.dim}, expected {self.sys.n_x}")
        for name in ("prior_info", "Q_inv", "R_inv"):
            if not getattr(self, name).is_symmetric():
                raise ValueError(f"{name} is not symmetric")


def build_mhe(spec: MheSpec):
    """Unroll the estimation window into (Z, P, q, index, X_end).

    The decision vector stacks the window-start state, each step's
    process noise, and each subsequent state. X_end is the set of states
    consistent with the window data, read off by a linear map.
    """
    sys = spec.sys
    n_x = sys.n_x
    C = sys.C
    Z = spec.prior_set
    P = spec.prior_info
    q = -spec.prior_info.matvec(spec.prior_estimate)
    x_offsets = [0]
    w_offsets = []
    offset = n_x
    ct_rinv = multiply(C.T, spec.R_inv)
    ct_rinv_c = multiply(ct_rinv, C)
    dyn = hcat(sys.A, SparseMat.eye(n_x), SparseMat.eye(n_x, -1.0))
    neg_v = affine_map(SparseMat.eye(spec.V.dim, -1.0), spec.V)
    for j in range(spec.N):
        u = np.asarray(spec.inputs[j], dtype=float)
        y = np.asarray(spec.measurements[j], dtype=float)
        meas_set = affine_map(SparseMat.eye(spec.V.dim), neg_v, y)
        s_fused = generalized_intersection(sys.S, meas_set, C)
        Z = cartesian_product(cartesian_product(Z, spec.W), s_fused)
        pin = hcat(SparseMat.zeros(n_x, Z.dim - dyn.n_cols), dyn)
        Z = generalized_intersection(Z, point_set(-sys.B.matvec(u)), pin)
        w_offsets.append(offset)
        offset += n_x
        x_offsets.append(offset)
        offset += n_x
        P = blkdiag(P, spec.Q_inv, ct_rinv_c)
        q = np.concatenate([q, np.zeros(n_x), -ct_rinv.matvec(y)])
    idx = TrajectoryIndex(tuple(x_offsets), tuple(w_offsets), n_x, n_x, offset)
    terminal = hcat(SparseMat.zeros(n_x, offset - n_x), SparseMat.eye(n_x))
    X_end = affine_map(terminal, Z)
    return Z, P, q, idx, X_end


def reduce_prior(X: ConZono, settings: AdmmSettings = None, pad=0.05) -> ConZono:
    """Replace a set by a zonotope over-approximating its bounding box.

    Used periodically to stop the recursive window prior from growing.
    The box is padded by ``pad`` on each side so solver tolerance in the
    support evaluations cannot shrink the enclosure.
    """
    if settings is None:
        settings = AdmmSettings(eps_primal=1e-3, eps_dual=1e-3, max_iter=50000)
    box = bounding_box(X, settings)
    return interval_to_zono(IntervalBox(box.lo - pad, box.hi + pad))


@dataclass(frozen=True)
class StepCertificate:
    """Per-step verification outcome."""

    step: int
    certified: bool
    iterations: int


def safety_verify(sys: LinearSystem, K, x_refs, W: ConZono, X0: ConZono, O: ConZono,
                  R_map, N, settings: AdmmSettings = AdmmSettings()):
    """Certify per-step disjointness of the closed-loop reachable tube
    from an unsafe set.

    The loop is closed with u = -K (x - x_ref), giving the recursion
    matrix A - B K and feedforward K x_ref. Each step's check runs the
    feasibility-mode solver on the intersection of the reachable set
    with the unsafe set through R_map; a certificate proves the step
    safe. An iteration-limited check is reported as not certified.
    """
    K = K if isinstance(K, SparseMat) else SparseMat(K)
    R_map = R_map if isinstance(R_map, SparseMat) else SparseMat(R_map)
    n_x, n_u = sys.n_x, sys.n_u
    a_closed = SparseMat(sys.A.tocsc() - multiply(sys.B, K).tocsc())
    dyn = hcat(a_closed, SparseMat.eye(n_x), SparseMat.eye(n_x, -1.0))
    project = hcat(SparseMat.zeros(n_x, n_x + n_x), SparseMat.eye(n_x))

    results = []
    X = X0
    for k in range(int(N) + 1):
        clash = generalized_intersection(X, O, R_map)
        outcome = check_empty(clash, settings)
        results.append(
            StepCertificate(step=k, certified=outcome.status == "infeasible",
                            iterations=outcome.iterations)
        )
        if k == N:
            break
        u_ff = K.matvec(np.asarray(x_refs[k], dtype=float))
        stacked = cartesian_product(cartesian_product(X, W), sys.S)
        pinned = generalized_intersection(stacked, point_set(-sys.B.matvec(u_ff)), dyn)
        X = affine_map(project, pinned)
    return results
