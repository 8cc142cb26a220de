"""Operator-splitting solver for convex QPs over constrained zonotopes.

The problem min 1/2 x^T P x + q^T x over x in Z is reduced to the factor
space of Z, where the feasible set is the intersection of an affine set
(the constraint rows) with the unit box. The splitting alternates an
equality-constrained quadratic solve against a box clamp; because the
factors are normalized to [-1, 1], no preconditioning is applied.

Emptiness of the affine/box intersection is certified exactly: a vector
in the row space of the constraints whose inner product with a feasible
affine point falls strictly outside its interval range over the box
separates the two sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .intervals import IntervalBox, interval_dot, symmetric_unit_box
from .sets import ConZono
from .sparse import (
    RankDeficiencyError,
    SparseMat,
    hcat,
    ldlt_factorize,
    ldlt_solve,
    multiply,
    vcat,
)


class ConstraintRankError(ValueError):
    """Constraint rows of the set are not linearly independent."""


class EmptySetError(RuntimeError):
    """An operation that requires a nonempty set received an empty one."""


class IndeterminateResultError(RuntimeError):
    """Iteration limit reached before convergence or a certificate."""


@dataclass(frozen=True)
class AdmmSettings:
    """Penalty, stopping tolerances, and certificate cadence.

    norm selects the stopping test: "l2" compares residual two-norms
    against sqrt(n) * eps, "inf" compares max-norms against eps.
    """

    rho: float = 1.0
    eps_primal: float = 0.01
    eps_dual: float = 0.01
    k_inf: int = 10
    max_iter: int = 5000
    norm: str = "l2"
    cert_margin: float = 0.0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.eps_primal <= 0 or self.eps_dual <= 0:
            raise ValueError("convergence tolerances must be positive")
        if self.k_inf < 1:
            raise ValueError("k_inf must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.norm not in ("l2", "inf"):
            raise ValueError(f"unknown norm {self.norm!r}")


@dataclass(frozen=True)
class QpProblem:
    """min 1/2 x^T P x + q^T x subject to x in Z."""

    P: SparseMat
    q: np.ndarray
    Z: ConZono

    def __post_init__(self):
        P = self.P if isinstance(self.P, SparseMat) else SparseMat(self.P)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        n = self.Z.dim
        if P.shape != (n, n):
            raise ValueError(f"cost matrix of shape {P.shape} does not match set dimension {n}")
        if self.q.shape[0] != n:
            raise ValueError(f"linear cost of length {self.q.shape[0]} does not match set dimension {n}")
        if not P.is_symmetric():
            raise ValueError("cost matrix is not symmetric within 1e-12 relative tolerance")


class ReducedQp:
    """Factor-space problem data with cached factorizations.

    Holds P~ = G^T P G, q~ = G^T (P c + q), the saddle matrix
    [[P~ + rho I, A^T], [A, 0]] with its factorization, and the
    factorization of A A^T used to project iterate differences onto the
    constraint row space. Immutable and shareable across solves.
    """

    __slots__ = ("Z", "rho", "p_tilde", "q_tilde", "M", "factor_m", "factor_aat",
                 "_A_csr", "_At_csc")

    def __init__(self, Z, rho, p_tilde, q_tilde):
        n_g, n_c = Z.n_g, Z.n_c
        A_t = Z.A.T
        m_top = hcat(_plus_rho_identity(p_tilde, rho), A_t)
        m_bottom = hcat(Z.A, SparseMat.zeros(n_c, n_c))
        M = vcat(m_top, m_bottom)
        try:
            factor_m = ldlt_factorize(M)
            factor_aat = ldlt_factorize(multiply(Z.A, A_t)) if n_c > 0 else None
        except RankDeficiencyError as err:
            raise ConstraintRankError(
                "constraint matrix is not full row rank (pivot "
                f"{err.pivot_value:.3e} at index {err.pivot_index}); redundant "
                "constraints can be removed before solving"
            ) from err
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "rho", float(rho))
        object.__setattr__(self, "p_tilde", p_tilde)
        object.__setattr__(self, "q_tilde", q_tilde)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "factor_m", factor_m)
        object.__setattr__(self, "factor_aat", factor_aat)
        # prebuilt operators for the per-iteration certificate projection
        object.__setattr__(self, "_A_csr", Z.A.tocsc().tocsr())
        object.__setattr__(self, "_At_csc", A_t.tocsc())

    def __setattr__(self, name, value):
        raise AttributeError("ReducedQp is immutable")

    @property
    def n_g(self):
        return self.Z.n_g

    @property
    def n_c(self):
        return self.Z.n_c


def _plus_rho_identity(p_tilde: SparseMat, rho):
    import scipy.sparse as sp

    n = p_tilde.n_rows
    return SparseMat(p_tilde.tocsc() + rho * sp.identity(n, format="csc"))


def reduce_qp(problem: QpProblem, settings: AdmmSettings = AdmmSettings()) -> ReducedQp:
    """Project the QP onto the factor space of its feasible set."""
    Z = problem.Z
    p_tilde = multiply(Z.G.T, multiply(problem.P, Z.G))
    q_tilde = Z.G.rmatvec(problem.P.matvec(Z.c) + problem.q)
    return ReducedQp(Z, settings.rho, p_tilde, q_tilde)


def reduce_feasibility(Z: ConZono, settings: AdmmSettings = AdmmSettings()) -> ReducedQp:
    """Factor-space problem with identity quadratic cost and zero linear cost.

    Used for emptiness verification: the strongly convex surrogate
    objective guarantees the iterate difference converges onto a
    certificate whenever the set is empty.
    """
    return ReducedQp(Z, settings.rho, SparseMat.eye(Z.n_g), np.zeros(Z.n_g))


@dataclass
class AdmmResult:
    """Outcome of one solve: iterates, status, and residual history."""

    status: str
    x_star: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    u: np.ndarray
    iterations: int
    certificate: np.ndarray | None = None
    residuals: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def to_json_dict(self):
        return {
            "status": self.status,
            "x_star": self.x_star.tolist(),
            "iterations": self.iterations,
            "residual_primal": self.residuals[:, 0].tolist(),
            "residual_dual": self.residuals[:, 1].tolist(),
            "certificate": None if self.certificate is None else self.certificate.tolist(),
        }


def _residual_norms(rp, rd, norm):
    if norm == "inf":
        return (
            np.max(np.abs(rp), axis=0) if rp.size else np.zeros(rp.shape[1]),
            np.max(np.abs(rd), axis=0) if rd.size else np.zeros(rd.shape[1]),
        )
    return (
        np.sqrt(np.einsum("ij,ij->j", rp, rp)),
        np.sqrt(np.einsum("ij,ij->j", rd, rd)),
    )


def _thresholds(n_g, settings):
    if settings.norm == "inf":
        return settings.eps_primal, settings.eps_dual
    scale = np.sqrt(max(n_g, 1))
    return scale * settings.eps_primal, scale * settings.eps_dual


def _iterate_batch(reduced: ReducedQp, q_tilde_cols, settings: AdmmSettings, warm=None):
    """Run the splitting iterations on a batch of linear costs.

    All columns share the matrix factorizations and the constraint rhs;
    each column carries its own iterates and stops (is snapshotted) at
    its own convergence iteration, so results are identical to running
    the columns one at a time.
    """
    n_g, n_c = reduced.n_g, reduced.n_c
    q_cols = np.atleast_2d(np.asarray(q_tilde_cols, dtype=float))
    if q_cols.shape[0] != n_g:
        q_cols = q_cols.T
    m = q_cols.shape[1]
    rho = settings.rho

    if warm is None:
        xi = np.zeros((n_g, m))
        zeta = np.zeros((n_g, m))
        u = np.zeros((n_g, m))
    else:
        xi, zeta, u = (np.array(np.broadcast_to(w.reshape(n_g, -1), (n_g, m))) for w in warm)

    rhs = np.empty((n_g + n_c, m))
    rhs[n_g:] = reduced.Z.b[:, None]
    eps_p, eps_d = _thresholds(n_g, settings)

    done = np.zeros(m, dtype=bool)
    status = np.array(["iteration-limit"] * m, dtype=object)
    iterations = np.full(m, settings.max_iter, dtype=int)
    certificates = [None] * m
    xi_out = np.zeros((n_g, m))
    zeta_out = np.zeros((n_g, m))
    u_out = np.zeros((n_g, m))
    history_rp = []
    history_rd = []

    for k in range(settings.max_iter):
        rhs[:n_g] = -q_cols + rho * (zeta - u)
        sol = ldlt_solve(reduced.factor_m, rhs)
        xi = sol[:n_g]
        zeta_prev = zeta
        zeta = np.clip(xi + u, -1.0, 1.0)
        u = u + xi - zeta

        newly_infeasible = np.zeros(m, dtype=bool)
        if n_c > 0 and k % settings.k_inf == 0:
            diff = zeta - xi
            y = ldlt_solve(reduced.factor_aat, reduced._A_csr @ diff)
            v = reduced._At_csc @ y
            vals = np.einsum("ij,ij->j", v, xi)
            radius = np.sum(np.abs(v), axis=0)
            outside = (vals < -radius - settings.cert_margin) | (vals > radius + settings.cert_margin)
            newly_infeasible = outside & ~done
            for j in np.nonzero(newly_infeasible)[0]:
                status[j] = "infeasible"
                certificates[j] = v[:, j].copy()

        rp = xi - zeta
        rd = rho * (zeta - zeta_prev)
        rp_norm, rd_norm = _residual_norms(rp, rd, settings.norm)
        history_rp.append(rp_norm)
        history_rd.append(rd_norm)
        newly_converged = (rp_norm < eps_p) & (rd_norm < eps_d) & ~done & ~newly_infeasible
        for j in np.nonzero(newly_converged)[0]:
            status[j] = "converged"
        finished = newly_infeasible | newly_converged
        if np.any(finished):
            idx = np.nonzero(finished)[0]
            xi_out[:, idx] = xi[:, idx]
            zeta_out[:, idx] = zeta[:, idx]
            u_out[:, idx] = u[:, idx]
            iterations[idx] = k + 1
            done |= finished
            if np.all(done):
                break

    live = ~done
    if np.any(live):
        idx = np.nonzero(live)[0]
        xi_out[:, idx] = xi[:, idx]
        zeta_out[:, idx] = zeta[:, idx]
        u_out[:, idx] = u[:, idx]

    all_rp = np.asarray(history_rp).reshape(-1, m)
    all_rd = np.asarray(history_rd).reshape(-1, m)
    results = []
    G, c = reduced.Z.G, reduced.Z.c
    for j in range(m):
        zeta_j = zeta_out[:, j]
        stop = iterations[j]
        results.append(
            AdmmResult(
                status=str(status[j]),
                x_star=G.matvec(zeta_j) + c,
                xi=xi_out[:, j],
                zeta=zeta_j,
                u=u_out[:, j],
                iterations=int(stop),
                certificate=certificates[j],
                residuals=np.column_stack([all_rp[:stop, j], all_rd[:stop, j]]),
            )
        )
    return results


def admm_solve(reduced: ReducedQp, settings: AdmmSettings = AdmmSettings(),
               q_tilde=None, warm=None) -> AdmmResult:
    """Solve the reduced problem; optionally override the linear cost.

    warm seeds the (xi, zeta, u) iterates from a previous result so
    repeated solves against the same factorizations can resume.
    """
    q = reduced.q_tilde if q_tilde is None else np.asarray(q_tilde, dtype=float)
    return _iterate_batch(reduced, q.reshape(-1, 1), settings, warm=warm)[0]


def infeasibility_check(reduced: ReducedQp, xi, zeta, settings: AdmmSettings = AdmmSettings()):
    """Candidate emptiness certificate from an iterate pair, or None.

    Projects zeta - xi onto the constraint row space and returns the
    projection when its inner product with xi (a point satisfying the
    constraint rows) lies strictly outside its achievable interval over
    the unit box.
    """
    if reduced.n_c == 0:
        return None
    xi = np.asarray(xi, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    y = ldlt_solve(reduced.factor_aat, reduced.Z.A.matvec(zeta - xi))
    v = reduced.Z.A.rmatvec(y)
    value = float(v @ xi)
    box_range = interval_dot(v, symmetric_unit_box(reduced.n_g))
    if value < box_range.lo - settings.cert_margin or value > box_range.hi + settings.cert_margin:
        return v
    return None


def check_empty(Z: ConZono, settings: AdmmSettings = AdmmSettings()) -> AdmmResult:
    """Run the feasibility-mode iterations on Z and report the outcome.

    status "infeasible" means a certificate proves Z is empty;
    "converged" means a feasible point was found.
    """
    if Z.n_g == 0:
        empty = bool(np.any(Z.b != 0.0))
        return AdmmResult(
            status="infeasible" if empty else "converged",
            x_star=Z.c.copy(),
            xi=np.zeros(0), zeta=np.zeros(0), u=np.zeros(0),
            iterations=0,
            certificate=None,
        )
    if Z.n_c == 0:
        return AdmmResult(
            status="converged",
            x_star=Z.c.copy(),
            xi=np.zeros(Z.n_g), zeta=np.zeros(Z.n_g), u=np.zeros(Z.n_g),
            iterations=0,
        )
    reduced = reduce_feasibility(Z, settings)
    return admm_solve(reduced, settings)


def is_empty(Z: ConZono, settings: AdmmSettings = AdmmSettings()) -> bool:
    """True iff an emptiness certificate is found.

    Raises IndeterminateResultError when the iteration limit is hit
    without either a certificate or convergence.
    """
    result = check_empty(Z, settings)
    if result.status == "infeasible":
        return True
    if result.status == "converged":
        return False
    raise IndeterminateResultError(
        f"no certificate or feasible point within {settings.max_iter} iterations"
    )


def contains_point(Z: ConZono, x, settings: AdmmSettings = AdmmSettings()) -> bool:
    """Point membership via emptiness of the constraint-augmented set.

    The generator rows are appended as additional constraint rows
    pinning G xi = x - c, so no generators are added. Coordinates with a
    structurally zero generator row are flat: they are decided by exact
    comparison and dropped from the augmentation, which would otherwise
    violate the full-row-rank requirement.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != Z.dim:
        raise ValueError(f"point of length {x.shape[0]} does not match set dimension {Z.dim}")
    offset = x - Z.c
    g_csr = Z.G.tocsc().tocsr()
    row_nnz = np.diff(g_csr.indptr)
    flat = row_nnz == 0
    if np.any(offset[flat] != 0.0):
        return False
    pin_rows = SparseMat(g_csr[~flat]) if np.any(flat) else Z.G
    augmented = ConZono(
        Z.G,
        Z.c,
        vcat(Z.A, pin_rows),
        np.concatenate([Z.b, offset[~flat]]),
    )
    return not is_empty(augmented, settings)


def support(Z: ConZono, d, settings: AdmmSettings = AdmmSettings(), reduced: ReducedQp = None) -> float:
    """Support value max_{z in Z} <z, d> computed by the splitting solver.

    A prebuilt zero-cost ReducedQp may be supplied to reuse
    factorizations across directions.
    """
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.shape[0] != Z.dim:
        raise ValueError(f"direction of length {d.shape[0]} does not match set dimension {Z.dim}")
    if reduced is None:
        reduced = reduce_support(Z, settings)
    result = admm_solve(reduced, settings, q_tilde=-Z.G.rmatvec(d))
    if result.status == "infeasible":
        raise EmptySetError("support of an empty set")
    if result.status != "converged":
        raise IndeterminateResultError(
            f"support solve did not converge within {settings.max_iter} iterations"
        )
    return float(d @ result.x_star)


def reduce_support(Z: ConZono, settings: AdmmSettings = AdmmSettings()) -> ReducedQp:
    """Zero-cost reduced problem reusable for many support directions."""
    return ReducedQp(Z, settings.rho, SparseMat.zeros(Z.n_g, Z.n_g), np.zeros(Z.n_g))


def support_batch(Z: ConZono, directions, settings: AdmmSettings = AdmmSettings(),
                  reduced: ReducedQp = None):
    """Support values for a stack of directions (one per column).

    Shares a single factorization across all directions.
    """
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    if D.shape[0] != Z.dim:
        D = D.T
    if D.shape[0] != Z.dim:
        raise ValueError(f"directions of dimension {D.shape} do not match set dimension {Z.dim}")
    if reduced is None:
        reduced = reduce_support(Z, settings)
    q_cols = -Z.G.rmatvec(D)
    results = _iterate_batch(reduced, q_cols, settings)
    values = np.empty(D.shape[1])
    for j, result in enumerate(results):
        if result.status == "infeasible":
            raise EmptySetError("support of an empty set")
        if result.status != "converged":
            raise IndeterminateResultError(
                f"support solve did not converge within {settings.max_iter} iterations"
            )
        values[j] = float(D[:, j] @ result.x_star)
    return values


def bounding_box(Z: ConZono, settings: AdmmSettings = AdmmSettings()) -> IntervalBox:
    """Axis-aligned interval enclosure from 2n support evaluations.

    All 2n solves share one factorization. Raises EmptySetError when an
    emptiness certificate fires.
    """
    n = Z.dim
    directions = np.hstack([np.eye(n), -np.eye(n)])
    values = support_batch(Z, directions, settings)
    upper = values[:n]
    lower = -values[n:]
    return IntervalBox(np.minimum(lower, upper), np.maximum(lower, upper))
