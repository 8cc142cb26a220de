import numpy as np
import pytest

from conzopt import (
    AdmmSettings,
    ConstraintRankError,
    ConZono,
    EmptySetError,
    IndeterminateResultError,
    IntervalBox,
    QpProblem,
    SparseMat,
    admm_solve,
    affine_map,
    bounding_box,
    check_empty,
    contains_point,
    generalized_intersection,
    infeasibility_check,
    interval_to_zono,
    is_empty,
    make_regular_polygon,
    point_set,
    reduce_qp,
    reduce_support,
    support,
    support_batch,
    zonotope_support,
)
from oracles import (
    box_qp_oracle,
    certificate_is_valid,
    lp_contains,
    lp_is_empty,
    random_conzono,
    random_zonotope,
)


def unit_box(n=2):
    return interval_to_zono(IntervalBox(-np.ones(n), np.ones(n)))


def shifted_box(shift):
    shift = np.asarray(shift, dtype=float)
    return interval_to_zono(IntervalBox(shift - 1.0, shift + 1.0))


def interval_pair(a, b, c, d):
    return generalized_intersection(
        interval_to_zono(IntervalBox([a], [b])),
        interval_to_zono(IntervalBox([c], [d])),
    )


# ---------------------------------------------------------------------------
# reduction


def test_reduce_unit_box_identity_cost():
    Z = unit_box()
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.zeros(2), Z))
    assert np.array_equal(red.p_tilde.toarray(), np.eye(2))
    assert np.array_equal(red.q_tilde, np.zeros(2))
    assert np.array_equal(red.M.toarray(), 2.0 * np.eye(2))


def test_reduce_hexagon_saddle_size():
    hexa = make_regular_polygon(6, 1.0)
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.zeros(2), hexa))
    gtg = hexa.G.toarray().T @ hexa.G.toarray() + np.eye(3)
    assert red.M.shape == (3, 3)
    assert red.M.nnz <= 9
    assert np.allclose(red.M.toarray(), gtg)


def test_reduce_lifted_hexagon_nnz_bound():
    hexa = make_regular_polygon(6, 1.0)
    G_lift = SparseMat(np.hstack([np.eye(2), np.zeros((2, 3))]))
    A_lift = SparseMat(np.hstack([np.eye(2), -hexa.G.toarray()]))
    lifted = ConZono(G_lift, np.zeros(2), A_lift, np.zeros(2))
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.zeros(2), lifted))
    assert red.M.nnz <= 21


def test_reduce_rejects_asymmetric_cost():
    with pytest.raises(ValueError, match="symmetric"):
        QpProblem(SparseMat([[1.0, 1.0], [0.0, 1.0]]), np.zeros(2), unit_box())


def test_reduced_saddle_factor_matches_dense_oracle():
    from oracles import dense_ldlt

    Z = generalized_intersection(unit_box(), shifted_box([0.5, 0.0]))
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.zeros(2), Z))
    M = red.M.toarray()
    L_ref, D_ref = dense_ldlt(M)
    L = red.factor_m.L.toarray()
    assert np.allclose(L, L_ref, atol=1e-12)
    assert np.max(np.abs(L @ np.diag(red.factor_m.D) @ L.T - M)) <= 1e-10 * (1 + np.max(np.abs(M)))


def test_reduce_flags_redundant_constraints():
    # duplicated constraint row violates the full-row-rank assumption
    Z = ConZono(
        SparseMat.eye(2), np.zeros(2),
        SparseMat([[1.0, 0.0], [-1.0, 0.0]]), np.array([1.0, 1.0]),
    )
    with pytest.raises(ConstraintRankError, match="redundant"):
        reduce_qp(QpProblem(SparseMat.eye(2), np.zeros(2), Z))


# ---------------------------------------------------------------------------
# solving


def test_clamped_unconstrained_optimum():
    Z = unit_box()
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.array([-2.0, 0.0]), Z))
    res = admm_solve(red)
    assert res.status == "converged"
    assert np.allclose(res.x_star, [1.0, 0.0], atol=1e-2)


def test_nearest_point_in_shifted_box():
    Z = shifted_box([2.0, 0.0])
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.zeros(2), Z))
    res = admm_solve(red)
    assert np.allclose(res.x_star, [1.0, 0.0], atol=1e-2)


def test_converged_iterate_invariants(rng):
    Z = random_conzono(rng, 3)
    red = reduce_qp(QpProblem(SparseMat.eye(3), rng.normal(size=3), Z))
    settings = AdmmSettings(eps_primal=1e-6, eps_dual=1e-6, max_iter=20000)
    res = admm_solve(red, settings)
    assert res.status == "converged"
    assert np.all(np.abs(res.zeta) <= 1.0)
    feas = Z.A.matvec(res.xi) - Z.b
    assert np.max(np.abs(feas)) <= 1e-6 * (1.0 + np.max(np.abs(Z.b)))
    rp = np.linalg.norm(res.xi - res.zeta)
    assert rp < np.sqrt(Z.n_g) * 1e-6


def test_deterministic_iterates(rng):
    Z = random_conzono(rng, 3)
    prob = QpProblem(SparseMat.eye(3), np.array([0.3, -0.2, 0.1]), Z)
    r1 = admm_solve(reduce_qp(prob))
    r2 = admm_solve(reduce_qp(prob))
    assert np.array_equal(r1.x_star, r2.x_star)
    assert np.array_equal(r1.residuals, r2.residuals)
    assert r1.iterations == r2.iterations


def test_warm_start_resumes():
    Z = unit_box()
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.array([-2.0, 0.0]), Z))
    cold = admm_solve(red)
    warm = admm_solve(red, warm=(cold.xi, cold.zeta, cold.u))
    assert warm.iterations <= cold.iterations
    assert np.allclose(warm.x_star, cold.x_star, atol=1e-6)


def test_iteration_limit_returns_best_iterates():
    Z = unit_box()
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.array([-2.0, 0.0]), Z))
    res = admm_solve(red, AdmmSettings(max_iter=2, eps_primal=1e-12, eps_dual=1e-12))
    assert res.status == "iteration-limit"
    assert res.iterations == 2
    assert res.x_star.shape == (2,)


def test_inf_norm_criterion():
    Z = unit_box()
    red = reduce_qp(QpProblem(SparseMat.eye(2), np.array([-2.0, 0.0]), Z))
    res = admm_solve(red, AdmmSettings(norm="inf"))
    assert res.status == "converged"
    assert np.allclose(res.x_star, [1.0, 0.0], atol=1e-2)


def test_result_json_roundtrip():
    Z = unit_box()
    res = admm_solve(reduce_qp(QpProblem(SparseMat.eye(2), np.zeros(2), Z)))
    doc = res.to_json_dict()
    assert doc["status"] == "converged"
    assert len(doc["x_star"]) == 2
    assert doc["certificate"] is None
    assert len(doc["residual_primal"]) == res.iterations


@pytest.mark.parametrize("seed", range(5))
def test_matches_active_set_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(2, 5))
    n_g = int(rng.integers(2, 7))
    n_c = int(rng.integers(0, 3))
    Z = _feasible_conzono(rng, n, n_g, n_c)
    L = rng.normal(size=(n, n))
    P = SparseMat(L @ L.T + 0.1 * np.eye(n))
    q = rng.normal(size=n)
    red = reduce_qp(QpProblem(P, q, Z))
    settings = AdmmSettings(eps_primal=1e-6, eps_dual=1e-6, max_iter=50000)
    res = admm_solve(red, settings)
    assert res.status == "converged"
    obj = 0.5 * res.xi @ red.p_tilde.matvec(res.xi) + red.q_tilde @ res.xi
    best, xi_best, unique = box_qp_oracle(
        red.p_tilde.toarray(), red.q_tilde, Z.A.toarray(), Z.b)
    assert obj <= best + 1e-4 * (1.0 + abs(best))
    assert obj >= best - 1e-6 * (1.0 + abs(best))
    if unique:
        assert np.max(np.abs(res.zeta - xi_best)) <= 1e-3


def _feasible_conzono(rng, n, n_g, n_c):
    G = rng.normal(size=(n, n_g))
    c = rng.normal(size=n)
    if n_c == 0:
        return ConZono(SparseMat(G), c)
    A = rng.normal(size=(n_c, n_g))
    xi0 = rng.uniform(-0.7, 0.7, size=n_g)
    return ConZono(SparseMat(G), c, SparseMat(A), A @ xi0)


# ---------------------------------------------------------------------------
# infeasibility certificates


def test_certificate_hand_example():
    Z = interval_pair(0.0, 1.0, 2.0, 3.0)
    red = reduce_support(Z)
    xi = np.array([2.0, -2.0])      # satisfies 0.5 xi0 - 0.5 xi1 = 2
    zeta = np.clip(xi, -1.0, 1.0)
    v = infeasibility_check(red, xi, zeta)
    assert v is not None
    # any positive multiple of (0.5, -0.5) separates the affine set from the box
    assert v[0] < 0 or v[0] > 0
    assert np.allclose(v / v[0], [1.0, -1.0])
    assert certificate_is_valid(Z, v)


def test_certificate_absent_on_feasible_iterates():
    Z = interval_pair(0.0, 1.0, 0.5, 2.0)
    red = reduce_support(Z)
    xi = np.array([1.0, -0.5])
    assert infeasibility_check(red, xi, np.clip(xi, -1, 1)) is None


def test_empty_interval_intersection_certified_fast():
    Z = interval_pair(0.0, 1.0, 2.0, 3.0)
    settings = AdmmSettings(k_inf=1)
    res = check_empty(Z, settings)
    assert res.status == "infeasible"
    assert res.iterations <= settings.k_inf
    assert certificate_is_valid(Z, res.certificate)
    assert is_empty(Z, settings)


def test_no_false_certificate_on_feasible_set(rng):
    # zero factor point is feasible; the check must never fire
    Z = _feasible_conzono(rng, 3, 6, 2)
    Z = ConZono(Z.G, Z.c, Z.A, np.zeros(2))
    red = reduce_qp(QpProblem(SparseMat.eye(3), rng.normal(size=3), Z))
    res = admm_solve(red, AdmmSettings(k_inf=1, max_iter=1000,
                                       eps_primal=1e-12, eps_dual=1e-12))
    assert res.status != "infeasible"
    assert not lp_is_empty(Z)


def test_is_empty_basics():
    assert not is_empty(unit_box())
    assert is_empty(interval_pair(0.0, 1.0, 2.0, 3.0), AdmmSettings(k_inf=1))
    assert not is_empty(interval_pair(0.0, 1.0, 0.25, 2.0))


def test_is_empty_point_sets():
    Z = point_set([1.0, 2.0])
    assert not is_empty(Z)
    pinned = ConZono(SparseMat.zeros(1, 0), np.zeros(1),
                     SparseMat.zeros(2, 0), np.array([0.0, 1.0]))
    assert is_empty(pinned)


def test_is_empty_contradictory_rows_raises_rank_error():
    Z = ConZono(
        SparseMat.eye(2), np.zeros(2),
        SparseMat([[1.0, 0.0], [-1.0, 0.0]]), np.array([1.0, 1.0]),
    )
    with pytest.raises(ConstraintRankError):
        is_empty(Z)


def test_is_empty_indeterminate_raises():
    Z = interval_pair(0.0, 1.0, 0.25, 2.0)
    with pytest.raises(IndeterminateResultError):
        is_empty(Z, AdmmSettings(max_iter=1, k_inf=100,
                                 eps_primal=1e-12, eps_dual=1e-12))


def test_random_empty_intersections_certified(rng):
    settings = AdmmSettings(k_inf=1, max_iter=1000)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        c1 = rng.normal(size=n)
        gap = 2.5 + rng.random()
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        Z1 = interval_to_zono(IntervalBox(c1 - 1, c1 + 1))
        Z2 = interval_to_zono(IntervalBox(c1 + gap * direction - 1, c1 + gap * direction + 1))
        Z = generalized_intersection(Z1, Z2)
        assert lp_is_empty(Z)
        res = check_empty(Z, settings)
        assert res.status == "infeasible"
        assert certificate_is_valid(Z, res.certificate)


# ---------------------------------------------------------------------------
# queries


def test_support_examples():
    assert support(unit_box(), [1.0, 1.0]) == pytest.approx(2.0, abs=2e-2)
    hexa = make_regular_polygon(6, 1.0)
    assert support(hexa, [0.0, 1.0]) == pytest.approx(1.0, abs=2e-2)
    Z = interval_pair(0.0, 1.0, 0.25, 2.0)
    assert support(Z, [1.0]) == pytest.approx(1.0, abs=2e-2)


def test_support_of_empty_set_raises():
    with pytest.raises(EmptySetError):
        support(interval_pair(0.0, 1.0, 2.0, 3.0), [1.0], AdmmSettings(k_inf=1))


def test_support_batch_matches_single(rng):
    Z = random_conzono(rng, 2)
    D = rng.normal(size=(2, 6))
    settings = AdmmSettings(eps_primal=1e-6, eps_dual=1e-6, max_iter=50000)
    vals = support_batch(Z, D, settings)
    for j in range(6):
        assert vals[j] == pytest.approx(support(Z, D[:, j], settings), abs=1e-9)


def test_support_matches_zonotope_closed_form(rng):
    Z = random_zonotope(rng, 3, 5)
    settings = AdmmSettings(eps_primal=1e-7, eps_dual=1e-7, max_iter=50000)
    for _ in range(5):
        d = rng.normal(size=3)
        assert support(Z, d, settings) == pytest.approx(zonotope_support(Z, d), abs=1e-4)


def test_bounding_box_round_trips_axis_box():
    Z = shifted_box([0.5, -0.25])
    box = bounding_box(Z)
    assert np.allclose(box.lo, [-0.5, -1.25], atol=2e-2)
    assert np.allclose(box.hi, [1.5, 0.75], atol=2e-2)


def test_bounding_box_hexagon_matches_closed_form():
    hexa = make_regular_polygon(6, 1.0)
    box = bounding_box(hexa, AdmmSettings(eps_primal=1e-6, eps_dual=1e-6, max_iter=20000))
    for i, d in enumerate(np.eye(2)):
        assert box.hi[i] == pytest.approx(zonotope_support(hexa, d), abs=1e-4)
        assert box.lo[i] == pytest.approx(-zonotope_support(hexa, -d), abs=1e-4)


def test_bounding_box_contains_sampled_points(rng):
    Z = random_conzono(rng, 3)
    box = bounding_box(Z, AdmmSettings(eps_primal=1e-6, eps_dual=1e-6, max_iter=50000))
    A, b = Z.A.toarray(), Z.b
    kept = 0
    pinv = np.linalg.pinv(A)
    for _ in range(1000):
        xi = rng.uniform(-1, 1, size=Z.n_g)
        xi = xi - pinv @ (A @ xi - b)  # project onto the constraint rows
        if np.max(np.abs(xi)) > 1.0:
            continue
        kept += 1
        x = Z.point(xi)
        assert np.all(x >= box.lo - 1e-4) and np.all(x <= box.hi + 1e-4)
    assert kept > 100


def test_bounding_box_empty_raises():
    with pytest.raises(EmptySetError):
        bounding_box(interval_pair(0.0, 1.0, 2.0, 3.0), AdmmSettings(k_inf=1))


def test_contains_center_and_outside_point():
    Z = unit_box()
    assert contains_point(Z, [0.0, 0.0])
    assert contains_point(Z, Z.c)
    assert not contains_point(Z, [2.0, 0.0])


def test_contains_point_matches_lp_oracle(rng):
    Z = random_conzono(rng, 2)
    settings = AdmmSettings(max_iter=20000)
    for _ in range(50):
        x = Z.c + rng.normal(size=2) * 1.5
        assert contains_point(Z, x, settings) == lp_contains(Z, x)


def test_contains_point_dimension_error():
    with pytest.raises(ValueError):
        contains_point(unit_box(), [1.0])


def test_contains_point_flat_set():
    # zero-width coordinate: decided exactly, no rank failure
    flat = interval_to_zono(IntervalBox([0.0, 3.0], [2.0, 3.0]))
    assert contains_point(flat, [1.0, 3.0])
    assert not contains_point(flat, [1.0, 3.0 + 1e-9])
    assert not contains_point(flat, [3.0, 3.0])
    assert contains_point(point_set([1.0, 2.0]), [1.0, 2.0])
    assert not contains_point(point_set([1.0, 2.0]), [1.0, 2.5])
