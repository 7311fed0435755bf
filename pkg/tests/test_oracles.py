import numpy as np
import pytest

from hsgfd.directions import (
    Deterministic,
    ExplicitTails,
    Geometric,
    PreconditionSchedule,
    ShiftedPoisson,
    Truncated,
    tails_for_target,
)
from hsgfd.errors import ContractError
from hsgfd.oracles import (
    QuadraticRisk,
    SurrogateSpace,
    cauchy_ratio,
    fourth_moment_check,
    galerkin_gradient,
    gammas,
    lemma_tail_check,
    mc_estimator_stats,
    replicate_estimator,
    second_moment_formula,
    tails_bound,
    truncation_growth,
    weak_second_order_moment,
)


@pytest.fixture(scope="module")
def space():
    return SurrogateSpace(D=12, seed=0)


@pytest.fixture(scope="module")
def risk(space):
    return QuadraticRisk.random(space, seed=1)


def gauss_solve(A, b):
    # plain Gaussian elimination with partial pivoting, independent of LAPACK
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        A[[col, piv]] = A[[piv, col]]
        b[[col, piv]] = b[[piv, col]]
        for row in range(col + 1, n):
            f = A[row, col] / A[col, col]
            A[row, col:] -= f * A[col, col:]
            b[row] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - A[row, row + 1 :] @ x[row + 1 :]) / A[row, row]
    return x


def test_surrogate_invariants(space):
    np.testing.assert_allclose(space.Q.T @ space.W @ space.Q, np.eye(space.D), atol=1e-10)
    np.testing.assert_allclose(space.R.T @ space.R, space.gram, atol=1e-10)
    assert np.linalg.cond(space.B) <= 100
    assert np.all(np.linalg.eigvalsh(space.W) > 0)


def test_e_coordinates_roundtrip(space, rng):
    c = rng.normal(size=space.D)
    y = space.e_coords(c)
    np.testing.assert_allclose(y, space.e_coords_of_vector(space.B @ c), atol=1e-10)
    np.testing.assert_allclose(space.coeffs_from_e(y), c, atol=1e-10)
    np.testing.assert_allclose(y @ y, space.inner(space.B @ c, space.B @ c), rtol=1e-10)


def test_galerkin_orthonormal_prebasis():
    space = SurrogateSpace(D=5, seed=2)
    # make the pre-basis W-orthonormal: B = Q
    space.B = space.Q.copy()
    space.gram = space.B.T @ space.W @ space.B
    space.R = np.linalg.cholesky(space.gram).T
    # R(h) = 1/2 ||h - b_1||_W^2 written as 1/2 |A h - b| with A = W^{1/2}
    w_half = np.linalg.cholesky(space.W).T
    r = QuadraticRisk(space, w_half, w_half @ space.B[:, 0])
    c = np.array([0.3, -1.0, 2.0, 0.0, 0.5])
    np.testing.assert_allclose(galerkin_gradient(r, c, 5), c - np.eye(5)[0], atol=1e-10)


def test_galerkin_full_dimension_is_gradient(space, risk, rng):
    c = rng.normal(size=space.D)
    a = galerkin_gradient(risk, c, space.D)
    np.testing.assert_allclose(space.e_coords(a), risk.gradient_e(c), atol=1e-10)


def test_galerkin_small_instance_against_elimination():
    space = SurrogateSpace(D=4, seed=3)
    r = QuadraticRisk.random(space, seed=4)
    c = np.array([0.1, 0.2, -0.3, 0.4])
    d = r.directional_derivatives(c, np.eye(4))
    np.testing.assert_allclose(galerkin_gradient(r, c, 4), gauss_solve(space.gram, d), atol=1e-10)


def test_galerkin_is_projection(space, risk, rng):
    c = rng.normal(size=space.D)
    k = 5
    a = galerkin_gradient(risk, c, k)
    full = space.B @ space.coeffs_from_e(risk.gradient_e(c))
    resid = full - space.B[:, :k] @ a
    np.testing.assert_allclose(space.B[:, :k].T @ space.W @ resid, 0.0, atol=1e-10)
    with pytest.raises(ContractError):
        galerkin_gradient(risk, c, space.D + 1)


@pytest.mark.parametrize("M", [1, 3, 10])
@pytest.mark.parametrize("k", [4, 12])
def test_second_moment_deterministic_reduction(M, k, rng):
    g = rng.normal(size=12)
    sched = PreconditionSchedule("unit", "constant", M=M)
    got = second_moment_formula(g, Deterministic(k), sched, D=12)
    expected = np.sum(g[:k] ** 2) * (1 + (k + 1) / M)
    assert abs(got - expected) <= 1e-10 * expected


def test_second_moment_zero_gradient():
    assert second_moment_formula(np.zeros(12), Geometric(0.5), PreconditionSchedule()) == 0.0


def test_second_moment_monotone_in_sample_size(rng):
    g = rng.normal(size=12)
    vals = [
        second_moment_formula(g, Geometric(0.5), PreconditionSchedule("tail", "constant", M=M)) for M in range(1, 8)
    ]
    assert np.all(np.diff(vals) <= 1e-12)


def test_second_moment_matches_simulation(space, risk):
    c_h = np.random.default_rng(8).normal(size=space.D)
    law = Geometric(0.5)
    sched = PreconditionSchedule("tail", "ceil", 1.0)
    st = mc_estimator_stats(risk, c_h, law, sched, 100_000, seed=9)
    formula = second_moment_formula(risk.gradient_e(c_h), law, sched)
    assert abs(st.second_moment - formula) <= 3 * st.second_moment_se


def test_estimator_mean_matches_c_times_gradient(space, risk):
    c_h = np.random.default_rng(10).normal(size=space.D)
    st = mc_estimator_stats(risk, c_h, ShiftedPoisson(10.0), PreconditionSchedule(), 100_000, seed=11)
    assert np.all(st.mean_z() <= 4.0)


def test_optimizer_estimator_agrees_with_batched(space, risk):
    # the optimizer's own routine, replicated, has the same mean C g
    c_h = np.random.default_rng(12).normal(size=space.D)
    law = Geometric(0.5)
    sched = PreconditionSchedule()
    draws = replicate_estimator(risk, c_h, law, sched, 20_000, seed=13)
    expected = gammas(Truncated(law, space.D), sched, space.D) * risk.gradient_e(c_h)
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - expected) <= 4 * se)


def test_variance_bound_tail(space, risk):
    c_h = np.random.default_rng(14).normal(size=space.D)
    st = mc_estimator_stats(risk, c_h, Geometric(0.5), PreconditionSchedule("tail", "ceil", 2.0), 20_000, seed=15,
                            bound_c=2.0)
    assert not st.divergent
    assert st.second_moment <= st.bound * (1 + 3 * st.second_moment_se / st.second_moment)


def test_unit_lambda_heavy_tail_flagged(space):
    # g = e_j for a large j under t_i = 1/i and lambda = 1
    j = space.D
    minimizer = np.zeros(space.D)
    minimizer[j - 1] = -1.0
    r = QuadraticRisk.diagonal_in_e(space, np.ones(space.D), minimizer)
    c_h = np.zeros(space.D)
    st = mc_estimator_stats(r, c_h, ExplicitTails.harmonic(), PreconditionSchedule("unit"), 20_000, seed=16,
                            bound_c=2.0)
    assert st.divergent
    growth = truncation_growth(5, ExplicitTails.harmonic(), PreconditionSchedule("unit"))
    assert np.all(np.diff(growth) > 1.0)
    stable = truncation_growth(5, ExplicitTails.harmonic(), PreconditionSchedule("tail"))
    assert abs(stable[-1] - stable[-2]) < 1e-3 * stable[-1]


def test_diagonal_risk_in_e(space, rng):
    curv = rng.uniform(0.5, 2, size=space.D)
    m = rng.normal(size=space.D)
    r = QuadraticRisk.diagonal_in_e(space, curv, m)
    c = rng.normal(size=space.D)
    y = space.e_coords(c)
    np.testing.assert_allclose(r.value_coeffs(c), 0.5 * np.sum(curv * (y - m) ** 2), rtol=1e-10)
    np.testing.assert_allclose(r.gradient_e(c), curv * (y - m), rtol=1e-9, atol=1e-12)


def test_fourth_moment_examples():
    assert fourth_moment_check(np.zeros((3, 3)), samples=1000) == 0.0
    assert fourth_moment_check(np.array([[1.0]]), samples=200_000, seed=1) <= 4.0
    L = np.random.default_rng(2).normal(size=(5, 5))
    assert fourth_moment_check(L + L.T, samples=200_000, seed=3) <= 4.0
    with pytest.raises(ContractError):
        fourth_moment_check(np.array([[1.0, 2.0], [0.0, 1.0]]), samples=10)


@pytest.mark.parametrize(
    "law",
    [Geometric(0.5), ShiftedPoisson(100.0), ExplicitTails([1.0] + [1e-3**j for j in range(1, 8)], continuation="harmonic")],
    ids=repr,
)
def test_lemma_tail_check(law):
    ok, margin = lemma_tail_check(law, 200)
    assert ok and margin >= 0


def test_lemma_geometric_margin():
    _, margin = lemma_tail_check(Geometric(0.5), 50)
    np.testing.assert_allclose(margin, 1 / 6, rtol=1e-12)


def test_weak_second_order_identity(rng):
    h = rng.normal(size=12)
    for law in (Geometric(0.5), ShiftedPoisson(10.0), ExplicitTails.harmonic()):
        np.testing.assert_allclose(weak_second_order_moment(h, law), h @ h, rtol=1e-12)


def test_tails_for_target_bound():
    theta = 2.0 ** -np.arange(1, 65)
    t = tails_for_target(theta).tails(np.arange(1, 65))
    assert np.sum(theta / t) <= tails_bound(theta)
    assert cauchy_ratio(theta, t) < 1.0
    assert tails_bound(theta) <= 2 * 3.0 + theta[0] + theta.sum()
