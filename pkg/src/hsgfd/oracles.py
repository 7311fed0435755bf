"""Executable checks of the estimator's probabilistic identities.

Everything here runs on a finite-dimensional surrogate Hilbert space
``(R^D, <x, y> = x^T W y)`` with an explicit non-orthogonal pre-basis, where
the orthonormalized basis ``e_i``, gradients and expectations over the
random dimension are computable exactly. Dimension laws are used through
``min(K, D)`` since the surrogate has only ``D`` pre-basis elements.

Conventions: for a pre-basis coefficient vector ``c`` (length ``k <= D``),
its e-coordinates are ``R[:, :k] @ c`` with ``R`` the Cholesky factor of the
Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .directions import (
    Deterministic,
    DimensionLaw,
    ExplicitTails,
    Geometric,
    PreconditionSchedule,
    ShiftedPoisson,
    Truncated,
    gamma,
    tails_for_target,
)
from .errors import ContractError, NumericalRankError
from .optimizer import gradient_coefficients, optimal_constant_step

__all__ = [
    "SurrogateSpace",
    "QuadraticRisk",
    "galerkin_gradient",
    "gammas",
    "second_moment_formula",
    "weak_second_order_moment",
    "EstimatorStats",
    "mc_estimator_stats",
    "replicate_estimator",
    "truncation_growth",
    "fourth_moment_check",
    "lemma_tail_check",
    "rate_check",
    "cauchy_ratio",
    "tails_bound",
    "CheckResult",
    "verification_suite",
]


def _random_orthogonal(rng: np.random.Generator, D: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((D, D)))
    return q * np.sign(np.diag(r))


class SurrogateSpace:
    """``R^D`` with inner product ``W`` and pre-basis columns ``B``.

    ``B`` has singular values log-spaced in ``[1, sqrt(cond)]`` so its
    condition number is at most ``cond``; ``W`` is random SPD.
    """

    def __init__(self, D: int = 12, seed: int = 0, cond: float = 100.0):
        rng = np.random.default_rng(seed)
        self.D = D
        u = _random_orthogonal(rng, D)
        self.W = u @ np.diag(np.logspace(0.0, 1.0, D)) @ u.T
        self.W = (self.W + self.W.T) / 2.0
        s = np.logspace(0.0, 0.5 * np.log10(cond), D)
        self.B = _random_orthogonal(rng, D) @ np.diag(s) @ _random_orthogonal(rng, D)
        self.gram = self.B.T @ self.W @ self.B
        self.gram = (self.gram + self.gram.T) / 2.0
        self.R = cholesky(self.gram, lower=False)
        self.Q = solve_triangular(self.R, self.B.T, trans="T").T  # Q = B R^{-1}

    @property
    def size(self) -> int:
        return self.D

    def chol_factor(self, k: int) -> np.ndarray:
        if k > self.D:
            raise ContractError(f"surrogate has only {self.D} pre-basis elements")
        return self.R[:k, :k]

    def inner(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(x @ self.W @ y)

    def e_coords_of_vector(self, x: np.ndarray) -> np.ndarray:
        return self.Q.T @ self.W @ x

    def e_coords(self, c: np.ndarray) -> np.ndarray:
        """e-coordinates of the element with pre-basis coefficients ``c`` (columns allowed)."""
        c = np.asarray(c, dtype=float)
        k = c.shape[0]
        return self.R[:, :k] @ c

    def coeffs_from_e(self, y: np.ndarray) -> np.ndarray:
        return solve_triangular(self.R, y)


class QuadraticRisk:
    """``R(x) = 1/2 ||A x - b||^2`` on a surrogate space."""

    def __init__(self, space: SurrogateSpace, A: np.ndarray, b: np.ndarray):
        self.space = space
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self._AB = self.A @ space.B

    @classmethod
    def random(cls, space: SurrogateSpace, seed: int = 1, m: Optional[int] = None) -> "QuadraticRisk":
        rng = np.random.default_rng(seed)
        m = m or space.D
        return cls(space, rng.standard_normal((m, space.D)) / np.sqrt(space.D), rng.standard_normal(m))

    @classmethod
    def diagonal_in_e(cls, space: SurrogateSpace, curvature: np.ndarray, minimizer_e: np.ndarray) -> "QuadraticRisk":
        """Risk ``1/2 sum_i curvature_i (y_i - minimizer_e_i)^2`` in e-coordinates ``y``."""
        root = np.sqrt(np.asarray(curvature, dtype=float))
        # y = Q^T W x and Q^T W Q = I, so Q^{-1} = Q^T W
        A = root[:, None] * (space.Q.T @ space.W)
        return cls(space, A, root * np.asarray(minimizer_e, dtype=float))

    def value_coeffs(self, c: np.ndarray) -> float:
        k = c.shape[0]
        r = self._AB[:, :k] @ c - self.b
        return 0.5 * float(r @ r)

    def directional_derivatives(self, c: np.ndarray, V: np.ndarray) -> np.ndarray:
        """``D R(h; v_m)`` for ``h = B c`` and direction coefficient columns ``V``."""
        k = c.shape[0]
        r = self._AB[:, :k] @ c - self.b
        return r @ self._AB[:, : V.shape[0]] @ V

    def gradient_e(self, c: np.ndarray) -> np.ndarray:
        """e-coordinates of the Riesz gradient at ``h = B c``."""
        k = c.shape[0]
        r = self._AB[:, :k] @ c - self.b
        # <g, e_i> = D R(h; e_i) = r^T A Q e_i
        return (r @ self.A @ self.space.Q).ravel()

    def minimum(self) -> float:
        x, *_ = np.linalg.lstsq(self._AB, self.b, rcond=None)
        return self.value_coeffs(x)


def galerkin_gradient(risk: QuadraticRisk, c: np.ndarray, k: int) -> np.ndarray:
    """Pre-basis coefficients ``a`` of the gradient projected onto ``span{b_1..b_k}``: ``G_k a = d``."""
    space = risk.space
    if k > space.D:
        raise ContractError(f"k={k} exceeds the surrogate dimension {space.D}")
    d = risk.directional_derivatives(c, np.eye(k))
    try:
        factor = cholesky(space.gram[:k, :k], lower=False)
    except np.linalg.LinAlgError as err:
        raise NumericalRankError(f"Gram of the first {k} elements is singular", index=k) from err
    return cho_solve((factor, False), d)


def gammas(law: DimensionLaw, sched: PreconditionSchedule, D: int) -> np.ndarray:
    """``gamma_1..gamma_D``; for a law truncated at ``D`` by one reverse cumulative sum."""
    if isinstance(law, Truncated) and law.D == D:
        if sched.lambda_kind == "unit":
            return np.ones(D)
        idx = np.arange(1, D + 1)
        t = law.tails(idx)
        p = law.pmf(idx)
        # undefined (nan) outside the support, where t_i = 0
        return np.divide(np.cumsum((t * p)[::-1])[::-1], t, out=np.full(D, np.nan), where=t > 0)
    return np.array([gamma(law, sched, i) for i in range(1, D + 1)])


def _truncated(law: DimensionLaw, D: int) -> DimensionLaw:
    return law if isinstance(law, Truncated) and law.D == D else Truncated(law, D)


def second_moment_formula(g_e: np.ndarray, law: DimensionLaw, sched: PreconditionSchedule, D: Optional[int] = None) -> float:
    """Closed form of ``E ||g_hat||_C^2`` for gradient e-coordinates ``g_e``.

    Sums over the law of ``min(K, D)``:

        sum_k p_k [ lam_k^2 / M_k * (sum_{i<=k} 1/(t_i gam_i)) (sum_{i<=k} g_i^2 / t_i)
                    + lam_k^2 (1 + 1/M_k) sum_{i<=k} g_i^2 / (t_i^2 gam_i) ]
    """
    g_e = np.asarray(g_e, dtype=float)
    D = D or g_e.size
    law_d = _truncated(law, D)
    t = law_d.tails(np.arange(1, D + 1))
    n = int(np.count_nonzero(t > 0))  # indices past the support never enter
    idx = np.arange(1, n + 1)
    t = t[:n]
    p = law_d.pmf(idx)
    gam = gammas(law_d, sched, D)[:n]
    g2 = g_e[:n] ** 2
    a = np.cumsum(1.0 / (t * gam))
    s = np.cumsum(g2 / t)
    q = np.cumsum(g2 / (t * t * gam))
    total = 0.0
    for k in idx:
        if p[k - 1] == 0.0:
            continue
        lam = sched.lam(law_d, k)
        M = sched.sample_size(k)
        total += p[k - 1] * lam * lam * (a[k - 1] * s[k - 1] / M + (1.0 + 1.0 / M) * q[k - 1])
    return float(total)


def weak_second_order_moment(h_e: np.ndarray, law: DimensionLaw) -> float:
    """``E <v, h>^2 = E_K sum_{i<=K} h_i^2 / t_i`` for the law of ``min(K, D)``; equals ``||h||^2``."""
    h_e = np.asarray(h_e, dtype=float)
    D = h_e.size
    law_d = _truncated(law, D)
    idx = np.arange(1, D + 1)
    t = law_d.tails(idx)
    p = law_d.pmf(idx)
    return float(np.sum(p * np.cumsum(h_e**2 / t)))


@dataclass
class EstimatorStats:
    mean: np.ndarray
    mean_se: np.ndarray
    expected_mean: np.ndarray
    second_moment: float
    second_moment_se: float
    replications: int
    bound: Optional[float] = None
    divergent: bool = False
    block_means: List[float] = field(default_factory=list)

    def mean_z(self) -> np.ndarray:
        se = np.where(self.mean_se > 0, self.mean_se, np.inf)
        return np.abs(self.mean - self.expected_mean) / se


def _batched_estimates(risk, c_h, law_d, sched, ks: np.ndarray, rng) -> np.ndarray:
    """e-coordinates (rows) of one estimator draw per entry of ``ks``, grouped by ``k``."""
    space = risk.space
    D = space.D
    out = np.zeros((ks.size, D))
    for k in np.unique(ks):
        rows = np.nonzero(ks == k)[0]
        n = rows.size
        M = sched.sample_size(int(k))
        lam = sched.lam(law_d, int(k))
        t = law_d.tails(np.arange(1, k + 1))
        z = rng.standard_normal((n * M, int(k)))
        V = solve_triangular(space.chol_factor(int(k)), (z / np.sqrt(t)).T)  # (k, n*M)
        d = risk.directional_derivatives(c_h, V)  # (n*M,)
        g = (lam / M) * (V * d).reshape(int(k), n, M).sum(axis=2)  # (k, n)
        out[rows] = space.e_coords(g).T
    return out


def mc_estimator_stats(
    risk: QuadraticRisk,
    c_h: np.ndarray,
    law: DimensionLaw,
    sched: PreconditionSchedule,
    replications: int = 100_000,
    seed: int = 0,
    blocks: int = 10,
    bound_c: Optional[float] = None,
) -> EstimatorStats:
    """Monte-Carlo mean (e-coordinates) and C-norm second moment of the estimator.

    ``divergent`` is set when the second moment is non-finite or, if
    ``bound_c`` is given, exceeds ``2 (1 + 2c) ||g||^2`` by more than 3 SE.
    """
    if replications < 1000:
        raise ContractError("need at least 1000 replications")
    space = risk.space
    D = space.D
    law_d = _truncated(law, D)
    rng = np.random.default_rng(seed)
    gam = gammas(law_d, sched, D)
    g_e = risk.gradient_e(c_h)
    per_block = -(-replications // blocks)
    sums = np.zeros(D)
    sq = np.zeros(D)
    norms = []
    done = 0
    block_means = []
    while done < replications:
        n = min(per_block, replications - done)
        ks = law_d.sample_many(rng, n)
        est = _batched_estimates(risk, c_h, law_d, sched, ks, rng)
        sums += est.sum(axis=0)
        sq += (est * est).sum(axis=0)
        c_norm = (est * est / gam).sum(axis=1)
        norms.append(c_norm)
        block_means.append(float(c_norm.mean()))
        done += n
    mean = sums / replications
    var = np.maximum(sq / replications - mean * mean, 0.0) * replications / (replications - 1)
    norms = np.concatenate(norms)
    second = float(norms.mean())
    second_se = float(norms.std(ddof=1) / np.sqrt(replications))
    bound = None
    divergent = not np.isfinite(second)
    if bound_c is not None:
        bound = 2.0 * (1.0 + 2.0 * bound_c) * float(g_e @ g_e)
        divergent = divergent or second - 3.0 * second_se > bound
    return EstimatorStats(
        mean=mean,
        mean_se=np.sqrt(var / replications),
        expected_mean=gam * g_e,
        second_moment=second,
        second_moment_se=second_se,
        replications=replications,
        bound=bound,
        divergent=divergent,
        block_means=block_means,
    )


def replicate_estimator(
    risk: QuadraticRisk,
    c_h: np.ndarray,
    law: DimensionLaw,
    sched: PreconditionSchedule,
    replications: int,
    seed: int = 0,
) -> np.ndarray:
    """e-coordinates of ``replications`` draws from the optimizer's own estimator routine."""
    space = risk.space
    law_d = _truncated(law, space.D)
    rng = np.random.default_rng(seed)
    out = np.empty((replications, space.D))
    for r in range(replications):
        k = law_d.sample(rng)
        coeffs = gradient_coefficients(lambda V: risk.directional_derivatives(c_h, V), space, law_d, sched, k, rng)
        out[r] = space.e_coords(coeffs)
    return out


def truncation_growth(j: int, law: DimensionLaw, sched: PreconditionSchedule, cutoffs=(10**2, 10**3, 10**4, 10**5)):
    """Second moment for ``g = e_j`` in an orthonormal space truncated at growing dimensions.

    Returns the values for each cutoff. A moment that keeps growing by a
    non-vanishing amount per decade signals ``E ||g_hat||_C^2 = +infinity``.
    """
    values = []
    for J in cutoffs:
        g = np.zeros(J)
        g[j - 1] = 1.0
        values.append(_second_moment_large(g, law, sched))
    return np.array(values)


def _second_moment_large(g_e, law, sched):
    # same closed form as second_moment_formula, vectorized over k for large cutoffs
    D = g_e.size
    law_d = _truncated(law, D)
    idx = np.arange(1, D + 1)
    t = law_d.tails(idx)
    p = law_d.pmf(idx)
    gam = gammas(law_d, sched, D)
    lam = np.ones(D) if sched.lambda_kind == "unit" else t
    M = np.array([sched.sample_size(int(k)) for k in idx], dtype=float)
    g2 = g_e**2
    a = np.cumsum(1.0 / (t * gam))
    s = np.cumsum(g2 / t)
    q = np.cumsum(g2 / (t * t * gam))
    return float(np.sum(p * lam * lam * (a * s / M + (1.0 + 1.0 / M) * q)))


def fourth_moment_check(L: np.ndarray, samples: int = 1_000_000, seed: int = 0, chunk: int = 100_000) -> float:
    """Max over entries of ``|mean - (tr(L) I + 2L)| / SE`` for the per-sample matrix ``(z^T L z) z z^T``."""
    L = np.asarray(L, dtype=float)
    if not np.allclose(L, L.T):
        raise ContractError("L must be symmetric")
    k = L.shape[0]
    rng = np.random.default_rng(seed)
    s1 = np.zeros((k, k))
    s2 = np.zeros((k, k))
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        z = rng.standard_normal((n, k))
        quad = np.einsum("ni,ij,nj->n", z, L, z)
        m = quad[:, None, None] * z[:, :, None] * z[:, None, :]
        s1 += m.sum(axis=0)
        s2 += (m * m).sum(axis=0)
        done += n
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    se = np.sqrt(var / samples)
    target = np.trace(L) * np.eye(k) + 2.0 * L
    dev = np.abs(mean - target)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_scores = np.where(se > 0, dev / se, np.where(dev > 0, np.inf, 0.0))
    return float(z_scores.max())


def lemma_tail_check(law: DimensionLaw, i_max: int, tol: float = 1e-12):
    """Check ``t_i / 2 <= gamma_i <= t_i`` (tail preconditioner) for ``i <= i_max``.

    Returns ``(passed, worst_margin)`` where margins are measured relative to
    ``t_i``: ``min(gamma_i/t_i - 1/2, 1 - gamma_i/t_i)``.
    """
    sched = PreconditionSchedule("tail")
    worst = np.inf
    for i in range(1, i_max + 1):
        ratio = gamma(law, sched, i) / law.tail(i)
        worst = min(worst, ratio - 0.5, 1.0 - ratio)
    return worst >= -tol, float(worst)


def cauchy_ratio(theta: np.ndarray, tails: np.ndarray, start: int = 2) -> float:
    """Largest ratio of consecutive increments ``theta_i / t_i`` from index ``start`` on."""
    inc = np.asarray(theta, dtype=float) / np.asarray(tails, dtype=float)
    nz = inc[start - 1 :]
    ratios = nz[1:] / nz[:-1]
    return float(ratios.max())


def tails_bound(theta: np.ndarray) -> float:
    """``A_1 + sum_{k>=2} k 2^{-k+1} = A_1 + 3`` bounding ``sum theta_i / t_i`` for the breakpoint tails."""
    return float(np.sum(theta)) + 3.0


def rate_check(
    Ns=(100, 400, 1600),
    replicates: int = 50,
    D: int = 12,
    seed: int = 0,
    law: Optional[DimensionLaw] = None,
    c: float = 2.0,
    curvature_range=(1e-3, 1e1),
) -> Dict[str, object]:
    """Mean excess risk of the averaged iterate under the fixed-horizon optimal step.

    The surrogate risk is diagonal in e-coordinates with effective
    curvatures ``gamma_i * H_ii`` log-spaced over ``curvature_range``. The
    step uses the exact ``||h* - h_1||_C`` and ``G = ||grad R(h_1)||``.
    Returns the per-N mean excess risks, their standard errors and the
    least-squares log-log slope.
    """

    space = SurrogateSpace(D, seed=seed)
    law_d = _truncated(law or Geometric(0.8), D)
    sched = PreconditionSchedule("tail", "ceil", c)
    gam = gammas(law_d, sched, D)
    mu = np.logspace(np.log10(curvature_range[0]), np.log10(curvature_range[1]), D)
    rng = np.random.default_rng(seed + 1)
    y_star = rng.choice([-1.0, 1.0], D)
    risk = QuadraticRisk.diagonal_in_e(space, mu / gam, y_star)
    dist_c = float(np.sqrt(np.sum(y_star**2 / gam)))
    G = float(np.linalg.norm(risk.gradient_e(np.zeros(0))))
    excess_means, excess_se = [], []
    for N in Ns:
        alpha = optimal_constant_step(dist_c, G, c, N)
        excess = np.empty(replicates)
        for r in range(replicates):
            run_rng = np.random.default_rng([seed, N, r])
            c_h = np.zeros(D)
            avg = np.zeros(D)
            for _ in range(N):
                avg += c_h
                k = law_d.sample(run_rng)
                g = gradient_coefficients(
                    lambda V: risk.directional_derivatives(c_h, V), space, law_d, sched, k, run_rng
                )
                c_h = c_h.copy()
                c_h[:k] -= alpha * g
            excess[r] = risk.value_coeffs(avg / N)
        excess_means.append(excess.mean())
        excess_se.append(excess.std(ddof=1) / np.sqrt(replicates))
    slope = float(np.polyfit(np.log(Ns), np.log(excess_means), 1)[0])
    return {"N": list(Ns), "excess": excess_means, "se": excess_se, "slope": slope, "alpha_N1": optimal_constant_step(dist_c, G, c, Ns[0])}


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    threshold: float
    passed: bool


def verification_suite(seed: int = 0, lambda_kind: str = "tail", replications: int = 100_000) -> List[CheckResult]:
    """All surrogate checks with their statistic, threshold and verdict.

    ``lambda_kind="unit"`` swaps the preconditioner in the variance-bound
    checks, which then fail: a negative control.
    """

    results: List[CheckResult] = []

    def add(name, statistic, threshold, passed):
        results.append(CheckResult(name, float(statistic), float(threshold), bool(passed)))

    space = SurrogateSpace(12, seed=seed)
    risk = QuadraticRisk.random(space, seed=seed + 1)
    c_h = np.random.default_rng(seed + 2).normal(size=space.D) * 0.3
    g_e = risk.gradient_e(c_h)
    laws = {"geometric(0.5)": Geometric(0.5), "shifted_poisson(10)": ShiftedPoisson(10.0)}

    for name, law in laws.items():
        st = mc_estimator_stats(risk, c_h, law, PreconditionSchedule("tail", "ceil", 2.0), replications, seed=seed + 3)
        z = st.mean_z().max()
        add(f"unbiased_mean[{name}]", z, 3.0, z <= 3.0)

    grid_rng = np.random.default_rng(seed + 4)
    # three random points h, hence three random gradients g
    points = [grid_rng.normal(size=space.D) for _ in range(3)]
    for name, law in laws.items():
        for c in (0.5, 1.0, 2.0):
            sched = PreconditionSchedule("tail", "ceil", c)
            for j, c_j in enumerate(points):
                st = mc_estimator_stats(risk, c_j, law, sched, replications, seed=seed + 10 + j)
                f = second_moment_formula(risk.gradient_e(c_j), law, sched)
                z = abs(st.second_moment - f) / st.second_moment_se
                add(f"second_moment[{name},c={c},g={j}]", z, 3.0, z <= 3.0)

    for M in (1, 3, 10):
        sched = PreconditionSchedule("unit", "constant", M=M)
        f = second_moment_formula(g_e, Deterministic(space.D), sched)
        exact = float(g_e @ g_e) * (M + space.D + 1) / M
        add(f"second_moment_deterministic[M={M}]", abs(f - exact) / exact, 1e-10, abs(f - exact) <= 1e-10 * exact)

    for c in (0.5, 1.0, 2.0):
        sched = PreconditionSchedule(lambda_kind, "ceil", c)
        st = mc_estimator_stats(risk, c_h, Geometric(0.5), sched, replications, seed=seed + 20, bound_c=c)
        bound = st.bound
        limit = bound * (1.0 + 3.0 * st.second_moment_se / st.second_moment)
        add(f"variance_bound[{lambda_kind},c={c}]", st.second_moment, limit, st.second_moment <= limit)

    shipped = {
        "shifted_poisson(100)": ShiftedPoisson(100.0),
        "shifted_poisson(10)": ShiftedPoisson(10.0),
        "geometric(0.5)": Geometric(0.5),
        "harmonic": ExplicitTails.harmonic(),
        "near_deterministic": ExplicitTails([1.0, 1e-3, 1e-6, 1e-9]),
    }
    for name, law in shipped.items():
        ok, margin = lemma_tail_check(law, 200)
        add(f"lemma_tail[{name}]", margin, -1e-12, ok)

    L = grid_rng.normal(size=(5, 5))
    L = (L + L.T) / 2.0
    z = fourth_moment_check(L, 1_000_000, seed=seed + 30)
    add("fourth_moment", z, 4.0, z <= 4.0)

    h_e = grid_rng.normal(size=space.D)
    for name, law in laws.items():
        m = weak_second_order_moment(h_e, law)
        rel = abs(m - h_e @ h_e) / (h_e @ h_e)
        add(f"weak_second_order[{name}]", rel, 1e-12, rel <= 1e-12)

    theta = 2.0 ** -np.arange(1, 65)
    law = tails_for_target(theta)
    t = law.tails(np.arange(1, 65))
    total = float(np.sum(theta / t))
    ratio = cauchy_ratio(theta, t)
    add("tails_for_target_ratio", ratio, 1.0, ratio < 1.0)
    add("tails_for_target_bound", total, tails_bound(theta), total <= tails_bound(theta))

    unit = truncation_growth(5, ExplicitTails.harmonic(), PreconditionSchedule("unit", "ceil", 2.0))
    tail_pre = truncation_growth(5, ExplicitTails.harmonic(), PreconditionSchedule("tail", "ceil", 2.0))
    unit_growth = float(np.min(np.diff(unit)))
    tail_growth = float(np.abs(np.diff(tail_pre))[-1] / tail_pre[-1])
    add("unpreconditioned_growth_per_decade", unit_growth, 1.0, unit_growth >= 1.0)
    add("preconditioned_stabilizes", tail_growth, 1e-3, tail_growth <= 1e-3)

    rate = rate_check(seed=seed)
    add("rate_slope", rate["slope"], 0.15, abs(rate["slope"] + 0.5) <= 0.15)
    return results
