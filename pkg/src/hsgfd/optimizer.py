"""Random gradient-free descent over a pre-basis.

Each iteration samples a dimension ``k``, ``M_k`` directions ``v_m`` in the
first ``k`` pre-basis elements and steps along

    g_hat = lambda_k / M_k * sum_m D R(h; v_m) v_m.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .directions import DimensionLaw, PreconditionSchedule, sample_directions
from .errors import ConfigurationError, NumericalRankError
from .function_space import PreBasisExpansion, axpy, averaged, l2_distance
from .matern import PreBasis
from .quadrature import Quadrature

logger = logging.getLogger(__name__)

__all__ = [
    "StepSchedule",
    "GfdConfig",
    "CurveRow",
    "RunRecord",
    "optimal_constant_step",
    "gradient_coefficients",
    "estimate_gradient",
    "averaged_iterate",
    "run",
]

DIVERGENCE_FACTOR = 1e6


def optimal_constant_step(dist_c: float, G: float, c: float, N: int) -> float:
    """Fixed-horizon step ``dist_C / (sqrt(2 (1 + 2c)) G sqrt(N))``."""
    if min(dist_c, G, c, N) <= 0:
        raise ConfigurationError("all inputs to the optimal step must be positive")
    return dist_c / (math.sqrt(2.0 * (1.0 + 2.0 * c)) * G * math.sqrt(N))


@dataclass(frozen=True)
class StepSchedule:
    """Constant step ``alpha`` or the fixed-horizon optimal constant step."""

    kind: str = "constant"
    alpha: float = 0.6
    dist_c: float = 1.0
    G: float = 1.0
    c: float = 2.0
    N: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "fixed_horizon_optimal"):
            raise ConfigurationError(f"unknown step schedule {self.kind!r}")
        if self.kind == "constant" and not self.alpha > 0:
            raise ConfigurationError("step size must be positive")

    @classmethod
    def constant(cls, alpha: float) -> "StepSchedule":
        return cls("constant", alpha=alpha)

    @classmethod
    def fixed_horizon_optimal(cls, dist_c: float, G: float, c: float, N: int) -> "StepSchedule":
        return cls("fixed_horizon_optimal", dist_c=dist_c, G=G, c=c, N=N)

    def __call__(self, n: int) -> float:
        if self.kind == "constant":
            return self.alpha
        return optimal_constant_step(self.dist_c, self.G, self.c, self.N)


@dataclass(frozen=True)
class GfdConfig:
    iterations: int
    step: StepSchedule
    law: DimensionLaw
    sched: PreconditionSchedule
    seed: int = 0
    cadence: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.cadence < 1:
            raise ConfigurationError("cadence must be >= 1")


@dataclass(frozen=True)
class CurveRow:
    """Metrics of iterate ``h_n``.

    ``k``, ``M`` and ``grad_norm`` describe the step taken from ``h_n``; they
    are ``None`` on the final row, which records ``h_(N+1)``.
    """

    n: int
    risk: float
    k: Optional[int]
    M: Optional[int]
    grad_norm: Optional[float]
    l2_error: Optional[float] = None


@dataclass
class RunRecord:
    rows: List[CurveRow]
    final: PreBasisExpansion
    averaged: PreBasisExpansion
    initial_risk: float
    diverged: bool = False
    abort_iteration: Optional[int] = None
    max_k: int = 0


def iteration_rng(seed: int, n: int) -> np.random.Generator:
    """Independent stream for iteration ``n``; all draws of the iteration come from it in order."""
    return np.random.default_rng([int(seed), int(n)])


def gradient_coefficients(
    derivatives: Callable[[np.ndarray], np.ndarray],
    basis,
    law: DimensionLaw,
    sched: PreconditionSchedule,
    k: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Pre-basis coefficients (length ``k``) of ``lambda_k / M_k * sum_m D R(h; v_m) v_m``.

    ``derivatives`` maps a ``(k, M)`` matrix of direction coefficients to the
    ``M`` directional derivatives.
    """
    M = sched.sample_size(k)
    V = sample_directions(basis, law, k, M, rng)
    d = np.asarray(derivatives(V), dtype=float)
    return (sched.lam(law, k) / M) * (V @ d)


def estimate_gradient(risk, h: PreBasisExpansion, pb: PreBasis, law, sched, k: int, rng) -> PreBasisExpansion:
    """Random gradient estimate at ``h`` in the span of ``b_1..b_k``."""
    coeffs = gradient_coefficients(lambda V: risk.directional_derivatives(h, V), pb, law, sched, k, rng)
    return PreBasisExpansion(pb, coeffs)


def averaged_iterate(alphas, iterates) -> PreBasisExpansion:
    """``sum_n alpha_n h_n / sum_n alpha_n``."""
    return averaged(iterates, alphas)


def run(
    risk,
    pb: PreBasis,
    cfg: GfdConfig,
    reference: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    reference_quad: Optional[Quadrature] = None,
    metric: Optional[Callable[[PreBasisExpansion], float]] = None,
) -> RunRecord:
    """Run ``cfg.iterations`` updates from ``h_1 = 0``.

    ``reference`` (with ``reference_quad``, default the risk's interior
    quadrature) adds the L2 distance of each logged iterate. ``metric`` is an
    alternative per-iterate scalar stored in the same column.

    Stops early and sets ``diverged`` when the risk exceeds ``1e6`` times its
    initial value or anything becomes non-finite.

    Results are bitwise reproducible for a given seed and starting state of
    ``pb``. Reusing a pre-basis whose jitter was raised by an earlier run
    changes its factor and hence the directions.
    """
    if cfg.law.finite_support:
        raise ConfigurationError(f"{cfg.law!r} has finite support; the method needs infinite support")
    if reference is not None and reference_quad is None:
        reference_quad = risk.interior

    def distance(h):
        if reference is not None:
            return l2_distance(h, reference, reference_quad)
        if metric is not None:
            return metric(h)
        return None

    N = cfg.iterations
    h = PreBasisExpansion.zero(pb)
    r = risk.value(h)
    initial = r
    rows: List[CurveRow] = []
    weighted_sum = np.zeros(0)
    alpha_total = 0.0
    diverged = False
    abort = None
    max_k = 0

    for n in range(1, N + 1):
        rng = iteration_rng(cfg.seed, n)
        k = cfg.law.sample(rng)
        max_k = max(max_k, k)
        try:
            pb.ensure(k)
        except NumericalRankError as err:
            err.iteration = n
            raise
        M = cfg.sched.sample_size(k)
        g = estimate_gradient(risk, h, pb, cfg.law, cfg.sched, k, rng)
        alpha = cfg.step(n)
        grad_norm = float(np.linalg.norm(g.coeffs))
        if n == 1 or n % cfg.cadence == 0 or n == N:
            rows.append(CurveRow(n, r, k, M, grad_norm, distance(h)))
        if weighted_sum.size < h.length:
            weighted_sum = np.pad(weighted_sum, (0, h.length - weighted_sum.size))
        weighted_sum[: h.length] += alpha * h.coeffs
        alpha_total += alpha

        h = axpy(-alpha, g, h)
        r = risk.value(h)
        if not (np.isfinite(r) and np.all(np.isfinite(h.coeffs))) or r > DIVERGENCE_FACTOR * initial:
            diverged = True
            abort = n + 1
            logger.warning("run diverged at iteration %d (risk %.3e, initial %.3e)", n + 1, r, initial)
            break

    final_distance = None if diverged else distance(h)
    rows.append(CurveRow(abort if diverged else N + 1, r, None, None, None, final_distance))
    return RunRecord(
        rows=rows,
        final=h,
        averaged=PreBasisExpansion(pb, weighted_sum / alpha_total),
        initial_risk=initial,
        diverged=diverged,
        abort_iteration=abort,
        max_k=max_k,
    )
