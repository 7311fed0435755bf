"""Random dimension laws, preconditioner schedules and random search directions.

A direction in the first ``k`` pre-basis elements is

    v = B_k R_k^{-1} T_k^{-1/2} z,   z ~ N(0, I_k),  T_k = diag(t_1..t_k),

where ``R_k`` is the upper Cholesky factor of the Gram matrix and
``t_i = P[K >= i]`` are the tails of the dimension law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.linalg import solve_triangular

from .errors import ConfigurationError, DomainError
from .function_space import PreBasisExpansion

__all__ = [
    "DimensionLaw",
    "ShiftedPoisson",
    "Geometric",
    "Deterministic",
    "ExplicitTails",
    "Truncated",
    "PreconditionSchedule",
    "sample_dimension",
    "tail",
    "gamma",
    "sample_direction",
    "sample_directions",
    "sample_sizes",
    "tails_for_target",
    "law_from_name",
]

# relative accuracy of truncated tail series
SERIES_TOL = 1e-16
_CHUNK = 512


class DimensionLaw:
    """Distribution of the random dimension ``K`` on the positive integers."""

    kind = "abstract"
    finite_support = False

    def tails(self, i) -> np.ndarray:
        """``t_i = P[K >= i]`` for an array of indices ``i >= 1``."""
        raise NotImplementedError

    def tail(self, i: int) -> float:
        if i < 1:
            raise ValueError("tail index must be >= 1")
        return float(self.tails(np.array([i]))[0])

    def pmf(self, i) -> np.ndarray:
        i = np.asarray(i)
        return self.tails(i) - self.tails(i + 1)

    def sample(self, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.array([self.sample(rng) for _ in range(size)], dtype=np.int64)

    def support_end(self, mass: float = 1e-12) -> int:
        """Smallest ``J`` with ``P[K > J] <= mass``."""
        j = 1
        while True:
            idx = np.arange(j, j + _CHUNK)
            t = self.tails(idx + 1)
            hit = np.nonzero(t <= mass)[0]
            if hit.size:
                return int(idx[hit[0]])
            j += _CHUNK
            if j > 10**8:
                raise DomainError(f"{self!r} has too heavy a tail to truncate at mass {mass}")

    def log_tails(self, i) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.tails(i))

    def conditional_tail_mean(self, i: int) -> float:
        """``E[t_K | K >= i] = sum_{j >= i} (t_j / t_i) p_j``.

        Tail ratios are formed in log space so tiny tails do not underflow.
        The series is cut once ``t_J**2 / t_i``, an upper bound of the
        remainder, drops below ``SERIES_TOL`` times the running sum.
        """
        log_ti = float(self.log_tails(np.array([i]))[0])
        if log_ti == -np.inf:
            raise DomainError(f"P[K >= {i}] = 0 for {self!r}")
        total = 0.0
        j = i
        while True:
            idx = np.arange(j, j + _CHUNK)
            log_t = self.log_tails(idx)
            log_next = self.log_tails(idx + 1)
            with np.errstate(invalid="ignore"):
                ratio = np.exp(log_t - log_ti)
                # p_j = t_j (1 - t_(j+1)/t_j)
                terms = ratio * np.exp(log_t) * -np.expm1(log_next - log_t)
            terms = np.where(log_t == -np.inf, 0.0, terms)
            partial = total + np.cumsum(terms)
            bound = np.exp(2.0 * log_next - log_ti)
            done = np.nonzero((bound <= SERIES_TOL * partial) | (log_next == -np.inf))[0]
            if done.size:
                # fixed-order summation so results are reproducible
                return float(total + np.sum(terms[: done[0] + 1]))
            total += float(np.sum(terms))
            j += _CHUNK


class ShiftedPoisson(DimensionLaw):
    """``K = 1 + Poisson(rate)``."""

    kind = "shifted_poisson"

    def __init__(self, rate: float):
        if not rate > 0:
            raise ConfigurationError("Poisson rate must be positive")
        self.rate = float(rate)

    def __repr__(self):
        return f"ShiftedPoisson(rate={self.rate})"

    def tails(self, i):
        i = np.asarray(i)
        # P[1 + X >= i] = P[X > i - 2]
        return stats.poisson.sf(i - 2, self.rate)

    def log_tails(self, i):
        return stats.poisson.logsf(np.asarray(i) - 2, self.rate)

    def pmf(self, i):
        return stats.poisson.pmf(np.asarray(i) - 1, self.rate)

    def sample(self, rng):
        return 1 + int(rng.poisson(self.rate))

    def sample_many(self, rng, size):
        return 1 + rng.poisson(self.rate, size=size).astype(np.int64)


class Geometric(DimensionLaw):
    """``P[K >= i] = q**(i-1)``."""

    kind = "geometric"

    def __init__(self, q: float):
        if not 0 < q < 1:
            raise ConfigurationError("geometric parameter q must lie in (0, 1)")
        self.q = float(q)

    def __repr__(self):
        return f"Geometric(q={self.q})"

    def tails(self, i):
        return self.q ** (np.asarray(i, dtype=float) - 1.0)

    def conditional_tail_mean(self, i):
        return self.q ** (i - 1.0) / (1.0 + self.q)

    def sample(self, rng):
        return int(rng.geometric(1.0 - self.q))

    def sample_many(self, rng, size):
        return rng.geometric(1.0 - self.q, size=size).astype(np.int64)


class Deterministic(DimensionLaw):
    """``K = k0`` almost surely. Finite support: for tests only."""

    kind = "deterministic"
    finite_support = True

    def __init__(self, k0: int):
        if k0 < 1:
            raise ConfigurationError("k0 must be >= 1")
        self.k0 = int(k0)

    def __repr__(self):
        return f"Deterministic(k0={self.k0})"

    def tails(self, i):
        return np.where(np.asarray(i) <= self.k0, 1.0, 0.0)

    def sample(self, rng):
        return self.k0

    def sample_many(self, rng, size):
        return np.full(size, self.k0, dtype=np.int64)


class ExplicitTails(DimensionLaw):
    """Law given by its first tails ``t_1 = 1 >= t_2 >= ... >= t_L > 0``.

    With ``continuation="harmonic"`` the tails continue as
    ``t_(L+j) = 1 / (1/t_L + j)``, keeping infinite support; with ``None`` the
    law stops at ``L``.
    """

    kind = "explicit_tails"

    def __init__(self, tails: Sequence[float], continuation: Optional[str] = "harmonic"):
        t = np.asarray(tails, dtype=float).reshape(-1)
        if t.size == 0 or t[0] != 1.0:
            raise ConfigurationError("explicit tails must start with t_1 = 1")
        if np.any(np.diff(t) > 0) or np.any(t <= 0):
            raise ConfigurationError("explicit tails must be positive and non-increasing")
        if continuation not in ("harmonic", None):
            raise ConfigurationError(f"unknown continuation {continuation!r}")
        t.setflags(write=False)
        self.explicit = t
        self.continuation = continuation
        self.finite_support = continuation is None

    @classmethod
    def harmonic(cls) -> "ExplicitTails":
        """``t_i = 1/i``: the heavy-tailed law used in divergence checks."""
        return cls([1.0])

    def __repr__(self):
        return f"ExplicitTails(L={self.explicit.size}, continuation={self.continuation!r})"

    def tails(self, i):
        i = np.asarray(i)
        L = self.explicit.size
        inside = np.clip(i, 1, L) - 1
        beyond = np.maximum(i - L, 0).astype(float)
        if self.continuation == "harmonic":
            cont = 1.0 / (1.0 / self.explicit[-1] + beyond)
        else:
            cont = np.zeros_like(beyond)
        return np.where(i <= L, self.explicit[inside], cont)

    def conditional_tail_mean(self, i):
        t_i = self.tail(i)
        L = self.explicit.size
        total = 0.0
        if i <= L:
            idx = np.arange(i, L + 1)
            t = self.tails(idx)
            total = float(np.sum(t * (t - self.tails(idx + 1))))
        if self.continuation == "harmonic":
            # index L + j has t = 1/x and p = 1/(x (x+1)) with x = 1/t_L + j
            total += _harmonic_tail_moment(1.0 / self.explicit[-1] + max(i - L, 1))
        return total / t_i

    def sample(self, rng):
        return self._invert(rng.random())

    def sample_many(self, rng, size):
        return np.array([self._invert(u) for u in rng.random(size)], dtype=np.int64)

    def _invert(self, u: float) -> int:
        # K = max{i : t_i > u}, which has P[K >= i] = t_i
        L = self.explicit.size
        count = int(np.sum(self.explicit > u))
        if count < L or self.continuation is None:
            return max(count, 1)
        extra = math.ceil(1.0 / u - 1.0 / self.explicit[-1]) - 1 if u > 0 else 10**9
        return L + max(extra, 0)


def _harmonic_tail_moment(x0: float) -> float:
    """``sum_{n >= 0} 1 / (x^2 (x + 1))`` over ``x = x0 + n``.

    Equals ``trigamma(x0) - 1/x0``, which cancels badly for large ``x0``:
    sum the head directly and use the asymptotic expansion past 1e4.
    """
    n_head = max(0, int(math.ceil(1e4 - x0)))
    x = x0 + np.arange(n_head, dtype=float)
    head = float(np.sum(1.0 / (x * x * (x + 1.0))))
    y = x0 + n_head
    tail_sum = 1 / (2 * y**2) + 1 / (6 * y**3) - 1 / (30 * y**5) + 1 / (42 * y**7) - 1 / (30 * y**9)
    return head + tail_sum


class Truncated(DimensionLaw):
    """Law of ``min(K, D)`` for a base law of ``K``."""

    kind = "truncated"
    finite_support = True

    def __init__(self, base: DimensionLaw, D: int):
        self.base = base
        self.D = int(D)

    def __repr__(self):
        return f"Truncated({self.base!r}, D={self.D})"

    def tails(self, i):
        i = np.asarray(i)
        return np.where(i <= self.D, self.base.tails(np.minimum(i, self.D)), 0.0)

    def sample(self, rng):
        return min(self.base.sample(rng), self.D)

    def sample_many(self, rng, size):
        return np.minimum(self.base.sample_many(rng, size), self.D)


@dataclass(frozen=True)
class PreconditionSchedule:
    """``lambda_k`` (``"tail"``: ``t_k``; ``"unit"``: 1) and sample sizes ``M_k``.

    ``sample_size_kind`` is ``"ceil"`` for ``M_k = ceil(k / c)`` or
    ``"constant"`` for ``M_k = M``.
    """

    lambda_kind: str = "tail"
    sample_size_kind: str = "ceil"
    c: float = 2.0
    M: int = 1

    def __post_init__(self):
        if self.lambda_kind not in ("tail", "unit"):
            raise ConfigurationError(f"lambda kind must be 'tail' or 'unit', got {self.lambda_kind!r}")
        if self.sample_size_kind not in ("ceil", "constant"):
            raise ConfigurationError(f"sample size kind must be 'ceil' or 'constant', got {self.sample_size_kind!r}")
        if not self.c > 0 or self.M < 1:
            raise ConfigurationError("need c > 0 and M >= 1")

    def lam(self, law: DimensionLaw, k: int) -> float:
        return law.tail(k) if self.lambda_kind == "tail" else 1.0

    def sample_size(self, k: int) -> int:
        if self.sample_size_kind == "constant":
            return int(self.M)
        # guard against k/c landing a hair above an integer
        return max(1, math.ceil(round(k / self.c, 12)))


def sample_dimension(law: DimensionLaw, rng: np.random.Generator) -> int:
    return law.sample(rng)


def tail(law: DimensionLaw, i: int) -> float:
    return law.tail(i)


def sample_sizes(sched: PreconditionSchedule, k: int) -> int:
    if k < 1:
        raise ValueError("k must be >= 1")
    return sched.sample_size(k)


def gamma(law: DimensionLaw, sched: PreconditionSchedule, i: int) -> float:
    """``gamma_i = E[lambda_K | K >= i]``.

    Raises :class:`DomainError` when ``i`` is outside the support of ``law``
    (``t_i = 0``), where the conditional expectation is undefined.
    """
    t_i = law.tail(i)
    if t_i <= 0.0:
        raise DomainError(f"gamma_{i} undefined: P[K >= {i}] = 0 for {law!r}")
    if sched.lambda_kind == "unit":
        return 1.0
    return law.conditional_tail_mean(i)


def sample_directions(basis, law: DimensionLaw, k: int, M: int, rng: np.random.Generator) -> np.ndarray:
    """``(k, M)`` coefficient matrix whose columns are independent directions.

    ``basis`` is anything with ``chol_factor(k)`` (a :class:`PreBasis` or a
    surrogate space). Column ``m`` uses the ``m``-th block of normals drawn
    from ``rng``.
    """
    r = basis.chol_factor(k)
    t = law.tails(np.arange(1, k + 1))
    z = rng.standard_normal((M, k)).T
    return solve_triangular(r, z / np.sqrt(t)[:, None], lower=False)


def sample_direction(pb, law: DimensionLaw, k: int, rng: np.random.Generator) -> PreBasisExpansion:
    """One direction ``v = B_k R_k^{-1} T_k^{-1/2} z`` as an expansion of length ``k``."""
    return PreBasisExpansion(pb, sample_directions(pb, law, k, 1, rng)[:, 0])


def tails_for_target(theta: Sequence[float]) -> ExplicitTails:
    """Tails making ``sum_i theta_i / t_i`` finite for a summable ``theta >= 0``.

    With ``A_i = sum_{j >= i} theta_j``, breakpoints ``n_0 = 1`` and
    ``n_k`` = smallest index ``>= max(n_(k-1) + 1, 2)`` with ``A_(n_k) <= 2^-k``;
    ``t_i = 1/k`` on ``[n_(k-1), n_k)``. Past the support of ``theta`` the
    breakpoints advance by one, so the tails continue harmonically.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if np.any(theta < 0):
        raise ConfigurationError("theta must be nonnegative")
    L = theta.size
    if L == 0:
        return ExplicitTails.harmonic()
    # A[i - 1] = A_i for i = 1..L+1
    A = np.concatenate([np.cumsum(theta[::-1])[::-1], [0.0]])
    tails = []
    n_prev = 1
    k = 1
    while n_prev <= L:
        n = max(n_prev + 1, 2)
        while n <= L and A[n - 1] > 2.0**-k:
            n += 1
        tails.extend([1.0 / k] * (n - n_prev))
        n_prev = n
        k += 1
    return ExplicitTails(tails, continuation="harmonic")


def law_from_name(kind: str, param) -> DimensionLaw:
    """Build a law from a ``(kind, parameter)`` pair as used in config files."""
    if kind == "shifted_poisson":
        return ShiftedPoisson(float(param))
    if kind == "geometric":
        return Geometric(float(param))
    if kind == "deterministic":
        return Deterministic(int(param))
    if kind == "harmonic":
        return ExplicitTails.harmonic()
    raise ConfigurationError(f"unknown law kind {kind!r}")
