"""Matérn kernel translates as a pre-basis of a Sobolev space.

Kernel values use the half-integer closed forms with scaled distance
``s = sqrt(2 nu) r / eta``.  Partial derivatives of ``x -> k(|x - c|)`` are
computed from the radial profile ``psi(u) = k(sqrt(u))``, ``u = |x - c|^2``:

    d^alpha psi(|y|^2) = sum_m psi^(|alpha|-|m|)(u)
                         * prod_j alpha_j! / (m_j! (alpha_j - 2 m_j)!) (2 y_j)^(alpha_j - 2 m_j)

and ``psi^(q)`` again has a closed form because
``(1/r) d/dr [s^mu K_mu(s)] = -a^2 s^(mu-1) K_(mu-1)(s)`` with ``s = a r``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from math import factorial, sqrt
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigurationError, NumericalRankError, StateError, UnsupportedOrderError
from .quadrature import BoxDomain, Quadrature, box_quadrature, roberts_sequence

logger = logging.getLogger(__name__)

__all__ = [
    "MultiIndex",
    "MaternParams",
    "PreBasis",
    "matern_eval",
    "matern_partial",
    "matern_features",
    "sobolev_terms",
    "generate_centers",
    "assemble_gram",
    "cholesky_extend",
    "save_gram",
    "load_gram",
]

SUPPORTED_NU = (0.5, 1.5, 2.5, 3.5)
DEFAULT_GRAM_NODES = 2**14
JITTER_START = 1e-10
JITTER_DOUBLINGS = 20


class MultiIndex(tuple):
    """Per-axis derivative orders, e.g. ``MultiIndex((1, 0))`` for d/dx_0."""

    def __new__(cls, orders: Iterable[int]):
        orders = tuple(int(o) for o in orders)
        if any(o < 0 for o in orders):
            raise ValueError(f"derivative orders must be nonnegative, got {orders}")
        return super().__new__(cls, orders)

    @property
    def total_order(self) -> int:
        return sum(self)

    @classmethod
    def zero(cls, dim: int) -> "MultiIndex":
        return cls((0,) * dim)


@dataclass(frozen=True)
class MaternParams:
    nu: float
    eta: float

    def __post_init__(self):
        if float(self.nu) not in SUPPORTED_NU:
            raise ConfigurationError(f"nu must be one of {SUPPORTED_NU}, got {self.nu}")
        if not self.eta > 0:
            raise ConfigurationError(f"eta must be positive, got {self.eta}")
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def p(self) -> int:
        """``nu - 1/2``; the kernel has classical derivatives up to order ``2p``."""
        return int(self.nu - 0.5)

    @property
    def max_order(self) -> int:
        return 2 * self.p

    @property
    def scale(self) -> float:
        """``a`` in ``s = a r``."""
        return sqrt(2.0 * self.nu) / self.eta


def _poly_coeffs(m: int) -> np.ndarray:
    """Coefficients of ``s**(m-j)`` in ``sum_j (m+j)!/(j!(m-j)!) 2^-j s^(m-j)``, highest power first."""
    return np.array([factorial(m + j) / (factorial(j) * factorial(m - j)) / 2.0**j for j in range(m + 1)])


def _g(m: int, s: np.ndarray) -> np.ndarray:
    # e^{-s} times the Bessel polynomial of K_{m+1/2}, up to sqrt(pi/2)
    return np.polyval(_poly_coeffs(m), s) * np.exp(-s)


def _radial_derivative(params: MaternParams, q: int, r: np.ndarray) -> np.ndarray:
    """``psi^(q)(r**2)`` where ``psi(u) = Matern(sqrt(u))``.

    For ``q > p`` the value is singular at ``r = 0``; it is returned as 0 there
    because every term using it carries a monomial that vanishes at the center.
    """
    p = params.p
    a = params.scale
    norm = 1.0 / _poly_coeffs(p)[-1]  # 1 / g_p(0)
    const = norm * (-(a * a) / 2.0) ** q
    s = a * r
    if q <= p:
        return const * _g(p - q, s)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = const * _g(q - p - 1, sp) / sp ** (2 * (q - p) - 1)
    return out


def matern_eval(params: MaternParams, r) -> np.ndarray:
    """Matérn kernel value at distance ``r`` (scalar or array)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be nonnegative")
    s = params.scale * r
    if params.nu == 0.5:
        poly = np.ones_like(s)
    elif params.nu == 1.5:
        poly = 1.0 + s
    elif params.nu == 2.5:
        poly = 1.0 + s + s * s / 3.0
    else:
        poly = 1.0 + s + 2.0 * s * s / 5.0 + s**3 / 15.0
    out = poly * np.exp(-s)
    return out if out.ndim else float(out)


def _check_order(params: MaternParams, idx) -> MultiIndex:
    idx = MultiIndex(idx)
    if idx.total_order > params.max_order:
        raise UnsupportedOrderError(
            f"derivative of order {idx.total_order} requested but Matern nu={params.nu} "
            f"only supports order <= {params.max_order}"
        )
    return idx


def _partial_from_offsets(params: MaternParams, y: np.ndarray, idx: MultiIndex) -> np.ndarray:
    """Mixed partial of the kernel at offsets ``y = x - center`` with shape ``(..., d)``."""
    y = np.asarray(y, dtype=float)
    r = np.sqrt(np.sum(y * y, axis=-1))
    if idx.total_order == 0:
        return matern_eval(params, r) * np.ones_like(r)
    n = idx.total_order
    psi_cache: Dict[int, np.ndarray] = {}
    out = np.zeros_like(r)
    for m in itertools.product(*(range(a // 2 + 1) for a in idx)):
        q = n - sum(m)
        if q not in psi_cache:
            psi_cache[q] = _radial_derivative(params, q, r)
        term = psi_cache[q]
        coef = 1.0
        for j, (aj, mj) in enumerate(zip(idx, m)):
            e = aj - 2 * mj
            coef *= factorial(aj) / (factorial(mj) * factorial(e)) * 2.0**e
            if e:
                term = term * y[..., j] ** e
        out = out + coef * term
    return out


def matern_partial(params: MaternParams, center, point, idx) -> np.ndarray:
    """Partial derivative ``d^idx`` of ``x -> Matern(center, x)`` evaluated at ``point``.

    ``point`` may be a single point ``(d,)`` or a batch ``(n, d)``.
    """
    idx = _check_order(params, idx)
    center = np.asarray(center, dtype=float)
    point = np.asarray(point, dtype=float)
    if len(idx) != center.shape[-1] or point.shape[-1] != center.shape[-1]:
        raise ValueError("multi-index, center and point dimensions must agree")
    out = _partial_from_offsets(params, point - center, idx)
    return out if np.ndim(out) else float(out)


def matern_features(params: MaternParams, centers: np.ndarray, points: np.ndarray, idx) -> np.ndarray:
    """Matrix ``F[q, i] = d^idx Matern(centers[i], points[q])`` of shape ``(n_points, n_centers)``."""
    idx = _check_order(params, idx)
    offsets = points[:, None, :] - centers[None, :, :]
    return _partial_from_offsets(params, offsets, idx)


def sobolev_terms(dim: int, order: int) -> List[Tuple[MultiIndex, int]]:
    """Multi-indices of the H^order inner product with their multiplicities.

    The j-th derivative is the full ``d**j`` tensor, so a mixed partial
    appears once per ordering of its axes (``d_tx`` twice for d=2, j=2).
    """
    terms: List[Tuple[MultiIndex, int]] = []
    for j in range(order + 1):
        counts: Dict[MultiIndex, int] = {}
        for axes in itertools.product(range(dim), repeat=j):
            alpha = MultiIndex(np.bincount(np.asarray(axes, dtype=int), minlength=dim) if j else [0] * dim)
            counts[alpha] = counts.get(alpha, 0) + 1
        terms.extend(sorted(counts.items(), reverse=True))
    return terms


def generate_centers(domain: BoxDomain, count: int) -> np.ndarray:
    """First ``count`` Roberts points mapped into ``domain`` (prefix-stable)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return domain.map_unit(roberts_sequence(domain.dim, count))


class PreBasis:
    """Kernel translates ``b_i = Matern(x_i, .)`` with their H^l Gram and Cholesky factor.

    Centers, Gram and factor grow lazily; call :meth:`ensure` before using the
    first ``k`` elements. The leading blocks of ``gram`` never change once
    assembled. ``chol_r`` satisfies ``chol_r.T @ chol_r = gram + jitter * I``.

    Parameters
    ----------
    params : MaternParams
    domain : BoxDomain
    sobolev_order : int
        Order ``l`` of the Sobolev inner product used for the Gram matrix.
    quad : Quadrature, optional
        Nodes for the Gram integrals. Defaults to 2**14 Roberts nodes on ``domain``.
    centers : array, optional
        Fixed center list (mostly for tests). When given, the basis cannot
        grow beyond ``len(centers)``.
    """

    def __init__(
        self,
        params: MaternParams,
        domain: BoxDomain,
        sobolev_order: int,
        quad: Optional[Quadrature] = None,
        centers: Optional[np.ndarray] = None,
    ):
        if sobolev_order < 0:
            raise ConfigurationError("sobolev_order must be nonnegative")
        if params.nu + domain.dim / 2.0 < sobolev_order:
            raise ConfigurationError(
                f"nu + d/2 = {params.nu + domain.dim / 2.0} < l = {sobolev_order}: "
                "kernel translates do not span a dense subset of H^l"
            )
        if params.max_order < sobolev_order:
            raise ConfigurationError(
                f"nu={params.nu} has classical derivatives only up to order {params.max_order}, "
                f"the H^{sobolev_order} Gram needs order {sobolev_order}"
            )
        self.params = params
        self.domain = domain
        self.sobolev_order = int(sobolev_order)
        self.quad = quad if quad is not None else box_quadrature(domain, DEFAULT_GRAM_NODES)
        if self.quad.dim != domain.dim:
            raise ConfigurationError("quadrature dimension does not match the domain")
        if centers is not None:
            centers = np.array(centers, dtype=float).reshape(-1, domain.dim)
            if len({tuple(c) for c in centers}) != len(centers):
                raise ConfigurationError("centers must be pairwise distinct")
        self._fixed_centers = centers
        self.centers = np.empty((0, domain.dim))
        self.gram = np.empty((0, 0))
        self.chol_r = np.empty((0, 0))
        self.jitter = 0.0
        self._designs: Dict[int, Tuple[Quadrature, Dict[MultiIndex, np.ndarray]]] = {}

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def size(self) -> int:
        """Number of generated centers."""
        return self.centers.shape[0]

    def __repr__(self):
        return (
            f"PreBasis(nu={self.params.nu}, eta={self.params.eta}, l={self.sobolev_order}, "
            f"centers={self.size}, gram={self.gram.shape[0]}, chol={self.chol_r.shape[0]})"
        )

    def grow_centers(self, count: int) -> None:
        if count <= self.size:
            return
        if self._fixed_centers is not None:
            if count > len(self._fixed_centers):
                raise IndexError(f"only {len(self._fixed_centers)} fixed centers available, {count} requested")
            self.centers = self._fixed_centers[:count].copy()
        else:
            self.centers = generate_centers(self.domain, count)

    def ensure(self, k: int) -> "PreBasis":
        """Generate centers, assemble the Gram and extend the factor up to ``k``."""
        self.grow_centers(k)
        assemble_gram(self, k)
        cholesky_extend(self, k)
        return self

    def chol_factor(self, k: int) -> np.ndarray:
        if k > self.chol_r.shape[0]:
            raise StateError(f"Cholesky factor has size {self.chol_r.shape[0]}; call ensure({k}) first")
        return self.chol_r[:k, :k]

    def design(self, quad: Quadrature, idx, k: int) -> np.ndarray:
        """Cached ``(quad.size, k)`` matrix of ``d^idx b_i`` at the nodes of ``quad``.

        The cache is keyed on the quadrature object and extended column-wise.
        """
        idx = MultiIndex(idx)
        if k > self.size:
            raise StateError(f"only {self.size} centers generated; call ensure({k}) first")
        entry = self._designs.get(id(quad))
        if entry is None or entry[0] is not quad:
            entry = (quad, {})
            self._designs[id(quad)] = entry
        cache = entry[1]
        current = cache.get(idx)
        have = 0 if current is None else current.shape[1]
        if have < k:
            new = matern_features(self.params, self.centers[have:k], quad.nodes, idx)
            current = new if current is None else np.hstack([current, new])
            cache[idx] = current
        return current[:, :k]

    def clear_cache(self) -> None:
        self._designs.clear()


def assemble_gram(pb: PreBasis, k: int, quad: Optional[Quadrature] = None) -> PreBasis:
    """Extend ``pb.gram`` to ``k x k`` with QMC estimates of ``<b_i, b_j>_{H^l}``.

    Only rows/columns beyond the current size are computed.
    """
    if quad is not None and quad is not pb.quad:
        if pb.gram.shape[0] > 0:
            raise StateError("Gram already assembled with a different quadrature")
        pb.quad = quad
        pb.clear_cache()
    if k > pb.size:
        raise IndexError(f"k={k} exceeds the {pb.size} generated centers")
    k0 = pb.gram.shape[0]
    if k <= k0:
        return pb
    w = pb.quad.weights[:, None]
    block = np.zeros((k, k - k0))
    for alpha, mult in sobolev_terms(pb.dim, pb.sobolev_order):
        feats = pb.design(pb.quad, alpha, k)
        block += mult * (feats.T @ (w * feats[:, k0:]))
    gram = np.empty((k, k))
    gram[:k0, :k0] = pb.gram
    gram[:k0, k0:] = block[:k0]
    gram[k0:, :k0] = block[:k0].T
    new = block[k0:]
    gram[k0:, k0:] = (new + new.T) / 2.0
    pb.gram = gram
    return pb


def _extend_factor(gram: np.ndarray, r_old: np.ndarray, k: int, jitter: float) -> np.ndarray:
    k0 = r_old.shape[0]
    r = np.zeros((k, k))
    r[:k0, :k0] = r_old
    for j in range(k0, k):
        col = solve_triangular(r[:j, :j], gram[:j, j], trans="T") if j else np.empty(0)
        pivot = gram[j, j] + jitter - col @ col
        if not pivot > 0:
            raise _PivotFailure(j + 1)
        r[:j, j] = col
        r[j, j] = sqrt(pivot)
    return r


class _PivotFailure(Exception):
    def __init__(self, index):
        self.index = index


def cholesky_extend(pb: PreBasis, k: int) -> PreBasis:
    """Extend the upper-triangular factor ``chol_r`` to size ``k``.

    The jitter starts at ``1e-10 * max diag(gram)``. On a non-positive pivot it
    is doubled and the factorization restarts, at most 20 times.
    """
    if k > pb.gram.shape[0]:
        raise StateError(f"Gram assembled only to {pb.gram.shape[0]}; assemble to {k} first")
    k0 = pb.chol_r.shape[0]
    if k <= k0:
        return pb
    base = JITTER_START * float(np.max(np.diag(pb.gram[:k, :k])))
    r_old = pb.chol_r
    jitter = pb.jitter
    if jitter < base:
        jitter = base
        r_old = np.empty((0, 0))
    for attempt in range(JITTER_DOUBLINGS + 1):
        try:
            r = _extend_factor(pb.gram, r_old, k, jitter)
            break
        except _PivotFailure as fail:
            if attempt == JITTER_DOUBLINGS:
                raise NumericalRankError(
                    f"Cholesky pivot {fail.index} non-positive with jitter {jitter:.3e} "
                    "after the maximum number of doublings; centers are nearly dependent",
                    index=fail.index,
                ) from None
            logger.info("pivot %d failed at jitter %.3e; doubling", fail.index, jitter)
            jitter *= 2.0
            r_old = np.empty((0, 0))
    if jitter != pb.jitter:
        logger.debug("jitter set to %.3e", jitter)
    pb.jitter = jitter
    pb.chol_r = r
    return pb


_HEADER_KEYS = ("nu", "eta", "order", "centers", "nodes", "jitter", "lower", "upper")


def save_gram(pb: PreBasis, path) -> None:
    """Write the assembled Gram to a text file with a validating header."""
    header = {
        "nu": repr(pb.params.nu),
        "eta": repr(pb.params.eta),
        "order": str(pb.sobolev_order),
        "centers": str(pb.gram.shape[0]),
        "nodes": str(pb.quad.size),
        "jitter": repr(pb.jitter),
        "lower": ",".join(repr(v) for v in pb.domain.lower),
        "upper": ",".join(repr(v) for v in pb.domain.upper),
    }
    line = " ".join(f"{key}={header[key]}" for key in _HEADER_KEYS)
    np.savetxt(Path(path), pb.gram, fmt="%.17g", header=f"hsgfd-gram {line}")


def _read_header(path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# hsgfd-gram"):
        raise ConfigurationError(f"{path} is not a Gram cache file")
    return dict(item.split("=", 1) for item in first[len("# hsgfd-gram") :].split())


def load_gram(pb: PreBasis, path) -> PreBasis:
    """Load a cached Gram into ``pb`` after checking the header against its configuration."""
    header = _read_header(path)
    expected = {
        "nu": pb.params.nu,
        "eta": pb.params.eta,
        "order": pb.sobolev_order,
        "nodes": pb.quad.size,
        "lower": pb.domain.lower,
        "upper": pb.domain.upper,
    }
    found = {
        "nu": float(header["nu"]),
        "eta": float(header["eta"]),
        "order": int(header["order"]),
        "nodes": int(header["nodes"]),
        "lower": tuple(float(v) for v in header["lower"].split(",")),
        "upper": tuple(float(v) for v in header["upper"].split(",")),
    }
    mismatched = [key for key in expected if expected[key] != found[key]]
    if mismatched:
        raise ConfigurationError(
            "Gram cache does not match the configuration: "
            + ", ".join(f"{key} (file {found[key]}, live {expected[key]})" for key in mismatched)
        )
    gram = np.atleast_2d(np.loadtxt(path))
    k = int(header["centers"])
    if gram.shape != (k, k):
        raise ConfigurationError(f"Gram cache body has shape {gram.shape}, header says {k}")
    pb.grow_centers(k)
    pb.gram = gram
    pb.chol_r = np.empty((0, 0))
    pb.jitter = float(header["jitter"])
    cholesky_extend(pb, k)
    return pb
