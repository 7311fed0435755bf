"""Hilbert-space elements as finite coefficient vectors over a pre-basis."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .errors import ContractError, StateError
from .matern import MultiIndex, PreBasis, matern_features
from .quadrature import Quadrature

__all__ = [
    "MultiIndex",
    "PreBasisExpansion",
    "evaluate",
    "evaluate_partial",
    "values_on",
    "axpy",
    "sobolev_inner",
    "l2_distance",
    "averaged",
]


class PreBasisExpansion:
    """``h = sum_i coeffs[i] * b_(i+1)`` over the pre-basis ``basis``.

    Instances are immutable: the coefficient array is copied and marked
    read-only. A zero-length expansion is the zero element.
    """

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis: PreBasis, coeffs=()):
        coeffs = np.array(coeffs, dtype=float).reshape(-1)
        if coeffs.size > basis.size and coeffs.size > 0:
            raise ContractError(
                f"expansion of length {coeffs.size} exceeds the {basis.size} generated centers"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("PreBasisExpansion is immutable")

    @classmethod
    def zero(cls, basis: PreBasis) -> "PreBasisExpansion":
        return cls(basis, ())

    @property
    def length(self) -> int:
        return self.coeffs.size

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(max(length, self.length))
        out[: self.length] = self.coeffs
        return out

    def __repr__(self):
        return f"PreBasisExpansion(length={self.length}, basis={self.basis!r})"


def _check_same_basis(x: PreBasisExpansion, y: PreBasisExpansion) -> None:
    if x.basis is not y.basis:
        raise ContractError("expansions reference different pre-bases")


def _points(h: PreBasisExpansion, point) -> np.ndarray:
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != h.basis.dim:
        raise ContractError(f"point dimension {pts.shape[-1]} does not match domain dimension {h.basis.dim}")
    return pts, single


def evaluate_partial(h: PreBasisExpansion, point, idx):
    """Mixed partial ``d^idx h`` at one point ``(d,)`` or a batch ``(n, d)``."""
    pts, single = _points(h, point)
    idx = MultiIndex(idx)
    if len(idx) != h.basis.dim:
        raise ContractError("multi-index length does not match domain dimension")
    if h.length == 0:
        # still validate the order so that errors do not depend on the coefficients
        matern_features(h.basis.params, np.zeros((0, h.basis.dim)), pts[:0], idx)
        out = np.zeros(pts.shape[0])
    else:
        out = matern_features(h.basis.params, h.basis.centers[: h.length], pts, idx) @ h.coeffs
    return float(out[0]) if single else out


def evaluate(h: PreBasisExpansion, point):
    """Value of ``h`` at one point ``(d,)`` or a batch ``(n, d)``."""
    return evaluate_partial(h, point, MultiIndex.zero(h.basis.dim))


def values_on(h: PreBasisExpansion, quad: Quadrature, idx) -> np.ndarray:
    """``d^idx h`` at the nodes of ``quad`` using the pre-basis feature cache."""
    if h.length == 0:
        MultiIndex(idx)
        return np.zeros(quad.size)
    return h.basis.design(quad, idx, h.length) @ h.coeffs


def axpy(alpha: float, x: PreBasisExpansion, y: PreBasisExpansion) -> PreBasisExpansion:
    """``y + alpha * x`` with coefficient vectors padded to the longer length."""
    _check_same_basis(x, y)
    n = max(x.length, y.length)
    return PreBasisExpansion(y.basis, y.padded(n) + alpha * x.padded(n))


def sobolev_inner(x: PreBasisExpansion, y: PreBasisExpansion, order: Optional[int] = None) -> float:
    """``<x, y>`` in H^order through the cached Gram of the shared pre-basis.

    ``order`` must match the Sobolev order the Gram was assembled for.
    """
    _check_same_basis(x, y)
    pb = x.basis
    if order is not None and order != pb.sobolev_order:
        raise ContractError(f"Gram is for H^{pb.sobolev_order}, inner product in H^{order} requested")
    n = max(x.length, y.length)
    if x.length == 0 or y.length == 0:
        return 0.0
    if pb.gram.shape[0] < n:
        raise StateError(f"Gram assembled to {pb.gram.shape[0]}; extend it to {n} before taking inner products")
    a = x.padded(n)
    b = y.padded(n)
    return float(a @ pb.gram[:n, :n] @ b)


def l2_distance(h: PreBasisExpansion, reference: Callable[[np.ndarray], np.ndarray], quad: Quadrature) -> float:
    """QMC estimate of ``||h - reference||_{L2}`` on the nodes of ``quad``."""
    diff = values_on(h, quad, MultiIndex.zero(quad.dim)) - np.asarray(reference(quad.nodes), dtype=float)
    return float(np.sqrt(np.sum(quad.weights * diff * diff)))


def averaged(iterates, weights) -> PreBasisExpansion:
    """Weighted mean ``sum_n a_n h_n / sum_n a_n`` padded to the longest expansion."""
    iterates = list(iterates)
    weights = np.asarray(list(weights), dtype=float)
    if not iterates or len(iterates) != weights.size:
        raise ContractError("need a nonempty history with one weight per iterate")
    basis = iterates[0].basis
    for h in iterates[1:]:
        if h.basis is not basis:
            raise ContractError("iterates reference different pre-bases")
    n = max(h.length for h in iterates)
    total = np.zeros(n)
    for a, h in zip(weights, iterates):
        total += a * h.padded(n)
    return PreBasisExpansion(basis, total / weights.sum())
