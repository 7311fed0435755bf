"""Least-squares residual risks for the heat and HJB problems.

Both risks have the form

    R(h) = 1/2 * int_Omega F[h]^2 + 1/2 * int_Lambda (h - target)^2

estimated with QMC. Directional derivatives lift the nodal values of ``h``
and its partials to dual numbers whose tangent parts come from the
directions, and read the tangent of the accumulated quadrature sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi, sqrt
from typing import Dict, Optional, Sequence

import numpy as np

from . import dual
from .dual import Dual
from .errors import ConfigurationError, ContractError
from .function_space import PreBasisExpansion, evaluate_partial, values_on
from .matern import MultiIndex, PreBasis
from .quadrature import (
    BoundaryComponent,
    BoxDomain,
    Quadrature,
    boundary_quadrature,
    box_quadrature,
)

__all__ = [
    "ResidualRisk",
    "HeatRisk",
    "HjbParams",
    "HjbRisk",
    "htilde",
    "optimal_control",
    "heat_exact",
    "HEAT_EXACT_L2_NORM",
]

DEFAULT_INTERIOR_NODES = 2**14
DEFAULT_BOUNDARY_NODES = 2**11

# ||e^{-t} sin x||_{L2((0,1) x (0, 2 pi))}
HEAT_EXACT_L2_NORM = sqrt(pi * (1.0 - np.exp(-2.0)) / 2.0)


class ResidualRisk:
    """Base class; subclasses define ``derivatives``, ``residual`` and ``boundary_target``.

    ``interior`` and ``boundary`` are quadratures; ``boundary.labels`` says
    which boundary component each node belongs to.
    """

    sobolev_order: int
    derivatives: Sequence[MultiIndex]

    def __init__(self, domain: BoxDomain, interior: Quadrature, boundary: Quadrature):
        self.domain = domain
        self.interior = interior
        self.boundary = boundary
        self._target = np.asarray(self.boundary_target(boundary.nodes, boundary.labels), dtype=float)
        self._target.setflags(write=False)

    def residual(self, nodes: np.ndarray, derivs: Dict[MultiIndex, object]):
        raise NotImplementedError

    def boundary_target(self, nodes: np.ndarray, labels: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_basis(self, pb: PreBasis) -> None:
        need = max(idx.total_order for idx in self.derivatives)
        if need > pb.params.max_order:
            raise ConfigurationError(
                f"risk needs derivatives of order {need}; Matern nu={pb.params.nu} supports {pb.params.max_order}"
            )
        if pb.dim != self.domain.dim:
            raise ConfigurationError("pre-basis and risk live on domains of different dimension")

    def _values(self, h: PreBasisExpansion):
        self.check_basis(h.basis)
        derivs = {idx: values_on(h, self.interior, idx) for idx in self.derivatives}
        bvals = values_on(h, self.boundary, MultiIndex.zero(self.domain.dim))
        return derivs, bvals

    def value(self, h: PreBasisExpansion) -> float:
        derivs, bvals = self._values(h)
        res = self.residual(self.interior.nodes, derivs)
        mis = bvals - self._target
        return 0.5 * float(np.sum(self.interior.weights * res * res)) + 0.5 * float(
            np.sum(self.boundary.weights * mis * mis)
        )

    def directional_derivatives(self, h: PreBasisExpansion, directions: np.ndarray) -> np.ndarray:
        """``D R(h; v_m)`` for each column ``v_m`` of the ``(k, M)`` coefficient matrix."""
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if directions.ndim != 2:
            raise ContractError("directions must be a (k, M) coefficient matrix")
        pb = h.basis
        k = directions.shape[0]
        derivs, bvals = self._values(h)
        lifted = {
            idx: Dual(derivs[idx], pb.design(self.interior, idx, k) @ directions) for idx in self.derivatives
        }
        zero = MultiIndex.zero(self.domain.dim)
        mis = Dual(bvals - self._target, pb.design(self.boundary, zero, k) @ directions)
        res = self.residual(self.interior.nodes, lifted)
        total = (0.5 * res * res).weighted_sum(self.interior.weights) + (0.5 * mis * mis).weighted_sum(
            self.boundary.weights
        )
        return total.deriv

    def directional_derivative(self, h: PreBasisExpansion, v: PreBasisExpansion) -> float:
        if v.basis is not h.basis:
            raise ContractError("h and v reference different pre-bases")
        if v.length == 0:
            return 0.0
        return float(self.directional_derivatives(h, v.coeffs[:, None])[0])

    def boundary_misfit(self, h: PreBasisExpansion, label: Optional[int] = None) -> float:
        """``||h - target||_{L2}`` over all boundary components or over component ``label``."""
        bvals = values_on(h, self.boundary, MultiIndex.zero(self.domain.dim))
        mis = bvals - self._target
        w = self.boundary.weights
        if label is not None:
            w = np.where(self.boundary.labels == label, w, 0.0)
        return float(np.sqrt(np.sum(w * mis * mis)))


class HeatRisk(ResidualRisk):
    """``u_t = u_xx`` on ``(0, T) x (0, 2 pi)`` with ``u(0, x) = sin x`` and zero lateral data.

    Coordinates are ``(t, x)``. Boundary labels: 0 is ``t = 0``, 1 is
    ``x = 0``, 2 is ``x = 2 pi``.
    """

    sobolev_order = 2
    derivatives = (MultiIndex((1, 0)), MultiIndex((0, 2)))

    def __init__(
        self,
        T: float = 1.0,
        n_interior: int = DEFAULT_INTERIOR_NODES,
        n_boundary: int = DEFAULT_BOUNDARY_NODES,
        interior: Optional[Quadrature] = None,
    ):
        if not T > 0:
            raise ConfigurationError("T must be positive")
        self.T = float(T)
        domain = BoxDomain((0.0, 0.0), (self.T, 2.0 * pi))
        faces = [
            BoundaryComponent.face(domain, 0, "lower"),
            BoundaryComponent.face(domain, 1, "lower"),
            BoundaryComponent.face(domain, 1, "upper"),
        ]
        if interior is None:
            interior = box_quadrature(domain, n_interior)
        super().__init__(domain, interior, boundary_quadrature(faces, n_boundary))

    def residual(self, nodes, derivs):
        return derivs[MultiIndex((1, 0))] - derivs[MultiIndex((0, 2))]

    def boundary_target(self, nodes, labels):
        return np.where(labels == 0, np.sin(nodes[:, 1]), 0.0)

    @staticmethod
    def exact(points: np.ndarray) -> np.ndarray:
        return heat_exact(points)


def heat_exact(points: np.ndarray) -> np.ndarray:
    """``e^{-t} sin x`` at ``(t, x)`` points."""
    points = np.atleast_2d(points)
    return np.exp(-points[:, 0]) * np.sin(points[:, 1])


@dataclass(frozen=True)
class HjbParams:
    A: float = 1.0
    B: float = 1.0
    cbar: float = 0.5
    xbar: float = 3.0
    T: float = 5.0

    def __post_init__(self):
        for name in ("A", "B", "cbar", "xbar", "T"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    @property
    def G(self) -> float:
        return sqrt(self.A * self.B)


def htilde(x, p, params: HjbParams):
    """Minimized Hamiltonian ``min_{|c| <= cbar} A x^2 + B c^2 + p c``.

    Accepts floats, arrays or dual numbers in ``p``. The branch is chosen on
    the value of ``p``; ``|p| = 2 B cbar`` uses the quadratic branch.
    """
    A, B, cbar = params.A, params.B, params.cbar
    x = np.asarray(x, dtype=float)
    pv = dual.value_of(p)
    inner = np.abs(pv) <= 2.0 * B * cbar
    quad = A * x * x - p * p / (4.0 * B)
    lin = A * x * x + B * cbar * cbar - cbar * dual.absolute(p)
    out = dual.where(inner, quad, lin)
    if not isinstance(out, Dual) and np.ndim(out) == 0:
        return float(out)
    return out


def optimal_control(u: PreBasisExpansion, t, x, params: HjbParams):
    """``clamp(-p / (2B), -cbar, cbar)`` with ``p = du/dx`` at ``(t, x)``."""
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    pts = np.column_stack([t.ravel(), x.ravel()])
    p = np.atleast_1d(evaluate_partial(u, pts, MultiIndex((0, 1))))
    c = np.clip(-p / (2.0 * params.B), -params.cbar, params.cbar).reshape(t.shape)
    return float(c) if c.ndim == 0 else c


class HjbRisk(ResidualRisk):
    """``u_t + H~(x, u_x) = 0`` on ``(0, T) x (-xbar, xbar)`` with ``u(T, x) = G x^2``.

    The single boundary component is the terminal face ``t = T``.
    """

    sobolev_order = 1
    derivatives = (MultiIndex((1, 0)), MultiIndex((0, 1)))

    def __init__(
        self,
        params: HjbParams = HjbParams(),
        n_interior: int = DEFAULT_INTERIOR_NODES,
        n_boundary: int = DEFAULT_BOUNDARY_NODES,
        interior: Optional[Quadrature] = None,
    ):
        self.params = params
        domain = BoxDomain((0.0, -params.xbar), (params.T, params.xbar))
        if interior is None:
            interior = box_quadrature(domain, n_interior)
        terminal = BoundaryComponent.face(domain, 0, "upper")
        super().__init__(domain, interior, boundary_quadrature([terminal], n_boundary))

    def residual(self, nodes, derivs):
        return derivs[MultiIndex((1, 0))] + htilde(nodes[:, 1], derivs[MultiIndex((0, 1))], self.params)

    def boundary_target(self, nodes, labels):
        return self.params.G * nodes[:, 1] ** 2

    def terminal_error(self, h: PreBasisExpansion) -> float:
        """``||h(T, .) - G x^2||_{L2(-xbar, xbar)}``."""
        return self.boundary_misfit(h)
