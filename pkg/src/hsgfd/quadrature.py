"""Roberts-sequence quasi-Monte-Carlo quadrature on boxes and box faces.

The Roberts sequence is the additive recurrence

    u_m = frac(0.5 + m * alpha),   alpha_j = phi_d ** -j,

where ``phi_d`` is the real root > 1 of ``x**(d+1) = x + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "BoxDomain",
    "BoundaryComponent",
    "Quadrature",
    "generalized_golden_ratio",
    "roberts_sequence",
    "box_quadrature",
    "boundary_quadrature",
    "integrate",
]

ROBERTS_OFFSET = 0.5


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned open box ``prod_i (lower[i], upper[i])``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not lower:
            raise ValueError("lower and upper must be nonempty and of equal length")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ValueError(f"degenerate box: lower={lower}, upper={upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def measure(self) -> float:
        return float(np.prod(self.widths))

    def map_unit(self, u: np.ndarray) -> np.ndarray:
        """Affinely map points of ``[0, 1)^d`` into the box."""
        return np.asarray(self.lower) + u * self.widths


@dataclass(frozen=True)
class BoundaryComponent:
    """One face ``{x : x[fixed_axis] = fixed_value}`` of a box, restricted to ``free_box``.

    ``free_box`` is the (d-1)-dimensional box spanned by the remaining axes,
    listed in increasing axis order.
    """

    fixed_axis: int
    fixed_value: float
    free_box: BoxDomain

    @property
    def measure(self) -> float:
        return self.free_box.measure

    @classmethod
    def face(cls, box: BoxDomain, axis: int, side: str) -> "BoundaryComponent":
        """The full ``side`` ("lower" or "upper") face of ``box`` orthogonal to ``axis``."""
        if box.dim < 2:
            raise ValueError("faces are only defined for boxes of dimension >= 2")
        value = box.lower[axis] if side == "lower" else box.upper[axis]
        keep = [i for i in range(box.dim) if i != axis]
        free = BoxDomain([box.lower[i] for i in keep], [box.upper[i] for i in keep])
        return cls(axis, float(value), free)

    def embed(self, free_points: np.ndarray) -> np.ndarray:
        n = free_points.shape[0]
        d = self.free_box.dim + 1
        out = np.empty((n, d))
        out[:, self.fixed_axis] = self.fixed_value
        keep = [i for i in range(d) if i != self.fixed_axis]
        out[:, keep] = free_points
        return out


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Nodes with weights; ``labels`` tags the boundary component of each node."""

    nodes: np.ndarray
    weights: np.ndarray
    labels: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 2 or weights.shape != (nodes.shape[0],):
            raise ValueError("nodes must be (N, d) and weights (N,)")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


def generalized_golden_ratio(d: int, iterations: int = 30) -> float:
    """Root > 1 of ``x**(d+1) = x + 1`` by fixed-point iteration from 2."""
    x = 2.0
    for _ in range(iterations):
        x = (1.0 + x) ** (1.0 / (d + 1))
    return x


def roberts_sequence(d: int, n: int) -> np.ndarray:
    """First ``n`` points (1-based index m = 1..n) of the d-dimensional Roberts sequence.

    Returns an ``(n, d)`` array in ``[0, 1)^d``. Point m depends only on m,
    so the sequence is prefix-stable.
    """
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    phi = generalized_golden_ratio(d)
    alpha = phi ** -np.arange(1, d + 1, dtype=float)
    m = np.arange(1, n + 1, dtype=float)[:, None]
    return np.mod(ROBERTS_OFFSET + m * alpha, 1.0)


def box_quadrature(domain: BoxDomain, n: int) -> Quadrature:
    """Equal-weight Roberts quadrature with ``n`` nodes on ``domain``."""
    nodes = domain.map_unit(roberts_sequence(domain.dim, n))
    return Quadrature(nodes, np.full(n, domain.measure / n))


def boundary_quadrature(components: Sequence[BoundaryComponent], n_per: int) -> Quadrature:
    """Concatenate one Roberts quadrature of ``n_per`` nodes per face.

    Node ``labels`` hold the index of the component each node belongs to.
    """
    if n_per < 1:
        raise ValueError("n_per must be >= 1")
    nodes, weights, labels = [], [], []
    for label, comp in enumerate(components):
        free = comp.free_box.map_unit(roberts_sequence(comp.free_box.dim, n_per))
        nodes.append(comp.embed(free))
        weights.append(np.full(n_per, comp.measure / n_per))
        labels.append(np.full(n_per, label))
    return Quadrature(np.concatenate(nodes), np.concatenate(weights), np.concatenate(labels))


def integrate(f: Callable[[np.ndarray], np.ndarray], quad: Quadrature) -> float:
    """Weighted node sum ``sum_q w_q f(x_q)``; ``f`` maps an ``(N, d)`` array to ``(N,)``."""
    values = np.asarray(f(quad.nodes), dtype=float)
    # np.sum reduces pairwise in a fixed order
    return float(np.sum(quad.weights * values))
