"""Forward-mode dual numbers ``a + eps * b`` with ``eps**2 = 0``.

``value`` has some shape ``s`` (often one entry per quadrature node) and
``deriv`` has shape ``s + (M,)``: the trailing axis carries ``M`` independent
tangent directions, so one pass yields ``M`` directional derivatives.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Dual", "sin", "cos", "exp", "sqrt", "square", "absolute", "where", "value_of"]


class Dual:
    __slots__ = ("value", "deriv")
    __array_ufunc__ = None  # ndarray (op) Dual defers to the reflected Dual method

    def __init__(self, value, deriv):
        self.value = np.asarray(value, dtype=float)
        self.deriv = np.asarray(deriv, dtype=float)

    @classmethod
    def constant(cls, value, n_dirs: int = 1) -> "Dual":
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros(value.shape + (n_dirs,)))

    @property
    def n_dirs(self) -> int:
        return self.deriv.shape[-1]

    def _v(self):
        # value with a trailing axis so it broadcasts against deriv
        return self.value[..., None]

    def __repr__(self):
        return f"Dual(value={self.value!r}, deriv={self.deriv!r})"

    def __neg__(self):
        return Dual(-self.value, -self.deriv)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.deriv + other.deriv)
        other = np.asarray(other, dtype=float)
        return Dual(self.value + other, self.deriv + np.zeros_like(other)[..., None])

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value * other.value, self.deriv * other._v() + self._v() * other.deriv)
        other = np.asarray(other, dtype=float)
        return Dual(self.value * other, self.deriv * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.value
            return Dual(self.value * inv, (self.deriv - (self.value * inv)[..., None] * other.deriv) * inv[..., None])
        other = np.asarray(other, dtype=float)
        return Dual(self.value / other, self.deriv / other[..., None])

    def __rtruediv__(self, other):
        other = np.asarray(other, dtype=float)
        inv = 1.0 / self.value
        return Dual(other * inv, -(other * inv * inv)[..., None] * self.deriv)

    def __pow__(self, exponent):
        if isinstance(exponent, Dual):
            raise TypeError("Dual exponents are not supported")
        if exponent == 2:
            return square(self)
        return Dual(self.value**exponent, (exponent * self.value ** (exponent - 1))[..., None] * self.deriv)

    def __abs__(self):
        return absolute(self)

    def weighted_sum(self, weights) -> "Dual":
        """``sum_q w_q f_q`` over the leading axis (the quadrature sum)."""
        w = np.asarray(weights, dtype=float)
        return Dual(np.sum(w * self.value, axis=0), np.sum(w[:, None] * self.deriv, axis=0))


def value_of(x):
    return x.value if isinstance(x, Dual) else np.asarray(x, dtype=float)


def _unary(x, f, df):
    if isinstance(x, Dual):
        return Dual(f(x.value), df(x.value)[..., None] * x.deriv)
    return f(np.asarray(x, dtype=float))


def sin(x):
    return _unary(x, np.sin, np.cos)


def cos(x):
    return _unary(x, np.cos, lambda a: -np.sin(a))


def exp(x):
    return _unary(x, np.exp, np.exp)


def sqrt(x):
    return _unary(x, np.sqrt, lambda a: 0.5 / np.sqrt(a))


def square(x):
    return _unary(x, np.square, lambda a: 2.0 * a)


def absolute(x):
    """``|x|`` with derivative ``sign(x)``; ``sign(0) = 0``."""
    return _unary(x, np.abs, np.sign)


def where(cond, a, b):
    """Branch selection by ``cond`` (decided on values); derivative follows the chosen branch."""
    cond = np.asarray(cond, dtype=bool)
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.where(cond, a, b)
    n_dirs = a.n_dirs if isinstance(a, Dual) else b.n_dirs
    if not isinstance(a, Dual):
        a = Dual.constant(np.broadcast_to(a, b.value.shape), n_dirs)
    if not isinstance(b, Dual):
        b = Dual.constant(np.broadcast_to(b, a.value.shape), n_dirs)
    return Dual(np.where(cond, a.value, b.value), np.where(cond[..., None], a.deriv, b.deriv))
