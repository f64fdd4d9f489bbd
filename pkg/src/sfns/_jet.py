"""Truncated Taylor arithmetic ("jets") for exact pointwise derivatives.

A jet of order K stores ``c[k] = f^(k)(r) / k!`` for k = 0..K, vectorized over
an array of base points. Differentiating a jet lowers its order by one; an
order below zero means the derivative is not available from the input data.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("c",)

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    @classmethod
    def variable(cls, r, order: int) -> Jet:
        r = np.asarray(r, dtype=float)
        c = np.zeros((order + 1,) + r.shape)
        c[0] = r
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, like: Jet) -> Jet:
        c = np.zeros_like(like.c)
        c[0] = value
        return cls(c)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def derivative_value(self, k: int) -> np.ndarray:
        from math import factorial
        return self.c[k] * factorial(k)

    def _align(self, other: Jet):
        k = min(self.order, other.order) + 1
        return self.c[:k], other.c[:k]

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a + b)
        out = self.c.copy()
        out[0] = out[0] + other
        return Jet(out)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self._align(other)
        out = np.zeros_like(a)
        for k in range(a.shape[0]):
            for j in range(k + 1):
                out[k] += a[j] * b[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        a, b = self._align(other)
        out = np.zeros_like(a)
        for k in range(a.shape[0]):
            acc = a[k].copy()
            for j in range(1, k + 1):
                acc -= b[j] * out[k - j]
            out[k] = acc / b[0]
        return Jet(out)

    def __rtruediv__(self, other):
        return Jet.constant(other, self) / self

    def d(self) -> Jet:
        """Jet of the first derivative (one order lower)."""
        k = np.arange(1, self.order + 1).reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Jet(self.c[1:] * k)


def exp(g: Jet) -> Jet:
    out = np.zeros_like(g.c)
    out[0] = np.exp(g.c[0])
    for k in range(1, g.order + 1):
        acc = np.zeros_like(out[0])
        for j in range(1, k + 1):
            acc += j * g.c[j] * out[k - j]
        out[k] = acc / k
    return Jet(out)


def sincos(g: Jet) -> tuple[Jet, Jet]:
    s = np.zeros_like(g.c)
    c = np.zeros_like(g.c)
    s[0] = np.sin(g.c[0])
    c[0] = np.cos(g.c[0])
    for k in range(1, g.order + 1):
        acc_s = np.zeros_like(s[0])
        acc_c = np.zeros_like(c[0])
        for j in range(1, k + 1):
            acc_s += j * g.c[j] * c[k - j]
            acc_c -= j * g.c[j] * s[k - j]
        s[k] = acc_s / k
        c[k] = acc_c / k
    return Jet(s), Jet(c)
