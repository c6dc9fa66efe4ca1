"""Hyper-dual numbers for exact first and second derivatives.

A hyper-dual number ``a + b e1 + c e2 + d e1 e2`` with ``e1**2 = e2**2 = 0``
carries, after evaluating ``f(x + e1 u + e2 w)``, the directional derivatives
``b = f'(x) u``, ``c = f'(x) w`` and ``d = f''(x)[u, w]``. Components may be
floats or numpy arrays of a common shape.
"""

import numpy as np


class HyperDual:
    __slots__ = ("a", "b", "c", "d")
    # make ndarray <op> HyperDual defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, a, b=0.0, c=0.0, d=0.0):
        self.a = a
        self.b = b
        self.c = c
        self.d = d

    def __repr__(self):
        return f"HyperDual({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})"

    @staticmethod
    def lift(x):
        return x if isinstance(x, HyperDual) else HyperDual(x)

    def chain(self, f0, f1, f2):
        """Apply a scalar function given its value and first two derivatives at ``a``."""
        return HyperDual(f0, f1 * self.b, f1 * self.c, f1 * self.d + f2 * self.b * self.c)

    def __neg__(self):
        return HyperDual(-self.a, -self.b, -self.c, -self.d)

    def __add__(self, other):
        if not isinstance(other, HyperDual):
            return HyperDual(self.a + other, self.b, self.c, self.d)
        return HyperDual(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-HyperDual.lift(other))

    def __rsub__(self, other):
        return HyperDual.lift(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, HyperDual):
            return HyperDual(self.a * other, self.b * other, self.c * other, self.d * other)
        return HyperDual(
            self.a * other.a,
            self.a * other.b + self.b * other.a,
            self.a * other.c + self.c * other.a,
            self.a * other.d + self.b * other.c + self.c * other.b + self.d * other.a,
        )

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.a
        return self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if not isinstance(other, HyperDual):
            return HyperDual(self.a / other, self.b / other, self.c / other, self.d / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return HyperDual.lift(other) * self.reciprocal()

    def is_real(self):
        return all(np.all(np.asarray(x) == 0) for x in (self.b, self.c, self.d))

    def power(self, exponent):
        """``self ** exponent`` for a real exponent; the caller checks the domain."""
        y = exponent
        a = self.a
        with np.errstate(divide="ignore", invalid="ignore"):
            f0 = np.power(a, y)
            f1 = np.where(y == 0, 0.0, y * np.power(a, y - 1))
            f2 = np.where((y == 0) | (y == 1), 0.0, y * (y - 1) * np.power(a, y - 2))
        return self.chain(f0, f1, f2)

    def sin(self):
        s, c = np.sin(self.a), np.cos(self.a)
        return self.chain(s, c, -s)

    def cos(self):
        s, c = np.sin(self.a), np.cos(self.a)
        return self.chain(c, -s, -c)

    def tan(self):
        t = np.tan(self.a)
        sec2 = 1.0 + t * t
        return self.chain(t, sec2, 2.0 * t * sec2)

    def exp(self):
        e = np.exp(self.a)
        return self.chain(e, e, e)

    def log(self):
        inv = 1.0 / self.a
        return self.chain(np.log(self.a), inv, -inv * inv)

    def sqrt(self):
        r = np.sqrt(self.a)
        with np.errstate(divide="ignore"):
            f1 = 0.5 / r
        return self.chain(r, f1, -0.5 * f1 / self.a)
