"""Exact scalars: Laurent polynomials in ``√π`` with Gaussian-rational coefficients.

Form coefficients carry factors like ``1/2π`` and ``√π``. Writing
``2π = 2·(√π)^2`` keeps them all inside one exact ring, so the ``√π`` power
doubles as the normalization tag shown on output.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import math


class Scalar:
    """``Σ_p (a_p + i·b_p)·(√π)^p`` with rational ``a_p, b_p``."""

    __slots__ = ("_terms",)

    def __init__(self, terms=None):
        clean = {}
        for power, (re, im) in (terms or {}).items():
            re, im = Fraction(re), Fraction(im)
            if re or im:
                clean[int(power)] = (re, im)
        self._terms = clean

    @classmethod
    def coerce(cls, value) -> "Scalar":
        if isinstance(value, Scalar):
            return value
        if isinstance(value, bool):
            raise TypeError("refusing to coerce a bool to a scalar")
        if isinstance(value, (int, Rational)):
            return cls({0: (Fraction(value), 0)})
        if isinstance(value, complex):
            re, im = value.real, value.imag
            if re != int(re) or im != int(im):
                raise TypeError(f"inexact complex {value!r}; pass Fractions or Gaussian integers")
            return cls({0: (int(re), int(im))})
        raise TypeError(f"cannot coerce {value!r} to an exact scalar")

    @classmethod
    def gaussian(cls, re, im=0, sqrt_pi_power=0) -> "Scalar":
        return cls({sqrt_pi_power: (re, im)})

    @classmethod
    def i(cls) -> "Scalar":
        return cls({0: (0, 1)})

    @classmethod
    def sqrt_pi(cls, power=1) -> "Scalar":
        return cls({power: (1, 0)})

    @classmethod
    def two_pi(cls, power=1) -> "Scalar":
        """``(2π)^power`` for any integer power."""
        return cls({2 * power: (Fraction(2) ** power, 0)})

    @property
    def terms(self) -> dict[int, tuple[Fraction, Fraction]]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __add__(self, other):
        other = Scalar.coerce(other)
        out = dict(self._terms)
        for p, (re, im) in other._terms.items():
            a, b = out.get(p, (0, 0))
            out[p] = (a + re, b + im)
        return Scalar(out)

    __radd__ = __add__

    def __neg__(self):
        return Scalar({p: (-re, -im) for p, (re, im) in self._terms.items()})

    def __sub__(self, other):
        return self + (-Scalar.coerce(other))

    def __rsub__(self, other):
        return Scalar.coerce(other) - self

    def __mul__(self, other):
        try:
            other = Scalar.coerce(other)
        except TypeError:
            return NotImplemented
        out: dict[int, tuple[Fraction, Fraction]] = {}
        for p, (a, b) in self._terms.items():
            for q, (c, d) in other._terms.items():
                re, im = out.get(p + q, (0, 0))
                out[p + q] = (re + a * c - b * d, im + a * d + b * c)
        return Scalar(out)

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        """Inverse of a monomial ``z·(√π)^p``; sums of powers are not invertible here."""
        if len(self._terms) != 1:
            raise ZeroDivisionError(f"{self} is not a unit of the scalar ring")
        (p, (a, b)), = self._terms.items()
        norm = a * a + b * b
        return Scalar({-p: (a / norm, -b / norm)})

    def __truediv__(self, other):
        return self * Scalar.coerce(other).inverse()

    def __rtruediv__(self, other):
        return Scalar.coerce(other) * self.inverse()

    def __eq__(self, other):
        try:
            other = Scalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(tuple(sorted(self._terms.items())))

    def conjugate(self) -> "Scalar":
        return Scalar({p: (re, -im) for p, (re, im) in self._terms.items()})

    def __complex__(self):
        root = math.sqrt(math.pi)
        return sum((complex(float(re), float(im)) * root**p for p, (re, im) in self._terms.items()), 0j)

    def to_json(self):
        return [
            {
                "sqrt_pi_power": p,
                "re": [re.numerator, re.denominator],
                "im": [im.numerator, im.denominator],
            }
            for p, (re, im) in sorted(self._terms.items())
        ]

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for p, (re, im) in sorted(self._terms.items()):
            z = f"{re}" if not im else f"({re}{'+' if im >= 0 else '-'}{abs(im)}i)"
            parts.append(z if p == 0 else f"{z}·√π^{p}")
        return " + ".join(parts)


ZERO = Scalar()
ONE = Scalar.coerce(1)
I = Scalar.i()
