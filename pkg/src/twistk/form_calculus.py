"""Differential forms on ``T_s × T_φ × T^n`` with trigonometric coefficients.

A term is ``c · e^{i(k_s s + k_φ φ)} · dx_mask`` where bit 0 of the mask is
``ds``, bit 1 is ``dφ`` and bit ``i + 1`` is ``dθ_i``. Coefficients are exact
``Scalar`` values, so every identity in this module is checked with ``==``.

The twist is modelled by its harmonic representative ``H = (dφ/2π) ^ F``
with ``F`` an integral 2-form in the ``θ`` directions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from . import kernels
from .lattice_algebra import ExtClassQ, ExtElement, exp_wedge, matrix_rank, monomials, wedge_matrix
from .scalars import Scalar

DS = 1 << 0
DPHI = 1 << 1


class FormDomainError(ValueError):
    """A form violates the shape an operation requires."""


class PreconditionError(ValueError):
    """Input excluded by an explicit precondition (for example a mode-0 term)."""


def theta_bit(i: int) -> int:
    return 1 << (i + 1)


def _degree(mask: int) -> int:
    return bin(mask).count("1")


class FourierForm:
    """Finite sum of ``c · e^{i(k_s s + k_φ φ)} dx_mask`` on ``n + 2`` generators."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[tuple[int, int, int], object] | None = None):
        self.n = int(n)
        clean: dict[tuple[int, int, int], Scalar] = {}
        limit = 1 << (self.n + 2)
        for (ks, kp, mask), c in (terms or {}).items():
            if not 0 <= mask < limit:
                raise FormDomainError(f"mask {mask:b} exceeds {self.n + 2} generators")
            key = (int(ks), int(kp), int(mask))
            total = clean.get(key, Scalar()) + Scalar.coerce(c)
            if total:
                clean[key] = total
            else:
                clean.pop(key, None)
        self._terms = clean

    # constructors
    @classmethod
    def constant(cls, n, c=1):
        return cls(n, {(0, 0, 0): c})

    @classmethod
    def monomial(cls, n, mask, c=1, k_s=0, k_phi=0):
        return cls(n, {(k_s, k_phi, mask): c})

    @classmethod
    def from_ext(cls, x: ExtElement, prefix_mask: int = 0, scale=1) -> "FourierForm":
        """Embed a constant class on ``T^n`` as ``scale · dx_prefix ^ x``."""
        n = x.n
        out = {}
        for bits, c in x.coeffs.items():
            mask = bits << 2
            sign = kernels.reorder_sign(prefix_mask, mask)
            if sign:
                out[(0, 0, prefix_mask | mask)] = Scalar.coerce(scale) * (sign * Fraction(c))
        return cls(n, out)

    @property
    def terms(self) -> dict[tuple[int, int, int], Scalar]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degrees(self) -> set[int]:
        return {_degree(m) for (_, _, m) in self._terms}

    def is_even(self) -> bool:
        return all(d % 2 == 0 for d in self.degrees())

    def is_odd(self) -> bool:
        return all(d % 2 == 1 for d in self.degrees())

    def filter(self, predicate) -> "FourierForm":
        return FourierForm(self.n, {k: c for k, c in self._terms.items() if predicate(*k)})

    def _same(self, other):
        if not isinstance(other, FourierForm):
            raise TypeError(f"expected FourierForm, got {type(other).__name__}")
        if other.n != self.n:
            raise FormDomainError(f"torus dimensions differ: {self.n} vs {other.n}")

    def __add__(self, other):
        self._same(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, Scalar()) + c
        return FourierForm(self.n, out)

    def __neg__(self):
        return FourierForm(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, FourierForm):
            return self.wedge(scalar)
        s = Scalar.coerce(scalar)
        return FourierForm(self.n, {k: c * s for k, c in self._terms.items()})

    __rmul__ = __mul__

    def wedge(self, other: "FourierForm") -> "FourierForm":
        self._same(other)
        out: dict[tuple[int, int, int], Scalar] = {}
        for (ks, kp, ma), ca in self._terms.items():
            for (ls, lp, mb), cb in other._terms.items():
                sign = kernels.reorder_sign(ma, mb)
                if sign:
                    key = (ks + ls, kp + lp, ma | mb)
                    out[key] = out.get(key, Scalar()) + ca * cb * sign
        return FourierForm(self.n, out)

    __xor__ = wedge

    def __eq__(self, other):
        if not isinstance(other, FourierForm):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def to_json(self):
        out = []
        for (ks, kp, mask), c in sorted(self._terms.items()):
            theta = [i for i in range(1, self.n + 1) if mask & theta_bit(i)]
            for part in c.to_json():
                out.append(
                    {
                        "k_s": ks,
                        "k_phi": kp,
                        "ds": bool(mask & DS),
                        "dphi": bool(mask & DPHI),
                        "theta_indices": theta,
                        **part,
                    }
                )
        return out

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for (ks, kp, mask), c in sorted(self._terms.items()):
            names = (["ds"] if mask & DS else []) + (["dφ"] if mask & DPHI else [])
            names += [f"dθ{i}" for i in range(1, self.n + 1) if mask & theta_bit(i)]
            wave = f"e^i({ks}s+{kp}φ)" if ks or kp else ""
            parts.append(f"[{c}]{wave}{'^'.join(names) or '1'}")
        return " + ".join(parts)


def exterior_d(omega: FourierForm) -> FourierForm:
    """Exterior derivative; only the ``s`` and ``φ`` dependence differentiates."""
    out: dict[tuple[int, int, int], Scalar] = {}
    i = Scalar.i()
    for (ks, kp, mask), c in omega.terms.items():
        for k, bit in ((ks, DS), (kp, DPHI)):
            if k:
                sign = kernels.reorder_sign(bit, mask)
                if sign:
                    key = (ks, kp, mask | bit)
                    out[key] = out.get(key, Scalar()) + c * i * (k * sign)
    return FourierForm(omega.n, out)


def validate_twist(H: FourierForm) -> None:
    if not H.is_odd():
        raise FormDomainError(f"twist must be odd, got degrees {sorted(H.degrees())}")
    if not exterior_d(H).is_zero():
        raise FormDomainError("twist is not closed")


def twisted_d(omega: FourierForm, H: FourierForm) -> FourierForm:
    """``dω + H ^ ω`` for a closed odd twist ``H``."""
    validate_twist(H)
    return exterior_d(omega) + H.wedge(omega)


def harmonic_twist(n: int, curvature: ExtElement) -> FourierForm:
    """``H = (dφ/2π) ^ F`` for an integral 2-form ``F`` on ``T^n``."""
    if curvature.n != n:
        raise FormDomainError(f"curvature has {curvature.n} generators, expected {n}")
    return FourierForm.from_ext(curvature, DPHI, Scalar.two_pi(-1))


def _check_harmonic_twist(H: FourierForm) -> None:
    validate_twist(H)
    for (ks, kp, mask) in H.terms:
        if ks or kp or not mask & DPHI or mask & DS:
            raise FormDomainError("twist must be a constant form dφ ^ F with F in the θ directions")


def _circle_antiderivative(Y: FourierForm) -> FourierForm:
    """``G`` with ``dG = Y`` for ``Y = Σ c e^{ikφ} dφ ^ rest`` (``k ≠ 0``, no ``s`` modes)."""
    out = {}
    i = Scalar.i()
    for (ks, kp, mask), c in Y.terms.items():
        if ks or not kp or not mask & DPHI:
            raise PreconditionError("correction term has a zero φ-mode; the induction cannot integrate it")
        rest = mask & ~DPHI
        sign = kernels.reorder_sign(DPHI, rest)
        out[(0, kp, rest)] = c * sign / (i * kp)
    return FourierForm(Y.n, out)


@dataclass(frozen=True)
class PrimitiveResult:
    omega: FourierForm
    corrections: tuple[FourierForm, ...]

    @property
    def iterations(self) -> int:
        return len(self.corrections)


def twisted_primitive_steps(phi: FourierForm, H: FourierForm) -> PrimitiveResult:
    """Inductive construction of ``Ω`` with ``dΦ = (d + H)Ω``.

    ``G0`` is the part of ``Φ`` without ``dφ``; each ``G_i`` is the circle
    antiderivative of ``H ^ G_{i-1}`` and ``Ω = Φ + Σ (-1)^i G_i``. Nothing
    in the induction depends on the parity of ``Φ``, so odd inputs are allowed.
    """
    _check_harmonic_twist(H)
    if any(ks for (ks, _, _) in phi.terms):
        raise FormDomainError("Φ must not depend on s")
    g = phi.filter(lambda ks, kp, mask: not mask & DPHI)
    if any(kp == 0 for (_, kp, _) in g.terms):
        raise PreconditionError("Φ has a φ-independent component without dφ (c_0 ≠ 0)")

    omega = phi
    corrections = []
    limit = (phi.n + 2 + 1) // 2 + 1
    while True:
        y = H.wedge(g)
        if y.is_zero():
            break
        g = _circle_antiderivative(y)
        corrections.append(g)
        omega = omega + g * (-1) ** len(corrections)
        if len(corrections) > limit:
            raise RuntimeError(f"correction loop exceeded {limit} steps")
    if twisted_d(omega, H) != exterior_d(phi):
        raise ArithmeticError("twisted primitive failed its exact verification")
    return PrimitiveResult(omega, tuple(corrections))


def twisted_primitive(phi: FourierForm, H: FourierForm) -> FourierForm:
    return twisted_primitive_steps(phi, H).omega


def wedge_exp(phi: FourierForm, sign: int = 1) -> FourierForm:
    """``Σ (sign·Φ)^j / j!`` for nilpotent ``Φ`` (no degree-0 part)."""
    if 0 in phi.degrees():
        raise FormDomainError("exponential of a form with a function part does not truncate")
    total = FourierForm.constant(phi.n)
    power = FourierForm.constant(phi.n)
    j = 0
    while True:
        j += 1
        power = power.wedge(phi) * Fraction(sign, j)
        if power.is_zero():
            return total
        total = total + power


def gauge_transform(omega: FourierForm, phi: FourierForm) -> FourierForm:
    """``e^{-Φ} ^ ω``: intertwines ``d + H`` with ``d + H + dΦ``."""
    if not phi.is_even():
        raise FormDomainError(f"gauge form must be even, got degrees {sorted(phi.degrees())}")
    return wedge_exp(phi, -1).wedge(omega)


@dataclass(frozen=True)
class CurvatureData:
    """Direct sum of line bundles with integral Chern classes plus a trivial part.

    ``charge`` shifts every line by ``charge · twist`` (the curvature seen on
    a Fock sector of that charge).
    """

    n: int
    summands: tuple[ExtElement, ...] = ()
    trivial_rank: int = 0
    charge: int = 0
    twist: ExtElement | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "summands", tuple(self.summands))
        if self.trivial_rank < 0:
            raise ValueError("trivial rank must be non-negative")
        for c in self.summands:
            if c.n != self.n or not (c.is_zero() or c.degrees() == {2}):
                raise ValueError(f"summand {c!r} is not an integral 2-form on {self.n} generators")

    @property
    def rank(self) -> int:
        return len(self.summands) + self.trivial_rank

    def effective_summands(self) -> list[ExtElement]:
        if not self.charge:
            return list(self.summands)
        if self.twist is None:
            raise ValueError("a nonzero charge needs the twisting curvature")
        shift = self.twist * self.charge
        lines = list(self.summands) + [ExtElement(self.n)] * self.trivial_rank
        return [c + shift for c in lines]


def chern_character(c: CurvatureData) -> ExtClassQ:
    """``rank_trivial + Σ exp(c1)`` over the line summands."""
    total = ExtClassQ(c.n)
    lines = c.effective_summands()
    for c1 in lines:
        total = total + exp_wedge(c1)
    if not c.charge:
        total = total + ExtClassQ(c.n, {0: c.trivial_rank})
    return total


def desuspend(omega: FourierForm) -> FourierForm:
    """``√π ∫_{T_s}``: keep the s-independent ``ds`` part, times ``2π·√π``, drop ``ds``."""
    scale = Scalar.two_pi() * Scalar.sqrt_pi()
    out = {}
    for (ks, kp, mask), c in omega.terms.items():
        if ks or not mask & DS:
            continue
        # ds is the lowest generator, so it leaves from the front with sign +1
        out[(0, kp, mask & ~DS)] = c * scale
    return FourierForm(omega.n, out)


def twisted_cohomology_rank(n: int, k: int, parity: str) -> int:
    """Rational rank of the ``parity`` cohomology of ``(Λ(T^{n+1}), H ^ ·)``.

    ``H = dφ ^ k dθ1 ^ dθ2`` on generators ``(dφ, dθ1, ..., dθn)``; invariant
    forms are closed, so the twisted differential is wedging by ``H``.
    """
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    m = n + 1
    H = ExtElement.monomial([1, 2, 3], m, k)
    other = "odd" if parity == "even" else "even"
    here, there = monomials(m, parity), monomials(m, other)
    out_rank = matrix_rank(wedge_matrix(H, here, there))
    in_rank = matrix_rank(wedge_matrix(H, there, here))
    return len(here) - out_rank - in_rank


def to_json(form: FourierForm) -> str:
    return json.dumps({"n": form.n, "terms": form.to_json()}, indent=2)
