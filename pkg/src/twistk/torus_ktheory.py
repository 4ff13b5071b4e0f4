"""Twisted K-groups of ``T_φ × T^n`` and their character quotient groups.

The twist is a line bundle with Chern class ``k·dθ1^dθ2``. K-theory of
``T^n`` is identified with the integral exterior algebra, so every group
here comes out of Smith and Hermite normal forms of wedge-multiplication
matrices.

Character classes live on ``T_s × T_φ × T^n`` and use ``n + 2`` generators in
the order ``ds, dφ, dθ1, ..., dθn``. Their ``√π`` and ``2π`` normalizations
are stripped, so a lattice class has integer coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .lattice_algebra import (
    AbelianGroup,
    ExtClassQ,
    ExtElement,
    hermite_normal_form,
    int_matrix,
    kernel_lattice,
    lattice_contains,
    monomials,
    quotient_group,
    reduce_modulo,
    smith_normal_form,
    unimodular_inverse,
    wedge_matrix,
)

DS_BIT = 1 << 0
DPHI_BIT = 1 << 1


class DomainError(ValueError):
    """Input class is not an integral point of the lattice being reduced."""


def _opposite(parity):
    return {"even": "odd", "odd": "even"}[parity]


def _check_parity(parity):
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def lambda_rank(m: int, parity: str) -> int:
    """Rank of the even or odd part of the exterior algebra on ``m`` generators."""
    _check_parity(parity)
    if m == 0:
        return 1 if parity == "even" else 0
    return 2 ** (m - 1)


@dataclass(frozen=True)
class TwistSpec:
    """Twist of ``T_φ × T^n`` by ``dφ ^ c1(λ)``.

    ``c1(λ)`` defaults to ``k·dθ1^dθ2``. A general integral 2-form may be
    supplied as ``curvature``; it is validated and used by the direct lattice
    computations, but the closed-form cross-check only covers the default.
    """

    n: int
    k: int
    curvature: ExtElement | None = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"torus dimension n must be an integer >= 2, got {self.n}")
        if int(self.k) != self.k or self.k == 0:
            raise ValueError(f"twist level k must be a nonzero integer, got {self.k}")
        if self.curvature is not None:
            c = self.curvature
            if isinstance(c, ExtClassQ):
                c = c.to_integral()
            if c.n != self.n:
                raise ValueError(f"curvature has {c.n} generators, expected {self.n}")
            if c.degrees() != {2}:
                raise ValueError(f"curvature must be a nonzero pure 2-form, got degrees {c.degrees()}")
            object.__setattr__(self, "curvature", c)

    @property
    def c1(self) -> ExtElement:
        """Chern class of the twisting line bundle."""
        if self.curvature is not None:
            return self.curvature
        return ExtElement.monomial([1, 2], self.n, self.k)

    @property
    def is_standard(self) -> bool:
        return self.curvature is None or self.curvature == ExtElement.monomial([1, 2], self.n, self.k)

    @property
    def lambda_class(self) -> ExtElement:
        """K-class of the twisting bundle, ``1 - c1``."""
        return ExtElement.one(self.n) - self.c1


@dataclass(frozen=True)
class KGroupResult:
    group: AbelianGroup
    summand_breakdown: tuple[AbelianGroup, AbelianGroup, AbelianGroup]
    generators: tuple[ExtElement, ...]
    degree: int
    routes_agree: bool | None = None

    def to_json(self):
        out = self.group.to_json()
        out["degree"] = self.degree
        out["summands"] = [g.to_json() for g in self.summand_breakdown]
        out["generators"] = [g.to_json() for g in self.generators]
        out["routes_agree"] = self.routes_agree
        return out


def _elements_from_columns(n, basis, matrix):
    return [
        ExtElement.from_coordinates(n, basis, [int(matrix[i, j]) for i in range(matrix.shape[0])])
        for j in range(matrix.shape[1])
    ]


def _kernel_matrix(spec: TwistSpec, parity: str):
    basis = monomials(spec.n, parity)
    M = wedge_matrix(spec.c1, basis, basis)
    return basis, kernel_lattice(M)


def invariant_subgroup(spec: TwistSpec, parity: str) -> list[ExtElement]:
    """Saturated basis of ``{x ∈ Λ^parity : c1 ^ x = 0}``."""
    _check_parity(parity)
    basis, K = _kernel_matrix(spec, parity)
    return _elements_from_columns(spec.n, basis, K)


def closed_form_invariant_basis(n: int, parity: str) -> tuple[list[ExtElement], list[ExtElement]]:
    """Explicit invariant basis for the standard twist ``k·dθ1^dθ2``.

    Returns ``(dθ2 ^ Λ(θ3..θn), dθ1 ^ Λ(θ2..θn))`` restricted to ``parity``;
    the first list has the rank of the opposite-parity algebra on ``n - 2``
    generators, the second on ``n - 1`` generators.
    """
    _check_parity(parity)
    inner = _opposite(parity)
    low = [m for m in monomials(n, inner) if not m & 0b11]
    mid = [m for m in monomials(n, inner) if not m & 0b1]
    theta1 = ExtElement.generator(1, n)
    theta2 = ExtElement.generator(2, n)
    part_low = [theta2.wedge(ExtElement(n, {m: 1})) for m in low]
    part_mid = [theta1.wedge(ExtElement(n, {m: 1})) for m in mid]
    return part_low, part_mid


def _image_matrix(spec: TwistSpec, parity: str):
    basis = monomials(spec.n, parity)
    return basis, wedge_matrix(spec.c1, basis, basis)


def _quotient_generators(n, basis, image):
    """Coset representatives generating ``Z^basis / image``: columns of ``U^-1``."""
    snf = smith_normal_form(image)
    U_inv = unimodular_inverse(snf.U)
    diag = snf.diagonal + [0] * (len(basis) - len(snf.diagonal))
    cols = [j for j, d in enumerate(diag) if d != 1]
    return [
        ExtElement.from_coordinates(n, basis, [int(U_inv[i, j]) for i in range(len(basis))])
        for j in cols
    ]


def twisted_k_group(spec: TwistSpec, degree: int) -> KGroupResult:
    """Twisted K-group of ``T_φ × T^n`` in the given degree.

    Degree 0 pairs invariant even classes with the odd quotient; degree 1
    pairs invariant odd classes with the even quotient. For the standard
    twist the lattice computation is cross-checked against the closed form.
    """
    if degree not in (0, 1):
        raise ValueError(f"degree must be 0 or 1, got {degree}")
    inv_parity = "even" if degree == 0 else "odd"
    quo_parity = _opposite(inv_parity)
    n = spec.n

    inv_basis, K = _kernel_matrix(spec, inv_parity)
    inv_rank = K.shape[1]
    quo_basis, image = _image_matrix(spec, quo_parity)
    quotient = quotient_group(len(quo_basis), image)
    direct = AbelianGroup(inv_rank) + quotient

    generators = _elements_from_columns(n, inv_basis, K) + _quotient_generators(n, quo_basis, image)

    if not spec.is_standard:
        half = AbelianGroup(inv_rank)
        return KGroupResult(direct, (AbelianGroup(0), half, quotient), tuple(generators), degree, None)

    low_rank = lambda_rank(n - 2, quo_parity)
    mid_rank = lambda_rank(n - 1, quo_parity)
    top_rank = lambda_rank(n, quo_parity)
    torsion = (abs(spec.k),) * low_rank if abs(spec.k) > 1 else ()
    summands = (
        AbelianGroup(low_rank),
        AbelianGroup(mid_rank),
        AbelianGroup(top_rank - low_rank, torsion),
    )
    closed = summands[0] + summands[1] + summands[2]
    agree = closed == direct and _closed_form_lattices_agree(spec, inv_parity, quo_parity, K, image)
    return KGroupResult(closed, summands, tuple(generators), degree, agree)


def _closed_form_lattices_agree(spec, inv_parity, quo_parity, K, image) -> bool:
    n = spec.n
    inv_basis = monomials(n, inv_parity)
    low, mid = closed_form_invariant_basis(n, inv_parity)
    closed_inv = [x.coordinates(inv_basis) for x in low + mid]
    kernel_rows = [[int(K[i, j]) for i in range(K.shape[0])] for j in range(K.shape[1])]
    if hermite_normal_form(closed_inv) != hermite_normal_form(kernel_rows):
        return False
    quo_basis = monomials(n, quo_parity)
    c1 = spec.c1
    closed_img = [
        c1.wedge(ExtElement(n, {m: 1})).coordinates(quo_basis)
        for m in monomials(n, quo_parity)
        if not m & 0b11
    ]
    image_rows = [[int(image[i, j]) for i in range(image.shape[0])] for j in range(image.shape[1])]
    return hermite_normal_form(closed_img) == hermite_normal_form(image_rows)


# ---------------------------------------------------------------------------
# character quotients


def lift_theta(x: ExtElement) -> ExtElement:
    """Embed a class on ``T^n`` into the ``(ds, dφ, θ...)`` algebra on ``n + 2`` generators."""
    cls = type(x)
    return cls(x.n + 2, {b << 2: c for b, c in x.coeffs.items()})


def _lift_mask(m):
    return m << 2


@dataclass(frozen=True)
class CharacterQuotient:
    """Integral character lattice modulo the twist sublattice.

    ``lattice_basis`` lists monomial masks in the ``n + 2`` generator algebra.
    ``reduction_basis`` is the Hermite basis of the sublattice in those
    coordinates; reducing by it gives canonical coset representatives.
    """

    spec: TwistSpec
    parity: str
    group: AbelianGroup
    lattice_basis: tuple[int, ...]
    reduction_rows: tuple[tuple[int, ...], ...]
    U: np.ndarray = field(repr=False, compare=False)
    diagonal: tuple[int, ...] = ()

    def __iter__(self):
        return iter((self.group, self.reduction_basis))

    @property
    def reduction_basis(self) -> list[ExtElement]:
        n2 = self.spec.n + 2
        return [ExtElement.from_coordinates(n2, list(self.lattice_basis), row) for row in self.reduction_rows]

    def coordinates(self, c: ExtElement) -> list[int]:
        if c.n != self.spec.n + 2:
            raise DomainError(f"class has {c.n} generators, expected {self.spec.n + 2}")
        if isinstance(c, ExtClassQ):
            if not c.is_integral():
                raise DomainError(f"class {c!r} has non-integral lattice coordinates")
            c = c.to_integral()
        try:
            return [int(v) for v in c.coordinates(list(self.lattice_basis))]
        except Exception as exc:
            raise DomainError(f"class {c!r} is outside the decomposable lattice") from exc

    def contains(self, c: ExtElement) -> bool:
        return lattice_contains(self.coordinates(c), [list(r) for r in self.reduction_rows])

    def reduce(self, c: ExtElement) -> ExtClassQ:
        vec = reduce_modulo(self.coordinates(c), [list(r) for r in self.reduction_rows])
        return ExtClassQ(self.spec.n + 2, dict(zip(self.lattice_basis, vec)))

    def invariants(self, c: ExtElement) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Coset coordinates ``(free part, torsion part)`` in the Smith basis.

        Torsion coordinates are reduced modulo their invariant factor. Two
        classes share a coset iff their invariants agree.
        """
        y = [sum(int(self.U[i, j]) * v for j, v in enumerate(self.coordinates(c))) for i in range(self.U.shape[0])]
        diag = list(self.diagonal) + [0] * (len(y) - len(self.diagonal))
        free = tuple(yi for yi, d in zip(y, diag) if d == 0)
        torsion = tuple(yi % d for yi, d in zip(y, diag) if d > 1)
        return free, torsion

    def to_json(self):
        return {
            "parity": self.parity,
            **self.group.to_json(),
            "lattice_basis": [_mask_json(m) for m in self.lattice_basis],
            "reduction_basis": [list(r) for r in self.reduction_rows],
        }


def _mask_json(mask):
    names = ["ds", "dphi"] + [f"dtheta{i}" for i in range(1, 64)]
    return [names[i] for i in range(mask.bit_length()) if mask >> i & 1]


def _character_lattice(spec: TwistSpec, parity: str):
    """Lattice masks and sublattice generator vectors for one parity."""
    n = spec.n
    n2 = n + 2
    c1 = lift_theta(spec.c1)
    dphi = ExtElement(n2, {DPHI_BIT: 1})
    ds = ExtElement(n2, {DS_BIT: 1})
    if parity == "odd":
        lattice = [DPHI_BIT | _lift_mask(m) for m in monomials(n, "even")]
        sources = [ExtElement(n2, {_lift_mask(m): 1}) for m in monomials(n, "even")]
    else:
        lattice = [DS_BIT | DPHI_BIT | _lift_mask(m) for m in monomials(n, "even")]
        lattice += [DPHI_BIT | _lift_mask(m) for m in monomials(n, "odd")]
        sources = [ds.wedge(ExtElement(n2, {_lift_mask(m): 1})) for m in monomials(n, "even")]
        sources += [ExtElement(n2, {_lift_mask(m): 1}) for m in monomials(n, "odd")]
    gens = [dphi.wedge(c1).wedge(x).coordinates(lattice) for x in sources]
    return lattice, gens


@lru_cache(maxsize=256)
def _character_quotient_cached(n, k, curvature_key, parity):
    spec = TwistSpec(n, k, None if curvature_key is None else ExtElement(n, dict(curvature_key)))
    lattice, gens = _character_lattice(spec, parity)
    rank = len(lattice)
    nonzero = [g for g in gens if any(g)]
    if nonzero:
        sub = int_matrix(nonzero).T.copy()
        snf = smith_normal_form(sub)
        U, diag = snf.U, tuple(snf.diagonal)
    else:
        sub = np.zeros((rank, 0), dtype=object)
        U, diag = int_matrix(np.eye(rank, dtype=int)), ()
    group = quotient_group(rank, sub)
    rows = tuple(tuple(r) for r in hermite_normal_form(nonzero))
    return CharacterQuotient(spec, parity, group, tuple(lattice), rows, U, diag)


def character_quotient(spec: TwistSpec, parity: str) -> CharacterQuotient:
    """Quotient of the integral character lattice by the twist sublattice.

    Odd: ``dφ ^ Λ^even_n`` modulo ``dφ ^ c1 ^ Λ^even_n``. Even:
    ``ds^dφ^Λ^even_n ⊕ dφ^Λ^odd_n`` modulo ``dφ ^ c1 ^ (ds^Λ^even_n ⊕ Λ^odd_n)``.
    Unpacks as ``(group, reduction_basis)``.
    """
    _check_parity(parity)
    key = None if spec.curvature is None else tuple(sorted(spec.curvature.coeffs.items()))
    return _character_quotient_cached(spec.n, spec.k, key, parity)


def reduce_character(c: ExtElement, spec: TwistSpec, parity: str) -> ExtClassQ:
    """Canonical coset representative of a stripped character class."""
    return character_quotient(spec, parity).reduce(c)


@dataclass(frozen=True)
class Coset:
    representative: ExtClassQ
    free: tuple[int, ...]
    torsion: tuple[int, ...]
    invariant_factors: tuple[int, ...]

    @property
    def order(self) -> int | float:
        """Order of the coset in the quotient group (``inf`` if it has a free part)."""
        if any(self.free):
            return float("inf")
        out = 1
        for t, d in zip(self.torsion, self.invariant_factors):
            if t:
                from math import gcd

                o = d // gcd(t, d)
                out = out * o // gcd(out, o)
        return out

    def to_json(self):
        return {
            "representative": self.representative.to_json(),
            "free": list(self.free),
            "torsion": list(self.torsion),
            "invariant_factors": list(self.invariant_factors),
        }


def supercharge_class(xi_chern: ExtElement, flow_sign: int, spec: TwistSpec, parity: str = "odd") -> ExtElement:
    """Stripped character ``flow_sign · dφ ^ xi_chern`` on ``n + 2`` generators.

    For ``parity="odd"`` the vacuum class lives on ``T^n``. For ``"even"`` it
    lives on ``T_s × T^n`` with generators ``(ds, dθ1, ..., dθn)``.
    """
    if flow_sign not in (1, -1):
        raise ValueError(f"flow_sign must be +1 or -1, got {flow_sign}")
    n2 = spec.n + 2
    if isinstance(xi_chern, ExtClassQ):
        if not xi_chern.is_integral():
            raise DomainError(f"vacuum character {xi_chern!r} is not integral")
        xi_chern = xi_chern.to_integral()
    if parity == "odd":
        if xi_chern.n != spec.n:
            raise DomainError(f"vacuum class has {xi_chern.n} generators, expected {spec.n}")
        lifted = lift_theta(xi_chern)
    else:
        if xi_chern.n != spec.n + 1:
            raise DomainError(f"vacuum class has {xi_chern.n} generators, expected {spec.n + 1}")
        lifted = ExtElement(n2, {(b & 1) | ((b >> 1) << 2): c for b, c in xi_chern.coeffs.items()})
    return ExtElement(n2, {DPHI_BIT: flow_sign}).wedge(lifted)


def classify_supercharge(xi_chern: ExtElement, flow_sign: int, spec: TwistSpec, parity: str = "odd") -> Coset:
    """Coset of the supercharge character ``flow_sign · dφ ^ ch(ξ)``."""
    cq = character_quotient(spec, parity)
    c = supercharge_class(xi_chern, flow_sign, spec, parity)
    free, torsion = cq.invariants(c)
    factors = tuple(d for d in cq.diagonal if d > 1)
    return Coset(cq.reduce(c), free, torsion, factors)


def to_json(result) -> str:
    return json.dumps(result.to_json(), indent=2, sort_keys=True)
