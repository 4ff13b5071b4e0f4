"""Exact integer exterior algebra and integer-lattice normal forms.

Monomials ``dθ_{i1} ^ ... ^ dθ_{ik}`` are bitmasks (bit ``i-1`` for ``dθ_i``)
ordered by ``(degree, mask)``. Integer matrices are numpy ``object`` arrays of
Python ints, so nothing overflows however large the SNF pivots grow.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from . import kernels


class DimensionError(ValueError):
    """Operands live in exterior algebras or lattices of different size."""


@dataclass(frozen=True, order=True)
class MultiIndex:
    """A basis monomial of the exterior algebra on ``n`` generators."""

    bits: int
    n: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.n:
            raise DimensionError(f"bits {self.bits:b} not a subset of {self.n} generators")

    @classmethod
    def of(cls, indices: Iterable[int], n: int) -> "MultiIndex":
        bits = 0
        for i in indices:
            if not 1 <= i <= n:
                raise DimensionError(f"generator index {i} outside 1..{n}")
            bits |= 1 << (i - 1)
        return cls(bits, n)

    @property
    def degree(self) -> int:
        return bin(self.bits).count("1")

    @property
    def indices(self) -> tuple[int, ...]:
        return mask_indices(self.bits)


def mask_indices(bits: int) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(bits.bit_length()) if bits >> i & 1)


def monomial_key(bits: int) -> tuple[int, int]:
    return (bin(bits).count("1"), bits)


def monomials(n: int, parity: str | None = None, degree: int | None = None) -> list[int]:
    """All monomial masks on ``n`` generators in canonical order.

    ``parity`` is ``"even"``/``"odd"``; ``degree`` selects one degree.
    """
    out = []
    for d in range(n + 1):
        if degree is not None and d != degree:
            continue
        if parity == "even" and d % 2 or parity == "odd" and not d % 2:
            continue
        for combo in combinations(range(n), d):
            out.append(sum(1 << i for i in combo))
    out.sort(key=monomial_key)
    return out


class ExtElement:
    """Element of the exterior algebra over the integers on ``n`` generators."""

    __slots__ = ("n", "_coeffs", "_hash")

    def __init__(self, n: int, coeffs: Mapping[int, object] | None = None):
        self.n = int(n)
        clean = {}
        for key, value in (coeffs or {}).items():
            bits = key.bits if isinstance(key, MultiIndex) else int(key)
            if bits < 0 or bits >> self.n:
                raise DimensionError(f"monomial {bits:b} outside {self.n} generators")
            value = self._coerce(value)
            if value:
                clean[bits] = clean.get(bits, 0) + value
                if not clean[bits]:
                    del clean[bits]
        self._coeffs = dict(sorted(clean.items(), key=lambda kv: monomial_key(kv[0])))
        self._hash = None

    @staticmethod
    def _coerce(value):
        if isinstance(value, Fraction):
            if value.denominator != 1:
                raise TypeError(f"non-integer coefficient {value} in an integral element")
            return int(value)
        if isinstance(value, (int, np.integer)):
            return int(value)
        raise TypeError(f"unsupported coefficient {value!r}")

    # construction helpers
    @classmethod
    def one(cls, n):
        return cls(n, {0: 1})

    @classmethod
    def generator(cls, i, n):
        return cls(n, {MultiIndex.of([i], n).bits: 1})

    @classmethod
    def monomial(cls, indices, n, coeff=1):
        """Signed monomial ``coeff * dθ_{i1} ^ dθ_{i2} ^ ...`` in the given order."""
        out = cls.one(n) * coeff
        for i in indices:
            out = out.wedge(cls.generator(i, n))
        return out

    @property
    def coeffs(self) -> dict[int, object]:
        return dict(self._coeffs)

    def terms(self):
        return [(MultiIndex(b, self.n), c) for b, c in self._coeffs.items()]

    def coefficient(self, bits) -> object:
        bits = bits.bits if isinstance(bits, MultiIndex) else bits
        return self._coeffs.get(bits, 0)

    def degrees(self) -> set[int]:
        return {bin(b).count("1") for b in self._coeffs}

    def is_zero(self) -> bool:
        return not self._coeffs

    def _same(self, other):
        if not isinstance(other, ExtElement):
            raise TypeError(f"expected an exterior algebra element, got {type(other).__name__}")
        if other.n != self.n:
            raise DimensionError(f"generator counts differ: {self.n} vs {other.n}")

    def _result_type(self, other=None):
        if isinstance(self, ExtClassQ) or isinstance(other, ExtClassQ):
            return ExtClassQ
        return ExtElement

    def __add__(self, other):
        self._same(other)
        merged = dict(self._coeffs)
        for b, c in other._coeffs.items():
            merged[b] = merged.get(b, 0) + c
        return self._result_type(other)(self.n, merged)

    def __neg__(self):
        return type(self)(self.n, {b: -c for b, c in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, ExtElement):
            return self.wedge(scalar)
        if isinstance(scalar, Fraction) and scalar.denominator != 1 and not isinstance(self, ExtClassQ):
            return ExtClassQ(self.n, {b: c * scalar for b, c in self._coeffs.items()})
        return type(self)(self.n, {b: c * scalar for b, c in self._coeffs.items()})

    __rmul__ = __mul__

    def wedge(self, other: "ExtElement") -> "ExtElement":
        """Graded-commutative product with shuffle signs."""
        self._same(other)
        if not self._coeffs or not other._coeffs:
            return self._result_type(other)(self.n)
        a_masks = list(self._coeffs)
        b_masks = list(other._coeffs)
        signs = kernels.wedge_sign_table(a_masks, b_masks)
        out: dict[int, object] = {}
        for i, (a, ca) in enumerate(self._coeffs.items()):
            for j, (b, cb) in enumerate(other._coeffs.items()):
                sign = int(signs[i, j])
                if sign:
                    out[a | b] = out.get(a | b, 0) + sign * ca * cb
        return self._result_type(other)(self.n, out)

    __xor__ = wedge

    def __eq__(self, other):
        if not isinstance(other, ExtElement):
            return NotImplemented
        return self.n == other.n and self._coeffs == other._coeffs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, tuple(self._coeffs.items())))
        return self._hash

    def coordinates(self, basis: list[int]) -> list:
        """Coefficients on the listed monomials; raises if support escapes them."""
        index = {b: i for i, b in enumerate(basis)}
        vec = [0] * len(basis)
        for b, c in self._coeffs.items():
            if b not in index:
                raise DimensionError(f"monomial {mask_indices(b)} outside the coordinate basis")
            vec[index[b]] = c
        return vec

    @classmethod
    def from_coordinates(cls, n, basis, vec):
        return cls(n, {b: c for b, c in zip(basis, vec)})

    def to_json(self):
        return [
            {"theta": list(mask_indices(b)), "coeff": str(c)}
            for b, c in self._coeffs.items()
        ]

    def __repr__(self):
        if not self._coeffs:
            return "0"
        parts = []
        for b, c in self._coeffs.items():
            name = "^".join(f"dθ{i}" for i in mask_indices(b)) or "1"
            parts.append(f"{c}*{name}")
        return " + ".join(parts)


class ExtClassQ(ExtElement):
    """Exterior algebra element with rational coefficients (Chern characters)."""

    __slots__ = ()

    @staticmethod
    def _coerce(value):
        if isinstance(value, (int, np.integer, Fraction)):
            return Fraction(value)
        raise TypeError(f"unsupported coefficient {value!r}")

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self._coeffs.values())

    def to_integral(self) -> ExtElement:
        if not self.is_integral():
            raise ValueError(f"{self!r} has non-integral coefficients")
        return ExtElement(self.n, {b: int(c) for b, c in self._coeffs.items()})

    @classmethod
    def from_element(cls, x: ExtElement) -> "ExtClassQ":
        return cls(x.n, x.coeffs)


def exp_wedge(x: ExtElement) -> ExtClassQ:
    """``Σ x^j / j!``; terminates by nilpotence when ``x`` has no degree-0 part."""
    if x.coefficient(0):
        raise ValueError("exp of an element with a scalar part does not truncate")
    total = ExtClassQ.one(x.n)
    power = ExtClassQ.one(x.n)
    j = 0
    while True:
        j += 1
        power = power.wedge(x) * Fraction(1, j)
        if power.is_zero():
            return total
        total = total + power


# ---------------------------------------------------------------------------
# integer matrices


def int_matrix(rows, shape=None) -> np.ndarray:
    """Object-dtype matrix of Python ints."""
    arr = np.array(rows, dtype=object)
    if shape is not None:
        arr = arr.reshape(shape)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else np.zeros((0, 0), dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = int(v)
    return out


def identity(n) -> np.ndarray:
    out = np.zeros((n, n), dtype=object)
    for i in range(n):
        out[i, i] = 1
    for idx in np.ndindex(out.shape):
        out[idx] = int(out[idx])
    return out


def int_det(m) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    a = [[int(v) for v in row] for row in np.asarray(m, dtype=object)]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k]:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def unimodular_inverse(U) -> np.ndarray:
    """Exact inverse of a unimodular integer matrix (Gauss-Jordan over Q)."""
    U = np.asarray(U, dtype=object)
    n = U.shape[0]
    if U.shape != (n, n):
        raise DimensionError("unimodular_inverse expects a square matrix")
    if abs(int_det(U)) != 1:
        raise ValueError("matrix is not unimodular")
    A = [[Fraction(int(U[i, j])) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for c in range(n):
        p = next(r for r in range(c, n) if A[r][c])
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [x / piv for x in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return int_matrix([[int(x) for x in row[n:]] for row in A], (n, n)) if n else np.zeros((0, 0), dtype=object)


@dataclass(frozen=True)
class SmithForm:
    U: np.ndarray
    D: np.ndarray
    V: np.ndarray

    @property
    def diagonal(self) -> list[int]:
        return [int(self.D[i, i]) for i in range(min(self.D.shape))]

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d)

    @property
    def invariant_factors(self) -> list[int]:
        return [d for d in self.diagonal if d]

    def __iter__(self):
        return iter((self.U, self.D, self.V))


def smith_normal_form(M) -> SmithForm:
    """Return unimodular ``U, V`` and diagonal ``D = U M V`` with d1 | d2 | ..."""
    A = [[int(v) for v in row] for row in np.asarray(M, dtype=object)]
    rows = len(A)
    cols = len(A[0]) if rows else np.asarray(M).shape[1] if np.asarray(M).ndim == 2 else 0
    U = [[int(i == j) for j in range(rows)] for i in range(rows)]
    V = [[int(i == j) for j in range(cols)] for i in range(cols)]

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):  # row_dst -= q * row_src
        if q:
            A[dst] = [a - q * b for a, b in zip(A[dst], A[src])]
            U[dst] = [a - q * b for a, b in zip(U[dst], U[src])]

    def add_col(dst, src, q):  # col_dst -= q * col_src
        if q:
            for row in A:
                row[dst] -= q * row[src]
            for row in V:
                row[dst] -= q * row[src]

    for t in range(min(rows, cols)):
        while True:
            pivot = None
            for i in range(t, rows):
                for j in range(t, cols):
                    if A[i][j] and (pivot is None or abs(A[i][j]) < abs(A[pivot[0]][pivot[1]])):
                        pivot = (i, j)
            if pivot is None:
                break
            swap_rows(t, pivot[0])
            swap_cols(t, pivot[1])
            p = A[t][t]
            done = True
            for i in range(t + 1, rows):
                add_row(i, t, A[i][t] // p)
                if A[i][t]:
                    done = False
            for j in range(t + 1, cols):
                add_col(j, t, A[t][j] // p)
                if A[t][j]:
                    done = False
            if not done:
                continue
            # pivot must divide the whole remaining block
            bad = next(
                ((i, j) for i in range(t + 1, rows) for j in range(t + 1, cols) if A[i][j] % p),
                None,
            )
            if bad is None:
                break
            A[t] = [a + b for a, b in zip(A[t], A[bad[0]])]
            U[t] = [a + b for a, b in zip(U[t], U[bad[0]])]
        if t < rows and t < cols and A[t][t] < 0:
            A[t] = [-a for a in A[t]]
            U[t] = [-a for a in U[t]]

    return SmithForm(
        int_matrix(U, (rows, rows)) if rows else np.zeros((0, 0), dtype=object),
        int_matrix(A, (rows, cols)) if rows and cols else np.zeros((rows, cols), dtype=object),
        int_matrix(V, (cols, cols)) if cols else np.zeros((0, 0), dtype=object),
    )


def hermite_normal_form(vectors) -> list[list[int]]:
    """Row-style HNF of the lattice spanned by ``vectors`` (a list of rows).

    Rows are in echelon form with positive pivots, entries above each pivot
    reduced into ``[0, pivot)``; zero rows are dropped.
    """
    A = [[int(v) for v in row] for row in vectors]
    if not A:
        return []
    width = len(A[0])
    out = []
    r = 0
    for c in range(width):
        while True:
            nz = [i for i in range(r, len(A)) if A[i][c]]
            if not nz:
                break
            i_min = min(nz, key=lambda i: abs(A[i][c]))
            A[r], A[i_min] = A[i_min], A[r]
            if len(nz) == 1:
                break
            for i in range(r + 1, len(A)):
                if A[i][c]:
                    q = A[i][c] // A[r][c]
                    A[i] = [a - q * b for a, b in zip(A[i], A[r])]
        if r < len(A) and A[r][c]:
            if A[r][c] < 0:
                A[r] = [-a for a in A[r]]
            for i in range(r):
                q = A[i][c] // A[r][c]
                A[i] = [a - q * b for a, b in zip(A[i], A[r])]
            r += 1
        if r == len(A):
            break
    out = [row for row in A[:r] if any(row)]
    return out


def reduce_modulo(vec, hnf_rows) -> list[int]:
    """Canonical representative of ``vec`` modulo the lattice of ``hnf_rows``."""
    v = [int(x) for x in vec]
    for row in hnf_rows:
        c = next(i for i, x in enumerate(row) if x)
        q = v[c] // row[c]
        if q:
            v = [a - q * b for a, b in zip(v, row)]
    return v


def lattice_contains(vec, hnf_rows) -> bool:
    return not any(reduce_modulo(vec, hnf_rows))


def matrix_rank(M) -> int:
    M = np.asarray(M, dtype=object)
    if M.size == 0:
        return 0
    return smith_normal_form(M).rank


@dataclass(frozen=True)
class AbelianGroup:
    """``Z^free_rank ⊕ Z/d_1 ⊕ ... ⊕ Z/d_k`` with ``d_1 | d_2 | ...`` all >= 2."""

    free_rank: int
    invariant_factors: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "invariant_factors", tuple(int(d) for d in self.invariant_factors))
        if self.free_rank < 0:
            raise ValueError("free rank must be non-negative")
        for d in self.invariant_factors:
            if d < 2:
                raise ValueError(f"invariant factor {d} < 2")
        for a, b in zip(self.invariant_factors, self.invariant_factors[1:]):
            if b % a:
                raise ValueError(f"invariant factors {self.invariant_factors} are not a divisibility chain")

    @classmethod
    def from_cyclic_orders(cls, free_rank, orders):
        """Normalize any list of cyclic orders (1s dropped) into invariant factors."""
        orders = [abs(int(d)) for d in orders if abs(int(d)) > 1]
        if not orders:
            return cls(free_rank)
        diag = int_matrix([[orders[i] if i == j else 0 for j in range(len(orders))] for i in range(len(orders))])
        factors = [d for d in smith_normal_form(diag).invariant_factors if d > 1]
        return cls(free_rank, tuple(factors))

    def __add__(self, other):
        return AbelianGroup.from_cyclic_orders(
            self.free_rank + other.free_rank, self.invariant_factors + other.invariant_factors
        )

    @property
    def torsion_order(self) -> int:
        out = 1
        for d in self.invariant_factors:
            out *= d
        return out

    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.invariant_factors

    def to_json(self):
        return {"free_rank": self.free_rank, "invariant_factors": list(self.invariant_factors)}

    def __str__(self):
        parts = []
        if self.free_rank:
            parts.append("Z" if self.free_rank == 1 else f"Z^{self.free_rank}")
        parts += [f"Z/{d}" for d in self.invariant_factors]
        return " + ".join(parts) or "0"


def quotient_group(ambient_rank: int, sublattice) -> AbelianGroup:
    """Structure of ``Z^ambient_rank / span(columns of sublattice)``."""
    sub = np.asarray(sublattice, dtype=object)
    if sub.size == 0:
        return AbelianGroup(ambient_rank)
    if sub.ndim != 2 or sub.shape[0] != ambient_rank:
        raise DimensionError(f"sublattice columns have length {sub.shape[0]}, ambient rank is {ambient_rank}")
    snf = smith_normal_form(sub)
    factors = snf.invariant_factors
    return AbelianGroup(ambient_rank - len(factors), tuple(d for d in factors if d > 1))


def kernel_lattice(M) -> np.ndarray:
    """Saturated integer basis (as columns) of ``{x : M x = 0}``.

    The basis is put in Hermite form so the output is canonical.
    """
    M = np.asarray(M, dtype=object)
    if M.ndim != 2:
        raise DimensionError("kernel_lattice expects a 2-d matrix")
    cols = M.shape[1]
    if M.shape[0] == 0:
        basis = [[int(i == j) for j in range(cols)] for i in range(cols)]
    else:
        snf = smith_normal_form(M)
        V = snf.V
        basis = [[int(V[i, j]) for i in range(cols)] for j in range(snf.rank, cols)]
    rows = hermite_normal_form(basis)
    if not rows:
        return np.zeros((cols, 0), dtype=object)
    return int_matrix(rows).T.copy()


def wedge_matrix(left: ExtElement, source: list[int], target: list[int]) -> np.ndarray:
    """Matrix of ``x -> left ^ x`` from span(source) into span(target)."""
    n = left.n
    cols = []
    for b in source:
        image = left.wedge(ExtElement(n, {b: 1}))
        cols.append(image.coordinates(target))
    if not cols:
        return np.zeros((len(target), 0), dtype=object)
    return int_matrix(cols).T.copy() if target else np.zeros((0, len(source)), dtype=object)
