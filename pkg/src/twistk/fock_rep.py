"""Truncated spinor ⊗ charged boson Fock spaces and their mode operators.

States are kept in an unnormalized monomial basis so that every mode
operator is a matrix of Gaussian integers:

* fermions: ``ψ_n`` (``n > 0``) creates mode ``n`` with a Jordan-Wigner sign,
  ``ψ_{-n}`` removes it with weight 2, so ``{ψ_n, ψ_{-n}} = 2``;
* bosons: ``e_k`` (``k > 0``) raises the occupation of mode ``k`` with weight 1
  and ``e_{-k}`` lowers it with weight ``k·m_k``, so ``[e_k, e_{-k}] = -k``;
* ``e_0`` is the charge and ``S`` raises it by one.

The monomial of occupation data has squared norm ``2^j ∏ k^{m_k} m_k!``;
``ExactOperator.to_float`` conjugates by the square root of that diagonal to
get matrices in the orthonormal basis, where ``ψ_n† = ψ_{-n}`` and
``e_n† = e_{-n}``.

The full space is ``charge factor ⊗ core`` with the charge index slowest and
the core ordered by energy, so every conserved-quantity sector is one
contiguous block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product

import numpy as np
import scipy.sparse as sp

from . import kernels


class ModeRangeError(ValueError):
    """Requested mode lies outside the retained range ``|n| <= mode_max``."""


class VariantError(ValueError):
    """Operator does not exist in this variant of the module."""


@dataclass(frozen=True)
class TruncationParams:
    """Energy cutoff ``L``, charge window ``|m| <= C`` and largest retained mode.

    ``mode_max`` defaults to ``L``; with that choice the supercharges preserve
    the truncated space exactly.
    """

    L: int
    C: int
    mode_max: int | None = None

    def __post_init__(self):
        if self.L < 0:
            raise ValueError(f"cutoff L must be >= 0, got {self.L}")
        if self.C < 0:
            raise ValueError(f"charge window C must be >= 0, got {self.C}")
        if self.mode_max is None:
            object.__setattr__(self, "mode_max", self.L)
        if not 0 <= self.mode_max <= self.L:
            raise ValueError(f"mode_max must lie in [0, L], got {self.mode_max}")


# ---------------------------------------------------------------------------
# basis enumeration


def _strict_partitions(max_energy, max_part):
    """Fermion occupation masks (bit ``n-1`` = mode ``n``) with their energies."""
    out = []
    for mask in range(1 << max_part):
        e = sum(i + 1 for i in range(max_part) if mask >> i & 1)
        if e <= max_energy:
            out.append((mask, e))
    return out


def _partitions(max_energy, max_part):
    """Boson occupation tuples ``(m_1, ..., m_max_part)`` with their energies."""
    out = []

    def rec(k, remaining, occ):
        if k > max_part:
            out.append((tuple(occ), max_energy - remaining))
            return
        for m in range(remaining // k + 1):
            occ.append(m)
            rec(k + 1, remaining - m * k, occ)
            occ.pop()

    rec(1, max_energy, [])
    return out


def _boson_norm2(occ):
    out = 1
    for k, m in enumerate(occ, start=1):
        out *= k**m * math.factorial(m)
    return out


@dataclass(frozen=True)
class SpinorBasisState:
    excitations: tuple[int, ...] | tuple[tuple[int, ...], tuple[int, ...]]
    vacuum_label: str


@dataclass(frozen=True)
class BosonBasisState:
    charge: int
    occupation: tuple[int, ...]


class FockBasis:
    """Indexed product basis of the truncated module.

    ``variant="odd"``: one Clifford family and one charged boson.
    ``variant="even"``: two families on a two-dimensional vacuum and two
    charged bosons ``e`` and ``f``.
    """

    def __init__(self, trunc: TruncationParams, variant: str):
        if variant not in ("odd", "even"):
            raise ValueError(f"variant must be 'odd' or 'even', got {variant!r}")
        self.trunc = trunc
        self.variant = variant
        L, C = trunc.L, trunc.C
        charges = list(range(-C, C + 1))
        if variant == "odd":
            self.charges = [(m,) for m in charges]
            self.core = self._odd_core(L)
        else:
            self.charges = list(product(charges, charges))
            self.core = self._even_core(L)
        self.core_index = {state: i for i, state in enumerate(self.core)}

    @staticmethod
    def _odd_core(L):
        fermions = _strict_partitions(L, L)
        bosons = _partitions(L, L)
        states = [
            (ef + eb, fm, occ)
            for (fm, ef), (occ, eb) in product(fermions, bosons)
            if ef + eb <= L
        ]
        states.sort(key=lambda s: (s[0], s[1], s[2]))
        return [(fm, occ) for _, fm, occ in states]

    @staticmethod
    def _even_core(L):
        # family-i fermion of mode n sits on bit 2(n-1)+i
        fam = {0: _strict_partitions(L, L), 1: _strict_partitions(L, L)}
        bosons = _partitions(L, L)
        spread = lambda mask, i: sum(1 << (2 * b + i) for b in range(L) if mask >> b & 1)
        states = []
        for (f0, e0), (f1, e1) in product(fam[0], fam[1]):
            if e0 + e1 > L:
                continue
            fmask = spread(f0, 0) | spread(f1, 1)
            for (eo, be), (fo, bf) in product(bosons, bosons):
                E0, E1 = e0 + be, e1 + bf
                if E0 + E1 <= L:
                    for vac in (0, 1):
                        states.append(((E0, E1), vac, fmask, eo, fo))
        states.sort()
        return [(vac, fmask, eo, fo) for _, vac, fmask, eo, fo in states]

    # --- per core state data

    @cached_property
    def core_energy_split(self) -> np.ndarray:
        """Per core state: ``(E,)`` for odd, ``(E0, E1)`` for even."""
        L = self.trunc.L
        rows = []
        for state in self.core:
            if self.variant == "odd":
                fm, occ = state
                rows.append((sum(i + 1 for i in range(L) if fm >> i & 1) + _energy(occ),))
            else:
                vac, fm, eo, fo = state
                e0 = sum(b // 2 + 1 for b in range(2 * L) if fm >> b & 1 and b % 2 == 0)
                e1 = sum(b // 2 + 1 for b in range(2 * L) if fm >> b & 1 and b % 2 == 1)
                rows.append((e0 + _energy(eo), e1 + _energy(fo)))
        return np.array(rows, dtype=np.int64).reshape(len(self.core), -1)

    @cached_property
    def core_energy(self) -> np.ndarray:
        return self.core_energy_split.sum(axis=1)

    @cached_property
    def core_fermion_count(self) -> np.ndarray:
        idx = 0 if self.variant == "odd" else 1
        return np.array([bin(s[idx]).count("1") for s in self.core], dtype=np.int64)

    @cached_property
    def core_fermion_energy(self) -> np.ndarray:
        L = self.trunc.L
        out = []
        for s in self.core:
            fm = s[0] if self.variant == "odd" else s[1]
            if self.variant == "odd":
                out.append(sum(i + 1 for i in range(L) if fm >> i & 1))
            else:
                out.append(sum(b // 2 + 1 for b in range(2 * L) if fm >> b & 1))
        return np.array(out, dtype=np.int64)

    @cached_property
    def core_norm2(self) -> np.ndarray:
        out = []
        for s in self.core:
            if self.variant == "odd":
                fm, occ = s
                out.append(2 ** bin(fm).count("1") * _boson_norm2(occ))
            else:
                _, fm, eo, fo = s
                out.append(2 ** bin(fm).count("1") * _boson_norm2(eo) * _boson_norm2(fo))
        return np.array(out, dtype=np.int64)

    # --- full space

    @property
    def core_dim(self) -> int:
        return len(self.core)

    @property
    def dim(self) -> int:
        return len(self.charges) * len(self.core)

    def __len__(self):
        return self.dim

    @cached_property
    def norm2(self) -> np.ndarray:
        return np.tile(self.core_norm2, len(self.charges))

    @cached_property
    def energy(self) -> np.ndarray:
        return np.tile(self.core_energy, len(self.charges))

    @cached_property
    def charge(self) -> np.ndarray:
        """Charge per basis state, shape ``(dim, 1)`` or ``(dim, 2)``."""
        return np.repeat(np.array(self.charges, dtype=np.int64), len(self.core), axis=0)

    def index(self, charge, core_state) -> int:
        charge = tuple(charge) if not isinstance(charge, int) else (charge,)
        return self.charges.index(charge) * len(self.core) + self.core_index[core_state]

    def vacuum_index(self, charge=0, vacuum=0) -> int:
        L = self.trunc.L
        if self.variant == "odd":
            return self.index((charge,), (0, (0,) * L))
        charge = (charge, 0) if isinstance(charge, int) else tuple(charge)
        return self.index(charge, (vacuum, 0, (0,) * L, (0,) * L))

    @cached_property
    def sectors(self) -> list[tuple[tuple[int, ...], slice]]:
        """Contiguous blocks ``(label, slice)`` of conserved charge and energy.

        Labels are ``(m, E)`` for odd and ``(m_e, m_f, E0, E1)`` for even.
        """
        out = []
        split = [tuple(r) for r in self.core_energy_split.tolist()]
        core_blocks = []
        start = 0
        for i in range(1, len(split) + 1):
            if i == len(split) or split[i] != split[start]:
                core_blocks.append((split[start], start, i))
                start = i
        n = len(self.core)
        for ci, charge in enumerate(self.charges):
            for energy, a, b in core_blocks:
                out.append((tuple(charge) + energy, slice(ci * n + a, ci * n + b)))
        return out

    def interior(self, margin: int, charge_floor: bool = False, which: int | None = None) -> np.ndarray:
        """Mask of states with energy ``<= L - margin``.

        ``charge_floor`` also drops the lowest charge (where ``S^-1`` leaves the
        window); ``which`` selects the ``e`` (0) or ``f`` (1) charge for even.
        """
        mask = self.energy <= self.trunc.L - margin
        if charge_floor:
            col = 0 if which is None else which
            mask &= self.charge[:, col] > -self.trunc.C
        return mask

    def label(self, i: int) -> str:
        n = len(self.core)
        charge, state = self.charges[i // n], self.core[i % n]
        if self.variant == "odd":
            fm, occ = state
            ex = [j + 1 for j in range(self.trunc.L) if fm >> j & 1]
            return f"m={charge[0]} psi{ex} bos{list(occ)}"
        vac, fm, eo, fo = state
        ex0 = [b // 2 + 1 for b in range(2 * self.trunc.L) if fm >> b & 1 and b % 2 == 0]
        ex1 = [b // 2 + 1 for b in range(2 * self.trunc.L) if fm >> b & 1 and b % 2 == 1]
        return f"m=({charge[0]},{charge[1]}) eta{vac + 1} psi0{ex0} psi1{ex1} e{list(eo)} f{list(fo)}"

    def spinor_state(self, i: int) -> SpinorBasisState:
        state = self.core[i % len(self.core)]
        L = self.trunc.L
        if self.variant == "odd":
            return SpinorBasisState(tuple(j + 1 for j in range(L) if state[0] >> j & 1), "eta")
        fm = state[1]
        fam = tuple(tuple(b // 2 + 1 for b in range(2 * L) if fm >> b & 1 and b % 2 == f) for f in (0, 1))
        return SpinorBasisState(fam, f"eta{state[0] + 1}")

    def boson_state(self, i: int, factor: int = 0) -> BosonBasisState:
        state = self.core[i % len(self.core)]
        charge = self.charges[i // len(self.core)][factor]
        occ = state[1] if self.variant == "odd" else state[2 + factor]
        return BosonBasisState(charge, occ)


def _energy(occ):
    return sum(k * m for k, m in enumerate(occ, start=1))


@lru_cache(maxsize=16)
def build_basis(trunc: TruncationParams, variant: str) -> FockBasis:
    return FockBasis(trunc, variant)


# ---------------------------------------------------------------------------
# exact operators


class ExactOperator:
    """Gaussian-integer matrix ``re + i·im`` in the monomial basis."""

    __slots__ = ("re", "im", "basis")

    def __init__(self, re, im=None, basis: FockBasis | None = None):
        self.re = sp.csr_matrix(re, dtype=np.int64)
        self.im = sp.csr_matrix(self.re.shape, dtype=np.int64) if im is None else sp.csr_matrix(im, dtype=np.int64)
        self.basis = basis

    @property
    def shape(self):
        return self.re.shape

    def _wrap(self, re, im):
        return ExactOperator(re, im, self.basis)

    def __add__(self, other):
        return self._wrap(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return self._wrap(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return self._wrap(-self.re, -self.im)

    def __matmul__(self, other):
        return self._wrap(
            self.re @ other.re - self.im @ other.im, self.re @ other.im + self.im @ other.re
        )

    def __mul__(self, c):
        c = complex(c)
        a, b = int(c.real), int(c.imag)
        if a != c.real or b != c.imag:
            raise TypeError("exact operators only scale by Gaussian integers")
        return self._wrap(a * self.re - b * self.im, a * self.im + b * self.re)

    __rmul__ = __mul__

    def max_abs(self, columns: np.ndarray | None = None) -> int:
        """Largest entry magnitude (``max(|re|, |im|)``) over the selected columns."""
        out = 0
        for part in (self.re, self.im):
            m = part if columns is None else part[:, np.flatnonzero(columns)]
            if m.nnz:
                out = max(out, int(abs(m).max()))
        return out

    def is_zero(self, columns=None) -> bool:
        return self.max_abs(columns) == 0

    def to_float(self) -> sp.csr_matrix:
        """Complex matrix in the orthonormal basis: ``N M N^-1``."""
        if self.basis is None:
            raise ValueError("orthonormalization needs the basis norms")
        nrm = np.sqrt(self.basis.norm2.astype(float))
        D, Dinv = sp.diags(nrm), sp.diags(1.0 / nrm)
        m = self.re.astype(complex) + 1j * self.im.astype(complex)
        return sp.csr_matrix(D @ m @ Dinv)


def is_adjoint_pair(A: ExactOperator, B: ExactOperator) -> bool:
    """Exact test of ``A† = B`` in the orthonormal basis."""
    return _adjoint_violation(A, B).is_zero()


def _identity(basis):
    return ExactOperator(sp.identity(basis.dim, dtype=np.int64, format="csr"), None, basis)


def _core_matrix(basis: FockBasis, action):
    """Sparse Gaussian-integer core matrix from ``action(i, state) -> [(j, re, im)]``."""
    n = basis.core_dim
    rows, cols, re, im = [], [], [], []
    for i, state in enumerate(basis.core):
        for j, a, b in action(i, state):
            rows.append(j)
            cols.append(i)
            re.append(a)
            im.append(b)
    R = sp.csr_matrix((re, (rows, cols)), shape=(n, n), dtype=np.int64)
    I = sp.csr_matrix((im, (rows, cols)), shape=(n, n), dtype=np.int64)
    R.eliminate_zeros()
    I.eliminate_zeros()
    return R, I


def _lift_core(basis, R, I):
    eye = sp.identity(len(basis.charges), dtype=np.int64, format="csr")
    return ExactOperator(sp.kron(eye, R, format="csr"), sp.kron(eye, I, format="csr"), basis)


def _charge_factor_ops(basis, which):
    """``(e0, S)`` on the charge factor for boson ``which`` (0 = e, 1 = f)."""
    C = basis.trunc.C
    m = np.arange(-C, C + 1)
    e0 = sp.diags(m).astype(np.int64)
    S = sp.diags(np.ones(2 * C, dtype=np.int64), -1, shape=(2 * C + 1, 2 * C + 1)).astype(np.int64)
    eye = sp.identity(2 * C + 1, dtype=np.int64)
    if basis.variant == "odd":
        return e0, S
    if which == 0:
        return sp.kron(e0, eye), sp.kron(S, eye)
    return sp.kron(eye, e0), sp.kron(eye, S)


def _lift_charge(basis, op):
    core_eye = sp.identity(basis.core_dim, dtype=np.int64)
    return ExactOperator(sp.kron(op, core_eye, format="csr"), None, basis)


def _fermion_bit(basis, n, family):
    k = abs(n)
    if basis.variant == "odd":
        return k - 1
    return 2 * (k - 1) + family


def _fermion_op(basis: FockBasis, n: int, family: int):
    L = basis.trunc.L
    fidx = 0 if basis.variant == "odd" else 1
    masks = np.array([s[fidx] for s in basis.core], dtype=np.int64)
    if n == 0:
        parity = np.array([(-1) ** bin(int(m)).count("1") for m in masks], dtype=np.int64)
        if basis.variant == "odd":
            R = sp.diags(parity).astype(np.int64)
            return _lift_core(basis, R, sp.csr_matrix(R.shape, dtype=np.int64))

        def act(i, state):
            vac, fm, eo, fo = state
            j = basis.core_index[(1 - vac, fm, eo, fo)]
            if family == 0:  # σx
                return [(j, int(parity[i]), 0)]
            # σy: η1 -> iη2, η2 -> -iη1
            return [(j, 0, int(parity[i]) * (1 if vac == 0 else -1))]

        return _lift_core(basis, *_core_matrix(basis, act))

    bit = _fermion_bit(basis, n, family)
    create = n > 0
    weight = 1 if create else 2
    new, signs = kernels.fermion_ladder(masks, bit, create)

    def act(i, state):
        if not signs[i]:
            return []
        state2 = list(state)
        state2[fidx] = int(new[i])
        j = basis.core_index.get(tuple(state2))
        if j is None:  # leaves the energy window
            return []
        return [(j, weight * int(signs[i]), 0)]

    return _lift_core(basis, *_core_matrix(basis, act))


def _boson_op(basis: FockBasis, n: int, which: int):
    if n == 0:
        e0, _ = _charge_factor_ops(basis, which)
        return _lift_charge(basis, e0)
    pos = 1 if basis.variant == "odd" else 2 + which
    k = abs(n)

    def act(i, state):
        occ = list(state[pos])
        if n > 0:
            occ[k - 1] += 1
            coeff = 1
        else:
            if not occ[k - 1]:
                return []
            coeff = k * occ[k - 1]
            occ[k - 1] -= 1
        state2 = list(state)
        state2[pos] = tuple(occ)
        j = basis.core_index.get(tuple(state2))
        return [] if j is None else [(j, coeff, 0)]

    return _lift_core(basis, *_core_matrix(basis, act))


@lru_cache(maxsize=4096)
def _mode_operator_cached(basis: FockBasis, name: str, n: int) -> ExactOperator:
    odd = basis.variant == "odd"
    if name in ("psi0", "psi1") and odd:
        raise VariantError(f"{name} exists only in the even module; use 'psi'")
    if name == "psi" and not odd:
        raise VariantError("the even module has two families; use 'psi0' or 'psi1'")
    if name in ("f", "S_f", "f0") and odd:
        raise VariantError(f"{name} exists only in the even module")
    if name == "S" and not odd:
        raise VariantError("the even module has two shifts; use 'S_e' or 'S_f'")
    if name in ("psi", "psi0", "psi1", "e", "f") and abs(n) > basis.trunc.mode_max:
        raise ModeRangeError(f"mode {n} outside |n| <= {basis.trunc.mode_max}")

    if name == "psi":
        return _fermion_op(basis, n, 0)
    if name in ("psi0", "psi1"):
        return _fermion_op(basis, n, int(name[-1]))
    if name in ("e", "f"):
        return _boson_op(basis, n, 0 if name == "e" else 1)
    if name in ("e0", "N", "f0"):
        return _boson_op(basis, 0, 1 if name == "f0" else 0)
    if name in ("S", "S_e", "S_f"):
        _, S = _charge_factor_ops(basis, 1 if name == "S_f" else 0)
        return _lift_charge(basis, S)
    if name in ("Sinv", "S_e_inv", "S_f_inv"):
        base = {"Sinv": "S", "S_e_inv": "S_e", "S_f_inv": "S_f"}[name]
        S = _mode_operator_cached(basis, base, 0)
        return ExactOperator(S.re.T.tocsr(), S.im.T.tocsr(), basis)
    if name == "Gamma":
        return _grading_exact(basis)
    if name == "parity":
        if odd:
            return _fermion_op(basis, 0, 0)
        p = np.array([(-1) ** bin(s[1]).count("1") for s in basis.core], dtype=np.int64)
        return _lift_core(basis, sp.diags(p).astype(np.int64), sp.csr_matrix((basis.core_dim,) * 2, dtype=np.int64))
    raise ValueError(f"unknown operator {name!r}")


def mode_operator(basis: FockBasis, name: str, n: int = 0) -> ExactOperator:
    """Exact matrix of a named operator.

    Names: ``psi`` (odd), ``psi0``/``psi1`` (even families), ``e``, ``f``
    (even), ``e0``/``N``, ``f0``, ``S`` (odd), ``S_e``/``S_f`` (even), their
    inverses ``Sinv``/``S_e_inv``/``S_f_inv``, ``Gamma`` and ``parity``.
    ``S^-1`` is realized as ``S^T``, which inverts ``S`` away from the
    window's edge charges.
    """
    return _mode_operator_cached(basis, name, int(n))


def _grading_exact(basis: FockBasis) -> ExactOperator:
    if basis.variant != "even":
        raise VariantError("the chiral grading exists only on the even module")

    def act(i, state):
        vac, fm, _, _ = state
        sign = (1 if vac == 0 else -1) * (-1) ** bin(fm).count("1")
        return [(i, sign, 0)]

    return _lift_core(basis, *_core_matrix(basis, act))


# ---------------------------------------------------------------------------
# float operators


@dataclass
class OperatorMatrix:
    """Complex sparse matrix in the orthonormal basis of ``basis``."""

    matrix: sp.csr_matrix
    basis: FockBasis
    hermitian: bool = False
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        if self.matrix.shape != (self.basis.dim, self.basis.dim):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match basis dim {self.basis.dim}")
        if self.hermitian:
            err = abs(self.matrix - self.matrix.getH()).max() if self.matrix.nnz else 0.0
            if err > 1e-12:
                raise ValueError(f"operator flagged hermitian has |A - A^H| = {err:.3g}")

    @property
    def dim(self):
        return self.basis.dim

    def toarray(self):
        return self.matrix.toarray()

    def block(self, sl: slice) -> np.ndarray:
        return self.matrix[sl, sl].toarray()

    def blocks(self):
        """Dense diagonal blocks per sector (valid because the supercharges conserve them)."""
        return [(label, self.block(sl)) for label, sl in self.basis.sectors]

    def to_json(self):
        coo = self.matrix.tocoo()
        return {
            "label": self.label,
            "params": self.params,
            "dim": self.dim,
            "basis": [self.basis.label(i) for i in range(self.dim)],
            "entries": [
                [int(r), int(c), float(v.real), float(v.imag)]
                for r, c, v in zip(coo.row, coo.col, coo.data)
            ],
        }


def export_operator(op: OperatorMatrix, path: str) -> None:
    """Write ``op`` as JSON (``.json``) or as a NumPy archive (``.npz``)."""
    if str(path).endswith(".json"):
        with open(path, "w") as fh:
            json.dump(op.to_json(), fh)
        return
    coo = op.matrix.tocoo()
    np.savez(
        path,
        row=coo.row,
        col=coo.col,
        re=coo.data.real,
        im=coo.data.imag,
        dim=op.dim,
        labels=np.array([op.basis.label(i) for i in range(op.dim)]),
    )


@lru_cache(maxsize=16)
def _odd_parts(basis: FockBasis):
    """Exact kinetic part ``Σ_{k≠0} ψ_k e_{-k}``, ``ψ_0`` and ``e_0``."""
    M = basis.trunc.mode_max
    K = ExactOperator(sp.csr_matrix((basis.dim, basis.dim), dtype=np.int64), None, basis)
    for k in range(1, M + 1):
        K = K + mode_operator(basis, "psi", k) @ mode_operator(basis, "e", -k)
        # lowering factor first so no intermediate state leaves the window
        K = K + mode_operator(basis, "e", k) @ mode_operator(basis, "psi", -k)
    return K.to_float(), mode_operator(basis, "psi", 0).to_float(), mode_operator(basis, "e0").to_float()


@lru_cache(maxsize=16)
def _even_parts(basis: FockBasis):
    M = basis.trunc.mode_max
    K = ExactOperator(sp.csr_matrix((basis.dim, basis.dim), dtype=np.int64), None, basis)
    for k in range(1, M + 1):
        for fam, bos in (("psi0", "e"), ("psi1", "f")):
            K = K + mode_operator(basis, fam, k) @ mode_operator(basis, bos, -k)
            K = K + mode_operator(basis, bos, k) @ mode_operator(basis, fam, -k)
    return (
        K.to_float(),
        mode_operator(basis, "psi0", 0).to_float(),
        mode_operator(basis, "psi1", 0).to_float(),
        mode_operator(basis, "e0").to_float(),
        mode_operator(basis, "f0").to_float(),
    )


def odd_parts(trunc: TruncationParams):
    """``(K, ψ0, e0)`` float matrices with ``Q(φ) = K + ψ0 (e0 + φ/2π)``."""
    return _odd_parts(build_basis(trunc, "odd"))


def even_parts(trunc: TruncationParams):
    """``(K, ψ⁰0, ψ¹0, e0, f0)`` with ``Q^e = K + ψ⁰0(e0 + s/2π) + ψ¹0(f0 + φ/2π)``."""
    return _even_parts(build_basis(trunc, "even"))


def build_supercharge_odd(phi: float, trunc: TruncationParams, sign: int = 1) -> OperatorMatrix:
    """``Σ_k ψ_k e_{-k} + sign·(φ/2π)ψ_0`` (``sign=-1`` is the negative-flow variant).

    The ``k = 0`` term contributes ``ψ_0 e_0``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    basis = build_basis(trunc, "odd")
    K, psi0, e0 = _odd_parts(basis)
    shift = sign * phi / (2 * math.pi)
    Q = K + psi0 @ (e0 + shift * sp.identity(basis.dim))
    return OperatorMatrix(Q, basis, hermitian=True, label="Q_odd", params={"phi": phi, "sign": sign})


def build_supercharge_even(s: float, phi: float, trunc: TruncationParams, sign: int = 1) -> OperatorMatrix:
    """``Σ ψ⁰_k e_{-k} + Σ ψ¹_k f_{-k} + (s/2π)ψ⁰_0 + sign·(φ/2π)ψ¹_0``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    basis = build_basis(trunc, "even")
    K, p0, p1, e0, f0 = _even_parts(basis)
    eye = sp.identity(basis.dim)
    Q = K + p0 @ (e0 + s / (2 * math.pi) * eye) + p1 @ (f0 + sign * phi / (2 * math.pi) * eye)
    return OperatorMatrix(Q, basis, hermitian=True, label="Q_even", params={"s": s, "phi": phi, "sign": sign})


def grading_operator(trunc: TruncationParams) -> OperatorMatrix:
    """``Γ = -i ψ⁰_0 ψ¹_0 (-1)^f`` with ``f`` the number of nonzero-mode excitations."""
    basis = build_basis(trunc, "even")
    return OperatorMatrix(_grading_exact(basis).to_float(), basis, hermitian=True, label="Gamma")


def number_operators(basis: FockBasis):
    """Exact ``l_0`` operators built from mode products.

    Returns ``(l0s, l0e)`` for odd and ``(l, l0e, l0f)`` for even, with
    ``l0s = Σ n ψ_n ψ_{-n}`` and ``l0e = 2 Σ e_k e_{-k}``.
    """
    M = basis.trunc.mode_max
    zero = ExactOperator(sp.csr_matrix((basis.dim, basis.dim), dtype=np.int64), None, basis)
    fams = ["psi"] if basis.variant == "odd" else ["psi0", "psi1"]
    l = zero
    for fam in fams:
        for n in range(1, M + 1):
            l = l + (mode_operator(basis, fam, n) @ mode_operator(basis, fam, -n)) * n
    bos = ["e"] if basis.variant == "odd" else ["e", "f"]
    ls = []
    for b in bos:
        acc = zero
        for k in range(1, M + 1):
            acc = acc + (mode_operator(basis, b, k) @ mode_operator(basis, b, -k)) * 2
        ls.append(acc)
    return (l, *ls)


def _residual_margin(trunc):
    return 0 if trunc.mode_max == trunc.L else trunc.mode_max


def q_squared_residual_odd(phi: float, trunc: TruncationParams, sign: int = 1) -> float:
    """``max |Q² - (l0s + l0e + (e0 + φ/2π)²)|`` on interior columns.

    With ``mode_max = L`` the supercharge preserves the truncated space, so
    the interior is every state.
    """
    basis = build_basis(trunc, "odd")
    Q = build_supercharge_odd(phi, trunc, sign).matrix
    l0s, l0e = (x.to_float() for x in number_operators(basis))
    _, _, e0 = _odd_parts(basis)
    shifted = e0 + sign * phi / (2 * math.pi) * sp.identity(basis.dim)
    R = (Q @ Q - (l0s + l0e + shifted @ shifted)).tocsc()
    cols = np.flatnonzero(basis.interior(_residual_margin(trunc)))
    R = R[:, cols]
    return float(abs(R).max()) if R.nnz else 0.0


def q_squared_residual_even(s: float, phi: float, trunc: TruncationParams) -> float:
    """``max |Q^e² - (l + l0e + l0f + (e0 + s/2π)² + (f0 + φ/2π)²)|`` on interior columns."""
    basis = build_basis(trunc, "even")
    Q = build_supercharge_even(s, phi, trunc).matrix
    l, l0e, l0f = (x.to_float() for x in number_operators(basis))
    _, _, _, e0, f0 = _even_parts(basis)
    eye = sp.identity(basis.dim)
    a = e0 + s / (2 * math.pi) * eye
    b = f0 + phi / (2 * math.pi) * eye
    R = (Q @ Q - (l + l0e + l0f + a @ a + b @ b)).tocsc()
    cols = np.flatnonzero(basis.interior(_residual_margin(trunc)))
    R = R[:, cols]
    return float(abs(R).max()) if R.nnz else 0.0


# ---------------------------------------------------------------------------
# relation report


@dataclass
class RelationReport:
    variant: str
    trunc: TruncationParams
    violations: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v == 0 for v in self.violations.values())

    @property
    def max_violation(self) -> int:
        return max(self.violations.values(), default=0)

    def failures(self) -> dict[str, int]:
        return {k: v for k, v in self.violations.items() if v}

    def to_json(self):
        return {
            "variant": self.variant,
            "L": self.trunc.L,
            "C": self.trunc.C,
            "mode_max": self.trunc.mode_max,
            "checked": len(self.violations),
            "max_violation": self.max_violation,
            "ok": self.ok,
            "failures": self.failures(),
        }


def _anti(A, B):
    return A @ B + B @ A


def _comm(A, B):
    return A @ B - B @ A


def relation_check(trunc: TruncationParams, variant: str) -> RelationReport:
    """Exact (anti)commutation relations on interior columns.

    For a product of modes ``n`` and ``m`` the interior is the states with
    energy ``<= L - (|n| + |m|)``; relations with ``S^-1`` also drop the
    lowest charge. Every violation is an integer, so a clean report is
    exactly zero.
    """
    basis = build_basis(trunc, variant)
    M = trunc.mode_max
    I = _identity(basis)
    report = RelationReport(variant, trunc)
    modes = range(-M, M + 1)
    op = lambda name, n=0: mode_operator(basis, name, n)

    def record(key, X, margin, charge_floor=False, which=None):
        report.violations[key] = X.max_abs(basis.interior(margin, charge_floor, which))

    fams = ["psi"] if variant == "odd" else ["psi0", "psi1"]
    bosons = ["e"] if variant == "odd" else ["e", "f"]

    for fi, fa in enumerate(fams):
        for fj, fb in enumerate(fams):
            for n in modes:
                for m in modes:
                    delta = 2 if (fi == fj and n == -m) else 0
                    record(f"{{{fa}_{n},{fb}_{m}}}", _anti(op(fa, n), op(fb, m)) - I * delta, abs(n) + abs(m))
    for ba in bosons:
        for bb in bosons:
            for n in modes:
                for m in modes:
                    c = -n if (ba == bb and n == -m) else 0
                    record(f"[{ba}_{n},{bb}_{m}]", _comm(op(ba, n), op(bb, m)) - I * c, abs(n) + abs(m))
    for fa in fams:
        for b in bosons:
            for n in modes:
                for m in modes:
                    record(f"[{fa}_{n},{b}_{m}]", _comm(op(fa, n), op(b, m)), abs(n) + abs(m))
    for fa in fams:
        for n in modes:
            record(f"adj {fa}_{n}", _adjoint_violation(op(fa, n), op(fa, -n)), abs(n))
    for b in bosons:
        for n in modes:
            record(f"adj {b}_{n}", _adjoint_violation(op(b, n), op(b, -n)), abs(n))

    shifts = [("S", "Sinv", "e", 0)] if variant == "odd" else [("S_e", "S_e_inv", "e", 0), ("S_f", "S_f_inv", "f", 1)]
    for S_name, Sinv_name, b, which in shifts:
        S, Sinv = op(S_name), op(Sinv_name)
        for bb in bosons:
            for n in modes:
                target = op(bb, n)
                if n == 0 and bb == b:
                    target = target - I
                record(f"{S_name} {bb}_{n} {S_name}^-1", S @ op(bb, n) @ Sinv - target, abs(n), True, which)
        for fa in fams:
            for n in modes:
                record(f"{S_name} {fa}_{n} {S_name}^-1", S @ op(fa, n) @ Sinv - op(fa, n), abs(n), True, which)

    parity = op("parity")
    if variant == "odd":
        record("psi_0 = (-1)^#exc", op("psi", 0) - parity, 0)
    else:
        G = op("Gamma")
        record("Gamma^2 = 1", G @ G - I, 0)
        record("adj Gamma", _adjoint_violation(G, G), 0)
        record("Gamma = -i psi0_0 psi1_0 (-1)^f", G - (op("psi0", 0) @ op("psi1", 0) @ parity) * (-1j), 0)
        for fa in fams:
            for n in modes:
                record(f"{{Gamma,{fa}_{n}}}", _anti(G, op(fa, n)), abs(n))
    return report


def _adjoint_violation(A: ExactOperator, B: ExactOperator) -> ExactOperator:
    """``conj(A)^T N² - N² B`` as an exact operator (zero iff ``A† = B``)."""
    N2 = sp.diags(A.basis.norm2.astype(np.int64)).tocsr()
    re = A.re.T @ N2 - N2 @ B.re
    im = -(A.im.T @ N2) - N2 @ B.im
    return ExactOperator(re, im, A.basis)
