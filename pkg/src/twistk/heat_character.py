"""Heat-kernel supertrace densities, their localization, and index characters.

Densities are evaluated spectrally: each conserved sector is diagonalized
once per parameter value and the heat weights ``e^{-tμ²}`` are applied to the
eigenvalues. Curvature never enters matrix arithmetic; the Chern character of
the coefficient bundle is wedged on symbolically when the character is
assembled.

Calibration constants (``CONSTANTS``) fix the overall scale of the
two-parameter densities so that their total over the torus is the rank.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.special import erf

from .form_calculus import DPHI, DS, CurvatureData, FourierForm, chern_character, desuspend
from .fock_rep import (
    TruncationParams,
    build_basis,
    even_parts,
    grading_operator,
    odd_parts,
)
from .lattice_algebra import ExtClassQ
from .scalars import Scalar
from .spectral import FlowResult, odd_family

TWO_PI = 2 * math.pi

CONSTANTS = {
    "odd": {
        "value": 1 / TWO_PI,
        "derivation": "density (1/2π)·sqrt(t/π)·Str(e^{-tQ²}); the Gaussian in u = φ/2π integrates to 1",
    },
    "suspended": {
        "value": 1 / (2 * math.pi**2),
        "derivation": (
            "∫∫ t sin²s e^{-t cos²s} Σ_m e^{-t sin²s (m+φ/2π)²} dφ ds "
            "= 2π·sqrt(π t)·∫_{-1}^{1} e^{-t c²} dc = 2π² erf(sqrt t)"
        ),
    },
    "even": {
        "value": 1 / (8 * math.pi**3 * 1j),
        "derivation": (
            "Str(ψ⁰_0 ψ¹_0 e^{-tQ²}) = 2i·Σ e^{-t(m_e+s/2π)²} e^{-t(m_f+φ/2π)²}; "
            "each Gaussian sum integrates to 2π·sqrt(π/t)"
        ),
    },
}


def calibration(variant: str) -> complex:
    return CONSTANTS[variant]["value"]


# ---------------------------------------------------------------------------
# samples


def circle_grid(points: int) -> np.ndarray:
    """``points`` uniform nodes on ``[0, 2π)``."""
    if points < 1:
        raise ValueError("grid needs at least one point")
    return TWO_PI * np.arange(points) / points


def _as_grid(grid) -> np.ndarray:
    if np.isscalar(grid):
        return circle_grid(int(grid))
    return np.asarray(grid, dtype=float)


def _wrap(x, center):
    return (np.asarray(x) - center + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class DensitySample:
    """A density on a uniform periodic grid: ``(φ,)`` or ``(s, φ)``."""

    t: float
    grid: tuple[np.ndarray, ...]
    values: np.ndarray
    trunc: TruncationParams
    variant: str
    rank: int = 1

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")
        for axis in self.grid:
            steps = np.diff(axis)
            if axis.size > 1 and not np.allclose(steps, steps[0], rtol=0, atol=1e-12):
                raise ValueError("grid must be uniform")
        if not np.isfinite(self.values).all():
            raise ValueError("density values must be finite")
        if self.values.shape != tuple(a.size for a in self.grid):
            raise ValueError("values do not match the grid")

    @property
    def cell(self) -> float:
        """Area element of the periodic trapezoid rule."""
        return float(np.prod([TWO_PI / a.size for a in self.grid]))

    @property
    def total(self) -> float:
        return float(self.values.sum() * self.cell)

    @property
    def argmax(self) -> tuple[float, ...]:
        idx = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return tuple(float(a[i]) for a, i in zip(self.grid, idx))

    def summary(self, center=None, window=0.5) -> dict:
        stats = localization_stats(self, window, center)
        return {
            "variant": self.variant,
            "t": self.t,
            "rank": self.rank,
            "L": self.trunc.L,
            "C": self.trunc.C,
            "grid": [int(a.size) for a in self.grid],
            "total": stats.total,
            "argmax": list(self.argmax),
            "window": window,
            "window_mass": stats.in_window,
            "second_moment": stats.second_moment,
        }

    def to_csv(self, path) -> None:
        names = ["phi"] if len(self.grid) == 1 else ["s", "phi"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names + ["value"])
            for idx in np.ndindex(self.values.shape):
                coords = [repr(float(a[i])) for a, i in zip(self.grid, idx)]
                writer.writerow(coords + [repr(float(self.values[idx]))])


@dataclass(frozen=True)
class LocalizationStats:
    total: float
    in_window: float
    second_moment: float


def _default_center(variant):
    return {"odd": (0.0,), "suspended": (math.pi / 2, 0.0), "even": (0.0, 0.0)}.get(variant)


def localization_stats(d: DensitySample, window: float, center=None) -> LocalizationStats:
    """Trapezoidal total, fraction of mass within ``window`` of ``center``
    (per axis, wrapped on the circle), and the normalized second moment
    about ``center``."""
    center = center if center is not None else _default_center(d.variant)
    if center is None:
        center = (0.0,) * len(d.grid)
    dists = np.meshgrid(*[_wrap(a, c) for a, c in zip(d.grid, center)], indexing="ij")
    total = d.total
    inside = np.ones(d.values.shape, dtype=bool)
    for dist in dists:
        inside &= np.abs(dist) <= window + 1e-12
    r2 = sum(dist**2 for dist in dists)
    mass = float(d.values[inside].sum() * d.cell)
    moment = float((r2 * d.values).sum() * d.cell)
    return LocalizationStats(total, mass / total if total else 0.0, moment / total if total else 0.0)


# ---------------------------------------------------------------------------
# odd and suspended densities


@lru_cache(maxsize=8)
def _odd_heat_data(trunc: TruncationParams, phis: tuple[float, ...]):
    """Per φ: eigenvalues of ``Q(φ)`` and the ``ψ_0`` expectation of each eigenvector."""
    fam = odd_family(trunc)
    _, psi0, _ = odd_parts(trunc)
    off = psi0 - sp.diags(psi0.diagonal())
    if off.nnz and abs(off).max() > 0:
        raise ArithmeticError("ψ_0 is expected to be diagonal in the monomial basis")
    x = np.asarray(phis)
    mus, weights = [], []
    for (A, B), sl in zip(fam.pencils(), fam.sectors):
        # ψ_0 is the diagonal fermion parity, so its expectations are
        # parity-weighted squared moduli of the eigenvector entries
        parity = psi0[sl, sl].diagonal().real
        w, V = np.linalg.eigh(A[None] + x[:, None, None] * B[None])
        mus.append(w)
        weights.append(np.einsum("gij,i->gj", np.abs(V) ** 2, parity))
    return np.concatenate(mus, axis=1), np.concatenate(weights, axis=1)


def odd_supertrace(t: float, phis, trunc: TruncationParams) -> np.ndarray:
    """``Tr(ψ_0 e^{-tQ(φ)²})`` for each φ."""
    mu, w = _odd_heat_data(trunc, tuple(float(p) for p in _as_grid(phis)))
    return (np.exp(-t * mu**2) * w).sum(axis=1)


def odd_density(t: float, grid, trunc: TruncationParams, rank: int = 1) -> DensitySample:
    """``D_t(φ) = r·(1/2π)·sqrt(t/π)·Tr(ψ_0 e^{-tQ(φ)²})``."""
    if t <= 0:
        raise ValueError("t must be positive")
    phis = _as_grid(grid)
    values = rank * calibration("odd") * math.sqrt(t / math.pi) * odd_supertrace(t, phis, trunc)
    return DensitySample(float(t), (phis,), values, trunc, "odd", rank)


def gaussian_sum(t: float, x, terms: int | None = None) -> np.ndarray:
    """``Σ_m sqrt(t/π) e^{-t(m + x)²}`` summed until the tail is below double precision."""
    x = np.asarray(x, dtype=float)
    if terms is None:
        terms = int(math.ceil(7.0 / math.sqrt(t))) + 2
    m = np.arange(-terms, terms + 1)
    return math.sqrt(t / math.pi) * np.exp(-t * (m[:, None] + x.ravel()[None, :]) ** 2).sum(0).reshape(x.shape)


def poisson_sum(t: float, x, terms: int | None = None) -> np.ndarray:
    """The same sum in its dual form ``Σ_k e^{-π²k²/t} cos(2πkx)``."""
    x = np.asarray(x, dtype=float)
    if terms is None:
        terms = int(math.ceil(2.0 * math.sqrt(t))) + 3
    k = np.arange(1, terms + 1)
    tail = (np.exp(-(math.pi**2) * k**2 / t)[:, None] * np.cos(TWO_PI * k[:, None] * x.ravel()[None, :])).sum(0)
    return (1 + 2 * tail).reshape(x.shape)


def odd_density_oracle(t: float, phis, rank: int = 1) -> np.ndarray:
    """Untruncated odd density: ``(r/2π)·Σ_m sqrt(t/π) e^{-t(m + φ/2π)²}``."""
    return rank / TWO_PI * gaussian_sum(t, np.asarray(phis) / TWO_PI)


def core_supertrace(trunc: TruncationParams, t: float, variant: str = "odd") -> float:
    """``Σ_states (-1)^F e^{-tE}`` over the oscillator core.

    Fermion and boson states cancel level by level, so this is 1 (odd) or
    2 (even, from the two vacuum lines) at every cutoff.
    """
    b = build_basis(trunc, variant)
    signs = (-1.0) ** b.core_fermion_count
    return float((signs * np.exp(-t * b.core_energy)).sum())


def suspended_density(t: float, grid, trunc: TruncationParams, rank: int = 1) -> DensitySample:
    """``κ·t·sin²s·Tr(ψ_0 e^{-t(cos²s + sin²s·Q(φ)²)})`` for ``s < π``, zero beyond.

    ``grid`` is ``(s_points, φ_points)`` or a pair of arrays.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    s_grid, phis = (_as_grid(g) for g in grid)
    mu, w = _odd_heat_data(trunc, tuple(float(p) for p in phis))
    mu2 = mu**2
    values = np.zeros((s_grid.size, phis.size))
    for i, s in enumerate(s_grid):
        if not 0.0 < s < math.pi:
            continue
        c2, s2 = math.cos(s) ** 2, math.sin(s) ** 2
        trace = (np.exp(-t * (c2 + s2 * mu2)) * w).sum(axis=1)
        values[i] = rank * calibration("suspended") * t * s2 * trace
    return DensitySample(float(t), (s_grid, phis), values, trunc, "suspended", rank)


def suspended_total_oracle(t: float, rank: int = 1) -> float:
    """Exact total of the calibrated suspended density: ``r·erf(sqrt t)``."""
    return rank * float(erf(math.sqrt(t)))


# ---------------------------------------------------------------------------
# even density


def _even_core_data(trunc: TruncationParams):
    # the core blocks do not depend on the charge window
    return _even_core_blocks(TruncationParams(trunc.L, 0, trunc.mode_max))


@lru_cache(maxsize=4)
def _even_core_blocks(trunc: TruncationParams):
    """Per core sector at charge ``(0, 0)``: pencil blocks, insertion weight and level.

    ``Q^e`` on the sector of charges ``(m_e, m_f)`` is ``K + ψ⁰_0 a + ψ¹_0 b``
    with ``a = m_e + s/2π`` and ``b = m_f + φ/2π``.
    """
    basis = build_basis(trunc, "even")
    K, p0, p1, e0, f0 = even_parts(trunc)
    X = (grading_operator(trunc).matrix @ p0 @ p1).tocsr()
    out = []
    for label, sl in basis.sectors:
        if label[:2] != (0, 0):
            continue
        blocks = tuple(M[sl, sl].toarray() for M in (K, p0, p1))
        insertion = X[sl, sl].toarray()
        out.append((label[2:], blocks, insertion))
    return out


def even_block(trunc: TruncationParams, sector: int, a: float, b: float) -> np.ndarray:
    _, (K, P0, P1), _ = _even_core_data(trunc)[sector]
    return K + a * P0 + b * P1


def _even_levels(trunc: TruncationParams, probe=(0.31, -0.47), tol=1e-9):
    """Level of ``Q^e² - a² - b²`` on each core sector, read off its spectrum at a probe.

    With the Clifford normalization ``ψ_n² = 1`` each unit of oscillator
    energy adds 2 to ``Q²``, so the level is ``2(E0 + E1)``. The probe checks
    that ``Q²`` is a scalar on every sector and fails loudly when the
    truncation breaks it (``mode_max < L``).
    """
    a, b = probe
    levels = []
    for i, (label, _, insertion) in enumerate(_even_core_data(trunc)):
        mu = np.linalg.eigvalsh(even_block(trunc, i, a, b))
        shifted = mu**2 - a * a - b * b
        if np.ptp(shifted) > tol or abs(shifted[0] - 2 * sum(label)) > tol:
            raise ArithmeticError(f"Q² is not scalar on sector {label}; use mode_max = L")
        levels.append((float(shifted.mean()), complex(np.trace(insertion))))
    return levels


def even_density(t: float, grid, trunc: TruncationParams, rank: int = 1) -> DensitySample:
    """``κ·t·Str(ψ⁰_0 ψ¹_0 e^{-tQ^e(s,φ)²})`` on an ``(s, φ)`` grid.

    ``e^{-tQ²}`` is a scalar on each sector (checked spectrally), so the
    supertrace factors into a core sum and one Gaussian sum per charge.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if trunc.mode_max != trunc.L:
        raise ValueError("the even density needs mode_max = L so that Q² is scalar on sectors")
    s_grid, phis = (_as_grid(g) for g in grid)
    core = sum(w * math.exp(-t * E) for E, w in _even_levels(trunc))
    m = np.arange(-trunc.C, trunc.C + 1)
    gs = np.exp(-t * (m[None, :] + s_grid[:, None] / TWO_PI) ** 2).sum(1)
    gp = np.exp(-t * (m[None, :] + phis[:, None] / TWO_PI) ** 2).sum(1)
    values = rank * calibration("even") * t * core * np.outer(gs, gp)
    if np.abs(values.imag).max() > 1e-12 * max(1.0, np.abs(values.real).max()):
        raise ArithmeticError("even density is not real")
    return DensitySample(float(t), (s_grid, phis), values.real.copy(), trunc, "even", rank)


def even_density_direct(t: float, points, trunc: TruncationParams, rank: int = 1) -> np.ndarray:
    """The even density at explicit ``(s, φ)`` points by full diagonalization.

    Slow reference path for cross-checks on small truncations.
    """
    data = _even_core_data(trunc)
    m = range(-trunc.C, trunc.C + 1)
    out = []
    for s, phi in points:
        total = 0j
        for i, (_, _, Xb) in enumerate(data):
            for me in m:
                for mf in m:
                    mu, V = np.linalg.eigh(even_block(trunc, i, me + s / TWO_PI, mf + phi / TWO_PI))
                    total += (np.exp(-t * mu**2) * np.einsum("ij,ik,kj->j", V.conj(), Xb, V)).sum()
        out.append(rank * calibration("even") * t * total)
    return np.array(out)


def even_density_oracle(t: float, s, phi, rank: int = 1) -> np.ndarray:
    """Product-Gaussian form ``(r/4π²)·G_t(s/2π)·G_t(φ/2π)``."""
    return rank / TWO_PI**2 * np.multiply.outer(gaussian_sum(t, np.asarray(s) / TWO_PI), gaussian_sum(t, np.asarray(phi) / TWO_PI))


def even_min_eigenvalue(points, trunc: TruncationParams) -> np.ndarray:
    """Smallest eigenvalue of ``Q^e(s, φ)²`` at each point, over every sector."""
    data = _even_core_data(trunc)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    m = np.arange(-trunc.C, trunc.C + 1)
    me, mf = (x.ravel() for x in np.meshgrid(m, m, indexing="ij"))
    a = (me[None, :] + pts[:, :1] / TWO_PI).ravel()
    b = (mf[None, :] + pts[:, 1:] / TWO_PI).ravel()
    best = np.full(a.size, np.inf)
    for K, P0, P1 in (blocks for _, blocks, _ in data):
        stack = K[None] + a[:, None, None] * P0[None] + b[:, None, None] * P1[None]
        mu = np.linalg.eigvalsh(stack)
        best = np.minimum(best, (mu**2).min(axis=1))
    return best.reshape(len(pts), -1).min(axis=1)


# ---------------------------------------------------------------------------
# characters


class RankMismatchError(ValueError):
    pass


_ODD_SCALE = Scalar.sqrt_pi() * Scalar.two_pi(-1)
_EVEN_SCALE = Scalar.two_pi(-2)


@dataclass(frozen=True)
class CharacterClass:
    """``sign·√π (dφ/2π) ∧ ch`` (odd) or ``sign·(ds/2π)∧(dφ/2π) ∧ ch`` (even)."""

    variant: str
    coefficient: ExtClassQ
    sign: int = 1
    tags: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.variant not in ("odd", "even"):
            raise ValueError(f"variant must be 'odd' or 'even', got {self.variant!r}")
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")
        default = (
            {"circle_factors": ["dphi/2pi"], "sqrt_pi_power": 1}
            if self.variant == "odd"
            else {"circle_factors": ["ds/2pi", "dphi/2pi"], "sqrt_pi_power": 0}
        )
        object.__setattr__(self, "tags", {**default, **self.tags})

    @property
    def n(self) -> int:
        return self.coefficient.n

    def to_form(self) -> FourierForm:
        prefix = DPHI if self.variant == "odd" else DS | DPHI
        scale = (_ODD_SCALE if self.variant == "odd" else _EVEN_SCALE) * self.sign
        return FourierForm.from_ext(self.coefficient, prefix, scale)

    def to_json(self):
        return {
            "variant": self.variant,
            "sign": self.sign,
            "coefficient": self.coefficient.to_json(),
            "tags": self.tags,
            "form": self.to_form().to_json(),
        }


def _numeric_rank(evidence, tol):
    flows, totals = [], []
    for item in evidence:
        if isinstance(item, FlowResult):
            flows.append(item.net_flow)
        elif isinstance(item, DensitySample):
            totals.append(item.total)
        elif isinstance(item, (int, np.integer)) and not isinstance(item, bool):
            flows.append(int(item))
        else:
            raise TypeError(f"unsupported evidence {item!r}")
    ranks = {abs(f) for f in flows}
    for total in totals:
        r = round(total)
        if abs(total - r) > tol:
            raise RankMismatchError(f"density total {total:.9g} is not an integer within {tol:g}")
        ranks.add(r)
    if len(ranks) != 1:
        raise RankMismatchError(f"evidence disagrees on the rank: {sorted(ranks)}")
    if len({(f > 0) - (f < 0) for f in flows}) > 1:
        raise RankMismatchError("flows disagree on the sign")
    sign = (flows[0] > 0) - (flows[0] < 0) if flows else 1
    return ranks.pop(), sign


def assemble_character(evidence, xi: CurvatureData, variant: str, tol: float = 1e-6) -> CharacterClass:
    """Combine numeric evidence with ``ch(ξ)`` into the symbolic character.

    ``evidence`` is an iterable of :class:`FlowResult`, :class:`DensitySample`
    or integer flows. The recovered rank must equal the degree-0 part of
    ``ch(ξ)``; the sign comes from the flow.
    """
    rank, sign = _numeric_rank(list(evidence), tol)
    ch = chern_character(xi)
    if rank != ch.coefficient(0):
        raise RankMismatchError(f"numeric rank {rank} but ch(ξ) has rank {ch.coefficient(0)}")
    return CharacterClass(variant, ch, sign if rank else 0)


def symbolic_character(xi: CurvatureData, variant: str, sign: int = 1) -> CharacterClass:
    return CharacterClass(variant, chern_character(xi), sign)


def factorization_check(xi: CurvatureData, spec=None) -> bool:
    """Desuspending the even character of ``ξ`` gives its odd character exactly.

    ``spec`` (a twist specification) only has to agree with ``ξ`` on the
    torus dimension when given.
    """
    if spec is not None and spec.n != xi.n:
        raise ValueError(f"twist lives on T^{spec.n} but ξ on T^{xi.n}")
    even = symbolic_character(xi, "even").to_form()
    odd = symbolic_character(xi, "odd").to_form()
    return desuspend(even) == odd


def to_json(obj) -> str:
    payload = obj.to_json() if hasattr(obj, "to_json") else obj.summary()
    return json.dumps(payload, indent=2, default=str)
