"""Eigenanalysis of supercharge families.

Everything here works sector by sector: the supercharges conserve charge and
energy, so a family is diagonalized as a stack of small dense blocks with one
batched ``numpy.linalg.eigh`` call per sector.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import kernels
from .fock_rep import OperatorMatrix, TruncationParams, build_basis, mode_operator, odd_parts

TWO_PI = 2 * math.pi


class NonHermitianError(ValueError):
    pass


class SeamError(ValueError):
    """The family's endpoint is not the glued image of its starting point."""


class UnresolvedCrossingError(RuntimeError):
    """Branch continuation stayed ambiguous after the maximum refinement."""


class NormError(ValueError):
    pass


# ---------------------------------------------------------------------------
# sector handling


def _as_sparse(A) -> sp.csr_matrix:
    if isinstance(A, OperatorMatrix):
        return A.matrix
    return sp.csr_matrix(A)


def _sector_ids(sectors: Sequence[slice], dim: int) -> np.ndarray:
    ids = np.full(dim, -1, dtype=np.int64)
    for i, sl in enumerate(sectors):
        ids[sl] = i
    if (ids < 0).any():
        raise ValueError("sectors do not cover the space")
    return ids


def _conserves(M: sp.spmatrix, ids: np.ndarray) -> bool:
    coo = M.tocoo()
    nz = coo.data != 0
    return bool((ids[coo.row[nz]] == ids[coo.col[nz]]).all())


def _sectors_of(A) -> list[slice]:
    """Sector slices of ``A`` when it carries a basis whose sectors it conserves."""
    M = _as_sparse(A)
    if isinstance(A, OperatorMatrix):
        sectors = [sl for _, sl in A.basis.sectors]
        if _conserves(M, _sector_ids(sectors, M.shape[0])):
            return sectors
    return [slice(0, M.shape[0])]


def _dense_blocks(M: sp.spmatrix, sectors: Sequence[slice]) -> list[np.ndarray]:
    M = sp.csr_matrix(M)
    out = []
    for sl in sectors:
        block = M[sl, sl].toarray()
        if not np.iscomplexobj(block) or not np.abs(block.imag).any():
            block = block.real.copy()
        out.append(block)
    return out


def _check_hermitian(M: sp.spmatrix, tol=1e-12):
    if M.shape[0] != M.shape[1]:
        raise NonHermitianError(f"matrix of shape {M.shape} is not square")
    diff = M - M.getH()
    err = abs(diff).max() if diff.nnz else 0.0
    if err > tol:
        raise NonHermitianError(f"|A - A^H| = {err:.3g} exceeds {tol:g}")


# ---------------------------------------------------------------------------
# eigendecomposition


@dataclass
class EigenSystem:
    """Full spectrum of a hermitian matrix with orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dims: tuple[int, ...]
    residual: float = 0.0
    orthonormality_defect: float = 0.0

    def __post_init__(self):
        if self.residual >= 1e-10 or self.orthonormality_defect >= 1e-10:
            raise ArithmeticError(
                f"eigensolver accuracy lost: residual {self.residual:.3g}, "
                f"orthonormality {self.orthonormality_defect:.3g}"
            )

    def __len__(self):
        return len(self.eigenvalues)


def eigendecompose(A) -> EigenSystem:
    """Sorted spectrum of ``A``; conserved sectors are diagonalized separately.

    ``A`` may be an :class:`OperatorMatrix`, a sparse matrix or an array.
    """
    M = _as_sparse(A)
    _check_hermitian(M)
    dim = M.shape[0]
    sectors = _sectors_of(A)
    values = np.empty(dim)
    vectors = np.zeros((dim, dim), dtype=np.result_type(M.dtype, np.float64))
    residual = ortho = 0.0
    for sl, block in zip(sectors, _dense_blocks(M, sectors)):
        w, V = np.linalg.eigh(block)
        values[sl] = w
        vectors[sl, sl] = V
        if w.size:
            residual = max(residual, float(np.abs(block @ V - V * w).max()))
            ortho = max(ortho, float(np.abs(V.conj().T @ V - np.eye(w.size)).max()))
    order = np.argsort(values, kind="stable")
    return EigenSystem(values[order], vectors[:, order], M.shape, residual, ortho)


def _spectral_map(A, f: Callable[[np.ndarray], np.ndarray]) -> sp.csr_matrix:
    """``V f(Λ) V^H`` assembled blockwise."""
    M = _as_sparse(A)
    _check_hermitian(M)
    sectors = _sectors_of(A)
    pieces = []
    for block in _dense_blocks(M, sectors):
        w, V = np.linalg.eigh(block)
        pieces.append((V * f(w)) @ V.conj().T)
    return sp.block_diag(pieces, format="csr") if len(pieces) > 1 else sp.csr_matrix(pieces[0])


def approximate_sign(Q: OperatorMatrix) -> OperatorMatrix:
    """``F = Q / sqrt(1 + Q²)`` through the spectral calculus."""
    F = _spectral_map(Q, lambda w: w / np.sqrt(1.0 + w * w))
    F = (F + F.getH()) * 0.5
    label = f"sign({Q.label})" if Q.label else "sign"
    return OperatorMatrix(F, Q.basis, hermitian=True, label=label, params=dict(Q.params))


def operator_norm(A) -> float:
    """Spectral norm of a hermitian matrix."""
    M = _as_sparse(A)
    _check_hermitian(M)
    best = 0.0
    for block in _dense_blocks(M, _sectors_of(A)):
        if block.size:
            best = max(best, float(np.abs(np.linalg.eigvalsh(block)).max()))
    return best


# ---------------------------------------------------------------------------
# families


@dataclass
class AffineFamily:
    """Hermitian family ``A + x·B`` over one period with a seam gluing ``g``.

    The endpoint must satisfy ``family(x + period) = g·family(x)·g^H`` on the
    range of ``g g^H``; ``g = None`` means the identity.
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    sectors: list[slice]
    gluing: sp.csr_matrix | None = None
    gluing_label: str = "identity"
    period: float = TWO_PI
    label: str = ""

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        self.B = sp.csr_matrix(self.B, shape=self.A.shape)
        _check_hermitian(self.A)
        _check_hermitian(self.B)
        ids = _sector_ids(self.sectors, self.dim)
        if not (_conserves(self.A, ids) and _conserves(self.B, ids)):
            raise ValueError("family does not conserve its declared sectors")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def at(self, x: float) -> sp.csr_matrix:
        return self.A + x * self.B

    def pencils(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(_dense_blocks(self.A, self.sectors), _dense_blocks(self.B, self.sectors)))

    def seam_residual(self, x0: float) -> float:
        """``max |P (Q(x0 + period) - g Q(x0) g^H) P|`` with ``P = g g^H``."""
        start, end = self.at(x0), self.at(x0 + self.period)
        if self.gluing is None:
            D = end - start
        else:
            g = self.gluing
            P = sp.diags((abs(g @ g.getH()).diagonal() > 0.5).astype(float))
            D = P @ (end - g @ start @ g.getH()) @ P
        return float(abs(D).max()) if D.nnz else 0.0


def odd_family(trunc: TruncationParams, sign: int = 1) -> AffineFamily:
    """``Q(φ)`` of the odd module; ``sign=-1`` reverses the slope.

    Raising ``φ`` by one period lowers (``sign=+1``) or raises (``sign=-1``)
    the effective charge by one, so the seam gluing is ``S^-1`` or ``S``.
    """
    basis = build_basis(trunc, "odd")
    K, psi0, e0 = odd_parts(trunc)
    S = mode_operator(basis, "S").to_float()
    g = S.T.tocsr() if sign == 1 else S
    return AffineFamily(
        K + psi0 @ e0,
        psi0 * (sign / TWO_PI),
        [sl for _, sl in basis.sectors],
        gluing=g,
        gluing_label="S^-1" if sign == 1 else "S",
        label="odd" if sign == 1 else "odd-negative",
    )


def constant_family(trunc: TruncationParams, phi: float = math.pi) -> AffineFamily:
    """The odd supercharge frozen at ``phi``, glued by the identity."""
    basis = build_basis(trunc, "odd")
    K, psi0, e0 = odd_parts(trunc)
    Q = K + psi0 @ (e0 + phi / TWO_PI * sp.identity(basis.dim))
    return AffineFamily(Q, sp.csr_matrix(Q.shape), [sl for _, sl in basis.sectors], label="constant")


def direct_sum(*families: AffineFamily) -> AffineFamily:
    """Block-diagonal sum of families sharing one period."""
    if not families:
        raise ValueError("need at least one family")
    periods = {f.period for f in families}
    if len(periods) != 1:
        raise ValueError("families must share a period")
    sectors, offset = [], 0
    for f in families:
        sectors += [slice(sl.start + offset, sl.stop + offset) for sl in f.sectors]
        offset += f.dim
    glue = None
    if any(f.gluing is not None for f in families):
        glue = sp.block_diag(
            [f.gluing if f.gluing is not None else sp.identity(f.dim) for f in families], format="csr"
        )
    labels = {f.gluing_label for f in families}
    return AffineFamily(
        sp.block_diag([f.A for f in families], format="csr"),
        sp.block_diag([f.B for f in families], format="csr"),
        sectors,
        gluing=glue,
        gluing_label=" + ".join(f.gluing_label for f in families) if len(labels) > 1 else labels.pop(),
        period=periods.pop(),
        label=" + ".join(f.label for f in families),
    )


def trivial_rank_family(trunc: TruncationParams, rank: int, sign: int = 1) -> AffineFamily:
    """The odd family tensored with a rank-``rank`` trivial bundle."""
    if rank < 1:
        raise ValueError("rank must be positive")
    return direct_sum(*[odd_family(trunc, sign)] * rank)


# ---------------------------------------------------------------------------
# spectral flow


@dataclass
class FlowResult:
    """Net flow with its crossing list and the data used to obtain it."""

    net_flow: int
    crossings: list[tuple[float, int]]
    gluing: str
    seam_residual: float
    count_check: int
    params: np.ndarray = field(repr=False)
    spectrum: np.ndarray = field(repr=False)
    refinements: int = 0

    def __post_init__(self):
        if self.net_flow != sum(d for _, d in self.crossings):
            raise ArithmeticError("net flow does not match its crossing list")

    def to_json(self):
        return {
            "net_flow": self.net_flow,
            "crossings": [{"parameter": x, "direction": d} for x, d in self.crossings],
            "gluing": self.gluing,
            "seam_residual": self.seam_residual,
            "negative_count_change": self.count_check,
            "grid_points": int(len(self.params)),
            "refinements": self.refinements,
        }

    def to_csv(self, path, window: float = 3.0) -> None:
        export_spectrum_csv(self.params, self.spectrum, path, window)


def export_spectrum_csv(params, spectrum, path, window: float | None = None) -> None:
    """Rows ``(parameter, eigenvalue index, value)``; ``window`` keeps ``|value| <= window``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "eigenvalue_index", "value"])
        for x, row in zip(params, spectrum):
            for i, v in enumerate(row):
                if window is None or abs(v) <= window:
                    writer.writerow([repr(float(x)), i, repr(float(v))])


class _SectorTracker:
    """Branch continuation inside one sector of an affine family."""

    def __init__(self, A, B, zero_tol, match_threshold, max_refine):
        self.A, self.B = A, B
        self.zero_tol = zero_tol
        self.match_threshold = match_threshold
        self.max_refine = max_refine
        # Weyl: eigenvalues move by at most |dx|·|B| between two parameters
        self.slope = float(np.abs(np.linalg.eigvalsh(B)).max()) if B.size and B.any() else 0.0
        self.refinements = 0

    def eigh(self, xs):
        stack = self.A[None, :, :] + np.asarray(xs, dtype=float)[:, None, None] * self.B[None, :, :]
        return np.linalg.eigh(stack)

    def interval(self, xa, wa, Va, xb, wb, Vb, depth=0):
        """Crossings in ``[xa, xb]`` as ``(parameter, direction)`` pairs."""
        reach = abs(xb - xa) * self.slope
        if not ((np.abs(wa) <= reach).any() or (np.abs(wb) <= reach).any()):
            return []
        expected = int((wa < 0).sum() - (wb < 0).sum())
        overlap = np.abs(Va.conj().T @ Vb) ** 2
        perm = kernels.greedy_match(overlap, wa, wb)
        found, clear = [], True
        for i, j in enumerate(perm):
            a, b = wa[i], wb[j]
            if (a < 0) == (b < 0):
                continue
            if overlap[i, j] < self.match_threshold:
                clear = False
            direction = 1 if b > a else -1
            found.append((float(xa + (xb - xa) * a / (a - b)), direction))
        # opposite crossings inside one interval may be an avoided crossing
        # stepped over diabatically, so they are refined until separated
        mixed = len({d for _, d in found}) > 1
        if clear and not mixed and sum(d for _, d in found) == expected:
            return found
        if depth >= self.max_refine:
            raise UnresolvedCrossingError(
                f"crossing in [{xa:.6g}, {xb:.6g}] unresolved after {depth} refinements"
            )
        self.refinements += 1
        xm = 0.5 * (xa + xb)
        wm, Vm = self.eigh([xm])
        wm, Vm = wm[0], Vm[0]
        if (np.abs(wm) < self.zero_tol).any():
            xm = xa + 0.5 * (xm - xa)
            wm, Vm = (v[0] for v in self.eigh([xm]))
        return self.interval(xa, wa, Va, xm, wm, Vm, depth + 1) + self.interval(
            xm, wm, Vm, xb, wb, Vb, depth + 1
        )


def spectral_flow(
    family: AffineFamily,
    grid: int = 256,
    start: float = 0.0,
    *,
    seam_tol: float = 1e-9,
    zero_tol: float = 1e-9,
    match_threshold: float = 0.5,
    max_refine: int = 16,
) -> FlowResult:
    """Net signed count of eigenvalues crossing zero over one period.

    The grid is ``start + (j + 1/2)·h`` for ``j = 0..grid``; if an eigenvalue
    vanishes at a grid point the grid moves by half a step. Between
    neighbouring points branches are matched by eigenvector overlap, and an
    interval is bisected until every crossing branch is matched with overlap
    above ``match_threshold``, the signed crossings agree with the change in
    the number of negative eigenvalues, and no interval holds crossings of
    both directions (the gap heuristic for avoided crossings).
    """
    if grid < 2:
        raise ValueError("grid needs at least two points")
    h = family.period / grid
    seam = family.seam_residual(start + 0.5 * h)
    if seam > seam_tol:
        raise SeamError(f"seam residual {seam:.3g} exceeds {seam_tol:g} for gluing {family.gluing_label}")
    trackers = [_SectorTracker(A, B, zero_tol, match_threshold, max_refine) for A, B in family.pencils()]

    for shift in (0.5, 0.0, 0.25):
        xs = start + h * (np.arange(grid + 1) + shift)
        data = [t.eigh(xs) for t in trackers]
        if all(not (np.abs(w) < zero_tol).any() for w, _ in data):
            break
    else:
        raise UnresolvedCrossingError("every grid shift lands on a zero eigenvalue")

    crossings: list[tuple[float, int]] = []
    count = 0
    for tracker, (w, V) in zip(trackers, data):
        count += int((w[0] < 0).sum() - (w[-1] < 0).sum())
        for j in range(grid):
            crossings += tracker.interval(xs[j], w[j], V[j], xs[j + 1], w[j + 1], V[j + 1])
    crossings.sort()
    net = sum(d for _, d in crossings)
    if net != count:
        raise UnresolvedCrossingError(f"tracked flow {net} disagrees with the negative-count change {count}")
    spectrum = np.sort(np.concatenate([w for w, _ in data], axis=1), axis=1)
    return FlowResult(
        net_flow=net,
        crossings=crossings,
        gluing=family.gluing_label,
        seam_residual=seam,
        count_check=count,
        params=xs,
        spectrum=spectrum,
        refinements=sum(t.refinements for t in trackers),
    )


# ---------------------------------------------------------------------------
# Fredholm diagnostics


def fredholm_report(family, params, thresholds=(1.0, 2.0, 4.0, 8.0), decimals=8) -> dict:
    """Finite-multiplicity, growth and bounded-difference diagnostics on a grid.

    ``family`` maps a parameter to a hermitian operator, or to a
    :class:`SuspendedOperator`, in which case the unitarity defect
    ``max |1 - F̃^H F̃|`` is reported per sample instead.
    """
    params = [float(x) for x in params]
    samples = [family(x) for x in params]
    report = {"parameters": params, "samples": [], "neighbor_differences": []}
    for x, A in zip(params, samples):
        if isinstance(A, SuspendedOperator):
            report["samples"].append({"parameter": x, "unitarity_defect": A.unitarity_defect()})
            continue
        w = eigendecompose(A).eigenvalues
        mult = Counter(np.round(w, decimals).tolist())
        report["samples"].append(
            {
                "parameter": x,
                "max_multiplicity": max(mult.values()) if mult else 0,
                "counts_below": {str(T): int((np.abs(w) < T).sum()) for T in thresholds},
                "smallest_abs": float(np.abs(w).min()) if w.size else math.inf,
            }
        )
    for a, b in zip(samples, samples[1:]):
        Ma = a.matrix if isinstance(a, (OperatorMatrix, SuspendedOperator)) else sp.csr_matrix(a)
        Mb = b.matrix if isinstance(b, (OperatorMatrix, SuspendedOperator)) else sp.csr_matrix(b)
        D = Mb - Ma
        report["neighbor_differences"].append(float(abs(D).max()) if D.nnz else 0.0)
    report["dense_domain"] = "satisfied by construction: finite truncation"
    return report


# ---------------------------------------------------------------------------
# suspension


def trig_unit(s: float) -> tuple[Fraction, Fraction]:
    """``(cos s, sin s)`` as rationals on the unit circle.

    Uses the half-angle parametrization ``u = tan(s/2)``, so the pair satisfies
    ``c² + s² = 1`` exactly while agreeing with the floating-point values to
    rounding.
    """
    u = Fraction(math.tan(0.5 * s))
    d = 1 + u * u
    return (1 - u * u) / d, 2 * u / d


@dataclass
class SuspendedOperator:
    """``cos s + i sin s·F`` on ``[0, π]``, the scalar ``cos s + i sin s`` on ``[π, 2π]``."""

    s: float
    cos: Fraction
    sin: Fraction
    F: OperatorMatrix

    @property
    def on_scalar_arc(self) -> bool:
        return self.s > math.pi

    @property
    def matrix(self) -> sp.csr_matrix:
        eye = sp.identity(self.F.dim, dtype=complex, format="csr")
        c, s = float(self.cos), float(self.sin)
        if self.on_scalar_arc:
            return (c + 1j * s) * eye
        return sp.csr_matrix(c * eye + 1j * s * self.F.matrix)

    def unitarity_defect(self) -> float:
        """``max |1 - F̃^H F̃|``; exact on the scalar arc."""
        if self.on_scalar_arc:
            return float(abs(1 - (self.cos * self.cos + self.sin * self.sin)))
        M = self.matrix
        D = sp.identity(self.F.dim) - M.getH() @ M
        return float(abs(D).max()) if D.nnz else 0.0

    def defect_identity_residual(self) -> float:
        """``max |(1 - F̃^H F̃) - sin²(s)(1 - F²)|`` on ``[0, π]``; ``max |1 - F̃^H F̃|`` beyond."""
        if self.on_scalar_arc:
            return self.unitarity_defect()
        M = self.matrix
        eye = sp.identity(self.F.dim)
        F = self.F.matrix
        lhs = eye - M.getH() @ M
        rhs = float(self.sin) ** 2 * (eye - F @ F)
        D = lhs - rhs
        return float(abs(D).max()) if D.nnz else 0.0


def suspend_family(F: OperatorMatrix, s: float, tol: float = 1e-12) -> SuspendedOperator:
    """The suspension of an approximate sign ``F`` at loop parameter ``s``."""
    if not 0.0 <= s <= TWO_PI:
        raise ValueError(f"s = {s} outside [0, 2π]")
    norm = operator_norm(F)
    if norm > 1 + tol:
        raise NormError(f"|F| = {norm:.6g} exceeds 1")
    c, sn = trig_unit(s)
    return SuspendedOperator(s, c, sn, F)


def suspension_profile(F: OperatorMatrix, s_values) -> np.ndarray:
    """Defect-identity residuals of ``suspend_family(F, s)`` over ``s_values``."""
    return np.array([suspend_family(F, s).defect_identity_residual() for s in s_values])
