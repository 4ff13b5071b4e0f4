import json
import math
from collections import Counter
from itertools import product

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from twistk.fock_rep import (
    ModeRangeError,
    TruncationParams,
    VariantError,
    build_basis,
    build_supercharge_even,
    build_supercharge_odd,
    export_operator,
    grading_operator,
    is_adjoint_pair,
    mode_operator,
    q_squared_residual_even,
    q_squared_residual_odd,
    relation_check,
)


def series_coefficients(L):
    """Coefficients of ∏(1+q^j)·∏(1-q^j)^-1 up to q^L by truncated series products."""
    poly = np.zeros(L + 1, dtype=np.int64)
    poly[0] = 1
    for j in range(1, L + 1):
        times = poly.copy()
        times[j:] += poly[: L + 1 - j]  # multiply by 1 + q^j
        for i in range(j, L + 1):  # divide by 1 - q^j
            times[i] += times[i - j]
        poly = times
    return poly


def test_truncation_validation():
    with pytest.raises(ValueError):
        TruncationParams(-1, 1)
    with pytest.raises(ValueError):
        TruncationParams(3, 1, 4)
    assert TruncationParams(4, 1).mode_max == 4


def test_basis_vacuum_only():
    b = build_basis(TruncationParams(0, 1), "odd")
    assert b.dim == 3
    assert [b.label(i) for i in range(3)] == ["m=-1 psi[] bos[]", "m=0 psi[] bos[]", "m=1 psi[] bos[]"]
    even = build_basis(TruncationParams(0, 0), "even")
    assert even.dim == 2
    assert {even.spinor_state(i).vacuum_label for i in range(2)} == {"eta1", "eta2"}


def test_basis_dimension_small_cutoff():
    # energy 0: vacuum; 1: ψ_1, e_1; 2: ψ_2, e_2, e_1², ψ_1 e_1  -> 7
    assert build_basis(TruncationParams(2, 0), "odd").dim == 7


@pytest.mark.parametrize("L", [0, 1, 3, 5, 7])
def test_sector_dimensions_match_generating_function(L):
    b = build_basis(TruncationParams(L, 1), "odd")
    coeffs = series_coefficients(L)
    counts = Counter(label for label, sl in b.sectors for _ in range(sl.stop - sl.start))
    for (m, E), count in counts.items():
        assert count == coeffs[E]
    assert b.core_dim == coeffs.sum()


@pytest.mark.parametrize("L", [0, 2, 4])
def test_even_sector_dimensions(L):
    b = build_basis(TruncationParams(L, 0), "even")
    c = series_coefficients(L)
    for (me, mf, E0, E1), sl in b.sectors:
        assert sl.stop - sl.start == 2 * c[E0] * c[E1]


def test_brute_force_enumeration_matches():
    L = 4
    b = build_basis(TruncationParams(L, 0), "odd")
    brute = set()
    for fermions in product([0, 1], repeat=L):
        ef = sum((i + 1) * f for i, f in enumerate(fermions))
        for occ in product(*(range(L // k + 1) for k in range(1, L + 1))):
            eb = sum((k + 1) * m for k, m in enumerate(occ))
            if ef + eb <= L:
                mask = sum(f << i for i, f in enumerate(fermions))
                brute.add((mask, occ))
    assert brute == set(b.core)


def test_sectors_are_contiguous_and_conserved():
    trunc = TruncationParams(4, 1)
    b = build_basis(trunc, "odd")
    covered = sum(sl.stop - sl.start for _, sl in b.sectors)
    assert covered == b.dim
    Q = build_supercharge_odd(0.4, trunc).matrix.tolil()
    for label, sl in b.sectors:
        rest = np.ones(b.dim, dtype=bool)
        rest[sl] = False
        assert abs(Q[sl, :][:, np.flatnonzero(rest)]).max() == 0 if rest.any() else True


def test_psi0_on_vacuum_and_parity():
    b = build_basis(TruncationParams(3, 1), "odd")
    psi0 = mode_operator(b, "psi", 0)
    v = b.vacuum_index(0)
    assert psi0.re[v, v] == 1
    exc = np.array([bin(s[0]).count("1") for s in b.core] * len(b.charges))
    assert (psi0.re.diagonal() == (-1) ** exc).all()


def test_loop_commutator_examples():
    trunc = TruncationParams(4, 1)
    b = build_basis(trunc, "odd")
    e = lambda n: mode_operator(b, "e", n)
    I = sp.identity(b.dim, dtype=np.int64, format="csr")
    for n in (1, 2):
        comm = e(n) @ e(-n) - e(-n) @ e(n)
        cols = np.flatnonzero(b.interior(n))
        assert (comm.re[:, cols] - (-n * I)[:, cols]).count_nonzero() == 0


def test_shift_conjugation():
    b = build_basis(TruncationParams(2, 2), "odd")
    S, Sinv, e0 = (mode_operator(b, x) for x in ("S", "Sinv", "e0"))
    v = b.vacuum_index(0)
    assert S.re[:, v].nonzero()[0].tolist() == [b.vacuum_index(1)]
    X = S @ e0 @ Sinv
    cols = np.flatnonzero(b.interior(0, charge_floor=True))
    diff = (X.re - (e0.re - sp.identity(b.dim, dtype=np.int64)))[:, cols]
    assert diff.count_nonzero() == 0


def test_adjoint_pairs_exact():
    b = build_basis(TruncationParams(4, 1), "even")
    for name in ("psi0", "psi1", "e", "f"):
        for n in range(-4, 5):
            assert is_adjoint_pair(mode_operator(b, name, n), mode_operator(b, name, -n))
    assert not is_adjoint_pair(mode_operator(b, "e", 1), mode_operator(b, "e", 1))


def test_mode_errors():
    b = build_basis(TruncationParams(3, 1, 2), "odd")
    with pytest.raises(ModeRangeError):
        mode_operator(b, "psi", 3)
    with pytest.raises(VariantError):
        mode_operator(b, "f", 1)
    with pytest.raises(VariantError):
        mode_operator(b, "Gamma")


@pytest.mark.parametrize("variant", ["odd", "even"])
def test_relation_report_clean(variant):
    report = relation_check(TruncationParams(4, 1), variant)
    assert report.ok, report.failures()
    assert len(report.violations) > 100
    payload = report.to_json()
    assert payload["max_violation"] == 0


def test_relation_report_detects_truncation_edge():
    # interior discipline matters: on the full space the boundary breaks [e_1, e_-1]
    b = build_basis(TruncationParams(3, 0), "odd")
    e1, em1 = mode_operator(b, "e", 1), mode_operator(b, "e", -1)
    comm = e1 @ em1 - em1 @ e1
    assert (comm.re + sp.identity(b.dim, dtype=np.int64)).count_nonzero() > 0


@settings(max_examples=8, deadline=None)
@given(st.floats(-20, 20, allow_nan=False))
def test_q_squared_identity_odd(phi):
    trunc = TruncationParams(5, 2)
    assert q_squared_residual_odd(phi, trunc) < 1e-12
    assert q_squared_residual_odd(phi, trunc, sign=-1) < 1e-12


def test_q_squared_identity_reduced_modes():
    assert q_squared_residual_odd(1.3, TruncationParams(5, 1, 3)) < 1e-12


@settings(max_examples=4, deadline=None)
@given(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False))
def test_q_squared_identity_even(s, phi):
    assert q_squared_residual_even(s, phi, TruncationParams(3, 1)) < 1e-12


def test_odd_supercharge_vacuum_and_p_subspace():
    trunc = TruncationParams(3, 2)
    b = build_basis(trunc, "odd")
    Q = build_supercharge_odd(0.0, trunc).matrix
    assert abs(Q[:, b.vacuum_index(0)]).max() == 0
    phi = 1.1
    Q = build_supercharge_odd(phi, trunc).toarray()
    for m in range(-2, 3):
        v = b.vacuum_index(m)
        assert Q[v, v] == pytest.approx(m + phi / (2 * math.pi))
        off = np.delete(Q[:, v], v)
        assert np.abs(off).max() == 0


def test_odd_shift_covariance():
    trunc = TruncationParams(4, 2)
    b = build_basis(trunc, "odd")
    S = mode_operator(b, "S").to_float()
    phi = 0.37
    lhs = S @ build_supercharge_odd(phi, trunc).matrix @ S.T
    rhs = build_supercharge_odd(phi - 2 * math.pi, trunc).matrix
    cols = np.flatnonzero(b.interior(0, charge_floor=True))
    assert abs((lhs - rhs)[:, cols]).max() < 1e-12


def test_grading_examples():
    trunc = TruncationParams(2, 0)
    b = build_basis(trunc, "even")
    G = grading_operator(trunc).toarray()
    assert np.abs(G @ G - np.eye(b.dim)).max() == 0
    eta1 = b.vacuum_index(0, vacuum=0)
    assert G[eta1, eta1] == 1
    psi = mode_operator(b, "psi0", 1).to_float()
    excited = psi[:, eta1].toarray().ravel()
    assert np.allclose(G @ excited, -excited)
    with pytest.raises(VariantError):
        mode_operator(build_basis(trunc, "odd"), "Gamma")


def test_even_supercharge_structure():
    trunc = TruncationParams(3, 1)
    b = build_basis(trunc, "even")
    G = grading_operator(trunc).matrix
    Q = build_supercharge_even(0.8, -1.7, trunc).matrix
    assert abs(G @ Q + Q @ G).max() < 1e-15
    Q0 = build_supercharge_even(0.0, 0.0, trunc).matrix
    for vac in (0, 1):
        assert abs(Q0[:, b.vacuum_index((0, 0), vac)]).max() == 0


def test_even_shift_covariance_uses_f_factor():
    trunc = TruncationParams(3, 2)
    b = build_basis(trunc, "even")
    S = mode_operator(b, "S_f").to_float()
    s, phi = 0.9, 2.2
    lhs = S @ build_supercharge_even(s, phi, trunc).matrix @ S.T
    rhs = build_supercharge_even(s, phi - 2 * math.pi, trunc).matrix
    cols = np.flatnonzero(b.interior(0, charge_floor=True, which=1))
    assert abs((lhs - rhs)[:, cols]).max() < 1e-12


def test_export_formats(tmp_path):
    trunc = TruncationParams(1, 0)
    Q = build_supercharge_odd(0.5, trunc)
    export_operator(Q, str(tmp_path / "q.json"))
    payload = json.loads((tmp_path / "q.json").read_text())
    assert payload["dim"] == 3 and len(payload["basis"]) == 3
    export_operator(Q, str(tmp_path / "q.npz"))
    data = np.load(tmp_path / "q.npz")
    M = sp.coo_matrix((data["re"] + 1j * data["im"], (data["row"], data["col"])), shape=(3, 3))
    assert abs(M - Q.matrix).max() == 0
