from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from strategies import ext_elements, int_matrices

from twistk.lattice_algebra import (
    AbelianGroup,
    DimensionError,
    ExtClassQ,
    ExtElement,
    MultiIndex,
    exp_wedge,
    hermite_normal_form,
    identity,
    int_det,
    int_matrix,
    kernel_lattice,
    matrix_rank,
    monomials,
    quotient_group,
    reduce_modulo,
    smith_normal_form,
    unimodular_inverse,
)

th = ExtElement.generator


# -- exterior algebra --------------------------------------------------------


def test_nilpotence_and_antisymmetry(each_backend):
    assert th(1, 2).wedge(th(1, 2)).is_zero()
    assert th(2, 2).wedge(th(1, 2)) == ExtElement(2, {0b11: -1})


def test_distributive_expansion_by_hand(each_backend):
    left = ExtElement.one(2) + 2 * th(1, 2)
    right = 3 * ExtElement.one(2) + th(2, 2)
    expected = ExtElement(2, {0: 3, 0b01: 6, 0b10: 1, 0b11: 2})
    assert left.wedge(right) == expected


def test_multiindex_validation():
    assert MultiIndex.of([1, 3], 3).degree == 2
    assert MultiIndex.of([3, 1], 3).indices == (1, 3)
    with pytest.raises(DimensionError):
        MultiIndex.of([4], 3)
    with pytest.raises(DimensionError):
        ExtElement(2, {0b100: 1})


def test_mismatched_generators_raise():
    with pytest.raises(DimensionError):
        th(1, 2).wedge(th(1, 3))
    with pytest.raises(DimensionError):
        th(1, 2) + th(1, 3)


def test_no_stored_zeros():
    x = ExtElement(3, {0b1: 2, 0b10: 0})
    assert x.coeffs == {0b1: 2}
    assert (x - x).is_zero()


def test_monomial_ordering():
    assert monomials(3) == [0, 1, 2, 4, 3, 5, 6, 7]
    assert monomials(3, "odd") == [1, 2, 4, 7]
    assert len(monomials(5, "even")) == 16


def test_monomial_constructor_signs():
    assert ExtElement.monomial([2, 1], 3) == ExtElement(3, {0b11: -1})
    assert ExtElement.monomial([3, 1, 2], 3) == ExtElement(3, {0b111: 1})


def _brute_wedge(a, b):
    """Distributivity oracle: multiply generator lists and sort by bubble sort."""
    out = {}
    for ma, ca in a.coeffs.items():
        for mb, cb in b.coeffs.items():
            seq = [i for i in range(a.n) if ma >> i & 1] + [i for i in range(a.n) if mb >> i & 1]
            if len(set(seq)) < len(seq):
                continue
            sign = 1
            seq = list(seq)
            for i in range(len(seq)):
                for j in range(len(seq) - 1 - i):
                    if seq[j] > seq[j + 1]:
                        seq[j], seq[j + 1] = seq[j + 1], seq[j]
                        sign = -sign
            key = ma | mb
            out[key] = out.get(key, 0) + sign * ca * cb
    return ExtElement(a.n, out)


@settings(max_examples=60)
@given(ext_elements(4), ext_elements(4))
def test_wedge_matches_brute_force(a, b):
    assert a.wedge(b) == _brute_wedge(a, b)


@settings(max_examples=60)
@given(ext_elements(4), ext_elements(4), ext_elements(4))
def test_wedge_associative(a, b, c):
    assert a.wedge(b).wedge(c) == a.wedge(b.wedge(c))


@settings(max_examples=60)
@given(st.integers(0, 31), st.integers(0, 31))
def test_graded_commutative(ma, mb):
    a, b = ExtElement(5, {ma: 1}), ExtElement(5, {mb: 1})
    sign = (-1) ** (bin(ma).count("1") * bin(mb).count("1"))
    assert a.wedge(b) == b.wedge(a) * sign


def test_rational_classes_and_exp():
    c1 = ExtElement(4, {0b0011: 1, 0b1100: 1})
    ch = exp_wedge(c1)
    # (a + b)^2 / 2 = a ^ b for commuting 2-forms
    assert ch == ExtClassQ(4, {0: 1, 0b0011: 1, 0b1100: 1, 0b1111: 1})
    assert ch.is_integral()
    half = ExtClassQ(2, {0: Fraction(1, 2)})
    assert not half.is_integral()
    with pytest.raises(ValueError):
        half.to_integral()
    with pytest.raises(TypeError):
        ExtElement(2, {0: Fraction(1, 2)})
    with pytest.raises(ValueError):
        exp_wedge(ExtElement.one(2))


# -- Smith normal form ------------------------------------------------------


def _check_snf(M):
    snf = smith_normal_form(M)
    U, D, V = snf
    assert (U.dot(M).dot(V) == D).all()
    assert abs(int_det(U)) == 1 and abs(int_det(V)) == 1
    diag = snf.diagonal
    for i in range(D.shape[0]):
        for j in range(D.shape[1]):
            if i != j:
                assert D[i, j] == 0
    assert all(d >= 0 for d in diag)
    nz = [d for d in diag if d]
    assert diag[: len(nz)] == nz  # zeros trail
    for a, b in zip(nz, nz[1:]):
        assert b % a == 0
    return snf


def test_snf_swap_case():
    assert _check_snf(int_matrix([[3, 0], [0, 1]])).diagonal == [1, 3]


def test_snf_invariant_factors_and_det():
    M = int_matrix([[2, 4], [6, 8]])
    snf = _check_snf(M)
    assert snf.invariant_factors == [2, 4]
    assert abs(int_det(M)) == 8 == abs(int_det(snf.D))


def test_snf_zero_matrix():
    U, D, V = smith_normal_form(np.zeros((2, 3), dtype=object))
    assert (D == 0).all()
    assert (U == identity(2)).all() and (V == identity(3)).all()


def test_snf_big_entries_do_not_overflow():
    M = int_matrix([[2**70 + 1, 3 * 2**65], [5**30, 7**25]])
    snf = _check_snf(M)
    assert snf.diagonal[0] * snf.diagonal[1] == abs(int_det(M))


@settings(max_examples=150, deadline=None)
@given(int_matrices())
def test_snf_properties(M):
    snf = _check_snf(M)
    assert snf.rank == np.linalg.matrix_rank(M.astype(float))


def test_unimodular_inverse():
    U = int_matrix([[2, 1], [1, 1]])
    assert (U.dot(unimodular_inverse(U)) == identity(2)).all()
    with pytest.raises(ValueError):
        unimodular_inverse(int_matrix([[2, 0], [0, 1]]))


# -- quotients and kernels --------------------------------------------------


def test_quotient_examples():
    assert quotient_group(2, int_matrix([[2], [0]])) == AbelianGroup(1, (2,))
    assert quotient_group(4, np.zeros((4, 0), dtype=object)) == AbelianGroup(4)
    assert quotient_group(2, identity(2)).is_trivial()
    with pytest.raises(DimensionError):
        quotient_group(3, int_matrix([[1], [0]]))


def test_abelian_group_normalization():
    g = AbelianGroup.from_cyclic_orders(1, [2, 3, 4, 1])
    assert g == AbelianGroup(1, (2, 12))
    assert str(g) == "Z + Z/2 + Z/12"
    with pytest.raises(ValueError):
        AbelianGroup(0, (2, 3))


@settings(max_examples=100, deadline=None)
@given(int_matrices())
def test_quotient_rank_nullity(M):
    g = quotient_group(M.shape[0], M)
    assert g.free_rank == M.shape[0] - matrix_rank(M)


def test_kernel_examples():
    assert kernel_lattice(int_matrix([[1, 0]])).T.tolist() == [[0, 1]]
    assert kernel_lattice(np.zeros((1, 2), dtype=object)).shape == (2, 2)
    assert kernel_lattice(int_matrix([[2, 4]])).T.tolist() == [[2, -1]]


@settings(max_examples=100, deadline=None)
@given(int_matrices())
def test_kernel_is_saturated(M):
    K = kernel_lattice(M)
    assert (M.dot(K) == 0).all() if K.size else True
    assert K.shape[1] == M.shape[1] - matrix_rank(M)
    if K.shape[1]:
        # primitive: the kernel basis spans a direct summand, so the cokernel is torsion free
        assert quotient_group(K.shape[0], K).invariant_factors == ()


def test_hermite_reduction_is_canonical():
    rows = hermite_normal_form([[4, 2], [2, 2]])
    assert rows == [[2, 0], [0, 2]]
    assert reduce_modulo([5, 7], rows) == [1, 1]
    for a, b in product(range(-3, 4), repeat=2):
        v = [1 + 4 * a + 2 * b, 1 + 2 * a + 2 * b]
        assert reduce_modulo(v, rows) == [1, 1]
