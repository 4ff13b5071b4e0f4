import json
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twistk.lattice_algebra import AbelianGroup, ExtClassQ, ExtElement, int_matrix, monomials, quotient_group
from twistk.torus_ktheory import (
    DPHI_BIT,
    DomainError,
    TwistSpec,
    character_quotient,
    classify_supercharge,
    closed_form_invariant_basis,
    invariant_subgroup,
    lambda_rank,
    lift_theta,
    reduce_character,
    supercharge_class,
    to_json,
    twisted_k_group,
)


def dphi_wedge(x: ExtElement) -> ExtElement:
    return ExtElement(x.n + 2, {DPHI_BIT: 1}).wedge(lift_theta(x))


def test_twist_spec_validation():
    with pytest.raises(ValueError):
        TwistSpec(1, 1)
    with pytest.raises(ValueError):
        TwistSpec(2, 0)
    with pytest.raises(ValueError):
        TwistSpec(3, 1, ExtElement(3, {0b1: 1}))
    spec = TwistSpec(3, 2)
    assert spec.lambda_class == ExtElement(3, {0: 1, 0b11: -2})


def test_lambda_rank():
    assert lambda_rank(0, "even") == 1 and lambda_rank(0, "odd") == 0
    assert [lambda_rank(m, "odd") for m in range(1, 5)] == [1, 2, 4, 8]


def test_invariant_subgroup_small_cases():
    assert invariant_subgroup(TwistSpec(2, 1), "odd") == [ExtElement.generator(1, 2), ExtElement.generator(2, 2)]
    assert invariant_subgroup(TwistSpec(2, 3), "even") == [ExtElement(2, {0b11: 1})]


def test_invariant_subgroup_rank_three_torus():
    # rank of Λ^even on 2 generators plus on 1 generator: 2 + 1
    basis = invariant_subgroup(TwistSpec(3, 1), "odd")
    assert len(basis) == lambda_rank(2, "even") + lambda_rank(1, "even") == 3
    c1 = TwistSpec(3, 1).c1
    assert all(c1.wedge(x).is_zero() for x in basis)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("parity", ["odd", "even"])
def test_invariant_subgroup_matches_explicit_basis(n, parity):
    low, mid = closed_form_invariant_basis(n, parity)
    opposite = "even" if parity == "odd" else "odd"
    assert len(low) == lambda_rank(n - 2, opposite)
    assert len(mid) == lambda_rank(n - 1, opposite)
    assert len(invariant_subgroup(TwistSpec(n, 4), parity)) == len(low) + len(mid)


@pytest.mark.parametrize(
    "n,k,degree,expected",
    [
        (2, 2, 1, AbelianGroup(3, (2,))),
        (2, 2, 0, AbelianGroup(3)),
        (2, 1, 1, AbelianGroup(3)),
        (3, 3, 1, AbelianGroup(6, (3,))),
        (4, -2, 0, AbelianGroup(12, (2, 2))),
    ],
)
def test_twisted_k_group_values(n, k, degree, expected):
    result = twisted_k_group(TwistSpec(n, k), degree)
    assert result.group == expected
    assert result.routes_agree


def test_twisted_k_group_summands():
    result = twisted_k_group(TwistSpec(2, 2), 1)
    assert [str(g) for g in result.summand_breakdown] == ["Z", "Z", "Z + Z/2"]
    total = result.summand_breakdown[0] + result.summand_breakdown[1] + result.summand_breakdown[2]
    assert total == result.group


@pytest.mark.slow
def test_two_routes_agree_on_full_grid():
    for n, k, degree in product(range(2, 7), range(-6, 7), (0, 1)):
        if k:
            assert twisted_k_group(TwistSpec(n, k), degree).routes_agree, (n, k, degree)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("k", [1, 2, -3, 6])
def test_torsion_equals_cyclic_power(n, k):
    for degree, parity in ((0, "odd"), (1, "even")):
        g = twisted_k_group(TwistSpec(n, k), degree).group
        expected = (abs(k),) * lambda_rank(n - 2, parity) if abs(k) > 1 else ()
        assert g.invariant_factors == expected


def test_generators_span_group():
    result = twisted_k_group(TwistSpec(3, 2), 1)
    assert len(result.generators) == result.group.free_rank + len(result.group.invariant_factors)


def test_general_curvature_is_accepted():
    twist = ExtElement(3, {0b011: 2, 0b110: 2})
    result = twisted_k_group(TwistSpec(3, 2, twist), 1)
    assert result.routes_agree is None
    assert result.group.invariant_factors == (2,)


# -- character quotients ----------------------------------------------------


def test_character_quotient_odd_n2():
    group, basis = character_quotient(TwistSpec(2, 5), "odd")
    assert group == AbelianGroup(1, (5,))
    # matches the quotient summand of K^1
    assert group == twisted_k_group(TwistSpec(2, 5), 1).summand_breakdown[2]
    assert basis == [dphi_wedge(ExtElement(2, {0b11: 5}))]
    assert character_quotient(TwistSpec(2, 1), "odd").group == AbelianGroup(1)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("k", [1, 3, -4])
def test_character_quotients_match_k_summands(n, k):
    spec = TwistSpec(n, k)
    assert character_quotient(spec, "odd").group == twisted_k_group(spec, 1).summand_breakdown[2]
    # even lattice carries both ds^dφ^Λ^even and dφ^Λ^odd
    even = character_quotient(spec, "even").group
    odd_quotient = twisted_k_group(spec, 0).summand_breakdown[2]
    assert even == character_quotient(spec, "odd").group + odd_quotient


def test_reduce_character_examples():
    spec = TwistSpec(2, 3)
    c = dphi_wedge(ExtElement(2, {0b11: 1}))
    assert reduce_character(dphi_wedge(ExtElement(2, {0b11: 3})), spec, "odd").is_zero()
    assert reduce_character(ExtElement(4), spec, "odd").is_zero()
    r1, r2, r3 = (reduce_character(c * j, spec, "odd") for j in (1, 2, 3))
    assert r1 != r2 and not r1.is_zero() and not r2.is_zero()
    assert r3.is_zero()


def test_reduce_character_rejects_non_lattice():
    spec = TwistSpec(2, 3)
    with pytest.raises(DomainError):
        reduce_character(ExtElement(4, {0b0100: 1}), spec, "odd")  # no dφ factor
    with pytest.raises(DomainError):
        reduce_character(ExtClassQ(4, {DPHI_BIT: Fraction(1, 2)}), spec, "odd")


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 4),
    st.sampled_from([1, 2, 3, -4]),
    st.lists(st.integers(-7, 7), min_size=8, max_size=8),
    st.lists(st.integers(-7, 7), min_size=8, max_size=8),
)
def test_reduction_is_idempotent_and_additive(n, k, a, b):
    spec = TwistSpec(n, k)
    cq = character_quotient(spec, "odd")
    basis = list(cq.lattice_basis)
    x = ExtElement.from_coordinates(n + 2, basis, a[: len(basis)])
    y = ExtElement.from_coordinates(n + 2, basis, b[: len(basis)])
    rx, ry = cq.reduce(x), cq.reduce(y)
    assert cq.reduce(rx) == rx
    assert cq.reduce(x + y) == cq.reduce(rx + ry)
    assert (rx == ry) == cq.contains(x - y)
    assert (rx == ry) == (cq.invariants(x) == cq.invariants(y))


def test_classify_supercharge_examples():
    spec = TwistSpec(2, 2)
    one = ExtElement.one(2)
    plus = classify_supercharge(one, 1, spec)
    minus = classify_supercharge(one, -1, spec)
    assert plus.representative == ExtClassQ(4, {DPHI_BIT: 1})
    assert minus.representative == ExtClassQ(4, {DPHI_BIT: -1})
    line = ExtElement(2, {0: 1, 0b11: 1})
    coset = classify_supercharge(line, 1, spec)
    assert coset.representative == ExtClassQ(4, {DPHI_BIT: 1, DPHI_BIT | 0b1100: 1})
    difference = supercharge_class(line, 1, spec) - supercharge_class(one, 1, spec)
    torsion_part = classify_supercharge(ExtElement(2, {0b11: 1}), 1, spec)
    assert torsion_part.order == 2
    assert not character_quotient(spec, "odd").contains(difference)


@pytest.mark.parametrize("n,k", [(2, 2), (3, 3), (4, -2)])
def test_classification_surjects(n, k):
    spec = TwistSpec(n, k)
    cq = character_quotient(spec, "odd")
    images = [supercharge_class(ExtElement(n, {m: 1}), 1, spec) for m in monomials(n, "even")]
    columns = [cq.coordinates(c) for c in images] + [list(r) for r in cq.reduction_rows]
    assert quotient_group(len(cq.lattice_basis), int_matrix(columns).T.copy()).is_trivial()


def test_even_classification():
    spec = TwistSpec(2, 3)
    # ds^dθ-free vacuum class of rank one on T_s × T^2 realized as dφ ^ dθ1
    xi = ExtElement(3, {0b010: 1})
    coset = classify_supercharge(xi, 1, spec, "even")
    assert coset.order == float("inf")
    zero = classify_supercharge(ExtElement(3, {0b001 | 0b110: 3}), -1, spec, "even")
    assert zero.representative.is_zero()


def test_json_shape():
    payload = json.loads(to_json(twisted_k_group(TwistSpec(2, 2), 1)))
    assert payload["free_rank"] == 3 and payload["invariant_factors"] == [2]
    assert payload["generators"][0] == [{"theta": [1], "coeff": "1"}]
    cq = json.loads(to_json(character_quotient(TwistSpec(2, 2), "odd")))
    assert cq["lattice_basis"][0] == ["dphi"]
