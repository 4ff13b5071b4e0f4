import math
from fractions import Fraction

import pytest
from hypothesis import given
from strategies import scalars

from twistk.scalars import I, ONE, Scalar


def test_two_pi_is_twice_sqrt_pi_squared():
    assert Scalar.two_pi() == Scalar.sqrt_pi(2) * 2
    assert Scalar.two_pi() * Scalar.two_pi(-1) == ONE
    assert complex(Scalar.two_pi(-1)) == pytest.approx(1 / (2 * math.pi))


def test_gaussian_arithmetic():
    assert I * I == -1
    z = Scalar.gaussian(3, 4)
    assert z * z.conjugate() == 25
    assert z / z == ONE
    assert Scalar.gaussian(Fraction(1, 2)) + Fraction(1, 2) == ONE


def test_non_units_and_inexact_values_raise():
    with pytest.raises(ZeroDivisionError):
        (ONE + Scalar.sqrt_pi()).inverse()
    with pytest.raises(TypeError):
        Scalar.coerce(0.5)
    with pytest.raises(TypeError):
        Scalar.coerce(True)


@given(scalars(powers=(-1, 0, 2)), scalars(powers=(-1, 0, 2)), scalars(powers=(-1, 0, 2)))
def test_ring_axioms(a, b, c):
    assert a * (b + c) == a * b + a * c
    assert (a * b) * c == a * (b * c)
    assert a * b == b * a
    assert a - a == Scalar()
    assert complex(a * b) == pytest.approx(complex(a) * complex(b), abs=1e-9)


def test_json_round_trip_shape():
    payload = (Scalar.gaussian(Fraction(1, 3), -2, sqrt_pi_power=-2)).to_json()
    assert payload == [{"sqrt_pi_power": -2, "re": [1, 3], "im": [-2, 1]}]
