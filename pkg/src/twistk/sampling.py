"""Seeded random inputs for the randomized checks (CLI and acceptance suite).

All generators draw from a ``numpy.random.Generator`` so a seed fixes the
whole stream.
"""

from __future__ import annotations

import numpy as np

from .form_calculus import DPHI, DS, CurvatureData, FourierForm, harmonic_twist
from .lattice_algebra import ExtElement, monomials
from .scalars import Scalar


def _scalar(rng, max_coeff=4, powers=(0,)):
    while True:
        re, im = (int(x) for x in rng.integers(-max_coeff, max_coeff + 1, size=2))
        if re or im:
            return Scalar.gaussian(re, im, int(rng.choice(powers)))


def standard_twist(n: int, k: int) -> FourierForm:
    """``H = (dφ/2π) ^ k dθ1 ^ dθ2``."""
    return harmonic_twist(n, ExtElement.monomial([1, 2], n, k))


def random_admissible_form(rng, n: int, max_terms: int = 20, max_mode: int = 3) -> FourierForm:
    """A form on ``T_φ × T^n`` whose ``dφ``-free terms all oscillate in ``φ``."""
    terms = {}
    size = int(rng.integers(1, max_terms + 1))
    for _ in range(size):
        mask = int(rng.integers(0, 1 << (n + 2))) & ~DS
        kp = int(rng.integers(-max_mode, max_mode + 1))
        if not mask & DPHI and kp == 0:
            kp = int(rng.choice([-1, 1])) * int(rng.integers(1, max_mode + 1))
        key = (0, kp, mask)
        terms[key] = terms.get(key, Scalar()) + _scalar(rng, powers=(0, -2))
    return FourierForm(n, terms)


def random_form(rng, n: int, max_terms: int = 6, max_mode: int = 2) -> FourierForm:
    terms = {}
    for _ in range(int(rng.integers(0, max_terms + 1))):
        mask = int(rng.integers(0, 1 << (n + 2)))
        key = (int(rng.integers(-max_mode, max_mode + 1)), int(rng.integers(-max_mode, max_mode + 1)), mask)
        terms[key] = terms.get(key, Scalar()) + _scalar(rng)
    return FourierForm(n, terms)


def random_gauge_form(rng, n: int, max_terms: int = 3, max_mode: int = 2) -> FourierForm:
    """An even form without a degree-0 part."""
    masks = [m for m in range(1, 1 << (n + 2)) if bin(m).count("1") % 2 == 0]
    terms = {}
    for _ in range(int(rng.integers(1, max_terms + 1))):
        key = (
            int(rng.integers(-max_mode, max_mode + 1)),
            int(rng.integers(-max_mode, max_mode + 1)),
            int(rng.choice(masks)),
        )
        terms[key] = terms.get(key, Scalar()) + _scalar(rng, max_coeff=2)
    return FourierForm(n, terms)


def random_curvature(rng, n: int, max_lines: int = 3, max_coeff: int = 3) -> CurvatureData:
    """Line bundles with random integral Chern classes plus a trivial part."""
    two_forms = monomials(n, degree=2)
    lines = []
    for _ in range(int(rng.integers(0, max_lines + 1))):
        coeffs = rng.integers(-max_coeff, max_coeff + 1, size=len(two_forms))
        lines.append(ExtElement(n, {m: int(c) for m, c in zip(two_forms, coeffs) if c}))
    return CurvatureData(n, tuple(lines), trivial_rank=int(rng.integers(0, 3)))
