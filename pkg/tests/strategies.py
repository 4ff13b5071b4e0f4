"""Hypothesis strategies shared across the test modules."""

from hypothesis import strategies as st

from twistk.lattice_algebra import ExtElement, int_matrix


def ext_elements(n, max_terms=5, max_coeff=9):
    masks = st.integers(min_value=0, max_value=(1 << n) - 1)
    coeffs = st.integers(min_value=-max_coeff, max_value=max_coeff)
    return st.dictionaries(masks, coeffs, max_size=max_terms).map(lambda d: ExtElement(n, d))


@st.composite
def int_matrices(draw, max_rows=4, max_cols=4, max_entry=12):
    rows = draw(st.integers(1, max_rows))
    cols = draw(st.integers(1, max_cols))
    entries = draw(
        st.lists(
            st.integers(-max_entry, max_entry), min_size=rows * cols, max_size=rows * cols
        )
    )
    return int_matrix(entries, (rows, cols))


def scalars(max_coeff=5, powers=(0,)):
    from twistk.scalars import Scalar

    part = st.integers(-max_coeff, max_coeff)
    return st.dictionaries(st.sampled_from(powers), st.tuples(part, part), max_size=2).map(Scalar)


def fourier_forms(n, max_terms=4, max_mode=2, with_s=True, masks=None):
    from twistk.form_calculus import FourierForm

    mode = st.integers(-max_mode, max_mode)
    s_mode = mode if with_s else st.just(0)
    if masks is None:
        masks = st.integers(0, (1 << (n + 2)) - 1)
        if not with_s:
            masks = masks.map(lambda m: m & ~1)
    key = st.tuples(s_mode, mode, masks)
    return st.dictionaries(key, scalars(powers=(0, -2)), max_size=max_terms).map(
        lambda d: FourierForm(n, d)
    )
