"""Hot bit-twiddling and branch-matching kernels with backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python reference in ``_kernels_py`` is used. ``use_backend`` switches at
runtime, which the tests and the benchmark rely on.
"""

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _kernels_py}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = _ckernels if _ckernels is not None else _kernels_py


def available_backends():
    return sorted(_BACKENDS)


def backend():
    return "compiled" if _active is _ckernels and _ckernels is not None else "python"


def use_backend(name):
    """Select ``"python"`` or ``"compiled"``; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}")
    previous = backend()
    _active = _BACKENDS[name]
    return previous


def reorder_sign(a, b):
    return _active.reorder_sign(a, b)


def wedge_sign_table(a_masks, b_masks):
    return _active.wedge_sign_table(a_masks, b_masks)


def fermion_ladder(masks, bit, create):
    return _active.fermion_ladder(masks, bit, create)


def greedy_match(overlap, values_a, values_b):
    return _active.greedy_match(overlap, values_a, values_b)
