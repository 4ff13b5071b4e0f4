"""Pure-Python reference kernels.

These are the fallback used when the compiled ``_ckernels`` extension is not
available, and the ground truth the compiled versions are tested against.
"""

import numpy as np


def reorder_sign(a, b):
    """Sign of ``e_a ^ e_b`` relative to the sorted monomial ``e_{a|b}``.

    ``a`` and ``b`` are bitmasks of generator positions. Returns 0 when the
    masks overlap (the wedge vanishes).
    """
    if a & b:
        return 0
    swaps = 0
    while b:
        low = b & -b
        # generators of ``a`` above this generator of ``b`` must hop over it
        swaps += bin(a & ~((low << 1) - 1)).count("1")
        b ^= low
    return -1 if swaps & 1 else 1


def wedge_sign_table(a_masks, b_masks):
    a_masks = np.asarray(a_masks, dtype=np.int64)
    b_masks = np.asarray(b_masks, dtype=np.int64)
    out = np.zeros((a_masks.size, b_masks.size), dtype=np.int8)
    for i, a in enumerate(a_masks.tolist()):
        for j, b in enumerate(b_masks.tolist()):
            out[i, j] = reorder_sign(a, b)
    return out


def fermion_ladder(masks, bit, create):
    """Apply a creation (``create=True``) or annihilation at ``bit`` to
    occupation bitmasks.

    Monomials are ordered with the highest set bit leftmost, so the sign is
    the parity of occupied bits above ``bit``. Returns ``(new_masks, signs)``
    with sign 0 where the action vanishes.
    """
    masks = np.asarray(masks, dtype=np.int64)
    new = masks.copy()
    signs = np.zeros(masks.size, dtype=np.int8)
    flag = 1 << bit
    above = ~((flag << 1) - 1)
    for i, m in enumerate(masks.tolist()):
        occupied = bool(m & flag)
        if occupied == create:
            continue
        new[i] = m ^ flag
        signs[i] = -1 if bin(m & above).count("1") & 1 else 1
    return new, signs


def greedy_match(overlap, values_a, values_b):
    """Match rows to columns by descending overlap.

    Ties (overlaps equal to 1e-9) are broken by eigenvalue proximity. Returns
    ``perm`` with ``perm[i]`` the column matched to row ``i``.
    """
    overlap = np.asarray(overlap, dtype=np.float64)
    n = overlap.shape[0]
    values_a = np.asarray(values_a, dtype=np.float64)
    values_b = np.asarray(values_b, dtype=np.float64)
    order = sorted(
        ((i, j) for i in range(n) for j in range(n)),
        key=lambda ij: (-round(overlap[ij] * 1e9), abs(values_a[ij[0]] - values_b[ij[1]])),
    )
    perm = np.full(n, -1, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    matched = 0
    for i, j in order:
        if perm[i] >= 0 or used[j]:
            continue
        perm[i] = j
        used[j] = True
        matched += 1
        if matched == n:
            break
    return perm
