# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_kernels_py``; same signatures."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline int _popcount(long long x) nogil:
    return __builtin_popcountll(<unsigned long long> x)


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int _reorder_sign(long long a, long long b) nogil:
    cdef long long low
    cdef int swaps = 0
    if a & b:
        return 0
    while b:
        low = b & -b
        swaps += _popcount(a & ~((low << 1) - 1))
        b ^= low
    return -1 if swaps & 1 else 1


def reorder_sign(long long a, long long b):
    return _reorder_sign(a, b)


def wedge_sign_table(a_masks, b_masks):
    cdef cnp.int64_t[:] a = np.ascontiguousarray(a_masks, dtype=np.int64)
    cdef cnp.int64_t[:] b = np.ascontiguousarray(b_masks, dtype=np.int64)
    out_arr = np.zeros((a.shape[0], b.shape[0]), dtype=np.int8)
    cdef cnp.int8_t[:, :] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(a.shape[0]):
            for j in range(b.shape[0]):
                out[i, j] = _reorder_sign(a[i], b[j])
    return out_arr


def fermion_ladder(masks, int bit, bint create):
    cdef cnp.int64_t[:] m = np.ascontiguousarray(masks, dtype=np.int64)
    new_arr = np.array(m, dtype=np.int64, copy=True)
    signs_arr = np.zeros(m.shape[0], dtype=np.int8)
    cdef cnp.int64_t[:] new = new_arr
    cdef cnp.int8_t[:] signs = signs_arr
    cdef long long flag = (<long long> 1) << bit
    cdef long long above = ~((flag << 1) - 1)
    cdef Py_ssize_t i
    cdef bint occupied
    with nogil:
        for i in range(m.shape[0]):
            occupied = (m[i] & flag) != 0
            if occupied == create:
                continue
            new[i] = m[i] ^ flag
            signs[i] = -1 if _popcount(m[i] & above) & 1 else 1
    return new_arr, signs_arr


def greedy_match(overlap, values_a, values_b):
    ov = np.ascontiguousarray(overlap, dtype=np.float64)
    cdef Py_ssize_t n = ov.shape[0]
    va = np.asarray(values_a, dtype=np.float64)
    vb = np.asarray(values_b, dtype=np.float64)
    primary = -np.rint(ov * 1e9).ravel()
    secondary = np.abs(va[:, None] - vb[None, :]).ravel()
    cdef cnp.int64_t[:] order = np.lexsort((secondary, primary)).astype(np.int64)
    perm_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[:] perm = perm_arr
    used_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[:] used = used_arr
    cdef Py_ssize_t k, i, j, matched = 0
    with nogil:
        for k in range(order.shape[0]):
            i = order[k] // n
            j = order[k] % n
            if perm[i] >= 0 or used[j]:
                continue
            perm[i] = j
            used[j] = 1
            matched += 1
            if matched == n:
                break
    return perm_arr
