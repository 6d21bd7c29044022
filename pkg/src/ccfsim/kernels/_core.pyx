# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Bit-identical to ccfsim.kernels.py_impl (see its
docstring for the fixed PRG construction)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    static const uint64_t CCF_GAMMA = 0x9E3779B97F4A7C15ULL;
    static inline uint64_t ccf_mix64(uint64_t z) {
        z ^= z >> 30; z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27; z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }
    static inline uint64_t ccf_prg(uint64_t seed, uint64_t round_no,
                                   uint64_t index) {
        uint64_t counter = (round_no << 32) + index;
        return ccf_mix64(seed + (counter + 1) * CCF_GAMMA);
    }
    """
    cnp.uint64_t ccf_prg(cnp.uint64_t seed, cnp.uint64_t round_no,
                         cnp.uint64_t index) nogil


def prg_values(seed, round_no, dim):
    cdef cnp.uint64_t s = <cnp.uint64_t> seed
    cdef cnp.uint64_t r = <cnp.uint64_t> round_no
    cdef Py_ssize_t d = dim, k
    out = np.empty(d, dtype=np.uint64)
    cdef cnp.uint64_t[::1] o = out
    for k in range(d):
        o[k] = ccf_prg(s, r, <cnp.uint64_t> k)
    return out


def pair_masks(seed_matrix, round_no, dim):
    cdef cnp.uint64_t[:, ::1] seeds = np.ascontiguousarray(
        seed_matrix, dtype=np.uint64)
    cdef cnp.uint64_t r = <cnp.uint64_t> round_no
    cdef Py_ssize_t m = seeds.shape[0], d = dim
    cdef Py_ssize_t i, j, k
    cdef cnp.uint64_t v
    out = np.zeros((m, d), dtype=np.uint64)
    cdef cnp.uint64_t[:, ::1] o = out
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(d):
                v = ccf_prg(seeds[i, j], r, <cnp.uint64_t> k)
                o[i, k] += v
                o[j, k] -= v
    return out


def pairwise_sq_sum(x):
    cdef double[:, ::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double total = 0.0, acc, diff
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            acc = 0.0
            for k in range(d):
                diff = a[i, k] - a[j, k]
                acc += diff * diff
            total += acc
    return total
