# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte-Carlo kernels.

Implements the draw rules documented in :mod:`mclr.rng` for one stream per
replication. All loops run without the GIL.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, cos, M_PI
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef uint64_t M0 = 0xD2511F53
cdef uint64_t M1 = 0xCD9E8D57
cdef uint32_t W0 = 0x9E3779B9
cdef uint32_t W1 = 0xBB67AE85
cdef int CHI2_SUM_CUTOFF = 30

ctypedef struct Stream:
    uint64_t seed
    uint64_t stream
    uint64_t block


cdef inline void philox(uint32_t* ctr, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3]
    cdef int i
    for i in range(10):
        p0 = M0 * <uint64_t>c0
        p1 = M1 * <uint64_t>c2
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
        k0 = k0 + W0
        k1 = k1 + W1
    ctr[0] = c0
    ctr[1] = c1
    ctr[2] = c2
    ctr[3] = c3


cdef inline double to_unit(uint64_t w) noexcept nogil:
    return (<double>(w >> 11) + 0.5) * 1.1102230246251565e-16


cdef inline void next_block(Stream* s, double* ua, double* ub) noexcept nogil:
    cdef uint32_t ctr[4]
    ctr[0] = <uint32_t>s.block
    ctr[1] = <uint32_t>(s.block >> 32)
    ctr[2] = <uint32_t>s.stream
    ctr[3] = <uint32_t>(s.stream >> 32)
    philox(ctr, <uint32_t>s.seed, <uint32_t>(s.seed >> 32))
    s.block += 1
    ua[0] = to_unit(<uint64_t>ctr[0] | (<uint64_t>ctr[1] << 32))
    ub[0] = to_unit(<uint64_t>ctr[2] | (<uint64_t>ctr[3] << 32))


cdef inline double st_normal(Stream* s) noexcept nogil:
    cdef double ua, ub
    next_block(s, &ua, &ub)
    return sqrt(-2.0 * log(ua)) * cos(2.0 * M_PI * ub)


cdef inline double st_uniform(Stream* s) noexcept nogil:
    cdef double ua, ub
    next_block(s, &ua, &ub)
    return ua


cdef double st_gamma(Stream* s, double shape) noexcept nogil:
    cdef double d = shape - 1.0 / 3.0
    cdef double c = 1.0 / sqrt(9.0 * d)
    cdef double x, u, v
    while True:
        x = st_normal(s)
        u = st_uniform(s)
        v = 1.0 + c * x
        if v > 0.0:
            v = v * v * v
        else:
            v = 1.0
            continue
        if log(u) < 0.5 * x * x + d - d * v + d * log(v):
            return d * v


cdef double st_chi2(Stream* s, long df) noexcept nogil:
    cdef double prod = 1.0, ua, ub, out, z
    cdef long i
    if df <= CHI2_SUM_CUTOFF:
        for i in range(df // 2):
            next_block(s, &ua, &ub)
            prod *= ua
        out = -2.0 * log(prod)
        if df % 2:
            z = st_normal(s)
            out += z * z
        return out
    return 2.0 * st_gamma(s, 0.5 * df)


def draw_components(uint64_t seed, uint64_t start, Py_ssize_t count, long n, long k):
    """
    Tau-free building blocks of the conditional draws for one endogenous regressor.

    Stream ``start + i`` yields ``z`` (standard normal), ``r`` (chi-square
    with ``k - 1`` df, zero when ``k == 1``) and the identity-scale Wishart
    entries ``(w11, w12, w22)`` with ``n - k`` df.
    """
    cdef cnp.ndarray[double] z = np.empty(count)
    cdef cnp.ndarray[double] r = np.empty(count)
    cdef cnp.ndarray[double] w11 = np.empty(count)
    cdef cnp.ndarray[double] w12 = np.empty(count)
    cdef cnp.ndarray[double] w22 = np.empty(count)
    cdef double* zp = &z[0] if count else NULL
    cdef double* rp = &r[0] if count else NULL
    cdef double* ap = &w11[0] if count else NULL
    cdef double* bp = &w12[0] if count else NULL
    cdef double* cp = &w22[0] if count else NULL
    cdef long df = n - k
    cdef Py_ssize_t i
    cdef Stream s
    cdef double a00, a10, a11
    with nogil:
        for i in range(count):
            s.seed = seed
            s.stream = start + i
            s.block = 0
            zp[i] = st_normal(&s)
            rp[i] = st_chi2(&s, k - 1) if k > 1 else 0.0
            a00 = sqrt(st_chi2(&s, df))
            a10 = st_normal(&s)
            a11 = sqrt(st_chi2(&s, df - 1))
            ap[i] = a00 * a00
            bp[i] = a00 * a10
            cp[i] = a10 * a10 + a11 * a11
    return z, r, w11, w12, w22


def stream_normals(uint64_t seed, uint64_t stream, uint64_t start_block, Py_ssize_t count):
    """``count`` normals from consecutive blocks of one stream."""
    cdef cnp.ndarray[double] out = np.empty(count)
    cdef double* op = &out[0] if count else NULL
    cdef Stream s
    cdef Py_ssize_t i
    s.seed = seed
    s.stream = stream
    s.block = start_block
    with nogil:
        for i in range(count):
            op[i] = st_normal(&s)
    return out
