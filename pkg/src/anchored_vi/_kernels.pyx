# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling kernels.

Must stay bit-compatible with ``_pykernels``: same SplitMix64 stream, same
53-bit uniform construction, same inverse-CDF search.
"""
from libc.stdint cimport int64_t, uint64_t
from cython.parallel cimport prange

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t j) noexcept nogil:
    return <double>(_mix(key + (j + 1) * GOLDEN) >> 11) * TWO_M53


cdef inline Py_ssize_t _search(const double* cdf, Py_ssize_t n, double u) noexcept nogil:
    # number of entries <= u, i.e. first index with cdf[idx] > u; branchless so
    # random uniforms do not stall on mispredictions; cdf[n-1] == 1.0 > u
    cdef const double* base = cdf
    cdef Py_ssize_t length = n, half, i, count = 0
    if n <= 16:
        # short rows: independent compares beat the serial search chain
        for i in range(n - 1):
            count += cdf[i] <= u
        return count
    while length > 1:
        half = length >> 1
        base = base + half if base[half - 1] <= u else base
        length -= half
    return base - cdf


cdef void _fill_row(const double* cdf, Py_ssize_t n, uint64_t key,
                    uint64_t j0, int64_t m, int64_t* out) noexcept nogil:
    cdef int64_t j
    for j in range(m):
        out[_search(cdf, n, _uniform(key, j0 + <uint64_t>j))] += 1


def draw_counts(const double[:, ::1] cdf, const uint64_t[::1] keys, int64_t m,
                int64_t[:, ::1] out, int nthreads=1, uint64_t j0=0):
    """Add the next-state counts of draws ``j0 .. j0+m-1`` of each row to ``out``."""
    cdef Py_ssize_t rows = cdf.shape[0], n = cdf.shape[1], row
    if keys.shape[0] != rows or out.shape[0] != rows or out.shape[1] != n:
        raise ValueError("shape mismatch")
    if nthreads < 1:
        nthreads = 1
    with nogil:
        for row in prange(rows, num_threads=nthreads, schedule="static"):
            _fill_row(&cdf[row, 0], n, keys[row], j0, m, &out[row, 0])


def draw_states(const double[::1] cdf, uint64_t key, uint64_t j0, int64_t count):
    """Next states for draws ``j0 .. j0+count-1`` of one row."""
    import numpy as np
    res = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] view = res
    cdef Py_ssize_t n = cdf.shape[0]
    cdef int64_t j
    with nogil:
        for j in range(count):
            view[j] = _search(&cdf[0], n, _uniform(key, j0 + <uint64_t>j))
    return res


def walk_visits(const double[:, ::1] cdf, Py_ssize_t start, int64_t horizon,
                uint64_t key, int64_t[::1] visits):
    """Visit counts of a ``horizon``-step trajectory from ``start``.

    Step ``t`` leaves the current state using draw ``t`` of ``key``.
    """
    cdef Py_ssize_t n = cdf.shape[0], s = start
    cdef int64_t t
    if cdf.shape[1] != n or visits.shape[0] != n:
        raise ValueError("shape mismatch")
    with nogil:
        for t in range(horizon):
            visits[s] += 1
            if t + 1 < horizon:
                s = _search(&cdf[s, 0], n, _uniform(key, <uint64_t>t))
