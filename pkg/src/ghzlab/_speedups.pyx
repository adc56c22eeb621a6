# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trial kernel.  Must agree bit-for-bit with ``_kernel_py``."""

from libc.stdint cimport uint64_t, int64_t, uint8_t, int16_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double uniform(uint64_t trial_key, uint64_t k) noexcept nogil:
    return <double>(mix64(trial_key + GOLDEN * (k + 1)) >> 11) * TWO_M53


cdef inline Py_ssize_t pick(const double[:] cum, double u) noexcept nogil:
    cdef Py_ssize_t j = 0
    while cum[j] <= u:
        j += 1
    return j


def trial_uniforms(uint64_t key, int64_t index, int count):
    """First ``count`` uniforms of one trial's stream (for cross-checking)."""
    cdef uint64_t tk = mix64(key + GOLDEN * <uint64_t>(index + 1))
    return [uniform(tk, k) for k in range(count)]


def run_block(uint64_t key, int64_t start, int64_t stop,
              const double[:] q_cum, const double[:, :] a_cum,
              const uint8_t[:, :] win, const uint8_t[:] detected,
              int16_t[:] out_q=None, int16_t[:] out_a=None):
    """Play trials ``start..stop-1``; returns ``(wins, trials_with_nodetect)``."""
    cdef int64_t i
    cdef uint64_t tk
    cdef Py_ssize_t qi, ai
    cdef int64_t wins = 0, nodetect = 0
    cdef bint record = out_q is not None
    with nogil:
        for i in range(start, stop):
            tk = mix64(key + GOLDEN * <uint64_t>(i + 1))
            qi = pick(q_cum, uniform(tk, 0))
            ai = pick(a_cum[qi], uniform(tk, 1))
            if not detected[ai]:
                nodetect += 1
            elif win[qi, ai]:
                wins += 1
            if record:
                out_q[i - start] = <int16_t>qi
                out_a[i - start] = <int16_t>ai
    return wins, nodetect
