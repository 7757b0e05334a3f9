# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled selection and drawing kernels.

Mirrors pure.py operation for operation: same gather order, the same
left-to-right accumulations, libm pow. Keep the two files in sync; the
parity test suite compares them bit for bit on fuzzed inputs.
"""

from libc.math cimport pow as c_pow
from libc.stdlib cimport free, malloc


cdef struct Pair:
    double w
    Py_ssize_t id


cdef void _sort_pairs(Pair* a, Py_ssize_t n) noexcept nogil:
    # insertion sort: w descending, id ascending; n is small (vocab size)
    cdef Py_ssize_t i, j
    cdef Pair v
    for i in range(1, n):
        v = a[i]
        j = i - 1
        while j >= 0 and (a[j].w < v.w or (a[j].w == v.w and a[j].id > v.id)):
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


cdef Py_ssize_t _gather(const double[::1] probs, mask, Pair* a) except -1:
    """Collect (probability, id) pairs for allowed ids, in id order."""
    cdef Py_ssize_t n = probs.shape[0]
    cdef Py_ssize_t i, cnt = 0
    cdef const unsigned char[::1] m
    if mask is None:
        for i in range(n):
            a[i].w = probs[i]
            a[i].id = i
        cnt = n
    else:
        m = mask
        for i in range(n):
            if m[i]:
                a[cnt].w = probs[i]
                a[cnt].id = i
                cnt += 1
    return cnt


def topk_all(const double[::1] probs, Py_ssize_t k):
    return topk_masked(probs, None, k)


def topk_masked(const double[::1] probs, mask, Py_ssize_t k):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Pair* a = <Pair*>malloc(n * sizeof(Pair)) if n else NULL
    if n and a == NULL:
        raise MemoryError()
    cdef Py_ssize_t cnt, i
    try:
        cnt = _gather(probs, mask, a)
        _sort_pairs(a, cnt)
        if k < cnt:
            cnt = k
        if cnt < 0:
            cnt = 0
        return [(a[i].w, a[i].id) for i in range(cnt)]
    finally:
        free(a)


def nucleus_pick(const double[::1] probs, mask, double inv_tau, double top_p, double u):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Pair* a = <Pair*>malloc(n * sizeof(Pair)) if n else NULL
    if n and a == NULL:
        raise MemoryError()
    cdef Py_ssize_t cnt, j, kept_n
    cdef double total = 0.0, total2 = 0.0, cum = 0.0, c = 0.0
    try:
        cnt = _gather(probs, mask, a)
        for j in range(cnt):
            a[j].w = c_pow(a[j].w, inv_tau)
            total += a[j].w
        if total <= 0.0:
            return -1
        for j in range(cnt):
            a[j].w = a[j].w / total
        _sort_pairs(a, cnt)
        kept_n = 0
        for j in range(cnt):
            if cum < top_p:
                kept_n += 1
                cum += a[j].w
            else:
                break
        for j in range(kept_n):
            total2 += a[j].w
        if total2 <= 0.0:
            return -1
        for j in range(kept_n):
            c += a[j].w / total2
            if u < c:
                return a[j].id
        return a[kept_n - 1].id
    finally:
        free(a)


def topk_pick(const double[::1] probs, mask, Py_ssize_t k, double inv_tau, double u):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Pair* a = <Pair*>malloc(n * sizeof(Pair)) if n else NULL
    if n and a == NULL:
        raise MemoryError()
    cdef Py_ssize_t cnt, kept_n, j
    cdef double total = 0.0, c = 0.0
    try:
        cnt = _gather(probs, mask, a)
        _sort_pairs(a, cnt)
        kept_n = cnt if k >= cnt else k
        for j in range(kept_n):
            a[j].w = c_pow(a[j].w, inv_tau)
            total += a[j].w
        if total <= 0.0:
            return -1
        for j in range(kept_n):
            c += a[j].w / total
            if u < c:
                return a[j].id
        return a[kept_n - 1].id
    finally:
        free(a)
