# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled longest-prefix search over a flattened ternary tree snapshot.

The tree proper lives in clarens.ternary as python objects; lookups run
against immutable int arrays so the hot path stays in C.
"""

from cpython.bytes cimport PyBytes_AS_STRING, PyBytes_GET_SIZE

cdef class Snapshot:
    cdef int[::1] c0
    cdef int[::1] c1
    cdef int[::1] lo
    cdef int[::1] eq
    cdef int[::1] hi
    cdef unsigned char[::1] flags
    cdef Py_ssize_t n_nodes

    def __init__(self, int[::1] c0, int[::1] c1, int[::1] lo,
                 int[::1] eq, int[::1] hi, unsigned char[::1] flags):
        self.c0 = c0
        self.c1 = c1
        self.lo = lo
        self.eq = eq
        self.hi = hi
        self.flags = flags
        self.n_nodes = c0.shape[0]

    def longest_prefix_match(self, bytes query):
        cdef const unsigned char* s = <const unsigned char*> PyBytes_AS_STRING(query)
        cdef Py_ssize_t n = PyBytes_GET_SIZE(query)
        cdef Py_ssize_t i = 0
        cdef int node = 0 if self.n_nodes > 0 else -1
        cdef Py_ssize_t best = -1
        cdef int q0, q1, f0, f1
        cdef unsigned char fl
        while node >= 0 and i < n:
            q0 = s[i]
            q1 = s[i + 1] if i + 1 < n else -1
            f0 = self.c0[node]
            f1 = self.c1[node]
            if q0 == f0:
                fl = self.flags[node]
                if f1 >= 0 and (fl & 2):
                    best = i + 1          # stored string ends at this node's first byte
                if f1 < 0:
                    i += 1
                    if fl & 1:
                        best = i
                    node = self.eq[node]
                elif q1 == f1:
                    i += 2
                    if fl & 1:
                        best = i
                    node = self.eq[node]
                elif q1 < 0:
                    break                  # query exhausted mid-fragment
                elif q1 < f1:
                    node = self.lo[node]
                else:
                    node = self.hi[node]
            elif q0 < f0:
                node = self.lo[node]
            else:
                node = self.hi[node]
        return None if best < 0 else best
