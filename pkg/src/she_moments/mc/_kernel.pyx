# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled explicit Euler stepper for one replication.

Arithmetic order matches ``_fallback.run_path`` exactly; together with the
shared numpy bit generator this makes both backends bit-identical.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t

cdef extern from "numpy/random/distributions.h":
    double random_standard_normal(bitgen_t *bitgen_state) nogil

cnp.import_array()

cdef enum:
    RHO_LINEAR = 0
    RHO_QUASI = 1
    RHO_TABLE = 2


cdef inline double _rho(double u, int mode, double lam, double sig2,
                        const double *knots, const double *vals, const double *slopes,
                        Py_ssize_t nk) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid
    if mode == RHO_LINEAR:
        return lam * u
    if mode == RHO_QUASI:
        return lam * sqrt(sig2 + u * u)
    # largest k with knots[k] <= u, clipped to [0, nk - 2]
    lo = 0
    hi = nk - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if knots[mid] <= u:
            lo = mid
        else:
            hi = mid
    if u >= knots[nk - 1]:
        lo = nk - 2
    return vals[lo] + slopes[lo] * (u - knots[lo])


def run_path(double[::1] u0, Py_ssize_t n_steps, double r, double noise_scale,
             int mode, double lam, double sig2,
             const double[::1] knots, const double[::1] vals, const double[::1] slopes,
             const cnp.int64_t[::1] record_steps, const cnp.int64_t[::1] record_nodes,
             object generator):
    """Advance ``u0`` by ``n_steps`` and return the field at the recorded (step, node) pairs."""
    cdef Py_ssize_t n_nodes = u0.shape[0]
    cdef Py_ssize_t nr = record_steps.shape[0]
    cdef Py_ssize_t nn = record_nodes.shape[0]
    cdef Py_ssize_t nk = knots.shape[0]
    cdef Py_ssize_t n, j, k, ri = 0
    cdef double uj, lap, xi
    cdef bitgen_t *rng
    cdef const double *kp = NULL
    cdef const double *vp = NULL
    cdef const double *sp = NULL

    bit_gen = generator.bit_generator
    capsule = bit_gen.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("generator does not expose a numpy BitGenerator")
    rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
    if mode == RHO_TABLE:
        if nk < 2:
            raise ValueError("rho table needs at least two knots")
        kp = &knots[0]
        vp = &vals[0]
        sp = &slopes[0]

    a_np = np.array(u0, dtype=np.float64, copy=True)
    b_np = np.zeros(n_nodes, dtype=np.float64)
    out_np = np.empty((nr, nn), dtype=np.float64)
    cdef double[::1] a = a_np
    cdef double[::1] b = b_np
    cdef double[:, ::1] out = out_np
    cdef double[::1] tmp

    a[0] = 0.0
    a[n_nodes - 1] = 0.0
    while ri < nr and record_steps[ri] == 0:
        for k in range(nn):
            out[ri, k] = a[record_nodes[k]]
        ri += 1

    with bit_gen.lock:
        for n in range(n_steps):
            with nogil:
                for j in range(1, n_nodes - 1):
                    xi = random_standard_normal(rng)
                    uj = a[j]
                    lap = (a[j + 1] - 2.0 * uj) + a[j - 1]
                    b[j] = (uj + r * lap) + (_rho(uj, mode, lam, sig2, kp, vp, sp, nk) * xi) * noise_scale
            tmp = a
            a = b
            b = tmp
            while ri < nr and record_steps[ri] == n + 1:
                for k in range(nn):
                    out[ri, k] = a[record_nodes[k]]
                ri += 1
            if ri == nr:
                break
    return out_np
