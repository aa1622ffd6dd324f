# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled point energy kernel; same contract as dcone._kernels_py.point_energy."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def point_energy(double[:, :, ::1] Y, double[:, :, ::1] P, double[:, :, ::1] Q,
                 double[::1] rq, double[::1] area, cnp.int64_t[:, ::1] idx,
                 double[:, ::1] w0, double[:, ::1] w1, double[:, ::1] w2, double h2,
                 double[::1] mem_out, double[::1] bend_out, grads=None):
    cdef Py_ssize_t npt = idx.shape[0]
    cdef Py_ssize_t nth = Y.shape[1]
    cdef Py_ssize_t nst = idx.shape[1]
    cdef Py_ssize_t q, j, k, m, ring
    cdef double r, ir, ir2, w, wb, s0, s1, s2
    cdef double a[3]
    cdef double b[3]
    cdef double d[3]
    cdef double e[3]
    cdef double f[3]
    cdef double T[3]
    cdef double V[3]
    cdef double g11, g12, g22, mem, bend, msum, bsum, c11, c12, c22, da, db, dd, de, df
    cdef bint want = grads is not None
    cdef double[:, :, ::1] GY
    cdef double[:, :, ::1] GP
    cdef double[:, :, ::1] GQ

    if want:
        GY, GP, GQ = grads

    for q in range(npt):
        r = rq[q]
        ir = 1.0 / r
        ir2 = ir * ir
        w = area[q]
        wb = h2 * w
        msum = 0.0
        bsum = 0.0
        for j in range(nth):
            g11 = 0.0
            g12 = 0.0
            g22 = 0.0
            bend = 0.0
            for k in range(3):
                a[k] = 0.0
                b[k] = 0.0
                d[k] = 0.0
                e[k] = 0.0
                f[k] = 0.0
                for m in range(nst):
                    ring = idx[q, m]
                    s0 = w0[q, m]
                    s1 = w1[q, m]
                    a[k] += s1 * Y[ring, j, k]
                    f[k] += w2[q, m] * Y[ring, j, k]
                    b[k] += s0 * P[ring, j, k]
                    d[k] += s0 * Q[ring, j, k]
                    e[k] += s1 * P[ring, j, k]
                T[k] = e[k] * ir - b[k] * ir2
                V[k] = d[k] * ir2 + a[k] * ir
                g11 += a[k] * a[k]
                g12 += a[k] * b[k]
                g22 += b[k] * b[k]
                bend += f[k] * f[k] + 2.0 * T[k] * T[k] + V[k] * V[k]
            g12 *= ir
            g22 *= ir2
            mem = (g11 - 1.0) * (g11 - 1.0) + 2.0 * g12 * g12 + (g22 - 1.0) * (g22 - 1.0)
            msum += mem
            bsum += bend
            if want:
                c11 = 4.0 * (g11 - 1.0)
                c12 = 4.0 * g12
                c22 = 4.0 * (g22 - 1.0)
                for k in range(3):
                    da = w * (c11 * a[k] + c12 * b[k] * ir) + wb * (2.0 * V[k] * ir)
                    db = w * (c12 * a[k] * ir + c22 * b[k] * ir2) - wb * (4.0 * T[k] * ir2)
                    dd = wb * (2.0 * V[k] * ir2)
                    de = wb * (4.0 * T[k] * ir)
                    df = wb * (2.0 * f[k])
                    for m in range(nst):
                        ring = idx[q, m]
                        s0 = w0[q, m]
                        s1 = w1[q, m]
                        s2 = w2[q, m]
                        GY[ring, j, k] += s1 * da + s2 * df
                        GP[ring, j, k] += s0 * db + s1 * de
                        GQ[ring, j, k] += s0 * dd
        mem_out[q] = w * msum
        bend_out[q] = w * bsum
