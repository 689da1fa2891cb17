# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels for the per-timestep hot loops.

Mirrors ``_pykernels`` exactly; see that module for the contracts.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float64_t f64


def convection_vectors(double[:, :, ::1] a_loc, double[:, :, ::1] b_loc,
                       double[:, ::1] nt, double[:, :, ::1] dnt,
                       double[::1] w, double[::1] detj,
                       double[:, :, ::1] jinv_t):
    cdef Py_ssize_t ncell = detj.shape[0]
    cdef Py_ssize_t nq = w.shape[0]
    cdef Py_ssize_t c, q, n, d
    cdef double aq0, aq1, bq0, bq1, gb00, gb01, gb10, gb11
    cdef double g0, g1, gx, gy, adn, scale, adb0, adb1
    out_arr = np.zeros((ncell, 12), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    for c in range(ncell):
        for q in range(nq):
            scale = 0.5 * w[q] * detj[c]
            aq0 = aq1 = bq0 = bq1 = 0.0
            gb00 = gb01 = gb10 = gb11 = 0.0
            for n in range(6):
                aq0 += nt[q, n] * a_loc[c, n, 0]
                aq1 += nt[q, n] * a_loc[c, n, 1]
                bq0 += nt[q, n] * b_loc[c, n, 0]
                bq1 += nt[q, n] * b_loc[c, n, 1]
                g0 = dnt[q, n, 0]
                g1 = dnt[q, n, 1]
                gx = jinv_t[c, 0, 0] * g0 + jinv_t[c, 0, 1] * g1
                gy = jinv_t[c, 1, 0] * g0 + jinv_t[c, 1, 1] * g1
                gb00 += gx * b_loc[c, n, 0]
                gb01 += gy * b_loc[c, n, 0]
                gb10 += gx * b_loc[c, n, 1]
                gb11 += gy * b_loc[c, n, 1]
            adb0 = aq0 * gb00 + aq1 * gb01
            adb1 = aq0 * gb10 + aq1 * gb11
            for n in range(6):
                g0 = dnt[q, n, 0]
                g1 = dnt[q, n, 1]
                gx = jinv_t[c, 0, 0] * g0 + jinv_t[c, 0, 1] * g1
                gy = jinv_t[c, 1, 0] * g0 + jinv_t[c, 1, 1] * g1
                adn = aq0 * gx + aq1 * gy
                out[c, 2 * n] += scale * (adb0 * nt[q, n] - adn * bq0)
                out[c, 2 * n + 1] += scale * (adb1 * nt[q, n] - adn * bq1)
    return out_arr


def trilinear_sum(double[:, :, ::1] a_loc, double[:, :, ::1] b_loc,
                  double[:, :, ::1] c_loc, double[:, ::1] nt,
                  double[:, :, ::1] dnt, double[::1] w,
                  double[::1] detj, double[:, :, ::1] jinv_t):
    cdef Py_ssize_t ncell = detj.shape[0]
    cdef Py_ssize_t nq = w.shape[0]
    cdef Py_ssize_t c, q, n
    cdef double aq0, aq1, bq0, bq1, cq0, cq1
    cdef double gb00, gb01, gb10, gb11, gc00, gc01, gc10, gc11
    cdef double g0, g1, gx, gy, scale, total = 0.0

    for c in range(ncell):
        for q in range(nq):
            scale = 0.5 * w[q] * detj[c]
            aq0 = aq1 = bq0 = bq1 = cq0 = cq1 = 0.0
            gb00 = gb01 = gb10 = gb11 = 0.0
            gc00 = gc01 = gc10 = gc11 = 0.0
            for n in range(6):
                aq0 += nt[q, n] * a_loc[c, n, 0]
                aq1 += nt[q, n] * a_loc[c, n, 1]
                bq0 += nt[q, n] * b_loc[c, n, 0]
                bq1 += nt[q, n] * b_loc[c, n, 1]
                cq0 += nt[q, n] * c_loc[c, n, 0]
                cq1 += nt[q, n] * c_loc[c, n, 1]
                g0 = dnt[q, n, 0]
                g1 = dnt[q, n, 1]
                gx = jinv_t[c, 0, 0] * g0 + jinv_t[c, 0, 1] * g1
                gy = jinv_t[c, 1, 0] * g0 + jinv_t[c, 1, 1] * g1
                gb00 += gx * b_loc[c, n, 0]
                gb01 += gy * b_loc[c, n, 0]
                gb10 += gx * b_loc[c, n, 1]
                gb11 += gy * b_loc[c, n, 1]
                gc00 += gx * c_loc[c, n, 0]
                gc01 += gy * c_loc[c, n, 0]
                gc10 += gx * c_loc[c, n, 1]
                gc11 += gy * c_loc[c, n, 1]
            total += scale * ((aq0 * gb00 + aq1 * gb01) * cq0
                              + (aq0 * gb10 + aq1 * gb11) * cq1
                              - (aq0 * gc00 + aq1 * gc01) * bq0
                              - (aq0 * gc10 + aq1 * gc11) * bq1)
    return total


def convection_matrices(double[:, :, ::1] a_loc, double[:, ::1] nt,
                        double[:, :, ::1] dnt, double[::1] w,
                        double[::1] detj, double[:, :, ::1] jinv_t):
    cdef Py_ssize_t ncell = detj.shape[0]
    cdef Py_ssize_t nq = w.shape[0]
    cdef Py_ssize_t c, q, n, m
    cdef double aq0, aq1, g0, g1, gx, gy, scale, v
    cdef double[6] adn
    cdef double[6] nv
    out_arr = np.zeros((ncell, 6, 6), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr

    for c in range(ncell):
        for q in range(nq):
            scale = 0.5 * w[q] * detj[c]
            aq0 = aq1 = 0.0
            for n in range(6):
                aq0 += nt[q, n] * a_loc[c, n, 0]
                aq1 += nt[q, n] * a_loc[c, n, 1]
            for n in range(6):
                g0 = dnt[q, n, 0]
                g1 = dnt[q, n, 1]
                gx = jinv_t[c, 0, 0] * g0 + jinv_t[c, 0, 1] * g1
                gy = jinv_t[c, 1, 0] * g0 + jinv_t[c, 1, 1] * g1
                adn[n] = aq0 * gx + aq1 * gy
                nv[n] = nt[q, n]
            for m in range(6):
                for n in range(6):
                    v = scale * (adn[n] * nv[m] - adn[m] * nv[n])
                    out[c, m, n] += v
    return out_arr
