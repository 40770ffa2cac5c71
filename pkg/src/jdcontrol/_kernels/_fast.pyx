# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the reference kernels (see reference.py for semantics)."""

from libc.math cimport exp, isfinite

import numpy as np

KIND_FREE = 0
KIND_HARMONIC = 1

cdef int _HARMONIC = 1


cdef inline double _bump(double d, double eps) noexcept nogil:
    cdef double s = eps * d
    cdef double w = 1.0 - s * s
    if w <= 0.0:
        return 0.0
    return exp(-1.0 / w)


def forward_sweep(
    const double[::1] dts,
    const unsigned char[::1] jump_mask,
    const double[::1] jump_noise,
    const long[::1] cf_interval,
    const double[:, :, ::1] mu3,
    const double[::1] xc,
    const double[::1] vc,
    double eps,
    int kind,
    double eta,
    double gamma,
    double b1,
    double b2,
    const double[::1] dbx,
    const double[::1] dbv,
    double x0,
    double v0,
    double[:, ::1] out_states,
):
    cdef Py_ssize_t n_steps = dts.shape[0]
    cdef Py_ssize_t nx = xc.shape[0]
    cdef Py_ssize_t nv = vc.shape[0]
    wx_arr = np.empty(nx)
    wv_arr = np.empty(nv)
    cdef double[::1] wx = wx_arr
    cdef double[::1] wv = wv_arr
    cdef double x = x0, v = v0, u, fv, x_new, acc, dt
    cdef Py_ssize_t i, a, b, k
    cdef int status = -1

    with nogil:
        out_states[0, 0] = x
        out_states[0, 1] = v
        for i in range(n_steps):
            if jump_mask[i + 1]:
                v = gamma * v + jump_noise[i + 1]
            else:
                k = cf_interval[i]
                for a in range(nx):
                    wx[a] = _bump(x - xc[a], eps)
                for b in range(nv):
                    wv[b] = _bump(v - vc[b], eps)
                u = 0.0
                for a in range(nx):
                    if wx[a] != 0.0:
                        acc = 0.0
                        for b in range(nv):
                            acc += mu3[a, b, k] * wv[b]
                        u += wx[a] * acc
                fv = -eta * x if kind == _HARMONIC else 0.0
                dt = dts[i]
                x_new = x + v * dt + b1 * dbx[i]
                v = v + (u + fv) * dt + b2 * dbv[i]
                x = x_new
            if not (isfinite(x) and isfinite(v)):
                status = <int> (i + 1)
                break
            out_states[i + 1, 0] = x
            out_states[i + 1, 1] = v
    return status


def adjoint_recursion(
    const double[::1] dts,
    const unsigned char[::1] jump_mask,
    double gamma,
    const double[::1] coeff_qx,
    const double[::1] coeff_uv,
    const double[::1] src_q,
    const double[::1] src_p,
    double[:, ::1] out_r,
):
    cdef Py_ssize_t m1 = out_r.shape[0]
    cdef Py_ssize_t i
    cdef double q, p, q1, p1, dt
    cdef int status = -1

    with nogil:
        q = -src_q[m1 - 1]
        p = -src_p[m1 - 1]
        out_r[m1 - 1, 0] = q
        out_r[m1 - 1, 1] = p
        for i in range(m1 - 2, -1, -1):
            q1 = out_r[i + 1, 0]
            p1 = out_r[i + 1, 1]
            if jump_mask[i + 1]:
                q = q1
                p = gamma * p1
            else:
                dt = dts[i]
                q = q1 + dt * (coeff_qx[i] * p1)
                p = p1 + dt * (q1 + coeff_uv[i] * p1)
            q -= src_q[i]
            p -= src_p[i]
            if not (isfinite(q) and isfinite(p)):
                status = <int> i
                break
            out_r[i, 0] = q
            out_r[i, 1] = p
    return status
