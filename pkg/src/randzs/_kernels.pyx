# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see ``_kernels_py`` for the reference semantics.

All loops run without the GIL so that ensemble members can be spread over
Python threads.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, cosh, sinh, fabs, atan2, fmod, M_PI

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex csqrt(double complex)
    double complex ccosh(double complex)
    double complex csinh(double complex)
    double complex clog(double complex)
    double complex conj(double complex)
    double creal(double complex)
    double cimag(double complex)
    double cabs(double complex)
    double carg(double complex)


cdef inline double abs2(double complex a) noexcept nogil:
    return creal(a) * creal(a) + cimag(a) * cimag(a)


def lyap_advance(double complex[:, ::1] p1, double complex[:, ::1] p2,
                 double complex[::1] zs, double complex[:, ::1] w,
                 double dx, int renorm, int sign):
    cdef Py_ssize_t B = w.shape[0], nsteps = w.shape[1], nz = zs.shape[0]
    cdef Py_ssize_t b, j, k
    cdef double complex I = 1j
    cdef double[:, ::1] acc = np.zeros((B, nz))
    cdef double complex[::1] up = np.empty(nsteps, dtype=np.complex128)
    cdef double complex[::1] lo = np.empty(nsteps, dtype=np.complex128)
    cdef double[::1] c = np.empty(nsteps)
    cdef double complex[::1] e1 = np.empty(nz, dtype=np.complex128)
    cdef double complex[::1] e2 = np.empty(nz, dtype=np.complex128)
    cdef double a, g, nr, s
    cdef double complex q1, q2, t1, t2, wk, ea, eb
    with nogil:
        for j in range(nz):
            e1[j] = cexp(-I * zs[j] * dx)
            e2[j] = cexp(I * zs[j] * dx)
        for b in range(B):
            for k in range(nsteps):
                wk = w[b, k]
                a = cabs(wk)
                if sign < 0:
                    c[k] = cos(a)
                    g = sin(a) / a if a > 0 else 1.0
                else:
                    c[k] = cosh(a)
                    g = sinh(a) / a if a > 0 else 1.0
                up[k] = I * g * conj(wk)
                lo[k] = -I * sign * g * wk
            for j in range(nz):
                q1 = p1[b, j]
                q2 = p2[b, j]
                ea = e1[j]
                eb = e2[j]
                s = 0.0
                for k in range(nsteps):
                    t1 = c[k] * q1 + up[k] * q2
                    t2 = lo[k] * q1 + c[k] * q2
                    q1 = ea * t1
                    q2 = eb * t2
                    if (k + 1) % renorm == 0 or k == nsteps - 1:
                        nr = sqrt(abs2(q1) + abs2(q2))
                        s = s + log(nr)
                        q1 = q1 / nr
                        q2 = q2 / nr
                acc[b, j] = s
                p1[b, j] = q1
                p2[b, j] = q2
    return np.asarray(acc)


def phase_winding(double complex[::1] w, lambdas, double dx):
    cdef double[::1] lam = np.ascontiguousarray(lambdas, dtype=float)
    cdef Py_ssize_t nl = lam.shape[0], n = w.shape[0], j, k
    cdef double[::1] theta = np.zeros(nl)
    cdef double complex I = 1j
    cdef double complex p1, p2, n1, n2, r, r_old, wk
    cdef double ld, q2, qa, ch, sh, nr, d, tot, max_step = 0.0
    with nogil:
        for j in range(nl):
            ld = lam[j] * dx
            p1 = 1.0 / sqrt(2.0)
            p2 = p1
            r_old = p1 * conj(p2)
            tot = 0.0
            for k in range(n):
                wk = w[k]
                q2 = abs2(wk) - ld * ld
                qa = sqrt(fabs(q2))
                if q2 >= 0:
                    ch = cosh(qa)
                    sh = sinh(qa) / qa if qa > 0 else 1.0
                else:
                    ch = cos(qa)
                    sh = sin(qa) / qa
                n1 = (ch - I * sh * ld) * p1 + I * sh * conj(wk) * p2
                n2 = -I * sh * wk * p1 + (ch + I * sh * ld) * p2
                nr = sqrt(abs2(n1) + abs2(n2))
                p1 = n1 / nr
                p2 = n2 / nr
                r = p1 * conj(p2)
                d = carg(r * conj(r_old))
                tot = tot + d
                if fabs(d) > max_step:
                    max_step = fabs(d)
                r_old = r
            theta[j] = tot
    return np.asarray(theta), max_step


cdef inline void step_matrix(double complex zd, double complex wk, double sgn,
                             double complex* a, double complex* b,
                             double complex* c, double complex* d) noexcept nogil:
    cdef double complex I = 1j
    cdef double complex q = csqrt(-zd * zd - abs2(wk))
    cdef double complex ch = ccosh(q)
    cdef double complex sh
    if q != 0:
        sh = csinh(q) / q * sgn
    else:
        sh = sgn
    a[0] = ch - I * sh * zd
    b[0] = I * sh * conj(wk)
    c[0] = I * sh * wk
    d[0] = ch + I * sh * zd


def lnb_ensemble(double complex z, double complex[:, ::1] w, double complex[:, ::1] wt,
                 double dx, double complex f0, bint record=False):
    cdef Py_ssize_t M = w.shape[0], n = w.shape[1], m, k
    cdef double complex I = 1j
    cdef double complex zd = z * dx
    cdef double complex[::1] inc = np.empty(M, dtype=np.complex128)
    cdef double complex[::1] exact = np.empty(M, dtype=np.complex128)
    traj_arr = np.empty((M if record else 1, n if record else 1), dtype=np.complex128)
    cdef double complex[:, ::1] traj = traj_arr
    cdef double complex p1, p2, q1, q2, a, b, c, d, t1, t2, acc, wk, wtk
    cdef double nrm = sqrt(1.0 + abs2(f0)), nr, lp, lq, ph
    cdef double complex acc0 = -clog(f0)
    with nogil:
        for m in range(M):
            p1 = f0 / nrm
            p2 = 1.0 / nrm
            q1 = p1
            q2 = p2
            acc = acc0
            lp = 0.0
            lq = 0.0
            for k in range(n):
                wk = w[m, k]
                wtk = wt[m, k]
                acc = acc + I * (wk * (p1 / p2) + conj(wtk) * (q2 / q1))
                if record:
                    traj[m, k] = acc
                step_matrix(zd, wk, 1.0, &a, &b, &c, &d)
                t1 = a * p1 + b * p2
                t2 = c * p1 + d * p2
                p1 = t1
                p2 = t2
                step_matrix(zd, wtk, -1.0, &a, &b, &c, &d)
                t1 = a * q1 + b * q2
                t2 = c * q1 + d * q2
                q1 = t1
                q2 = t2
                nr = sqrt(abs2(p1) + abs2(p2))
                lp = lp + log(nr)
                p1 = p1 / nr
                p2 = p2 / nr
                nr = sqrt(abs2(q1) + abs2(q2))
                lq = lq + log(nr)
                q1 = q1 / nr
                q2 = q2 / nr
            inc[m] = acc
            ph = fmod(carg(p2) - carg(q1), 2 * M_PI)
            if ph < 0:
                ph = ph + 2 * M_PI
            exact[m] = lp + log(cabs(p2)) - lq - log(cabs(q1)) + I * ph
    return np.asarray(inc), np.asarray(exact), (traj_arr if record else None)
