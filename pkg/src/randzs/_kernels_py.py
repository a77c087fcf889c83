"""Pure numpy implementations of the hot loops.

These mirror the compiled kernels in ``_kernels.pyx`` operation for
operation; vectorization runs across batches, spectral parameters or
ensemble members while the step loop stays in Python.
"""

import numpy as np


def lyap_advance(p1, p2, zs, w, dx, renorm, sign):
    """Advance transfer-matrix states through a block of noise steps.

    Parameters
    ----------
    p1, p2 : complex ndarray, shape (B, nz)
        Normalized states, updated in place.
    zs : complex ndarray, shape (nz,)
        Spectral parameters.
    w : complex ndarray, shape (B, nsteps)
        Integrated potential per step, ``w_k = u_k dx``.
    dx : float
    renorm : int
        Renormalize every ``renorm`` steps.
    sign : int
        -1 for the bright problem, +1 for the dark one.

    Returns
    -------
    ndarray, shape (B, nz)
        Accumulated ``log |psi|`` over the block (states are left normalized).
    """
    B, nsteps = w.shape
    e1 = np.exp(-1j * zs * dx)[None, :]
    e2 = np.exp(1j * zs * dx)[None, :]
    a = np.abs(w)
    safe = np.where(a > 0, a, 1.0)
    if sign < 0:
        c = np.cos(a)
        g = np.where(a > 0, np.sin(a) / safe, 1.0)
    else:
        c = np.cosh(a)
        g = np.where(a > 0, np.sinh(a) / safe, 1.0)
    up = 1j * g * np.conj(w)
    lo = -1j * sign * g * w
    acc = np.zeros(p1.shape)
    q1 = p1.copy()
    q2 = p2.copy()
    for k in range(nsteps):
        ck = c[:, k:k + 1]
        t1 = ck * q1 + up[:, k:k + 1] * q2
        t2 = lo[:, k:k + 1] * q1 + ck * q2
        q1 = e1 * t1
        q2 = e2 * t2
        if (k + 1) % renorm == 0 or k == nsteps - 1:
            nr = np.sqrt(q1.real ** 2 + q1.imag ** 2 + q2.real ** 2 + q2.imag ** 2)
            acc += np.log(nr)
            q1 /= nr
            q2 /= nr
    p1[...] = q1
    p2[...] = q2
    return acc


def _step_matrix(zd, w, sgn):
    """Entries of ``exp(sgn * M)`` with ``M = [[-i zd, i w*], [i w, i zd]]``."""
    q = np.sqrt(-zd * zd - w.real ** 2 - w.imag ** 2 + 0j)
    ch = np.cosh(q)
    sq = np.where(q != 0, q, 1.0)
    sh = np.where(q != 0, np.sinh(q) / sq, 1.0) * sgn
    return ch - 1j * sh * zd, 1j * sh * np.conj(w), 1j * sh * w, ch + 1j * sh * zd


def phase_winding(w, lambdas, dx):
    """Total change of ``theta = arg(psi1/psi2)`` across a dark realization.

    Each cell is propagated exactly for piecewise-constant ``u``.

    Returns
    -------
    theta : ndarray
        Accumulated phase per ``lambda``.
    max_step : float
        Largest single-step ``|d theta|`` encountered.
    """
    lam = np.asarray(lambdas, dtype=float)
    p1 = np.full(lam.shape, 1 / np.sqrt(2), dtype=complex)
    p2 = p1.copy()
    theta = np.zeros(lam.shape)
    max_step = 0.0
    ld = lam * dx
    r_old = p1 * np.conj(p2)
    for k in range(len(w)):
        wk = w[k]
        q2 = abs(wk) ** 2 - ld * ld
        qa = np.sqrt(np.abs(q2))
        sq = np.where(qa > 0, qa, 1.0)
        ch = np.where(q2 >= 0, np.cosh(qa), np.cos(qa))
        sh = np.where(qa > 0, np.where(q2 >= 0, np.sinh(qa), np.sin(qa)) / sq, 1.0)
        n1 = (ch - 1j * sh * ld) * p1 + 1j * sh * np.conj(wk) * p2
        n2 = -1j * sh * wk * p1 + (ch + 1j * sh * ld) * p2
        nr = np.sqrt(np.abs(n1) ** 2 + np.abs(n2) ** 2)
        p1 = n1 / nr
        p2 = n2 / nr
        r = p1 * np.conj(p2)
        d = np.angle(r * np.conj(r_old))
        theta += d
        m = float(np.max(np.abs(d))) if d.size else 0.0
        if m > max_step:
            max_step = m
        r_old = r
    return theta, max_step


def lnb_ensemble(z, w, wt, dx, f0, record=False):
    """Evolve ``ln b`` for an ensemble of signal halves.

    Parameters
    ----------
    z : complex
    w, wt : complex ndarray, shape (M, n)
        Integrated right-half potential ``u(x_k) dx`` and mirrored left-half
        potential ``u(-x_k) dx`` for ``M`` members.
    f0 : complex
        Initial ``f = psi1/psi2`` at the pulse center.
    record : bool
        Also return the partial sums of the increment model.

    Returns
    -------
    inc : complex ndarray (M,)
        ``ln b`` from the sampled left-point increments ``i (w f + wt* ft)``.
    exact : complex ndarray (M,)
        ``ln psi2 - ln psi2~`` from the propagated pair (phase mod 2 pi).
    traj : complex ndarray (M, n) or None
    """
    M, n = w.shape
    zd = z * dx
    nrm = np.sqrt(1 + abs(f0) ** 2)
    p1 = np.full(M, f0 / nrm, dtype=complex)
    p2 = np.full(M, 1 / nrm, dtype=complex)
    q1 = p1.copy()
    q2 = p2.copy()
    acc = np.full(M, -np.log(f0), dtype=complex)
    lp = np.zeros(M)
    lq = np.zeros(M)
    traj = np.empty((M, n), dtype=complex) if record else None
    for k in range(n):
        wk = w[:, k]
        wtk = wt[:, k]
        acc = acc + 1j * (wk * (p1 / p2) + np.conj(wtk) * (q2 / q1))
        if record:
            traj[:, k] = acc
        a, b, c, d = _step_matrix(zd, wk, 1.0)
        p1, p2 = a * p1 + b * p2, c * p1 + d * p2
        a, b, c, d = _step_matrix(zd, wtk, -1.0)
        q1, q2 = a * q1 + b * q2, c * q1 + d * q2
        nr = np.sqrt(np.abs(p1) ** 2 + np.abs(p2) ** 2)
        lp += np.log(nr)
        p1 = p1 / nr
        p2 = p2 / nr
        nr = np.sqrt(np.abs(q1) ** 2 + np.abs(q2) ** 2)
        lq += np.log(nr)
        q1 = q1 / nr
        q2 = q2 / nr
    exact = (lp + np.log(np.abs(p2)) - lq - np.log(np.abs(q1))
             + 1j * np.mod(np.angle(p2) - np.angle(q1), 2 * np.pi))
    return acc, exact, traj
