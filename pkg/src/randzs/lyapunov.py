"""Lyapunov exponents of the Zakharov-Shabat transfer problem.

Solutions are propagated with a split step: a ``z``-independent coin that
integrates the potential exactly over one cell, followed by the free phases
``exp(-+i z dx)``.  For products of many cells this has the same accuracy as
the exact cell exponential at a fraction of the cost, and for ``u = 0`` it
reproduces free growth ``exp(|Im z| x)`` exactly.

Grids of exponents use common random numbers: each batch is one noise path
shared by every ``z`` on the grid, so second differences in ``z`` are far
less noisy than the exponents themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import kernels
from .ensemble import parallel_map
from .errors import NumericalError, RefinementError, ValidationError
from .operators import Kind
from .signal import Polarization, SignalRealization, make_rng, white_noise
from .stats import Axis, DosEstimate, analytic_dos_bright

__all__ = [
    "LyapunovEstimate",
    "LyapunovGrid",
    "PhaseDos",
    "lyapunov_exponent",
    "lyapunov_grid",
    "thouless_dos",
    "thouless_eta_profile",
    "phase_dos_hermitian",
    "analytic_lambda",
    "localization_law",
    "write_lyapunov_grid",
]

NOISE_CHUNK = 4096


@dataclass
class LyapunovEstimate:
    """Growth rate of ``|psi|`` per unit ``x`` with a batch-means error."""

    z: complex
    D: float
    lambda_hat: float
    stderr: float
    x_total: float
    renorm_interval: int
    dx: float
    batches: int
    converged: bool
    meta: dict = field(default_factory=dict)


@dataclass
class LyapunovGrid:
    """Exponents on a rectangular ``(xi, eta)`` grid.

    ``per_batch`` has shape ``(batches, n_xi, n_eta)``; every batch used the
    same noise path for all grid points.
    """

    xi: np.ndarray
    eta: np.ndarray
    lam: np.ndarray
    stderr: np.ndarray
    D: float
    per_batch: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, ax in (("xi", self.xi), ("eta", self.eta)):
            if ax.ndim != 1 or ax.size < 1 or np.any(np.diff(ax) <= 0):
                raise ValidationError(f"{name} axis must be increasing")
        if self.lam.shape != (self.xi.size, self.eta.size):
            raise ValidationError("lambda array does not match the axes")


def _check_params(D, dx, x_max, renorm, batches):
    if not (math.isfinite(D) and D >= 0):
        raise ValidationError(f"D must be non-negative, got {D}")
    if not dx > 0:
        raise ValidationError("dx must be positive")
    if not x_max >= 10 * dx:
        raise ValidationError("x_max must cover at least ten steps")
    if int(renorm) < 1 or int(batches) < 1:
        raise ValidationError("renorm and batches must be positive")


def _advance_path(zs, D, dx, nburn, nsteps, renorm, sign, pol, rng):
    """Log-norm growth of one noise path for every ``z``; returns ``(nz,)``."""
    nz = zs.size
    p1 = np.full((1, nz), 1 / math.sqrt(2), dtype=complex)
    p2 = p1.copy()
    total = np.zeros((1, nz))
    done = 0
    while done < nburn + nsteps:
        m = min(NOISE_CHUNK, nburn + nsteps - done)
        w = white_noise(rng, m, D * dx, pol).reshape(1, m)
        if done < nburn < done + m:
            # split the chunk at the end of the burn-in
            k = nburn - done
            kernels.lyap_advance(p1, p2, zs, np.ascontiguousarray(w[:, :k]), dx, renorm, sign)
            total += kernels.lyap_advance(p1, p2, zs, np.ascontiguousarray(w[:, k:]), dx,
                                          renorm, sign)
        else:
            acc = kernels.lyap_advance(p1, p2, zs, w, dx, renorm, sign)
            if done >= nburn:
                total += acc
        done += m
    return total[0]


def _batch_rates(zs, D, dx, x_max, batches, seed, renorm, burn_in, kind, polarization, threads):
    kind = Kind.parse(kind)
    pol = Polarization.parse(polarization)
    nsteps = int(round(x_max / dx))
    nburn = int(round(burn_in / dx))
    x_total = nsteps * dx
    zs = np.ascontiguousarray(np.asarray(zs, dtype=complex).ravel())

    def one(b):
        rng = make_rng(seed, b)
        return _advance_path(zs, D, dx, nburn, nsteps, renorm, kind.sign, pol, rng) / x_total

    return np.array(parallel_map(one, range(int(batches)), threads)), x_total


def lyapunov_exponent(z, D, x_max=500.0, seed=0, dx=0.05, batches=16, renorm=10,
                      burn_in=None, kind="bright", polarization="unpolarized",
                      threads=None) -> LyapunovEstimate:
    """Lyapunov exponent at one spectral parameter.

    Parameters
    ----------
    z : complex
    D : float
        Noise strength; per-step increments ``w = u dx`` have ``E|w|^2 = D dx``.
    x_max : float
        Length of each batch path (after burn-in).
    batches : int
        Independent paths; the error is the standard error of their rates.
    renorm : int
        Steps between renormalizations of the 2-vector.
    burn_in : float, optional
        Discarded initial length, default ``0.1 * x_max``.

    Notes
    -----
    Non-convergence (``stderr > 0.1 lambda_hat``) is flagged, not raised.
    """
    D = float(D)
    _check_params(D, dx, x_max, renorm, batches)
    if burn_in is None:
        burn_in = 0.1 * x_max
    rates, x_total = _batch_rates([z], D, dx, x_max, batches, seed, renorm, burn_in, kind,
                                  polarization, threads)
    r = rates[:, 0]
    lam = float(r.mean())
    se = float(r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else float("nan")
    lam = max(lam, 0.0)
    converged = bool(lam > 0 and se <= 0.1 * lam and batches * x_total >= 100 / lam)
    return LyapunovEstimate(complex(z), D, lam, se, float(batches * x_total), int(renorm), dx,
                            int(batches), converged,
                            {"seed": seed, "burn_in": burn_in, "backend": kernels.BACKEND,
                             "kind": Kind.parse(kind).value,
                             "polarization": Polarization.parse(polarization).value})


def lyapunov_grid(xi, eta, D, x_max=500.0, seed=0, dx=0.05, batches=64, renorm=10,
                  burn_in=None, kind="bright", polarization="unpolarized",
                  threads=None) -> LyapunovGrid:
    """Exponents on the grid ``xi x eta`` with common random numbers."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    D = float(D)
    _check_params(D, dx, x_max, renorm, batches)
    if burn_in is None:
        burn_in = 0.1 * x_max
    zz = xi[:, None] + 1j * eta[None, :]
    rates, x_total = _batch_rates(zz, D, dx, x_max, batches, seed, renorm, burn_in, kind,
                                  polarization, threads)
    per = rates.reshape(int(batches), xi.size, eta.size)
    lam = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / math.sqrt(batches) if batches > 1 else np.full(lam.shape, np.nan)
    return LyapunovGrid(xi, eta, lam, se, D, per,
                        {"dx": dx, "x_max": x_total, "batches": int(batches), "seed": seed,
                         "renorm": int(renorm), "burn_in": burn_in, "backend": kernels.BACKEND,
                         "polarization": Polarization.parse(polarization).value})


def _laplacian(a, hx, he):
    return ((a[..., 2:, 1:-1] - 2 * a[..., 1:-1, 1:-1] + a[..., :-2, 1:-1]) / hx ** 2
            + (a[..., 1:-1, 2:] - 2 * a[..., 1:-1, 1:-1] + a[..., 1:-1, :-2]) / he ** 2)


def thouless_dos(lgrid: LyapunovGrid, max_noise_ratio=1.0) -> DosEstimate:
    """Density ``(1/2 pi) Laplacian(lambda)`` at the interior grid points.

    Needs uniform axes with at least three points each.  The error of the
    Laplacian comes from per-batch Laplacians when available.

    Raises
    ------
    NumericalError
        If the median noise-to-curvature ratio exceeds ``max_noise_ratio``.
    """
    xi, eta = lgrid.xi, lgrid.eta
    if xi.size < 3 or eta.size < 3:
        raise ValidationError("Laplacian needs at least 3 points per axis")
    hx = np.diff(xi)
    he = np.diff(eta)
    if not (np.allclose(hx, hx[0], rtol=1e-6) and np.allclose(he, he[0], rtol=1e-6)):
        raise ValidationError("Laplacian needs uniform axes")
    hx, he = float(hx[0]), float(he[0])
    if lgrid.per_batch is not None and lgrid.per_batch.shape[0] > 1:
        lap_b = _laplacian(lgrid.per_batch, hx, he) / (2 * math.pi)
        rho = lap_b.mean(axis=0)
        se = lap_b.std(axis=0, ddof=1) / math.sqrt(lap_b.shape[0])
    else:
        rho = _laplacian(lgrid.lam, hx, he) / (2 * math.pi)
        s = lgrid.stderr
        se = np.sqrt(4 * s[1:-1, 1:-1] ** 2 * (1 / hx ** 2 + 1 / he ** 2) ** 2
                     + (s[2:, 1:-1] ** 2 + s[:-2, 1:-1] ** 2) / hx ** 4
                     + (s[1:-1, 2:] ** 2 + s[1:-1, :-2] ** 2) / he ** 4) / (2 * math.pi)
    finite = np.isfinite(se) & (se > 0)
    ratio = 0.0
    if finite.any():
        ratio = float(np.median(se[finite] / np.maximum(np.abs(rho[finite]), 1e-300)))
        if ratio > max_noise_ratio:
            raise NumericalError("grid too coarse or too noisy for the Laplacian",
                                 noise_to_curvature=ratio, h_xi=hx, h_eta=he)
    negative = rho < 0
    clipped = np.where(negative, 0.0, rho)
    xe = np.concatenate([[xi[1] - hx / 2], xi[1:-1] + hx / 2])
    ee = np.concatenate([[eta[1] - he / 2], eta[1:-1] + he / 2])
    meta = {"D": lgrid.D, "h_xi": hx, "h_eta": he, "noise_to_curvature": ratio,
            "clipped": int(negative.sum()), "clipped_mask": negative,
            "batches": lgrid.meta.get("batches"), "dx": lgrid.meta.get("dx"),
            "per_batch": lap_b if lgrid.per_batch is not None and lgrid.per_batch.shape[0] > 1
            else None}
    return DosEstimate(Axis.XI_ETA_2D, (xe, ee), np.zeros(rho.shape), clipped, se,
                       int(lgrid.meta.get("batches", 1)), meta)


def thouless_eta_profile(dos: DosEstimate):
    """Average a Thouless density over its ``xi`` columns.

    Returns
    -------
    eta, density, stderr : ndarray
        The error uses per-batch profiles when present, so correlations
        between columns are accounted for.
    """
    xe, ee = dos.bin_edges
    eta = 0.5 * (ee[1:] + ee[:-1])
    per = dos.meta.get("per_batch")
    if per is not None:
        prof = np.where(dos.meta["clipped_mask"][None], 0.0, per).mean(axis=1)
        return eta, prof.mean(axis=0), prof.std(axis=0, ddof=1) / math.sqrt(prof.shape[0])
    nx = dos.density.shape[0]
    return eta, dos.density.mean(axis=0), np.sqrt(np.sum(dos.stderr ** 2, axis=0)) / nx


@dataclass
class PhaseDos:
    """Integrated density of states from phase winding.

    ``N[j]`` counts states between ``lambdas[0]`` and ``lambdas[j]`` for one
    realization of length ``L``.
    """

    lambdas: np.ndarray
    N: np.ndarray
    length: float
    max_step: float
    meta: dict = field(default_factory=dict)

    def density(self):
        """``dN/dlambda / L`` by finite differences at interval midpoints."""
        mid = 0.5 * (self.lambdas[1:] + self.lambdas[:-1])
        return mid, np.diff(self.N) / np.diff(self.lambdas) / self.length


def phase_dos_hermitian(signal: SignalRealization, lambda_values, substeps=1) -> PhaseDos:
    """Count states below each ``lambda`` by tracking ``arg(psi1/psi2)``.

    Each cell is propagated exactly for piecewise constant ``u``; ``substeps``
    splits cells further, which changes nothing but the phase resolution.

    Raises
    ------
    RefinementError
        If ``|d theta|`` exceeds ``pi/2`` in one step.
    """
    lam = np.asarray(lambda_values, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise ValidationError("lambda_values must be a non-empty 1-d sequence")
    if np.any(np.diff(lam) < 0):
        raise ValidationError("lambda_values must be sorted")
    if int(substeps) < 1:
        raise ValidationError("substeps must be positive")
    g = signal.grid
    s = int(substeps)
    # the kernel couples through u* in the upper row, the operators through u
    w = np.repeat(np.conj(np.asarray(signal.samples, dtype=complex)) * g.step / s, s)
    theta, max_step = kernels.phase_winding(np.ascontiguousarray(w), lam, g.step / s)
    if max_step > math.pi / 2:
        raise RefinementError("phase step too large, refine the grid or raise substeps",
                              max_step=max_step, dx=g.step / s)
    N = -(theta - theta[0]) / (2 * math.pi)
    return PhaseDos(lam, N, g.length, float(max_step),
                    {"substeps": s, "dx": g.step, "seed": signal.seed, "D": signal.D})


def analytic_lambda(eta, D):
    """Exponent implied by the exact bright density.

    ``lambda(eta) = 2 pi int_0^|eta| (|eta| - s) rho(s) ds``, the solution of
    the Thouless relation that is independent of ``xi`` and grows like
    ``|eta|`` far from the axis.
    """
    def one(e):
        e = abs(float(e))
        if D == 0:
            return e
        v, _ = integrate.quad(lambda s: (e - s) * analytic_dos_bright(s, D), 0, e,
                              epsabs=1e-13, epsrel=1e-11, limit=200)
        return 2 * math.pi * v

    eta = np.asarray(eta, dtype=float)
    out = np.vectorize(one, otypes=[float])(eta)
    return out if out.ndim else float(out)


def localization_law(eta, D):
    """Small-``eta`` exponent ``2 eta^2 / (3 D)``."""
    if not D > 0:
        raise ValidationError("D must be positive")
    return 2 * np.asarray(eta, dtype=float) ** 2 / (3 * D)


def write_lyapunov_grid(path, lgrid: LyapunovGrid) -> None:
    """CSV ``xi,eta,lambda,stderr`` with ``#`` metadata, xi-major order."""
    with open(path, "w") as fh:
        fh.write(f"# D={lgrid.D!r}\n")
        for k, v in lgrid.meta.items():
            fh.write(f"# {k}={v}\n")
        fh.write("xi,eta,lambda,stderr\n")
        for i, x in enumerate(lgrid.xi):
            for j, e in enumerate(lgrid.eta):
                fh.write(f"{x:.17g},{e:.17g},{lgrid.lam[i, j]:.17g},{lgrid.stderr[i, j]:.17g}\n")
