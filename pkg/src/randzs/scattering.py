"""Monte Carlo statistics of the scattering coefficient ``b_z``.

A pulse of duration ``2T`` is split at its center.  The solution ``psi`` is
carried from the center to ``+T`` and, with the mirrored potential
``u~(x) = u(-x)``, from the center to ``-T``.  With ``f = psi1/psi2`` and
``f~ = psi~2/psi~1``,

    d ln b / dx = i (u f + u~* f~),

starting from ``ln b(0) = -ln f(0)``.  Both ratios are carried as normalized
projective pairs, so poles of the Riccati variables never appear.

Two values are produced per member.  ``increment`` sums the left-point
increments ``i (w_k f_k + w~_k* f~_k)`` with ``w = u dx``; this is the
white-noise model whose variance carries the ``ln(T/2 tau)`` factor, with
``tau`` the grid step.  ``exact`` is ``ln psi2(T) - ln psi~1(T)`` from the
propagated pair itself (phase modulo ``2 pi``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import kernels
from .ensemble import parallel_map
from .errors import NumericalError, ValidationError
from .signal import Polarization, SignalRealization, make_grid, sample_signal

__all__ = [
    "LnBTrace",
    "TStats",
    "BzStats",
    "split_halves",
    "evolve_lnb",
    "lnb_samples",
    "variance_growth",
    "analytic_lnb_variance",
    "variance_ratio",
    "prefactor_ratio",
    "cauchy_scale_polarized",
    "fit_cauchy",
    "tail_diagnostics",
    "lnb_correlation",
    "robust_variance",
]

MEMBER_CHUNK = 32
DEFAULT_F0 = 1j


@dataclass
class LnBTrace:
    """One ``ln b`` evolution.

    ``trajectory`` has ``T/dx`` entries; the final value is its endpoint.
    """

    z: complex
    T: float
    dx: float
    trajectory: np.ndarray
    final: complex
    exact: complex
    seed: int | None
    D: float
    polarization: Polarization
    meta: dict = field(default_factory=dict)


def split_halves(signal: SignalRealization):
    """Kernel inputs ``conj(u(x_k)) dx`` for the right half and ``conj(u(-x_k)) dx`` mirrored."""
    n = signal.grid.n_points
    if n % 2:
        raise ValidationError("signal needs an even number of samples")
    # the kernels couple through u* in the upper row, the operators through u
    w = np.conj(np.asarray(signal.samples, dtype=complex)) * signal.grid.step
    h = n // 2
    return np.ascontiguousarray(w[h:]), np.ascontiguousarray(w[:h][::-1])


def _check_z(z):
    z = complex(z)
    if z.imag < 0:
        raise ValidationError("ln b evolution needs Im z >= 0")
    return z


def evolve_lnb(signal: SignalRealization, z, f0=DEFAULT_F0) -> LnBTrace:
    """Integrate ``ln b`` across one pulse.

    The pulse runs over ``[-T, T]`` with ``T`` half the grid length.

    Raises
    ------
    NumericalError
        If the evolution produced non-finite values.
    """
    z = _check_z(z)
    w, wt = split_halves(signal)
    inc, exact, traj = kernels.lnb_ensemble(z, w[None, :].copy(), wt[None, :].copy(),
                                            signal.grid.step, complex(f0), True)
    if not (np.all(np.isfinite(traj)) and np.isfinite(exact[0])):
        bad = int(np.argmin(np.isfinite(traj[0]))) if not np.all(np.isfinite(traj)) else -1
        raise NumericalError("ln b evolution diverged", step=bad, z=z)
    return LnBTrace(z, signal.grid.length / 2, signal.grid.step, traj[0], complex(inc[0]),
                    complex(exact[0]), signal.seed, signal.D, signal.polarization,
                    {"f0": complex(f0), "member": signal.member})


def lnb_samples(D, z, T, runs, dx=0.1, seed=0, polarization="unpolarized", f0=DEFAULT_F0,
                threads=None, stream=0):
    """``ln b`` for ``runs`` independent pulses of duration ``2T``.

    Member ``m`` is ``sample_signal(grid, D, polarization, seed, member=m)``
    shifted by ``stream * 2**32``, so different ``T`` values can use
    independent members.

    Returns
    -------
    increment, exact : complex ndarray, shape (runs,)
    """
    z = _check_z(z)
    if int(runs) < 1:
        raise ValidationError("runs must be positive")
    grid = make_grid(2 * T, dx)
    if grid.n_points % 2:
        grid = make_grid(grid.step * (grid.n_points + 1), dx)
    offset = int(stream) << 32
    starts = range(0, int(runs), MEMBER_CHUNK)

    def chunk(a):
        members = range(a, min(a + MEMBER_CHUNK, int(runs)))
        halves = [split_halves(sample_signal(grid, D, polarization, seed, member=offset + m))
                  for m in members]
        w = np.ascontiguousarray(np.array([h[0] for h in halves]))
        wt = np.ascontiguousarray(np.array([h[1] for h in halves]))
        inc, ex, _ = kernels.lnb_ensemble(z, w, wt, grid.step, complex(f0), False)
        return np.asarray(inc), np.asarray(ex)

    parts = parallel_map(chunk, starts, threads)
    inc = np.concatenate([p[0] for p in parts])
    ex = np.concatenate([p[1] for p in parts])
    if not (np.all(np.isfinite(inc)) and np.all(np.isfinite(ex))):
        raise NumericalError("ln b evolution diverged", z=z, T=T, dx=dx)
    return inc, ex


def robust_variance(x):
    """Variance from the interquartile range, ``(IQR/1.349)^2``."""
    q75, q25 = np.percentile(x, [75, 25])
    return float(((q75 - q25) / (2 * special.ndtri(0.75))) ** 2)


def _bootstrap_se(x, fn, n_boot=200, seed=12345):
    rng = np.random.default_rng(seed)
    vals = [fn(x[rng.integers(0, x.size, x.size)]) for _ in range(n_boot)]
    return float(np.std(vals, ddof=1))


@dataclass
class TStats:
    """Statistics of one ensemble at fixed ``T``."""

    T: float
    runs: int
    mean: float
    mean_stderr: float
    median: float
    variance: float
    robust_variance: float
    robust_variance_stderr: float
    normality_p: float
    phase_uniformity_p: float
    kurtosis: float
    iqr: float
    flagged: bool
    exact_variance: float


@dataclass
class BzStats:
    """``ln b`` statistics across durations ``T``."""

    z: complex
    D: float
    dx: float
    polarization: Polarization
    per_T: list
    fit_constant: float
    fit_stderr: float
    samples: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return np.array([s.T for s in self.per_T])

    def variances(self, robust=True):
        return np.array([s.robust_variance if robust else s.variance for s in self.per_T])

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return v.item()
            return v

        return {"z": [self.z.real, self.z.imag], "D": self.D, "tau": self.dx,
                "polarization": self.polarization.value,
                "fit_constant": self.fit_constant, "fit_stderr": self.fit_stderr,
                "per_T": [{k: clean(v) for k, v in vars(s).items()} for s in self.per_T],
                "meta": {k: clean(v) for k, v in self.meta.items()}}


def _t_stats(T, inc, ex):
    re = inc.real
    im = np.mod(inc.imag, 2 * math.pi)
    rv = robust_variance(re)
    rv_se = _bootstrap_se(re, robust_variance)
    n = re.size
    normal_p = float(stats.normaltest(re).pvalue) if n >= 20 else float("nan")
    unif_p = float(stats.kstest(im / (2 * math.pi), "uniform").pvalue)
    q75, q25 = np.percentile(re, [75, 25])
    return TStats(float(T), int(n), float(re.mean()), float(re.std(ddof=1) / math.sqrt(n)),
                  float(np.median(re)), float(re.var(ddof=1)), rv, rv_se, normal_p, unif_p,
                  float(stats.kurtosis(re)), float(q75 - q25), bool(rv_se > 0.25 * rv),
                  float(ex.real.var(ddof=1)))


def variance_growth(D, z, T_list, runs, polarization="unpolarized", dx=0.1, seed=0,
                    f0=DEFAULT_F0, keep_samples=False, threads=None) -> BzStats:
    """Variance of ``Re ln b`` against pulse duration.

    The variance is estimated robustly from the interquartile range, which
    is insensitive to the rare large excursions near Riccati poles.  The fit
    constant is the inverse-variance weighted mean of
    ``var / (T ln(T / 2 tau))`` with ``tau = dx``.  Ensembles whose
    variance has a relative error above 25% are flagged.
    """
    T_list = sorted(float(t) for t in T_list)
    if len(T_list) < 1:
        raise ValidationError("T_list is empty")
    if any(t <= 2 * dx for t in T_list):
        raise ValidationError("every T must exceed 2 tau")
    pol = Polarization.parse(polarization)
    per, samples = [], {}
    for j, T in enumerate(T_list):
        inc, ex = lnb_samples(D, z, T, runs, dx, seed, pol, f0, threads, stream=j)
        per.append(_t_stats(T, inc, ex))
        if keep_samples:
            samples[T] = inc
    g = np.array([s.robust_variance / (s.T * math.log(s.T / (2 * dx))) for s in per])
    ge = np.array([s.robust_variance_stderr / (s.T * math.log(s.T / (2 * dx))) for s in per])
    wts = 1 / np.maximum(ge, 1e-300) ** 2
    c = float(np.sum(wts * g) / np.sum(wts))
    ce = float(1 / math.sqrt(np.sum(wts)))
    return BzStats(complex(z), float(D), float(dx), pol, per, c, ce, samples,
                   {"tau": dx, "tau_definition": "grid step", "seed": seed, "f0": complex(f0),
                    "variance_estimator": "IQR", "span_ok": T_list[-1] >= 4 * T_list[0]})


def analytic_lnb_variance(eta, D, T, tau):
    """``4 sqrt(pi) eta e^{2 eta/D} / sinh(2 eta/D) * T ln(T / 2 tau)``."""
    x = 2 * eta / D
    pref = D / 2 * math.exp(x) if x == 0 else eta * math.exp(x) / math.sinh(x)
    return 4 * math.sqrt(math.pi) * pref * T * math.log(T / (2 * tau))


def variance_ratio(T1, T2, tau):
    """Predicted ``var(T2)/var(T1)`` from ``T ln(T/2 tau)``."""
    return (T2 * math.log(T2 / (2 * tau))) / (T1 * math.log(T1 / (2 * tau)))


def prefactor_ratio(eta1, eta2, D):
    """Predicted variance ratio between ``eta2`` and ``eta1`` at equal ``T``."""
    def p(e):
        x = 2 * e / D
        return e * math.exp(x) / math.sinh(x)

    return p(eta2) / p(eta1)


def cauchy_scale_polarized(eta, D, T, tau):
    """Cauchy scale ``e^{eta/D} / I0(eta/D) * T/tau`` for polarized input at ``xi = 0``."""
    if not (D > 0 and T > 0 and tau > 0):
        raise ValidationError("D, T and tau must be positive")
    return float(T / tau / special.i0e(eta / D))


def fit_cauchy(x):
    """Maximum-likelihood Cauchy ``(location, scale)``."""
    loc, scale = stats.cauchy.fit(np.asarray(x, dtype=float))
    return float(loc), float(scale)


def tail_diagnostics(x, sizes=None, seed=0):
    """IQR and excess kurtosis against sample size.

    For each size the samples are split into disjoint subsamples and the two
    estimators are averaged, so a heavy-tailed ensemble shows a stable IQR
    with a kurtosis that keeps growing with size.

    Returns
    -------
    dict with ``sizes``, ``iqr`` and ``kurtosis`` arrays.
    """
    x = np.real(np.asarray(x)).astype(float)
    rng = np.random.default_rng(seed)
    x = x[rng.permutation(x.size)]
    if sizes is None:
        sizes = [s for s in (x.size // 16, x.size // 4, x.size) if s >= 20]
    iqr, kur = [], []
    for s in sizes:
        parts = x[: (x.size // s) * s].reshape(-1, s)
        q = np.percentile(parts, [75, 25], axis=1)
        iqr.append(float(np.mean(q[0] - q[1])))
        kur.append(float(np.mean(stats.kurtosis(parts, axis=1))))
    return {"sizes": np.asarray(sizes), "iqr": np.asarray(iqr), "kurtosis": np.asarray(kur)}


def lnb_correlation(D, zs, T, runs, dx=0.1, seed=0, polarization="unpolarized", threads=None):
    """Empirical correlation matrix of ``Re ln b`` across several ``z``.

    Every ``z`` sees the same pulses.  Nothing quantitative is asserted
    about the result.
    """
    cols = [lnb_samples(D, z, T, runs, dx, seed, polarization, threads=threads)[0].real
            for z in zs]
    return np.corrcoef(np.array(cols))
