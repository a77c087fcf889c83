"""Ensemble statistics over spectra and analytic reference curves.

Densities are normalized per unit spectral parameter, per unit system length
and per realization, so estimates from different ``L`` are comparable.  For
the two-dimensional bright problem the marginal ``eta`` profile is further
divided by the width of the sampled ``xi`` range, which makes it directly
comparable with ``rho(xi, eta)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .errors import ValidationError
from .operators import Kind, Scheme, ZsSpectrum

__all__ = [
    "Axis",
    "DosEstimate",
    "SpacingHistogram",
    "IprCurve",
    "dos_1d",
    "eta_profile",
    "dos_2d",
    "spacing_stats",
    "ipr",
    "ipr_samples",
    "ipr_vs_lambda",
    "mid_band_ipr",
    "edge_window",
    "analytic_dos_bright",
    "analytic_dos_scba",
    "analytic_p_eta",
    "dos_bracket",
    "p_eta_normalization",
    "eta_entropy_constant",
    "LinearFit",
    "linear_fit",
]


class Axis(str, enum.Enum):
    LAMBDA_1D = "lambda"
    ETA_PROFILE = "eta"
    XI_ETA_2D = "xi_eta"


@dataclass
class DosEstimate:
    """Binned density of states.

    For ``XI_ETA_2D`` the ``bin_edges`` attribute is a pair ``(xi_edges,
    eta_edges)`` and ``density`` is two dimensional.
    """

    axis: Axis
    bin_edges: np.ndarray | tuple
    counts: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    n_realizations: int
    meta: dict = field(default_factory=dict)

    @property
    def bin_centers(self):
        if self.axis is Axis.XI_ETA_2D:
            return tuple(0.5 * (e[1:] + e[:-1]) for e in self.bin_edges)
        e = self.bin_edges
        return 0.5 * (e[1:] + e[:-1])

    def integral(self) -> float:
        """``L * sum(density * width)``: mean retained modes per realization
        (per unit ``xi`` for an eta profile)."""
        if self.axis is Axis.XI_ETA_2D:
            wx = np.diff(self.bin_edges[0])
            we = np.diff(self.bin_edges[1])
            return float(self.meta["L"] * np.sum(self.density * wx[:, None] * we[None, :]))
        return float(self.meta["L"] * np.sum(self.density * np.diff(self.bin_edges)))

    def flatness(self) -> float:
        """Max/min density ratio over the bins."""
        d = np.asarray(self.density)
        if np.any(d <= 0):
            return math.inf
        return float(d.max() / d.min())


def _check_ensemble(spectra):
    spectra = list(spectra)
    if not spectra:
        raise ValidationError("empty ensemble")
    return spectra


def edge_window(spectra, edge_fraction=0.15):
    """Retained ``(lo, hi)`` range of a Hermitian ensemble.

    The walk scheme has the fixed quasi-energy range ``(-pi/dx, pi/dx]``; the
    central-difference range is taken from the ensemble extremes.
    """
    if not 0 <= edge_fraction < 0.5:
        raise ValidationError("edge_fraction must lie in [0, 0.5)")
    s0 = spectra[0]
    if s0.scheme is Scheme.MODIFIED_ABLOWITZ_LADIK:
        lo, hi = -math.pi / s0.grid.step, math.pi / s0.grid.step
    else:
        lo = min(float(np.min(s.eigenvalues.real)) for s in spectra)
        hi = max(float(np.max(s.eigenvalues.real)) for s in spectra)
    width = hi - lo
    return lo + edge_fraction * width, hi - edge_fraction * width


def _per_realization_hist(values, edges):
    return np.array([np.histogram(v, edges)[0] for v in values], dtype=float)


def _density_from_counts(per, widths, scale):
    R = per.shape[0]
    dens_r = per / (widths * scale)
    density = dens_r.mean(axis=0)
    stderr = dens_r.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full_like(density, np.nan)
    return per.sum(axis=0), density, stderr


def dos_1d(spectra, bins=60, edge_fraction=0.15) -> DosEstimate:
    """Density of real eigenvalues of a Hermitian ensemble.

    Parameters
    ----------
    spectra : sequence of ZsSpectrum
        Dark-problem spectra.
    bins : int or array
        Number of equal bins over the retained range, or explicit edges.
    edge_fraction : float
        Fraction of the spectral range discarded at each edge.
    """
    spectra = _check_ensemble(spectra)
    if spectra[0].kind is not Kind.HERMITIAN_DARK:
        raise ValidationError("dos_1d needs Hermitian spectra")
    lo, hi = edge_window(spectra, edge_fraction)
    edges = np.linspace(lo, hi, int(bins) + 1) if np.isscalar(bins) else np.asarray(bins, float)
    L = spectra[0].grid.length
    per = _per_realization_hist([s.eigenvalues.real for s in spectra], edges)
    counts, density, stderr = _density_from_counts(per, np.diff(edges), L)
    meta = {"L": L, "dx": spectra[0].grid.step, "D": spectra[0].D,
            "scheme": spectra[0].scheme.value, "edge_fraction": edge_fraction}
    return DosEstimate(Axis.LAMBDA_1D, edges, counts, density, stderr, len(spectra), meta)


def _xi_range(spectra):
    s0 = spectra[0]
    if s0.scheme is Scheme.MODIFIED_ABLOWITZ_LADIK:
        return -math.pi / s0.grid.step, math.pi / s0.grid.step
    return (min(float(np.min(s.eigenvalues.real)) for s in spectra),
            max(float(np.max(s.eigenvalues.real)) for s in spectra))


def eta_profile(spectra, bins=30, eta_min=None, eta_max=None) -> DosEstimate:
    """Marginal density over ``|eta|`` of a bright ensemble, per unit ``xi``.

    The density averages the ``+eta`` and ``-eta`` halves, so it is directly
    comparable with ``rho(xi, eta)`` at one sign; the separate halves are kept
    in ``meta["positive"]`` and ``meta["negative"]``.  ``eta_min`` defaults
    to ``sqrt(D/L)``, below which finite-size effects dominate.
    """
    spectra = _check_ensemble(spectra)
    if spectra[0].kind is not Kind.NON_HERMITIAN_BRIGHT:
        raise ValidationError("eta_profile needs bright spectra")
    L = spectra[0].grid.length
    D = spectra[0].D
    if eta_min is None:
        eta_min = math.sqrt(D / L)
    if eta_max is None:
        eta_max = max(float(np.max(np.abs(s.eigenvalues.imag))) for s in spectra)
    if not eta_max > eta_min:
        raise ValidationError("no eta range left after filtering")
    if np.isscalar(bins):
        edges = np.linspace(eta_min, eta_max, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    xlo, xhi = _xi_range(spectra)
    per_pos = _per_realization_hist([s.eigenvalues.imag for s in spectra], edges)
    per_neg = _per_realization_hist([-s.eigenvalues.imag for s in spectra], edges)
    if per_pos.sum() + per_neg.sum() == 0:
        raise ValidationError("no eigenvalues in the requested eta range")
    widths = np.diff(edges)
    scale = L * (xhi - xlo)
    counts, density, stderr = _density_from_counts(0.5 * (per_pos + per_neg), widths, scale)
    meta = {"L": L, "dx": spectra[0].grid.step, "D": D, "eta_min": eta_min,
            "xi_range": [xlo, xhi], "scheme": spectra[0].scheme.value,
            "positive": _density_from_counts(per_pos, widths, scale)[1].tolist(),
            "negative": _density_from_counts(per_neg, widths, scale)[1].tolist()}
    return DosEstimate(Axis.ETA_PROFILE, edges, 2 * counts, density, stderr, len(spectra), meta)


def dos_2d(spectra, xi_bins=40, eta_bins=40, eta_max=None) -> DosEstimate:
    """Two-dimensional density ``rho(xi, eta)`` of a bright ensemble."""
    spectra = _check_ensemble(spectra)
    L = spectra[0].grid.length
    xlo, xhi = _xi_range(spectra)
    if eta_max is None:
        eta_max = max(float(np.max(np.abs(s.eigenvalues.imag))) for s in spectra)
    xe = np.linspace(xlo, xhi, int(xi_bins) + 1)
    ee = np.linspace(-eta_max, eta_max, int(eta_bins) + 1)
    per = np.array([np.histogram2d(s.eigenvalues.real, s.eigenvalues.imag, (xe, ee))[0]
                    for s in spectra])
    area = np.diff(xe)[:, None] * np.diff(ee)[None, :]
    dens_r = per / (area * L)
    R = len(spectra)
    stderr = dens_r.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full(area.shape, np.nan)
    return DosEstimate(Axis.XI_ETA_2D, (xe, ee), per.sum(axis=0), dens_r.mean(axis=0), stderr, R,
                       {"L": L, "dx": spectra[0].grid.step, "D": spectra[0].D})


# ---------------------------------------------------------------- spacings

@dataclass
class SpacingHistogram:
    """Nearest-neighbour spacing statistics (spacings in units of the mean)."""

    bin_edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    rate: float
    mean_spacing: float
    ks_statistic: float
    p_value: float
    log_slope: float
    log_intercept: float
    log_r2: float
    n_spacings: int

    def log_columns(self):
        """``(spacing, ln density)`` for bins with non-zero counts."""
        c = 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])
        m = self.counts > 0
        return c[m], np.log(self.density[m])


def spacing_stats(spectra, edge_fraction=0.15, bins=30, s_max=5.0, min_count=5) -> SpacingHistogram:
    """Level spacings and an exponential (Poisson) goodness of fit.

    Spacings are taken between consecutive sorted eigenvalues inside the
    retained band of each realization and divided by the ensemble mean
    spacing (the density is flat, so this is the unfolding).  The fit is the
    maximum-likelihood exponential; the p-value is a Kolmogorov-Smirnov test
    against it.  The log-histogram regression uses bins over ``[0, s_max]``
    with at least ``min_count`` entries.

    Also accepts plain arrays of eigenvalues in place of spectra, for
    synthetic level sequences.
    """
    spectra = _check_ensemble(spectra)
    if isinstance(spectra[0], ZsSpectrum):
        lo, hi = edge_window(spectra, edge_fraction)
        levels = [np.sort(s.eigenvalues.real) for s in spectra]
        levels = [v[(v >= lo) & (v <= hi)] for v in levels]
    else:
        levels = [np.sort(np.asarray(v, dtype=float)) for v in spectra]
    raw = np.concatenate([np.diff(v) for v in levels if len(v) > 1]) if levels else np.array([])
    if raw.size < 100:
        raise ValidationError(f"need at least 100 spacings, got {raw.size}")
    if np.any(raw <= 0):
        raise ValidationError("degenerate eigenvalues give non-positive spacings")
    mean = float(raw.mean())
    s = raw / mean
    ks = stats.kstest(s, "expon", args=(0.0, float(s.mean())))
    edges = np.linspace(0.0, s_max, int(bins) + 1)
    counts, _ = np.histogram(s, edges)
    density = counts / (s.size * np.diff(edges))
    centers = 0.5 * (edges[1:] + edges[:-1])
    m = counts >= min_count
    if m.sum() >= 3:
        fit = stats.linregress(centers[m], np.log(counts[m]))
        slope, icpt, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)
    else:
        slope = icpt = r2 = float("nan")
    return SpacingHistogram(edges, counts, density, 1.0 / mean, mean, float(ks.statistic),
                            float(ks.pvalue), slope, icpt, r2, int(s.size))


# -------------------------------------------------------------------- IPR

def ipr(eigvec, grid, tol=1e-6) -> float:
    """Inverse participation ratio ``sum (|psi1|^2 + |psi2|^2)^2 dx``.

    The vector is in block layout and must satisfy ``sum |psi|^2 dx = 1``.
    """
    v = np.asarray(eigvec)
    n = grid.n_points
    if v.shape[-1] != 2 * n:
        raise ValidationError("eigenvector length must be 2n")
    dens = np.abs(v[..., :n]) ** 2 + np.abs(v[..., n:]) ** 2
    norm = dens.sum(axis=-1) * grid.step
    if np.any(np.abs(norm - 1) > tol):
        raise ValidationError(f"eigenvector not L2 normalized (norm {np.max(np.abs(norm)):.6g})")
    out = np.sum(dens ** 2, axis=-1) * grid.step
    return float(out) if np.ndim(out) == 0 else out


def ipr_samples(spectrum: ZsSpectrum):
    """``(lambda, ipr)`` arrays for every eigenpair of one spectrum."""
    if spectrum.eigenvectors is None:
        raise ValidationError("spectrum has no eigenvectors")
    return spectrum.eigenvalues.real.copy(), ipr(spectrum.eigenvectors, spectrum.grid)


@dataclass
class IprCurve:
    centers: np.ndarray
    mean_ipr: np.ndarray
    stderr: np.ndarray
    edge: np.ndarray
    window: float
    meta: dict = field(default_factory=dict)

    def middle_variation(self) -> float:
        """Relative spread ``(max - min)/mean`` over the non-edge points."""
        m = ~self.edge & np.isfinite(self.mean_ipr)
        v = self.mean_ipr[m]
        return float((v.max() - v.min()) / v.mean())


def _as_ipr_pairs(items):
    pairs = []
    for it in items:
        pairs.append(ipr_samples(it) if isinstance(it, ZsSpectrum) else (np.asarray(it[0]), np.asarray(it[1])))
    return pairs


def ipr_vs_lambda(items, window_fraction=0.05, edge_fraction=0.15, points=101) -> IprCurve:
    """Sliding-window mean IPR as a function of the eigenvalue.

    Parameters
    ----------
    items : sequence
        Spectra with eigenvectors, or ``(lambda, ipr)`` pairs.
    window_fraction : float
        Flat window width as a fraction of the spectral width.
    edge_fraction : float
        Points within this fraction of either spectral edge are flagged.
    """
    pairs = _as_ipr_pairs(_check_ensemble(items))
    lam = np.concatenate([p[0] for p in pairs])
    val = np.concatenate([p[1] for p in pairs])
    lo, hi = float(lam.min()), float(lam.max())
    width = hi - lo
    if not 0 < window_fraction < 1:
        raise ValidationError("window wider than the spectrum")
    win = window_fraction * width
    centers = np.linspace(lo + win / 2, hi - win / 2, int(points))
    order = np.argsort(lam)
    lam, val = lam[order], val[order]
    a = np.searchsorted(lam, centers - win / 2)
    b = np.searchsorted(lam, centers + win / 2)
    cs = np.concatenate([[0.0], np.cumsum(val)])
    cs2 = np.concatenate([[0.0], np.cumsum(val ** 2)])
    cnt = (b - a).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = (cs[b] - cs[a]) / cnt
        var = (cs2[b] - cs2[a]) / cnt - mean ** 2
        se = np.sqrt(np.maximum(var, 0) / cnt)
    edge = (centers < lo + edge_fraction * width) | (centers > hi - edge_fraction * width)
    return IprCurve(centers, mean, se, edge, win, {"edge_fraction": edge_fraction})


def mid_band_ipr(items, band_fraction=0.5):
    """Mean IPR over ``|lambda| < band_fraction * max|lambda|``.

    Returns
    -------
    mean, stderr : float
        The standard error comes from the spread of per-realization means.
    """
    pairs = _as_ipr_pairs(_check_ensemble(items))
    lmax = max(float(np.max(np.abs(p[0]))) for p in pairs)
    per = []
    for lam, val in pairs:
        m = np.abs(lam) < band_fraction * lmax
        if m.any():
            per.append(val[m].mean())
    per = np.array(per)
    se = per.std(ddof=1) / math.sqrt(per.size) if per.size > 1 else float("nan")
    return float(per.mean()), float(se)


# --------------------------------------------------------- analytic curves

def dos_bracket(x):
    """``(x coth x - 1)/sinh^2 x``, even in ``x``, stable at 0 and infinity."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < 1e-3
    big = x > 20
    mid = ~(small | big)
    xs = x[small]
    out[small] = 1.0 / 3.0 - 2.0 * xs ** 2 / 15.0
    xm = x[mid]
    out[mid] = (xm / np.tanh(xm) - 1) / np.sinh(xm) ** 2
    xb = x[big]
    out[big] = 4 * (xb - 1) * np.exp(-2 * xb)
    return out if out.ndim else float(out)


def _positive(name, v):
    if not v > 0:
        raise ValidationError(f"{name} must be positive")


def analytic_dos_bright(eta, D):
    """Exact bright density ``(2/(pi D)) [(x coth x - 1)/sinh^2 x]``, ``x = 2 eta/D``."""
    _positive("D", D)
    return 2.0 / (math.pi * D) * dos_bracket(2 * np.asarray(eta, dtype=float) / D)


def analytic_p_eta(eta, D):
    """Normalized distribution of ``eta >= 0``: ``(4/D)`` times the same bracket."""
    _positive("D", D)
    return 4.0 / D * dos_bracket(2 * np.asarray(eta, dtype=float) / D)


def analytic_dos_scba(eta, D):
    """Uniform band ``1/(2 pi D)`` for ``|eta| <= D``, zero outside."""
    _positive("D", D)
    eta = np.asarray(eta, dtype=float)
    out = np.where(np.abs(eta) <= D, 1.0 / (2 * math.pi * D), 0.0)
    return out if out.ndim else float(out)


def p_eta_normalization(D=1.0) -> float:
    """``int_0^inf P_eta`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda e: analytic_p_eta(e, D), 0, np.inf, epsabs=1e-13, epsrel=1e-12,
                            limit=500)
    return float(val)


def eta_entropy_constant(D=1.0) -> float:
    """``-int P_eta ln P_eta - ln(D/4)`` by adaptive quadrature.

    The result does not depend on ``D`` because ``P_eta`` is a scaling form.
    """
    def integrand(e):
        p = analytic_p_eta(e, D)
        return -p * math.log(p) if p > 0 else 0.0

    val, _ = integrate.quad(integrand, 0, 60 * D, epsabs=1e-13, epsrel=1e-12, limit=500)
    return float(val - math.log(D / 4))


@dataclass
class LinearFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    r2: float


def linear_fit(x, y) -> LinearFit:
    """Ordinary least squares with residual-based standard errors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValidationError("a linear fit needs at least 3 points")
    r = stats.linregress(x, y)
    return LinearFit(float(r.slope), float(r.intercept), float(r.stderr),
                     float(r.intercept_stderr), float(r.rvalue ** 2))
