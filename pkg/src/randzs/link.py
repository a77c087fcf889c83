"""Amplifier noise and first-order eigenvalue shifts.

Noise convention: a white complex field ``f`` of strength ``sigma2`` has
independent real and imaginary parts, each with covariance
``sigma2 delta(x - x')``.  On the grid ``f_k = sqrt(sigma2/dx) (g1 + i g2)``
with standard normal ``g``; this mirrors the way the input power ``D`` is
defined per quadrature.

With bilinear normalization ``sum psi1 psi2 dx = 1`` the first-order shift
of a bright eigenvalue is ``dz = (1/2) sum (f psi2^2 - f* psi1^2) dx``.  It
is linear in ``(g1, g2)``, so the covariance of the stacked real vector
``(d xi_1..d xi_N, d eta_1..d eta_N)`` is available both by Monte Carlo and
in closed form from the coefficient matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .ensemble import parallel_map
from .errors import DegenerateNormError, NumericalError, ValidationError
from .operators import Kind, ZsSpectrum, build_operator, discrete_mode_filter, eigensolve
from .signal import Grid, SignalRealization, make_grid, make_rng, sample_signal
from .stats import ipr

__all__ = [
    "LinkParams",
    "NoiseStrength",
    "ShiftCovariance",
    "IllConditionedWarning",
    "amplifier_sigma2",
    "noise_realization",
    "adiabatic_shift",
    "shift_coefficients",
    "shift_covariance",
    "lambda_bar_ensemble",
    "dark_shift_samples",
    "dark_eigen_variance",
    "calibrate_dark_constant",
    "dark_soliton_state",
    "jitter_drift",
    "write_covariance_matrix",
]

MC_CHUNK = 256


class IllConditionedWarning(RuntimeWarning):
    """Too few Monte Carlo runs for a well-conditioned covariance."""


@dataclass(frozen=True)
class LinkParams:
    """Physical parameters of an amplified fiber link (SI units unless noted)."""

    P_c: float = 0.05
    t_c: float = 3e-11
    G: float = 100.0
    eta_sp: float = 2.0
    h: float = 6.6e-34
    nu0: float = 2e14
    N_a: int = 10
    alpha: float = 0.2
    L_a: float = 100.0
    L_total: float = 1000.0
    B: float = 50e12

    def __post_init__(self):
        for name in ("P_c", "t_c", "G", "eta_sp", "h", "nu0", "alpha", "L_a", "L_total", "B"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive and finite, got {v!r}")
        if not self.G > 1:
            raise ValidationError(f"gain must exceed 1, got {self.G}")
        if int(self.N_a) != self.N_a or self.N_a < 1:
            raise ValidationError("N_a must be a positive integer")
        if self.N_a * self.L_a > self.L_total + self.L_a:
            raise ValidationError("amplifier count does not fit the span")

    @classmethod
    def typical(cls) -> "LinkParams":
        """A representative long-haul parameter set."""
        return cls()

    def replace(self, **kw) -> "LinkParams":
        d = asdict(self)
        d.update(kw)
        return LinkParams(**d)

    @property
    def Lambda(self) -> float:
        """Normalized bandwidth ``2 pi B t_c``."""
        return 2 * math.pi * self.B * self.t_c

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NoiseStrength:
    """Amplifier noise: single amplifier and whole chain, SI and normalized."""

    si: float
    normalized: float
    chain_si: float
    chain_normalized: float


def amplifier_sigma2(params: LinkParams) -> NoiseStrength:
    """``sigma2 = h nu0 eta_sp (G-1)^2 / (G ln G)`` per amplifier.

    The normalized value divides by ``P_c t_c``; the chain values multiply
    by ``N_a`` because the amplifiers add independent noise.
    """
    G = params.G
    if not G > 1:
        raise ValidationError("gain must exceed 1")
    s = params.h * params.nu0 * params.eta_sp * (G - 1) ** 2 / (G * math.log(G))
    norm = s / (params.P_c * params.t_c)
    return NoiseStrength(s, norm, params.N_a * s, params.N_a * norm)


def noise_realization(grid: Grid, sigma2, rng) -> np.ndarray:
    """One white-noise field ``sqrt(sigma2/dx) (g1 + i g2)``."""
    if sigma2 < 0:
        raise ValidationError("sigma2 must be non-negative")
    g = rng.standard_normal((2, grid.n_points))
    return math.sqrt(sigma2 / grid.step) * (g[0] + 1j * g[1])


def _bilinear(psi1, psi2, dx, tol=1e-8):
    nb = np.sum(psi1 * psi2, axis=-1) * dx
    bad = np.abs(nb) < tol
    if np.any(bad):
        raise DegenerateNormError("bilinear norm below tolerance", norm=float(np.min(np.abs(nb))))
    return nb


def adiabatic_shift(psi1, psi2, f, dx) -> complex:
    """First-order shift ``sum (f psi2^2 - f* psi1^2) dx / (2 sum psi1 psi2 dx)``.

    For walk spectra pass the components of ``ZsSpectrum.midpoint``.

    Raises
    ------
    DegenerateNormError
        If ``|sum psi1 psi2 dx| < 1e-8``.
    """
    psi1 = np.asarray(psi1)
    psi2 = np.asarray(psi2)
    f = np.asarray(f)
    if not (psi1.shape == psi2.shape == f.shape):
        raise ValidationError("eigenvector components and noise must have equal length")
    nb = _bilinear(psi1, psi2, dx)
    return complex(np.sum(f * psi2 ** 2 - np.conj(f) * psi1 ** 2) * dx / (2 * nb))


def shift_coefficients(spectrum: ZsSpectrum):
    """Coefficients ``(A, B)`` with ``dz = sqrt(sigma2) (A @ g1 + B @ g2)``.

    Both have shape ``(N, n)`` for ``N`` retained modes.
    """
    if spectrum.kind is not Kind.NON_HERMITIAN_BRIGHT:
        raise ValidationError("shift coefficients need bright eigenvectors")
    p1, p2 = spectrum.bilinear_normalized()
    s = math.sqrt(spectrum.grid.step)
    return s * (p2 ** 2 - p1 ** 2) / 2, 1j * s * (p1 ** 2 + p2 ** 2) / 2


@dataclass
class ShiftCovariance:
    """Covariance of stacked ``(d xi, d eta)`` over noise realizations."""

    eigenvalues: np.ndarray
    C: np.ndarray
    lambda_bar: float
    sigma2: float
    runs: int
    C_eigenvalues: np.ndarray
    method: str
    D: float | None = None
    mean: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_summary(cls, d) -> "ShiftCovariance":
        """Rebuild the scalar content of a serialized summary (no matrix)."""
        try:
            n = int(d["n_modes"])
            ev = np.array([d["C_eigen_min"], d["C_eigen_max"]], dtype=float)
            return cls(np.full(n, np.nan), np.empty((0, 0)), float(d["lambda_bar"]),
                       float(d["sigma2"]), int(d["runs"]), ev, str(d["method"]),
                       None if d.get("D") is None else float(d["D"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed covariance summary: {exc}") from exc

    def log_histogram(self, bins=20):
        """Histogram of ``ln`` of the covariance eigenvalues."""
        return np.histogram(np.log(self.C_eigenvalues), bins=bins)

    def summary(self) -> dict:
        return {"n_modes": int(self.eigenvalues.size), "lambda_bar": self.lambda_bar,
                "sigma2": self.sigma2, "runs": self.runs, "method": self.method, "D": self.D,
                "C_eigen_min": float(self.C_eigenvalues.min()),
                "C_eigen_max": float(self.C_eigenvalues.max()), **self.meta}


def _stack(A, B):
    """Real map from ``(g1, g2)`` to ``(d xi, d eta)``: shape ``(2N, 2n)``."""
    return np.vstack([np.hstack([A.real, B.real]), np.hstack([A.imag, B.imag])])


def shift_covariance(spectrum: ZsSpectrum, sigma2, runs=None, seed=0, method="montecarlo",
                     threads=None) -> ShiftCovariance:
    """Covariance matrix of eigenvalue shifts and its geometric-mean eigenvalue.

    Parameters
    ----------
    spectrum : ZsSpectrum
        Bright spectrum with eigenvectors, already reduced to independent
        modes (see :func:`randzs.operators.discrete_mode_filter`).
    sigma2 : float
        Noise strength in normalized units.
    runs : int
        Monte Carlo realizations, drawn in fixed chunks of ``MC_CHUNK``
        from the streams ``(seed, chunk)``.
    method : {"montecarlo", "exact"}
        ``exact`` uses ``sigma2 R R^T`` from the linear coefficients.

    Warns
    -----
    IllConditionedWarning
        If ``runs < 10 * 2N``.
    """
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive")
    if spectrum.eigenvectors is None or len(spectrum) == 0:
        raise ValidationError("spectrum needs retained modes with eigenvectors")
    A, B = shift_coefficients(spectrum)
    R = _stack(A, B)
    N2 = R.shape[0]
    mean = None
    if method == "exact":
        C = sigma2 * R @ R.T
        runs_used = 0
    elif method == "montecarlo":
        if runs is None or int(runs) < 2:
            raise ValidationError("Monte Carlo covariance needs runs >= 2")
        runs_used = int(runs)
        if runs_used < 10 * N2:
            warnings.warn(f"{runs_used} runs for a {N2}x{N2} covariance; expect poor conditioning",
                          IllConditionedWarning, stacklevel=2)
        n = spectrum.grid.n_points
        sq = math.sqrt(sigma2)
        base = tuple(int(v) for v in np.atleast_1d(seed))

        def chunk(c):
            m = min(MC_CHUNK, runs_used - c * MC_CHUNK)
            g = make_rng(*base, c).standard_normal((m, 2 * n))
            y = sq * g @ R.T
            return y.sum(axis=0), y.T @ y

        parts = parallel_map(chunk, range((runs_used + MC_CHUNK - 1) // MC_CHUNK), threads)
        s1 = sum(p[0] for p in parts)
        s2 = sum(p[1] for p in parts)
        mean = s1 / runs_used
        C = (s2 - runs_used * np.outer(mean, mean)) / (runs_used - 1)
    else:
        raise ValidationError(f"unknown covariance method {method!r}")
    C = 0.5 * (C + C.T)
    ev = np.linalg.eigvalsh(C)
    if ev.min() <= 0:
        raise NumericalError("covariance matrix is not positive definite",
                             min_eigenvalue=float(ev.min()), size=N2, runs=runs_used)
    lam_bar = float(np.exp(np.mean(np.log(ev))))
    return ShiftCovariance(spectrum.eigenvalues.copy(), C, lam_bar, float(sigma2), runs_used, ev,
                           method, spectrum.D, mean,
                           {"seed": np.atleast_1d(seed).tolist(), "noise_convention": "per-quadrature sigma2"})


def lambda_bar_ensemble(length, step, D, realizations, sigma2=1.0, seed=0, method="exact",
                        runs=None, eta_min=None, xi_window=None, threads=None):
    """``lambda_bar`` for independent signal realizations.

    Mode selection defaults to ``eta > sqrt(D/L)`` and ``|xi| < pi/(2 dx)``,
    which keeps one representative of each localized state.

    Returns
    -------
    list of ShiftCovariance
    """
    grid = make_grid(length, step)
    if eta_min is None:
        eta_min = math.sqrt(D / grid.length)
    if xi_window is None:
        xi_window = math.pi / (2 * grid.step)

    def one(i):
        sig = sample_signal(grid, D, "unpolarized", seed, member=i)
        spec = discrete_mode_filter(eigensolve(build_operator(sig, "bright", "mal")),
                                    eta_min, xi_window)
        if len(spec) == 0:
            raise NumericalError("no localized modes retained", D=D, member=i)
        # noise streams are offset from the signal streams
        return shift_covariance(spec, sigma2, runs, (seed, 1, i), method, threads=1)

    return parallel_map(one, range(int(realizations)), threads)


def dark_shift_samples(eigvec, grid: Grid, sigma2, runs, seed=0) -> np.ndarray:
    """Monte Carlo first-order shifts of a dark eigenvalue.

    ``d lambda = 2 Re sum f psi1* psi2 dx`` for an L2-normalized Hermitian
    eigenvector in block layout.
    """
    v = np.asarray(eigvec)
    n = grid.n_points
    ipr(v, grid)  # validates normalization
    a = np.conj(v[:n]) * v[n:]
    rng = make_rng(*np.atleast_1d(seed))
    out = np.empty(int(runs))
    for c in range(0, int(runs), MC_CHUNK):
        m = min(MC_CHUNK, int(runs) - c)
        g = rng.standard_normal((m, 2, n))
        f = math.sqrt(sigma2 / grid.step) * (g[:, 0] + 1j * g[:, 1])
        out[c:c + m] = 2 * np.real(f @ a) * grid.step
    return out


def dark_eigen_variance(eigvec, grid: Grid, sigma2, constant=1.0) -> float:
    """``constant * sigma2 * IPR``; see :func:`calibrate_dark_constant`."""
    if sigma2 < 0:
        raise ValidationError("sigma2 must be non-negative")
    return float(constant * sigma2 * ipr(eigvec, grid))


def dark_soliton_state(length=20.0, step=0.05):
    """Bound state of a single black soliton ``u = tanh(x)``.

    Returns
    -------
    eigvec : ndarray
        L2-normalized eigenvector (block layout) with eigenvalue nearest 0.
    grid : Grid
    """
    grid = make_grid(length, step)
    sig = SignalRealization(grid, np.tanh(grid.x) + 0j, 1.0)
    spec = eigensolve(build_operator(sig, "dark", "mal"))
    k = int(np.argmin(np.abs(spec.eigenvalues)))
    return spec.eigenvectors[k], grid


def calibrate_dark_constant(sigma2=1e-3, runs=20000, seed=0, eigvec=None, grid=None):
    """Fit ``var(d lambda) / (sigma2 IPR)`` by Monte Carlo.

    Uses the single black-soliton state by default.

    Returns
    -------
    constant, stderr : float
    """
    if eigvec is None:
        eigvec, grid = dark_soliton_state()
    d = dark_shift_samples(eigvec, grid, sigma2, runs, seed)
    var = float(np.var(d, ddof=1))
    scale = sigma2 * ipr(eigvec, grid)
    return var / scale, var * math.sqrt(2 / (runs - 1)) / scale


def jitter_drift(z_path, lnb0, dx) -> np.ndarray:
    """Integrate ``d ln|b| = 8 xi eta dx`` and ``d phi = 4 (eta^2 - xi^2) dx``.

    Left-point sums along the sampled path; the phase is wrapped to
    ``[0, 2 pi)``.  Returns ``ln b`` at every sample, starting at ``lnb0``.
    """
    z = np.asarray(z_path, dtype=complex)
    if z.ndim != 1 or z.size < 1:
        raise ValidationError("z_path must be a non-empty 1-d sequence")
    xi, eta = z.real, z.imag
    d_mod = np.concatenate([[0.0], np.cumsum(8 * xi * eta * dx)[:-1]])
    d_ph = np.concatenate([[0.0], np.cumsum(4 * (eta ** 2 - xi ** 2) * dx)[:-1]])
    lnb0 = complex(lnb0)
    phase = np.mod(lnb0.imag + d_ph, 2 * math.pi)
    return (lnb0.real + d_mod) + 1j * phase


def write_covariance_matrix(path, cov: ShiftCovariance) -> None:
    """Full covariance matrix as CSV with ``#`` metadata."""
    header = "\n".join(f"{k}={v}" for k, v in cov.summary().items())
    np.savetxt(path, cov.C, delimiter=",", fmt="%.17g", header=header, comments="# ")
