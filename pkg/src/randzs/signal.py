"""Random Gaussian envelopes and deterministic test potentials.

Continuum white noise with ``<u_i(x) u_j(x')> = D delta_ij delta(x - x')`` is
discretized with independent per-sample Gaussians of variance ``D/dx``, so the
integrated power ``sum |u_k|^2 dx`` has mean ``D L`` on every grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "Grid",
    "Polarization",
    "SignalRealization",
    "make_grid",
    "make_rng",
    "sample_signal",
    "optimal_potential",
    "write_signal",
    "read_signal",
]


class Polarization(str, enum.Enum):
    UNPOLARIZED = "unpolarized"
    POLARIZED = "polarized"

    @classmethod
    def parse(cls, value) -> "Polarization":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown polarization {value!r}") from None


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_k = -L/2 + k dx`` with ``n_points * dx == L``."""

    length: float
    step: float
    n_points: int

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.step * np.arange(self.n_points)

    def as_dict(self) -> dict:
        return {"L": self.length, "dx": self.step, "n": self.n_points}


def _finite_positive(name, value):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(v) or v <= 0:
        raise ValidationError(f"{name} must be positive and finite, got {value!r}")
    return v


def make_grid(length, step) -> Grid:
    """Build a grid of ``round(length/step)`` points.

    The stored step is ``length / n_points`` so that the grid tiles the
    interval exactly.

    Examples
    --------
    >>> make_grid(20, 0.1).n_points
    200
    """
    L = _finite_positive("length", length)
    dx = _finite_positive("step", step)
    if L < 2 * dx * (1 - 1e-12):
        raise ValidationError(f"length {L} shorter than two steps of {dx}")
    n = int(round(L / dx))
    return Grid(length=L, step=L / n, n_points=n)


def make_rng(seed, *stream) -> np.random.Generator:
    """Counter-based generator (Philox) for the stream ``(seed, *stream)``.

    Streams with different trailing indices are statistically independent and
    reproducible on every platform, which is what ensemble members and Monte
    Carlo batches rely on.
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(s) for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class SignalRealization:
    """Sampled envelope ``u(x_k)`` and its provenance."""

    grid: Grid
    samples: np.ndarray
    D: float
    polarization: Polarization = Polarization.UNPOLARIZED
    seed: int | None = None
    member: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.samples) != self.grid.n_points:
            raise ValidationError("sample count does not match grid")

    def power(self) -> float:
        """Mean of ``|u_k|^2`` times ``dx``, i.e. an estimate of ``D``."""
        return float(np.mean(np.abs(self.samples) ** 2) * self.grid.step)

    def scaled(self, c) -> "SignalRealization":
        return SignalRealization(self.grid, c * self.samples, abs(c) ** 2 * self.D,
                                 self.polarization, self.seed, self.member, dict(self.meta))


def white_noise(rng, n, variance, polarization) -> np.ndarray:
    """Complex samples with ``E|u|^2 = variance``; real if polarized."""
    if polarization is Polarization.POLARIZED:
        return np.sqrt(variance) * rng.standard_normal(n) + 0j
    g = rng.standard_normal((2, n))
    return np.sqrt(variance / 2) * (g[0] + 1j * g[1])


def sample_signal(grid: Grid, D, polarization=Polarization.UNPOLARIZED, seed=0,
                  member=None) -> SignalRealization:
    """Draw one Gaussian envelope.

    Parameters
    ----------
    grid : Grid
    D : float
        Mean power; the per-sample variance is ``D/dx``.
    polarization : Polarization or str
        ``unpolarized`` gives ``(g1 + i g2)/sqrt(2)``, ``polarized`` a real field.
    seed : int
        Master seed.
    member : int, optional
        Ensemble member index; selects an independent stream.
    """
    D = float(D)
    if not math.isfinite(D) or D < 0:
        raise ValidationError(f"D must be non-negative, got {D}")
    pol = Polarization.parse(polarization)
    stream = () if member is None else (int(member),)
    rng = make_rng(seed, *stream)
    u = white_noise(rng, grid.n_points, D / grid.step, pol)
    return SignalRealization(grid, u, D, pol, int(seed), member)


def optimal_potential(xi, eta, grid: Grid) -> SignalRealization:
    """Least-action pulse carrying a bound state at ``z = xi + i eta``.

    ``u(x) = 2 i eta sech(2 eta x) exp(-2 i xi x)``.  The ``D`` field holds
    the action ``W = (1/2) sum |u|^2 dx`` (about ``2 eta``).
    """
    xi = float(xi)
    eta = float(eta)
    if not eta > 0:
        raise ValidationError(f"eta must be positive, got {eta}")
    if math.exp(-eta * grid.length) > 1e-6:
        raise ValidationError("grid too short for the requested eta")
    x = grid.x
    u = 2j * eta / np.cosh(2 * eta * x) * np.exp(-2j * xi * x)
    W = 0.5 * float(np.sum(np.abs(u) ** 2) * grid.step)
    return SignalRealization(grid, u, W, Polarization.UNPOLARIZED, None, None,
                             {"xi": xi, "eta": eta, "kind": "optimal"})


def write_signal(path, sig: SignalRealization) -> None:
    """Write the columnar text format ``x re im`` with a metadata header."""
    g = sig.grid
    header = (f"L={g.length!r} dx={g.step!r} D={sig.D!r} "
              f"pol={sig.polarization.value} seed={sig.seed}")
    data = np.column_stack([g.x, sig.samples.real, sig.samples.imag])
    np.savetxt(path, data, fmt="%.17g", header=header, comments="# ")


def read_signal(path) -> SignalRealization:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValidationError(f"{path}: missing signal header")
    meta = dict(tok.split("=", 1) for tok in first[1:].split())
    data = np.loadtxt(path, comments="#", ndmin=2)
    L = float(meta["L"])
    n = data.shape[0]
    grid = Grid(L, L / n, n)
    seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
    return SignalRealization(grid, data[:, 1] + 1j * data[:, 2], float(meta["D"]),
                             Polarization.parse(meta["pol"]), seed)
