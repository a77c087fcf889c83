"""Entropy bookkeeping and the spectral-efficiency lower bound.

Work in normalized units: time in ``t_c``, power in ``P_c``.  Input
eigenvalues with ``eta > 0`` are independent symbols, ``xi`` is uniform over
the normalized bandwidth ``Lambda = 2 pi B t_c`` and ``eta`` follows
``P_eta``.  Output noise is Gaussian with covariance ``C``; ``lambda_bar``
is the geometric mean of its eigenvalues and scales as ``0.41 sigma2 D``.
The rate per symbol is ``R = H_in - H_noise``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .link import LinkParams, ShiftCovariance, amplifier_sigma2
from .stats import eta_entropy_constant

__all__ = [
    "C0_PUBLISHED",
    "LAMBDA_BAR_SLOPE",
    "REPORT_VERSION",
    "CapacityReport",
    "entropy_constant",
    "incoming_entropy",
    "noise_entropy",
    "lambda_bar_fitted",
    "spectral_efficiency",
    "closed_form_rate",
    "closed_form_coefficient",
    "capacity_report",
]

C0_PUBLISHED = 0.08
LAMBDA_BAR_SLOPE = 0.41
REPORT_VERSION = "1.0"


def entropy_constant() -> float:
    """``-int P_eta ln P_eta - ln(D/4)`` by quadrature (independent of ``D``)."""
    return eta_entropy_constant(1.0)


def _positive(name, v):
    if not (math.isfinite(v) and v > 0):
        raise ValidationError(f"{name} must be positive, got {v!r}")


def incoming_entropy(D, Lambda, c0=C0_PUBLISHED) -> float:
    """``ln Lambda + ln(D/4) + c0`` nats per symbol."""
    _positive("D", D)
    _positive("Lambda", Lambda)
    return math.log(Lambda) + math.log(D / 4) + c0


def noise_entropy(lambda_bar) -> float:
    """``ln((2 pi e)^{1/2} lambda_bar)`` nats per symbol."""
    _positive("lambda_bar", lambda_bar)
    return 0.5 * math.log(2 * math.pi * math.e) + math.log(lambda_bar)


def lambda_bar_fitted(sigma2, D, slope=LAMBDA_BAR_SLOPE) -> float:
    """Linear law ``slope * sigma2 * D``."""
    return slope * sigma2 * D


def closed_form_coefficient(link: LinkParams) -> float:
    """``k`` in ``R = ln(k B)`` for the fitted noise law.

    ``k = sqrt(pi/8e) G ln G P_c t_c^2 / (0.41 h nu0 eta_sp (G-1)^2 N_a)``.
    """
    G = link.G
    return (math.sqrt(math.pi / (8 * math.e)) * G * math.log(G) * link.P_c * link.t_c ** 2
            / (LAMBDA_BAR_SLOPE * link.h * link.nu0 * link.eta_sp * (G - 1) ** 2 * link.N_a))


def closed_form_rate(link: LinkParams) -> float:
    """``R = ln(k B)`` nats per symbol, computed entirely in SI units."""
    return math.log(closed_form_coefficient(link) * link.B)


@dataclass
class CapacityReport:
    """Rate bookkeeping for one link; ``R_nats = H_in - H_noise`` exactly."""

    D: float
    Lambda: float
    H_in: float
    H_noise: float
    R_nats: float | None
    R_bits_per_s_per_Hz: float | None
    link: LinkParams
    lambda_bar: float
    lambda_bar_source: str
    c0: float
    provenance: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    supplementary: dict = field(default_factory=dict)
    version: str = REPORT_VERSION

    def to_dict(self) -> dict:
        return {"version": self.version, "tool_version": __version__, "D": self.D,
                "Lambda": self.Lambda, "H_in": self.H_in, "H_noise": self.H_noise,
                "R_nats": self.R_nats, "R_bits_per_s_per_Hz": self.R_bits_per_s_per_Hz,
                "link": self.link.to_dict(), "lambda_bar": self.lambda_bar,
                "lambda_bar_source": self.lambda_bar_source, "c0": self.c0,
                "provenance": self.provenance, "diagnostics": self.diagnostics,
                "supplementary": self.supplementary}

    def to_json(self) -> str:
        """Deterministic serialization (sorted keys, ``repr`` floats)."""
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def spectral_efficiency(link: LinkParams, lambda_bar_mode="fitted", C_opt: ShiftCovariance = None,
                        D=1.0, c0=0.0) -> CapacityReport:
    """Rate lower bound for a link.

    Parameters
    ----------
    link : LinkParams
    lambda_bar_mode : {"fitted", "measured"}
        ``fitted`` uses ``0.41 sigma2 D``; ``measured`` rescales the
        ``lambda_bar`` of ``C_opt`` from its ``sigma2`` to the link noise and
        takes ``D`` from it.
    D : float
        Input power in fitted mode; it cancels from the rate.
    c0 : float
        Entropy constant added to ``H_in``.  The default 0 reproduces the
        closed form ``R = ln(k B)``; the report records the alternatives.

    Notes
    -----
    A negative rate means the noise entropy exceeds the input entropy; the
    rate fields are then ``None`` and a diagnostic is attached.
    """
    mode = str(lambda_bar_mode).lower()
    noise = amplifier_sigma2(link)
    s2 = noise.chain_normalized
    prov = {"sigma2_si_per_amplifier": noise.si, "sigma2_normalized_chain": s2,
            "Lambda_definition": "2 pi B t_c", "c0_used": c0, "c0_published": C0_PUBLISHED,
            "c0_quadrature": entropy_constant(), "lambda_bar_slope": LAMBDA_BAR_SLOPE,
            "jitter": "excluded"}
    if mode == "fitted":
        _positive("D", D)
        lam = lambda_bar_fitted(s2, D)
        source = "fitted"

        def rate(d):
            return incoming_entropy(d, link.Lambda, c0) - noise_entropy(lambda_bar_fitted(s2, d))

        r1, r4 = rate(1.0), rate(4.0)
        if abs(r1 - r4) > 1e-12 * max(1.0, abs(r1)):
            raise NumericalError("input power does not cancel from the rate", r1=r1, r4=r4)
        prov["D_cancellation"] = abs(r1 - r4)
    elif mode == "measured":
        if C_opt is None:
            raise ValidationError("measured mode needs a ShiftCovariance")
        if C_opt.D is None:
            raise ValidationError("covariance carries no D")
        D = float(C_opt.D)
        lam = C_opt.lambda_bar * s2 / C_opt.sigma2
        source = "measured"
        prov.update({"covariance_method": C_opt.method, "covariance_runs": C_opt.runs,
                     "covariance_sigma2": C_opt.sigma2, "covariance_modes": int(C_opt.eigenvalues.size),
                     "lambda_bar_over_sigma2_D": C_opt.lambda_bar / (C_opt.sigma2 * D)})
    else:
        raise ValidationError(f"unknown lambda_bar mode {lambda_bar_mode!r}")
    h_in = incoming_entropy(D, link.Lambda, c0)
    h_n = noise_entropy(lam)
    r = h_in - h_n
    diag = []
    if r < -1e-12:
        diag.append("noise entropy exceeds input entropy; rate undefined")
        r_nats = r_bits = None
    else:
        r_nats, r_bits = r, r / math.log(2)
    if mode == "fitted" and c0 == 0.0:
        prov["closed_form_R_nats"] = closed_form_rate(link)
        prov["closed_form_coefficient"] = closed_form_coefficient(link)
    return CapacityReport(float(D), link.Lambda, h_in, h_n, r_nats, r_bits, link, lam, source,
                          c0, prov, diag)


def capacity_report(link=None, lambda_bar_mode="fitted", C_opt=None, D=None, c0=0.0,
                    bz_stats=None, extra=None) -> CapacityReport:
    """Assemble a complete report, listing any missing inputs.

    Raises
    ------
    ValidationError
        With ``missing`` naming every absent input.
    """
    missing = []
    if link is None:
        missing.append("link")
    mode = str(lambda_bar_mode).lower()
    if mode == "measured" and C_opt is None:
        missing.append("covariance")
    if mode == "fitted" and D is None:
        missing.append("D")
    if missing:
        err = ValidationError("missing inputs: " + ", ".join(missing))
        err.missing = missing
        raise err
    rep = spectral_efficiency(link, mode, C_opt, D if D is not None else 1.0, c0)
    rep.provenance["inputs"] = {"lambda_bar": "measured" if mode == "measured" else "fitted",
                                "H_in": "analytic", "H_noise": "Gaussian approximation",
                                "link": "configuration"}
    if bz_stats is not None:
        rep.supplementary["lnb_statistics"] = {"binding": False, **bz_stats}
    if extra:
        rep.supplementary.update(extra)
    return rep
