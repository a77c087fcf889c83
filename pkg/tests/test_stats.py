import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from randzs.ensemble import spectra_ensemble
from randzs.errors import ValidationError
from randzs.operators import build_operator, eigensolve
from randzs.signal import SignalRealization, make_grid, optimal_potential
from randzs.stats import (analytic_dos_bright, analytic_dos_scba, analytic_p_eta, dos_1d,
                          dos_bracket, eta_entropy_constant, eta_profile, ipr, ipr_vs_lambda,
                          linear_fit, mid_band_ipr, p_eta_normalization, spacing_stats)


def _bracket_reference(x):
    # independent evaluation through exponentials, valid for 0.01 < x < 300
    e2 = math.exp(-2 * x)
    coth = (1 + e2) / (1 - e2)
    sinh2 = ((1 - e2) / (2 * math.exp(-x))) ** 2
    return (x * coth - 1) / sinh2


# ------------------------------------------------------------ analytic curves

def test_bright_density_at_origin():
    assert analytic_dos_bright(0.0, 1.0) == pytest.approx(2 / (3 * math.pi), rel=1e-12)
    assert analytic_dos_bright(1e-6, 1.0) == pytest.approx(2 / (3 * math.pi), rel=1e-9)


@pytest.mark.parametrize("x", [0.02, 0.5, 1.0, 3.0, 10.0, 19.0, 25.0, 100.0])
def test_bracket_against_exponential_form(x):
    assert dos_bracket(x) == pytest.approx(_bracket_reference(x), rel=1e-9)


def test_bracket_continuous_across_branches():
    for x0 in (1e-3, 20.0):
        lo, hi = dos_bracket(x0 * (1 - 1e-9)), dos_bracket(x0 * (1 + 1e-9))
        assert lo == pytest.approx(hi, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(eta=st.floats(-10, 10), D=st.floats(0.1, 5))
def test_bright_density_even(eta, D):
    assert analytic_dos_bright(eta, D) == analytic_dos_bright(-eta, D)


def test_bright_and_p_eta_proportional():
    eta = np.linspace(0, 6, 301)
    for D in (0.5, 1.0, 3.0):
        ratio = analytic_p_eta(eta, D) / analytic_dos_bright(eta, D)
        assert np.ptp(ratio) <= 1e-12 * ratio.mean()
        assert ratio.mean() == pytest.approx(2 * math.pi, rel=1e-12)


def test_tail_slope_approaches_four_over_D():
    # ln rho = -4 eta/D + ln(2 eta/D - 1) + const at large eta, so the local
    # slope tends to -4/D; far in the tail it is within 5%
    for D in (1.0, 2.0):
        eta = np.linspace(8 * D, 16 * D, 41)
        slope = np.polyfit(eta, np.log(analytic_dos_bright(eta, D)), 1)[0]
        assert abs(slope + 4 / D) < 0.05 * 4 / D


def test_tail_slope_has_log_prefactor_correction():
    # exact derivative of the log bracket, x = 2 eta/D: d/deta = (2/D) d/dx
    eta = np.array([2.0, 3.0, 4.0])
    h = 1e-5
    num = (np.log(analytic_dos_bright(eta + h, 1.0)) - np.log(analytic_dos_bright(eta - h, 1.0))) / (2 * h)
    x = 2 * eta
    approx = 2 * (1 / (x - 1) - 2)
    assert np.allclose(num, approx, atol=0.02)


def test_p_eta_small_eta_limit():
    assert analytic_p_eta(0.0, 2.0) == pytest.approx(2 / 3, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(eta=st.floats(0, 5), D=st.floats(0.2, 4), c=st.floats(0.1, 10))
def test_p_eta_scaling_form(eta, D, c):
    assert analytic_p_eta(eta, D) == pytest.approx(analytic_p_eta(eta / c, D / c) / c,
                                                   rel=1e-9, abs=1e-300)


@pytest.mark.parametrize("D", [0.5, 1.0, 4.0])
def test_p_eta_normalized(D):
    assert p_eta_normalization(D) == pytest.approx(1.0, abs=1e-6)
    # independent quadrature of the exponential form
    val, _ = integrate.quad(lambda e: 4 / D * _bracket_reference(max(2 * e / D, 0.011)), 0, 60 * D,
                            limit=400)
    assert val == pytest.approx(1.0, abs=2e-4)


def test_entropy_constant_independent_of_D_and_range():
    c1 = eta_entropy_constant(1.0)
    for D in (0.5, 2.0, 4.0):
        assert eta_entropy_constant(D) == pytest.approx(c1, abs=1e-8)

    def h(top):
        f = lambda e: -analytic_p_eta(e, 1.0) * math.log(analytic_p_eta(e, 1.0))
        return integrate.quad(f, 0, top, limit=500, epsabs=1e-13)[0] - math.log(0.25)

    # doubling the integration range changes nothing
    assert h(30.0) == pytest.approx(h(60.0), abs=1e-10)
    assert h(60.0) == pytest.approx(c1, abs=1e-8)


def test_scba_band():
    assert analytic_dos_scba(0.0, 1.0) == pytest.approx(1 / (2 * math.pi))
    assert analytic_dos_scba(1.5, 1.0) == 0.0
    for D in (0.5, 1, 3):
        val, _ = integrate.quad(lambda e: analytic_dos_scba(e, D), -2 * D, 2 * D, points=[-D, D])
        assert val == pytest.approx(1 / math.pi, rel=1e-9)


def test_analytic_curves_reject_nonpositive_D():
    with pytest.raises(ValidationError):
        analytic_dos_bright(0.1, 0.0)
    with pytest.raises(ValidationError):
        analytic_p_eta(0.1, -1.0)


# ------------------------------------------------------------------- DOS

def _free_dark(length=10.0, step=0.1):
    g = make_grid(length, step)
    s = SignalRealization(g, np.zeros(g.n_points, complex), 0.0)
    return eigensolve(build_operator(s, "dark", "mal"), vectors=False)


def test_dos_of_free_operator_matches_direct_count():
    spec = _free_dark()
    est = dos_1d([spec], bins=20, edge_fraction=0.1)
    ref = np.histogram(spec.eigenvalues.real, est.bin_edges)[0]
    assert np.array_equal(est.counts, ref)
    assert np.allclose(est.density, ref / (np.diff(est.bin_edges) * spec.grid.length))
    # free walk levels are spaced pi/L, so the density is 1/pi; single bins
    # hold a whole number of levels, so only the average is exact
    assert np.mean(est.density) == pytest.approx(1 / math.pi, rel=0.02)


def test_dos_integral_equals_retained_count():
    spectra = spectra_ensemble(10, 0.1, 1.0, 6, seed=3)
    est = dos_1d(spectra, bins=25)
    lo, hi = est.bin_edges[0], est.bin_edges[-1]
    kept = np.mean([np.sum((s.eigenvalues.real >= lo) & (s.eigenvalues.real < hi)) for s in spectra])
    assert est.integral() == pytest.approx(kept, abs=1e-9)
    assert np.all(est.density >= 0)


def test_dos_shuffle_and_split_invariance():
    spectra = spectra_ensemble(10, 0.1, 1.0, 8, seed=4)
    a = dos_1d(spectra, bins=20)
    b = dos_1d(spectra[::-1], bins=20)
    assert np.allclose(a.density, b.density, rtol=1e-14)
    h1 = dos_1d(spectra[:4], bins=20)
    h2 = dos_1d(spectra[4:], bins=20)
    assert np.allclose(a.density, 0.5 * (h1.density + h2.density), rtol=1e-12)


def test_dos_empty_ensemble():
    with pytest.raises(ValidationError):
        dos_1d([])


def test_dos_doubling_realizations_consistent():
    s40 = spectra_ensemble(10, 0.1, 1.0, 40, seed=5)
    a = dos_1d(s40[:20], bins=10)
    b = dos_1d(s40, bins=10)
    z = (a.density - b.density) / np.sqrt(a.stderr ** 2 + 1e-300)
    assert np.all(np.abs(z) < 5)
    assert np.mean(b.stderr) < np.mean(a.stderr)


def test_eta_profile_even_and_integral():
    spectra = spectra_ensemble(20, 0.1, 1.0, 4, seed=6, kind="bright")
    est = eta_profile(spectra, bins=10, eta_min=0.25, eta_max=1.5)
    pos, neg = np.array(est.meta["positive"]), np.array(est.meta["negative"])
    # the walk breaks conjugation symmetry only for modes at the ends
    assert np.sum(np.abs(pos - neg)) <= 0.2 * np.sum(pos + neg)
    assert np.allclose(est.density, 0.5 * (pos + neg))
    xlo, xhi = est.meta["xi_range"]
    per_real = np.mean([np.sum((np.abs(s.eigenvalues.imag) >= 0.25) & (np.abs(s.eigenvalues.imag) < 1.5))
                        for s in spectra])
    assert est.integral() * (xhi - xlo) * 2 == pytest.approx(per_real, rel=1e-9)


def test_eta_profile_empty_range():
    spectra = spectra_ensemble(10, 0.1, 1.0, 1, seed=1, kind="bright")
    with pytest.raises(ValidationError):
        eta_profile(spectra, eta_min=50.0, eta_max=60.0)
    with pytest.raises(ValidationError):
        eta_profile(spectra, eta_min=1.0, eta_max=0.5)


def test_eta_profile_rejects_dark_spectra():
    with pytest.raises(ValidationError):
        eta_profile([_free_dark()])


# --------------------------------------------------------------- spacings

def test_spacing_equal_levels_rejected():
    levels = [np.arange(300.0)]
    h = spacing_stats(levels)
    assert h.p_value < 1e-6


def test_spacing_uniform_levels_accepted():
    # a Poisson process has exponential spacings
    rng = np.random.default_rng(11)
    levels = [rng.uniform(0, 1, 400) for _ in range(5)]
    h = spacing_stats(levels)
    assert h.p_value > 0.01
    assert h.rate > 0 and h.n_spacings == 5 * 399
    assert h.log_slope == pytest.approx(-1.0, rel=0.15)
    assert h.log_r2 > 0.95


def test_spacing_needs_100():
    with pytest.raises(ValidationError):
        spacing_stats([np.linspace(0, 1, 50)])


def test_spacing_degenerate_levels():
    with pytest.raises(ValidationError):
        spacing_stats([np.repeat(np.arange(100.0), 2)])


# -------------------------------------------------------------------- IPR

def test_ipr_uniform_and_single_site():
    g = make_grid(10, 0.1)
    n = g.n_points
    v = np.zeros(2 * n, complex)
    v[:n] = 1 / math.sqrt(g.length)
    assert ipr(v, g) == pytest.approx(1 / g.length)
    w = np.zeros(2 * n, complex)
    w[n + 7] = 1 / math.sqrt(g.step)
    assert ipr(w, g) == pytest.approx(1 / g.step)


def test_ipr_requires_normalization():
    g = make_grid(10, 0.1)
    with pytest.raises(ValidationError):
        ipr(np.ones(2 * g.n_points), g)
    with pytest.raises(ValidationError):
        ipr(np.ones(5), g)


@pytest.mark.parametrize("scheme", ["mal", "cd"])
def test_ipr_of_bound_state_matches_profile_quadrature(scheme):
    # |psi1|^2 + |psi2|^2 of the optimal pulse bound state is proportional
    # to sech(2 eta x); quadrature of the normalized profile.  The chirp
    # avoids the exact doubler degeneracy of central differences at xi = 0
    eta, xi = 1.0, 0.3
    norm = integrate.quad(lambda x: 1 / math.cosh(2 * eta * x), -40, 40)[0]
    ref = integrate.quad(lambda x: (1 / math.cosh(2 * eta * x) / norm) ** 2, -40, 40)[0]
    g = make_grid(20, 0.025)
    spec = eigensolve(build_operator(optimal_potential(xi, eta, g), "bright", scheme))
    k = int(np.argmin(np.abs(spec.eigenvalues - complex(xi, eta))))
    assert ipr(spec.eigenvectors[k], g) == pytest.approx(ref, rel=0.1)


def test_ipr_curve_from_pairs_and_window_checks():
    lam = np.linspace(-5, 5, 1001)
    val = 1 + 0.0 * lam
    val[:50] = val[-50:] = 3.0
    curve = ipr_vs_lambda([(lam, val)], window_fraction=0.05, edge_fraction=0.15)
    assert curve.middle_variation() < 1e-12
    assert curve.edge[0] and curve.edge[-1] and not curve.edge[50]
    with pytest.raises(ValidationError):
        ipr_vs_lambda([(lam, val)], window_fraction=1.5)


def test_mid_band_ipr_mean_and_error():
    pairs = [(np.linspace(-1, 1, 11), np.full(11, 2.0 + k)) for k in range(4)]
    mean, se = mid_band_ipr(pairs)
    assert mean == pytest.approx(3.5)
    assert se == pytest.approx(np.std([2, 3, 4, 5], ddof=1) / 2)


def test_linear_fit_exact_line():
    x = np.arange(5.0)
    fit = linear_fit(x, 2 * x + 1)
    assert fit.slope == pytest.approx(2) and fit.intercept == pytest.approx(1)
    assert fit.r2 == pytest.approx(1)
    with pytest.raises(ValidationError):
        linear_fit([1, 2], [1, 2])
