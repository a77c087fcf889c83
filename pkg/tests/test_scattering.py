import math

import numpy as np
import pytest
from scipy import special, stats

from randzs.errors import ValidationError
from randzs.scattering import (analytic_lnb_variance, cauchy_scale_polarized, evolve_lnb,
                               fit_cauchy, lnb_correlation, lnb_samples, prefactor_ratio,
                               robust_variance, split_halves, tail_diagnostics, variance_growth,
                               variance_ratio)
from randzs.signal import SignalRealization, make_grid, sample_signal


def _wrap(phi):
    return (phi + math.pi) % (2 * math.pi) - math.pi


def test_zero_signal_keeps_lnb_constant():
    g = make_grid(20, 0.1)
    s = SignalRealization(g, np.zeros(g.n_points, complex), 0.0)
    for z in (0.5j, 0.3 + 1j):
        tr = evolve_lnb(s, z, f0=2.0)
        assert tr.trajectory.size == round(tr.T / tr.dx)
        assert np.allclose(tr.trajectory, -math.log(2.0), atol=1e-14)
        assert tr.final == tr.trajectory[-1]


def test_routes_converge_for_smooth_signal():
    # for a smooth pulse the left-point sum approaches the exact propagation
    # at first order in dx; white noise adds a drift that does not vanish
    diffs = []
    for dx in (0.04, 0.02, 0.01):
        g = make_grid(20, dx)
        s = SignalRealization(g, (0.6 + 0.3j) * np.exp(-(g.x - 0.7) ** 2), 1.0)
        tr = evolve_lnb(s, 0.3 + 0.8j)
        assert tr.final == tr.trajectory[-1]
        d = tr.final - tr.exact
        diffs.append(abs(complex(d.real, _wrap(d.imag))))
    assert diffs[1] / diffs[0] == pytest.approx(0.5, abs=0.05)
    assert diffs[2] / diffs[1] == pytest.approx(0.5, abs=0.05)


def test_split_halves_mirror():
    g = make_grid(1.0, 0.25)
    s = SignalRealization(g, np.array([1, 2j, 3, 4j]), 1.0)
    w, wt = split_halves(s)
    assert np.allclose(w, np.conj([3, 4j]) * 0.25)
    assert np.allclose(wt, np.conj([2j, 1]) * 0.25)
    g3 = make_grid(0.75, 0.25)
    with pytest.raises(ValidationError):
        split_halves(SignalRealization(g3, np.zeros(3, complex), 1.0))


@pytest.mark.parametrize("z", [0.5j, 0.4 + 0.9j])
def test_reflection_identity(z):
    # reversing the samples exchanges the two halves; with u -> -u*(-x) and
    # f0 -> 1/f0 the roles of f and f~ swap and ln b changes sign
    s = sample_signal(make_grid(30, 0.1), 1.0, seed=3)
    r = SignalRealization(s.grid, -np.conj(s.samples[::-1]), s.D)
    for f0 in (1j, 2.0, 0.5 - 0.5j):
        a = evolve_lnb(s, z, f0)
        b = evolve_lnb(r, z, 1 / f0)
        assert b.final == pytest.approx(-a.final, abs=1e-9)
        assert b.exact.real == pytest.approx(-a.exact.real, abs=1e-9)
        assert abs(_wrap(b.exact.imag + a.exact.imag)) < 1e-9


def test_negative_imaginary_part_rejected():
    s = sample_signal(make_grid(4, 0.1), 1.0, seed=0)
    with pytest.raises(ValidationError):
        evolve_lnb(s, 1 - 0.1j)
    with pytest.raises(ValidationError):
        lnb_samples(1.0, 0.5j, 5.0, 0)


def _ensemble_re(D, z, T, runs, seed, alpha=0.0, pol="unpolarized", dx=0.1):
    g = make_grid(2 * T, dx)
    out = []
    for m in range(runs):
        s = sample_signal(g, D, pol, seed, member=m).scaled(np.exp(1j * alpha))
        out.append(evolve_lnb(s, z).final)
    return np.array(out)


def test_global_phase_leaves_distribution_unchanged():
    a = _ensemble_re(1.0, 0.5j, 20, 300, seed=1).real
    b = _ensemble_re(1.0, 0.5j, 20, 300, seed=2, alpha=1.1).real
    assert stats.ks_2samp(a, b).pvalue > 0.01
    assert abs(np.median(a) - np.median(b)) < 4 * 1.2533 * math.sqrt(robust_variance(a) / 150)


def test_mean_is_zero():
    inc, _ = lnb_samples(1.0, 0.5j, 100, 200, seed=4)
    re = inc.real
    assert abs(re.mean()) < 3 * re.std(ddof=1) / math.sqrt(re.size)


def test_samples_reproducible_and_thread_independent():
    a, ea = lnb_samples(1.0, 0.5j, 10, 70, seed=5, threads=1)
    b, eb = lnb_samples(1.0, 0.5j, 10, 70, seed=5, threads=3)
    assert np.array_equal(a, b) and np.array_equal(ea, eb)
    c, _ = lnb_samples(1.0, 0.5j, 10, 70, seed=5, stream=1)
    assert not np.allclose(a, c)


def test_variance_growth_statistics():
    bz = variance_growth(1.0, 0.5j, [25, 100], 400, seed=6)
    assert bz.meta["span_ok"] and bz.meta["tau"] == 0.1
    v = bz.variances()
    assert np.all(v > 0)
    assert v[1] / v[0] == pytest.approx(variance_ratio(25, 100, 0.1), rel=0.25)
    for s in bz.per_T:
        assert s.phase_uniformity_p > 0.01
        assert not s.flagged
    d = bz.to_dict()
    assert d["tau"] == 0.1 and len(d["per_T"]) == 2 and d["z"] == [0.0, 0.5]


def test_variance_growth_argument_checks():
    with pytest.raises(ValidationError):
        variance_growth(1.0, 0.5j, [], 10)
    with pytest.raises(ValidationError):
        variance_growth(1.0, 0.5j, [0.1], 10)


# ----------------------------------------------------------- formulas

def test_variance_formula_direct():
    eta, D, T, tau = 0.7, 1.3, 40.0, 0.1
    x = 2 * eta / D
    ref = 4 * math.sqrt(math.pi) * eta * math.exp(x) / math.sinh(x) * T * math.log(T / (2 * tau))
    assert analytic_lnb_variance(eta, D, T, tau) == pytest.approx(ref, rel=1e-14)
    # eta -> 0 limit of eta e^x / sinh x is D / 2
    assert analytic_lnb_variance(0.0, D, T, tau) == pytest.approx(
        analytic_lnb_variance(1e-9, D, T, tau), rel=1e-6)


def test_ratio_formulas():
    assert variance_ratio(50, 100, 0.1) == pytest.approx(2 * math.log(500) / math.log(250))
    r = prefactor_ratio(0.5, 1.0, 1.0)
    ref = (1.0 * math.exp(2) / math.sinh(2)) / (0.5 * math.exp(1) / math.sinh(1))
    assert r == pytest.approx(ref, rel=1e-14)
    assert analytic_lnb_variance(1.0, 1.0, 50, 0.1) / analytic_lnb_variance(0.5, 1.0, 50, 0.1) \
        == pytest.approx(r, rel=1e-12)


def test_cauchy_scale_formula():
    assert cauchy_scale_polarized(0.0, 1.0, 50, 0.1) == pytest.approx(500.0)
    eta, D = 0.6, 1.4
    g1 = cauchy_scale_polarized(eta, D, 50, 0.1)
    g2 = cauchy_scale_polarized(2 * eta, D, 50, 0.1)
    ref = (math.exp(2 * eta / D) * special.i0(eta / D)) / (math.exp(eta / D) * special.i0(2 * eta / D))
    assert g2 / g1 == pytest.approx(ref, rel=1e-12)
    assert g1 == pytest.approx(math.exp(eta / D) / special.i0(eta / D) * 500, rel=1e-12)
    with pytest.raises(ValidationError):
        cauchy_scale_polarized(0.5, 0.0, 50, 0.1)


# ------------------------------------------------------- distributions

def test_robust_variance_of_gaussian():
    x = np.random.default_rng(0).normal(0, 2.0, 20000)
    assert robust_variance(x) == pytest.approx(4.0, rel=0.05)


def test_fit_cauchy_recovers_scale():
    x = stats.cauchy.rvs(loc=1.0, scale=3.0, size=4000, random_state=1)
    loc, scale = fit_cauchy(x)
    assert loc == pytest.approx(1.0, abs=0.3) and scale == pytest.approx(3.0, rel=0.1)


def test_tail_diagnostics_separate_cauchy_from_gaussian():
    rng = np.random.default_rng(2)
    c = tail_diagnostics(stats.cauchy.rvs(size=16000, random_state=3), seed=1)
    g = tail_diagnostics(rng.standard_normal(16000), seed=1)
    assert np.all(np.diff(c["kurtosis"]) > 0) and c["kurtosis"][-1] > 100
    assert np.ptp(c["iqr"]) < 0.1 * c["iqr"].mean()
    assert np.all(np.abs(g["kurtosis"]) < 0.5)
    assert list(c["sizes"]) == [1000, 4000, 16000]


def test_polarized_median_is_zero():
    re = _ensemble_re(1.0, 0.5j, 25, 400, seed=7, pol="polarized").real
    rng = np.random.default_rng(0)
    boots = [np.median(re[rng.integers(0, re.size, re.size)]) for _ in range(300)]
    assert abs(np.median(re)) < 3 * np.std(boots)


def test_correlation_matrix_shape():
    c = lnb_correlation(1.0, [0.5j, 1j], 10, 40, seed=1)
    assert c.shape == (2, 2) and np.allclose(np.diag(c), 1)
