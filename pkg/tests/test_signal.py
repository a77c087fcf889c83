import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randzs.errors import ValidationError
from randzs.signal import (Polarization, SignalRealization, make_grid, make_rng,
                           optimal_potential, read_signal, sample_signal, write_signal)


def test_grid_is_centered_and_tiles_interval():
    g = make_grid(20, 0.1)
    assert g.n_points == 200
    assert g.x[0] == pytest.approx(-10.0)
    assert np.allclose(np.diff(g.x), 0.1)
    assert g.n_points * g.step == pytest.approx(20.0, rel=1e-15)


@pytest.mark.parametrize("length,step", [(20, -0.1), (20, 0.0), (0.1, 0.1), (float("nan"), 0.1),
                                         ("abc", 0.1)])
def test_grid_rejects_bad_input(length, step):
    with pytest.raises(ValidationError):
        make_grid(length, step)


def test_zero_power_signal_is_zero():
    s = sample_signal(make_grid(20, 0.1), 0.0, "unpolarized", seed=3)
    assert np.all(s.samples == 0)


def test_negative_power_rejected(small_grid):
    with pytest.raises(ValidationError):
        sample_signal(small_grid, -1.0)


def test_unknown_polarization_rejected(small_grid):
    with pytest.raises(ValidationError):
        sample_signal(small_grid, 1.0, "circular")


def test_same_seed_is_bit_identical(small_grid):
    a = sample_signal(small_grid, 1.0, seed=42)
    b = sample_signal(small_grid, 1.0, seed=42)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_members_are_distinct_streams(small_grid):
    a = sample_signal(small_grid, 1.0, seed=42, member=0)
    b = sample_signal(small_grid, 1.0, seed=42, member=1)
    assert not np.allclose(a.samples, b.samples)


def test_ensemble_mean_power_matches_D():
    # sample-mean oracle: mean |u|^2 dx over 100 realizations, 3 sigma
    g = make_grid(100, 0.1)
    p = np.array([np.mean(np.abs(sample_signal(g, 1.0, seed=7, member=m).samples) ** 2)
                  for m in range(100)]) * g.step
    se = np.std(p, ddof=1) / math.sqrt(p.size)
    assert abs(p.mean() - 1.0) < 3 * se


def test_unpolarized_second_moments():
    g = make_grid(200, 0.1)
    u = np.concatenate([sample_signal(g, 2.0, seed=1, member=m).samples for m in range(10)])
    n = u.size
    var = 2.0 / g.step
    # <u u*> = D/dx, <u u> = 0, and <u_k u_{k+1}*> = 0 within 5 standard errors
    assert abs(np.mean(np.abs(u) ** 2) / var - 1) < 5 * math.sqrt(1 / n)
    assert abs(np.mean(u * u)) / var < 5 / math.sqrt(n)
    assert abs(np.mean(u[:-1] * np.conj(u[1:]))) / var < 5 / math.sqrt(n)
    assert np.var(u.real) == pytest.approx(np.var(u.imag), rel=0.05)


def test_polarized_samples_are_real_with_full_variance():
    g = make_grid(400, 0.1)
    u = sample_signal(g, 1.0, Polarization.POLARIZED, seed=2).samples
    assert np.all(u.imag == 0)
    assert np.var(u.real) * g.step == pytest.approx(1.0, rel=0.1)


@settings(max_examples=25, deadline=None)
@given(c=st.complex_numbers(min_magnitude=0.01, max_magnitude=100, allow_nan=False,
                            allow_infinity=False),
       seed=st.integers(0, 2 ** 32))
def test_rescaling_multiplies_power(c, seed):
    s = sample_signal(make_grid(10, 0.1), 1.0, seed=seed)
    assert s.scaled(c).power() == pytest.approx(abs(c) ** 2 * s.power(), rel=1e-12)


def test_rng_streams_reproducible():
    a = make_rng(5, 1, 2).standard_normal(4)
    b = make_rng(5, 1, 2).standard_normal(4)
    c = make_rng(5, 1, 3).standard_normal(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_optimal_potential_center_value():
    g = make_grid(20, 0.1)
    u = optimal_potential(0, 1, g)
    k = int(np.argmin(np.abs(g.x)))
    assert g.x[k] == pytest.approx(0.0, abs=1e-12)
    assert u.samples[k] == pytest.approx(2j, abs=1e-12)


def test_optimal_potential_matches_exponential_form():
    # independent evaluation with exponentials instead of sech
    g = make_grid(24, 0.05)
    eta, xi = 0.7, 0.4
    x = g.x
    ref = (4j * eta * (np.exp(2 * eta * x) + np.exp(-2 * eta * x))
           / (np.exp(4 * eta * x) + np.exp(-4 * eta * x) + 2) * np.exp(-2j * xi * x))
    assert np.allclose(optimal_potential(xi, eta, g).samples, ref, rtol=1e-12, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(xi=st.floats(-2, 2), eta=st.floats(0.4, 2))
def test_optimal_potential_symmetry_and_chirp(xi, eta):
    g = make_grid(40, 0.1)
    # the grid is centered, so x_k and x_{n-k} are mirror images
    u = optimal_potential(xi, eta, g).samples
    a = np.abs(u)
    assert np.allclose(a[1:], a[1:][::-1], rtol=1e-10)
    u0 = optimal_potential(0.0, eta, g).samples
    assert np.allclose(u, u0 * np.exp(-2j * xi * g.x), rtol=1e-12, atol=1e-15)


def test_optimal_potential_decay_rate():
    g = make_grid(20, 0.01)
    u = optimal_potential(0, 1, g).samples
    sel = (g.x >= 2) & (g.x <= 4)
    slope = np.polyfit(g.x[sel], np.log(np.abs(u[sel])), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.05)
    k = int(np.argmin(np.abs(g.x - 3)))
    assert abs(u[k]) == pytest.approx(4 * math.exp(-6), rel=0.01)


def test_optimal_potential_action():
    # (1/2) int |2 eta sech(2 eta x)|^2 dx = 2 eta
    g = make_grid(30, 0.01)
    assert optimal_potential(0.3, 0.8, g).D == pytest.approx(1.6, rel=1e-6)


@pytest.mark.parametrize("eta", [0.0, -1.0])
def test_optimal_potential_rejects_nonpositive_eta(eta):
    with pytest.raises(ValidationError):
        optimal_potential(0, eta, make_grid(20, 0.1))


def test_optimal_potential_needs_long_grid():
    with pytest.raises(ValidationError):
        optimal_potential(0, 0.1, make_grid(20, 0.1))


def test_signal_file_round_trip(tmp_path):
    s = sample_signal(make_grid(12, 0.1), 1.3, "polarized", seed=9)
    p = tmp_path / "sig.txt"
    write_signal(p, s)
    head = p.read_text().splitlines()[0]
    assert head.startswith("# L=") and "pol=polarized" in head and "seed=9" in head
    r = read_signal(p)
    assert np.array_equal(r.samples, s.samples)
    assert r.grid.n_points == s.grid.n_points and r.D == s.D
    assert r.polarization is Polarization.POLARIZED


def test_signal_file_without_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 1 2\n")
    with pytest.raises(ValidationError):
        read_signal(p)


def test_realization_length_checked(small_grid):
    with pytest.raises(ValidationError):
        SignalRealization(small_grid, np.zeros(3, complex), 1.0)
