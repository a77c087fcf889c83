import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randzs.errors import ConfigurationError, NumericalError, ValidationError
from randzs.operators import (Kind, Scheme, ZsSpectrum, build_operator, coins,
                              discrete_mode_filter, eigensolve, hermiticity_residual,
                              trace_residual, write_spectrum)
from randzs.signal import SignalRealization, make_grid, optimal_potential, sample_signal


def _zero(length=4.0, step=0.1):
    g = make_grid(length, step)
    return SignalRealization(g, np.zeros(g.n_points, complex), 0.0)


def test_unsupported_kind_and_scheme():
    s = _zero()
    with pytest.raises(ConfigurationError):
        build_operator(s, "grey", "mal")
    with pytest.raises(ConfigurationError):
        build_operator(s, "dark", "spectral")


def test_operator_needs_four_points():
    g = make_grid(0.3, 0.1)
    with pytest.raises(ValidationError):
        build_operator(SignalRealization(g, np.zeros(3, complex), 0.0))


def test_nonfinite_signal_rejected():
    g = make_grid(2.0, 0.1)
    u = np.zeros(g.n_points, complex)
    u[3] = np.nan
    with pytest.raises(ValidationError):
        build_operator(SignalRealization(g, u, 1.0))


def test_free_central_difference_spectrum_is_symmetric():
    op = build_operator(_zero(), "dark", "cd")
    z = np.sort(eigensolve(op).eigenvalues.real)
    assert np.allclose(z, -z[::-1], atol=1e-10)


def test_free_walk_spectrum_matches_roots_of_unity():
    # with u = 0 the walk is a permutation forming one cycle of length 2n,
    # so its eigenvalues are the 2n-th roots of unity
    s = _zero(3.0, 0.1)
    n = s.grid.n_points
    spec = eigensolve(build_operator(s, "dark", "mal"))
    ref = np.linalg.eigvals(build_operator(s, "dark", "mal").matrix)
    assert np.allclose(np.sort(np.angle(ref)), np.sort(-spec.eigenvalues.real * s.grid.step),
                       atol=1e-9)
    roots = np.sort(np.angle(np.exp(2j * np.pi * np.arange(2 * n) / (2 * n))))
    assert np.allclose(np.sort(np.angle(ref)), roots, atol=1e-9)


def test_dark_central_difference_is_hermitian():
    s = sample_signal(make_grid(10, 0.1), 1.0, seed=1)
    op = build_operator(s, "dark", "cd")
    M = op.matrix
    assert np.linalg.norm(M - M.conj().T) <= 1e-12 * np.linalg.norm(M)


def test_dark_walk_generator_is_hermitian_and_spectrum_real():
    s = sample_signal(make_grid(20, 0.1), 1.0, seed=2)
    op = build_operator(s, "dark", "mal")
    assert hermiticity_residual(op) < 1e-12
    W = op.matrix
    assert np.allclose(W @ W.conj().T, np.eye(W.shape[0]), atol=1e-12)
    spec = eigensolve(op)
    radius = np.max(np.abs(spec.eigenvalues))
    assert np.all(np.abs(spec.eigenvalues.imag) < 1e-8 * radius)
    assert len(spec) == 2 * s.grid.n_points == spec.eigenvectors.shape[0]


def test_bright_central_difference_is_non_normal():
    s = sample_signal(make_grid(10, 0.1), 1.0, seed=3)
    U = build_operator(s, "bright", "cd").matrix
    assert np.linalg.norm(U @ U.conj().T - U.conj().T @ U) > 1e-3


def test_coins_are_exponentials_of_coupling():
    from scipy.linalg import expm

    u = np.array([0.3 + 0.4j, -1.2j, 0.0])
    dx = 0.1
    for sign in (+1, -1):
        C = coins(u, dx, sign)
        for k, uk in enumerate(u):
            V = np.array([[0, uk], [sign * np.conj(uk), 0]])
            assert np.allclose(C[k], expm(-1j * dx * V), atol=1e-14)


@pytest.mark.parametrize("scheme", ["mal", "cd"])
def test_eigenpair_residual_and_normalization(scheme):
    s = sample_signal(make_grid(8, 0.1), 1.0, seed=4)
    op = build_operator(s, "bright", scheme)
    spec = eigensolve(op)
    V = spec.eigenvectors.T
    lam = spec.propagator_eigenvalues if op.is_propagator else spec.eigenvalues
    res = np.linalg.norm(op.matrix @ V - V * lam[None, :], axis=0) / np.linalg.norm(V, axis=0)
    assert np.max(res) < 1e-8 * max(1, np.max(np.abs(lam)))
    assert np.allclose(np.sum(np.abs(spec.eigenvectors) ** 2, axis=1) * s.grid.step, 1.0)
    assert np.all(np.diff(spec.eigenvalues.real) >= 0)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10 ** 6), D=st.floats(0.2, 3.0))
def test_central_difference_spectrum_closed_under_conjugation(seed, D):
    s = sample_signal(make_grid(6, 0.1), D, seed=seed)
    z = eigensolve(build_operator(s, "bright", "cd"), vectors=False).eigenvalues
    for zi in z[z.imag > 1e-8]:
        assert np.min(np.abs(z - np.conj(zi))) < 1e-8


def test_walk_bulk_modes_closed_under_conjugation():
    # the reflecting ends of the walk break the symmetry; modes with no
    # weight near the ends keep it to exponential accuracy
    s = sample_signal(make_grid(40, 0.1), 1.0, seed=0)
    spec = eigensolve(build_operator(s, "bright", "mal"))
    n = s.grid.n_points
    rho = np.abs(spec.psi1) ** 2 + np.abs(spec.psi2) ** 2
    edge = np.sum(rho[:, : n // 5] + rho[:, -n // 5:], axis=1) * s.grid.step
    z = spec.eigenvalues
    bulk = (z.imag > 1e-3) & (edge < 1e-6)
    assert bulk.sum() >= 5
    for zi in z[bulk]:
        assert np.min(np.abs(z - np.conj(zi))) < 1e-8


@pytest.mark.parametrize("kind,scheme", [("dark", "mal"), ("bright", "mal"), ("bright", "cd"),
                                         ("dark", "cd")])
def test_trace_consistency(kind, scheme):
    s = sample_signal(make_grid(8, 0.1), 1.0, seed=5)
    op = build_operator(s, kind, scheme)
    assert trace_residual(op, eigensolve(op, vectors=False)) < 1e-8


def test_free_bright_spectrum_is_real():
    z = eigensolve(build_operator(_zero(), "bright", "mal"), vectors=False).eigenvalues
    assert np.all(np.abs(z.imag) < 1e-8)


@pytest.mark.parametrize("scheme", ["mal", "cd"])
@pytest.mark.parametrize("xi,eta", [(0.0, 0.5), (0.5, 1.0), (1.0, 0.8)])
def test_optimal_potential_bound_state(scheme, xi, eta):
    g = make_grid(30, 0.05)
    z = eigensolve(build_operator(optimal_potential(xi, eta, g), "bright", scheme),
                   vectors=False).eigenvalues
    assert np.min(np.abs(z - complex(xi, eta))) < 5 * g.step


def test_grid_refinement_moves_bound_state_by_order_dx():
    errs = []
    for dx in (0.1, 0.05, 0.025):
        g = make_grid(16, dx)
        z = eigensolve(build_operator(optimal_potential(0.5, 1.0, g), "bright", "mal"),
                       vectors=False).eigenvalues
        errs.append(np.min(np.abs(z - (0.5 + 1j))))
    assert errs[1] <= errs[0] and errs[2] <= errs[1]
    assert errs[0] < 0.1


def test_dark_solver_falls_back_near_minus_one():
    # a black soliton has a bound state at the band center; make sure every
    # eigenpair still passes the residual check
    g = make_grid(20, 0.05)
    s = SignalRealization(g, np.tanh(g.x) + 0j, 1.0)
    op = build_operator(s, "dark", "mal")
    spec = eigensolve(op)
    V = spec.eigenvectors.T
    res = np.linalg.norm(op.matrix @ V - V * spec.propagator_eigenvalues[None, :], axis=0)
    assert np.max(res / np.linalg.norm(V, axis=0)) < 1e-8
    assert np.min(np.abs(spec.eigenvalues)) < 1e-6


def test_eigensolve_rejects_nonfinite_matrix():
    op = build_operator(_zero(), "bright", "cd")
    op.matrix[0, 0] = np.inf
    with pytest.raises(NumericalError):
        eigensolve(op)


def _synthetic(z):
    z = np.asarray(z, dtype=complex)
    g = make_grid(1.0, 0.25)
    return ZsSpectrum(z, None, np.ones(z.size), Kind.NON_HERMITIAN_BRIGHT,
                      Scheme.CENTRAL_DIFFERENCE, g)


def test_mode_filter_keeps_upper_representative():
    out = discrete_mode_filter(_synthetic([1 + 0.5j, 1 - 0.5j, 2 + 0.05j]), 0.1)
    assert list(out.eigenvalues) == [1 + 0.5j]


def test_mode_filter_xi_window():
    out = discrete_mode_filter(_synthetic([1 + 0.5j, 30 + 0.5j]), 0.1, xi_window=10)
    assert list(out.eigenvalues) == [1 + 0.5j]


def test_mode_filter_on_free_spectrum_is_empty():
    spec = eigensolve(build_operator(_zero(), "bright", "mal"))
    assert len(discrete_mode_filter(spec, 0.05)) == 0


def test_mode_filter_requires_positive_threshold():
    with pytest.raises(ValidationError):
        discrete_mode_filter(_synthetic([1j]), 0.0)


def test_bilinear_normalization():
    g = make_grid(16, 0.05)
    spec = eigensolve(build_operator(optimal_potential(0.2, 0.9, g), "bright", "mal"))
    spec = discrete_mode_filter(spec, 0.5, xi_window=math.pi / (2 * g.step))
    p1, p2 = spec.bilinear_normalized()
    assert np.allclose(np.sum(p1 * p2, axis=1) * g.step, 1.0)


def test_write_spectrum(tmp_path):
    s = sample_signal(make_grid(4, 0.1), 1.0, seed=8, member=2)
    spec = eigensolve(build_operator(s, "dark", "mal"), vectors=False)
    csv, side = write_spectrum(tmp_path / "spec.csv", spec, {"note": "x"})
    lines = csv.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    assert any(ln.startswith("# seed=") for ln in header)
    assert lines[len(header)] == "re,im,norm"
    data = np.loadtxt(csv, delimiter=",", comments="#", skiprows=len(header) + 1)
    assert np.allclose(data[:, 0], spec.eigenvalues.real, rtol=0, atol=0)
    meta = json.loads(side.read_text())
    assert meta["member"] == 2 and meta["note"] == "x" and meta["grid"]["n"] == 40
