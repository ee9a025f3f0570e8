import math

import numpy as np
import pytest

from wickchaos.exceptions import EllipticityError, GridMismatchError, SolverConvergenceError
from wickchaos.field import Grid1D, GridFunction, l2_norm
from wickchaos.propagator import (CNStepper, CoefficientSet, ConvergenceScenario, Hamiltonian,
                                  PropagatorConfig, build_hamiltonian, dense_propagate, evolve,
                                  fit_growth, num_steps, step, step_convergence_order)


def plane_wave(grid, n):
    kappa = 2 * np.pi * n / (2 * grid.half_width)
    return kappa, np.exp(1j * kappa * grid.nodes)


def test_coefficient_validation(grid128):
    one = grid128.function(1.0)
    zero = grid128.function(0.0)
    with pytest.raises(EllipticityError):
        CoefficientSet(grid128.function(0.05), zero, zero)
    with pytest.raises(EllipticityError):
        CoefficientSet(grid128.function(-1.0), zero, zero, ellipticity=100)
    with pytest.raises(ValueError):
        CoefficientSet(one, grid128.function(1j), zero)
    with pytest.raises(GridMismatchError):
        CoefficientSet(one, Grid1D(10.0, 64).function(0.0), zero)
    c = CoefficientSet(one, zero, grid128.function(0.5j))
    assert not c.potential_is_real()


@pytest.mark.parametrize("scheme", ["spectral", "fd2"])
def test_free_symbol_on_plane_wave(grid128, scheme):
    H = build_hamiltonian(CoefficientSet.free(grid128), scheme=scheme)
    h = grid128.spacing
    for n in (1, 5, 17):
        kappa, w = plane_wave(grid128, n)
        symbol = -kappa ** 2 / 2 if scheme == "spectral" else -(1 - np.cos(kappa * h)) / h ** 2
        assert np.allclose(H(w), symbol * w, atol=1e-10)


def test_constant_potential(grid128):
    x = grid128.nodes
    c = 0.75
    coeffs = CoefficientSet(grid128.function(1.0), grid128.function(0.0), grid128.function(c))
    H = build_hamiltonian(coeffs)
    u = np.exp(-x ** 2 / 2)
    expected = 0.5 * (x ** 2 - 1) * u + c * u
    assert np.max(np.abs(H(u) - expected)) < 1e-10


@pytest.mark.parametrize("scheme", ["spectral", "fd2"])
def test_hermitian(magnetic_coeffs, rng, scheme):
    H = build_hamiltonian(magnetic_coeffs, scheme=scheme)
    assert H.hermitian and H.magnetic
    m = H.grid.points
    u = rng.normal(size=m) + 1j * rng.normal(size=m)
    w = rng.normal(size=m) + 1j * rng.normal(size=m)
    lhs = np.vdot(H(u), w)
    rhs = np.vdot(u, H(w))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_fd2_sparse_matches_apply(magnetic_coeffs, rng):
    H = build_hamiltonian(magnetic_coeffs, scheme="fd2")
    u = rng.normal(size=H.grid.points) + 0j
    assert np.allclose(H.to_sparse() @ u, H(u), atol=1e-12)


def test_zero_magnetic_takes_plain_path(grid128):
    x = grid128.nodes
    a = grid128.function(1 + 0.3 * np.exp(-x ** 2 / 4))
    v = grid128.function(-np.exp(-x ** 2 / 4))
    with_b = build_hamiltonian(CoefficientSet(a, grid128.function(0.0), v))
    assert not with_b.magnetic
    plain = Hamiltonian(grid128, a.real, np.zeros(128), v.values)
    u = np.exp(-x ** 2 / 2) + 0j
    assert np.array_equal(with_b(u), plain(u))


def test_step_trivial_cases(grid128, magnetic_coeffs):
    x = grid128.nodes
    u = grid128.function(np.exp(-x ** 2))
    cfg = PropagatorConfig(dt=0.01)
    assert np.array_equal(step(u, Hamiltonian.zero(grid128), None, cfg).values, u.values)
    H = build_hamiltonian(magnetic_coeffs)
    out = step(u, H, None, cfg)
    assert abs(l2_norm(out) - l2_norm(u)) <= 10 * cfg.linear_solver_tol * l2_norm(u)
    with pytest.raises(GridMismatchError):
        step(u, H, Grid1D(10.0, 64).zeros(), cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        PropagatorConfig(dt=0.0)
    with pytest.raises(ValueError):
        PropagatorConfig(dt=0.1, theta=1.0)
    assert num_steps(1.0, 0.1) == 10
    with pytest.raises(ValueError):
        num_steps(1.0, 0.3)


def test_solver_nonconvergence(magnetic_coeffs):
    H = build_hamiltonian(magnetic_coeffs)
    stepper = CNStepper(H, PropagatorConfig(dt=0.5, linear_solver_tol=1e-15, max_solver_iters=1))
    x = H.grid.nodes
    with pytest.raises(SolverConvergenceError):
        stepper.advance(np.exp(-x ** 2) * (1 + x))


def test_evolve_zero_horizon(grid128):
    u = grid128.function(np.exp(-grid128.nodes ** 2))
    traj = evolve(u, Hamiltonian.zero(grid128), None, 0.0, PropagatorConfig(dt=0.1))
    assert len(traj) == 1 and np.array_equal(traj.final.values, u.values)


def test_constant_source_zero_hamiltonian(grid128):
    x = grid128.nodes
    u0 = grid128.function(np.exp(-x ** 2))
    w = 0.3 * np.cos(x) + 0.1j
    cfg = PropagatorConfig(dt=0.05)
    n = num_steps(1.0, cfg.dt)
    traj = evolve(u0, Hamiltonian.zero(grid128), [w] * n, 1.0, cfg)
    for t, vals in zip(traj.times, traj.values):
        assert np.max(np.abs(vals - (u0.values - 1j * t * w))) < 1e-10


def test_unitarity_many_steps(magnetic_coeffs):
    H = build_hamiltonian(magnetic_coeffs)
    x = H.grid.nodes
    cfg = PropagatorConfig(dt=1e-3)
    traj = evolve(H.grid.function(np.exp(-(x - 1) ** 2)), H, None, 1.0, cfg)
    hist = traj.l2_history()
    steps = np.abs(np.diff(hist)) / hist[:-1]
    assert np.max(steps) <= 10 * cfg.linear_solver_tol
    assert np.max(np.abs(hist - hist[0])) / hist[0] <= 1e-8


def test_complex_potential_grows_or_decays(grid128):
    x = grid128.nodes
    coeffs = CoefficientSet(grid128.function(1.0), grid128.function(0.0),
                            grid128.function(-0.2j * np.exp(-x ** 2)))
    H = build_hamiltonian(coeffs)
    assert not H.hermitian
    hist = evolve(grid128.function(np.exp(-x ** 2 / 2)), H, None, 1.0,
                  PropagatorConfig(dt=0.01)).l2_history()
    assert hist[-1] < hist[0]


def test_dense_reference_order(grid128, magnetic_coeffs):
    H = build_hamiltonian(magnetic_coeffs)
    x = grid128.nodes
    u0 = grid128.function(np.exp(-(x - 0.5) ** 2))
    scen = ConvergenceScenario(u0, H, 0.5)
    order, errs = step_convergence_order(scen, 0.05, return_errors=True)
    assert 1.8 <= order <= 2.2
    assert errs[0] > errs[1] > errs[2]


def test_order_skipped_for_zero_hamiltonian(grid128):
    u0 = grid128.function(np.exp(-grid128.nodes ** 2))
    scen = ConvergenceScenario(u0, Hamiltonian.zero(grid128), 0.5)
    assert math.isnan(step_convergence_order(scen, 0.05))


def test_dense_propagate_non_hermitian_uses_expm(grid128):
    x = grid128.nodes
    H = Hamiltonian(grid128, np.ones(128), np.zeros(128), -0.1j * np.ones(128))
    u0 = np.exp(-x ** 2) + 0j
    out = dense_propagate(H, u0, 1.0)
    assert np.linalg.norm(out) == pytest.approx(np.exp(-0.1) * np.linalg.norm(u0), rel=1e-10)


def test_fit_growth():
    t = np.linspace(0, 1, 21)
    fit = fit_growth(t, 2.0 * np.exp(0.3 * t))
    assert fit.w == pytest.approx(0.3, abs=1e-12)
    assert fit.residual < 1e-12
    assert fit.C == pytest.approx(0.3, rel=1e-9)
    flat = fit_growth(t, np.ones_like(t))
    assert flat.w == 0 and flat.m == 1


def test_exponential_bound_fit(magnetic_coeffs):
    H = build_hamiltonian(magnetic_coeffs)
    x = H.grid.nodes
    traj = evolve(H.grid.function(np.exp(-(x - 1) ** 2 / 2)), H, None, 1.0,
                  PropagatorConfig(dt=0.01), z=1)
    norms = traj.hzz_history()
    fit = fit_growth(traj.times, norms)
    assert fit.residual < 0.05
    assert np.all(norms <= np.exp(fit.C * traj.times) * norms[0] * (1 + 1e-12))
    assert np.all(norms <= fit.m * np.exp(fit.w * traj.times) * norms[0] * (1 + 1e-12))


def test_trajectory_write(tmp_path, grid128):
    u = grid128.function(np.exp(-grid128.nodes ** 2))
    traj = evolve(u, build_hamiltonian(CoefficientSet.free(grid128)), None, 0.1,
                  PropagatorConfig(dt=0.05))
    traj.write(tmp_path)
    lines = (tmp_path / "manifest.csv").read_text().splitlines()
    assert lines[0] == "t,l2_norm,hzz_norm,boundary_mass,file"
    assert len(lines) == 4
    assert (tmp_path / "snap_00002.csv").exists()
