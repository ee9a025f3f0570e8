import numpy as np
import pytest
from conftest import mi
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from wickchaos.estimators import ChaosSchrodingerSolver, DecayFitter
from wickchaos.multiindex import TruncationPolicy, weight
from wickchaos.propagator import PropagatorConfig
from wickchaos.solver import SPDEProblem, solve_linear
from wickchaos.wick import ChaosField


@pytest.fixture
def setup(grid128, magnetic_coeffs):
    x = grid128.nodes
    perts = {mi(1): 0.3 * np.exp(-x ** 2 / 2)}
    u0 = ChaosField(TruncationPolicy(2, 2), grid128, {(): np.exp(-x ** 2 / 2)})
    return magnetic_coeffs, perts, u0


def test_params_and_clone(setup):
    coeffs, perts, _ = setup
    est = ChaosSchrodingerSolver(coeffs=coeffs, perturbations=perts, T=0.1, dt=0.01, mode="wick2", lam=0.2)
    params = est.get_params()
    assert params["lam"] == 0.2 and params["mode"] == "wick2"
    other = clone(est).set_params(lam=0.0)
    assert other.lam == 0.0 and est.lam == 0.2


def test_fit_matches_functional_solver(setup):
    coeffs, perts, u0 = setup
    est = ChaosSchrodingerSolver(coeffs=coeffs, perturbations=perts, T=0.1, dt=0.01, r=2)
    with pytest.raises(NotFittedError):
        est.predict(0.1)
    est.fit(u0)
    problem = SPDEProblem(coeffs, perts, TruncationPolicy(2, 2), 0.1, r=2)
    traj, _ = solve_linear(problem, u0, PropagatorConfig(dt=0.01))
    final = est.predict(0.1)
    for a in problem.indices():
        assert np.array_equal(final.array(a), traj.final.array(a))
    assert np.array_equal(est.expectation(0.05).values, traj.coeffs[mi()][5])
    with pytest.raises(ValueError):
        est.predict(0.055)
    assert est.verify().rows


def test_fit_input_checks(setup, grid128):
    coeffs, perts, u0 = setup
    est = ChaosSchrodingerSolver(coeffs=coeffs, perturbations=perts, T=0.1, dt=0.01, K=1, N=1)
    with pytest.raises(TypeError):
        est.fit(np.ones(128))
    outside = ChaosField(TruncationPolicy(2, 2), grid128, {(1, 1): np.ones(128)})
    with pytest.raises(ValueError):
        est.fit(outside)
    with pytest.raises(ValueError):
        ChaosSchrodingerSolver(coeffs=coeffs, T=0.1, dt=0.01, mode="semilinear").fit(u0)
    with pytest.raises(ValueError):
        ChaosSchrodingerSolver(coeffs=coeffs, T=0.1, dt=0.01, mode="cubic").fit(u0)


def test_decay_fitter():
    norms = {a: 2.0 * weight(a, 1.5) for a in TruncationPolicy(2, 3).enumerate()}
    fit = DecayFitter().fit(norms)
    assert fit.p_fit_ == pytest.approx(1.5, abs=1e-10)
    assert fit.K_fit_ == pytest.approx(2.0, rel=1e-10)
    assert fit.predict(["(1)", mi(0, 1)]) == pytest.approx([2.0 * 2 ** 1.5, 2.0 * 4 ** 1.5], rel=1e-10)
    with pytest.raises(ValueError):
        DecayFitter().fit({mi(1): -1.0})
    with pytest.raises(NotFittedError):
        DecayFitter().predict([mi()])


def test_decay_fitter_on_field(grid128):
    pol = TruncationPolicy(1, 2)
    c = 1.0 / np.sqrt(20.0)
    F = ChaosField(pol, grid128, {(): np.full(128, c), (1,): np.full(128, 2 * c), (2,): np.full(128, 4 * c)})
    fit = DecayFitter().fit(F)
    assert fit.p_fit_ == pytest.approx(1.0, abs=1e-10)
    assert fit.K_fit_ == pytest.approx(1.0, rel=1e-10)
