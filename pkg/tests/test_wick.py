import math

import numpy as np
import pytest
from conftest import mi

from wickchaos.exceptions import DegenerateFitError, GridMismatchError, PolicyViolationError
from wickchaos.field import Grid1D, hzz_norm
from wickchaos.multiindex import MultiIndex, TruncationPolicy, enumerate_indices, weight
from wickchaos.wick import (ChaosField, expectation, fit_decay, fit_decay_values, kondratiev_norm,
                            read_chaos_field, variance, variance_is_formal, wick_product,
                            wick_square, write_chaos_field)


@pytest.fixture
def grid():
    return Grid1D(5.0, 16)


@pytest.fixture
def policy():
    return TruncationPolicy(2, 3)


def random_field(rng, policy, grid, max_order=None):
    coeffs = {}
    for a in enumerate_indices(policy):
        if max_order is None or a.order <= max_order:
            coeffs[a] = rng.normal(size=grid.points) + 1j * rng.normal(size=grid.points)
    return ChaosField(policy, grid, coeffs)


def assert_fields_close(F, G, tol):
    for a in F.indices():
        assert np.max(np.abs(F.array(a) - G.array(a)), initial=0.0) <= tol


def test_construction_checks(grid, policy):
    with pytest.raises(PolicyViolationError):
        ChaosField(policy, grid, {mi(0, 0, 1): np.ones(16)})
    with pytest.raises(PolicyViolationError):
        ChaosField(policy, grid, {mi(4): np.ones(16)})
    with pytest.raises(GridMismatchError):
        ChaosField(policy, grid, {mi(): Grid1D(5.0, 32).function(1.0)})
    F = ChaosField(policy, grid, {"(1,0)": np.ones(16)})
    assert mi(1) in F and len(F) == 1
    assert not np.any(F.array(mi(0, 1)))
    with pytest.raises(PolicyViolationError):
        F[mi(0, 0, 1)]


def test_storage_is_graded(grid, policy):
    F = ChaosField(policy, grid, {mi(0, 2): np.ones(16), mi(): np.ones(16), mi(1): np.ones(16)})
    assert list(F.keys()) == [mi(), mi(1), mi(0, 2)]


def test_unit_law(grid, policy, rng):
    G = random_field(rng, policy, grid)
    c = 2.5 - 1j
    one = ChaosField(policy, grid, {mi(): c * np.ones(16)})
    assert_fields_close(wick_product(one, G), c * G, 1e-14)
    assert_fields_close(wick_product(G, one), c * G, 1e-14)


def test_product_of_units(grid, policy):
    F = ChaosField(policy, grid, {mi(1): np.ones(16)})
    G = ChaosField(policy, grid, {mi(0, 1): np.ones(16)})
    P = wick_product(F, G)
    assert list(P.keys()) == [mi(1, 1)]
    assert np.all(P.array(mi(1, 1)) == 1)
    assert P.clipped_mass == 0


def test_expectation_multiplies(grid, policy, rng):
    F = random_field(rng, policy, grid)
    G = random_field(rng, policy, grid)
    e = expectation(wick_product(F, G)).values
    assert np.max(np.abs(e - F.array(mi()) * G.array(mi()))) <= 1e-14
    assert not np.any(expectation(ChaosField(policy, grid, {mi(1): np.ones(16)})).values)
    g = rng.normal(size=16)
    assert np.array_equal(expectation(ChaosField(policy, grid, {mi(): g})).values, g)


def test_commutative_and_bilinear(grid, policy, rng):
    F, G, W = (random_field(rng, policy, grid) for _ in range(3))
    assert_fields_close(wick_product(F, G), wick_product(G, F), 1e-13)
    a, b = 0.7, -1.3j
    lhs = wick_product(a * F + b * W, G)
    rhs = a * wick_product(F, G) + b * wick_product(W, G)
    assert_fields_close(lhs, rhs, 1e-12)


def test_associative_on_low_degree(grid, policy, rng):
    F, G, W = (random_field(rng, policy, grid, max_order=1) for _ in range(3))
    lhs = wick_product(wick_product(F, G), W)
    rhs = wick_product(F, wick_product(G, W))
    assert_fields_close(lhs, rhs, 1e-13)


def test_square_examples(grid, policy, rng):
    F = ChaosField(policy, grid, {mi(1): np.ones(16)})
    S = wick_square(F)
    assert [a for a, g in S.items() if np.any(g.values)] == [mi(2)]
    assert np.all(S.array(mi(2)) == 1)
    f = rng.normal(size=16)
    D = wick_square(ChaosField(policy, grid, {mi(): f}))
    assert list(D.keys()) == [mi()] and np.array_equal(D.array(mi()), f * f)
    E = wick_square(ChaosField(policy, grid, {mi(1): np.ones(16), mi(0, 1): np.ones(16)}))
    assert E.array(mi(2)).tolist() == [1.0] * 16
    assert E.array(mi(1, 1)).tolist() == [2.0] * 16
    assert E.array(mi(0, 2)).tolist() == [1.0] * 16
    assert [a for a, g in E.items() if np.any(g.values)] == [mi(2), mi(1, 1), mi(0, 2)]


def test_square_matches_product(grid, policy, rng):
    F = random_field(rng, policy, grid)
    S, P = wick_square(F), wick_product(F, F)
    assert_fields_close(S, P, 1e-14)
    assert S.clipped_mass == pytest.approx(P.clipped_mass, rel=1e-14)


def test_clipped_mass(grid):
    policy = TruncationPolicy(1, 1)
    F = ChaosField(policy, grid, {mi(1): np.full(16, 2.0)})
    P = wick_product(F, F, z=0)
    assert len(P) == 0
    assert P.clipped_mass == pytest.approx(hzz_norm(grid.function(4.0), 0, 0.0), rel=1e-14)


def test_variance(grid, policy, rng):
    g = rng.normal(size=16) + 1j * rng.normal(size=16)
    assert not np.any(variance(ChaosField(policy, grid, {mi(): g})).values)
    assert np.allclose(variance(ChaosField(policy, grid, {mi(1): g})).values, np.abs(g) ** 2, rtol=1e-15)
    assert np.allclose(variance(ChaosField(policy, grid, {mi(2): g})).values, 2 * np.abs(g) ** 2,
                       rtol=1e-15)


def test_variance_monotone_in_order(grid, rng):
    big = TruncationPolicy(2, 4)
    full = random_field(rng, big, grid)
    prev = np.zeros(16)
    for n in range(5):
        part = ChaosField(big, grid, {a: g for a, g in full.items() if a.order <= n})
        cur = variance(part).values
        assert np.all(cur >= prev) and np.all(cur >= 0)
        prev = cur


def test_kondratiev_norm(grid, policy):
    unit = grid.function(1.0 / math.sqrt(2 * grid.half_width))
    F = ChaosField(policy, grid, {mi(): unit, mi(1): unit})
    assert kondratiev_norm(F, 2) == pytest.approx(math.sqrt(1 + 1 / 4), rel=1e-14)
    D = ChaosField(policy, grid, {mi(): np.exp(-grid.nodes ** 2)})
    for p in (0, 1, 5):
        assert kondratiev_norm(D, p, 1, 0.5) == pytest.approx(hzz_norm(D[mi()], 1, 0.5), rel=1e-15)
    vals = [kondratiev_norm(F, p) for p in np.linspace(0, 6, 13)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_fit_decay_exact(grid, policy):
    p = 1.5
    unit = 1.0 / math.sqrt(2 * grid.half_width)
    F = ChaosField(policy, grid, {a: np.full(16, unit * weight(a, p)) for a in enumerate_indices(policy)})
    fit = fit_decay(F)
    assert fit.p_fit == pytest.approx(p, abs=1e-10)
    assert fit.K_fit == pytest.approx(1.0, abs=1e-10)
    scaled = fit_decay(3.0 * F)
    assert scaled.K_fit == pytest.approx(3 * fit.K_fit, rel=1e-10)
    assert scaled.p_fit == pytest.approx(fit.p_fit, abs=1e-10)


def test_fit_decay_two_points():
    fit = fit_decay_values({mi(): 2.0, mi(1): 8.0})
    assert fit.p_fit == pytest.approx(math.log(4) / math.log(2), rel=1e-12)
    assert fit.K_fit == pytest.approx(2.0, rel=1e-12)
    assert fit.bound(mi(1)) == pytest.approx(8.0, rel=1e-12)


def test_fit_decay_majorizes(rng):
    norms = {a: float(rng.uniform(0.1, 5)) for a in enumerate_indices(TruncationPolicy(3, 3))}
    fit = fit_decay_values(norms)
    assert fit.p_fit >= 0
    for a, v in norms.items():
        assert v <= fit.bound(a) * (1 + 1e-12)


def test_fit_decay_degenerate(grid, policy):
    with pytest.raises(DegenerateFitError):
        fit_decay_values({mi(): 1.0})
    with pytest.raises(DegenerateFitError):
        fit_decay_values({mi(2): 1.0, mi(0, 1): 2.0, mi(): 0.0})
    assert not variance_is_formal(ChaosField(policy, grid, {mi(): np.ones(16)}))


def test_dump_round_trip(tmp_path, grid, policy, rng):
    F = random_field(rng, policy, grid)
    write_chaos_field(F, tmp_path / "dump", z=1)
    assert (tmp_path / "dump" / "coef_(1,0,2).csv").exists() is False
    assert (tmp_path / "dump" / "coef_(1,2).csv").exists()
    header = (tmp_path / "dump" / "index.csv").read_text().splitlines()[0]
    assert header == "alpha,hzz_norm,weight_p2"
    back = read_chaos_field(tmp_path / "dump", policy)
    assert list(back.keys()) == list(F.keys())
    for a in F:
        assert np.array_equal(back.array(a), F.array(a))
