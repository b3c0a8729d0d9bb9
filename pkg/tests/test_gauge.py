import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from wbary.gauge import (GAP_BOUND, ClampedEntropy, GaugeError, GridDensity, GridMismatch, IntegrabilityGauge,
                         bgl_membership, bump, build_gauge, displacement_functional, entropy_inequality_check,
                         gaussian_grid, random_gaussian_instance, smoothstep, tail_profile, ui_threshold)
from conftest import GOLDEN, gauge_family


def families():
    return [gauge_family(k) for k in range(3)]


def step_density(height, a, b, lo=-1.0, hi=1.0, res=4000):
    return GridDensity.from_function(lambda x: np.where((x[..., 0] > a) & (x[..., 0] < b), height, 0.0), [lo], [hi],
                                     res)


def ode_H(gauge, x):
    """Oracle: integrate ``H'' + H' = gamma`` from ``H(0) = H'(0) = 0``."""
    if x <= 0:
        return 0.0
    sol = integrate.solve_ivp(lambda t, y: [y[1], float(gauge.gamma(t)) - y[1]], (0.0, x), [0.0, 0.0],
                              method="DOP853", rtol=1e-12, atol=1e-14, max_step=0.01)
    return float(sol.y[0, -1])


def test_bump_shape():
    u = np.linspace(-0.5, 1.5, 2001)
    b = bump(u)
    assert np.all((b >= 0) & (b <= 1))
    assert np.all(b[(u <= 0) | (u >= 1)] == 0)
    assert np.all(b[(u >= 1 / 3) & (u <= 2 / 3)] == 1)
    assert smoothstep(0.5) == pytest.approx(0.5)


def test_H_matches_nested_quadrature():
    g = IntegrabilityGauge([0, 2, 3])
    for x in [-1.0, 0.2, 0.5, 1.0, 1.7, 2.4, 3.0, 3.9, 6.0]:
        assert float(g.H(x)) == pytest.approx(ode_H(g, x), abs=1e-9)


def test_H_solves_second_order_equation():
    # H' + H'' = gamma
    g = IntegrabilityGauge([1, 3])
    x = np.linspace(0.05, 5, 400)
    h = 1e-5
    H2 = (g.H_prime(x + h) - g.H_prime(x - h)) / (2 * h)
    assert np.abs(g.H_prime(x) + H2 - g.gamma(x)).max() < 1e-6


@pytest.mark.parametrize("k", range(3))
def test_gauge_properties_on_fixture_families(k):
    fam = families()[k]
    g = build_gauge(fam)
    x = np.linspace(0, 1, 1001)
    assert np.all(g.G(x) == 0)
    grid = np.linspace(0, np.exp(g.alpha[-1] + 2.0), 20001)
    G = g.G(grid)
    assert np.diff(G).min() >= -1e-9 and np.diff(G, 2).min() >= -1e-9
    hp = g.H_prime(np.linspace(-2, g.alpha[-1] + 3, 20001))
    assert hp.min() >= 0 and hp.max() <= 1
    assert g.gaps().min() >= GAP_BOUND
    assert max(displacement_functional(f, g) for f in fam) <= 1.0
    for n, a in enumerate(g.alpha):
        t = tail_profile(fam, [np.exp(a)])[0]
        assert t <= 2.0 ** -(n + 1)
        if a > 0 and (n == 0 or g.alpha[n - 1] < a - 1):
            # alpha is the least admissible integer
            assert tail_profile(fam, [np.exp(a - 1)])[0] > 2.0 ** -(n + 1)


def test_gap_bound_value():
    assert GAP_BOUND == pytest.approx(0.0803545, abs=1e-7)
    g = IntegrabilityGauge(np.arange(10))
    assert np.all(g.gaps() >= GAP_BOUND)


def test_uniform_quarter_family():
    f = step_density(4.0, 0.0, 0.25)
    g = build_gauge([f])
    assert list(g.alpha) == [2]
    val = displacement_functional(f, g)
    assert val == pytest.approx(0.25 * 4 * ode_H(g, np.log(4.0)), abs=1e-9)
    assert val <= 1
    assert bgl_membership(f, g, 1.0)
    assert bgl_membership(step_density(1.0, -0.5, 0.5), g, 0.0)


def test_bgl_non_member_when_G_positive():
    f = step_density(4.0, 0.0, 0.25)
    g = IntegrabilityGauge([0])
    assert float(g.G(4.0)) > 0
    assert not bgl_membership(f, g, 0.0)


def test_tail_profile_examples():
    f = step_density(2.0, 0.0, 0.5)
    assert tail_profile([f], [1.0, 2.0]) == pytest.approx([1.0, 0.0], abs=1e-12)
    n = gaussian_grid([0.0], [[1.0]], [-8.0], [8.0], 1601)
    assert tail_profile([n], [n.values.max()])[0] == 0
    for fam in families():
        t = tail_profile(fam, np.linspace(0, 600, 200))
        assert np.all(np.diff(t) <= 0)


def test_gauge_certifies_uniform_integrability():
    for fam in families():
        g = build_gauge(fam, extend=40)
        for eps in (0.1, 0.01):
            C = ui_threshold(g, eps)
            if C is None:
                continue
            assert tail_profile(fam, [C])[0] <= eps


def test_ui_threshold_unreachable_without_extension():
    g = IntegrabilityGauge([0])
    assert ui_threshold(g, 0.01) is None


def test_build_gauge_errors():
    with pytest.raises(GaugeError):
        build_gauge([step_density(1e6, 0.0, 1e-6, res=2_000_001)], max_alpha=5)
    a = step_density(1.0, 0.0, 0.5)
    b = step_density(1.0, 0.0, 0.5, res=100)
    with pytest.raises(GridMismatch):
        build_gauge([a, b])


def test_clamped_entropy_values():
    ent = ClampedEntropy()
    f = GridDensity.from_function(lambda x: np.full(x.shape[:-1], 0.5), [0.0], [2.0], 1000)
    assert displacement_functional(f, ent) == pytest.approx(2 * (np.exp(-1) - 0.5 * np.log(2)), abs=1e-12)
    assert displacement_functional(f, ent) == pytest.approx(0.0426117, abs=1e-7)
    n = gaussian_grid([0.0], [[1.0]], [-8.0], [8.0], 16000)
    ref = integrate.quad(lambda x: float(ent.G(np.exp(-x * x / 2) / np.sqrt(2 * np.pi))), -8, 8, points=[-1, 0, 1],
                         epsabs=1e-12, limit=200)[0]
    assert displacement_functional(n, ent) == pytest.approx(ref, abs=1e-6)


def test_clamped_entropy_lipschitz_constant_recorded():
    golden = json.loads((GOLDEN / "clamped_entropy.json").read_text())
    ent = ClampedEntropy()
    hp = ent.H_prime(np.linspace(-3, 60, 200001))
    assert hp.min() >= 0 and hp.max() <= golden["L_H"] == ent.L_H
    assert hp.max() == pytest.approx(golden["sampled_sup_H_prime"], abs=1e-12)


@given(st.floats(1e-3, 1e3))
def test_clamped_entropy_is_G_of_H(x):
    ent = ClampedEntropy()
    assert float(ent.G(x)) == pytest.approx(float(ent.H(np.log(x))) * x if x > np.exp(-1) else 0.0, abs=1e-12)


@given(st.lists(st.integers(0, 12), min_size=1, max_size=5, unique=True), st.floats(-2, 15))
def test_gauge_H_bounds(alpha, x):
    g = IntegrabilityGauge(sorted(alpha))
    h = float(g.H(x))
    assert 0 <= h <= max(x, 0) + 1e-12
    assert 0 <= float(g.H_prime(x)) <= 1


def test_entropy_suite():
    for seed in range(20):
        inst = random_gaussian_instance(seed)
        for K in (0.0, 1.0):
            r = entropy_inequality_check(inst.densities, inst.lam, inst.fbar, K, inst.W2sq)
            assert r.passed


def test_entropy_degenerate_slack_and_monotone_in_K():
    inst = random_gaussian_instance(3)
    g = inst.densities[0]
    for lam in ([1.0], [0.25, 0.25]):
        dens = [g] * len(lam)
        r = entropy_inequality_check(dens, lam, g, 0.0, 0.0)
        m = g.dim
        assert r.slack == pytest.approx((m * m + 2 * m) / (2 * sum(lam)), abs=1e-9)
    r0 = entropy_inequality_check(inst.densities, inst.lam, inst.fbar, 0.0, inst.W2sq)
    r1 = entropy_inequality_check(inst.densities, inst.lam, inst.fbar, 1.0, inst.W2sq)
    r2 = entropy_inequality_check(inst.densities, inst.lam, inst.fbar, 2.0, inst.W2sq)
    assert r0.rhs < r1.rhs < r2.rhs
    assert r2.rhs - r1.rhs == pytest.approx(r1.rhs - r0.rhs, abs=1e-12)


def test_entropy_remark_case():
    from wbary.gauge import gaussian_instance

    inst = gaussian_instance([0.5, 0.5], [[0, 0], [4, 0]], [np.eye(2), np.eye(2)], [-6, -6], [10, 6], 160)
    assert inst.W2sq == pytest.approx(4.0, abs=1e-12)
    r = entropy_inequality_check(inst.densities, inst.lam, inst.fbar, 0.0, inst.W2sq)
    assert r.slack > 0
    assert r.dimension_term == pytest.approx(4.0)


def test_entropy_grid_mismatch():
    inst = random_gaussian_instance(0)
    other = gaussian_grid([0, 0], np.eye(2), [-1, -1], [1, 1], 8)
    with pytest.raises(GridMismatch):
        entropy_inequality_check(inst.densities, inst.lam, other, 0.0, 0.0)
