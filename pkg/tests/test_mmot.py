import itertools

import numpy as np
import pytest

from wbary import geometry as geo
from wbary.measures import DiscreteMeasure, w2
from wbary.mmot import CapExceeded, barycost, independent_coupling_cost, mmot_oracle, solve_mmot
from conftest import philox, random_measure


def cost_tensor(M, lam, measures):
    sizes = [mu.size for mu in measures]
    C = np.empty(sizes)
    for t in itertools.product(*map(range, sizes)):
        C[t] = barycost(M, lam, [measures[i].points[t[i]] for i in range(len(measures))])[0]
    return C


def rounded_coupling(C, measures, rng):
    """Feasible coupling from random Sinkhorn scalings followed by rounding to the marginals."""
    n = len(measures)
    K = np.exp(-rng.random() * 5 * C / max(C.max(), 1e-12)) * rng.random(C.shape)
    for _ in range(int(rng.integers(0, 5))):
        for i in range(n):
            axes = tuple(a for a in range(n) if a != i)
            r = K.sum(axis=axes)
            shape = [1] * n
            shape[i] = -1
            K = K * (measures[i].weights / r).reshape(shape)
    K = K / K.sum()
    for i in range(n):
        axes = tuple(a for a in range(n) if a != i)
        r = K.sum(axis=axes)
        shape = [1] * n
        shape[i] = -1
        K = K * np.minimum(1.0, measures[i].weights / np.maximum(r, 1e-300)).reshape(shape)
    deficit = 1.0 - K.sum()
    if deficit > 0:
        parts = []
        for i in range(n):
            axes = tuple(a for a in range(n) if a != i)
            parts.append((measures[i].weights - K.sum(axis=axes)) / deficit)
        outer = parts[0]
        for p in parts[1:]:
            outer = np.multiply.outer(outer, p)
        K = K + deficit * outer
    return K


def test_mmot_matches_permutation_oracle():
    rng = philox(31)
    Ms = [geo.euclidean(2), geo.sphere(2), geo.hyperbolic(2)]
    for k in range(50):
        M = Ms[k % 3]
        s = 2 + k % 2
        mus = [random_measure(M, rng, s, 1.0, uniform=True) for _ in range(3)]
        lam = rng.dirichlet(np.ones(3))
        lam[-1] = 1 - lam[:-1].sum()
        plan = solve_mmot(M, lam, mus)
        assert abs(plan.cost - mmot_oracle(M, lam, mus)) < 1e-9
        assert plan.residual(mus) < 1e-10


def test_two_marginal_euclidean_closed_form():
    rng = philox(32)
    M = geo.euclidean(2)
    for _ in range(20):
        mus = [random_measure(M, rng, int(rng.integers(1, 6)), 3.0) for _ in range(2)]
        l1 = float(rng.uniform(0.1, 0.9))
        plan = solve_mmot(M, [l1, 1 - l1], mus)
        assert abs(plan.cost - l1 * (1 - l1) * w2(M, *mus)[0]) < 1e-9


def test_plan_beats_random_feasible_couplings():
    rng = philox(33)
    for M in (geo.euclidean(2), geo.sphere(2), geo.hyperbolic(2)):
        mus = [random_measure(M, rng, s, 1.0) for s in (3, 2, 3)]
        lam = np.array([0.5, 0.3, 0.2])
        plan = solve_mmot(M, lam, mus)
        assert plan.cost <= independent_coupling_cost(M, lam, mus) + 1e-12
        C = cost_tensor(M, lam, mus)
        for _ in range(50):
            K = rounded_coupling(C, mus, rng)
            for i in range(3):
                axes = tuple(a for a in range(3) if a != i)
                assert np.abs(K.sum(axis=axes) - mus[i].weights).max() < 1e-12
            assert plan.cost <= float((K * C).sum()) + 1e-10


def test_dirac_marginals_give_product_plan():
    M = geo.sphere(2)
    xs = np.eye(3)
    mus = [DiscreteMeasure.dirac(M, x) for x in xs]
    lam = np.full(3, 1 / 3)
    plan = solve_mmot(M, lam, mus)
    assert plan.entries == [((0, 0, 0), 1.0)]
    assert plan.cost == pytest.approx(mmot_oracle(M, lam, mus), abs=1e-12)
    assert np.allclose(plan.points[0], np.ones(3) / np.sqrt(3), atol=1e-9)
    assert plan.cost == pytest.approx(np.arccos(1 / np.sqrt(3)) ** 2, abs=1e-9)


def test_barycost_examples():
    E = geo.euclidean(2)
    c, w = barycost(E, [0.5, 0.5], [[0, 0], [2, 0]])
    assert c == pytest.approx(1.0) and np.allclose(w, [1, 0])
    lam = np.array([0.2, 0.3, 0.5])
    X = np.array([[0.0, 1.0], [2.0, -1.0], [1.0, 3.0]])
    c, w = barycost(E, lam, X)
    assert np.allclose(w, lam @ X)
    assert c == pytest.approx(float(lam @ np.sum((X - lam @ X) ** 2, 1)))


def test_three_marginal_two_atom_enumeration():
    # all 2!*2! assignment couplings of uniform 2-atom marginals
    rng = philox(34)
    M = geo.euclidean(2)
    mus = [random_measure(M, rng, 2, 2.0, uniform=True) for _ in range(3)]
    lam = np.array([0.25, 0.25, 0.5])
    C = cost_tensor(M, lam, mus)
    best = min(0.5 * (C[0, p[0], q[0]] + C[1, p[1], q[1]])
               for p in itertools.permutations(range(2)) for q in itertools.permutations(range(2)))
    assert solve_mmot(M, lam, mus).cost == pytest.approx(best, abs=1e-12)


def test_cap_and_oracle_preconditions():
    M = geo.euclidean(1)
    mu = DiscreteMeasure.uniform(M, np.arange(10.0)[:, None])
    with pytest.raises(CapExceeded):
        solve_mmot(M, [0.5, 0.5], [mu, mu], cap=99)
    with pytest.raises(ValueError):
        mmot_oracle(M, [0.5, 0.5], [mu, mu])


def test_pivot_seed_keeps_cost():
    rng = philox(35)
    M = geo.hyperbolic(2)
    mus = [random_measure(M, rng, 4, 1.0) for _ in range(3)]
    lam = np.array([0.4, 0.4, 0.2])
    costs = [solve_mmot(M, lam, mus, pivot_seed=s).cost for s in (None, 1, 2, 3)]
    assert np.ptp(costs) < 1e-10
