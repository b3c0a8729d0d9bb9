"""The twelve acceptance criteria at their stated tolerances.

Each test prints one line ``[PASS|FAIL] <n>: <what> | <measured>`` (also
collected into the terminal summary) and then asserts.
"""
import json
import sys
import time

import numpy as np
import pytest

from wbary import geometry as geo
from wbary.barycenter import lln_run, wasserstein_barycenter
from wbary.gauge import (GAP_BOUND, build_gauge, displacement_functional, entropy_inequality_check,
                         random_gaussian_instance)
from wbary.measures import MeasureEnsemble, w2
from wbary.mmot import mmot_oracle, solve_mmot
from wbary.regularity import (SemiDiscretePotential, change_of_variable_check, density_bound_check,
                              hessian_equality_gaussian, hessian_equality_semi_discrete, jacobi_bound_check)
from conftest import (ACCEPTANCE_LINES, FIXTURES, GOLDEN, MANIFOLDS, change_of_variable_cases, construction_errors,
                      construction_suite, gauge_family, jacobi_suite, load_measure, near_point, philox,
                      random_measure)
from test_geometry import fd_hessian
from test_measures import brute_force_w2

sys.path.insert(0, str(GOLDEN))
from make_golden import run  # noqa: E402


def report(n, what, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {n}: {what} | {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


def fixture(name):
    return json.loads((FIXTURES / f"{name}.json").read_text())


def test_criterion_01_geometry_oracle():
    t0 = time.perf_counter()
    rng = philox(1001)
    worst_h = worst_rt = 0.0
    for M in MANIFOLDS:
        for _ in range(50):
            x = geo.random_point(M, rng, 0.7)
            y = near_point(M, x, rng, 2.0)
            while geo.dist(M, x, y) < 1e-2:
                y = near_point(M, x, rng, 2.0)
            worst_h = max(worst_h, np.abs(geo.hess_half_dist_sq(M, x, y) - fd_hessian(M, x, y)).max())
            worst_rt = max(worst_rt, np.abs(geo.exp_map(M, x, geo.log_map(M, x, y)) - y).max())
    dt = time.perf_counter() - t0
    report(1, "Hessian vs finite differences, exp/log round trip", worst_h <= 1e-5 and worst_rt <= 1e-10 and dt < 5,
           f"hess err {worst_h:.2e} <= 1e-5, round trip {worst_rt:.2e} <= 1e-10, {dt:.2f}s < 5s")


def test_criterion_02_w2_oracle():
    t0 = time.perf_counter()
    rng = philox(1002)
    M = geo.euclidean(2)
    worst = 0.0
    for k in range(100):
        s = 1 + k % 7
        mu = random_measure(M, rng, s, 3.0, uniform=True)
        nu = random_measure(M, rng, s, 3.0, uniform=True)
        C = geo.dist_matrix(M, mu.points, nu.points) ** 2
        worst = max(worst, abs(w2(M, mu, nu)[0] - brute_force_w2(C)))
    dt = time.perf_counter() - t0
    report(2, "W2 vs permutation brute force (100 instances, s <= 7)", worst <= 1e-9 and dt < 30,
           f"max err {worst:.2e} <= 1e-9, {dt:.2f}s < 30s")


def test_criterion_03_mmot_oracle():
    t0 = time.perf_counter()
    rng = philox(1003)
    Ms = [geo.euclidean(2), geo.sphere(2), geo.hyperbolic(2)]
    worst3 = 0.0
    for k in range(50):
        M = Ms[k % 3]
        s = 1 + k % 3
        mus = [random_measure(M, rng, s, 1.0, uniform=True) for _ in range(3)]
        lam = rng.dirichlet(np.ones(3))
        lam[-1] = 1 - lam[:-1].sum()
        worst3 = max(worst3, abs(solve_mmot(M, lam, mus).cost - mmot_oracle(M, lam, mus)))
    E = geo.euclidean(2)
    worst2 = 0.0
    for _ in range(20):
        mus = [random_measure(E, rng, int(rng.integers(1, 6)), 3.0) for _ in range(2)]
        l1 = float(rng.uniform(0.1, 0.9))
        worst2 = max(worst2, abs(solve_mmot(E, [l1, 1 - l1], mus).cost - l1 * (1 - l1) * w2(E, *mus)[0]))
    dt = time.perf_counter() - t0
    report(3, "MMOT vs oracle (n=3, 50 seeds) and n=2 closed form (20 seeds)",
           worst3 <= 1e-9 and worst2 <= 1e-9 and dt < 60,
           f"oracle err {worst3:.2e}, closed form err {worst2:.2e} <= 1e-9, {dt:.2f}s < 60s")


def test_criterion_04_construction_identities():
    worst = np.zeros(3)
    suite = construction_suite()
    for M, P in suite:
        res = wasserstein_barycenter(M, P, tol=np.inf)
        worst = np.maximum(worst, construction_errors(M, P, res))
    report(4, f"construction identities on {len(suite)} ensembles over R^2, S^2, H^2", bool(np.all(worst <= 1e-8)),
           f"induced-plan {worst[0]:.2e}, energy {worst[1]:.2e}, first-order {worst[2]:.2e} (all <= 1e-8)")


def test_criterion_05_hessian_equality():
    res = {}
    for name in ("semi_discrete_euclid", "semi_discrete_sphere", "semi_discrete_h2"):
        doc = fixture(name)
        M = geo.ModelManifold.from_dict(doc["manifold"])
        pot = SemiDiscretePotential(M, doc["lambda1"], doc["anchor_weights"], doc["anchors"])
        res[name] = hessian_equality_semi_discrete(M, pot, doc["points"]).residual
    d2 = fixture("gaussian_hessian")
    g2 = hessian_equality_gaussian(d2["lambdas"], d2["means"], d2["covs"])
    d1 = fixture("gaussian_hessian_1d")
    g1 = hessian_equality_gaussian(d1["lambdas"], d1["means"], d1["covs"])
    sig = sum(l * np.sqrt(c[0][0]) for l, c in zip(d1["lambdas"], d1["covs"]))
    closed = abs(np.sqrt(g1.extra["cov"][0, 0]) - sig)
    ok = (res["semi_discrete_euclid"] <= 1e-14 and res["semi_discrete_sphere"] <= 1e-8
          and res["semi_discrete_h2"] <= 1e-8 and g2.residual <= 1e-10 and g1.residual <= 1e-10 and closed <= 1e-10)
    report(5, "Hessian equality", ok,
           f"euclid {res['semi_discrete_euclid']:.1e} <= 1e-14, sphere {res['semi_discrete_sphere']:.1e} and "
           f"H2 {res['semi_discrete_h2']:.1e} <= 1e-8, gaussian {g2.residual:.1e} / 1-D {g1.residual:.1e} "
           f"(sigma closed form {closed:.1e}) <= 1e-10")


def test_criterion_06_jacobi_laplacian():
    worst_j = worst_c = worst_p = np.inf
    Ks = set()
    suite = jacobi_suite()
    for M, pot, z in suite:
        r = jacobi_bound_check(M, pot, z)
        worst_j = min(worst_j, r.jacobi_slack)
        worst_c = min(worst_c, min(r.chain_slacks))
        worst_p = min(worst_p, r.min_psd_eig)
        Ks.add(M.K)
    ok = worst_j >= -1e-6 and worst_c >= -1e-6 and worst_p >= -1e-8 and Ks == {0.0, 1.0}
    report(6, f"Jacobi and Laplacian bounds on {len(suite)} semi-discrete instances (K in {sorted(Ks)})", ok,
           f"min Jacobi slack {worst_j:.2e}, min chain slack {worst_c:.2e} (>= -1e-6), min PSD eig {worst_p:.2e}")


def test_criterion_07_change_of_variable():
    worst = 0.0
    parts = []
    for m in (1, 2):
        mean, cov, A, b, integrands = change_of_variable_cases(m)
        for name, G in integrands.items():
            r = change_of_variable_check(mean, cov, A, b, G)
            worst = max(worst, r.residual)
            parts.append(f"{m}D {name} {r.target_side:.4f}")
    report(7, "change of variable, Gaussian to Gaussian, 1-D and 2-D", worst <= 1e-7,
           f"max residual {worst:.2e} <= 1e-7; values " + ", ".join(parts))


def test_criterion_08_density_bound():
    out = []
    ok = True
    for name in ("density_bound_1d", "density_bound_2d"):
        doc = fixture(name)
        r = density_bound_check(doc["lambdas"], doc["box"]["lo"], doc["box"]["hi"], doc["anchors"])
        ok &= r.tight and r.passed
        out.append(f"{r.dim}D ratio {r.ratio:.4f} vs C^m {r.C ** r.dim:.4f}")
    report(8, "density-bound scaling by C^m within 10%", ok, "; ".join(out))


def test_criterion_09_lln():
    t0 = time.perf_counter()
    golden = json.loads((GOLDEN / "lln_threshold.json").read_text())
    thr = golden["threshold"]
    M = geo.euclidean(2)
    P = MeasureEnsemble(M, [load_measure("gauss_pair_mu1"), load_measure("gauss_pair_mu2")], [0.5, 0.5])
    ref = wasserstein_barycenter(M, P)
    finals, firsts = [], []
    for seed in range(3):
        rows = lln_run(M, P, golden["sizes"], seed, reference=ref)
        firsts.append(rows[0].bary_w2)
        finals.append(rows[-1].bary_w2)
    dt = time.perf_counter() - t0
    decreasing = sum(f < s for f, s in zip(finals, firsts))
    below = sum(f <= thr for f in finals)
    report(9, "LLN: j=64 below j=4 and below threshold for 3 of 3 seeds", decreasing == 3 and below == 3 and dt < 300,
           f"j=64 values {[round(f, 4) for f in finals]}, j=4 values {[round(f, 4) for f in firsts]}, "
           f"below j=4: {decreasing}/3, <= {thr}: {below}/3, {dt:.1f}s")


def test_criterion_10_gauge():
    out = []
    ok = True
    for k in range(3):
        fam = gauge_family(k)
        g = build_gauge(fam)
        zero = np.all(g.G(np.linspace(0, 1, 1001)) == 0)
        grid = np.linspace(0, np.exp(g.alpha[-1] + 2.0), 20001)
        G = g.G(grid)
        convex = np.diff(G).min() >= -1e-9 and np.diff(G, 2).min() >= -1e-9
        hp = g.H_prime(np.linspace(-2, g.alpha[-1] + 3, 20001))
        lip = hp.min() >= 0 and hp.max() <= 1
        gap = float(g.gaps().min())
        sup = max(displacement_functional(f, g) for f in fam)
        ok &= bool(zero and convex and lip and gap >= GAP_BOUND and sup <= 1)
        out.append(f"alpha {[int(a) for a in g.alpha]} gap {gap:.5f} sup {sup:.4f}")
    report(10, f"gauge properties, gap >= {GAP_BOUND:.6f}, sup int G(f) <= 1 on 3 families", ok, "; ".join(out))


def test_criterion_11_entropy():
    worst = np.inf
    count = 0
    for seed in range(20):
        inst = random_gaussian_instance(seed)
        for K in (0.0, 1.0):
            r = entropy_inequality_check(inst.densities, inst.lam, inst.fbar, K, inst.W2sq)
            worst = min(worst, r.slack)
            count += r.passed
    g = random_gaussian_instance(0).densities[0]
    lam = [0.5, 0.5]
    r = entropy_inequality_check([g, g], lam, g, 0.0, 0.0)
    expected = (g.dim ** 2 + 2 * g.dim) / (2 * sum(lam))
    degen = abs(r.slack - expected)
    report(11, "entropy inequality on 20 Gaussian instances x K in {0, 1}; degenerate slack",
           count == 40 and degen <= 1e-9,
           f"{count}/40 hold, min slack {worst:.3f}; degenerate slack error {degen:.1e} <= 1e-9")


def test_criterion_12_pipeline_demo():
    code, out = run(["pipeline-demo", "pipeline_gaussian_pair.json"])
    res = json.loads(out)["result"]
    report(12, "pipeline demo exit 0 with int G(fbar) <= in-run bound", code == 0 and res["lhs"] <= res["rhs"],
           f"exit {code}, int G(fbar) {res['lhs']:.3e} <= {res['rhs']:.4f}")
