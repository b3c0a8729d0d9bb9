from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wbary import geometry as geo

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

settings.register_profile("repo", max_examples=60, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

MANIFOLDS = [geo.euclidean(2), geo.euclidean(3), geo.sphere(2), geo.sphere(3), geo.hyperbolic(2),
             geo.hyperbolic(3)]


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


def near_point(M, base, rng, radius):
    """Point at geodesic distance at most ``radius`` from ``base``."""
    v = geo.project_tangent(M, base, rng.standard_normal(M.ambient_dim))
    n = float(geo.norm(M, v))
    return geo.exp_map(M, base, v / n * radius * rng.random()) if n > 0 else base.copy()


@pytest.fixture
def rng():
    return philox(12345)


def random_measure(M, rng, s, radius=1.0, uniform=False):
    """``s`` atoms within ``radius`` of the origin; Dirichlet weights unless ``uniform``."""
    from wbary.measures import DiscreteMeasure

    o = geo.origin(M)
    pts = np.stack([near_point(M, o, rng, radius) for _ in range(s)])
    w = np.full(s, 1.0 / s) if uniform else rng.dirichlet(np.ones(s))
    if not uniform:
        w[-1] = 1.0 - w[:-1].sum()
    return DiscreteMeasure(M, pts, w)


def construction_suite():
    """30 ensembles: 10 each on R^2, S^2, H^2 with 2 or 3 marginals of 1 to 4 atoms."""
    from wbary.measures import MeasureEnsemble

    rng = philox(77)
    out = []
    for M in (geo.euclidean(2), geo.sphere(2), geo.hyperbolic(2)):
        for k in range(10):
            n = 2 + k % 2
            mus = [random_measure(M, rng, int(rng.integers(1, 5)), 1.0) for _ in range(n)]
            lam = rng.dirichlet(np.ones(n))
            lam[-1] = 1 - lam[:-1].sum()
            out.append((M, MeasureEnsemble(M, mus, lam)))
    return out


def construction_errors(M, P, res):
    """(worst induced-plan gap to independent W2^2, energy-identity gap, first-order residual)."""
    from wbary.frechet import first_order_residual
    from wbary.measures import w2

    E = res.ensemble
    induced = max(abs(ip.cost - w2(M, res.barycenter, mu)[0]) for mu, ip in zip(E.measures, res.induced_plans))
    energy = abs(sum(l * ip.cost for l, ip in zip(E.weights, res.induced_plans)) - res.plan.cost)
    worst = 0.0
    for t, z in zip(res.plan.tuples, res.plan.points):
        xs = np.stack([E.measures[i].points[t[i]] for i in range(len(E))])
        worst = max(worst, first_order_residual(M, E.weights, xs, z))
    return induced, energy, worst


def load_measure(name):
    from wbary.cli import load_measure as _load

    return _load(FIXTURES / f"{name}.json")


def semi_discrete_instance(M, rng, n_anchors=None, radius=1.0):
    """Random potential with anchors within ``radius`` of a random base point ``z``.

    ``lambda1`` lies in [0.4, 0.7], so ``|grad g1| <= 1.5 radius`` and the image
    stays well inside the injectivity radius of the sphere.
    """
    from wbary.regularity import SemiDiscretePotential

    z = geo.random_point(M, rng, 0.5)
    k = int(rng.integers(1, 4)) if n_anchors is None else n_anchors
    anchors = np.stack([near_point(M, z, rng, radius) for _ in range(k)])
    l1 = float(rng.uniform(0.4, 0.7))
    rest = (1 - l1) * rng.dirichlet(np.ones(k))
    rest[-1] = 1 - l1 - rest[:-1].sum()
    return SemiDiscretePotential(M, l1, rest, anchors), z


def jacobi_suite():
    """60 (manifold, potential, point) triples: 20 each on R^2, S^2 (K = 0) and H^2 (K = 1)."""
    rng = philox(99)
    return [(M,) + semi_discrete_instance(M, rng) for M in (geo.euclidean(2), geo.sphere(2), geo.hyperbolic(2))
            for _ in range(20)]


def gauge_family(k):
    """Family ``k`` of the gauge fixture as grid densities."""
    import json

    from wbary.cli import _density

    doc = json.loads((FIXTURES / "gauge_families.json").read_text())
    lo, hi = doc["box"]["lo"], doc["box"]["hi"]
    return [_density(s, lo, hi, doc["res"]) for s in doc["families"][k]]


def change_of_variable_cases(m):
    """Narrow Gaussian source (peak above 1) under an anisotropic contraction, with three integrands.

    The gauge is the one built on the spike fixture family, so ``G > 0`` above 1.
    """
    from wbary.gauge import ClampedEntropy, build_gauge

    mean = np.zeros(m)
    cov = 0.05 * np.eye(m)
    A = np.diag([0.8, 0.6][:m])
    b = np.full(m, 0.5)
    gauge = build_gauge(gauge_family(1))
    integrands = {"identity_above_0": lambda y: np.maximum(y, 0.0), "clamped_entropy": ClampedEntropy().G,
                  "built_gauge": gauge.G}
    return mean, cov, A, b, integrands


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
