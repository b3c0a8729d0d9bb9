"""Wasserstein barycenters of finite ensembles via ``B#gamma``.

``gamma`` is an optimal multi-marginal plan for the barycentric cost and
``B`` the selection map; each surviving tuple contributes its mass at its
barycenter. The induced plans ``(B, p_i)#gamma`` are returned alongside so
callers can check they are optimal between the barycenter and each marginal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frechet import first_order_residual
from .geometry import ModelManifold, dist_matrix, exp_map, project, project_tangent
from .measures import DiscreteMeasure, MeasureEnsemble, TransportPlan, empirical_sample, w2, w2_outer
from .mmot import DEFAULT_CAP, MultiMarginalPlan, solve_mmot

MERGE_TOL = 1e-9


@dataclass
class BarycenterResult:
    barycenter: DiscreteMeasure
    plan: MultiMarginalPlan
    induced_plans: list
    functional_value: float  # sum_i lam_i W2^2(bary, mu_i)
    ensemble: MeasureEnsemble  # the ensemble actually solved (repeats merged)
    atom_of_entry: np.ndarray = field(repr=False)
    max_residual: float = 0.0  # worst first-order residual over plan entries


def _merge_points(M, pts, masses, tol=MERGE_TOL):
    """Greedy clustering of coincident points; returns (atoms, weights, label per input)."""
    k = pts.shape[0]
    labels = np.full(k, -1)
    D = dist_matrix(M, pts, pts)
    atoms = []
    for p in range(k):
        if labels[p] >= 0:
            continue
        group = np.flatnonzero((D[p] <= tol) & (labels < 0))
        labels[group] = len(atoms)
        atoms.append(p)
    weights = np.bincount(labels, weights=masses, minlength=len(atoms))
    return pts[atoms], weights, labels


def wasserstein_barycenter(M: ModelManifold, P: MeasureEnsemble, cap: int = DEFAULT_CAP, pivot_seed=None,
                           tol: float = 1e-8, backend=None) -> BarycenterResult:
    """Barycenter of a finitely supported ``P = sum_i lam_i delta_{mu_i}``.

    Raises ``ValueError`` if some atom fails the pointwise barycenter test
    ``|sum_i lam_i log_z(x_i)| <= tol``.
    """
    E = P.merged()
    lam = E.weights
    measures = E.measures
    n = len(measures)
    if n == 1:
        mu = measures[0]
        s = mu.size
        plan = MultiMarginalPlan((s,), np.arange(s)[:, None], mu.weights.copy(), 0.0, mu.points.copy(),
                                 np.zeros(s))
        ip = TransportPlan(np.diag(mu.weights), 0.0)
        return BarycenterResult(mu, plan, [ip], 0.0, E, np.arange(s), 0.0)

    plan = solve_mmot(M, lam, measures, cap=cap, pivot_seed=pivot_seed, backend=backend)
    pts = project(M, plan.points)
    atoms, weights, labels = _merge_points(M, pts, plan.masses)
    weights = weights / weights.sum()
    bary = DiscreteMeasure(M, atoms, weights)

    worst = 0.0
    for t, z in zip(plan.tuples, plan.points):
        xs = np.stack([measures[i].points[t[i]] for i in range(n)])
        worst = max(worst, first_order_residual(M, lam, xs, z))
    if worst > tol:
        raise ValueError(f"barycenter atom fails first-order test (residual {worst:.3e})")

    induced = []
    for i, mu in enumerate(measures):
        mass = np.zeros((len(atoms), mu.size))
        np.add.at(mass, (labels, plan.tuples[:, i]), plan.masses)
        C = dist_matrix(M, atoms, mu.points) ** 2
        induced.append(TransportPlan(mass, float(np.sum(mass * C))))
    value = float(sum(l * ip.cost for l, ip in zip(lam, induced)))
    return BarycenterResult(bary, plan, induced, value, E, labels, worst)


def barycenter_functional(M: ModelManifold, P: MeasureEnsemble, nu: DiscreteMeasure) -> float:
    """``V(nu) = sum_i lam_i W2^2(nu, mu_i)``."""
    return float(sum(l * w2(M, nu, mu)[0] for l, mu in zip(P.weights, P.measures)))


@dataclass
class OptimalityReport:
    candidate_value: float
    competitor_values: np.ndarray
    gap: float  # min competitor value - candidate value

    @property
    def passed(self) -> bool:
        return self.gap >= -1e-8


def _jitter(M, nu, rng, scale, concentration):
    pts = nu.points.copy()
    for k in range(pts.shape[0]):
        xi = project_tangent(M, pts[k], rng.standard_normal(M.ambient_dim))
        pts[k] = exp_map(M, pts[k], scale * rng.random() * xi)
    w = rng.dirichlet(concentration * nu.size * nu.weights)
    return DiscreteMeasure(M, pts, w / w.sum())


def verify_optimality(M: ModelManifold, P: MeasureEnsemble, candidate: DiscreteMeasure, trials: int = 200,
                      seed: int = 0, scale: float = 0.1, concentration: float = 50.0) -> OptimalityReport:
    """Compare ``V(candidate)`` with ``trials`` jittered competitors."""
    rng = np.random.Generator(np.random.Philox(seed))
    v0 = barycenter_functional(M, P, candidate)
    vals = np.array([barycenter_functional(M, P, _jitter(M, candidate, rng, scale, concentration))
                     for _ in range(trials)])
    return OptimalityReport(v0, vals, float(vals.min() - v0) if trials else np.inf)


@dataclass
class LLNRow:
    j: int
    seed: int
    outer_w2: float  # W2 distance between P_j and P on W2(M)
    bary_w2: float  # W2(bary_j, bary)


def lln_run(M: ModelManifold, P: MeasureEnsemble, sizes, seed: int, reference: BarycenterResult = None,
            cap: int = DEFAULT_CAP) -> list:
    """Empirical-ensemble barycenters against the barycenter of ``P``.

    For one seed the ensembles ``P_j`` are empirical measures of growing
    prefixes of a single i.i.d. sequence.
    """
    if reference is None:
        reference = wasserstein_barycenter(M, P, cap=cap)
    rows = []
    for j in sizes:
        Pj = empirical_sample(P, int(j), int(seed))
        bj = wasserstein_barycenter(M, Pj, cap=cap)
        outer = np.sqrt(max(w2_outer(M, Pj.merged(), P), 0.0))
        bw = np.sqrt(max(w2(M, bj.barycenter, reference.barycenter)[0], 0.0))
        rows.append(LLNRow(int(j), int(seed), float(outer), float(bw)))
    return rows
