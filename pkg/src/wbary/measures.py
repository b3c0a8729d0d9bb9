"""Discrete measures, exact W2 by the transportation simplex, and measure ensembles."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import ModelManifold, check_point, dist_matrix

WEIGHT_TOL = 1e-12
PLAN_TOL = 1e-10


class MeasureError(ValueError):
    pass


class TransportError(RuntimeError):
    pass


def _normalize_weights(w, tol, what="weights"):
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 0:
        raise MeasureError(f"empty {what}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise MeasureError(f"{what} must be finite and nonnegative")
    total = w.sum()
    if abs(total - 1.0) > tol:
        raise MeasureError(f"{what} sum to {total!r}, not 1 (tolerance {tol:g})")
    return w


@dataclass
class DiscreteMeasure:
    """Finitely supported probability measure ``sum_k w_k delta_{p_k}``.

    Zero-weight atoms are dropped at construction.
    """

    manifold: ModelManifold
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = _normalize_weights(self.weights, WEIGHT_TOL)
        if P.shape[0] != w.shape[0]:
            raise MeasureError(f"{P.shape[0]} points but {w.shape[0]} weights")
        for x in P:
            check_point(self.manifold, x)
        keep = w > 0
        self.points = np.ascontiguousarray(P[keep])
        self.weights = w[keep]

    @classmethod
    def dirac(cls, M: ModelManifold, x) -> "DiscreteMeasure":
        return cls(M, np.asarray(x, float)[None, :], np.ones(1))

    @classmethod
    def uniform(cls, M: ModelManifold, points) -> "DiscreteMeasure":
        P = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(M, P, np.full(P.shape[0], 1.0 / P.shape[0]))

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def same_as(self, other: "DiscreteMeasure") -> bool:
        return (self is other) or (
            self.manifold == other.manifold
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass
class TransportPlan:
    mass: np.ndarray  # (rows, cols)
    cost: float

    @property
    def rows(self) -> int:
        return self.mass.shape[0]

    @property
    def cols(self) -> int:
        return self.mass.shape[1]

    def residual(self, a, b) -> float:
        return float(max(np.abs(self.mass.sum(1) - a).max(), np.abs(self.mass.sum(0) - b).max()))


@dataclass
class MeasureEnsemble:
    """Finitely supported measure on measures, ``sum_i lam_i delta_{mu_i}``."""

    manifold: ModelManifold
    measures: list
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.measures = list(self.measures)
        if not self.measures:
            raise MeasureError("ensemble needs at least one measure")
        if self.weights is None:
            self.weights = np.full(len(self.measures), 1.0 / len(self.measures))
        w = _normalize_weights(self.weights, WEIGHT_TOL, "ensemble weights")
        if w.shape[0] != len(self.measures):
            raise MeasureError("one weight per measure required")
        for mu in self.measures:
            if mu.manifold != self.manifold:
                raise MeasureError("all measures must live on the ensemble's manifold")
        keep = np.flatnonzero(w > 0)
        self.measures = [self.measures[i] for i in keep]
        self.weights = w[keep]

    def __len__(self):
        return len(self.measures)

    def merged(self) -> "MeasureEnsemble":
        """Same ensemble with repeated measures collapsed (weights summed)."""
        uniq: list = []
        wts: list = []
        for mu, w in zip(self.measures, self.weights):
            for k, nu in enumerate(uniq):
                if nu.same_as(mu):
                    wts[k] += w
                    break
            else:
                uniq.append(mu)
                wts.append(float(w))
        wts = np.asarray(wts)
        return MeasureEnsemble(self.manifold, uniq, wts / wts.sum())


def solve_transport(a, b, C, max_iter=None) -> TransportPlan:
    """Exact discrete optimal transport between weight vectors ``a`` and ``b``."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    if abs(a.sum() - b.sum()) > 1e-9:
        raise TransportError("marginals carry different total mass")
    if max_iter is None:
        max_iter = 50 * (a.size + b.size) * max(a.size, b.size) + 100
    X, _, status = _kernels.transport_simplex(a, b, C, int(max_iter))
    if status != 0:
        raise TransportError("transportation simplex hit its pivot cap")
    return TransportPlan(X, float(np.sum(X * C)))


def w2(M: ModelManifold, mu: DiscreteMeasure, nu: DiscreteMeasure):
    """Squared 2-Wasserstein distance and an optimal plan."""
    if mu.manifold != M or nu.manifold != M:
        raise MeasureError("measures live on a different manifold")
    C = dist_matrix(M, mu.points, nu.points) ** 2
    plan = solve_transport(mu.weights, nu.weights, C)
    return plan.cost, plan


def w2_outer(M: ModelManifold, P: MeasureEnsemble, Q: MeasureEnsemble) -> float:
    """Squared Wasserstein distance on ``W2(M)`` between two finite ensembles."""
    C = np.array([[w2(M, mu, nu)[0] for nu in Q.measures] for mu in P.measures])
    return solve_transport(P.weights, Q.weights, C).cost


def second_moment(M: ModelManifold, mu: DiscreteMeasure, x0) -> float:
    d = dist_matrix(M, mu.points, np.asarray(x0, float)[None, :])[:, 0]
    return float(mu.weights @ (d * d))


def sample_indices(P: MeasureEnsemble, j: int, seed: int) -> np.ndarray:
    """First ``j`` indices of the i.i.d. draw sequence of ``P`` for ``seed``.

    Draw ``k`` depends only on ``(seed, k)``, so samples of increasing size
    are nested prefixes of one sequence.
    """
    if j < 1:
        raise ValueError("sample size must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random(j)
    cdf = np.cumsum(P.weights)
    return np.minimum(np.searchsorted(cdf / cdf[-1], u, side="right"), len(P) - 1)


def empirical_sample(P: MeasureEnsemble, j: int, seed: int) -> MeasureEnsemble:
    """Empirical ensemble of the first ``j`` i.i.d. draws from ``P``, uniform weights."""
    idx = sample_indices(P, j, seed)
    return MeasureEnsemble(P.manifold, [P.measures[i] for i in idx], np.full(j, 1.0 / j))
