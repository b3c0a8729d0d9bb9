"""Multi-marginal optimal transport with the barycentric cost.

The cost of a tuple ``(x_1, ..., x_n)`` is ``min_w sum_i lam_i d(w, x_i)^2``,
evaluated by the selection map of :mod:`wbary.frechet`; the minimisers are
kept with the plan so the barycenter construction never re-solves them.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from ._accel import max_threads
from .frechet import FrechetNonConvergence, frechet_batch, frechet_mean
from .geometry import ModelManifold

DEFAULT_CAP = 200_000
LP_TOL = 1e-10
_CHUNK = 4096


class CapExceeded(ValueError):
    pass


class MMOTError(RuntimeError):
    pass


@dataclass
class MultiMarginalPlan:
    marginal_sizes: tuple
    tuples: np.ndarray  # (k, n) support indices
    masses: np.ndarray  # (k,)
    cost: float
    points: np.ndarray  # (k, D) barycenter of each tuple
    tuple_costs: np.ndarray  # (k,)

    @property
    def entries(self):
        return [(tuple(int(i) for i in t), float(m)) for t, m in zip(self.tuples, self.masses)]

    def marginal(self, i: int) -> np.ndarray:
        return np.bincount(self.tuples[:, i], weights=self.masses, minlength=self.marginal_sizes[i])

    def residual(self, measures) -> float:
        return float(max(np.abs(self.marginal(i) - mu.weights).max() for i, mu in enumerate(measures)))


def barycost(M: ModelManifold, lam, xs):
    """``(min_w sum_i lam_i d(w, x_i)^2, minimiser)`` using the selection rule."""
    X = np.atleast_2d(np.asarray(xs, dtype=float))
    if X.shape[0] == 1:
        return 0.0, X[0].copy()
    r = frechet_mean(M, lam, X)
    return r.cost, r.mean


def tuple_barycenters(M: ModelManifold, lam, X, backend=None):
    """Selection map and cost over a batch of tuples ``X`` of shape ``(T, n, D)``.

    Chunks run on a thread pool (``WBARY_THREADS``); the numba kernels
    release the GIL.
    """
    T = X.shape[0]
    chunks = [slice(k, min(k + _CHUNK, T)) for k in range(0, T, _CHUNK)]

    def run(sl):
        return frechet_batch(M, lam, X[sl], backend=backend)

    workers = min(max_threads(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(sl) for sl in chunks]
    means = np.concatenate([p[0] for p in parts])
    costs = np.concatenate([p[1] for p in parts])
    ok = np.concatenate([p[5] for p in parts])
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise FrechetNonConvergence(f"selection map did not converge on tuple {bad}", best=means[bad])
    return means, costs


def _product_tuples(sizes):
    return np.indices(sizes).reshape(len(sizes), -1).T


def _constraint_matrix(tuples, sizes):
    T, n = tuples.shape
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    rows = (tuples + offsets[None, :]).T.ravel()
    cols = np.tile(np.arange(T), n)
    return csr_matrix((np.ones(T * n), (rows, cols)), shape=(int(sum(sizes)), T))


def solve_mmot(M: ModelManifold, lam, measures, cap: int = DEFAULT_CAP, pivot_seed=None,
               backend=None) -> MultiMarginalPlan:
    """Optimal multi-marginal plan for the barycentric cost.

    ``pivot_seed`` permutes the LP columns, which changes the simplex pivot
    order (used to probe uniqueness of the induced barycenter).
    """
    measures = list(measures)
    n = len(measures)
    lam = np.asarray(lam, dtype=float)
    if n < 1 or lam.shape != (n,):
        raise ValueError("one weight per marginal required")
    for mu in measures:
        if mu.manifold != M:
            raise ValueError("marginal on a different manifold")
    sizes = tuple(mu.size for mu in measures)
    T = int(np.prod(sizes, dtype=np.int64))
    if T > cap:
        raise CapExceeded(f"product support {T} exceeds cap {cap}")
    tuples = _product_tuples(sizes)
    X = np.stack([measures[i].points[tuples[:, i]] for i in range(n)], axis=1)
    points, costs = tuple_barycenters(M, lam, X, backend)
    b = np.concatenate([mu.weights for mu in measures])
    A = _constraint_matrix(tuples, sizes)

    order = np.arange(T)
    if pivot_seed is not None:
        order = np.random.Generator(np.random.Philox(pivot_seed)).permutation(T)
    res = linprog(costs[order], A_eq=A[:, order], b_eq=b, bounds=(0, None), method="highs-ds",
                  options={"primal_feasibility_tolerance": LP_TOL, "dual_feasibility_tolerance": LP_TOL,
                           "presolve": True})
    if res.status != 0:
        raise MMOTError(f"LP failed: {res.message}")
    x = np.empty(T)
    x[order] = res.x
    support = np.flatnonzero(x > 1e-14)
    x_s = _polish(A[:, support].toarray(), b, x[support])
    keep = x_s > 0
    support, x_s = support[keep], x_s[keep]
    return MultiMarginalPlan(sizes, tuples[support], x_s, float(x_s @ costs[support]), points[support],
                             costs[support])


def _polish(A_s, b, x0):
    """Re-solve the equality constraints on the LP support to clean marginals."""
    x, *_ = np.linalg.lstsq(A_s, b, rcond=None)
    if np.all(x >= 0) and np.abs(A_s @ x - b).max() <= np.abs(A_s @ x0 - b).max():
        return x
    return np.maximum(x0, 0.0)


def mmot_oracle(M: ModelManifold, lam, measures) -> float:
    """Brute-force optimum over permutation couplings (uniform, equal-size marginals).

    Enumerates ``(s!)^(n-1)`` couplings, so limited to ``s <= 5`` and ``n <= 3``.
    """
    measures = list(measures)
    n = len(measures)
    s = measures[0].size
    if n > 3 or s > 5 or any(mu.size != s for mu in measures):
        raise ValueError("oracle needs n <= 3 marginals of equal size s <= 5")
    for mu in measures:
        if not np.allclose(mu.weights, 1.0 / s, rtol=0, atol=1e-12):
            raise ValueError("oracle needs uniform weights")
    cache = {}

    def c(t):
        if t not in cache:
            cache[t] = barycost(M, lam, [measures[i].points[t[i]] for i in range(n)])[0]
        return cache[t]

    perms = list(itertools.permutations(range(s)))
    best = np.inf
    for rest in itertools.product(perms, repeat=n - 1):
        total = sum(c((k,) + tuple(p[k] for p in rest)) for k in range(s))
        best = min(best, total / s)
    return float(best)


def independent_coupling_cost(M: ModelManifold, lam, measures, backend=None) -> float:
    """Cost of the product coupling; an upper bound for :func:`solve_mmot`."""
    sizes = tuple(mu.size for mu in measures)
    tuples = _product_tuples(sizes)
    X = np.stack([measures[i].points[tuples[:, i]] for i in range(len(measures))], axis=1)
    _, costs = tuple_barycenters(M, lam, X, backend)
    w = np.ones(len(tuples))
    for i, mu in enumerate(measures):
        w = w * mu.weights[tuples[:, i]]
    return float(w @ costs)
