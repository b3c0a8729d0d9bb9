"""Weighted Fréchet means on the model spaces and the selection map ``B``.

The selection map is a fixed rule: gradient descent from every input point
plus four seeded perturbations of the extrinsic mean, keep the lowest-cost
basin, and break cost ties (within 1e-9) by lexicographic order of the
embedding coordinates. It stands in for a measurable selection of
barycenters; any deterministic rule of this kind is measurable on the
finite product supports used here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import CUT_TOL, Kind, ModelManifold, dist, dist_matrix, log_map, project

N_PERTURBED_STARTS = 4
SELECTION_SEED = 0
DEFAULT_MAX_ITER = 2000


class FrechetNonConvergence(RuntimeError):
    """Raised when no start reached the gradient tolerance.

    ``best`` holds the lowest-cost iterate.
    """

    def __init__(self, msg, best=None, grad_norm=None):
        super().__init__(msg)
        self.best = best
        self.grad_norm = grad_norm


@dataclass
class FrechetResult:
    mean: np.ndarray
    cost: float  # sum_i lam_i d(mean, x_i)^2
    grad_norm: float
    iterations: int
    multistart_spread: float


def default_tol(M: ModelManifold) -> float:
    return 1e-9 if M.kind is Kind.SPHERE else 1e-10


def _check_weights(lam, n):
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.shape != (n,):
        raise ValueError(f"expected {n} weights, got {lam.shape}")
    if np.any(lam <= 0) or abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to 1")
    return lam


def extrinsic_mean(M: ModelManifold, lam, X) -> np.ndarray:
    """Weighted ambient average pulled back to M, batched over leading axes.

    ``X`` has shape ``(..., n, D)``.
    """
    X = np.asarray(X, dtype=float)
    s = np.einsum("i,...id->...d", lam, X)
    if M.kind is Kind.EUCLIDEAN:
        return s
    if M.kind is Kind.SPHERE:
        nrm = np.linalg.norm(s, axis=-1, keepdims=True)
        fallback = X[..., 0, :]
        return np.where(nrm > 1e-8, s / np.where(nrm > 0, nrm, 1.0), fallback)
    q = s[..., 0] ** 2 - np.sum(s[..., 1:] ** 2, axis=-1)
    return project(M, s / np.sqrt(q)[..., None])


def start_schedule(M: ModelManifold, lam, X, seed: int = SELECTION_SEED) -> np.ndarray:
    """Initial iterates, shape ``(T, n + 4, D)`` for tuples ``X`` of shape ``(T, n, D)``."""
    X = np.asarray(X, dtype=float)
    T, n, D = X.shape
    c = extrinsic_mean(M, lam, X)  # (T, D)
    rng = np.random.Generator(np.random.Philox(seed))
    xi = rng.standard_normal((T, N_PERTURBED_STARTS, D))
    if M.kind is Kind.SPHERE:
        xi = xi - np.sum(xi * c[:, None, :], -1)[..., None] * c[:, None, :]
        nrm = np.linalg.norm(xi, axis=-1, keepdims=True)
    else:
        cm = c.copy()
        cm[:, 0] = -cm[:, 0]
        xi = xi + np.sum(xi * cm[:, None, :], -1)[..., None] * c[:, None, :]
        q = -xi[..., 0] ** 2 + np.sum(xi[..., 1:] ** 2, -1)
        nrm = np.sqrt(np.maximum(q, 1e-300))[..., None]
    radius = np.max(dist_matrix_batch(M, c, X), axis=1)  # (T,)
    scale = 0.5 * radius + 1e-3
    if M.kind is Kind.SPHERE:
        scale = np.minimum(scale, 0.5 * np.pi)
    v = xi / nrm * scale[:, None, None]
    pert = _kernels._vexp(_kind_code(M), np.broadcast_to(c[:, None, :], v.shape), v)
    return np.concatenate([X, pert], axis=1)


def dist_matrix_batch(M: ModelManifold, c, X) -> np.ndarray:
    """Distances from ``c[t]`` to every ``X[t, i]``; shape ``(T, n)``."""
    if M.kind is Kind.EUCLIDEAN:
        return np.linalg.norm(X - c[:, None, :], axis=-1)
    return _kernels._vdist(_kind_code(M), c[:, None, :], X)


def _kind_code(M: ModelManifold) -> int:
    return _kernels.SPHERE if M.kind is Kind.SPHERE else _kernels.HYPERBOLIC


def frechet_batch(M: ModelManifold, lam, X, tol=None, max_iter=DEFAULT_MAX_ITER, seed=SELECTION_SEED,
                  backend=None):
    """Fréchet means of ``T`` tuples at once.

    Returns ``(means, costs, grad_norms, iterations, spread, converged)``
    with costs equal to ``sum_i lam_i d(mean, x_i)^2``.
    """
    X = np.asarray(X, dtype=float)
    T, n, D = X.shape
    lam = _check_weights(lam, n)
    if tol is None:
        tol = default_tol(M)
    if M.kind is Kind.EUCLIDEAN:
        w = np.einsum("i,tid->td", lam, X)
        r = X - w[:, None, :]
        cost = np.einsum("i,ti->t", lam, np.sum(r * r, -1))
        g = np.linalg.norm(np.einsum("i,tid->td", lam, r), axis=-1)
        return w, cost, g, np.ones(T, dtype=np.int64), np.zeros(T), np.ones(T, dtype=bool)
    if n == 1:
        z = np.zeros(T)
        return X[:, 0, :].copy(), z, z.copy(), np.zeros(T, dtype=np.int64), z.copy(), np.ones(T, dtype=bool)
    starts = start_schedule(M, lam, X, seed)
    return _kernels.frechet_batch(_kind_code(M), X, lam, starts, tol, max_iter, backend=backend)


def frechet_mean(M: ModelManifold, lam, xs, tol=None, max_iter=DEFAULT_MAX_ITER, seed=SELECTION_SEED,
                 backend=None) -> FrechetResult:
    """Minimiser of ``w -> sum_i lam_i d(w, x_i)^2`` by Riemannian gradient descent.

    Gradient of the half cost is ``-sum_i lam_i log_w(x_i)``; unit step with
    Armijo halving. Raises :class:`FrechetNonConvergence` if no start meets
    ``tol``.
    """
    X = np.atleast_2d(np.asarray(xs, dtype=float))
    means, costs, g, its, spread, ok = frechet_batch(M, lam, X[None], tol, max_iter, seed, backend)
    if not ok[0]:
        raise FrechetNonConvergence(
            f"Fréchet mean did not reach tol after {max_iter} iterations (grad {g[0]:.3e})",
            best=means[0], grad_norm=float(g[0]))
    return FrechetResult(means[0], float(costs[0]), float(g[0]), int(its[0]), float(spread[0]))


def selection_B(M: ModelManifold, lam, xs) -> np.ndarray:
    """Deterministic barycenter of ``sum_i lam_i delta_{x_i}``."""
    X = np.atleast_2d(np.asarray(xs, dtype=float))
    if X.shape[0] == 1:
        return X[0].copy()
    return frechet_mean(M, lam, X, seed=SELECTION_SEED).mean


def first_order_residual(M: ModelManifold, lam, xs, z) -> float:
    """``|sum_i lam_i log_z(x_i)|``."""
    from .geometry import norm

    g = sum(l * log_map(M, z, x) for l, x in zip(np.asarray(lam, float), np.asarray(xs, float)))
    return float(norm(M, g))


def cut_locus_check(M: ModelManifold, lam, xs, z) -> bool:
    """True iff no ``x_i`` lies in the cut locus of ``z``."""
    if M.kind is not Kind.SPHERE:
        return True
    return all(dist(M, z, x) < np.pi - CUT_TOL for x in np.asarray(xs, float))


def second_order_eigs(M: ModelManifold, lam, xs, z) -> np.ndarray:
    """Eigenvalues of ``sum_i lam_i Hess_z d^2_{x_i}/2`` (PSD at a minimum)."""
    from .geometry import hess_half_dist_sq, tangent_frame

    E = tangent_frame(M, z)
    H = sum(l * hess_half_dist_sq(M, z, x, E) for l, x in zip(np.asarray(lam, float), np.asarray(xs, float)))
    return np.linalg.eigvalsh(0.5 * (H + H.T))


__all__ = [
    "FrechetNonConvergence",
    "FrechetResult",
    "cut_locus_check",
    "default_tol",
    "dist_matrix",
    "first_order_residual",
    "frechet_batch",
    "frechet_mean",
    "second_order_eigs",
    "selection_B",
]
