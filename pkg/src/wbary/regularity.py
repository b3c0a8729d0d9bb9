"""Regularity diagnostics for barycenters: semi-discrete maps and their derivatives.

Semi-discrete setting: one free marginal (weight ``lam1``) and Dirac anchors
``x_i`` with weights ``lam_i``. The potential

    g1(y) = -(1/lam1) sum_i lam_i d(y, x_i)^2 / 2

gives the map ``F(z) = exp_z(-grad g1(z))`` from barycenter points to the
free marginal. Everything here is a finite check at sample points: Hessian
cancellation, Jacobi and Laplacian inequalities, change of variables, and
how a density bound on the free marginal propagates to the barycenter.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .frechet import first_order_residual, frechet_batch
from .geometry import (CUT_TOL, CutLocusError, Kind, ModelManifold, dexp_matrix, dist, exp_map,
                       hess_half_dist_sq, laplacian_comparison_bound, laplacian_half_dist_sq, log_map,
                       minkowski, norm, tangent_frame)

JACOBI_GRID = 32
DET_FLOOR = 1e-12
JACOBI_SLACK = 1e-6
LAPLACE_SLACK = 1e-9
HIST_BINS = 64
HIST_SLACK = 0.1


class DegenerateJacobian(ArithmeticError):
    pass


class GaussianFixedPointError(RuntimeError):
    pass


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# potentials


@dataclass
class SemiDiscretePotential:
    manifold: ModelManifold
    lambda1: float
    anchor_weights: np.ndarray  # lam_2..lam_n
    anchors: np.ndarray  # (n-1, D)

    def __post_init__(self):
        self.anchor_weights = np.atleast_1d(np.asarray(self.anchor_weights, dtype=float))
        self.anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        if self.anchors.shape[0] != self.anchor_weights.shape[0]:
            raise ValueError("one weight per anchor required")
        if self.lambda1 <= 0 or np.any(self.anchor_weights <= 0):
            raise ValueError("weights must be positive")
        if abs(self.lambda1 + self.anchor_weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([[self.lambda1], self.anchor_weights])

    def _check(self, z):
        if self.manifold.kind is Kind.SPHERE:
            for x in self.anchors:
                if dist(self.manifold, z, x) >= np.pi - CUT_TOL:
                    raise CutLocusError("evaluation point in the cut locus of an anchor")

    def value(self, z) -> float:
        M = self.manifold
        d = np.array([dist(M, z, x) for x in self.anchors])
        return float(-(self.anchor_weights @ (0.5 * d * d)) / self.lambda1)

    def gradient(self, z) -> np.ndarray:
        """``(1/lam1) sum_i lam_i log_z(x_i)``; the gradient of ``-d^2/2`` is ``+log``."""
        self._check(z)
        M = self.manifold
        g = sum(l * log_map(M, z, x) for l, x in zip(self.anchor_weights, self.anchors))
        return g / self.lambda1

    def hessian(self, z, frame=None) -> np.ndarray:
        self._check(z)
        M = self.manifold
        E = tangent_frame(M, z) if frame is None else frame
        H = sum(l * hess_half_dist_sq(M, z, x, E) for l, x in zip(self.anchor_weights, self.anchors))
        return -H / self.lambda1

    def laplacian(self, z) -> float:
        self._check(z)
        M = self.manifold
        s = sum(l * laplacian_half_dist_sq(M, z, x) for l, x in zip(self.anchor_weights, self.anchors))
        return float(-s / self.lambda1)


@dataclass
class QuadraticPotential:
    """Euclidean ``phi(x) = x^T (I - A) x / 2 - b^T x``, so ``x - grad phi(x) = A x + b``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if not np.allclose(self.A, self.A.T, rtol=0, atol=1e-12):
            raise ValueError("A must be symmetric")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def value(self, x) -> float:
        x = np.asarray(x, float)
        return float(0.5 * x @ (x - self.A @ x) - self.b @ x)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return x - self.A @ x - self.b

    def hessian(self, x=None, frame=None) -> np.ndarray:
        return np.eye(self.dim) - self.A

    def laplacian(self, x=None) -> float:
        return float(np.trace(self.hessian()))

    def map(self, x) -> np.ndarray:
        return np.asarray(x, float) @ self.A.T + self.b


# ---------------------------------------------------------------------------
# the semi-discrete map


@dataclass
class MapEvaluation:
    image: np.ndarray
    dF: np.ndarray  # frame at z -> its parallel transport to the image
    jac: float
    residual: float  # first-order barycenter residual at z


def semi_discrete_map(M: ModelManifold, pot: SemiDiscretePotential, z) -> MapEvaluation:
    """``F(z) = exp_z(-grad g1(z))`` with its differential and Jacobian.

    ``dF = d exp_z|_{-grad g1} o (1/lam1) sum_i lam_i Hess_z d^2_{x_i}/2``,
    where ``x_1 = F(z)``.
    """
    z = np.asarray(z, dtype=float)
    E = tangent_frame(M, z)
    v = -pot.gradient(z)
    image = exp_map(M, z, v)
    A = pot.lambda1 * hess_half_dist_sq(M, z, image, E)
    A = A + sum(l * hess_half_dist_sq(M, z, x, E) for l, x in zip(pot.anchor_weights, pot.anchors))
    A = A / pot.lambda1
    dF = dexp_matrix(M, z, v, E) @ A
    xs = np.vstack([image[None, :], pot.anchors])
    res = first_order_residual(M, pot.weights, xs, z)
    return MapEvaluation(image, dF, float(np.linalg.det(dF)), res)


def lipschitz_bound(M: ModelManifold, pot: SemiDiscretePotential, region) -> float:
    """Largest operator norm of ``dF`` over the sample points ``region``."""
    region = np.atleast_2d(np.asarray(region, dtype=float))
    return float(max(np.linalg.norm(semi_discrete_map(M, pot, z).dF, 2) for z in region))


def rauch_lipschitz_bound(M: ModelManifold, pot: SemiDiscretePotential, z) -> float:
    """Comparison upper bound for ``|dF(z)|``.

    ``(1/lam1) sum_i lam_i max(1, a(d_i))`` times the largest stretch of
    ``d exp`` at radius ``|grad g1|``, with ``a`` the tangential Hessian
    factor (``d coth d`` on the hyperboloid) and ``x_1 = F(z)``.
    """
    from .geometry import comparison_factor

    ev = semi_discrete_map(M, pot, z)
    ds = [dist(M, z, ev.image)] + [dist(M, z, x) for x in pot.anchors]
    fac = sum(l * max(1.0, abs(comparison_factor(M, d))) for l, d in zip(pot.weights, ds)) / pot.lambda1
    r = float(norm(M, pot.gradient(z)))
    if M.kind is Kind.HYPERBOLIC and r > 0:
        stretch = np.sinh(r) / r
    else:
        stretch = 1.0
    return float(fac * stretch)


# ---------------------------------------------------------------------------
# Hessian equality


def ambient_hess_half_dist_sq(M: ModelManifold, x, y, frame=None) -> np.ndarray:
    """Hessian of ``d(., y)^2/2`` at ``x`` from the ambient extension plus the shape term.

    Independent of :func:`wbary.geometry.hess_half_dist_sq`, which works from
    the comparison eigenvalues.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    E = tangent_frame(M, x) if frame is None else frame
    if M.kind is Kind.EUCLIDEAN:
        return E.T @ E
    th = dist(M, x, y)
    if th == 0.0:
        return np.eye(M.dim)
    if M.kind is Kind.SPHERE:
        s = float(x @ y)
        d1 = -1.0 / np.sin(th)
        d2 = -np.cos(th) / np.sin(th) ** 3
        ds = E.T @ y  # ds(u) = <y, u>
        grad_dot_x = th * d1 * s  # D f(x) applied to x
        return (d1 * d1 + th * d2) * np.outer(ds, ds) - grad_dot_x * np.eye(M.dim)
    s = float(-minkowski(x, y))
    d1 = 1.0 / np.sinh(th)
    d2 = -np.cosh(th) / np.sinh(th) ** 3
    yl = y.copy()
    yl[0] = -yl[0]
    ds = -(yl @ E)  # ds(u) = -<y, u>_L
    grad_dot_x = th * d1 * s
    return (d1 * d1 + th * d2) * np.outer(ds, ds) + grad_dot_x * np.eye(M.dim)


@dataclass
class HessianReport:
    case: str
    residual: float
    per_point: np.ndarray = field(repr=False)
    extra: dict = field(default_factory=dict)


def hessian_equality_semi_discrete(M: ModelManifold, pot: SemiDiscretePotential, points) -> HessianReport:
    """``|lam1 Hess g1 + sum_i lam_i Hess c(., x_i)|`` at each sample point.

    ``Hess g1`` comes from the comparison eigenvalues; ``Hess c`` from the
    ambient route, so the cancellation is between independent computations.
    """
    points = np.atleast_2d(np.asarray(points, float))
    out = []
    for z in points:
        E = tangent_frame(M, z)
        S = pot.lambda1 * pot.hessian(z, E)
        for l, x in zip(pot.anchor_weights, pot.anchors):
            S = S + l * ambient_hess_half_dist_sq(M, z, x, E)
        out.append(np.linalg.norm(S, 2))
    out = np.asarray(out)
    return HessianReport("semi-discrete", float(out.max()), out)


def _sqrtm_psd(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.T


def gaussian_barycenter_cov(lam, covs, tol=1e-14, max_iter=10_000) -> np.ndarray:
    """Barycenter covariance ``S`` with ``S = sum_i lam_i (S^1/2 Sigma_i S^1/2)^1/2``.

    Iterates ``S <- S^-1/2 (sum_i lam_i (S^1/2 Sigma_i S^1/2)^1/2)^2 S^-1/2``.
    """
    lam = np.asarray(lam, float)
    covs = [np.atleast_2d(np.asarray(c, float)) for c in covs]
    S = sum(l * c for l, c in zip(lam, covs))
    for _ in range(max_iter):
        R = _sqrtm_psd(S)
        Ri = np.linalg.inv(R)
        T = sum(l * _sqrtm_psd(R @ c @ R) for l, c in zip(lam, covs))
        S_new = Ri @ T @ T @ Ri
        S_new = 0.5 * (S_new + S_new.T)
        if np.linalg.norm(S_new - S, 2) <= tol * max(1.0, np.linalg.norm(S, 2)):
            return S_new
        S = S_new
    raise GaussianFixedPointError(f"covariance fixed point did not converge in {max_iter} iterations")


def gaussian_transport_matrix(S, cov) -> np.ndarray:
    """Symmetric ``A`` with ``A S A = cov`` (the Brenier map from N(., S) to N(., cov))."""
    R = _sqrtm_psd(S)
    Ri = np.linalg.inv(R)
    A = Ri @ _sqrtm_psd(R @ cov @ R) @ Ri
    return 0.5 * (A + A.T)


def gaussian_potentials(lam, means, covs):
    """Barycenter ``(mean, cov)`` and the quadratic potentials of the maps to each marginal."""
    lam = np.asarray(lam, float)
    means = [np.atleast_1d(np.asarray(m, float)) for m in means]
    S = gaussian_barycenter_cov(lam, covs)
    mbar = sum(l * m for l, m in zip(lam, means))
    pots = []
    for m, c in zip(means, covs):
        A = gaussian_transport_matrix(S, np.atleast_2d(c))
        pots.append(QuadraticPotential(A, m - A @ mbar))
    return mbar, S, pots


def hessian_equality_gaussian(lam, means, covs) -> HessianReport:
    """``|sum_i lam_i Hess phi_i| = |I - sum_i lam_i A_i|`` at the barycenter fixed point."""
    lam = np.asarray(lam, float)
    mbar, S, pots = gaussian_potentials(lam, means, covs)
    T = sum(l * p.hessian() for l, p in zip(lam, pots))
    r = float(np.linalg.norm(T, 2))
    return HessianReport("gaussian", r, np.array([r]), {"mean": mbar, "cov": S})


# ---------------------------------------------------------------------------
# Jacobi and Laplacian inequalities


@dataclass
class JacobiReport:
    dets: np.ndarray  # det J(t) on the t-grid
    l: float  # -log det J(1)
    laplacian: float  # Delta phi(z)
    grad_norm: float
    K: float
    jacobi_slack: float  # l - (Delta phi - K |grad|^2 / 2)
    chain: dict  # Delta phi <= Delta d^2/2 <= comparison <= m(1 + sqrt K d) <= m + m^2/2 + K d^2/2
    chain_slacks: list
    min_psd_eig: float  # min eigenvalue of Hess d^2_{F(z)}/2 - Hess phi

    @property
    def passed(self) -> bool:
        return (self.jacobi_slack >= -JACOBI_SLACK and min(self.chain_slacks) >= -LAPLACE_SLACK
                and self.min_psd_eig >= -1e-8)


def jacobi_bound_check(M: ModelManifold, pot, z, grid: int = JACOBI_GRID) -> JacobiReport:
    """Jacobian along ``t -> exp_z(-t grad phi)`` and the curvature-corrected bounds.

    ``J(t) = d exp_z|_{-t grad phi} o (Hess_z d^2_{gamma(t)}/2 - t Hess phi)``.
    Raises :class:`DegenerateJacobian` if ``det J(t) <= 1e-12`` on the grid.
    """
    z = np.asarray(z, float)
    m = M.dim
    E = tangent_frame(M, z)
    g = pot.gradient(z)
    Hphi = pot.hessian(z, E)
    dets = []
    for t in np.linspace(0.0, 1.0, grid):
        v = -t * g
        y = exp_map(M, z, v)
        Jt = dexp_matrix(M, z, v, E) @ (hess_half_dist_sq(M, z, y, E) - t * Hphi)
        dets.append(np.linalg.det(Jt))
    dets = np.asarray(dets)
    if np.any(dets <= DET_FLOOR):
        raise DegenerateJacobian(f"det J(t) = {dets.min():.3e} on the t-grid")
    K = M.K
    gn = float(norm(M, g))
    lap = pot.laplacian(z)
    l = float(-np.log(dets[-1]))
    image = exp_map(M, z, -g)
    Himg = hess_half_dist_sq(M, z, image, E)
    psd = float(np.linalg.eigvalsh(0.5 * ((Himg - Hphi) + (Himg - Hphi).T)).min())
    lap_d = laplacian_half_dist_sq(M, z, image)
    comp = laplacian_comparison_bound(M, gn)
    lin = m * (1.0 + np.sqrt(K) * gn)
    top = m + 0.5 * m * m + 0.5 * K * gn * gn
    chain = {"laplacian_phi": lap, "laplacian_half_dist_sq": lap_d, "comparison": comp, "linear": lin,
             "quadratic": top}
    vals = list(chain.values())
    slacks = [b - a for a, b in zip(vals[:-1], vals[1:])]
    return JacobiReport(dets, l, lap, gn, K, l - (lap - 0.5 * K * gn * gn), chain, slacks, psd)


# ---------------------------------------------------------------------------
# change of variables on Gaussians


def gaussian_pdf(x, mean, cov):
    """Density of N(mean, cov) at points ``x`` of shape ``(..., m)``."""
    mean = np.atleast_1d(np.asarray(mean, float))
    cov = np.atleast_2d(np.asarray(cov, float))
    x = np.asarray(x, float)
    m = mean.shape[0]
    P = np.linalg.inv(cov)
    r = x - mean
    q = np.einsum("...i,ij,...j->...", r, P, r)
    return np.exp(-0.5 * q) / np.sqrt((2 * np.pi) ** m * np.linalg.det(cov))


@dataclass
class ChangeOfVariableReport:
    target_side: float  # int A(g) dy
    source_side: float  # int A(f / Jac F) Jac F dx
    residual: float
    abserr: float


def _integrate(fun, lo, hi, m, epsabs):
    """Adaptive quadrature of a vectorised ``fun`` (points on the last axis) over a box."""
    if m == 1:
        val, err = integrate.quad(lambda x: float(fun(np.array([x]))), lo[0], hi[0], epsabs=epsabs, epsrel=0,
                                  limit=400)
    elif m == 2:
        r = integrate.cubature(fun, lo, hi, rule="gk21", atol=epsabs, rtol=0.0, max_subdivisions=100_000)
        if r.status != "converged":
            raise QuadratureError(f"cubature did not converge (estimated error {float(r.error):.3e})")
        val, err = r.estimate, r.error
    else:
        raise ValueError("change of variables check supports dimension 1 or 2")
    return float(val), float(err)


def change_of_variable_check(mean, cov, A, b, integrand, n_sigma: float = 10.0,
                             epsabs: float = 1e-10) -> ChangeOfVariableReport:
    """Compare ``int A(g)`` with ``int A(f/Jac F) Jac F`` for ``F(x) = A x + b``.

    ``f`` is the N(mean, cov) density and ``g`` the density of its image,
    N(A mean + b, A cov A^T). Both sides by adaptive quadrature over boxes of
    ``n_sigma`` standard deviations.
    """
    mean = np.atleast_1d(np.asarray(mean, float))
    cov = np.atleast_2d(np.asarray(cov, float))
    A = np.atleast_2d(np.asarray(A, float))
    b = np.atleast_1d(np.asarray(b, float))
    m = mean.shape[0]
    jac = float(np.linalg.det(A))
    if jac <= 0:
        raise ValueError("affine map must preserve orientation")
    mean2 = A @ mean + b
    cov2 = A @ cov @ A.T

    def box(mu, C):
        s = n_sigma * np.sqrt(np.diag(C))
        return mu - s, mu + s

    lo2, hi2 = box(mean2, cov2)
    lo1, hi1 = box(mean, cov)
    tgt, e1 = _integrate(lambda y: integrand(gaussian_pdf(y, mean2, cov2)), lo2, hi2, m, epsabs)
    src, e2 = _integrate(lambda x: integrand(gaussian_pdf(x, mean, cov) / jac) * jac, lo1, hi1, m, epsabs)
    if not (np.isfinite(tgt) and np.isfinite(src)):
        raise QuadratureError("quadrature returned a non-finite value")
    return ChangeOfVariableReport(tgt, src, abs(tgt - src), e1 + e2)


# ---------------------------------------------------------------------------
# density bound propagation


@dataclass
class DensityHistogram:
    lo: np.ndarray
    hi: np.ndarray
    masses: np.ndarray  # one entry per bin, axis order as lo/hi

    @property
    def bin_volume(self) -> float:
        return float(np.prod((self.hi - self.lo) / np.asarray(self.masses.shape)))

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.bin_volume

    @classmethod
    def from_points(cls, points, weights, lo, hi, bins: int = HIST_BINS) -> "DensityHistogram":
        points = np.atleast_2d(np.asarray(points, float))
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        m = points.shape[1]
        H, _ = np.histogramdd(points, bins=[bins] * m, range=list(zip(lo, hi)), weights=weights)
        if abs(H.sum() - 1.0) > 1e-9:
            raise ValueError(f"histogram holds mass {H.sum()!r}; points fall outside the box")
        return cls(lo, hi, H)


@dataclass
class DensityBoundReport:
    C: float
    dim: int
    source_max_density: float
    barycenter_max_density: float
    ratio: float  # barycenter max / source max
    histogram: DensityHistogram = field(repr=False)

    @property
    def scaled(self) -> float:
        return self.ratio / self.C**self.dim

    @property
    def passed(self) -> bool:
        return self.scaled <= 1.0 + HIST_SLACK

    @property
    def tight(self) -> bool:
        return abs(self.scaled - 1.0) <= HIST_SLACK


def grid_uniform_atoms(lo, hi, per_axis):
    """Cell-centred grid on the box ``[lo, hi]`` with equal weights."""
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    axes = [lo[k] + (np.arange(per_axis) + 0.5) * (hi[k] - lo[k]) / per_axis for k in range(lo.shape[0])]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.shape[0])
    return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


def density_bound_check(lam, lo, hi, anchors, per_axis=None, bins: int = HIST_BINS,
                        region_samples: int = 64) -> DensityBoundReport:
    """Push a grid-uniform free marginal through the barycenter map with Dirac anchors.

    Euclidean only. Returns the histogram of the barycenter and the ratio of
    its peak density to the source density against ``C^m``, ``C`` being the
    measured Lipschitz constant of ``F`` on barycenter points.
    """
    from .geometry import euclidean

    lam = np.asarray(lam, float)
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    anchors = np.atleast_2d(np.asarray(anchors, float))
    m = lo.shape[0]
    M = euclidean(m)
    if per_axis is None:
        per_axis = 10_048 if m == 1 else 128
    if per_axis % bins:
        raise ValueError("atoms per axis must be a multiple of the bin count")
    pts, w = grid_uniform_atoms(lo, hi, per_axis)
    if pts.shape[0] < 10_000:
        raise ValueError("free marginal needs at least 1e4 atoms")
    X = np.concatenate([pts[:, None, :], np.broadcast_to(anchors[None], (pts.shape[0],) + anchors.shape)], 1)
    bary, *_ = frechet_batch(M, lam, X)

    corners = np.stack(np.meshgrid(*[[lo[k], hi[k]] for k in range(m)], indexing="ij"), -1).reshape(-1, m)
    Xc = np.concatenate([corners[:, None, :], np.broadcast_to(anchors[None], (corners.shape[0],) + anchors.shape)],
                        1)
    cimg, *_ = frechet_batch(M, lam, Xc)
    hist = DensityHistogram.from_points(bary, w, cimg.min(0), cimg.max(0), bins)

    pot = SemiDiscretePotential(M, float(lam[0]), lam[1:], anchors)
    step = max(1, bary.shape[0] // region_samples)
    C = lipschitz_bound(M, pot, bary[::step])
    src = 1.0 / float(np.prod(hi - lo))
    peak = float(hist.density.max())
    return DensityBoundReport(C, m, src, peak, peak / src, hist)


__all__ = [
    "ChangeOfVariableReport",
    "DegenerateJacobian",
    "DensityBoundReport",
    "DensityHistogram",
    "GaussianFixedPointError",
    "HessianReport",
    "JacobiReport",
    "MapEvaluation",
    "QuadraticPotential",
    "QuadratureError",
    "SemiDiscretePotential",
    "ambient_hess_half_dist_sq",
    "change_of_variable_check",
    "density_bound_check",
    "gaussian_barycenter_cov",
    "gaussian_pdf",
    "gaussian_potentials",
    "gaussian_transport_matrix",
    "grid_uniform_atoms",
    "hessian_equality_gaussian",
    "hessian_equality_semi_discrete",
    "jacobi_bound_check",
    "lipschitz_bound",
    "rauch_lipschitz_bound",
    "semi_discrete_map",
]
