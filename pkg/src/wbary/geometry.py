"""Closed-form Riemannian kernel for the three constant-curvature model spaces.

Points are plain numpy arrays in embedding coordinates:

* Euclidean ``R^m``: length ``m``.
* Unit sphere ``S^m``: unit vectors of length ``m + 1``.
* Hyperbolic ``H^m``: upper sheet of the hyperboloid ``<x, x>_L = -1`` in
  Minkowski space ``R^{1,m}`` (length ``m + 1``, first coordinate >= 1).

Tangent vectors live in the same embedding space. Operators on a tangent
space (Hessians, differentials) are ``m x m`` matrices expressed in the
orthonormal frame returned by :func:`tangent_frame`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

EMBED_TOL = 1e-12
CUT_TOL = 1e-9


class GeometryError(ValueError):
    pass


class ConstraintViolation(GeometryError):
    """A point or tangent vector violates the embedding constraint."""


class CutLocusError(GeometryError):
    """``log``/Hessian requested for a pair in each other's cut locus."""


class Kind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    SPHERE = "sphere"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class ModelManifold:
    kind: Kind
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def ambient_dim(self) -> int:
        return self.dim if self.kind is Kind.EUCLIDEAN else self.dim + 1

    @property
    def curvature(self) -> float:
        """Sectional curvature: 0, +1 or -1."""
        return {Kind.EUCLIDEAN: 0.0, Kind.SPHERE: 1.0, Kind.HYPERBOLIC: -1.0}[self.kind]

    @property
    def K(self) -> float:
        """Nonnegative constant with Ric >= -K (Ric = -(m-1) on H^m)."""
        return float(self.dim - 1) if self.kind is Kind.HYPERBOLIC else 0.0

    @property
    def ricci_lower(self) -> float:
        return -self.K

    @property
    def injectivity_radius(self) -> float:
        return np.pi if self.kind is Kind.SPHERE else np.inf

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "dim": self.dim}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelManifold":
        return cls(Kind(str(d["kind"]).lower()), int(d["dim"]))


def euclidean(m: int) -> ModelManifold:
    return ModelManifold(Kind.EUCLIDEAN, m)


def sphere(m: int) -> ModelManifold:
    return ModelManifold(Kind.SPHERE, m)


def hyperbolic(m: int) -> ModelManifold:
    return ModelManifold(Kind.HYPERBOLIC, m)


# ---------------------------------------------------------------------------
# inner products and embedding constraints


def minkowski(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


def inner(M: ModelManifold, u, v):
    """Riemannian inner product of two tangent vectors at the same point."""
    if M.kind is Kind.HYPERBOLIC:
        return minkowski(u, v)
    return np.sum(np.asarray(u, float) * np.asarray(v, float), axis=-1)


def norm(M: ModelManifold, v):
    return np.sqrt(np.maximum(inner(M, v, v), 0.0))


def _constraint_residual(M, x):
    if M.kind is Kind.SPHERE:
        return abs(float(x @ x) - 1.0)
    if M.kind is Kind.HYPERBOLIC:
        if x[0] < 1.0 - EMBED_TOL:
            return np.inf
        return abs(float(minkowski(x, x)) + 1.0)
    return 0.0


def check_point(M: ModelManifold, x, tol: float = EMBED_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (M.ambient_dim,):
        raise ConstraintViolation(f"expected shape ({M.ambient_dim},) for {M.kind.value}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ConstraintViolation("non-finite coordinates")
    # relative tolerance on the hyperboloid: |x|^2 grows like cosh(2r)
    scale = 1.0 if M.kind is not Kind.HYPERBOLIC else max(1.0, float(x @ x))
    if _constraint_residual(M, x) > tol * scale:
        raise ConstraintViolation(f"point {x} is off the {M.kind.value} (residual {_constraint_residual(M, x):.3e})")
    return x


def check_tangent(M: ModelManifold, x, v, tol: float = EMBED_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (M.ambient_dim,):
        raise ConstraintViolation(f"tangent vector has shape {v.shape}")
    if M.kind is not Kind.EUCLIDEAN:
        r = abs(float(inner(M, np.asarray(x, float), v)))
        if r > tol * max(1.0, float(np.abs(v).max(initial=0.0)) * float(np.abs(x).max())):
            raise ConstraintViolation(f"vector is not tangent at base point (residual {r:.3e})")
    return v


def project(M: ModelManifold, x) -> np.ndarray:
    """Nearest-ish point on M (renormalisation); used to clean up roundoff."""
    x = np.array(x, dtype=float)
    if M.kind is Kind.SPHERE:
        return x / np.linalg.norm(x, axis=-1, keepdims=True)
    if M.kind is Kind.HYPERBOLIC:
        x[..., 0] = np.sqrt(1.0 + np.sum(x[..., 1:] ** 2, axis=-1))
        return x
    return x


def project_tangent(M: ModelManifold, x, v) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if M.kind is Kind.SPHERE:
        return v - (v @ x) * x
    if M.kind is Kind.HYPERBOLIC:
        return v + minkowski(v, x) * x
    return v


def random_point(M: ModelManifold, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    if M.kind is Kind.EUCLIDEAN:
        return scale * rng.standard_normal(M.dim)
    if M.kind is Kind.SPHERE:
        return project(M, rng.standard_normal(M.dim + 1))
    x = np.zeros(M.dim + 1)
    x[1:] = scale * rng.standard_normal(M.dim)
    return project(M, x)


def origin(M: ModelManifold) -> np.ndarray:
    x = np.zeros(M.ambient_dim)
    if M.kind is not Kind.EUCLIDEAN:
        x[0] = 1.0
    return x


# ---------------------------------------------------------------------------
# distance, exp, log


def dist(M: ModelManifold, x, y) -> float:
    """Geodesic distance. Uses cancellation-free formulas at small distances."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    if M.kind is Kind.EUCLIDEAN:
        return float(np.sqrt(diff @ diff))
    if M.kind is Kind.SPHERE:
        s = x + y
        return float(2.0 * np.arctan2(np.sqrt(diff @ diff), np.sqrt(s @ s)))
    # <x - y, x - y>_L = 4 sinh^2(d / 2)
    q = max(float(minkowski(diff, diff)), 0.0)
    return float(2.0 * np.arcsinh(0.5 * np.sqrt(q)))


def exp_map(M: ModelManifold, x, v) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if M.kind is Kind.EUCLIDEAN:
        return x + v
    r = float(norm(M, v))
    if M.kind is Kind.SPHERE:
        y = np.cos(r) * x + np.sinc(r / np.pi) * v
    else:
        y = np.cosh(r) * x + (np.sinh(r) / r if r > 0 else 1.0) * v
    return project(M, y)


def log_map(M: ModelManifold, x, y) -> np.ndarray:
    """Inverse of :func:`exp_map`; raises :class:`CutLocusError` at sphere antipodes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if M.kind is Kind.EUCLIDEAN:
        return y - x
    d = dist(M, x, y)
    if M.kind is Kind.SPHERE:
        if d >= np.pi - CUT_TOL:
            raise CutLocusError(f"points at distance {d!r} are (nearly) antipodal")
        u = y - (x @ y) * x
    else:
        u = y + minkowski(x, y) * x
    nu = float(norm(M, u))
    if nu == 0.0 or d == 0.0:
        return np.zeros_like(x)
    return (d / nu) * u


def tangent_frame(M: ModelManifold, x) -> np.ndarray:
    """Orthonormal basis of ``T_x M`` as columns of an ``(ambient, m)`` array.

    Deterministic Gram-Schmidt over the embedding basis. On the sphere the
    basis vector most aligned with ``x`` (lowest index on ties) is dropped;
    on the hyperboloid the spatial basis vectors are used.
    """
    x = np.asarray(x, dtype=float)
    m = M.dim
    if M.kind is Kind.EUCLIDEAN:
        return np.eye(m)
    n = m + 1
    if M.kind is Kind.SPHERE:
        drop = int(np.argmax(np.abs(x)))
        cands = [k for k in range(n) if k != drop]
    else:
        cands = list(range(1, n))
    E = np.zeros((n, m))
    for col, k in enumerate(cands):
        e = np.zeros(n)
        e[k] = 1.0
        v = project_tangent(M, x, e)
        for _ in range(2):  # re-orthogonalise once for stability
            for j in range(col):
                v = v - inner(M, E[:, j], v) * E[:, j]
        E[:, col] = v / norm(M, v)
    return E


def to_frame(M: ModelManifold, x, v, frame=None) -> np.ndarray:
    """Coordinates of tangent vector(s) ``v`` at ``x`` in the orthonormal frame."""
    E = tangent_frame(M, x) if frame is None else frame
    v = np.asarray(v, dtype=float)
    if M.kind is Kind.HYPERBOLIC:
        Ev = E.copy()
        Ev[0] = -Ev[0]
        return Ev.T @ v
    return E.T @ v


def from_frame(M: ModelManifold, x, c, frame=None) -> np.ndarray:
    E = tangent_frame(M, x) if frame is None else frame
    return E @ np.asarray(c, dtype=float)


# ---------------------------------------------------------------------------
# second-order objects


def comparison_factor(M: ModelManifold, d: float) -> float:
    """Tangential eigenvalue of Hess d_y^2/2 at distance ``d``.

    1 (flat), d cot d (sphere), d coth d (hyperbolic).
    """
    d = float(d)
    if M.kind is Kind.EUCLIDEAN or d == 0.0:
        return 1.0
    if M.kind is Kind.SPHERE:
        if d < 1e-4:
            return 1.0 - d * d / 3.0
        return d / np.tan(d)
    if d < 1e-4:
        return 1.0 + d * d / 3.0
    return d / np.tanh(d)


def hess_half_dist_sq(M: ModelManifold, x, y, frame=None) -> np.ndarray:
    """Hessian at ``x`` of ``w -> d(w, y)^2 / 2`` in the frame at ``x``."""
    v = log_map(M, x, y)
    d = float(norm(M, v))
    m = M.dim
    if M.kind is Kind.EUCLIDEAN or d == 0.0:
        return np.eye(m)
    a = comparison_factor(M, d)
    u = to_frame(M, x, v / d, frame)
    u = u / np.linalg.norm(u)
    return a * np.eye(m) + (1.0 - a) * np.outer(u, u)


def laplacian_half_dist_sq(M: ModelManifold, x, y) -> float:
    d = float(norm(M, log_map(M, x, y)))
    return 1.0 + (M.dim - 1) * comparison_factor(M, d)


def laplacian_comparison_bound(M: ModelManifold, d: float) -> float:
    """``m sqrt(K) d / tanh(sqrt(K) d)``, read as ``m`` when ``K = 0``."""
    s = np.sqrt(M.K) * float(d)
    if s == 0.0:
        return float(M.dim)
    return float(M.dim * s / np.tanh(s))


def _sinc_terms(M, r):
    """(sn(r)/r, (sn'(r)/r - sn(r)/r^2)/r) for the exponential derivative."""
    if M.kind is Kind.SPHERE:
        a = np.sinc(r / np.pi)
        if r < 1e-4:
            b = -1.0 / 3.0 + r * r / 30.0
        else:
            b = (r * np.cos(r) - np.sin(r)) / r**3
        return a, b
    a = np.sinh(r) / r if r > 0 else 1.0
    if r < 1e-4:
        b = 1.0 / 3.0 + r * r / 30.0
    else:
        b = (r * np.cosh(r) - np.sinh(r)) / r**3
    return a, b


def dexp_ambient(M: ModelManifold, x, v) -> np.ndarray:
    """Ambient Jacobian of ``v -> exp_x(v)``, valid on tangent directions."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n = M.ambient_dim
    if M.kind is Kind.EUCLIDEAN:
        return np.eye(n)
    r = float(norm(M, v))
    a, b = _sinc_terms(M, r)
    # d/dv [c(r) x + s(r) v] applied to w with dr = <v, w>/r
    g = v.copy()
    if M.kind is Kind.HYPERBOLIC:
        g[0] = -g[0]  # row vector w -> <v, w>_L
    if M.kind is Kind.SPHERE:
        J = a * np.eye(n) - a * np.outer(x, g) + b * np.outer(v, g)
    else:
        J = a * np.eye(n) + a * np.outer(x, g) + b * np.outer(v, g)
    return J


def transport_frame(M: ModelManifold, x, v, frame=None) -> np.ndarray:
    """Parallel transport of the frame at ``x`` along ``t -> exp_x(t v)``, ``t`` in [0, 1].

    Keeps orientation, so determinants between the two frames are intrinsic.
    """
    E = tangent_frame(M, x) if frame is None else frame
    if M.kind is Kind.EUCLIDEAN:
        return E.copy()
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    r = float(norm(M, v))
    if r == 0.0:
        return E.copy()
    u = v / r
    if M.kind is Kind.SPHERE:
        c = u.T @ E
        return E + np.outer((np.cos(r) - 1.0) * u - np.sin(r) * x, c)
    ul = u.copy()
    ul[0] = -ul[0]
    c = ul @ E
    return E + np.outer((np.cosh(r) - 1.0) * u + np.sinh(r) * x, c)


def dexp_matrix(M: ModelManifold, x, v, frame=None) -> np.ndarray:
    """``d exp_x|_v`` as an ``m x m`` matrix.

    Source frame at ``x``; target frame is its parallel transport to
    ``exp_x v``, so the determinant carries an orientation.
    """
    Ex = tangent_frame(M, x) if frame is None else frame
    y = exp_map(M, x, v)
    J = dexp_ambient(M, x, v)
    return to_frame(M, y, J @ Ex, transport_frame(M, x, v, Ex))


def dist_matrix(M: ModelManifold, X, Y) -> np.ndarray:
    """Pairwise geodesic distances between the rows of ``X`` and ``Y``."""
    X = np.asarray(X, dtype=float)[:, None, :]
    Y = np.asarray(Y, dtype=float)[None, :, :]
    diff = X - Y
    if M.kind is Kind.EUCLIDEAN:
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if M.kind is Kind.SPHERE:
        s = X + Y
        return 2.0 * np.arctan2(np.sqrt(np.sum(diff * diff, -1)), np.sqrt(np.sum(s * s, -1)))
    q = np.maximum(minkowski(diff, diff), 0.0)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(q))
