"""Integral functionals of densities and the uniform-integrability gauge.

A gauge is a convex ``G`` with ``G = 0`` on ``[0, 1]`` built from a family of
densities so that ``sup_f int G(f) <= 1``. It is assembled from smooth bumps
``gamma`` placed on ``(alpha_n, alpha_n + 1)``:

    H(x) = int_0^x e^{-s} int_0^s gamma(t) e^t dt ds = int_0^x gamma(t) (1 - e^{t-x}) dt
    G(x) = H(log x) x

so ``H' + H'' = gamma`` and ``G''(x) = gamma(log x) / x``.

Densities live on cell-centred grids over boxes in a Euclidean chart and all
integrals over them are Riemann sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ALPHA = 64
GAP_BOUND = (1.0 - np.exp(-1.0 / 3.0)) ** 2
INV_E = np.exp(-1.0)
ENTROPY_SLACK = 1e-6

# Gauss-Legendre rule used for the partial-bump integrals: each of the three
# pieces [0, 1/3], [1/3, 2/3], [2/3, 1] (cut at the current upper limit) is
# split into _PANELS equal panels with _GL_NODES nodes each.
_GL_NODES = 20
_PANELS = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_NODES)


class GaugeError(ValueError):
    pass


class GridMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# densities on grids


@dataclass
class GridDensity:
    """Nonnegative function sampled at the cell centres of a box grid."""

    lo: np.ndarray
    hi: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.lo.shape[0] or self.hi.shape != self.lo.shape:
            raise GridMismatch("values must have one axis per box dimension")
        if np.any(self.hi <= self.lo):
            raise GridMismatch("empty box")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("density values must be finite and nonnegative")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def cell_volume(self) -> float:
        return float(np.prod((self.hi - self.lo) / np.asarray(self.shape)))

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def axes(self) -> list:
        return [self.lo[k] + (np.arange(n) + 0.5) * (self.hi[k] - self.lo[k]) / n for k, n in enumerate(self.shape)]

    def centers(self) -> np.ndarray:
        """Cell centres, shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def same_grid(self, other: "GridDensity") -> bool:
        return self.shape == other.shape and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def check_probability(self, tol: float = 1e-6) -> "GridDensity":
        if abs(self.mass() - 1.0) > tol:
            raise ValueError(f"grid density has mass {self.mass()!r}")
        return self

    @classmethod
    def from_function(cls, fn, lo, hi, res) -> "GridDensity":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        res = tuple(np.broadcast_to(np.asarray(res, dtype=int), lo.shape))
        g = cls(lo, hi, np.zeros(res))
        g.values = np.asarray(fn(g.centers()), dtype=float)
        return cls(g.lo, g.hi, g.values)


def _check_family(family):
    family = list(family)
    if not family:
        raise GridMismatch("empty family")
    for f in family[1:]:
        if not f.same_grid(family[0]):
            raise GridMismatch("family members must share one grid")
    return family


def tail_profile(family, thresholds) -> np.ndarray:
    """``sup_f int_{f > C} f`` for each threshold ``C`` (strict inequality)."""
    family = _check_family(family)
    C = np.atleast_1d(np.asarray(thresholds, dtype=float))
    out = np.zeros(C.shape)
    for f in family:
        v = np.sort(f.values.ravel())
        csum = np.concatenate([np.cumsum(v[::-1])[::-1], [0.0]])  # csum[k] = sum v[k:]
        k = np.searchsorted(v, C, side="right")
        out = np.maximum(out, csum[k] * f.cell_volume)
    return out


# ---------------------------------------------------------------------------
# the bump and its moments


def _psi(t):
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, ``psi(t) / (psi(t) + psi(1 - t))`` between."""
    a = _psi(t)
    return a / (a + _psi(1.0 - np.asarray(t, dtype=float)))


def bump(u):
    """Unit bump on [0, 1]: ``smoothstep(3u) smoothstep(3 - 3u)``, equal to 1 on [1/3, 2/3]."""
    u = np.asarray(u, dtype=float)
    return smoothstep(3.0 * u) * smoothstep(3.0 - 3.0 * u)


def _bump_integral(s, weight):
    """``int_0^s bump(u) w(u) du`` for ``s`` in [0, 1]; ``weight`` is 'one' or 'exp'."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    total = np.zeros(s.shape)
    for a, b in ((0.0, 1 / 3), (1 / 3, 2 / 3), (2 / 3, 1.0)):
        c = np.clip(s, a, b)
        h = (c - a) / _PANELS
        for p in range(_PANELS):
            left = a + p * h
            u = left[..., None] + 0.5 * h[..., None] * (_GL_X + 1.0)
            f = bump(u) if (a, b) != (1 / 3, 2 / 3) else np.ones(u.shape)
            if weight == "exp":
                f = f * np.exp(u)
            total += 0.5 * h * np.sum(_GL_W * f, axis=-1)
    return total


P_FULL = float(_bump_integral(1.0, "one"))
Q_FULL = float(_bump_integral(1.0, "exp"))


# ---------------------------------------------------------------------------
# gauges


@dataclass
class IntegrabilityGauge:
    """``G(x) = H(log x) x`` with bumps on ``(alpha_n, alpha_n + 1)``."""

    alpha: np.ndarray
    L_H: float = 1.0
    _ea: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.int64)
        if self.alpha.size == 0 or self.alpha[0] < 0 or np.any(np.diff(self.alpha) < 1):
            raise GaugeError("alpha must be nonnegative, strictly increasing integers")
        if self.alpha[-1] > 700:
            raise GaugeError("alpha too large to represent")
        self._ea = np.concatenate([[0.0], np.cumsum(np.exp(self.alpha.astype(float)))])

    def gamma(self, x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.alpha, np.floor(x), side="left")
        k = np.minimum(k, self.alpha.size - 1)
        a = self.alpha[k]
        return np.where((x > a) & (x < a + 1), bump(x - a), 0.0)

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        full = np.searchsorted(self.alpha + 1, x, side="right")  # bumps with alpha + 1 <= x
        part = np.minimum(full, self.alpha.size - 1)
        a = self.alpha[part].astype(float)
        s = np.where((full < self.alpha.size) & (x > a), np.clip(x - a, 0.0, 1.0), 0.0)
        return full, a, s

    def H(self, x):
        x0 = np.asarray(x, dtype=float)
        x = np.maximum(np.atleast_1d(x0), 0.0)  # H vanishes on x <= 0
        full, a, s = self._split(x)
        out = full * P_FULL - np.exp(-x) * self._ea[full] * Q_FULL
        part = s > 0
        if np.any(part):
            xs, as_, ss = x[part], a[part], s[part]
            out[part] += _bump_integral(ss, "one") - np.exp(as_ - xs) * _bump_integral(ss, "exp")
        return np.where(x > 0, out, 0.0).reshape(x0.shape)

    def H_prime(self, x):
        x0 = np.asarray(x, dtype=float)
        x = np.maximum(np.atleast_1d(x0), 0.0)
        full, a, s = self._split(x)
        out = np.exp(-x) * self._ea[full] * Q_FULL
        part = s > 0
        if np.any(part):
            out[part] += np.exp(a[part] - x[part]) * _bump_integral(s[part], "exp")
        return np.where(x > 0, out, 0.0).reshape(x0.shape)

    def G(self, x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        lx = np.log(np.where(pos, x, 1.0))
        return np.where(pos, self.H(lx) * x, 0.0)

    def G_second(self, x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        return np.where(pos, self.gamma(np.log(np.where(pos, x, 1.0))) / np.where(pos, x, 1.0), 0.0)

    def gaps(self) -> np.ndarray:
        """``H(alpha_n + 1) - H(alpha_n)`` for every bump."""
        a = self.alpha.astype(float)
        return self.H(a + 1.0) - self.H(a)

    def to_dict(self) -> dict:
        return {"alpha": [int(a) for a in self.alpha], "L_H": self.L_H}


@dataclass
class ClampedEntropy:
    """``G(x) = x log x + 1/e`` for ``x > 1/e`` and 0 below; ``H(y) = y + e^{-1-y}`` for ``y > -1``."""

    L_H: float = 1.0

    def G(self, x):
        x = np.asarray(x, dtype=float)
        act = x > INV_E
        return np.where(act, np.where(act, x, 1.0) * np.log(np.where(act, x, 1.0)) + INV_E, 0.0)

    def H(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y > -1.0, y + np.exp(-1.0 - y), 0.0)

    def H_prime(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y > -1.0, 1.0 - np.exp(-1.0 - y), 0.0)

    def to_dict(self) -> dict:
        return {"kind": "clamped_entropy", "L_H": self.L_H}


def build_gauge(family, extend: int = 0, max_alpha: int = MAX_ALPHA) -> IntegrabilityGauge:
    """Gauge for a finite family of grid densities.

    ``alpha(n)`` is the least integer above ``alpha(n-1)`` with
    ``sup_f int_{f > e^alpha} f <= 2^-(n+1)``; the schedule stops at the first
    ``n`` whose tail is exactly 0. ``extend`` appends further bumps at the
    following integers (their tail is 0 too), which makes ``H`` larger at
    infinity without affecting ``int G(f)``.
    """
    family = _check_family(family)
    alpha = []
    a = 0
    n = 0
    while True:
        while True:
            if a > max_alpha:
                raise GaugeError(f"tail above e^{max_alpha} does not meet the 2^-{n + 1} schedule")
            t = float(tail_profile(family, [np.exp(a)])[0])
            if t <= 2.0 ** -(n + 1):
                break
            a += 1
        alpha.append(a)
        if t == 0.0:
            break
        a += 1
        n += 1
    alpha.extend(alpha[-1] + 1 + np.arange(int(extend)))
    return IntegrabilityGauge(np.asarray(alpha))


# ---------------------------------------------------------------------------
# functionals


def displacement_functional(f: GridDensity, G) -> float:
    """Riemann sum of ``G(f)`` over the grid."""
    return float(np.sum(G.G(f.values)) * f.cell_volume)


def bgl_membership(f: GridDensity, G, L: float) -> bool:
    return displacement_functional(f, G) <= L


def ui_threshold(gauge: IntegrabilityGauge, eps: float, x_max: float = 800.0):
    """Least ``C`` (to bisection accuracy) with ``G(C)/C = H(log C) >= 2/eps``, or None."""
    target = 2.0 / eps
    if float(gauge.H(np.array([x_max]))[0]) < target:
        return None
    lo, hi = 0.0, x_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(gauge.H(np.array([mid]))[0]) >= target:
            hi = mid
        else:
            lo = mid
    return float(np.exp(hi))


@dataclass
class EntropyReport:
    lhs: float  # int G(fbar)
    rhs: float
    marginal_term: float  # sum_i (lam_i / Lam) int G(g_i)
    curvature_term: float  # L_H K W2sq / (2 Lam)
    dimension_term: float  # L_H (m^2 + 2m) / (2 Lam)
    Lam: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + ENTROPY_SLACK


def entropy_inequality_check(densities, lam, fbar: GridDensity, K: float, W2sq: float, G=None,
                             L_H: float = None) -> EntropyReport:
    """``int G(fbar) <= sum (lam_i/Lam) int G(g_i) + L_H K W2sq/(2 Lam) + L_H (m^2+2m)/(2 Lam)``.

    ``lam`` holds the weights of the absolutely continuous marginals only;
    ``Lam = sum(lam)`` may be below 1 when the rest of the ensemble is
    carried by other measures.
    """
    densities = list(densities)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (len(densities),):
        raise ValueError("one weight per density required")
    Lam = float(lam.sum())
    if Lam <= 0:
        raise ValueError("total weight of the densities must be positive")
    for g in densities:
        if not g.same_grid(fbar):
            raise GridMismatch("densities and barycenter must share one grid")
    if G is None:
        G = ClampedEntropy()
    if L_H is None:
        L_H = G.L_H
    m = fbar.dim
    lhs = displacement_functional(fbar, G)
    marg = float(sum(l / Lam * displacement_functional(g, G) for l, g in zip(lam, densities)))
    curv = L_H * K * W2sq / (2.0 * Lam)
    dimt = L_H * (m * m + 2 * m) / (2.0 * Lam)
    return EntropyReport(lhs, marg + curv + dimt, marg, curv, dimt, Lam)


# ---------------------------------------------------------------------------
# Gaussian instances


def gaussian_w2sq(m1, S1, m2, S2) -> float:
    """Closed-form squared W2 between N(m1, S1) and N(m2, S2)."""
    from .regularity import _sqrtm_psd

    R = _sqrtm_psd(np.atleast_2d(S1))
    cross = _sqrtm_psd(R @ np.atleast_2d(S2) @ R)
    d = np.atleast_1d(m1) - np.atleast_1d(m2)
    return float(d @ d + np.trace(S1) + np.trace(S2) - 2.0 * np.trace(cross))


def gaussian_grid(mean, cov, lo, hi, res) -> GridDensity:
    from .regularity import gaussian_pdf

    return GridDensity.from_function(lambda x: gaussian_pdf(x, mean, cov), lo, hi, res)


@dataclass
class GaussianInstance:
    lam: np.ndarray
    means: list
    covs: list
    bary_mean: np.ndarray
    bary_cov: np.ndarray
    W2sq: float  # sum_i lam_i W2^2(mu_i, bary)
    densities: list = field(repr=False)
    fbar: GridDensity = field(repr=False)


def gaussian_instance(lam, means, covs, lo, hi, res) -> GaussianInstance:
    """Grid densities of Gaussian marginals and of their exact barycenter."""
    from .regularity import gaussian_barycenter_cov

    lam = np.asarray(lam, dtype=float)
    means = [np.atleast_1d(np.asarray(m, float)) for m in means]
    covs = [np.atleast_2d(np.asarray(c, float)) for c in covs]
    S = gaussian_barycenter_cov(lam, covs)
    mbar = sum(l * m for l, m in zip(lam, means))
    W = float(sum(l * gaussian_w2sq(m, c, mbar, S) for l, m, c in zip(lam, means, covs)))
    dens = [gaussian_grid(m, c, lo, hi, res) for m, c in zip(means, covs)]
    return GaussianInstance(lam, means, covs, mbar, S, W, dens, gaussian_grid(mbar, S, lo, hi, res))


def random_gaussian_instance(seed: int, m: int = 2, k: int = 2, res: int = 128) -> GaussianInstance:
    """Seeded instance: ``k`` Gaussians in R^m with random means, covariances and weights."""
    rng = np.random.Generator(np.random.Philox(seed))
    lam = rng.dirichlet(np.full(k, 2.0))
    means = [rng.uniform(-2.0, 2.0, m) for _ in range(k)]
    covs = []
    for _ in range(k):
        B = rng.normal(size=(m, m))
        Q, _ = np.linalg.qr(B)
        covs.append(Q @ np.diag(rng.uniform(0.05, 1.0, m)) @ Q.T)
    half = 8.0
    return gaussian_instance(lam, means, covs, np.full(m, -half), np.full(m, half), res)


__all__ = [
    "ClampedEntropy",
    "EntropyReport",
    "GAP_BOUND",
    "GaugeError",
    "GaussianInstance",
    "GridDensity",
    "GridMismatch",
    "IntegrabilityGauge",
    "bgl_membership",
    "bump",
    "build_gauge",
    "displacement_functional",
    "entropy_inequality_check",
    "gaussian_grid",
    "gaussian_instance",
    "gaussian_w2sq",
    "random_gaussian_instance",
    "smoothstep",
    "tail_profile",
    "ui_threshold",
]
