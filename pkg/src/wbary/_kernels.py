"""Hot numeric kernels.

Two families live here:

* ``transport_simplex``: dense transportation simplex (north-west corner
  start, u-v potentials, stepping-stone cycles). Loop code, compiled with
  numba when enabled, otherwise run as plain Python.
* ``frechet_batch``: Riemannian gradient descent with Armijo backtracking
  for many weighted point tuples at once. The numba path is a per-tuple loop
  kernel; the fallback is a separate vectorised numpy implementation that
  advances every (tuple, start) run in lock-step.

Manifold codes: 1 = unit sphere, 2 = hyperboloid. Euclidean tuples never
reach this module (their mean is closed form).
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

SPHERE = 1
HYPERBOLIC = 2

CUT_TOL = 1e-9
ARMIJO_C = 1e-4
MAX_HALVINGS = 30
MAX_RETRIES = 5
TIE_TOL = 1e-9
_EPS = 2.220446049250313e-16


# ---------------------------------------------------------------------------
# transportation simplex


@njit
def transport_simplex(a, b, C, max_iter):
    """Solve min <C, X> over couplings of ``a`` and ``b``.

    Returns ``(X, basis, status)``; ``status`` is 0 on optimality, 1 when
    the pivot cap is reached.
    """
    s1 = a.shape[0]
    s2 = b.shape[0]
    X = np.zeros((s1, s2))
    basis = np.zeros((s1, s2), dtype=np.bool_)
    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    while True:
        x = min(ra[i], rb[j])
        X[i, j] = x
        basis[i, j] = True
        ra[i] -= x
        rb[j] -= x
        if i == s1 - 1 and j == s2 - 1:
            break
        if i == s1 - 1:
            j += 1
        elif j == s2 - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1

    cmax = 0.0
    for p in range(s1):
        for q in range(s2):
            if abs(C[p, q]) > cmax:
                cmax = abs(C[p, q])
    rtol = 1e-12 * max(cmax, 1.0)

    nn = s1 + s2
    u = np.zeros(s1)
    v = np.zeros(s2)
    seen = np.zeros(nn, dtype=np.bool_)
    queue = np.zeros(nn, dtype=np.int64)
    parent = np.zeros(nn, dtype=np.int64)
    cyc_r = np.zeros(nn, dtype=np.int64)
    cyc_c = np.zeros(nn, dtype=np.int64)

    status = 1
    for _ in range(max_iter):
        # potentials: u_i + v_j = C_ij on basic cells (tree rooted at row 0)
        seen[:] = False
        seen[0] = True
        u[0] = 0.0
        queue[0] = 0
        head = 0
        tail = 1
        while head < tail:
            node = queue[head]
            head += 1
            if node < s1:
                for q in range(s2):
                    if basis[node, q] and not seen[s1 + q]:
                        v[q] = C[node, q] - u[node]
                        seen[s1 + q] = True
                        queue[tail] = s1 + q
                        tail += 1
            else:
                q = node - s1
                for p in range(s1):
                    if basis[p, q] and not seen[p]:
                        u[p] = C[p, q] - v[q]
                        seen[p] = True
                        queue[tail] = p
                        tail += 1

        best = -rtol
        ei = -1
        ej = -1
        for p in range(s1):
            for q in range(s2):
                if not basis[p, q]:
                    r = C[p, q] - u[p] - v[q]
                    if r < best:
                        best = r
                        ei = p
                        ej = q
        if ei < 0:
            status = 0
            break

        # path in the basis tree from row ei to column ej
        seen[:] = False
        seen[ei] = True
        parent[ei] = -1
        queue[0] = ei
        head = 0
        tail = 1
        target = s1 + ej
        while head < tail and not seen[target]:
            node = queue[head]
            head += 1
            if node < s1:
                for q in range(s2):
                    if basis[node, q] and not seen[s1 + q]:
                        seen[s1 + q] = True
                        parent[s1 + q] = node
                        queue[tail] = s1 + q
                        tail += 1
            else:
                q = node - s1
                for p in range(s1):
                    if basis[p, q] and not seen[p]:
                        seen[p] = True
                        parent[p] = node
                        queue[tail] = p
                        tail += 1
        # walk back from the column: cells alternate -, +, -, ... ending at row ei
        k = 0
        node = target
        while parent[node] >= 0:
            pn = parent[node]
            if node >= s1:
                cyc_r[k] = pn
                cyc_c[k] = node - s1
            else:
                cyc_r[k] = node
                cyc_c[k] = pn - s1
            k += 1
            node = pn
        theta = np.inf
        li = -1
        lj = -1
        for t in range(0, k, 2):
            val = X[cyc_r[t], cyc_c[t]]
            if val < theta:
                theta = val
                li = cyc_r[t]
                lj = cyc_c[t]
        for t in range(k):
            if t % 2 == 0:
                X[cyc_r[t], cyc_c[t]] -= theta
            else:
                X[cyc_r[t], cyc_c[t]] += theta
        X[ei, ej] += theta
        basis[ei, ej] = True
        basis[li, lj] = False
        X[li, lj] = 0.0
    for p in range(s1):
        for q in range(s2):
            if X[p, q] < 0.0:
                X[p, q] = 0.0
    return X, basis, status


# ---------------------------------------------------------------------------
# per-point geometry for the loop kernel


@njit
def _mink(u, v):
    s = -u[0] * v[0]
    for k in range(1, u.shape[0]):
        s += u[k] * v[k]
    return s


@njit
def _ip(kind, u, v):
    if kind == HYPERBOLIC:
        return _mink(u, v)
    s = 0.0
    for k in range(u.shape[0]):
        s += u[k] * v[k]
    return s


@njit
def _dist(kind, x, y):
    D = x.shape[0]
    if kind == SPHERE:
        dd = 0.0
        ss = 0.0
        for k in range(D):
            dd += (x[k] - y[k]) ** 2
            ss += (x[k] + y[k]) ** 2
        return 2.0 * math.atan2(math.sqrt(dd), math.sqrt(ss))
    q = -((x[0] - y[0]) ** 2)
    for k in range(1, D):
        q += (x[k] - y[k]) ** 2
    if q < 0.0:
        q = 0.0
    return 2.0 * math.asinh(0.5 * math.sqrt(q))


@njit
def _log(kind, x, y, out):
    """Write log_x(y) to ``out``; return the distance, or -1 in the cut locus."""
    D = x.shape[0]
    d = _dist(kind, x, y)
    if kind == SPHERE:
        if d >= math.pi - CUT_TOL:
            return -1.0
        c = 0.0
        for k in range(D):
            c += x[k] * y[k]
        for k in range(D):
            out[k] = y[k] - c * x[k]
    else:
        c = _mink(x, y)
        for k in range(D):
            out[k] = y[k] + c * x[k]
    nu = _ip(kind, out, out)
    nu = math.sqrt(nu) if nu > 0.0 else 0.0
    if nu == 0.0 or d == 0.0:
        for k in range(D):
            out[k] = 0.0
        return 0.0
    f = d / nu
    for k in range(D):
        out[k] *= f
    return d


@njit
def _exp(kind, x, v, out):
    D = x.shape[0]
    nv = _ip(kind, v, v)
    r = math.sqrt(nv) if nv > 0.0 else 0.0
    if kind == SPHERE:
        c = math.cos(r)
        s = math.sin(r) / r if r > 0.0 else 1.0
        nrm = 0.0
        for k in range(D):
            out[k] = c * x[k] + s * v[k]
            nrm += out[k] * out[k]
        nrm = math.sqrt(nrm)
        for k in range(D):
            out[k] /= nrm
    else:
        c = math.cosh(r)
        s = math.sinh(r) / r if r > 0.0 else 1.0
        sp = 0.0
        for k in range(D):
            out[k] = c * x[k] + s * v[k]
            if k > 0:
                sp += out[k] * out[k]
        out[0] = math.sqrt(1.0 + sp)


@njit
def _half_cost(kind, w, X, lam):
    f = 0.0
    for i in range(X.shape[0]):
        d = _dist(kind, w, X[i])
        f += lam[i] * d * d
    return 0.5 * f


@njit
def _nudge(kind, w, retry, out):
    """Deterministic small move off a cut-locus encounter."""
    D = w.shape[0]
    e = np.zeros(D)
    e[(retry + 1) % D] = 1.0
    c = _ip(kind, e, w)
    for k in range(D):
        e[k] = e[k] - c * w[k] if kind == SPHERE else e[k] + c * w[k]
    ne = _ip(kind, e, e)
    if ne <= 1e-24:
        e[:] = 0.0
        e[retry % D] = 1.0
        c = _ip(kind, e, w)
        for k in range(D):
            e[k] = e[k] - c * w[k] if kind == SPHERE else e[k] + c * w[k]
        ne = _ip(kind, e, e)
    step = 1e-3 * (retry + 1) / math.sqrt(ne)
    for k in range(D):
        e[k] *= step
    _exp(kind, w, e, out)


@njit
def _descend(kind, X, lam, start, tol, max_iter, w_out):
    """Gradient descent from one start; returns (half-cost, grad norm, iterations, ok)."""
    n = X.shape[0]
    D = X.shape[1]
    w = start.copy()
    wn = np.zeros(D)
    L = np.zeros(D)
    g = np.zeros(D)
    retries = 0
    it = 0
    gn = np.inf
    ok = False
    while it <= max_iter:
        g[:] = 0.0
        F = 0.0
        bad = False
        for i in range(n):
            d = _log(kind, w, X[i], L)
            if d < 0.0:
                bad = True
                break
            F += 0.5 * lam[i] * d * d
            for k in range(D):
                g[k] -= lam[i] * L[k]
        if bad:
            if retries >= MAX_RETRIES:
                break
            _nudge(kind, w, retries, wn)
            w[:] = wn
            retries += 1
            continue
        gsq = _ip(kind, g, g)
        gn = math.sqrt(gsq) if gsq > 0.0 else 0.0
        if gn <= tol:
            ok = True
            break
        if it == max_iter:
            break
        t = 1.0
        accepted = False
        for _h in range(MAX_HALVINGS + 1):
            for k in range(D):
                L[k] = -t * g[k]
            _exp(kind, w, L, wn)
            Fn = _half_cost(kind, wn, X, lam)
            if Fn <= F - ARMIJO_C * t * gsq + 8.0 * _EPS * F:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        w[:] = wn
        it += 1
    w_out[:] = w
    return _half_cost(kind, w, X, lam), gn, it, ok


@njit
def _lex_less(a, b):
    for k in range(a.shape[0]):
        if a[k] < b[k]:
            return True
        if a[k] > b[k]:
            return False
    return False


@njit
def _frechet_batch_loop(kind, X, lam, starts, tol, max_iter):
    T = X.shape[0]
    S = starts.shape[1]
    D = X.shape[2]
    means = np.zeros((T, D))
    costs = np.zeros(T)
    gnorms = np.zeros(T)
    iters = np.zeros(T, dtype=np.int64)
    spread = np.zeros(T)
    oks = np.zeros(T, dtype=np.bool_)
    cand = np.zeros((S, D))
    cf = np.zeros(S)
    cg = np.zeros(S)
    cok = np.zeros(S, dtype=np.bool_)
    for t in range(T):
        total_it = 0
        for s in range(S):
            f, gn, it, ok = _descend(kind, X[t], lam, starts[t, s], tol, max_iter, cand[s])
            cf[s] = f
            cg[s] = gn
            cok[s] = ok
            total_it += it
        best = -1
        for s in range(S):
            if cok[s] and (best < 0 or cf[s] < cf[best]):
                best = s
        if best < 0:
            # report the lowest-cost iterate even without convergence
            best = 0
            for s in range(1, S):
                if cf[s] < cf[best]:
                    best = s
            oks[t] = False
        else:
            fbest = cf[best]
            for s in range(S):
                if cok[s] and cf[s] <= fbest + TIE_TOL and _lex_less(cand[s], cand[best]):
                    best = s
            oks[t] = True
        sp = 0.0
        for s in range(S):
            if not cok[s]:
                continue
            for r in range(s + 1, S):
                if cok[r]:
                    d = _dist(kind, cand[s], cand[r])
                    if d > sp:
                        sp = d
        means[t] = cand[best]
        costs[t] = 2.0 * cf[best]
        gnorms[t] = cg[best]
        iters[t] = total_it
        spread[t] = sp
    return means, costs, gnorms, iters, spread, oks


# ---------------------------------------------------------------------------
# vectorised numpy fallback


def _vmink(u, v):
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


def _vip(kind, u, v):
    return _vmink(u, v) if kind == HYPERBOLIC else np.sum(u * v, axis=-1)


def _vdist(kind, x, y):
    diff = x - y
    if kind == SPHERE:
        s = x + y
        return 2.0 * np.arctan2(np.sqrt(np.sum(diff * diff, -1)), np.sqrt(np.sum(s * s, -1)))
    q = np.maximum(_vmink(diff, diff), 0.0)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(q))


def _vlog(kind, x, y):
    """Batched log_x(y); returns (vectors, distances, cut-locus mask)."""
    d = _vdist(kind, x, y)
    if kind == SPHERE:
        cut = d >= np.pi - CUT_TOL
        u = y - np.sum(x * y, -1)[..., None] * x
    else:
        cut = np.zeros(d.shape, dtype=bool)
        u = y + _vmink(x, y)[..., None] * x
    nu = np.sqrt(np.maximum(_vip(kind, u, u), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where((nu > 0) & (d > 0), d / np.where(nu > 0, nu, 1.0), 0.0)
    return u * f[..., None], d, cut


def _vexp(kind, x, v):
    r = np.sqrt(np.maximum(_vip(kind, v, v), 0.0))
    if kind == SPHERE:
        y = np.cos(r)[..., None] * x + np.sinc(r / np.pi)[..., None] * v
        return y / np.linalg.norm(y, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        s = np.where(r > 0, np.sinh(r) / np.where(r > 0, r, 1.0), 1.0)
    y = np.cosh(r)[..., None] * x + s[..., None] * v
    y[..., 0] = np.sqrt(1.0 + np.sum(y[..., 1:] ** 2, axis=-1))
    return y


def _vnudge(kind, w, retry):
    D = w.shape[-1]
    e = np.zeros_like(w)
    e[..., (retry + 1) % D] = 1.0
    c = _vip(kind, e, w)[..., None]
    e = e - c * w if kind == SPHERE else e + c * w
    ne = np.sqrt(np.maximum(_vip(kind, e, e), 1e-300))
    return _vexp(kind, w, e * (1e-3 * (retry + 1) / ne)[..., None])


def _frechet_batch_numpy(kind, X, lam, starts, tol, max_iter):
    T, n, D = X.shape
    S = starts.shape[1]
    Xr = np.repeat(X, S, axis=0)  # (R, n, D), run r = t * S + s
    W = starts.reshape(T * S, D).copy()
    R = W.shape[0]
    active = np.ones(R, dtype=bool)
    ok = np.zeros(R, dtype=bool)
    its = np.zeros(R, dtype=np.int64)
    retries = np.zeros(R, dtype=np.int64)
    lam_b = lam[None, :]

    def evaluate(Wa, Xa):
        L, d, cut = _vlog(kind, Wa[:, None, :], Xa)
        F = 0.5 * np.sum(lam_b * d * d, axis=1)
        g = -np.sum(lam[None, :, None] * L, axis=1)
        return F, g, np.any(cut, axis=1)

    gn = np.full(R, np.inf)
    for _ in range(max_iter + MAX_RETRIES + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        F, g, cut = evaluate(W[idx], Xr[idx])
        if np.any(cut):
            ci = idx[cut]
            give_up = retries[ci] >= MAX_RETRIES
            active[ci[give_up]] = False
            ci = ci[~give_up]
            for rr in np.unique(retries[ci]):
                sel = ci[retries[ci] == rr]
                W[sel] = _vnudge(kind, W[sel], int(rr))
            retries[ci] += 1
            keep = ~cut
            idx, F, g = idx[keep], F[keep], g[keep]
        gsq = _vip(kind, g, g)
        gn[idx] = np.sqrt(np.maximum(gsq, 0.0))
        done = gn[idx] <= tol
        ok[idx[done]] = True
        active[idx[done]] = False
        capped = ~done & (its[idx] >= max_iter)
        active[idx[capped]] = False
        step = ~done & ~capped
        idx, F, g, gsq = idx[step], F[step], g[step], gsq[step]
        if idx.size == 0:
            continue
        t = np.ones(idx.size)
        Wn = W[idx].copy()
        pending = np.ones(idx.size, dtype=bool)
        for _h in range(MAX_HALVINGS + 1):
            p = np.flatnonzero(pending)
            if p.size == 0:
                break
            cand = _vexp(kind, W[idx[p]], -t[p, None] * g[p])
            d = _vdist(kind, cand[:, None, :], Xr[idx[p]])
            Fn = 0.5 * np.sum(lam_b * d * d, axis=1)
            acc = Fn <= F[p] - ARMIJO_C * t[p] * gsq[p] + 8.0 * _EPS * F[p]
            Wn[p[acc]] = cand[acc]
            pending[p[acc]] = False
            t[p[~acc]] *= 0.5
        stalled = pending
        active[idx[stalled]] = False
        moved = ~stalled
        W[idx[moved]] = Wn[moved]
        its[idx[moved]] += 1

    dfin = _vdist(kind, W[:, None, :], Xr)
    Ffin = 0.5 * np.sum(lam_b * dfin * dfin, axis=1)

    W = W.reshape(T, S, D)
    Ffin = Ffin.reshape(T, S)
    okm = ok.reshape(T, S)
    gnm = gn.reshape(T, S)
    itm = its.reshape(T, S)
    means = np.zeros((T, D))
    costs = np.zeros(T)
    gnorms = np.zeros(T)
    spread = np.zeros(T)
    oks = okm.any(axis=1)
    for t_ in range(T):
        cands = np.flatnonzero(okm[t_])
        if cands.size == 0:
            best = int(np.argmin(Ffin[t_]))
        else:
            fb = Ffin[t_, cands].min()
            tied = [s for s in cands if Ffin[t_, s] <= fb + TIE_TOL]
            best = min(tied, key=lambda s: tuple(W[t_, s]))
            if cands.size > 1:
                P = W[t_, cands]
                spread[t_] = _vdist(kind, P[:, None, :], P[None, :, :]).max()
        means[t_] = W[t_, best]
        costs[t_] = 2.0 * Ffin[t_, best]
        gnorms[t_] = gnm[t_, best]
    return means, costs, gnorms, itm.sum(axis=1), spread, oks


def frechet_batch(kind, X, lam, starts, tol, max_iter, backend=None):
    """Weighted Fréchet means of ``T`` tuples with a multistart schedule.

    Parameters
    ----------
    kind : int
        ``SPHERE`` or ``HYPERBOLIC``.
    X : (T, n, D) array
        Point tuples in embedding coordinates.
    lam : (n,) array
        Positive weights summing to one.
    starts : (T, S, D) array
        Initial iterates per tuple.
    backend : {"numba", "numpy", None}
        ``None`` follows ``WBARY_NUMBA``.

    Returns
    -------
    means, costs (sum lam_i d^2), grad norms, iteration counts, multistart
    spread, converged flags.
    """
    X = np.ascontiguousarray(X, dtype=float)
    lam = np.ascontiguousarray(lam, dtype=float)
    starts = np.ascontiguousarray(starts, dtype=float)
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        return _frechet_batch_loop(int(kind), X, lam, starts, float(tol), int(max_iter))
    return _frechet_batch_numpy(int(kind), X, lam, starts, float(tol), int(max_iter))
