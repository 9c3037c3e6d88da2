"""First-order region: boundary, achieving-distribution set, tangents, feasible directions.

For a joint input ``P`` the achievable set is the trapezoid
``{R1 <= i1(P), R1 + R2 <= i12(P)}``; the capacity region is their union over
``P``. Because ``i1`` and ``i12`` are concave in ``P`` the union is convex,
and its support in a direction ``(lam, 1 - lam)`` with ``lam >= 1/2`` is
attained at a trapezoid corner maximizing ``mu*i1 + (1 - mu)*i12`` with
``mu = (2 lam - 1) / lam``. Directions with ``lam < 1/2`` are supported at
``(0, max i12)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .channel import Channel, JointInput, as_joint_input, check_compatible
from .infogeom import mean_vector

SMOOTH = 1e-9
GAP_TOL = 1e-11
MAX_ITERS = 5000
MAX_REJECTS = 40
DEDUP_LINF = 1e-3
ON_BOUNDARY_TOL = 1e-6
CORNER_ANGLE = 1e-3


# ---------------------------------------------------------------------------
# batched information quantities and their exact gradients

def _info_batch(p: np.ndarray, w: np.ndarray):
    """``(i1, i12)`` for a batch of joint inputs ``p[b, x1, x2]``."""
    joint = p[..., None] * w
    s = joint.sum(axis=1)
    px2 = p.sum(axis=1)
    py = s.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = s / px2[..., None]
        lw = np.log(w)
        l1 = lw - np.log(q)[:, None]
        l12 = lw - np.log(py)[:, None, None]
    live = joint > 0
    i1 = (joint * np.where(live, l1, 0.0)).sum(axis=(1, 2, 3))
    i12 = (joint * np.where(live, l12, 0.0)).sum(axis=(1, 2, 3))
    return i1, i12


def _grad_batch(p: np.ndarray, w: np.ndarray):
    """Gradients of ``i1`` and ``i12`` with respect to ``P(x1, x2)``.

    ``d i1 / d P(a, b) = D(W_ab || P_{Y|X2=b})`` and
    ``d i12 / d P(a, b) = D(W_ab || P_Y) - 1``. Evaluated at a slightly
    smoothed input so that every conditional output law is defined.
    """
    k = p.shape[1] * p.shape[2]
    ps = (1.0 - SMOOTH) * p + SMOOTH / k
    joint = ps[..., None] * w
    s = joint.sum(axis=1)
    q = s / ps.sum(axis=1)[..., None]
    py = s.sum(axis=1)
    pos = w > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = np.where(pos, np.log(w), 0.0)
        g1 = np.where(pos, w * (lw - np.log(q)[:, None]), 0.0).sum(axis=-1)
        g12 = np.where(pos, w * (lw - np.log(py)[:, None, None]), 0.0).sum(axis=-1) - 1.0
    return g1, g12


def _halton(count: int, dim: int) -> np.ndarray:
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53]
    out = np.empty((count, dim))
    for j in range(dim):
        base = primes[j % len(primes)]
        for i in range(count):
            f, r, x = 1.0, 0.0, i + 1
            while x > 0:
                f /= base
                r += f * (x % base)
                x //= base
            out[i, j] = r
    return out


def simplex_starts(count: int, shape: tuple[int, int]) -> np.ndarray:
    """Deterministic low-discrepancy points in the interior of the simplex.

    The first start is the uniform distribution; the rest map Halton points
    through ``-log`` spacings, which is uniform on the simplex.
    """
    k = shape[0] * shape[1]
    starts = [np.full(k, 1.0 / k)]
    if count > 1:
        e = -np.log(np.clip(_halton(count - 1, k), 1e-12, 1.0))
        starts.extend(e / e.sum(axis=1, keepdims=True))
    return np.asarray(starts[:count]).reshape(count, *shape)


def maximize_weighted(w: np.ndarray, mu: np.ndarray, starts: np.ndarray,
                      gap_tol: float = GAP_TOL, max_iters: int = MAX_ITERS):
    """Maximize ``mu*i1 + (1 - mu)*i12`` row by row by exponentiated gradient.

    The objective is concave, so ``max_k g_k - <P, g>`` bounds the
    suboptimality of each iterate; rows stop once it is below ``gap_tol``.
    Returns ``(P, i1, i12, gap)``.
    """
    p = np.array(starts, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64).reshape(-1, 1, 1)
    i1, i12 = _info_batch(p, w)
    f = mu[:, 0, 0] * i1 + (1 - mu[:, 0, 0]) * i12
    step = np.ones(len(p))
    rejects = np.zeros(len(p), dtype=int)
    gap = np.full(len(p), np.inf)
    for _ in range(max_iters):
        g1, g12 = _grad_batch(p, w)
        g = mu * g1 + (1 - mu) * g12
        gmax = g.max(axis=(1, 2))
        gap = gmax - (p * g).sum(axis=(1, 2))
        # a long run of rejected steps means float resolution is exhausted
        active = (gap > gap_tol) & (rejects < MAX_REJECTS)
        if not active.any():
            break
        pn = p * np.exp(step[:, None, None] * (g - gmax[:, None, None]))
        pn /= pn.sum(axis=(1, 2), keepdims=True)
        n1, n12 = _info_batch(pn, w)
        fn = mu[:, 0, 0] * n1 + (1 - mu[:, 0, 0]) * n12
        acc = active & (fn >= f)
        p[acc] = pn[acc]
        f = np.where(acc, fn, f)
        i1 = np.where(acc, n1, i1)
        i12 = np.where(acc, n12, i12)
        step = np.where(acc, np.minimum(step * 1.2, 1e6), np.where(active, step * 0.5, step))
        rejects = np.where(acc, 0, np.where(active, rejects + 1, rejects))
    return p, i1, i12, gap


# ---------------------------------------------------------------------------
# boundary

@dataclass(frozen=True)
class RegionBoundary:
    """Pareto boundary of the capacity region in the (R1, R2) plane.

    ``points`` has R1 strictly increasing and R2 non-increasing, starting at
    ``(0, sum_capacity)``; the vertical drop from the last point down to
    ``(r1_capacity, 0)`` is implicit. ``achievers[k]`` attains ``points[k]``.
    """

    points: np.ndarray
    achievers: tuple
    sum_capacity: float
    r1_capacity: float

    def outline(self) -> np.ndarray:
        """Closed Pareto polyline including the vertical drop to the R1 axis."""
        last = self.points[-1]
        if last[1] > 0:
            return np.vstack([self.points, [[last[0], 0.0]]])
        return self.points.copy()

    def upper(self, r1):
        """Largest R2 with ``(r1, R2)`` in the region; -inf outside [0, r1_capacity]."""
        r1 = np.asarray(r1, dtype=np.float64)
        pts = self.points
        if len(pts) == 1:
            out = np.full(r1.shape, pts[0, 1])
        else:
            out = np.interp(r1, pts[:, 0], pts[:, 1])
        bad = (r1 < 0) | (r1 > self.r1_capacity)
        return np.where(bad, -np.inf, out)

    def contains(self, r1, r2, tol: float = 0.0):
        r1 = np.asarray(r1, dtype=np.float64)
        r2 = np.asarray(r2, dtype=np.float64)
        rc = np.clip(r1, 0.0, self.r1_capacity)
        ok = (r1 >= -tol) & (r1 <= self.r1_capacity + tol) & (r2 >= -tol)
        return ok & (r2 <= self.upper(rc) + tol)


def _upper_hull(pts: np.ndarray) -> list[int]:
    order = np.lexsort((-pts[:, 1], pts[:, 0]))
    hull: list[int] = []
    for i in order:
        while len(hull) >= 2:
            o, a = pts[hull[-2]], pts[hull[-1]]
            b = pts[i]
            cross = (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
            if cross >= 0:
                hull.pop()
            else:
                break
        if hull and abs(pts[hull[-1], 0] - pts[i, 0]) <= 1e-12:
            continue
        hull.append(i)
    return hull


def mu_grid(resolution: int) -> np.ndarray:
    base = np.linspace(0.0, 1.0, resolution)
    extra = np.array([1e-6, 1e-3, 1 - 1e-3, 1 - 1e-6])
    return np.unique(np.concatenate([base, extra]))


def boundary(ch: Channel, resolution: int = 128, starts: int = 4) -> RegionBoundary:
    """Capacity-region boundary from a grid of supporting directions.

    For each weight on the grid the weighted objective is maximized from
    ``starts`` deterministic initial points; the trapezoid corners of the
    winners together with ``(0, max i12)`` are reduced to their upper hull.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    w = ch.w
    mus = mu_grid(resolution)
    init = simplex_starts(starts, (ch.x1_size, ch.x2_size))
    mu_rows = np.repeat(mus, starts)
    p0 = np.tile(init, (len(mus), 1, 1))
    p, i1, i12, _ = maximize_weighted(w, mu_rows, p0)
    f = mu_rows * i1 + (1 - mu_rows) * i12
    best = f.reshape(len(mus), starts).argmax(axis=1) + np.arange(len(mus)) * starts
    p, i1, i12 = p[best], i1[best], i12[best]

    k_sum = int(np.argmax(i12))
    csum = float(i12[k_sum])
    c1 = float(i1.max())
    corners = np.column_stack([i1, i12 - i1])
    pts = np.vstack([[0.0, csum], corners])
    owners = np.concatenate([[k_sum], np.arange(len(corners))])
    idx = _upper_hull(pts)
    points = pts[idx]
    points[:, 0] = np.maximum(points[:, 0], 0.0)
    achievers = tuple(JointInput(p[owners[i]] / p[owners[i]].sum()) for i in idx)
    return RegionBoundary(points, achievers, csum, max(c1, float(points[-1, 0])))


# ---------------------------------------------------------------------------
# the set of distributions dominating a boundary point

def _slack_fns(w, r1, r12):
    shape = w.shape[:2]

    def _p(x):
        x = np.clip(x, 0.0, None)
        return (x / x.sum()).reshape(1, *shape)

    def val(x):
        i1, i12 = _info_batch(_p(x), w)
        return np.array([i1[0] - r1, i12[0] - r12])

    def jac(x):
        g1, g12 = _grad_batch(_p(x), w)
        return np.vstack([g1.ravel(), g12.ravel()])

    return val, jac


def max_min_slack(ch: Channel, r1: float, r2: float, start=None):
    """``max_P min(i1(P) - R1, i12(P) - R1 - R2)`` and a maximizer."""
    w = ch.w
    k = ch.x1_size * ch.x2_size
    val, jac = _slack_fns(w, r1, r1 + r2)
    x0 = np.full(k, 1.0 / k) if start is None else np.asarray(start, float).ravel()
    t0 = float(val(x0).min())
    cons = [
        {"type": "ineq", "fun": lambda z: val(z[:-1]) - z[-1],
         "jac": lambda z: np.hstack([jac(z[:-1]), -np.ones((2, 1))])},
        {"type": "eq", "fun": lambda z: np.array([z[:-1].sum() - 1.0]),
         "jac": lambda z: np.append(np.ones(k), 0.0)[None, :]},
    ]
    res = optimize.minimize(
        lambda z: -z[-1], np.append(x0, t0), jac=lambda z: np.append(np.zeros(k), -1.0),
        bounds=[(0.0, 1.0)] * k + [(None, None)], constraints=cons, method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    x = np.clip(res.x[:-1], 0.0, None)
    x /= x.sum()
    return float(val(x).min()), x.reshape(ch.x1_size, ch.x2_size)


def _project(ch, r1, r12, target, x0, floor):
    w = ch.w
    k = x0.size
    val, jac = _slack_fns(w, r1, r12)
    cons = [
        {"type": "ineq", "fun": lambda x: val(x) - floor, "jac": jac},
        {"type": "eq", "fun": lambda x: np.array([x.sum() - 1.0]), "jac": lambda x: np.ones((1, k))},
    ]
    res = optimize.minimize(
        lambda x: 0.5 * np.sum((x - target) ** 2), x0, jac=lambda x: x - target,
        bounds=[(0.0, 1.0)] * k, constraints=cons, method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 300},
    )
    x = np.clip(res.x, 0.0, None)
    return x / x.sum()


def _dedupe(ps: list[np.ndarray], radius: float) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for p in ps:
        if all(np.max(np.abs(p - q)) > radius for q in kept):
            kept.append(p)
    return kept


def pi_set(ch: Channel, r1: float, r2: float, tol: float = 1e-6, resolution: int = 50) -> list[JointInput]:
    """Finite representatives of ``{P : i1(P) >= R1, i12(P) >= R1 + R2}``.

    The set is convex. A max-min-slack solve checks that the target is
    achievable (within ``tol``); then the simplex vertices and
    ``resolution - 1`` spread-out interior starts are projected onto ``{slacks >= -tol/2}``. Survivors are
    re-verified with slack ``tol`` and deduplicated at L-infinity 1e-3.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t_star, p_star = max_min_slack(ch, r1, r2)
    if t_star < -tol:
        raise ValueError(f"rate pair ({r1:.12g}, {r2:.12g}) lies outside the capacity region "
                         f"(shortfall {-t_star:.3g} nats)")
    floor = min(0.0, t_star) - 0.5 * tol
    shape = (ch.x1_size, ch.x2_size)
    x0 = p_star.ravel()
    cands = [x0]
    # simplex vertices project onto extreme points of the (convex) set
    starts = np.vstack([np.eye(x0.size), simplex_starts(max(resolution, 1), shape)[1:].reshape(-1, x0.size)])
    for s in starts:
        cands.append(_project(ch, r1, r1 + r2, s.ravel(), x0, floor))
    good = []
    for x in cands:
        mv = mean_vector(JointInput(x.reshape(shape)), ch)
        if mv.i1 - r1 >= -tol and mv.i12 - r1 - r2 >= -tol:
            good.append(x)
    good = _dedupe(good, DEDUP_LINF)
    if not good:
        raise RuntimeError(f"no dominating distribution found for ({r1:.12g}, {r2:.12g}) "
                           "although the point is achievable")
    return [JointInput(x.reshape(shape)) for x in good]


# ---------------------------------------------------------------------------
# tangents and feasible directions

def _arclength(poly: np.ndarray) -> np.ndarray:
    seg = np.hypot(*np.diff(poly, axis=0).T)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _locate(poly: np.ndarray, pt: np.ndarray):
    """Arclength and distance of the closest point on ``poly`` to ``pt``."""
    s = _arclength(poly)
    if len(poly) == 1:
        return 0.0, float(np.hypot(*(pt - poly[0])))
    a, b = poly[:-1], poly[1:]
    d = b - a
    ll = np.einsum("ij,ij->i", d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.clip(np.einsum("ij,ij->i", pt - a, d) / ll, 0.0, 1.0)
    t = np.nan_to_num(t)
    proj = a + t[:, None] * d
    dist = np.hypot(*(proj - pt).T)
    k = int(np.argmin(dist))
    return float(s[k] + t[k] * np.sqrt(ll[k])), float(dist[k])


def _at(poly: np.ndarray, s: float) -> np.ndarray:
    arc = _arclength(poly)
    s = float(np.clip(s, 0.0, arc[-1]))
    return np.array([np.interp(s, arc, poly[:, 0]), np.interp(s, arc, poly[:, 1])])


def to_transformed(v) -> np.ndarray | None:
    """``(v1, v2) -> (v1, v1 + v2)``."""
    if v is None:
        return None
    v = np.asarray(v, dtype=np.float64)
    return np.array([v[0], v[0] + v[1]])


@dataclass(frozen=True)
class TangentPair:
    """Left/right unit tangents at a boundary point; ``None`` where undefined."""

    t_minus: np.ndarray | None
    t_plus: np.ndarray | None
    point: tuple[float, float]

    @property
    def T_minus(self):
        return to_transformed(self.t_minus)

    @property
    def T_plus(self):
        return to_transformed(self.t_plus)

    @property
    def is_corner(self) -> bool:
        if self.t_minus is None or self.t_plus is None:
            return False
        c = float(np.clip(np.dot(self.t_minus, -self.t_plus), -1.0, 1.0))
        return bool(np.arccos(c) > CORNER_ANGLE)


def snap_to_boundary(bd: RegionBoundary, r1: float, r2: float, tol: float = ON_BOUNDARY_TOL):
    """Closest outline point and its arclength; error if farther than ``tol``."""
    poly = bd.outline()
    s, dist = _locate(poly, np.array([r1, r2], dtype=np.float64))
    if dist > tol:
        raise ValueError(f"({r1:.12g}, {r2:.12g}) is not on the boundary (distance {dist:.3g} nats)")
    return _at(poly, s), s


def tangents(bd: RegionBoundary, r1: float, r2: float, h: float = 1e-3,
             tol: float = ON_BOUNDARY_TOL) -> TangentPair:
    """Secant estimates of the unit tangents at arclength ``-h`` and ``+h``."""
    if h <= 0:
        raise ValueError("arclength step must be positive")
    poly = bd.outline()
    here, s = snap_to_boundary(bd, r1, r2, tol)
    total = _arclength(poly)[-1]

    def _dir(sign):
        other = _at(poly, s + sign * h)
        d = other - here
        nrm = np.hypot(*d)
        return d / nrm if nrm > 0 else None

    t_minus = _dir(-1) if (r1 > 1e-12 and s > 0) else None
    t_plus = _dir(+1) if (r2 > 1e-12 and s < total) else None
    return TangentPair(t_minus, t_plus, (float(r1), float(r2)))


@dataclass(frozen=True)
class FeasibleDirections:
    """Directions ``v`` such that ``R* + alpha v`` is in the region for some sampled alpha."""

    boundary: RegionBoundary
    point: tuple[float, float]
    alphas: np.ndarray
    tol: float = 1e-9

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=np.float64)
        r = np.asarray(self.point)[None, :] + self.alphas[:, None] * v[None, :]
        return bool(np.any(self.boundary.contains(r[:, 0], r[:, 1], self.tol)))

    def contains_transformed(self, V) -> bool:
        """Membership for a direction given as ``(V1, V1 + V2)``."""
        V = np.asarray(V, dtype=np.float64)
        return self.contains(np.array([V[0], V[1] - V[0]]))


def feasible_directions(bd: RegionBoundary, r1: float, r2: float, samples: int = 64) -> FeasibleDirections:
    if samples < 1:
        raise ValueError("samples must be positive")
    alphas = np.logspace(-1, -6, samples)
    return FeasibleDirections(bd, (float(r1), float(r2)), alphas)


def info_pair(p, ch: Channel) -> np.ndarray:
    """``(i1, i12)`` as an array; convenience for callers holding raw arrays."""
    p = as_joint_input(p)
    check_compatible(p, ch)
    return mean_vector(p, ch).as_array()
