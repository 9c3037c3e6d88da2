"""Univariate and bivariate Gaussian CDFs and the quantile set Psi^{-1}(V, eps).

``psi(z1, z2, V)`` is the lower-orthant probability ``P(Z1 <= z1, Z2 <= z2)``
for ``Z ~ N(0, V)`` and any PSD ``V``, including rank 0 and rank 1. The set

    Psi^{-1}(V, eps) = {z : psi(-z1, -z2; V) >= 1 - eps}

is down-closed; :func:`psi_inverse` samples its upper-right boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .infogeom import DispersionMatrix, RankProfile, as_dispersion, rank_profile

RHO_DEGENERATE = 1e-12
AXIS_SNAP = 1e-12
BISECT_XTOL = 1e-9
DEFAULT_EXTENT = 6.0
DEFAULT_RESOLUTION = 512


def phi(z):
    """Standard Gaussian CDF."""
    out = special.ndtr(z)
    return float(out) if np.ndim(out) == 0 else out


def phi_inv(p):
    """Inverse of :func:`phi`; ``p`` must lie strictly inside (0, 1)."""
    a = np.asarray(p, dtype=np.float64)
    if np.any(~((a > 0) & (a < 1))):
        raise ValueError(f"phi_inv needs p in (0, 1), got {p}")
    out = special.ndtri(a)
    return float(out) if np.ndim(out) == 0 else out


def _bvn_cdf(h, k, rho):
    """P(X <= h, Y <= k) for unit-variance correlation ``rho``, finite h, k.

    Owen's T representation; exact to double precision for |rho| < 1.
    """
    s = np.sqrt((1.0 - rho) * (1.0 + rho))
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = (k - rho * h) / (h * s)
        ak = (h - rho * k) / (k * s)
    # h -> 0+ limit: (k - rho h) / (h s) -> sign(k) * inf
    ah = np.where(h == 0, np.copysign(np.inf, k), ah)
    ak = np.where(k == 0, np.copysign(np.inf, h), ak)
    ah = np.nan_to_num(ah, nan=0.0)
    ak = np.nan_to_num(ak, nan=0.0)
    hk = h * k
    corr = np.where((hk < 0) | ((hk == 0) & (h + k < 0)), 0.5, 0.0)
    out = 0.5 * (special.ndtr(h) + special.ndtr(k)) - special.owens_t(h, ah) - special.owens_t(k, ak) - corr
    both0 = (h == 0) & (k == 0)
    if np.any(both0):
        out = np.where(both0, 0.25 + np.arcsin(rho) / (2 * np.pi), out)
    return np.clip(out, 0.0, 1.0)


def _psi_rank2(z1, z2, v: DispersionMatrix):
    s1, s2 = np.sqrt(v.v1), np.sqrt(v.v12)
    rho = float(np.clip(v.v1_12 / (s1 * s2), -1.0, 1.0))
    h = z1 / s1
    k = z2 / s2
    out = np.zeros(np.broadcast(h, k).shape)
    h, k = np.broadcast_arrays(h, k)
    neg = (h == -np.inf) | (k == -np.inf)
    hinf = (h == np.inf) & ~neg
    kinf = (k == np.inf) & ~neg & ~hinf
    fin = ~neg & ~hinf & ~kinf
    out[hinf] = special.ndtr(k[hinf])
    out[kinf] = special.ndtr(h[kinf])
    hf, kf = h[fin], k[fin]
    if rho >= 1.0 - RHO_DEGENERATE:
        out[fin] = special.ndtr(np.minimum(hf, kf))
    elif rho <= -1.0 + RHO_DEGENERATE:
        out[fin] = np.maximum(special.ndtr(hf) - special.ndtr(-kf), 0.0)
    else:
        out[fin] = _bvn_cdf(hf, kf, rho)
    return out


def _rank1_scale(prof: RankProfile) -> np.ndarray:
    """``sqrt(d1) * u1`` with round-off-sized components set to exactly zero."""
    u = np.where(np.abs(prof.u[:, 0]) <= AXIS_SNAP, 0.0, prof.u[:, 0])
    return np.sqrt(prof.d[0]) * u


def _psi_rank1(z1, z2, prof: RankProfile):
    # Z = sqrt(d1) * u * G with G standard normal: intersect half-lines in G
    scale = _rank1_scale(prof)
    z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
    lo = np.full(z1.shape, -np.inf)
    hi = np.full(z1.shape, np.inf)
    ok = np.ones(z1.shape, dtype=bool)
    for c, z in zip(scale, (z1, z2)):
        if c == 0.0:
            ok &= z >= 0
        elif c > 0:
            hi = np.minimum(hi, z / c)
        else:
            lo = np.maximum(lo, z / c)
    # upper-tail form keeps precision when both ends are large
    upper = lo > 0
    val = np.where(upper, special.ndtr(-lo) - special.ndtr(-hi), special.ndtr(hi) - special.ndtr(lo))
    return np.where(ok & (hi > lo), np.maximum(val, 0.0), 0.0)


def psi(z1, z2, v):
    """Lower-orthant probability of ``N(0, V)`` at ``(z1, z2)``; broadcasts.

    Arguments may be +/-inf. Non-PSD ``V`` is rejected.
    """
    v = as_dispersion(v)
    prof = rank_profile(v)
    z1a = np.asarray(z1, dtype=np.float64)
    z2a = np.asarray(z2, dtype=np.float64)
    if prof.rank == 0:
        out = ((z1a >= 0) & (z2a >= 0)).astype(np.float64)
    elif prof.rank == 1:
        out = _psi_rank1(z1a, z2a, prof)
    else:
        out = _psi_rank2(z1a, z2a, v)
    out = np.broadcast_to(out, np.broadcast(z1a, z2a).shape)
    return float(out) if out.ndim == 0 else np.array(out)


def in_quantile_set(z1, z2, v, eps: float):
    """Membership in Psi^{-1}(V, eps), using the closed inequality."""
    return np.asarray(psi(-np.asarray(z1, float), -np.asarray(z2, float), v)) >= 1.0 - eps


@dataclass(frozen=True)
class QuantileRegion:
    """Psi^{-1}(V, eps) with a sampled upper-right boundary.

    ``corner`` is set for quadrant-shaped regions ``{z <= corner}`` (rank 0,
    and rank 1 with nonnegatively correlated support); their ``boundary`` is
    empty and membership is exact. Otherwise ``boundary`` is an (m, 2) array
    with z1 strictly increasing and z2 non-increasing.
    """

    covariance: DispersionMatrix
    epsilon: float
    boundary: np.ndarray
    rank: int
    corner: tuple[float, float] | None = None
    window: tuple[float, float, float, float] = field(default=(0.0, 0.0, 0.0, 0.0))

    @property
    def is_quadrant(self) -> bool:
        return self.corner is not None

    @property
    def z1_max(self) -> float:
        """Largest z1 with a nonempty fiber."""
        return float(np.sqrt(self.covariance.v1) * phi_inv(self.epsilon))

    @property
    def z2_max(self) -> float:
        return float(np.sqrt(self.covariance.v12) * phi_inv(self.epsilon))

    def contains(self, z1, z2):
        if self.is_quadrant:
            return (np.asarray(z1) <= self.corner[0]) & (np.asarray(z2) <= self.corner[1])
        return in_quantile_set(z1, z2, self.covariance, self.epsilon)

    def upper(self, z1):
        """sup{z2 : (z1, z2) in region} read off the sampled boundary.

        Left of the window the leftmost sample is extended flat (the true
        boundary approaches its horizontal asymptote from above there, so
        this slightly under-reports). Right of ``z1_max`` it is -inf.
        """
        z1 = np.asarray(z1, dtype=np.float64)
        if self.is_quadrant:
            return np.where(z1 <= self.corner[0], self.corner[1], -np.inf)
        b = self.boundary
        if len(b) == 0:
            return np.full(z1.shape, -np.inf)
        out = np.interp(z1, b[:, 0], b[:, 1], left=b[0, 1], right=-np.inf)
        return np.where(z1 > b[-1, 0], -np.inf, out)

    def boundary_samples(self, extent: float | None = None, count: int = 256) -> np.ndarray:
        """Points on the topological boundary, including quadrant legs."""
        if not self.is_quadrant:
            return self.boundary
        span = extent if extent is not None else DEFAULT_EXTENT * max(
            np.sqrt(self.covariance.v1), np.sqrt(self.covariance.v12), 1.0)
        t = np.linspace(0.0, span, count // 2)
        c1, c2 = self.corner
        horiz = np.column_stack([c1 - t[::-1], np.full(t.shape, c2)])
        vert = np.column_stack([np.full(t.shape[0] - 1, c1), c2 - t[1:]])
        return np.vstack([horiz, vert])


def _bisect(fn, lo, hi, xtol):
    """Vectorized bisection for the last ``x`` with ``fn(x)`` True.

    ``fn(lo)`` is True and ``fn(hi)`` False elementwise.
    """
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    while np.max(hi - lo) > xtol:
        mid = 0.5 * (lo + hi)
        ok = fn(mid)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo


def quadrant_corner(v, eps: float) -> tuple[float, float] | None:
    """Corner of Psi^{-1}(V, eps) when it is a quadrant, else None."""
    v = as_dispersion(v)
    prof = rank_profile(v)
    if prof.rank == 0:
        return (0.0, 0.0)
    if prof.rank == 1:
        c = _rank1_scale(prof)
        if c[0] * c[1] >= 0:
            c = c * phi_inv(eps)
            return (float(c[0]), float(c[1]))
    return None


def psi_inverse(v, eps: float, extent: float = DEFAULT_EXTENT, resolution: int = DEFAULT_RESOLUTION) -> QuantileRegion:
    """Sample the boundary of Psi^{-1}(V, eps).

    Half of the points sweep z1 over ``[z1_max - extent*sd1, z1_max)`` and
    bisect for z2; the other half sweep z2 over the mirror window and bisect
    for z1, so both the flat and the steep arms are resolved. Points outside
    the window are dropped.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if extent <= 0:
        raise ValueError("extent must be positive")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    v = as_dispersion(v)
    prof = rank_profile(v)
    corner = quadrant_corner(v, eps)
    if corner is not None:
        return QuantileRegion(v, eps, np.empty((0, 2)), prof.rank, corner)

    s1, s2 = np.sqrt(v.v1), np.sqrt(v.v12)
    q = phi_inv(eps)
    a1, a2 = s1 * q, s2 * q
    lo1, lo2 = a1 - extent * s1, a2 - extent * s2
    target = 1.0 - eps
    m1 = resolution - resolution // 2
    m2 = resolution // 2

    # fiber over z1: largest z2 with psi(-z1, -z2) >= 1 - eps
    g1 = np.linspace(lo1, a1, m1 + 1)[:-1]
    b_lo = np.full(g1.shape, lo2 - s2)
    live = psi(-g1, -b_lo, v) >= target
    z2 = _bisect(lambda z: psi(-g1, -z, v) >= target, b_lo, np.full(g1.shape, a2), BISECT_XTOL * max(s2, 1e-300))
    pts_a = np.column_stack([g1, z2])[live & (z2 >= lo2)]

    g2 = np.linspace(lo2, a2, m2 + 1)[:-1] if m2 > 0 else np.empty(0)
    c_lo = np.full(g2.shape, lo1 - s1)
    live2 = psi(-c_lo, -g2, v) >= target
    z1 = _bisect(lambda z: psi(-z, -g2, v) >= target, c_lo, np.full(g2.shape, a1), BISECT_XTOL * max(s1, 1e-300))
    pts_b = np.column_stack([z1, g2])[live2 & (z1 >= lo1)]

    pts = np.vstack([pts_a, pts_b])
    pts = pts[np.lexsort((-pts[:, 1], pts[:, 0]))]
    keep = []
    for p in pts:
        if keep and (p[0] <= keep[-1][0] or p[1] > keep[-1][1]):
            continue
        keep.append(p)
    boundary = np.array(keep) if keep else np.empty((0, 2))
    return QuantileRegion(v, eps, boundary, prof.rank, None, (lo1, a1, lo2, a2))


def _diag_distance(points: np.ndarray, member, scale: float) -> np.ndarray:
    """min{delta >= 0 : point - delta*(1,1) is a member}, per row."""
    if len(points) == 0:
        return np.zeros(0)
    p1, p2 = points[:, 0], points[:, 1]
    inside = member(p1, p2)
    hi = np.full(len(points), max(scale, 1e-12))
    for _ in range(200):
        ok = member(p1 - hi, p2 - hi)
        if np.all(ok | inside):
            break
        hi = np.where(ok | inside, hi, 2 * hi)
    lo = np.zeros(len(points))
    # invert the predicate: bisect for the last delta that is NOT a member
    d = _bisect(lambda t: ~member(p1 - t, p2 - t), lo, hi, 1e-9)
    d = np.where(inside, 0.0, d)
    return d


def region_continuity_gap(v, v_prime, eps: float, extent: float = DEFAULT_EXTENT,
                          resolution: int = DEFAULT_RESOLUTION) -> float:
    """Smallest delta >= 0 with R' - delta*1 in R and R in R' + delta*1.

    ``R = Psi^{-1}(V, eps)``, ``R' = Psi^{-1}(V', eps)``; both inclusions are
    checked on sampled boundary points of the respective sets.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    v = as_dispersion(v)
    vp = as_dispersion(v_prime)
    r = psi_inverse(v, eps, extent, resolution)
    rp = psi_inverse(vp, eps, extent, resolution)
    scale = max(np.sqrt(v.v1), np.sqrt(v.v12), np.sqrt(vp.v1), np.sqrt(vp.v12), 1e-6)
    span = extent * scale
    # R' - delta 1 subset of R: every boundary point of R' pulled back by delta is in R
    d_a = _diag_distance(rp.boundary_samples(span), r.contains, scale)
    # R subset of R' + delta 1: every boundary point of R pulled back by delta is in R'
    d_b = _diag_distance(r.boundary_samples(span), rp.contains, scale)
    return float(max(d_a.max(initial=0.0), d_b.max(initial=0.0)))


def symmetric_boundary_point(v, eps: float) -> np.ndarray:
    """Boundary point of Psi^{-1}(V, eps) with equal standardized backoff.

    Returns ``t * (sd1, sd2)`` with ``psi(-t sd1, -t sd2) = 1 - eps``.
    """
    v = as_dispersion(v)
    sd = np.array([np.sqrt(v.v1), np.sqrt(v.v12)])
    if not np.any(sd > 0):
        return np.zeros(2)
    target = 1.0 - eps
    member = lambda t: psi(-t * sd[0], -t * sd[1], v) >= target
    lo, hi = -1.0, 1.0
    while not member(lo):
        lo *= 2
    while member(hi):
        hi *= 2
    t = float(_bisect(member, lo, hi, 1e-12))
    return t * sd
