"""Second-order (dispersion) rate regions at a boundary point of the capacity region.

Regions live in the ``(L1, L2)`` plane; membership is decided in the
transformed coordinates ``a = (L1, L1 + L2)``. For each dominating input the
local region is one of

* ``{a1 <= sqrt(v1) q}`` when only the ``i1`` constraint is tight,
* ``{a2 <= sqrt(v12) q}`` when only the sum constraint is tight,
* ``U_{beta >= 0} (beta T + Psi^{-1}(V, eps))`` over the available tangents
  when both are tight,

with ``q = Phi^{-1}(eps)``. The full region is the union over inputs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .capacity import RegionBoundary, TangentPair, _at, boundary, pi_set, snap_to_boundary, tangents
from .channel import Channel, JointInput
from .infogeom import DispersionMatrix, dispersion_matrix, mean_vector, rank_profile
from .mvnorm import phi_inv, psi, psi_inverse, QuantileRegion

DEFAULT_ETA = 1e-6
BETA_COUNT = 64
BETA_SPAN = 20.0
BETA_SCAN = 257
# secant noise below this is treated as an exact zero tangent component
TANGENT_ZERO = 1e-9


class Case(enum.Enum):
    I1_ACTIVE = "i1_active"
    SUM_ACTIVE = "sum_active"
    BOTH_ACTIVE = "both_active"


@dataclass(frozen=True)
class CaseTag:
    case: Case
    slacks: tuple[float, float]


def classify(p, ch: Channel, r1: float, r2: float, eta: float = DEFAULT_ETA) -> CaseTag:
    """Which of the two rate constraints are tight for ``P`` at ``(R1, R2)``."""
    iv = mean_vector(p, ch)
    s1 = iv.i1 - r1
    s2 = iv.i12 - r1 - r2
    if s1 < -eta or s2 < -eta:
        raise ValueError(f"input does not dominate the rate pair: slacks ({s1:.3g}, {s2:.3g})")
    t1, t2 = abs(s1) <= eta, abs(s2) <= eta
    if t1 and t2:
        case = Case.BOTH_ACTIVE
    elif t1:
        case = Case.I1_ACTIVE
    elif t2:
        case = Case.SUM_ACTIVE
    else:
        raise ValueError(f"neither constraint is tight (slacks {s1:.3g}, {s2:.3g}); "
                         "the rate pair is interior to the region")
    return CaseTag(case, (float(s1), float(s2)))


def to_transformed(l1, l2):
    l1 = np.asarray(l1, dtype=np.float64)
    return l1, l1 + np.asarray(l2, dtype=np.float64)


# ---------------------------------------------------------------------------
# pieces

@dataclass(frozen=True)
class HalfPlaneL1:
    """``{L1 <= bound}``."""

    bound: float

    def contains(self, l1, l2):
        return np.broadcast_to(np.asarray(l1) <= self.bound, np.broadcast(l1, l2).shape)

    def sup_l2(self, l1):
        return np.where(np.asarray(l1) <= self.bound, np.inf, -np.inf)


@dataclass(frozen=True)
class HalfPlaneSum:
    """``{L1 + L2 <= bound}``."""

    bound: float

    def contains(self, l1, l2):
        _, a2 = to_transformed(l1, l2)
        return a2 <= self.bound

    def sup_l2(self, l1):
        return self.bound - np.asarray(l1, dtype=np.float64)


def _beta_hi(a: np.ndarray, t: np.ndarray, sd: np.ndarray) -> float:
    """Shift beyond which some coordinate of ``a - beta t`` is hopeless."""
    his = []
    for ai, ti, si in zip(a, t, sd):
        if ti < 0:
            his.append(max(0.0, (40.0 * si + 1.0 - ai) / -ti))
    return min(his)


@dataclass(frozen=True)
class ShiftedPsi:
    """``U_{0 <= beta <= beta_max} (beta * direction + Psi^{-1}(V, eps))`` in transformed coordinates."""

    region: QuantileRegion
    direction: np.ndarray
    side: str
    beta_max: float = np.inf

    def _best(self, a: np.ndarray) -> tuple[float, float]:
        """``(beta, Psi(beta T - a))`` maximizing the lower-orthant mass."""
        v = self.region.covariance
        t = self.direction
        if self.region.is_quadrant:
            c = np.asarray(self.region.corner)
            lo, hi = 0.0, self.beta_max
            for ai, ti, ci in zip(a, t, c):
                if ti > 0:
                    lo = max(lo, (ai - ci) / ti)
                elif ti < 0:
                    hi = min(hi, (ci - ai) / -ti)
                elif ai > ci:
                    return 0.0, 0.0
            if lo <= hi:
                return lo, 1.0
            return 0.0, 0.0
        if np.all(t >= 0):
            # mass is nondecreasing in beta; take the largest shift
            if np.isinf(self.beta_max):
                z = np.where(t > 0, np.inf, -a)
            else:
                z = self.beta_max * t - a
            return self.beta_max, float(psi(z[0], z[1], v))
        sd = np.sqrt([v.v1, v.v12])
        hi = min(_beta_hi(a, t, sd), self.beta_max)
        f = lambda b: float(psi(b * t[0] - a[0], b * t[1] - a[1], v))
        grid = np.linspace(0.0, hi, BETA_SCAN)
        vals = psi(grid * t[0] - a[0], grid * t[1] - a[1], v)
        k = int(np.argmax(vals))
        best_b, best_v = float(grid[k]), float(vals[k])
        lo_b, hi_b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        if hi_b > lo_b and best_v > 0:
            res = optimize.minimize_scalar(lambda b: -f(b), bounds=(lo_b, hi_b), method="bounded",
                                           options={"xatol": 1e-12 * max(1.0, hi_b)})
            if -res.fun > best_v:
                best_b, best_v = float(res.x), float(-res.fun)
        return best_b, best_v

    def contains_point(self, l1: float, l2: float) -> bool:
        a = np.array([l1, l1 + l2], dtype=np.float64)
        if self.region.is_quadrant:
            return self._best(a)[1] >= 1.0
        return self._best(a)[1] >= 1.0 - self.region.epsilon

    def contains(self, l1, l2):
        l1, l2 = np.broadcast_arrays(np.asarray(l1, float), np.asarray(l2, float))
        out = np.fromiter((self.contains_point(x, y) for x, y in zip(l1.ravel(), l2.ravel())),
                          dtype=bool, count=l1.size)
        return out.reshape(l1.shape)


@dataclass(frozen=True)
class Piece:
    """One generator of a second-order region and the input that produced it."""

    kind: str
    shape: object
    source: int

    def contains(self, l1, l2):
        return self.shape.contains(l1, l2)


@dataclass(frozen=True)
class SecondOrderRegion:
    """Union of pieces in the (L1, L2) plane.

    ``inputs[k]`` and ``tags[k]`` describe the k-th dominating input;
    ``piece.source`` indexes into them.
    """

    pieces: tuple
    epsilon: float
    inputs: tuple = ()
    tags: tuple = ()
    tangents: TangentPair | None = None
    diagnostics: dict = field(default_factory=dict)

    def contains(self, l1, l2):
        l1, l2 = np.broadcast_arrays(np.asarray(l1, float), np.asarray(l2, float))
        out = np.zeros(l1.shape, dtype=bool)
        for pc in self.pieces:
            todo = ~out
            if not todo.any():
                break
            out[todo] = pc.contains(l1[todo], l2[todo])
        return out

    def sup_l2(self, l1: float, lo: float = -1e3, hi: float = 1e3, xtol: float = 1e-10) -> float:
        """``sup{L2 : (L1, L2) member}`` restricted to ``[lo, hi]``.

        Returns ``-inf`` if nothing in the window is a member and ``inf``
        if ``hi`` is.
        """
        member = lambda y: bool(self.contains(l1, y))
        if member(hi):
            return np.inf
        if not member(lo):
            return -np.inf
        a, b = lo, hi
        while b - a > xtol * max(1.0, abs(a)):
            m = 0.5 * (a + b)
            a, b = (m, b) if member(m) else (a, m)
        return a

    def export(self, l1_range: tuple[float, float], count: int = 201,
               l2_range: tuple[float, float] = (-50.0, 50.0)) -> np.ndarray:
        """Upper boundary ``(L1, sup L2)`` sampled on an L1 grid, clipped to ``l2_range``."""
        rows = []
        for x in np.linspace(l1_range[0], l1_range[1], count):
            y = self.sup_l2(float(x), l2_range[0], l2_range[1], xtol=1e-9)
            if y == -np.inf:
                continue
            rows.append((x, min(y, l2_range[1])))
        return np.array(rows) if rows else np.empty((0, 2))


# ---------------------------------------------------------------------------
# assembly

def beta_grid(v: DispersionMatrix, count: int = BETA_COUNT, span: float = BETA_SPAN) -> np.ndarray:
    """0 plus ``count`` log-spaced values up to ``span * sqrt(largest eigenvalue)``."""
    d1 = rank_profile(v).d[0]
    top = span * (np.sqrt(d1) if d1 > 0 else 1.0)
    return np.concatenate([[0.0], np.logspace(np.log10(top) - 6, np.log10(top), count)])


def l0_pieces(p, ch: Channel, r1: float, r2: float, eps: float, tp: TangentPair | None,
              tag: CaseTag | None = None, source: int = 0, extent: float = 6.0,
              resolution: int = 512, eta: float = DEFAULT_ETA,
              beta_max: float = np.inf) -> list[Piece]:
    """Generators of the local region for one dominating input.

    ``beta_max`` caps the tangent shifts; the default is the full union.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    tag = tag or classify(p, ch, r1, r2, eta)
    v = dispersion_matrix(p, ch)
    q = phi_inv(eps)
    if tag.case is Case.I1_ACTIVE:
        return [Piece("halfplane_l1", HalfPlaneL1(float(np.sqrt(v.v1) * q)), source)]
    if tag.case is Case.SUM_ACTIVE:
        return [Piece("halfplane_sum", HalfPlaneSum(float(np.sqrt(v.v12) * q)), source)]
    reg = psi_inverse(v, eps, extent, resolution)
    out = []
    sides = (("minus", r1, None if tp is None else tp.T_minus),
             ("plus", r2, None if tp is None else tp.T_plus))
    for side, rate, t in sides:
        if rate <= 1e-12:
            continue  # this family is empty by convention
        if t is None:
            raise ValueError(f"tangent on the {side} side is required at this point")
        t = np.where(np.abs(t) < TANGENT_ZERO, 0.0, np.asarray(t, float))
        out.append(Piece("shifted_psi", ShiftedPsi(reg, t, side, beta_max), source))
    if not out:
        # both rates zero: only the unshifted set
        out.append(Piece("shifted_psi", ShiftedPsi(reg, np.zeros(2), "none"), source))
    return out


def l0_region(p, ch: Channel, r1: float, r2: float, eps: float, tp: TangentPair | None,
              eta: float = DEFAULT_ETA, beta_max: float = np.inf) -> SecondOrderRegion:
    """Local second-order region generated by a single input ``P``."""
    tag = classify(p, ch, r1, r2, eta)
    pieces = l0_pieces(p, ch, r1, r2, eps, tp, tag, eta=eta, beta_max=beta_max)
    return SecondOrderRegion(tuple(pieces), eps, (p,), (tag,), tp)


@dataclass(frozen=True)
class Theorem1Config:
    """Numerical knobs for assembling the full region."""

    eta: float = DEFAULT_ETA
    pi_tol: float = 1e-9
    pi_resolution: int = 50
    boundary_resolution: int = 128
    tangent_h: float = 1e-3
    snap_tol: float = 1e-6
    extent: float = 6.0
    psi_resolution: int = 512


def _covers_neighbors(p, ch, bd: RegionBoundary, r1, r2, h, tol=1e-6) -> bool:
    """Does P's trapezoid contain the boundary points at arclength +-h?"""
    iv = mean_vector(p, ch)
    poly = bd.outline()
    _, s = snap_to_boundary(bd, r1, r2, 1.0)
    ok = True
    for sign in (-1, 1):
        q = _at(poly, s + sign * h)
        ok &= (q[0] <= iv.i1 + tol) and (q[0] + q[1] <= iv.i12 + tol)
    return bool(ok)


def theorem1_region(ch: Channel, r1: float, r2: float, eps: float,
                    config: Theorem1Config | None = None,
                    bd: RegionBoundary | None = None) -> SecondOrderRegion:
    """Second-order region at a capacity-boundary point ``(R1, R2)``.

    Union of the local regions of every dominating input returned by
    :func:`pi_set`. ``diagnostics['neighborhood_achieved']`` flags inputs
    whose own trapezoid also reaches the neighbouring boundary points, the
    situation in which the tangent shifts add nothing.
    """
    cfg = config or Theorem1Config()
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    bd = bd or boundary(ch, cfg.boundary_resolution)
    snap_to_boundary(bd, r1, r2, cfg.snap_tol)
    tp = tangents(bd, r1, r2, cfg.tangent_h, cfg.snap_tol)
    reps = pi_set(ch, r1, r2, cfg.pi_tol, cfg.pi_resolution)
    pieces, tags, nbhd = [], [], []
    for k, p in enumerate(reps):
        tag = classify(p, ch, r1, r2, cfg.eta)
        tags.append(tag)
        pieces.extend(l0_pieces(p, ch, r1, r2, eps, tp, tag, k, cfg.extent, cfg.psi_resolution, cfg.eta))
        nbhd.append(_covers_neighbors(p, ch, bd, r1, r2, cfg.tangent_h))
    return SecondOrderRegion(tuple(pieces), eps, tuple(reps), tuple(tags), tp,
                             {"neighborhood_achieved": nbhd})


def single_user_rate(ch2: Channel, eps: float, config: Theorem1Config | None = None) -> float:
    """Second-order rate of a point-to-point channel (first input alphabet of size one).

    ``Phi^{-1}(eps) * sqrt(V)`` with the smallest dispersion among
    capacity-achieving inputs for ``eps < 1/2`` and the largest otherwise.
    """
    if ch2.x1_size != 1:
        raise ValueError("single-user reduction needs a first input alphabet of size one")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    cfg = config or Theorem1Config()
    bd = boundary(ch2, cfg.boundary_resolution)
    reps = pi_set(ch2, 0.0, bd.sum_capacity, cfg.pi_tol, cfg.pi_resolution)
    vs = [dispersion_matrix(p, ch2).v12 for p in reps]
    v = min(vs) if eps < 0.5 else max(vs)
    return float(phi_inv(eps) * np.sqrt(v))
