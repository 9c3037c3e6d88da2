"""Information-density vector, its mean I(P) and conditional dispersion V(P).

The density vector has entries

    j1  = log W(y|x1,x2) / P_{Y|X2}(y|x2)
    j12 = log W(y|x1,x2) / P_Y(y)

with output marginals induced by ``P x W``. All logarithms are natural.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Channel, JointInput, as_joint_input, check_compatible

RANK_TOL = 1e-9
PSD_ATOL = 1e-10


class UndefinedDensityError(ValueError):
    """An induced output marginal vanishes where the channel has mass."""


@dataclass(frozen=True)
class InfoVector:
    """``i1 = I(X1;Y|X2)`` and ``i12 = I(X1,X2;Y)`` in nats."""

    i1: float
    i12: float

    def as_array(self) -> np.ndarray:
        return np.array([self.i1, self.i12])


@dataclass(frozen=True)
class DispersionMatrix:
    """Symmetric PSD matrix ``[[v1, v1_12], [v1_12, v12]]``."""

    v1: float
    v12: float
    v1_12: float

    def __post_init__(self):
        for name in ("v1", "v12", "v1_12"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"dispersion entry {name} is not finite")
        if self.v1 < -PSD_ATOL or self.v12 < -PSD_ATOL:
            raise ValueError("dispersion matrix has a negative diagonal entry")
        if np.linalg.eigvalsh(self.matrix)[0] < -PSD_ATOL:
            raise ValueError("dispersion matrix is not positive semi-definite")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.v1, self.v1_12], [self.v1_12, self.v12]])

    @classmethod
    def from_array(cls, a) -> "DispersionMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.shape == (4,):
            a = a.reshape(2, 2)
        if a.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {a.shape}")
        if abs(a[0, 1] - a[1, 0]) > 1e-12 * (1 + np.abs(a).max()):
            raise ValueError("dispersion matrix is not symmetric")
        return cls(float(a[0, 0]), float(a[1, 1]), float(0.5 * (a[0, 1] + a[1, 0])))

    def scaled(self, c: float) -> "DispersionMatrix":
        return DispersionMatrix(c * self.v1, c * self.v12, c * self.v1_12)


def as_dispersion(v) -> DispersionMatrix:
    return v if isinstance(v, DispersionMatrix) else DispersionMatrix.from_array(v)


@dataclass(frozen=True)
class RankProfile:
    rank: int
    u: np.ndarray  # columns are eigenvectors, descending eigenvalue
    d: tuple[float, float]


def _output_marginals(p: np.ndarray, w: np.ndarray):
    """Return ``(P_{Y|X2}, P_Y, P_{X2})``; rows of P_{Y|X2} with P_{X2}=0 are nan."""
    joint = p[:, :, None] * w
    px2 = p.sum(axis=0)
    s = joint.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = s / px2[:, None]
    q[px2 <= 0] = np.nan
    return q, joint.sum(axis=(0, 1)), px2


def density_tables(p: np.ndarray, w: np.ndarray):
    """Per-letter tables ``j1[x1,x2,y]`` and ``j12[x1,x2,y]``.

    Entries are -inf where W is zero and nan where the density is undefined
    (W positive but an induced denominator is zero or undefined).
    """
    q, py, _ = _output_marginals(p, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = np.log(w)
        j1 = logw - np.log(q)[None, :, :]
        j12 = logw - np.log(py)[None, None, :]
    pos = w > 0
    bad1 = pos & ~(np.broadcast_to(q[None], w.shape) > 0)
    bad12 = pos & ~(np.broadcast_to(py[None, None], w.shape) > 0)
    j1 = np.where(pos, j1, -np.inf)
    j12 = np.where(pos, j12, -np.inf)
    j1[bad1] = np.nan
    j12[bad12] = np.nan
    return j1, j12


def info_density(p, ch: Channel, x1: int, x2: int, y: int) -> tuple[float, float]:
    """Information-density vector ``(j1, j12)`` at one letter."""
    p = as_joint_input(p)
    check_compatible(p, ch)
    w = ch.w
    q, py, px2 = _output_marginals(p.p, w)
    wv = w[x1, x2, y]
    den1 = q[x2, y]
    den12 = py[y]
    if not (px2[x2] > 0 and den1 > 0 and den12 > 0):
        if wv > 0:
            raise UndefinedDensityError(
                f"density undefined at (x1={x1}, x2={x2}, y={y}): induced output marginal is zero"
            )
        raise UndefinedDensityError(f"density undefined at (x1={x1}, x2={x2}, y={y}): 0/0")
    if wv == 0:
        return -np.inf, -np.inf
    return float(np.log(wv / den1)), float(np.log(wv / den12))


def _weights_and_tables(p: np.ndarray, w: np.ndarray):
    j1, j12 = density_tables(p, w)
    mass = p[:, :, None] * w
    live = mass > 0
    j1 = np.where(live, j1, 0.0)
    j12 = np.where(live, j12, 0.0)
    return mass, live, j1, j12


def mean_vector(p, ch: Channel) -> InfoVector:
    """``I(P) = E[j(X1,X2,Y)]`` as an exact finite sum; 0 log 0 = 0."""
    p = as_joint_input(p)
    check_compatible(p, ch)
    mass, _, j1, j12 = _weights_and_tables(p.p, ch.w)
    return InfoVector(float(np.sum(mass * j1)), float(np.sum(mass * j12)))


def dispersion_matrix(p, ch: Channel) -> DispersionMatrix:
    """``V(P) = E[cov(j | X1, X2)]``: per-input-pair covariances mixed by P."""
    p = as_joint_input(p)
    check_compatible(p, ch)
    w = ch.w
    mass, live, j1, j12 = _weights_and_tables(p.p, w)
    wl = np.where(live, w, 0.0)
    m1 = np.sum(wl * j1, axis=2, keepdims=True)
    m12 = np.sum(wl * j12, axis=2, keepdims=True)
    d1 = np.where(live, j1 - m1, 0.0)
    d12 = np.where(live, j12 - m12, 0.0)
    v1 = float(np.sum(mass * d1 * d1))
    v12 = float(np.sum(mass * d12 * d12))
    c = float(np.sum(mass * d1 * d12))
    v = np.array([[v1, c], [c, v12]])
    v = 0.5 * (v + v.T)
    return DispersionMatrix(max(v[0, 0], 0.0), max(v[1, 1], 0.0), v[0, 1])


def rank_profile(v, tol: float = RANK_TOL) -> RankProfile:
    """Closed-form eigendecomposition of a symmetric 2x2 PSD matrix.

    Eigenvalues at or below ``tol * (1 + trace)`` count as zero. Each
    eigenvector column has its first nonzero component positive.
    """
    if tol <= 0:
        raise ValueError("rank tolerance must be positive")
    v = as_dispersion(v)
    a, b, c = v.v1, v.v1_12, v.v12
    tr = a + c
    half = 0.5 * (a - c)
    r = np.hypot(half, b)
    d1 = 0.5 * tr + r
    det = a * c - b * b
    d2 = min(det / d1, d1) if d1 > 0 else 0.5 * tr - r
    if b == 0.0:
        u1 = np.array([1.0, 0.0]) if a >= c else np.array([0.0, 1.0])
    else:
        u1 = np.array([d1 - c, b]) if a >= c else np.array([b, d1 - a])
        u1 = u1 / np.hypot(u1[0], u1[1])
    u2 = np.array([-u1[1], u1[0]])
    cols = []
    for col in (u1, u2):
        nz = col[np.nonzero(col)[0][0]]
        cols.append(col if nz > 0 else -col)
    u = np.column_stack(cols)
    thr = tol * (1.0 + tr)
    rank = int(d1 > thr) + int(d2 > thr)
    return RankProfile(rank, u, (float(d1), float(d2)))
