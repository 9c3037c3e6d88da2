"""Channels, joint input distributions and their JSON form.

A channel is a dense array ``w[x1, x2, y] = W(y | x1, x2)``. A joint input is a
dense array ``p[x1, x2]``, optionally tagged with a denominator ``n`` when it is
an n-type (every entry a multiple of ``1/n``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Union

import numpy as np

ANALYTIC_ATOL = 1e-12
FILE_ATOL = 1e-9
TYPE_ATOL = 1e-9


class ChannelFormatError(ValueError):
    """Raised for malformed or invalid channel / input documents."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Channel:
    """Discrete memoryless MAC transition law ``W(y | x1, x2)``."""

    w: np.ndarray
    atol: float = field(default=ANALYTIC_ATOL, repr=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 3 or min(w.shape) < 1:
            raise ChannelFormatError(f"channel array must be 3-d with positive sizes, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ChannelFormatError("channel contains non-finite entries")
        neg = np.argwhere(w < 0)
        if len(neg):
            x1, x2, y = neg[0]
            raise ChannelFormatError(f"negative probability W({y}|{x1},{x2}) = {w[x1, x2, y]}")
        if np.any(w > 1):
            raise ChannelFormatError("channel entry exceeds 1")
        dev = np.abs(w.sum(axis=2) - 1.0)
        bad = np.argwhere(dev > self.atol)
        if len(bad):
            x1, x2 = bad[0]
            raise ChannelFormatError(
                f"row (x1={x1}, x2={x2}) sums to {w[x1, x2].sum():.12g}, deviating from 1 by more than {self.atol:g}"
            )
        object.__setattr__(self, "w", _frozen(w))

    @property
    def x1_size(self) -> int:
        return self.w.shape[0]

    @property
    def x2_size(self) -> int:
        return self.w.shape[1]

    @property
    def y_size(self) -> int:
        return self.w.shape[2]

    def __eq__(self, other):
        if not isinstance(other, Channel):
            return NotImplemented
        return self.w.shape == other.w.shape and np.array_equal(self.w, other.w)

    def __hash__(self):
        return hash((self.w.shape, self.w.tobytes()))

    def to_dict(self) -> dict:
        return {
            "x1_size": self.x1_size,
            "x2_size": self.x2_size,
            "y_size": self.y_size,
            "w": self.w.tolist(),
        }


@dataclass(frozen=True, eq=False)
class JointInput:
    """Joint input distribution ``P(x1, x2)``; ``n`` is set for n-types."""

    p: np.ndarray
    n: int | None = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 2 or min(p.shape) < 1:
            raise ValueError(f"joint input must be a 2-d array, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("joint input entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > ANALYTIC_ATOL:
            raise ValueError(f"joint input sums to {p.sum():.15g}, not 1")
        if self.n is not None:
            n = int(self.n)
            if n < 1 or n != self.n:
                raise ValueError(f"type denominator must be a positive integer, got {self.n}")
            scaled = p * n
            if np.max(np.abs(scaled - np.rint(scaled))) > TYPE_ATOL:
                raise ValueError(f"distribution is not an {n}-type")
            object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", _frozen(p))

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape

    @property
    def counts(self) -> np.ndarray:
        if self.n is None:
            raise ValueError("counts are only defined for n-types")
        return np.rint(self.p * self.n).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, JointInput):
            return NotImplemented
        return self.n == other.n and self.p.shape == other.p.shape and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash((self.n, self.p.shape, self.p.tobytes()))

    def to_dict(self) -> dict:
        d = {"p": self.p.tolist()}
        if self.n is not None:
            d["n"] = self.n
        return d

    @classmethod
    def uniform(cls, x1_size: int, x2_size: int) -> "JointInput":
        return cls(np.full((x1_size, x2_size), 1.0 / (x1_size * x2_size)))


@dataclass(frozen=True)
class RateVec:
    """Rates in the transformed coordinates ``(R1, R1 + R2)``, in nats."""

    r1: float
    r12: float

    @classmethod
    def from_pair(cls, r1: float, r2: float) -> "RateVec":
        return cls(float(r1), float(r1) + float(r2))

    def to_pair(self) -> tuple[float, float]:
        return self.r1, self.r12 - self.r1

    def as_array(self) -> np.ndarray:
        return np.array([self.r1, self.r12])


def as_joint_input(p: Union[JointInput, np.ndarray, list]) -> JointInput:
    return p if isinstance(p, JointInput) else JointInput(np.asarray(p, dtype=np.float64))


def check_compatible(p: JointInput, ch: Channel) -> None:
    if p.shape != (ch.x1_size, ch.x2_size):
        raise ValueError(f"input shape {p.shape} does not match channel inputs {(ch.x1_size, ch.x2_size)}")


def _read_source(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def load_channel(source: Union[bytes, str, IO]) -> Channel:
    """Parse and validate a channel document.

    ``source`` is the JSON text itself (bytes or str) or a readable stream.
    Row sums are checked against 1 with tolerance 1e-9 and never renormalized.
    """
    try:
        doc = json.loads(_read_source(source))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ChannelFormatError(f"channel document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ChannelFormatError("channel document must be a JSON object")
    for key in ("x1_size", "x2_size", "y_size", "w"):
        if key not in doc:
            raise ChannelFormatError(f"channel document is missing field '{key}'")
    sizes = []
    for key in ("x1_size", "x2_size", "y_size"):
        v = doc[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ChannelFormatError(f"'{key}' must be a positive integer, got {v!r}")
        sizes.append(v)
    try:
        w = np.array(doc["w"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ChannelFormatError(f"'w' is not a rectangular numeric array: {exc}") from exc
    if w.shape != tuple(sizes):
        raise ChannelFormatError(f"'w' has shape {w.shape}, expected {tuple(sizes)}")
    return Channel(w, atol=FILE_ATOL)


def serialize_channel(ch: Channel) -> str:
    # json writes floats with repr, which round-trips float64 exactly
    return json.dumps(ch.to_dict())


def load_input(source: Union[bytes, str, IO]) -> JointInput:
    """Parse a joint-input document ``{"p": [[...]], "n": optional}``."""
    try:
        doc = json.loads(_read_source(source))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ChannelFormatError(f"input document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "p" not in doc:
        raise ChannelFormatError("input document must be an object with field 'p'")
    try:
        p = np.array(doc["p"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ChannelFormatError(f"'p' is not a rectangular numeric array: {exc}") from exc
    if p.ndim != 2:
        raise ChannelFormatError(f"'p' must be a 2-level nested array, got {p.ndim} levels")
    if abs(p.sum() - 1.0) > FILE_ATOL:
        raise ChannelFormatError(f"'p' sums to {p.sum():.12g}")
    # file values are decimals; snap the sum exactly before strict validation
    p = p / p.sum()
    try:
        return JointInput(p, doc.get("n"))
    except ValueError as exc:
        raise ChannelFormatError(str(exc)) from exc


def joint_type_project(p: Union[JointInput, np.ndarray], n: int) -> JointInput:
    """Closest n-type to ``p`` in L-infinity distance.

    Largest-remainder rounding: every cell is floored to a multiple of ``1/n``
    and the missing mass goes to the cells with the largest fractional parts,
    lower flat index first on ties. The result is within ``1/n`` of ``p`` in
    every cell.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    arr = as_joint_input(p).p
    x = arr.ravel() * n
    r = np.rint(x)
    x = np.where(np.abs(x - r) <= TYPE_ATOL, r, x)
    floors = np.floor(x)
    frac = x - floors
    remaining = n - int(floors.sum())
    order = np.argsort(-frac, kind="stable")
    counts = floors.astype(np.int64)
    counts[order[:remaining]] += 1
    return JointInput(counts.reshape(arr.shape) / n, n)
