"""Finite-blocklength checks: random superposition codes and a sampled converse.

Codes are constant-composition superposition codes with coded time sharing:
a fixed sequence ``u`` splits the block into a first section of length
``n1`` (input law ``P``) and a second of length ``n2 = round(beta sqrt(n))``
(input law ``P'``). Within each section every codeword pair has exactly the
projected joint type. Decoding uses the two-threshold information-density rule

    S1 > log M1 + gamma_a   and   S12 > log(M1 M2) + gamma_a,

declaring the unique pair that passes; none or several is an error.

Two simulation modes exist. *explicit* materializes the codebook and decodes
against every candidate. *ensemble* (binary alphabets, one section) averages
the false-alarm event over the random codebook exactly, given the received
sequence, which makes code sizes like ``e^{100}`` tractable.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from statsmodels.stats.proportion import proportion_confint

from .channel import Channel, JointInput, as_joint_input, check_compatible, joint_type_project
from .infogeom import density_tables, dispersion_matrix, mean_vector
from .mvnorm import symmetric_boundary_point

BLOCK = 4096
MAX_EXPLICIT_SYMBOLS = 2_000_000


def default_threshold_slack(n: int) -> float:
    return math.log(n) / (2.0 * math.sqrt(n))


def thread_count() -> int:
    raw = os.environ.get("MACDISP_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"MACDISP_THREADS must be an integer, got {raw!r}") from None
    if k < 0:
        raise ValueError("MACDISP_THREADS must be nonnegative")
    return k if k > 0 else (os.cpu_count() or 1)


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for ``errors / trials``."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    lo, hi = proportion_confint(errors, trials, alpha=0.05, method="wilson")
    return float(max(0.0, lo)), float(min(1.0, hi))


# ---------------------------------------------------------------------------
# codebooks

@dataclass(frozen=True)
class CodebookSpec:
    """Blocklength, code sizes, section input laws, time-sharing weight and seed."""

    n: int
    m1: int
    m2: int
    p: JointInput
    p_prime: JointInput | None = None
    beta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"blocklength must be a positive integer, got {self.n}")
        if int(self.m1) != self.m1 or int(self.m2) != self.m2 or self.m1 < 1 or self.m2 < 1:
            raise ValueError("message counts must be positive integers")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError("time-sharing weight must be finite and nonnegative")
        object.__setattr__(self, "p", as_joint_input(self.p))
        if self.p_prime is not None:
            object.__setattr__(self, "p_prime", as_joint_input(self.p_prime))
        if self.n2 > self.n:
            raise ValueError(f"second section length {self.n2} exceeds n = {self.n}")
        if self.n2 > 0 and self.p_prime is None:
            raise ValueError("a second input law is needed when the second section is nonempty")

    @classmethod
    def time_sharing(cls, n, m1, m2, p, p_prime=None, beta=0.0, seed=0) -> "CodebookSpec":
        return cls(int(n), int(m1), int(m2), as_joint_input(p),
                   None if p_prime is None else as_joint_input(p_prime), float(beta), int(seed))

    @property
    def n2(self) -> int:
        return int(round(self.beta * math.sqrt(self.n)))

    @property
    def n1(self) -> int:
        return self.n - self.n2

    @property
    def q(self) -> np.ndarray:
        """Joint law over (u, x1, x2) with ``Q_U(2) = n2 / n``."""
        second = self.p_prime.p if self.p_prime is not None else np.zeros_like(self.p.p)
        return np.stack([self.n1 / self.n * self.p.p, self.n2 / self.n * second])


@dataclass(frozen=True, eq=False)
class Codebook:
    """Realized code, or its ensemble description when not materialized.

    ``u[t]`` is the section index (0 for the first ``n1`` positions).
    ``counts[s]`` is the exact joint type of section ``s`` in symbol counts.
    ``j1``/``j12`` are per-section density tables ``[s, x1, x2, y]``.
    """

    spec: CodebookSpec
    channel: Channel
    u: np.ndarray
    counts: tuple
    j1: np.ndarray
    j12: np.ndarray
    x1: np.ndarray | None = None
    x2: np.ndarray | None = None

    @property
    def materialized(self) -> bool:
        return self.x1 is not None


def _section_types(spec: CodebookSpec):
    out = []
    for law, length in ((spec.p, spec.n1), (spec.p_prime, spec.n2)):
        if length == 0:
            out.append(None)
        else:
            out.append(joint_type_project(law, length))
    return out


def build_codebook(spec: CodebookSpec, ch: Channel, materialize: bool | None = None,
                   max_symbols: int = MAX_EXPLICIT_SYMBOLS) -> Codebook:
    """Draw a constant-composition superposition codebook.

    User-2 words are uniform over the section-wise type class of the
    projected ``x2`` marginal; each user-1 word is uniform over the
    conditional type class given ``(u, x2)``. ``materialize=None`` draws the
    words only when ``m1 * m2 * n <= max_symbols``.
    """
    check_compatible(spec.p, ch)
    if spec.p_prime is not None:
        check_compatible(spec.p_prime, ch)
    types = _section_types(spec)
    a1, a2 = ch.x1_size, ch.x2_size
    counts = tuple(np.zeros((a1, a2), np.int64) if t is None else t.counts for t in types)
    j1 = np.zeros((2, *ch.w.shape))
    j12 = np.zeros((2, *ch.w.shape))
    for s, t in enumerate(types):
        if t is not None:
            j1[s], j12[s] = density_tables(t.p, ch.w)
    u = np.concatenate([np.zeros(spec.n1, np.int64), np.ones(spec.n2, np.int64)])
    size = spec.m1 * spec.m2 * spec.n
    if materialize is None:
        materialize = size <= max_symbols
    if not materialize:
        return Codebook(spec, ch, u, counts, j1, j12)
    if size > max_symbols:
        raise ValueError(f"codebook of {size} symbols exceeds the explicit limit {max_symbols}")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    m1, m2 = spec.m1, spec.m2
    x2 = np.empty((m2, spec.n), np.int64)
    x1 = np.empty((m2, m1, spec.n), np.int64)
    for s in (0, 1):
        pos = np.flatnonzero(u == s)
        if len(pos) == 0:
            continue
        ms2 = np.repeat(np.arange(a2), counts[s].sum(axis=0))
        x2[:, pos] = rng.permuted(np.tile(ms2, (m2, 1)), axis=1)
    for k in range(m2):
        for s in (0, 1):
            for b in range(a2):
                idx = np.flatnonzero((u == s) & (x2[k] == b))
                if len(idx) == 0:
                    continue
                ms1 = np.repeat(np.arange(a1), counts[s][:, b])
                x1[k][:, idx] = rng.permuted(np.tile(ms1, (m1, 1)), axis=1)
    return Codebook(spec, ch, u, counts, j1, j12, x1, x2)


# ---------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class SimulationReport:
    trials: int
    errors: int
    eps_hat: float
    ci_low: float
    ci_high: float
    mode: str
    decoder: str
    gamma_a: float
    wall_clock: float = field(default=0.0, compare=False)
    records: tuple | None = field(default=None, compare=False)

    @property
    def wilson_half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "trials": self.trials, "errors": self.errors, "eps_hat": self.eps_hat,
            "ci_low": self.ci_low, "ci_high": self.ci_high, "mode": self.mode,
            "decoder": self.decoder, "gamma_a": self.gamma_a,
        }
        if timing:
            d["wall_clock"] = self.wall_clock
        if self.records is not None:
            d["records"] = list(self.records)
        return d


def _sample_outputs(rng, w, x1, x2):
    """Memoryless channel outputs for input rows ``x1``, ``x2`` of shape (B, n)."""
    cdf = np.cumsum(w, axis=-1)[x1, x2]
    y = (rng.random(x1.shape)[..., None] > cdf).sum(axis=-1)
    return np.minimum(y, w.shape[-1] - 1)


def _explicit_block(cb: Codebook, trials: int, rng, decoder, tau1, tau12, record):
    spec, w = cb.spec, cb.channel.w
    m1, m2, n = spec.m1, spec.m2, spec.n
    i1 = rng.integers(0, m1, trials)
    i2 = rng.integers(0, m2, trials)
    x1 = cb.x1[i2, i1]
    x2 = cb.x2[i2]
    y = _sample_outputs(rng, w, x1, x2)
    chunk = max(1, MAX_EXPLICIT_SYMBOLS // max(1, m1 * m2 * n))
    err = np.empty(trials, bool)
    dec = np.empty((trials, 2), np.int64)
    uu = cb.u[None, None, None, :]
    xx1 = cb.x1[None]
    xx2 = cb.x2[None, :, None, :]
    for lo in range(0, trials, chunk):
        sl = slice(lo, lo + chunk)
        yy = y[sl][:, None, None, :]
        with np.errstate(invalid="ignore"):
            if decoder == "ml":
                with np.errstate(divide="ignore"):
                    lw = np.log(w)
                metric = lw[xx1, xx2, yy].sum(axis=-1).reshape(len(y[sl]), -1)
                best = metric.max(axis=1)
                arg = metric.argmax(axis=1)
                unique = (metric == best[:, None]).sum(axis=1) == 1
                ok = unique & (arg == i2[sl] * m1 + i1[sl])
                dec[sl] = np.column_stack([arg % m1, arg // m1])
            else:
                s1 = cb.j1[uu, xx1, xx2, yy].sum(axis=-1)
                s12 = cb.j12[uu, xx1, xx2, yy].sum(axis=-1)
                passed = ((s1 > tau1) & (s12 > tau12)).reshape(len(y[sl]), -1)
                count = passed.sum(axis=1)
                truth = passed[np.arange(len(y[sl])), i2[sl] * m1 + i1[sl]]
                ok = truth & (count == 1)
                arg = passed.argmax(axis=1)
                dec[sl] = np.where(count[:, None] == 1, np.column_stack([arg % m1, arg // m1]), -1)
        err[sl] = ~ok
    recs = None
    if record:
        recs = [{"m1": int(a), "m2": int(b), "decoded": [int(c), int(d)], "error": bool(e)}
                for a, b, (c, d), e in zip(i1, i2, dec, err)]
    return int(err.sum()), recs


class _Ensemble:
    """Exact codebook-averaged false-alarm probability given the received counts.

    Binary alphabets, one section, strictly positive channel. The decoder's
    statistics of a non-transmitted word depend only on how its symbols
    overlap the ones of ``y`` inside each ``x2`` class, which is a pair of
    independent hypergeometric variables.
    """

    def __init__(self, cb: Codebook, tau1: float, tau12: float):
        self.cnt = cb.counts[0]
        self.n = cb.spec.n
        self.tau1, self.tau12 = tau1, tau12
        self.m1 = float(cb.spec.m1)
        self.m2 = float(cb.spec.m2)
        self.j = cb.j1[0]
        self.d = cb.j12[0][0] - cb.j1[0][0]  # log P(y|x2) / P(y), per (x2, y)
        self.nb = self.cnt.sum(axis=0)
        self._p: dict = {}
        self._q: dict = {}
        self._class: dict = {}

    def _class_law(self, b: int, c: int):
        key = (b, c)
        if key not in self._class:
            nb, n1b = int(self.nb[b]), int(self.cnt[1, b])
            j = self.j[:, b, :]
            lo, hi = max(0, n1b + c - nb), min(n1b, c)
            t = np.arange(lo, hi + 1)
            pmf = stats.hypergeom.pmf(t, nb, c, n1b) if nb > 0 else np.ones(1)
            g = t * j[1, 1] + (n1b - t) * j[1, 0] + (c - t) * j[0, 1] + (nb - n1b - c + t) * j[0, 0]
            order = np.argsort(g, kind="stable")
            g, pmf = g[order], pmf[order]
            tail = np.concatenate([np.cumsum(pmf[::-1])[::-1], [0.0]])
            self._class[key] = (g, pmf, tail)
        return self._class[key]

    def p_pass(self, c0: int, c1: int) -> float:
        """Probability that a random satellite with class y-counts (c0, c1) passes both tests."""
        key = (c0, c1)
        if key not in self._p:
            d = (c0 * self.d[0, 1] + (self.nb[0] - c0) * self.d[0, 0]
                 + c1 * self.d[1, 1] + (self.nb[1] - c1) * self.d[1, 0])
            thr = max(self.tau1, self.tau12 - d)
            g0, pmf0, _ = self._class_law(0, c0)
            g1, _, tail1 = self._class_law(1, c1)
            idx = np.searchsorted(g1, thr - g0, side="right")
            self._p[key] = float(min(1.0, np.sum(pmf0 * tail1[idx])))
        return self._p[key]

    def q_cloud(self, k: int) -> float:
        """Probability that some satellite of a wrong cloud passes, given ``k`` ones in y."""
        if k not in self._q:
            k1 = int(self.nb[1])
            s = np.arange(max(0, k1 + k - self.n), min(k1, k) + 1)
            pmf = stats.hypergeom.pmf(s, self.n, k1, k)
            keep = pmf > 1e-300
            acc = 0.0
            for si, ps in zip(s[keep], pmf[keep]):
                p2 = self.p_pass(int(k - si), int(si))
                acc += ps * -math.expm1(self.m1 * math.log1p(-p2)) if p2 < 1 else ps
            self._q[k] = min(1.0, acc)
        return self._q[k]

    def p_false_alarm(self, c0: int, c1: int) -> float:
        p1 = self.p_pass(c0, c1)
        q = self.q_cloud(c0 + c1)
        if p1 >= 1.0 and self.m1 > 1 or q >= 1.0 and self.m2 > 1:
            return 1.0
        la = (self.m1 - 1) * math.log1p(-p1) if self.m1 > 1 else 0.0
        lb = (self.m2 - 1) * math.log1p(-q) if self.m2 > 1 else 0.0
        return -math.expm1(la + lb)


def _ensemble_block(cb: Codebook, ens: _Ensemble, trials: int, rng, tau1, tau12, record):
    w = cb.channel.w
    cnt = cb.counts[0]
    ones = rng.binomial(cnt[None], w[None, :, :, 1], size=(trials, *cnt.shape))
    zeros = cnt[None] - ones
    j1, j12 = cb.j1[0], cb.j12[0]
    s1 = np.einsum("tab,ab->t", ones, j1[:, :, 1]) + np.einsum("tab,ab->t", zeros, j1[:, :, 0])
    s12 = np.einsum("tab,ab->t", ones, j12[:, :, 1]) + np.einsum("tab,ab->t", zeros, j12[:, :, 0])
    miss = ~((s1 > tau1) & (s12 > tau12))
    c = ones.sum(axis=1)
    pfa = np.array([ens.p_false_alarm(int(a), int(b)) for a, b in c])
    draw = rng.random(trials)
    err = miss | (draw < pfa)
    recs = None
    if record:
        recs = [{"miss": bool(m), "p_false_alarm": float(p), "error": bool(e)}
                for m, p, e in zip(miss, pfa, err)]
    return int(err.sum()), recs


def simulate_error(cb: Codebook, ch: Channel, trials: int, decoder: str = "threshold",
                   gamma_a: float | None = None, record: bool = False,
                   threads: int | None = None) -> SimulationReport:
    """Monte Carlo block error rate of the code (explicit) or of the ensemble.

    Trials are split into fixed blocks seeded by ``(seed, 1, block)``, so the
    result does not depend on the number of worker threads.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if ch != cb.channel:
        raise ValueError("codebook was built for a different channel")
    if decoder not in ("threshold", "ml"):
        raise ValueError(f"unknown decoder {decoder!r}")
    spec = cb.spec
    ga = default_threshold_slack(spec.n) if gamma_a is None else float(gamma_a)
    tau1 = math.log(spec.m1) + ga
    tau12 = math.log(spec.m1) + math.log(spec.m2) + ga
    if cb.materialized:
        mode = "explicit"
        run = lambda t, r: _explicit_block(cb, t, r, decoder, tau1, tau12, record)
    else:
        if decoder != "threshold":
            raise ValueError("maximum-likelihood decoding needs a materialized codebook")
        if spec.n2 > 0 or ch.w.shape != (2, 2, 2) or np.any(ch.w <= 0):
            raise ValueError("ensemble simulation supports one section, binary alphabets "
                             "and a strictly positive channel")
        mode = "ensemble"
        ens = _Ensemble(cb, tau1, tau12)
        run = lambda t, r: _ensemble_block(cb, ens, t, r, tau1, tau12, record)
    sizes = [min(BLOCK, trials - lo) for lo in range(0, trials, BLOCK)]

    def job(k):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1, k]))
        return run(sizes[k], rng)

    start = time.perf_counter()
    workers = threads if threads is not None else thread_count()
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(len(sizes))))
    else:
        results = [job(k) for k in range(len(sizes))]
    wall = time.perf_counter() - start
    errors = sum(r[0] for r in results)
    recs = tuple(x for r in results for x in r[1]) if record else None
    lo, hi = wilson_interval(errors, trials)
    return SimulationReport(trials, errors, errors / trials, lo, hi, mode, decoder, ga, wall, recs)


# ---------------------------------------------------------------------------
# converse and Gaussian approximation

@dataclass(frozen=True)
class ConverseBound:
    value: float
    stderr: float
    probability: float
    gamma: float
    samples: int

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "probability": self.probability,
                "gamma": self.gamma, "samples": self.samples}


def verdu_han_bound(p_n, ch: Channel, n: int, r1: float, r2: float, gamma: float | None = None,
                    samples: int = 100_000, seed: int = 0) -> ConverseBound:
    """Sampled lower bound ``1 - Pr(S/n >= R - gamma) - 2 exp(-n gamma)`` on the error.

    ``S`` is the density sum of a fixed input pair of type ``P_n`` with
    output laws induced by ``P_n``; ``R = (R1, R1 + R2)``. Default
    ``gamma = log(n) / n``.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if samples < 1:
        raise ValueError("samples must be positive")
    p_n = as_joint_input(p_n)
    check_compatible(p_n, ch)
    scaled = p_n.p * n
    if np.max(np.abs(scaled - np.rint(scaled))) > 1e-9:
        raise ValueError(f"the type class of this input at n = {n} is empty")
    g = math.log(n) / n if gamma is None else float(gamma)
    if g <= 0:
        raise ValueError("gamma must be positive")
    counts = np.rint(scaled).astype(np.int64)
    j1, j12 = density_tables(p_n.p, ch.w)
    pos = ch.w > 0
    j1 = np.where(pos, j1, 0.0)
    j12 = np.where(pos, j12, 0.0)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
    s1 = np.zeros(samples)
    s12 = np.zeros(samples)
    for a in range(ch.x1_size):
        for b in range(ch.x2_size):
            if counts[a, b] == 0:
                continue
            ys = rng.multinomial(counts[a, b], ch.w[a, b], size=samples)
            s1 += ys @ j1[a, b]
            s12 += ys @ j12[a, b]
    hit = (s1 / n >= r1 - g) & (s12 / n >= r1 + r2 - g)
    prob = float(hit.mean())
    value = float(np.clip(1.0 - prob - 2.0 * math.exp(-n * g), 0.0, 1.0))
    se = math.sqrt(prob * (1 - prob) / samples)
    return ConverseBound(value, se, prob, g, samples)


@dataclass(frozen=True)
class GaussianRates:
    """Rate pairs ``(R1, R2)`` from the Gaussian approximation, with the offset used.

    The ``O(n^{1/4})`` correction of the achievability statement is omitted.
    """

    achievable: tuple[float, float]
    converse: tuple[float, float]
    z: tuple[float, float]
    asymptotic: bool = True


def gaussian_approx_rates(ch: Channel, p, n: int, eps: float, beta: float = 0.0,
                          p_prime=None, z=None) -> GaussianRates:
    """``I + (beta (I' - I) + z) / sqrt(n)`` and ``I + z / sqrt(n)`` in pair form.

    ``z`` is a point of ``Psi^{-1}(V(P), eps)`` in ``(R1, R1 + R2)``
    coordinates; the default is the boundary point with equal standardized
    backoff in both coordinates.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if n < 1:
        raise ValueError("n must be positive")
    p = as_joint_input(p)
    iv = mean_vector(p, ch).as_array()
    if z is None:
        z = symmetric_boundary_point(dispersion_matrix(p, ch), eps)
    z = np.asarray(z, dtype=np.float64)
    shift = np.zeros(2)
    if beta:
        if p_prime is None:
            raise ValueError("a second input law is needed for beta > 0")
        shift = beta * (mean_vector(p_prime, ch).as_array() - iv)
    ach = iv + (shift + z) / math.sqrt(n)
    con = iv + z / math.sqrt(n)
    pair = lambda r: (float(r[0]), float(r[1] - r[0]))
    return GaussianRates(pair(ach), pair(con), (float(z[0]), float(z[1])))


def message_counts(n: int, r1: float, r2: float) -> tuple[int, int]:
    """``(round(e^{n R1}), round(e^{n R2}))``, at least 1 each."""
    return max(1, int(round(math.exp(n * r1)))), max(1, int(round(math.exp(n * r2))))
