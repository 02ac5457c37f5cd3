"""Monte Carlo moments, scaling-exponent fits, KS distances and exact oracles."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import kolmogorov

from .parallel import map_ordered
from .rng import FiniteInt, Rademacher, has_finite_moment, raw_bits, stream_keys, zigzag
from .walks import ProcessSpec, chunk_replicas, local_time, walk_batch

log = logging.getLogger(__name__)

SIGNIFICANCE = 1e-3
MEDIAN = "median"
DEFAULT_HORIZONS = tuple(2**k for k in range(8, 17))
N_BATCHES = 20


# ---------------------------------------------------------------------------
# exponents


def alpha_exponent(p: int) -> Fraction:
    """Self-similarity index of the level-p process, ``2/3 + (-1/2)**p / 3``."""
    if p < 0:
        raise ValueError(f"level must be >= 0, got {p}")
    return Fraction(2, 3) + Fraction(-1, 2) ** p / 3


def delta_exponent(alpha: float, beta: float) -> float:
    """Growth exponent ``1 - alpha (1 - 1/beta)`` of a beta-stable scenery read
    along an alpha-self-similar driver."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 1.0 < beta <= 2.0:
        raise ValueError(f"beta must lie in (1, 2], got {beta}")
    return 1.0 - alpha * (1.0 - 1.0 / beta)


# ---------------------------------------------------------------------------
# moment curves


@dataclass
class MomentEntry:
    n: int
    q: Union[float, str]
    estimate: float
    std_error: float
    replicas: int


@dataclass
class MomentCurve:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        ns = [e.n for e in self.entries]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("moment curve horizons must be strictly increasing")

    @property
    def horizons(self) -> np.ndarray:
        return np.array([e.n for e in self.entries], dtype=float)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([e.estimate for e in self.entries], dtype=float)

    @property
    def std_errors(self) -> np.ndarray:
        return np.array([e.std_error for e in self.entries], dtype=float)

    @property
    def degenerate(self) -> bool:
        """True when some horizon has a zero standard error despite several replicas."""
        return any(e.std_error == 0 and e.replicas > 1 for e in self.entries)

    def columns(self) -> list:
        return ["n", "q", "estimate", "std_error", "replicas"]

    def rows(self):
        for e in self.entries:
            yield [e.n, e.q, e.estimate, e.std_error, e.replicas]

    @classmethod
    def from_rows(cls, rows) -> "MomentCurve":
        entries = []
        for n, q, est, se, reps in rows:
            q = q if q == MEDIAN else float(q)
            entries.append(MomentEntry(int(n), q, float(est), float(se), int(reps)))
        return cls(entries)


def batch_standard_error(values: np.ndarray, statistic: Callable = np.mean, batches: int = N_BATCHES) -> np.ndarray:
    """Standard error of ``statistic`` along axis 0 from contiguous batches."""
    values = np.asarray(values, dtype=float)
    b = min(batches, len(values))
    if b < 2:
        return np.zeros(values.shape[1:])
    groups = np.array_split(values, b, axis=0)
    stats = np.stack([statistic(g, axis=0) for g in groups])
    return stats.std(axis=0, ddof=1) / math.sqrt(b)


def _endpoints_chunk(spec: ProcessSpec, horizons: tuple, seed: int, replicas) -> np.ndarray:
    paths = spec.paths(max(horizons), seed, replicas)
    return paths[:, list(horizons)]


def endpoint_samples(
    spec: ProcessSpec, horizons: Sequence[int], replicas: int, seed: int, workers: int = 1, first_replica: int = 0
) -> np.ndarray:
    """``X_n`` for each horizon, one row per replica: shape ``(replicas, len(horizons))``."""
    horizons = tuple(int(h) for h in horizons)
    reps = list(range(first_replica, first_replica + replicas))
    chunks = list(chunk_replicas(reps, max(horizons)))
    parts = map_ordered(partial(_endpoints_chunk, spec, horizons, seed), chunks, workers)
    return np.concatenate(parts, axis=0)


def moment_curve(
    spec: ProcessSpec,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    q: Union[float, str] = 2,
    replicas: int = 4000,
    seed: int = 0,
    workers: int = 1,
) -> MomentCurve:
    """Monte Carlo ``E|X_n|^q`` (or the median of ``|X_n|``) along ``horizons``.

    Every horizon is read off the same set of paths; errors are batch-means
    standard errors over replicas.
    """
    if replicas < 2:
        raise ValueError("moment_curve needs at least 2 replicas")
    if not horizons:
        raise ValueError("moment_curve needs at least one horizon")
    if q != MEDIAN:
        q = float(q)
        if not has_finite_moment(spec.final_dist, q):
            raise ValueError(f"the {q}-th moment of {spec.final_dist!r} is infinite; use q='median'")
    samples = np.abs(endpoint_samples(spec, horizons, replicas, seed, workers).astype(float))
    if q == MEDIAN:
        est = np.median(samples, axis=0)
        se = batch_standard_error(samples, np.median)
    else:
        vals = samples**q
        est = vals.mean(axis=0)
        se = batch_standard_error(vals)
    curve = MomentCurve([MomentEntry(int(n), q, float(e), float(s), replicas) for n, e, s in zip(horizons, est, se)])
    if curve.degenerate:
        log.warning("moment curve has zero standard errors: the process looks degenerate")
    return curve


@dataclass
class ExponentFit:
    alpha_hat: float
    std_error: float
    r_squared: float
    intercept: float

    @property
    def in_range(self) -> bool:
        return 0.0 < self.alpha_hat < 1.0


def fit_scaling_exponent(curve: MomentCurve) -> ExponentFit:
    """OLS of ``log2 estimate`` on ``log2 n``; the slope is divided by ``q`` for moment curves."""
    if len(curve.entries) < 3:
        raise ValueError("need at least 3 horizons to fit an exponent")
    y_raw = curve.estimates
    if np.any(y_raw <= 0):
        raise ValueError("cannot fit a power law through non-positive estimates")
    x = np.log2(curve.horizons)
    y = np.log2(y_raw)
    q = curve.entries[0].q
    scale = 1.0 if q == MEDIAN else float(q)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    se = math.sqrt(ss_res / (len(x) - 2) / sxx) if len(x) > 2 else 0.0
    fit = ExponentFit(float(slope / scale), se / scale, r2, float(intercept))
    if not fit.in_range:
        log.warning("fitted exponent %.4f lies outside (0, 1)", fit.alpha_hat)
    return fit


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("KS distance needs two non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical_value(n: int, m: int, level: float = SIGNIFICANCE) -> float:
    """Asymptotic two-sample critical value ``c(level) sqrt((n+m)/(n m))``."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n + m) / (n * m))


@dataclass
class KSResult:
    statistic: float
    threshold: float
    p_value: float
    passed: bool


def ks_test(sample_a, sample_b, level: float = SIGNIFICANCE) -> KSResult:
    n, m = np.size(sample_a), np.size(sample_b)
    d = ks_distance(sample_a, sample_b)
    thr = ks_critical_value(n, m, level)
    p = float(kolmogorov(d * math.sqrt(n * m / (n + m))))
    return KSResult(d, thr, p, d <= thr)


# ---------------------------------------------------------------------------
# exact oracles


def return_probabilities(step_dist, n: int) -> list:
    """Exact ``P(Z_m = 0)`` for ``m = 0..n`` by convolving the step law."""
    if isinstance(step_dist, Rademacher):
        step_dist = FiniteInt(((-1, Fraction(1, 2)), (1, Fraction(1, 2))))
    if not isinstance(step_dist, FiniteInt):
        raise ValueError("exact return probabilities need a finitely supported step law")
    pmf = {0: Fraction(1)}
    out = [Fraction(1)]
    for _ in range(n):
        nxt: dict = {}
        for x, px in pmf.items():
            for v, pv in step_dist.support:
                nxt[x + v] = nxt.get(x + v, 0) + px * pv
        pmf = nxt
        out.append(pmf.get(0, Fraction(0)))
    return out


def expected_self_intersection(step_dist, n: int) -> Fraction:
    """``E[V_n] = sum_{k,l<n} P(Z_{|k-l|} = 0)`` for the walk with ``step_dist``."""
    p0 = return_probabilities(step_dist, max(n - 1, 0))
    return n + 2 * sum((n - m) * p0[m] for m in range(1, n))


def pa2_second_moment(step_dist, scenery_second_moment, n: int) -> Fraction:
    """``E[PA(2)_n^2] = E[xi^2] sum_{k,l=1}^n P(Z_{|k-l|} = 0)``."""
    return Fraction(scenery_second_moment) * expected_self_intersection(step_dist, n)


def pa2_point_probability(n: int, x: int = 0) -> Fraction:
    """Exact ``P(PA(2)_n = x)`` for Rademacher walk and scenery, by enumeration.

    The last step never affects ``PA(2)_n``, so ``2^(n-1)`` walk prefixes
    are enumerated and the scenery sum is convolved site by site.
    """
    if n < 0 or n > 20:
        raise ValueError("exact enumeration is limited to 0 <= n <= 20")
    if n == 0:
        return Fraction(int(x == 0))
    total = Fraction(0)
    for steps in itertools.product((-1, 1), repeat=n - 1):
        sites = np.concatenate([[0], np.cumsum(steps, dtype=np.int64)])
        pmf = {0: Fraction(1)}
        for c in np.unique(sites, return_counts=True)[1]:
            nxt: dict = {}
            for v, pv in pmf.items():
                for s in (-int(c), int(c)):
                    nxt[v + s] = nxt.get(v + s, 0) + pv / 2
            pmf = nxt
        total += pmf.get(x, Fraction(0))
    return total / 2 ** (n - 1)


# ---------------------------------------------------------------------------
# local limit constant


_BIT_SHIFTS = np.arange(64, dtype=np.uint64)


def _llt_chunk(horizons: tuple, seed: int, draws: int, replicas) -> np.ndarray:
    """Hit fractions ``#{sceneries with PA(2)_n = 0} / draws`` per (replica, horizon).

    Every 64-bit hash of a site supplies that site's sign in 64 independent
    Rademacher sceneries, one per bit.
    """
    keys = stream_keys(seed, "eta", replicas)
    z = walk_batch(Rademacher(), max(horizons), keys)
    blocks = -(-draws // 64)
    out = np.empty((len(replicas), len(horizons)))
    for i, r in enumerate(replicas):
        lo = int(z[i, : max(horizons)].min())
        width = int(z[i, : max(horizons)].max()) - lo + 1
        counts = np.stack(
            [np.bincount(z[i, :n] - lo, minlength=width) for n in horizons], axis=1
        ).astype(np.float32)
        sites = zigzag(np.arange(lo, lo + width))
        block_keys = stream_keys(seed, f"xi1:llt:{r}", range(blocks))
        bits = raw_bits(block_keys, sites[None, :])
        signs = ((bits[:, None, :] >> _BIT_SHIFTS[None, :, None]) & np.uint64(1)).astype(np.float32)
        signs = (2 * signs - 1).reshape(blocks * 64, width)[:draws]
        # integer valued and below 2**24, so float32 sums are exact
        x_n = signs @ counts
        out[i] = np.count_nonzero(x_n == 0, axis=0) / draws
    return out


def llt_constant_estimate(
    horizons: Sequence[int], replicas: int, seed: int, draws: int = 4096, workers: int = 1
) -> list:
    """``(n, n^(3/4) P(PA(2)_n = 0), std_error)`` for Rademacher walk and scenery.

    Each driving walk is paired with ``draws`` independent sceneries, and the
    point probability is the plain hit frequency over all (walk, scenery)
    pairs.  Odd horizons are rejected: ``PA(2)_n`` has the parity of ``n``.
    """
    horizons = tuple(int(h) for h in horizons)
    if any(h % 2 for h in horizons):
        raise ValueError("PA(2)_n = 0 is impossible for odd n; use even horizons")
    reps = list(range(replicas))
    size = max(1, (1 << 22) // max(horizons))
    chunks = [reps[i : i + size] for i in range(0, replicas, size)]
    hits = np.concatenate(map_ordered(partial(_llt_chunk, horizons, seed, draws), chunks, workers))
    p = hits.mean(axis=0)
    se = batch_standard_error(hits)
    scale = np.array(horizons, dtype=float) ** 0.75
    return [(n, float(s * pi), float(s * e)) for n, s, pi, e in zip(horizons, scale, p, se)]


# ---------------------------------------------------------------------------
# stationarity


def stationarity_check(
    process: Union[ProcessSpec, Callable], n: int, lag: int, replicas: int, seed: int, level: float = SIGNIFICANCE
) -> KSResult:
    """KS comparison of ``X_{lag+n} - X_lag`` against ``X_n`` on disjoint replicas.

    ``process`` is a :class:`ProcessSpec` or a callable
    ``(horizon, seed, replica_list) -> paths``.
    """
    if replicas < 100:
        raise ValueError("stationarity_check needs at least 100 replicas")
    sampler = process.paths if isinstance(process, ProcessSpec) else process
    a = sampler(lag + n, seed, list(range(replicas)))
    b = sampler(n, seed, list(range(replicas, 2 * replicas)))
    return ks_test(a[:, lag + n] - a[:, lag], b[:, n], level)
