"""Grid approximations of Brownian motion, its local time and the iterated
scenery integrals built on top of it (Kesten-Spitzer process and beyond).

A level is turned into the next one by binning its occupation measure with
bin width ``h`` and integrating the resulting local time against an
independent bilateral Levy process sampled once per bin.  Because the
binned local time at grid time ``t_i`` is ``dt/h`` times a visit count, the
integral at every grid time is a cumulative sum of integrator increments
read along the path, which is how whole paths are built in O(N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import ndtri

from .parallel import map_ordered
from .rng import Gaussian, StableParams, StreamKey, _stable_from_uniforms, derive_stream, stream_keys, uniform01, zigzag
from .stats import SIGNIFICANCE, KSResult, alpha_exponent, batch_standard_error, ks_test

__all__ = [
    "StableParams",
    "GridProcess",
    "LocalTimeField",
    "SelfIntersectionEstimate",
    "Integrator",
    "DEFAULT_DT",
    "MAX_LEVEL",
    "bin_schedule",
    "brownian_path",
    "grid_local_time",
    "levy_integral",
    "integrate_along",
    "ks_process_delta",
    "gamma_process",
    "xi_tower",
    "xi_batch",
    "self_intersection_estimate",
    "inv_sqrt_sil",
    "TowerProcess",
    "sample_at_times",
    "stationary_increment_check",
    "self_similarity_check",
    "roughness_exponent",
    "KS_DELTA_SECOND_MOMENT",
    "YYY_CONSTANT",
]

DEFAULT_DT = 2.0**-14
MAX_LEVEL = 5

# E[V_1] for standard Brownian motion: 2 int int_{u<v} (2 pi (v-u))^{-1/2} du dv
KS_DELTA_SECOND_MOMENT = 8.0 / (3.0 * math.sqrt(2.0 * math.pi))
# E[Gamma(1)^2] / E[V_1^{-1/2}]
YYY_CONSTANT = 16.0 / 5.0 * math.sqrt(2.0 / math.pi)

Integrator = Union[Gaussian, StableParams]
STANDARD_BM = Gaussian(1.0)


@dataclass
class GridProcess:
    dt: float
    values: np.ndarray

    def __post_init__(self):
        if self.values[0] != 0:
            raise ValueError("grid processes start at 0")

    @property
    def horizon(self) -> float:
        return self.dt * (len(self.values) - 1)

    def at(self, t: float) -> float:
        return float(self.values[_step_of(t, self.dt)])

    def columns(self) -> list:
        return ["t", "value"]

    def rows(self):
        for k, v in enumerate(self.values):
            yield [k * self.dt, float(v)]


@dataclass
class LocalTimeField:
    """Binned local time: ``L[i, j]`` is the occupation density of bin
    ``[origin + j h, origin + (j+1) h)`` up to time ``times[i]``."""

    h: float
    origin: float
    times: np.ndarray
    L: np.ndarray
    dt: float

    @property
    def first_bin(self) -> int:
        """Absolute index of bin 0 (bins are aligned on multiples of ``h``)."""
        return int(round(self.origin / self.h))

    @property
    def bin_centres(self) -> np.ndarray:
        return self.origin + self.h * (np.arange(self.L.shape[1]) + 0.5)

    def row(self, t: float) -> np.ndarray:
        hit = np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=self.dt * 1e-6))
        if hit.size == 0:
            raise ValueError(f"t={t} is not one of the field's times")
        return self.L[hit[0]]

    def columns(self) -> list:
        return ["t", "x", "local_time"]

    def rows(self):
        centres = self.bin_centres
        for t, row in zip(self.times, self.L):
            for x, v in zip(centres, row):
                yield [float(t), float(x), float(v)]


@dataclass
class SelfIntersectionEstimate:
    value: float
    h: float
    dt: float
    support_length: float

    def __post_init__(self):
        # Cauchy-Schwarz: 1 = int L <= sqrt(|support|) sqrt(int L^2)
        if self.value * self.support_length < 1.0 - 1e-9:
            raise AssertionError("self-intersection estimate violates the Cauchy-Schwarz bound")


def _step_of(t: float, dt: float) -> int:
    k = t / dt
    kr = int(round(k))
    if abs(k - kr) > 1e-6:
        raise ValueError(f"t={t} is not on the grid of step {dt}")
    return kr


def bin_schedule(levels: int, dt: float = DEFAULT_DT, c: float = 1.0) -> tuple:
    """Bin widths ``c dt^{alpha_p}`` for the local times of levels ``1..levels``."""
    return tuple(c * dt ** float(alpha_exponent(p)) for p in range(1, levels + 1))


# ---------------------------------------------------------------------------
# single-path constructions


def _check_grid(dt: float, T: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not T >= dt:
        raise ValueError(f"T must be at least dt, got T={T}, dt={dt}")
    return _step_of(T, dt)


def _brownian_batch(dt: float, n_steps: int, variance_rate: float, keys: np.ndarray) -> np.ndarray:
    idx = np.arange(1, n_steps + 1, dtype=np.uint64)
    out = np.zeros((keys.shape[0], n_steps + 1))
    np.cumsum(math.sqrt(variance_rate * dt) * ndtri(uniform01(keys, idx)), axis=1, out=out[:, 1:])
    return out


def brownian_path(dt: float, T: float, variance_rate: float, key: StreamKey) -> GridProcess:
    n_steps = _check_grid(dt, T)
    if not variance_rate > 0:
        raise ValueError("variance rate must be positive")
    return GridProcess(dt, _brownian_batch(dt, n_steps, variance_rate, np.array([[key.key]], dtype=np.uint64))[0])


def grid_local_time(path: GridProcess, h: float, times: Optional[Sequence[float]] = None) -> LocalTimeField:
    """Occupation binning ``L(t, bin j) = dt * #{k < t/dt : path_k in bin j} / h``.

    Bins are aligned on multiples of ``h`` and cover the whole range of the
    path plus one empty bin on each side, so no time mass is lost.
    """
    if not h > 0:
        raise ValueError(f"bin width must be positive, got {h}")
    if times is None:
        times = [path.horizon]
    steps = [_step_of(t, path.dt) for t in times]
    if any(s < 0 or s > len(path.values) - 1 for s in steps):
        raise ValueError("requested times exceed the path horizon")
    bins = np.floor(path.values / h).astype(np.int64)
    lo, hi = int(bins.min()) - 1, int(bins.max()) + 1
    rel = bins - lo
    nb = hi - lo + 1
    L = np.zeros((len(steps), nb))
    order = np.argsort(steps, kind="stable")
    counts = np.zeros(nb)
    done = 0
    for i in order:
        s = steps[i]
        counts += np.bincount(rel[done:s], minlength=nb)
        done = s
        L[i] = counts
    L *= path.dt / h
    return LocalTimeField(h=h, origin=lo * h, times=np.array([s * path.dt for s in steps]), L=L, dt=path.dt)


def _bin_increments(integrator: Integrator, key, bins: np.ndarray, h: float) -> np.ndarray:
    """Increments of a bilateral integrator over bins ``[j h, (j+1) h)``.

    Non-negative and negative bins land on disjoint counter sets (even and
    odd zigzag codes), i.e. on two independent one-sided processes.
    """
    counter = zigzag(bins)
    if isinstance(integrator, Gaussian):
        return math.sqrt(integrator.variance * h) * ndtri(uniform01(key, counter))
    if isinstance(integrator, StableParams):
        return h ** (1.0 / integrator.beta) * _stable_from_uniforms(integrator, key, counter)
    raise TypeError(f"unsupported integrator {integrator!r}")


def levy_integral(field: LocalTimeField, t: float, integrator: Integrator, key: StreamKey) -> float:
    """``sum_j L(t, x_j) dU_j`` with one frozen integrator increment per bin."""
    row = field.row(t)
    bins = field.first_bin + np.arange(len(row))
    return float(np.dot(row, _bin_increments(integrator, key.key, bins, field.h)))


def integrate_along(paths: np.ndarray, dt: float, h: float, integrator: Integrator, keys: np.ndarray) -> np.ndarray:
    """Next tower level at every grid time for a batch of paths.

    Row ``r`` of the result equals ``levy_integral`` of the binned local time
    of ``paths[r]`` at each grid time, computed as a running sum.
    """
    bins = np.floor(paths[:, :-1] / h).astype(np.int64)
    incr = _bin_increments(integrator, keys, bins, h)
    out = np.zeros(paths.shape)
    np.cumsum(incr * (dt / h), axis=1, out=out[:, 1:])
    return out


def _level_keys(seed: int, level: int, replicas: Sequence[int]) -> np.ndarray:
    return stream_keys(seed, f"W:{level}", replicas)


def xi_batch(
    p: int,
    dt: float,
    T: float,
    seed: int,
    replicas: Sequence[int],
    h_schedule: Optional[Sequence[float]] = None,
    integrators: Optional[Sequence[Integrator]] = None,
) -> list:
    """Levels ``1..p`` of the continuum tower for a batch of replicas.

    ``h_schedule[q-1]`` bins level ``q``; ``integrators[q-1]`` drives level
    ``q+1`` (standard Brownian motion by default).
    """
    if p < 1:
        raise ValueError(f"tower level must be >= 1, got {p}")
    if p > MAX_LEVEL:
        raise ValueError(f"tower level {p} exceeds the cap {MAX_LEVEL}")
    n_steps = _check_grid(dt, T)
    h_schedule = tuple(h_schedule) if h_schedule is not None else bin_schedule(p - 1, dt)
    if len(h_schedule) < p - 1:
        raise ValueError(f"need {p - 1} bin widths, got {len(h_schedule)}")
    integrators = tuple(integrators) if integrators is not None else ()
    replicas = list(replicas)
    levels = [_brownian_batch(dt, n_steps, 1.0, stream_keys(seed, "B", replicas))]
    for q in range(1, p):
        integ = integrators[q - 1] if q - 1 < len(integrators) else STANDARD_BM
        levels.append(integrate_along(levels[-1], dt, h_schedule[q - 1], integ, _level_keys(seed, q, replicas)))
    return levels


def xi_tower(
    p: int,
    dt: float = DEFAULT_DT,
    T: float = 1.0,
    h_schedule: Optional[Sequence[float]] = None,
    seed: int = 0,
    replica: int = 0,
) -> list:
    """``[Xi^(1), ..., Xi^(p)]`` as grid processes for one replica."""
    return [GridProcess(dt, lev[0]) for lev in xi_batch(p, dt, T, seed, [replica], h_schedule)]


def ks_process_delta(dt: float = DEFAULT_DT, T: float = 1.0, h: Optional[float] = None, seed: int = 0, replica: int = 0) -> GridProcess:
    """Kesten-Spitzer process: Brownian local time integrated against an
    independent bilateral Brownian motion."""
    h = math.sqrt(dt) if h is None else h
    return xi_tower(2, dt, T, (h,), seed, replica)[1]


def gamma_process(
    dt: float = DEFAULT_DT,
    T: float = 1.0,
    h: Optional[Sequence[float]] = None,
    params: StableParams = StableParams(2.0, 1.0 / math.sqrt(2.0)),
    seed: int = 0,
    replica: int = 0,
) -> GridProcess:
    """Local time of the Kesten-Spitzer process integrated against a bilateral
    stable process whose value at 1 has law ``params``.

    The default ``params`` (beta = 2, sigma = 1/sqrt(2)) is standard Brownian
    motion.  ``h`` is the pair of bin widths for the two local times.
    """
    h = bin_schedule(2, dt) if h is None else tuple(h)
    return GridProcess(dt, xi_batch(3, dt, T, seed, [replica], h, (STANDARD_BM, _as_integrator(params)))[2][0])


def _as_integrator(params: StableParams) -> Integrator:
    if params.beta == 2.0:
        return Gaussian(2.0 * params.sigma**2)
    return params


# ---------------------------------------------------------------------------
# self-intersection local time


def self_intersection_estimate(path: GridProcess, h: float) -> SelfIntersectionEstimate:
    """``int L(T, x)^2 dx`` from the binned local time at the path horizon."""
    field = grid_local_time(path, h)
    row = field.L[0]
    return SelfIntersectionEstimate(
        value=float(np.dot(row, row) * h), h=h, dt=path.dt, support_length=np.count_nonzero(row) * h
    )


def _sil_batch(paths: np.ndarray, dt: float, h: float) -> np.ndarray:
    """Binned ``int L(1, x)^2 dx`` for each row, from the first ``N`` grid points."""
    bins = np.floor(paths[:, :-1] / h).astype(np.int64)
    bins -= bins.min(axis=1, keepdims=True)
    width = int(bins.max()) + 1
    flat = (bins + width * np.arange(len(paths))[:, None]).ravel()
    counts = np.bincount(flat, minlength=width * len(paths)).reshape(len(paths), width).astype(float)
    return (counts**2).sum(axis=1) * dt * dt / h


def _inv_sqrt_chunk(dt: float, h: float, seed: int, replicas) -> np.ndarray:
    b = _brownian_batch(dt, _step_of(1.0, dt), 1.0, stream_keys(seed, "B", replicas))
    v = _sil_batch(b, dt, h)
    sup = np.abs(b).max(axis=1)
    return np.stack([v, sup], axis=1)


def inv_sqrt_sil(
    replicas: int, dt: float = DEFAULT_DT, h: Optional[float] = None, seed: int = 0, workers: int = 1, return_samples: bool = False
):
    """Monte Carlo ``E[V_1^{-1/2}]`` for standard Brownian motion.

    Returns ``(estimate, std_error)``; with ``return_samples`` also the
    per-path ``V_1`` and ``sup |B|`` arrays.
    """
    h = math.sqrt(dt) if h is None else h
    size = max(1, (1 << 21) // _step_of(1.0, dt))
    reps = list(range(replicas))
    parts = map_ordered(partial(_inv_sqrt_chunk, dt, h, seed), [reps[i : i + size] for i in range(0, replicas, size)], workers)
    vs = np.concatenate(parts)
    inv = vs[:, 0] ** -0.5
    est, se = float(inv.mean()), float(batch_standard_error(inv))
    if return_samples:
        return est, se, vs[:, 0], vs[:, 1]
    return est, se


# ---------------------------------------------------------------------------
# statistical checks on the continuum levels


@dataclass(frozen=True)
class TowerProcess:
    """Constructor handle for level ``level`` of the continuum tower."""

    level: int
    dt: float = DEFAULT_DT
    h_schedule: Optional[tuple] = None

    def __call__(self, T: float, seed: int, replicas: Sequence[int]) -> np.ndarray:
        return xi_batch(self.level, self.dt, T, seed, replicas, self.h_schedule)[-1]


def _sample_at(process: Callable, T: float, times: Sequence[float], dt: float, seed: int, replicas: Sequence[int], workers: int):
    n = _step_of(T, dt)
    size = max(1, (1 << 21) // (n + 1))
    chunks = [replicas[i : i + size] for i in range(0, len(replicas), size)]
    idx = [_step_of(t, dt) for t in times]
    parts = map_ordered(partial(_take, process, T, seed, idx), chunks, workers)
    return np.concatenate(parts, axis=0)


def _take(process, T, seed, idx, replicas):
    return process(T, seed, replicas)[:, idx]


def sample_at_times(
    process: Callable, times: Sequence[float], replicas: int, seed: int = 0, dt: Optional[float] = None, workers: int = 1
) -> np.ndarray:
    """Values at ``times`` for replicas ``0..replicas-1``, shape ``(replicas, len(times))``."""
    dt = getattr(process, "dt", None) if dt is None else dt
    if dt is None:
        raise ValueError("grid step unknown: pass dt")
    return _sample_at(process, max(times), times, dt, seed, list(range(replicas)), workers)


def stationary_increment_check(
    process: Callable, t: float, s: float, replicas: int, seed: int = 0, dt: Optional[float] = None, workers: int = 1
) -> KSResult:
    """KS comparison of ``X(t+s) - X(t)`` with ``X(s)`` on disjoint replicas.

    ``process(T, seed, replicas)`` must return a batch of grid paths on
    ``[0, T]`` with step ``dt`` (taken from ``process.dt`` when present).
    """
    dt = getattr(process, "dt", None) if dt is None else dt
    if dt is None:
        raise ValueError("grid step unknown: pass dt")
    if not (t > 0 and s > 0):
        raise ValueError("t and s must be positive")
    a = _sample_at(process, t + s, (t, t + s), dt, seed, list(range(replicas)), workers)
    b = _sample_at(process, s, (s,), dt, seed, list(range(replicas, 2 * replicas)), workers)
    return ks_test(a[:, 1] - a[:, 0], b[:, 0], SIGNIFICANCE)


def self_similarity_check(
    level: int, c: float = 4.0, t: float = 0.25, replicas: int = 10_000, dt: float = DEFAULT_DT, seed: int = 0, workers: int = 1
) -> KSResult:
    """KS comparison of ``c^{-alpha_p} Xi^(p)(c t)`` with ``Xi^(p)(t)`` on disjoint replicas."""
    proc = TowerProcess(level, dt)
    alpha = float(alpha_exponent(level))
    a = _sample_at(proc, c * t, (c * t,), dt, seed, list(range(replicas)), workers)[:, 0] * c**-alpha
    b = _sample_at(proc, t, (t,), dt, seed, list(range(replicas, 2 * replicas)), workers)[:, 0]
    return ks_test(a, b, SIGNIFICANCE)


def roughness_exponent(path: GridProcess, max_lag: int = 64) -> float:
    """Exploratory Hoelder-type index: log-log slope of mean |increment| against lag."""
    lags = np.unique(np.round(np.geomspace(1, max_lag, 12)).astype(int))
    m = [np.mean(np.abs(path.values[l:] - path.values[:-l])) for l in lags]
    slope = np.polyfit(np.log(lags), np.log(m), 1)[0]
    return float(slope)
