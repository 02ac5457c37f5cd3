"""Discrete processes: PA(p) towers, the oriented 3D lattice walks and their variants.

All simulators are vectorised over replicas: internally a batch of paths is
a 2-D array with one row per replica.  The single-path functions are thin
wrappers around the batch kernels, so a path obtained one at a time is
bit-identical to the corresponding row of a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .rng import (
    FiniteInt,
    Rademacher,
    Scenery,
    SceneryDist,
    derive_stream,
    is_centered,
    is_integer_dist,
    raw_bits,
    stream_keys,
    zigzag,
)

MAX_HORIZON = 2**31 - 1
# rows * columns per batch array; bounds memory to a few tens of MB
_BATCH_CELLS = 1 << 22

VARIANTS = ("twin_papa", "papa_driven_by_y", "papa_driven_by_z", "papa_driven_by_2d")


def _check_horizon(n: int) -> int:
    n = int(n)
    if n < 0 or n > MAX_HORIZON:
        raise ValueError(f"horizon must lie in [0, 2**31 - 1], got {n}")
    return n


def _prepend_zero(increments: np.ndarray) -> np.ndarray:
    out = np.zeros(increments.shape[:-1] + (increments.shape[-1] + 1,), dtype=increments.dtype)
    np.cumsum(increments, axis=-1, out=out[..., 1:])
    return out


def chunk_replicas(replicas: Sequence[int], n: int) -> Iterator[Sequence[int]]:
    """Split a replica list so each batch array stays near ``_BATCH_CELLS`` cells."""
    size = max(1, _BATCH_CELLS // max(n + 1, 1))
    for i in range(0, len(replicas), size):
        yield replicas[i : i + size]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class TowerConfig:
    """Laws and seed of a PA(p) tower.

    ``sceneries[q-1]`` is the scenery read by level ``q`` to build level
    ``q+1``; missing entries default to Rademacher.
    """

    master_seed: int = 0
    step: SceneryDist = field(default_factory=Rademacher)
    sceneries: tuple = ()

    def scenery_dist(self, q: int) -> SceneryDist:
        if q - 1 < len(self.sceneries):
            return self.sceneries[q - 1]
        return Rademacher()

    def scenery(self, q: int, replica: int = 0) -> Scenery:
        return Scenery(derive_stream(self.master_seed, scenery_label(q), replica), self.scenery_dist(q))


def scenery_label(q: int) -> str:
    return f"xi{q}"


# ---------------------------------------------------------------------------
# domain types


@dataclass
class PaTower:
    """Levels 1..depth of a PA(p) tower, each an array of positions at times 0..n."""

    paths: list
    config: TowerConfig
    replica: int = 0

    @property
    def depth(self) -> int:
        return len(self.paths)

    @property
    def n(self) -> int:
        return len(self.paths[0]) - 1

    def columns(self) -> list:
        return ["step"] + [f"level_{q}" for q in range(1, self.depth + 1)]

    def rows(self):
        for k in range(self.n + 1):
            yield [k] + [p[k].item() for p in self.paths]


@dataclass
class Path3D:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.stack([self.x, self.y, self.z], axis=-1)

    @property
    def n(self) -> int:
        return len(self.x) - 1

    def columns(self) -> list:
        return ["step", "x", "y", "z"]

    def rows(self):
        for k in range(self.n + 1):
            yield [k, int(self.x[k]), int(self.y[k]), int(self.z[k])]


@dataclass
class LocalTimeTable:
    """Occupation counts ``N(n, x)`` stored densely over ``[origin, origin + len(dense))``."""

    origin: int
    dense: np.ndarray
    n: int

    @property
    def counts(self) -> dict:
        nz = np.flatnonzero(self.dense)
        return {int(self.origin + i): int(self.dense[i]) for i in nz}

    def __getitem__(self, site: int) -> int:
        i = site - self.origin
        return int(self.dense[i]) if 0 <= i < len(self.dense) else 0

    def columns(self) -> list:
        return ["site", "count"]

    def rows(self):
        for site, count in self.counts.items():
            yield [site, count]


@dataclass(frozen=True)
class LatticeSpan:
    """``P(X_1 in d0 * (a + d Z)) = 1`` with ``d`` maximal and ``gcd(a, d) = 1``."""

    d: int
    a: int
    d0: int = 1

    def contains(self, value: int) -> bool:
        return value % self.d0 == 0 and (value // self.d0 - self.a) % self.d == 0


# ---------------------------------------------------------------------------
# batch kernels


def walk_batch(step: SceneryDist, n: int, keys: np.ndarray) -> np.ndarray:
    """Random walks with i.i.d. steps; step ``k`` (1-based) is drawn at counter ``k``."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    return _prepend_zero(step.sample(keys, idx))


def scenery_sum_batch(dist: SceneryDist, keys: np.ndarray, driver: np.ndarray) -> np.ndarray:
    """Partial sums ``sum_{j<=k} xi_{driver[j-1]}`` for every row of ``driver``."""
    return _prepend_zero(dist.sample(keys, zigzag(driver[..., :-1])))


def tower_batch(depth: int, n: int, config: TowerConfig, replicas: Sequence[int]) -> list:
    """Levels 1..depth for a batch of replicas, each of shape ``(len(replicas), n+1)``."""
    if depth < 1:
        raise ValueError(f"tower depth must be >= 1, got {depth}")
    if not is_integer_dist(config.step):
        raise ValueError("the level-1 step law must be integer valued")
    for q in range(1, depth - 1):
        if not is_integer_dist(config.scenery_dist(q)):
            raise ValueError(f"scenery xi{q} feeds a lattice level and must be integer valued")
    replicas = list(replicas)
    levels = [walk_batch(config.step, n, stream_keys(config.master_seed, "eta", replicas))]
    for q in range(1, depth):
        keys = stream_keys(config.master_seed, scenery_label(q), replicas)
        levels.append(scenery_sum_batch(config.scenery_dist(q), keys, levels[-1]))
    return levels


def _check_step_dist(step_dist: SceneryDist) -> None:
    if not is_integer_dist(step_dist):
        raise ValueError("random walk steps must be integer valued")
    if not is_centered(step_dist):
        raise ValueError("random walk steps must be centred")


# ---------------------------------------------------------------------------
# single-path simulators


def simulate_srw(step_dist: SceneryDist, n: int, key) -> np.ndarray:
    """Random walk ``Z_0 = 0, Z_k = eta_1 + ... + eta_k`` driven by ``key``."""
    _check_step_dist(step_dist)
    n = _check_horizon(n)
    return walk_batch(step_dist, n, np.asarray([[key.key]], dtype=np.uint64))[0]


def simulate_pa_tower(depth: int, n: int, config: TowerConfig, replica: int = 0) -> PaTower:
    n = _check_horizon(n)
    levels = tower_batch(depth, n, config, [replica])
    return PaTower([lev[0] for lev in levels], config, replica)


def replay_level(lower: np.ndarray, scenery) -> np.ndarray:
    """Rebuild the next tower level from ``lower`` one site query at a time.

    ``scenery`` is a :class:`Scenery` or any mapping from sites to values.
    """
    if isinstance(scenery, Scenery):
        lookup = lambda site: scenery.at(site).item()  # noqa: E731
        real = not is_integer_dist(scenery.dist)
    else:
        lookup = scenery.__getitem__
        real = any(isinstance(scenery[int(s)], float) for s in np.unique(lower[:-1]))
    out = np.zeros(len(lower), dtype=np.float64 if real else np.int64)
    for j in range(1, len(lower)):
        out[j] = out[j - 1] + lookup(int(lower[j - 1]))
    return out


def _oriented_keys(seed: int, replicas: Sequence[int]) -> tuple:
    return tuple(stream_keys(seed, label, replicas) for label in ("eta", "xi1", "xi2"))


def oriented3d_batch(n: int, seed: int, replicas: Sequence[int]) -> tuple:
    """(X, Y, Z) of the full-step oriented lattice walk for a batch of replicas."""
    eta, xi1, xi2 = _oriented_keys(seed, replicas)
    z = walk_batch(Rademacher(), n, eta)
    x = scenery_sum_batch(Rademacher(), xi1, z)
    y = scenery_sum_batch(Rademacher(), xi2, x)
    return x, y, z


def simulate_oriented3d(n: int, seed: int, replica: int = 0) -> Path3D:
    """Full-step walk: every step moves z by +-1, x along the orientation of
    the line at height z, y along the orientation of the line at abscissa x."""
    n = _check_horizon(n)
    x, y, z = oriented3d_batch(n, seed, [replica])
    return Path3D(x[0], y[0], z[0])


def nn3d_batch(n: int, seed: int, replicas: Sequence[int]) -> tuple:
    _, xi1, xi2 = _oriented_keys(seed, replicas)
    idx = np.arange(1, n + 1, dtype=np.uint64)
    branch = (raw_bits(stream_keys(seed, "U", replicas), idx) >> np.uint64(62)).astype(np.int8)
    dz = (branch == 0).astype(np.int64) - (branch == 1)
    z = _prepend_zero(dz)
    dx = np.where(branch == 2, Rademacher().sample(xi1, zigzag(z[..., :-1])), 0)
    x = _prepend_zero(dx)
    dy = np.where(branch == 3, Rademacher().sample(xi2, zigzag(x[..., :-1])), 0)
    y = _prepend_zero(dy)
    return x, y, z


def simulate_nn3d(n: int, seed: int, replica: int = 0) -> Path3D:
    """Nearest-neighbour walk: each step picks one of four moves with probability 1/4
    (up, down, along the x-line orientation, along the y-line orientation)."""
    n = _check_horizon(n)
    x, y, z = nn3d_batch(n, seed, [replica])
    return Path3D(x[0], y[0], z[0])


def _pair_sites(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # injective while both zigzag codes fit in 32 bits
    return (zigzag(a) << np.uint64(32)) | zigzag(b)


def variant_batch(kind: str, n: int, seed: int, replicas: Sequence[int], sceneries: tuple = ()) -> tuple:
    if kind not in VARIANTS:
        raise ValueError(f"unknown variant {kind!r}; expected one of {VARIANTS}")
    xi1_dist = sceneries[0] if len(sceneries) > 0 else Rademacher()
    xi2_dist = sceneries[1] if len(sceneries) > 1 else Rademacher()
    eta, xi1, xi2 = _oriented_keys(seed, replicas)
    z = walk_batch(Rademacher(), n, eta)
    if kind == "twin_papa":
        x = scenery_sum_batch(xi1_dist, xi1, z)
        y = scenery_sum_batch(xi2_dist, xi2, z)
        return x, y, z
    # only x-lines are oriented: (y, z) is a two-dimensional walk moving both coordinates
    y = walk_batch(Rademacher(), n, stream_keys(seed, "eta_y", replicas))
    if kind == "papa_driven_by_z":
        x = scenery_sum_batch(xi1_dist, xi1, z)
    elif kind == "papa_driven_by_y":
        x = scenery_sum_batch(xi1_dist, xi1, y)
    else:
        x = _prepend_zero(xi1_dist.sample(xi1, _pair_sites(y[..., :-1], z[..., :-1])))
    return x, y, z


def simulate_variant(kind: str, n: int, seed: int, replica: int = 0, sceneries: tuple = ()) -> Path3D:
    """Companion models in which lines are oriented by a different coordinate.

    ``twin_papa``: x and y are both read from z with independent sceneries.
    ``papa_driven_by_z`` / ``papa_driven_by_y``: only x-lines are oriented,
    by z or by y, and (y, z) is a two-dimensional walk.
    ``papa_driven_by_2d``: x-lines are oriented by the pair (y, z).
    """
    n = _check_horizon(n)
    x, y, z = variant_batch(kind, n, seed, [replica], sceneries)
    return Path3D(x[0], y[0], z[0])


# ---------------------------------------------------------------------------
# occupation statistics


def local_time(path: np.ndarray, n: int) -> LocalTimeTable:
    """Visit counts of ``path[0..n-1]``."""
    path = np.asarray(path)
    if n > len(path) - 1:
        raise ValueError(f"horizon {n} exceeds path length {len(path) - 1}")
    if n < 0:
        raise ValueError("horizon must be non-negative")
    head = path[:n].astype(np.int64)
    if n == 0:
        return LocalTimeTable(0, np.zeros(0, dtype=np.int64), 0)
    lo = int(head.min())
    return LocalTimeTable(lo, np.bincount(head - lo).astype(np.int64), n)


def self_intersection(table: LocalTimeTable) -> int:
    """``V_n = sum_x N(n, x)**2``, the number of time pairs spent at a common site."""
    return int(np.dot(table.dense, table.dense))


def self_intersection_batch(paths: np.ndarray, n: int) -> np.ndarray:
    """``V_n`` for every row of a batch of lattice paths."""
    if n <= 0:
        return np.zeros(len(paths), dtype=np.int64)
    srt = np.sort(paths[:, :n], axis=1)
    new_run = np.ones(srt.shape, dtype=bool)
    new_run[:, 1:] = srt[:, 1:] != srt[:, :-1]
    run_id = np.cumsum(new_run.ravel()) - 1
    lengths = np.bincount(run_id)
    run_row = np.repeat(np.arange(len(paths)), new_run.sum(axis=1))
    return np.bincount(run_row, weights=lengths.astype(np.float64) ** 2, minlength=len(paths)).astype(np.int64)


def rescaled_local_time(path: np.ndarray, n: int, t: float, x: float, alpha: float) -> float:
    """``n^(alpha-1) * #{k = 1..floor(n t) : path[k] = floor(n^alpha x)}``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    m = int(math.floor(n * t))
    if m > len(path) - 1:
        raise ValueError(f"path is shorter than floor(n t) = {m}")
    a_n = float(n) ** alpha
    site = math.floor(a_n * x)
    hits = int(np.count_nonzero(np.asarray(path[1 : m + 1]) == site))
    return a_n / n * hits


def lattice_span(dist: SceneryDist) -> LatticeSpan:
    if isinstance(dist, Rademacher):
        values = [-1, 1]
    elif isinstance(dist, FiniteInt):
        values = [v for v, _ in dist.support]
    else:
        raise ValueError(f"lattice span is only defined for integer laws, got {dist!r}")
    d0 = 0
    for v in values:
        d0 = math.gcd(d0, v)
    if d0 == 0 or len(values) < 2:
        raise ValueError("a lattice span needs at least two support points")
    reduced = [v // d0 for v in values]
    d = 0
    for v in reduced[1:]:
        d = math.gcd(d, v - reduced[0])
    return LatticeSpan(d=d, a=reduced[0] % d, d0=d0)


# ---------------------------------------------------------------------------
# generic process handle used by the statistics layer

MODELS = ("pa", "oriented3d", "nn3d") + VARIANTS


@dataclass(frozen=True)
class ProcessSpec:
    """Which scalar process to sample.

    ``model="pa"`` selects level ``depth`` of a PA(p) tower built from
    ``step`` and ``sceneries``.  For the three-dimensional models ``coordinate``
    picks ``"x"``, ``"y"`` or ``"z"``.
    """

    model: str = "pa"
    depth: int = 1
    coordinate: str = "x"
    step: SceneryDist = field(default_factory=Rademacher)
    sceneries: tuple = ()

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.coordinate not in ("x", "y", "z"):
            raise ValueError(f"coordinate must be x, y or z, got {self.coordinate!r}")
        if self.model == "pa" and self.depth < 1:
            raise ValueError(f"tower depth must be >= 1, got {self.depth}")

    @property
    def final_dist(self) -> SceneryDist:
        """Law of the increments of the sampled process (last scenery or step law)."""
        if self.model == "pa":
            return self.step if self.depth == 1 else TowerConfig(0, self.step, self.sceneries).scenery_dist(self.depth - 1)
        if self.coordinate == "z":
            return Rademacher()
        idx = 0 if self.coordinate == "x" else 1
        return self.sceneries[idx] if idx < len(self.sceneries) else Rademacher()

    def paths(self, n: int, seed: int, replicas: Sequence[int]) -> np.ndarray:
        """Batch of paths, shape ``(len(replicas), n+1)``."""
        if self.model == "pa":
            return tower_batch(self.depth, n, TowerConfig(seed, self.step, self.sceneries), replicas)[-1]
        if self.model == "oriented3d":
            xyz = oriented3d_batch(n, seed, replicas)
        elif self.model == "nn3d":
            xyz = nn3d_batch(n, seed, replicas)
        else:
            xyz = variant_batch(self.model, n, seed, replicas, self.sceneries)
        return xyz["xyz".index(self.coordinate)]
