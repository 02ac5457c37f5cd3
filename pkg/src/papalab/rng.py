"""Counter-based randomness and lazily evaluated integer-indexed sceneries.

Every random quantity in the package is a pure function of a 64-bit stream
key and a counter (a time index or a lattice site).  Nothing is stored and
no generator state is carried around, so a replica can be regenerated
bit-for-bit on any worker.

The mixer is the SplitMix64 finaliser applied twice with the key injected
between rounds.  It is not cryptographic; it only needs to look i.i.d. to
the statistical tests the package runs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtri

__all__ = [
    "StreamKey",
    "derive_stream",
    "stream_keys",
    "second_moment",
    "Rademacher",
    "FiniteInt",
    "Gaussian",
    "StableParams",
    "StableExact",
    "HeavyTailNDA",
    "SceneryDist",
    "Scenery",
    "scenery_at",
    "sample_gaussian",
    "sample_stable",
    "uniform01",
    "raw_bits",
    "zigzag",
    "is_integer_dist",
    "is_centered",
    "has_finite_moment",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S63 = np.uint64(63)
_ONE = np.uint64(1)
_TWO53 = 2.0**-53

# Lanes separate the independent uniforms a sampler may need at one counter.
_LANE_KEYS = [np.uint64(x) for x in (0x0, 0xD1B54A32D192ED03, 0x8CB92BA72F3D8DD7, 0xABC98388FB8FAC03)]


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def zigzag(site) -> np.ndarray:
    """Bijection from signed 64-bit integers onto unsigned ones (0,-1,1,-2,... -> 0,1,2,3,...)."""
    s = np.asarray(site, dtype=np.int64)
    return ((s << 1) ^ (s >> 63)).astype(np.uint64)


def raw_bits(key, counter, lane: int = 0) -> np.ndarray:
    """64 pseudo-random bits for each (key, counter) pair.

    ``key`` and ``counter`` are broadcast against each other; ``counter``
    must already be unsigned (use :func:`zigzag` for signed sites).
    """
    k = np.asarray(key, dtype=np.uint64)
    c = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        k = k ^ _LANE_KEYS[lane]
        z = _mix(k + (c + _ONE) * _GOLDEN)
        return _mix(z ^ _mix(k))


def uniform01(key, counter, lane: int = 0) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53-bit resolution."""
    b = raw_bits(key, counter, lane) >> _S11
    return (b.astype(np.float64) + 0.5) * _TWO53


@dataclass(frozen=True)
class StreamKey:
    master_seed: int
    stream_label: str
    replica: int = 0

    @property
    def key(self) -> np.uint64:
        """The 64-bit key fed to the counter-based mixer."""
        return _key_of(self.master_seed, self.stream_label, self.replica)


def _key_of(master_seed: int, label: str, replica: int) -> np.uint64:
    payload = f"{int(master_seed)}\x1f{label}\x1f{int(replica)}".encode()
    digest = hashlib.blake2b(payload, digest_size=8, person=b"papalab-stream").digest()
    return np.uint64(int.from_bytes(digest, "little"))


def derive_stream(master_seed: int, label: str, replica: int = 0) -> StreamKey:
    if not 0 <= int(master_seed) < 2**64:
        raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
    if int(replica) < 0:
        raise ValueError(f"replica must be non-negative, got {replica}")
    return StreamKey(int(master_seed), str(label), int(replica))


def stream_keys(master_seed: int, label: str, replicas: Sequence[int]) -> np.ndarray:
    """Column vector of raw keys, one per replica, ready for broadcasting."""
    return np.array([_key_of(master_seed, label, r) for r in replicas], dtype=np.uint64)[:, None]


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Rademacher:
    def sample(self, key, counter) -> np.ndarray:
        bits = raw_bits(key, counter) >> _S63
        return bits.astype(np.int64) * 2 - 1


@dataclass(frozen=True)
class FiniteInt:
    """Finitely supported integer law given as ``((value, prob), ...)``.

    Probabilities may be anything :class:`fractions.Fraction` accepts; they
    must sum to one exactly.
    """

    support: tuple

    def __post_init__(self):
        pairs = tuple((int(v), Fraction(p)) for v, p in self.support)
        if not pairs:
            raise ValueError("FiniteInt needs a non-empty support")
        if any(p < 0 for _, p in pairs):
            raise ValueError("FiniteInt probabilities must be non-negative")
        if sum(p for _, p in pairs) != 1:
            raise ValueError("FiniteInt probabilities must sum to 1")
        pairs = tuple((v, p) for v, p in pairs if p > 0)
        object.__setattr__(self, "support", pairs)
        cum = np.cumsum([p for _, p in pairs])
        # thresholds on the 53-bit integer scale; last one catches everything
        thresholds = [int(c * 2**53) for c in cum[:-1]]
        object.__setattr__(self, "_thresholds", np.array(thresholds, dtype=np.uint64))
        object.__setattr__(self, "_values", np.array([v for v, _ in pairs], dtype=np.int64))

    @classmethod
    def uniform(cls, values: Sequence[int]) -> "FiniteInt":
        return cls(tuple((v, Fraction(1, len(values))) for v in values))

    @classmethod
    def point(cls, value: int) -> "FiniteInt":
        return cls(((value, 1),))

    @property
    def mean(self) -> Fraction:
        return sum(v * p for v, p in self.support)

    @property
    def second_moment(self) -> Fraction:
        return sum(v * v * p for v, p in self.support)

    def sample(self, key, counter) -> np.ndarray:
        if len(self._values) == 1:
            return np.broadcast_to(self._values[0], np.broadcast(np.asarray(key), np.asarray(counter)).shape).copy()
        u = raw_bits(key, counter) >> _S11
        return self._values[np.searchsorted(self._thresholds, u, side="right")]


@dataclass(frozen=True)
class Gaussian:
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"Gaussian variance must be positive, got {self.variance}")

    def sample(self, key, counter) -> np.ndarray:
        return math.sqrt(self.variance) * ndtri(uniform01(key, counter))


@dataclass(frozen=True)
class StableParams:
    """Stable law with characteristic function
    ``exp(-sigma**beta * |u|**beta * (1 - i*nu*tan(pi*beta/2)*sign(u)))``."""

    beta: float
    sigma: float = 1.0
    nu: float = 0.0

    def __post_init__(self):
        if not 1.0 < self.beta <= 2.0:
            raise ValueError(f"stable index beta must lie in (1, 2], got {self.beta}")
        if not self.sigma > 0:
            raise ValueError(f"stable scale sigma must be positive, got {self.sigma}")
        if not -1.0 <= self.nu <= 1.0:
            raise ValueError(f"stable skewness nu must lie in [-1, 1], got {self.nu}")

    def char_fn(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        skew = 0.0 if self.beta == 2.0 else self.nu * math.tan(math.pi * self.beta / 2)
        return np.exp(-(self.sigma**self.beta) * np.abs(u) ** self.beta * (1 - 1j * skew * np.sign(u)))


@dataclass(frozen=True)
class StableExact:
    params: StableParams

    def sample(self, key, counter) -> np.ndarray:
        return _stable_from_uniforms(self.params, key, counter)


@dataclass(frozen=True)
class HeavyTailNDA:
    """Symmetric law with a uniform core on ``(-scale, scale)`` and Pareto tails.

    The density is continuous at ``scale`` and ``P(|x| > u) = w * (scale/u)**beta``
    for ``u >= scale`` with ``w = 1/(1 + beta)``, so the law lies in the normal
    domain of attraction of a symmetric ``beta``-stable law.
    """

    beta: float
    scale: float = 1.0

    def __post_init__(self):
        if not 1.0 < self.beta <= 2.0:
            raise ValueError(f"tail index beta must lie in (1, 2], got {self.beta}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def tail_weight(self) -> float:
        return 1.0 / (1.0 + self.beta)

    def survival(self, u) -> np.ndarray:
        """Exact ``P(|x| > u)``."""
        u = np.asarray(u, dtype=float)
        w = self.tail_weight
        core = 1.0 - (1.0 - w) * np.clip(u, 0, self.scale) / self.scale
        tail = w * (self.scale / np.maximum(u, self.scale)) ** self.beta
        return np.where(u < self.scale, core, tail)

    def sample(self, key, counter) -> np.ndarray:
        u = uniform01(key, counter, lane=0)
        sign = np.where(raw_bits(key, counter, lane=1) >> _S63, 1.0, -1.0)
        w = self.tail_weight
        core = self.scale * u / (1.0 - w)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = self.scale * ((1.0 - u) / w) ** (-1.0 / self.beta)
        return sign * np.where(u < 1.0 - w, core, tail)


SceneryDist = Union[Rademacher, FiniteInt, Gaussian, StableExact, HeavyTailNDA]


def is_integer_dist(dist) -> bool:
    return isinstance(dist, (Rademacher, FiniteInt))


def is_centered(dist) -> bool:
    if isinstance(dist, FiniteInt):
        return dist.mean == 0
    # the continuous laws are all parametrised with zero mean (beta > 1)
    return True


def has_finite_moment(dist, q: float) -> bool:
    if isinstance(dist, HeavyTailNDA):
        return q < dist.beta
    if isinstance(dist, StableExact):
        return dist.params.beta == 2.0 or q < dist.params.beta
    return True


def second_moment(dist) -> float:
    """``E[x**2]`` of a square-integrable scenery law."""
    if isinstance(dist, Rademacher):
        return 1.0
    if isinstance(dist, FiniteInt):
        return float(dist.second_moment)
    if isinstance(dist, Gaussian):
        return dist.variance
    if isinstance(dist, StableExact) and dist.params.beta == 2.0:
        return 2.0 * dist.params.sigma**2
    raise ValueError(f"{dist!r} has infinite variance")


# ---------------------------------------------------------------------------
# sceneries


@dataclass(frozen=True)
class Scenery:
    key: StreamKey
    dist: SceneryDist

    def at(self, sites) -> np.ndarray:
        return self.dist.sample(self.key.key, zigzag(sites))


def scenery_at(scenery: Scenery, site):
    """Value of the scenery at ``site`` (an integer or an integer array)."""
    out = scenery.at(site)
    return out.item() if np.ndim(out) == 0 else out


def sample_gaussian(key: StreamKey, index, variance: float = 1.0):
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    out = math.sqrt(variance) * ndtri(uniform01(key.key, np.asarray(index, dtype=np.uint64)))
    return out.item() if np.ndim(out) == 0 else out


def sample_stable(key: StreamKey, index, params: StableParams):
    out = _stable_from_uniforms(params, key.key, np.asarray(index, dtype=np.uint64))
    return out.item() if np.ndim(out) == 0 else out


def _stable_from_uniforms(params: StableParams, key, counter) -> np.ndarray:
    beta, sigma, nu = params.beta, params.sigma, params.nu
    if beta == 2.0:
        # exp(-sigma^2 u^2) is N(0, 2 sigma^2)
        return sigma * math.sqrt(2.0) * ndtri(uniform01(key, counter))
    v = math.pi * (uniform01(key, counter, lane=0) - 0.5)
    w = -np.log(uniform01(key, counter, lane=1))
    t = nu * math.tan(math.pi * beta / 2)
    b = math.atan(t) / beta
    s = (1.0 + t * t) ** (1.0 / (2.0 * beta))
    x = (
        s
        * np.sin(beta * (v + b))
        / np.cos(v) ** (1.0 / beta)
        * (np.cos(v - beta * (v + b)) / w) ** ((1.0 - beta) / beta)
    )
    return sigma * x
