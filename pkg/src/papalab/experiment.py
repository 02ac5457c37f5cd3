"""Declarative experiment configs and the dispatcher that runs them."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Union

import numpy as np

from . import acceptance
from .io import FORMAT_VERSION, Metric, ResultRecord
from .limits import (
    DEFAULT_DT,
    KS_DELTA_SECOND_MOMENT,
    MAX_LEVEL,
    TowerProcess,
    bin_schedule,
    sample_at_times,
    self_similarity_check,
    stationary_increment_check,
)
from .rng import FiniteInt, Gaussian, HeavyTailNDA, Rademacher, StableExact, StableParams, is_centered
from .stats import DEFAULT_HORIZONS, MEDIAN, alpha_exponent, fit_scaling_exponent, llt_constant_estimate, moment_curve, stationarity_check
from .walks import MODELS, ProcessSpec, TowerConfig, simulate_nn3d, simulate_oriented3d, simulate_pa_tower, simulate_variant

EXPERIMENTS = ("simulate", "exponent", "llt", "limit_variance", "self_similarity", "stationarity", "yyy_check", "acceptance_all")
FORMATS = ("json", "csv")


class ConfigError(ValueError):
    """A config value failed validation; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message

    def to_dict(self) -> dict:
        return {"error": "validation", "field": self.field, "message": self.message}


# ---------------------------------------------------------------------------
# distribution specs
#
# "rademacher"
# {"finite": {"values": [-1, 0, 1], "probs": ["1/4", "1/2", "1/4"]}}
# {"uniform": [-2, -1, 1, 2]}      {"point": 3}
# {"gaussian": {"variance": 1.0}}
# {"stable": {"beta": 1.5, "sigma": 1.0, "nu": 0.0}}
# {"heavy_tail": {"beta": 1.5, "scale": 1.0}}


def parse_dist(spec: Any, where: str):
    try:
        if spec in ("rademacher", None) or spec == {"rademacher": {}}:
            return Rademacher()
        if isinstance(spec, str):
            raise ConfigError(where, f"unknown distribution {spec!r}")
        if not isinstance(spec, dict) or len(spec) != 1:
            raise ConfigError(where, "a distribution is a name or a one-key mapping")
        (kind, args), = spec.items()
        if kind == "finite":
            values, probs = args["values"], args["probs"]
            if len(values) != len(probs):
                raise ConfigError(where, "values and probs differ in length")
            return FiniteInt(tuple((int(v), Fraction(str(p))) for v, p in zip(values, probs)))
        if kind == "uniform":
            return FiniteInt.uniform([int(v) for v in args])
        if kind == "point":
            return FiniteInt.point(int(args))
        if kind == "gaussian":
            return Gaussian(float(args.get("variance", 1.0)))
        if kind == "stable":
            return StableExact(StableParams(float(args["beta"]), float(args.get("sigma", 1.0)), float(args.get("nu", 0.0))))
        if kind == "heavy_tail":
            return HeavyTailNDA(float(args["beta"]), float(args.get("scale", 1.0)))
        raise ConfigError(where, f"unknown distribution kind {kind!r}")
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(where, f"invalid distribution parameters ({exc})") from None


# ---------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    master_seed: int
    model: str = "pa"
    depth: int = 1
    coordinate: str = "x"
    step: Any = "rademacher"
    sceneries: tuple = ()
    horizons: tuple = DEFAULT_HORIZONS
    q: Union[float, str] = 2.0
    replicas: Optional[int] = None
    n: int = 256
    replica: int = 0
    lag: int = 128
    level: Optional[int] = None
    dt: float = DEFAULT_DT
    h: Optional[float] = None
    T: float = 1.0
    draws: int = 4096
    criteria: tuple = ()
    workers: int = 1
    output: Optional[str] = None
    format: str = "json"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        names = {f.name for f in dataclasses.fields(cls)}
        for key in raw:
            if key not in names:
                raise ConfigError(key, "unknown field")
        for key in ("experiment", "master_seed"):
            if raw.get(key) is None:
                raise ConfigError(key, "required")
        for key in ("horizons", "sceneries", "criteria"):
            if key in raw and raw[key] is not None:
                if isinstance(raw[key], (str, dict)) or not hasattr(raw[key], "__iter__"):
                    raise ConfigError(key, "expected a list")
                raw[key] = tuple(raw[key])
        raw = {k: v for k, v in raw.items() if v is not None}
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @property
    def config_hash(self) -> str:
        canon = json.dumps({"format_version": FORMAT_VERSION, "config": self.to_dict()}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {self.experiment!r}")
        _int_in("master_seed", self.master_seed, 0, 2**64 - 1)
        if self.model not in MODELS:
            raise ConfigError("model", f"must be one of {MODELS}, got {self.model!r}")
        _int_in("depth", self.depth, 1, MAX_LEVEL)
        if self.coordinate not in ("x", "y", "z"):
            raise ConfigError("coordinate", "must be x, y or z")
        if self.level is not None:
            _int_in("level", self.level, 1, MAX_LEVEL)
        if not self.horizons:
            raise ConfigError("horizons", "must not be empty")
        for i, n in enumerate(self.horizons):
            _int_in(f"horizons[{i}]", n, 1, 2**31 - 1)
        if list(self.horizons) != sorted(set(self.horizons)):
            raise ConfigError("horizons", "must be strictly increasing")
        if self.q != MEDIAN and not (isinstance(self.q, (int, float)) and not isinstance(self.q, bool) and self.q > 0):
            raise ConfigError("q", f"must be a positive number or {MEDIAN!r}")
        if self.replicas is not None:
            _int_in("replicas", self.replicas, 2, 10**9)
        _int_in("n", self.n, 0, 2**31 - 1)
        _int_in("replica", self.replica, 0, 2**63)
        _int_in("lag", self.lag, 0, 2**31 - 1)
        _int_in("draws", self.draws, 1, 2**20)
        _int_in("workers", self.workers, 1, 1024)
        for key in ("dt", "T") + (("h",) if self.h is not None else ()):
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0):
                raise ConfigError(key, "must be a positive number")
        if self.T < self.dt or abs(self.T / self.dt - round(self.T / self.dt)) > 1e-6:
            raise ConfigError("T", "must be a positive multiple of dt")
        if self.format not in FORMATS:
            raise ConfigError("format", f"must be one of {FORMATS}")
        for i, name in enumerate(self.criteria):
            if name not in acceptance.BY_NAME:
                raise ConfigError(f"criteria[{i}]", f"unknown criterion {name!r}; choose from {sorted(acceptance.BY_NAME)}")
        try:
            self.process_spec()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from None

    def process_spec(self) -> ProcessSpec:
        step = parse_dist(self.step, "step")
        sceneries = tuple(parse_dist(s, f"sceneries[{i}]") for i, s in enumerate(self.sceneries))
        # walks and sceneries must be centred; constant fields are a test-only override
        if not is_centered(step):
            raise ConfigError("step", "the step law must be centred")
        for i, d in enumerate(sceneries):
            if not is_centered(d):
                raise ConfigError(f"sceneries[{i}]", "scenery laws must be centred")
        return ProcessSpec(self.model, self.depth, self.coordinate, step, sceneries)


def _int_in(name: str, v: Any, lo: int, hi: int) -> None:
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ConfigError(name, f"must be an integer, got {v!r}")
    if not lo <= v <= hi:
        raise ConfigError(name, f"must lie in [{lo}, {hi}], got {v}")


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


# ---------------------------------------------------------------------------
# dispatch


class _Table:
    def __init__(self, columns, rows):
        self._columns, self._rows = list(columns), [list(r) for r in rows]

    def columns(self):
        return self._columns

    def rows(self):
        return iter(self._rows)


def _simulate(cfg: ExperimentConfig):
    spec = cfg.process_spec()
    if cfg.model == "pa":
        data = simulate_pa_tower(cfg.depth, cfg.n, TowerConfig(cfg.master_seed, spec.step, spec.sceneries), cfg.replica)
        finals = {f"level_{q + 1}_final": p[-1] for q, p in enumerate(data.paths)}
    else:
        if cfg.model == "oriented3d":
            data = simulate_oriented3d(cfg.n, cfg.master_seed, cfg.replica)
        elif cfg.model == "nn3d":
            data = simulate_nn3d(cfg.n, cfg.master_seed, cfg.replica)
        else:
            data = simulate_variant(cfg.model, cfg.n, cfg.master_seed, cfg.replica, spec.sceneries)
        finals = {f"{c}_final": getattr(data, c)[-1] for c in "xyz"}
    return [Metric(k, v) for k, v in finals.items()], data


def _exponent(cfg: ExperimentConfig):
    spec = cfg.process_spec()
    curve = moment_curve(spec, cfg.horizons, cfg.q, cfg.replicas or 4000, cfg.master_seed, cfg.workers)
    fit = fit_scaling_exponent(curve)
    ref = float(alpha_exponent(cfg.depth)) if cfg.model == "pa" else None
    metrics = [Metric("alpha_hat", fit.alpha_hat, fit.std_error, ref), Metric("r_squared", fit.r_squared)]
    return metrics, curve


def _llt(cfg: ExperimentConfig):
    est = llt_constant_estimate(cfg.horizons, cfg.replicas or 4000, cfg.master_seed, cfg.draws, cfg.workers)
    metrics = [Metric(f"llt_n{n}", v, se) for n, v, se in est]
    return metrics, _Table(["n", "estimate", "std_error"], est)


def _h_schedule(cfg: ExperimentConfig, level: int):
    sched = list(bin_schedule(max(level - 1, 0), cfg.dt))
    if cfg.h is not None and sched:
        sched[0] = cfg.h
    return tuple(sched)


def _limit_variance(cfg: ExperimentConfig):
    level = cfg.level or 2
    replicas = cfg.replicas or 10_000
    proc = TowerProcess(level, cfg.dt, _h_schedule(cfg, level))
    x = sample_at_times(proc, (cfg.T,), replicas, cfg.master_seed, workers=cfg.workers)[:, 0]
    sq = x**2
    m = Metric(f"level_{level}_second_moment", sq.mean(), sq.std(ddof=1) / math.sqrt(replicas))
    if level == 2:
        ref = KS_DELTA_SECOND_MOMENT * cfg.T**1.5
        m = Metric(m.name, m.value, m.std_error, ref, 0.05 * ref, abs(m.value - ref) <= 0.05 * ref)
    return [m], None


def _self_similarity(cfg: ExperimentConfig):
    level = cfg.level or 1
    res = self_similarity_check(level, 4.0, cfg.T / 4, cfg.replicas or 10_000, cfg.dt, cfg.master_seed, cfg.workers)
    return [acceptance._ks_metric(f"ks_self_similarity_p{level}", res)], None


def _stationarity(cfg: ExperimentConfig):
    replicas = cfg.replicas or 10_000
    if cfg.level is None:
        res = stationarity_check(cfg.process_spec(), cfg.n, cfg.lag, replicas, cfg.master_seed)
    else:
        proc = TowerProcess(cfg.level, cfg.dt, _h_schedule(cfg, cfg.level))
        res = stationary_increment_check(proc, cfg.T / 2, cfg.T / 2, replicas, cfg.master_seed, workers=cfg.workers)
    return [acceptance._ks_metric("ks_stationary_increments", res)], None


def _yyy(cfg: ExperimentConfig):
    return acceptance.yyy_check(cfg.master_seed, cfg.workers, cfg.replicas, cfg.dt), None


def _acceptance_all(cfg: ExperimentConfig):
    names = cfg.criteria or tuple(c.name for c in acceptance.CRITERIA)
    metrics = []
    for name in names:
        for m in acceptance.run_criterion(name, cfg.master_seed, cfg.workers, cfg.replicas, cfg.dt):
            m.name = f"{name}.{m.name}"
            metrics.append(m)
    return metrics, None


_DISPATCH = {
    "simulate": _simulate,
    "exponent": _exponent,
    "llt": _llt,
    "limit_variance": _limit_variance,
    "self_similarity": _self_similarity,
    "stationarity": _stationarity,
    "yyy_check": _yyy,
    "acceptance_all": _acceptance_all,
}


def run_experiment(config: Union[ExperimentConfig, dict]) -> ResultRecord:
    """Run one experiment; the numeric payload depends on the config only."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    cfg.validate()
    t0 = time.perf_counter()
    metrics, table = _DISPATCH[cfg.experiment](cfg)
    return ResultRecord(cfg.experiment, cfg.config_hash, metrics, time.perf_counter() - t0, table=table)
