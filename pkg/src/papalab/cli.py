"""Command line entry point: ``papalab <subcommand> [--config FILE] [flags]``.

Precedence is defaults < config file < flags.  Exit codes: 0 success,
1 validation error, 2 runtime error or failed statistical gate, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .experiment import ConfigError, ExperimentConfig, run_experiment
from .io import OutputError, emit_csv, emit_json

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3
OUTPUT_DIR_ENV = "PAPALAB_OUTPUT_DIR"
LIMIT_KINDS = ("limit_variance", "self_similarity", "stationarity", "yyy_check")


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _q(text: str):
    return text if text == "median" else float(text)


def _dist(text: str):
    # a bare name or an inline JSON/YAML mapping
    return yaml.safe_load(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON config file")
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output", help="destination file (default: $%s/<experiment>-<hash>.<format>)" % OUTPUT_DIR_ENV)
    p.add_argument("--format", choices=("json", "csv"))


def _add_process(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model")
    p.add_argument("--depth", type=int)
    p.add_argument("--coordinate", choices=("x", "y", "z"))
    p.add_argument("--step", type=_dist, help="step law, e.g. rademacher or '{uniform: [-1, 0, 1]}'")
    p.add_argument("--sceneries", type=_dist, help="list of scenery laws, e.g. '[rademacher, {heavy_tail: {beta: 1.5}}]'")


def _add_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--level", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--T", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="papalab", description="Random walks in random scenery: simulation and checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one path")
    _add_common(p)
    _add_process(p)
    p.add_argument("--n", type=int)
    p.add_argument("--replica", type=int)

    p = sub.add_parser("exponent", help="moment curve and fitted scaling exponent")
    _add_common(p)
    _add_process(p)
    p.add_argument("--horizons", type=_int_list, help="comma separated")
    p.add_argument("--q", type=_q, help="moment order or 'median'")

    p = sub.add_parser("llt", help="local limit constant n^(3/4) P(PA(2)_n = 0)")
    _add_common(p)
    p.add_argument("--horizons", type=_int_list)
    p.add_argument("--draws", type=int)

    p = sub.add_parser("limit", help="continuum checks")
    _add_common(p)
    _add_process(p)
    _add_grid(p)
    p.add_argument("--kind", choices=LIMIT_KINDS, default=None)
    p.add_argument("--n", type=int)
    p.add_argument("--lag", type=int)

    p = sub.add_parser("verify", help="run one named acceptance criterion")
    _add_common(p)
    p.add_argument("name")
    p.add_argument("--dt", type=float)

    p = sub.add_parser("accept", help="run the full acceptance suite")
    _add_common(p)
    p.add_argument("--dt", type=float)
    return parser


_NON_CONFIG = {"command", "config", "kind", "name"}


def _experiment_of(args) -> str:
    if args.command in ("simulate", "exponent", "llt"):
        return args.command
    if args.command == "limit":
        return args.kind or "limit_variance"
    return "acceptance_all"


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(path, exc.strerror or exc) from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a mapping")
    return data


def resolve_config(args) -> ExperimentConfig:
    raw = load_config_file(args.config) if args.config else {}
    # the subcommand fixes the experiment; a bare `limit` may take its kind from the file
    if not (args.command == "limit" and args.kind is None and raw.get("experiment") in LIMIT_KINDS):
        raw["experiment"] = _experiment_of(args)
    for key, value in vars(args).items():
        if key not in _NON_CONFIG and value is not None:
            raw[key] = value
    if args.command == "verify":
        raw["criteria"] = [args.name]
    return ExperimentConfig.from_dict(raw)


def _destination(cfg: ExperimentConfig, record) -> Optional[Path]:
    if cfg.output:
        return Path(cfg.output)
    out_dir = os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        return Path(out_dir) / f"{cfg.experiment}-{record.config_hash[:12]}.{cfg.format}"
    return None


def _summary(record) -> str:
    lines = []
    for m in record.metrics:
        verdict = "" if m.passed is None else (" PASS" if m.passed else " FAIL")
        extra = []
        if m.std_error is not None:
            extra.append(f"se={m.std_error:.4g}")
        if m.reference is not None:
            extra.append(f"ref={m.reference:.6g}")
        if m.threshold is not None:
            extra.append(f"thr={m.threshold:.4g}")
        lines.append(f"{m.name} = {m.value:.6g} {' '.join(extra)}{verdict}".rstrip())
    return "\n".join(lines)


def _error(kind: str, **info) -> None:
    print(json.dumps({"error": kind, **info}, sort_keys=True), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        _error("validation", field=exc.field, message=exc.message)
        return EXIT_VALIDATION
    except OutputError as exc:
        _error("io", path=exc.path, message=str(exc))
        return EXIT_IO
    try:
        record = run_experiment(cfg)
    except ConfigError as exc:
        _error("validation", field=exc.field, message=exc.message)
        return EXIT_VALIDATION
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        _error("runtime", message=str(exc))
        return EXIT_RUNTIME
    dest = _destination(cfg, record)
    try:
        if dest is not None:
            if cfg.format == "csv":
                emit_csv(record.table if record.table is not None else record, dest)
            else:
                emit_json(record, dest)
    except OutputError as exc:
        _error("io", path=exc.path, message=str(exc))
        return EXIT_IO
    print(_summary(record))
    if dest is not None:
        print(f"wrote {dest}")
    return EXIT_OK if record.passed else EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
