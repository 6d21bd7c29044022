"""Command-line front end: run, experiment, replay.

Config resolution: an explicit --config path wins; otherwise
$CCFSIM_CONFIG_DIR/default.json if the variable is set, else the
bundled default. Every failure exits nonzero with one machine-parsable
line on stderr: error category=<category> message="...".
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from .config import RunConfig
from .engine import Transcript, run
from .errors import CcfSimError, ConfigurationError, IntegrityError
from .experiments import (EXPERIMENT_NAMES, bundled_config_path,
                          run_experiment)

CONFIG_DIR_ENV = "CCFSIM_CONFIG_DIR"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_STRICT = 3       # deadline violations under --strict, experiment FAIL
EXIT_INTEGRITY = 4
EXIT_PROTOCOL = 5     # any other simulator error
EXIT_AUDIT = 6


def _error_line(category: str, message: str) -> None:
    msg = str(message).replace('"', "'").replace("\n", " ")
    print(f'error category={category} message="{msg}"', file=sys.stderr)


def resolve_config_path(config_arg: Optional[str]) -> Path:
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_arg:
        p = Path(config_arg)
        if p.exists():
            return p
        if env_dir and not p.is_absolute():
            candidate = Path(env_dir) / config_arg
            if candidate.exists():
                return candidate
        raise ConfigurationError(f"config file not found: {config_arg}")
    if env_dir:
        candidate = Path(env_dir) / "default.json"
        if candidate.exists():
            return candidate
        raise ConfigurationError(
            f"no default.json in {CONFIG_DIR_ENV}={env_dir}")
    return bundled_config_path("default")


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(resolve_config_path(args.config))
    if getattr(args, "set", None):
        cfg.apply_overrides(args.set)
    if getattr(args, "seed", None) is not None:
        cfg.scenario.seed = args.seed
    return cfg.validate()


def _write_outputs(result, cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    result.transcript.write(out_dir / "transcript.jsonl")
    summary = {
        "summary": True,
        "rounds": cfg.scenario.rounds,
        "final_loss_mean": result.loss_mean[-1] if result.loss_mean else None,
        "final_loss_per_type": result.loss_per_type[-1]
        if result.loss_per_type else [],
        "mean_reputation": result.metrics[-1]["mean_reputation"]
        if result.metrics else None,
        "carbon_g": result.carbon_g,
        "baseline_carbon_g": result.baseline_carbon_g,
        "deadline_violations": len(result.plan_record["violations"]),
        "content_hash": result.content_hash,
    }
    with (out_dir / "metrics.jsonl").open("w") as f:
        if cfg.engine.metrics_granularity == "per-round":
            for m in result.metrics:
                f.write(json.dumps(m, separators=(",", ":")) + "\n")
        f.write(json.dumps(summary, separators=(",", ":")) + "\n")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    result = run(cfg)
    out_dir = Path(args.out or cfg.engine.output_path or "ccfsim_out")
    _write_outputs(result, cfg, out_dir)
    n_violations = len(result.plan_record["violations"])
    print(json.dumps({
        "content_hash": result.content_hash,
        "rounds": cfg.scenario.rounds,
        "final_loss_mean": result.loss_mean[-1] if result.loss_mean else None,
        "carbon_g": result.carbon_g,
        "deadline_violations": n_violations,
        "out": str(out_dir),
    }))
    if args.strict and n_violations > 0:
        _error_line("deadline-violations",
                    f"{n_violations} deadline violation(s) under --strict")
        return EXIT_STRICT
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_file(resolve_config_path(args.config)) \
        if args.config else None
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"scenario.seed={args.seed}")
    verdict = run_experiment(args.name, config=cfg, overrides=overrides)
    print(verdict.to_json())
    return EXIT_OK if verdict.passed else EXIT_STRICT


def cmd_replay(args: argparse.Namespace) -> int:
    path = Path(args.transcript)
    if not path.exists():
        raise ConfigurationError(f"transcript not found: {path}")
    transcript = Transcript.read(path)
    hash_ok = True
    hash_message = "content hash verified"
    try:
        transcript.verify()
    except IntegrityError as e:
        hash_ok = False
        hash_message = str(e)
    violations = transcript.audit_privacy()
    print(json.dumps({
        "content_hash_ok": hash_ok,
        "content_hash": transcript.content_hash,
        "hash_message": hash_message,
        "audit_violations": violations,
        "audit_clean": not violations,
    }, indent=2))
    if not hash_ok:
        _error_line("integrity", hash_message)
        return EXIT_INTEGRITY
    if violations:
        _error_line("privacy-audit",
                    f"{len(violations)} private value(s) leaked into messages")
        return EXIT_AUDIT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccfsim",
        description="Deterministic simulator of a privacy-preserving "
                    "learning collective.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("--config", help="config JSON path (or name under "
                       f"${CONFIG_DIR_ENV})")
    p_run.add_argument("--seed", type=int, help="override scenario.seed")
    p_run.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="dotted config override, repeatable")
    p_run.add_argument("--strict", action="store_true",
                       help="nonzero exit on deadline violations")
    p_run.add_argument("--out", help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_exp = sub.add_parser("experiment", help="run a built-in experiment")
    p_exp.add_argument("name", choices=EXPERIMENT_NAMES)
    p_exp.add_argument("--config", help="replace the bundled scenario")
    p_exp.add_argument("--seed", type=int,
                       help="override scenario.seed of the experiment")
    p_exp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="dotted override on the experiment scenario")
    p_exp.set_defaults(func=cmd_experiment)

    p_rep = sub.add_parser("replay", help="verify a transcript")
    p_rep.add_argument("transcript", help="transcript.jsonl path")
    p_rep.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as e:
        _error_line(e.category, str(e))
        return EXIT_CONFIG
    except IntegrityError as e:
        _error_line(e.category, str(e))
        return EXIT_INTEGRITY
    except CcfSimError as e:
        _error_line(e.category, str(e))
        return EXIT_PROTOCOL
    except OSError as e:
        _error_line("io", str(e))
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
