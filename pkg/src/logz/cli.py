"""Command-line interface.

    logz schedule  --config run.toml            per-phase schedule (CSV or JSON)
    logz estimate  --config run.toml            one estimate, or the median of
                                                replicates when --mu-tilde is set
    logz replicate --config run.toml -R 10      per-phase spread over R pipelines
    logz oracle    --config run.toml            reference log Z when available

A config file has a ``[model]`` table (``name`` plus model parameters), a
``[run]`` table with the RunConfig fields and an optional ``[output]`` table
(``path``, ``format``).  Flags override the file.  Exit codes: 0 success,
2 configuration error, 3 chain divergence, 4 no oracle available.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .config import RunConfig, config_digest
from .diagnostics import replicate_report, report_csv
from .errors import (
    BudgetExceededError,
    ClosedFormGaussian,
    ConfigError,
    DivergenceError,
    OptimizationError,
    OracleUnavailableError,
    ParseError,
    ValidationError,
)
from .estimator import estimate, median_estimate
from .models import build_model
from .schedule import build_schedule

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_ORACLE = 0, 2, 3, 4
_RUN_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--model", help="built-in model name (overrides [model].name)")
    common.add_argument("--seed", type=int)
    common.add_argument("--eps", type=float)
    common.add_argument("--mu", type=float)
    common.add_argument("--mu-tilde", type=float, dest="mu_tilde")
    common.add_argument("--preset")
    common.add_argument("--regime", choices=("auto", "strong", "convex"))
    common.add_argument("--a3", action="store_true", default=None,
                        help="use the Hessian Lipschitz tuning")
    common.add_argument("--stride", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--max-cost", type=float, dest="max_cost")
    common.add_argument("--out", type=Path, help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"))

    ap = argparse.ArgumentParser(prog="logz", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("schedule", parents=[common], help="dump the annealing schedule")
    sub.add_parser("estimate", parents=[common], help="estimate log Z")
    rep = sub.add_parser("replicate", parents=[common], help="per-phase replicate statistics")
    rep.add_argument("-R", "--replicates", type=int, default=10)
    sub.add_parser("oracle", parents=[common], help="reference log Z")
    return ap


def load_config(args) -> tuple[dict, RunConfig, dict]:
    """Merge the config file and flags into (model spec, RunConfig, output table)."""
    doc = {}
    if args.config is not None:
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {args.config}: {exc}") from None
    model = dict(doc.get("model", {}))
    if args.model:
        model["name"] = args.model
    if "name" not in model:
        raise ConfigError("no model given: set [model].name in the config or pass --model")
    if model.get("data") and args.config is not None:
        model["data"] = str((args.config.parent / model["data"]).resolve())
    run = dict(doc.get("run", {}))
    unknown = set(run) - _RUN_FIELDS
    if unknown:
        raise ConfigError(f"unknown [run] keys: {sorted(unknown)}")
    for key in ("seed", "eps", "mu", "mu_tilde", "preset", "regime", "a3", "stride",
                "workers", "max_cost"):
        v = getattr(args, key, None)
        if v is not None:
            run[key] = v
    if run.get("workers") is None and os.environ.get("LOGZ_WORKERS"):
        try:
            run["workers"] = int(os.environ["LOGZ_WORKERS"])
        except ValueError:
            raise ConfigError("LOGZ_WORKERS must be a positive integer") from None
    if run.get("max_cost") is not None:
        run["max_cost"] = int(run["max_cost"])
    cfg = RunConfig(**run)
    output = dict(doc.get("output", {}))
    if args.out is not None:
        output["path"] = str(args.out)
    if args.format is not None:
        output["format"] = args.format
    return model, cfg, output


def _emit(text: str, output: dict) -> None:
    path = output.get("path")
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_schedule(model_spec, cfg, output) -> int:
    model = build_model(model_spec)
    try:
        sched = build_schedule(model.potential, cfg)
    except ClosedFormGaussian as exc:
        _note(f"m == L: no annealing needed, log Z = {exc.log_z!r}")
        _emit(json.dumps({"closed_form": True, "log_z": exc.log_z}) if output.get("format") == "json"
              else "i,k,sigma2,a,m_i,L_i,kappa_i,gamma,n,N\n", output)
        return EXIT_OK
    fmt = output.get("format", "csv")
    if fmt == "json":
        payload = json.loads(sched.to_json())
        payload["config_digest"] = config_digest(cfg, model.info)
        _emit(json.dumps(payload, indent=2), output)
    else:
        _emit(sched.to_csv(), output)
    _note(f"{sched.regime} regime: M={sched.M}, K={sched.K}, cost={sched.cost:.3e} steps")
    return EXIT_OK


def cmd_estimate(model_spec, cfg, output) -> int:
    model = build_model(model_spec)
    if cfg.mu_tilde is not None:
        res = median_estimate(model.potential, cfg, model_info=model.info)
    else:
        res = estimate(model.potential, cfg, model_info=model.info)
    if output.get("format") == "csv":
        _emit(res.to_csv(), output)
    else:
        _emit(res.to_json(), output)
    _note(f"log Z_hat = {res.log_z_hat:.6f}, log evidence = {res.log_evidence:.6f}, "
          f"cost = {res.realized_cost:.3e}, {res.wall_time:.1f}s")
    return EXIT_OK


def cmd_replicate(model_spec, cfg, output, R: int) -> int:
    model = build_model(model_spec)
    rows = replicate_report(model.potential, cfg, R)
    if output.get("format") == "json":
        _emit(json.dumps({"config_digest": config_digest(cfg, model.info), "replicates": R,
                          "phases": [dataclasses.asdict(r) for r in rows]},
                         indent=2, default=lambda v: None), output)
    else:
        _emit(report_csv(rows), output)
    _note(f"{R} replicates, {len(rows)} phases")
    return EXIT_OK


def cmd_oracle(model_spec, cfg, output) -> int:
    model = build_model(model_spec)
    value = model.reference_log_evidence()
    centered = value - model.potential.log_z_offset
    if output.get("format") == "csv":
        _emit(f"log_evidence,log_z_centered\n{value!r},{centered!r}\n", output)
    else:
        _emit(json.dumps({"log_evidence": value, "log_z_centered": centered,
                          "model": model.info.get("name"),
                          "config_digest": config_digest(cfg, model.info)}, indent=2), output)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        model_spec, cfg, output = load_config(args)
        if args.command == "schedule":
            return cmd_schedule(model_spec, cfg, output)
        if args.command == "estimate":
            return cmd_estimate(model_spec, cfg, output)
        if args.command == "replicate":
            return cmd_replicate(model_spec, cfg, output, args.replicates)
        return cmd_oracle(model_spec, cfg, output)
    except DivergenceError as exc:
        _note(f"error: {exc}")
        return EXIT_DIVERGENCE
    except OracleUnavailableError as exc:
        _note(f"error: {exc}")
        return EXIT_ORACLE
    except (ConfigError, ValidationError, ParseError, BudgetExceededError,
            OptimizationError, TypeError) as exc:
        _note(f"error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
