"""Command-line entry point: ``bangbang <command> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 flagged
result (tainted, budget exhausted, below the energy floor or a failed
validation).
"""

import argparse
import csv
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import msgspec
import numpy as np

from .container import FORMAT_VERSION, write_json
from .errors import ConfigError, NumericalError
from .ipeps import init_product_x, load_state, save_state
from .ntu import evolve
from .observables import (
    CorrelatorSeries,
    connected_correlator,
    environment,
    fit_correlation_length,
    measure,
    write_correlator,
)
from .operators import X, Z
from .optimize import optimize_bb, scan_dt
from .oracle import pipeline_check, random_sequence
from .sequences import bb_sequence, load_sequence, save_sequence
from .settings import RunConfig


__all__ = ["build_parser", "main"]

logger = logging.getLogger("bangbang_ipeps")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_FLAGGED = 4

_OPERATORS = {"ZZ": (Z, Z), "XX": (X, X), "ZX": (Z, X)}


class ValidationSummary(msgspec.Struct, kw_only=True):
    depth: int
    n_random: int
    seed: int
    tol: float
    product_energy: float
    max_diff: float
    epsilon_max: float
    failures: List[str] = []
    passed: bool = True
    format_version: str = FORMAT_VERSION


def _parse_grid(text: str) -> List[float]:
    """``start:stop:num`` for a linear grid, or a comma separated list."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            return list(np.linspace(float(start), float(stop), int(num)))
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"Validation error for field grid: cannot parse {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: config.out)")
    common.add_argument("--log-level", help="logging level (default: BANGBANG_LOG_LEVEL or INFO)")
    common.add_argument("--threads", type=int,
                        help="cap on worker threads (default: BANGBANG_THREADS)")
    common.add_argument("--seed", type=int)
    common.add_argument("--D-max", dest="D_max", type=int)
    common.add_argument("--chi", type=int)
    common.add_argument("--g", type=float)
    common.add_argument("--variant", choices=["para_target", "para_to_ferro"])

    parser = argparse.ArgumentParser(prog="bangbang", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", parents=[common], help="evolve |+> under a gate sequence")
    p.add_argument("--sequence", required=True)

    p = sub.add_parser("scan-dt", parents=[common], help="AP energy versus time step")
    p.add_argument("--N", dest="depths", type=int, nargs="+", required=True)
    p.add_argument("--grid", default="0.02:0.6:30")

    p = sub.add_parser("optimize-bb", parents=[common], help="optimize all 2N angles")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--strategy", action="append",
                   choices=["ap_seed", "warm_start", "random"])
    p.add_argument("--previous", help="optimized N-1 sequence for warm_start")
    p.add_argument("--ap-dt", type=float, help="skip the AP scan and seed from this dt")
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("correlate", parents=[common], help="connected correlator of a state")
    p.add_argument("--state", required=True)
    p.add_argument("--op", choices=sorted(_OPERATORS), default="ZZ")
    p.add_argument("--rmax", type=int, default=10)
    p.add_argument("--direction", choices=["row", "column"], default="row")
    p.add_argument("--fit", nargs=2, type=int, metavar=("R_MIN", "R_MAX"),
                   help="fit an exponential decay on this window")

    p = sub.add_parser("validate", parents=[common], help="compare against the exact cone oracle")
    p.add_argument("--n-random", type=int, default=5)
    p.add_argument("--depth", type=int, default=1)

    p = sub.add_parser("summary", parents=[common], help="merge result JSON files into a CSV")
    p.add_argument("results", nargs="+")
    return parser


def _load_config(args) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in ("seed", "D_max", "chi", "g", "variant",
                                                      "threads", "out")}
    if getattr(args, "log_level", None):
        overrides["log_level"] = args.log_level
    if getattr(args, "N", None) is not None:
        overrides["N"] = args.N
    config = RunConfig.from_file(args.config, **overrides)
    if config.threads is not None:
        config.optimizer = msgspec.structs.replace(
            config.optimizer, workers=min(config.optimizer.workers, config.threads))
    return config


def _setup_logging(level: Optional[str]) -> None:
    level = (level or os.environ.get("BANGBANG_LOG_LEVEL") or "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _provenance(config: RunConfig, **extra) -> Dict:
    return {"config": config.model_dump(), "seed": config.seed, **extra}


def _write_result(path: Path, record, config: RunConfig, **extra) -> Path:
    """JSON result with the run configuration and seed under ``provenance``."""
    body = msgspec.to_builtins(record)
    return write_json(path, {**body, "provenance": _provenance(config, **extra)})


def _write_csv(path: Path, header: Sequence[str], rows, config: RunConfig, **extra) -> Path:
    """CSV plus a ``.meta.json`` sidecar carrying the provenance."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    write_json(path.with_suffix(".meta.json"), {"columns": list(header),
                                                "provenance": _provenance(config, **extra)})
    return path


def cmd_evolve(args, config: RunConfig) -> int:
    seq = load_sequence(args.sequence)
    out = Path(config.out)
    state, report = evolve(init_product_x(), seq, config.D_max, config.ntu)
    result, _ = measure(state, config.chi, seq.target_field, config.boundary)
    save_state(state, out / "state", metadata=_provenance(config, sequence=args.sequence))
    _write_result(out / "evolution.json", report, config, sequence=args.sequence)
    _write_result(out / "observables.json", result, config, sequence=args.sequence)
    print(f"energy per bond {result.energy:.10f}  epsilon_NTU {report.epsilon_total:.3e}")
    return EXIT_OK


def cmd_scan_dt(args, config: RunConfig) -> int:
    grid = _parse_grid(args.grid)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    flagged = False
    for N in args.depths:
        result = scan_dt(N, grid, config.D_max, config.chi, config.variant, config.field,
                         config.ntu, config.boundary)
        _write_csv(out / f"scan_N{N}.csv", ["total_angle", "energy"],
                   ((repr(a), repr(e)) for a, e in result.curve), config, N=N)
        _write_result(out / f"scan_N{N}.json", result, config, N=N)
        rows.append((N, result.dt_star, result.energy_star, result.epsilon_ntu))
        if not result.interior_minimum:
            flagged = True
        print(f"N={N}: dt*={result.dt_star:.6f}  E_AP={result.energy_star:.8f}  "
              f"epsilon_NTU={result.epsilon_ntu:.3e}")
    if len(rows) > 1:
        _write_csv(out / "energy_vs_N.csv", ["N", "dt_star", "E_AP", "epsilon_ntu"], rows, config,
                   depths=list(args.depths))
    return EXIT_FLAGGED if flagged else EXIT_OK


def cmd_optimize_bb(args, config: RunConfig) -> int:
    out = Path(config.out)
    strategies = args.strategy or ["ap_seed"]
    previous = load_sequence(args.previous) if args.previous else None
    try:
        seq, energy, report = optimize_bb(
            config.N, strategies, config.D_max, config.chi, config.optimizer, config.variant,
            config.field, config.ntu, config.boundary, previous=previous, ap_dt=args.ap_dt,
            seed=config.seed, checkpoint_dir=out / "checkpoints", resume=args.resume)
    except KeyboardInterrupt:
        logger.warning("interrupted; stage checkpoints are in %s", out / "checkpoints")
        return 130
    provenance = _provenance(config, strategies=strategies, previous=args.previous)
    seq = msgspec.structs.replace(seq, metadata={**seq.metadata, "provenance": provenance})
    save_sequence(seq, out / f"bb_N{config.N}.json")
    _write_result(out / f"bb_N{config.N}_report.json", report, config, strategies=strategies,
                  previous=args.previous)
    print(f"N={config.N}: E_BB={energy:.8f}  epsilon_NTU={report.epsilon_ntu:.3e}")
    if report.tainted or report.budget_exhausted or report.below_floor:
        logger.warning("result flagged: tainted=%s budget_exhausted=%s below_floor=%s",
                       report.tainted, report.budget_exhausted, report.below_floor)
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_correlate(args, config: RunConfig) -> int:
    state = load_state(args.state)
    op1, op2 = _OPERATORS[args.op]
    env = environment(state, config.chi, config.boundary)
    values = connected_correlator(env, op1, op2, args.rmax, args.direction)
    r = list(range(1, args.rmax + 1))
    series = CorrelatorSeries(op1=args.op[0], op2=args.op[1], r=r, connected=values,
                              direction=args.direction, chi=config.chi)
    metadata = _provenance(config, state=args.state)
    if args.fit:
        xi = fit_correlation_length(r, values, tuple(args.fit))
        metadata["correlation_length"] = xi
        print(f"decay length {xi:.4f}")
    write_correlator(series, Path(config.out) / f"correlator_{args.op}.csv", metadata)
    return EXIT_OK


def cmd_validate(args, config: RunConfig) -> int:
    rng = np.random.default_rng(config.seed)
    tol = 1e-8 if args.depth == 1 else 1e-6
    failures = []
    zero = bb_sequence([0.0], [0.0], config.variant, config.field)
    product, _ = measure(init_product_x(), config.chi, zero.target_field, config.boundary)
    expected = -0.5 * zero.target_field
    if abs(product.energy - expected) > 1e-10:
        failures.append(f"product energy {product.energy} != {expected}")
    max_diff, eps_max = 0.0, 0.0
    for k in range(args.n_random):
        seq = random_sequence(rng, args.depth, config.variant, config.field)
        report = pipeline_check(seq, config.D_max, config.chi, ntu=config.ntu,
                                boundary=config.boundary)
        max_diff = max(max_diff, report.max_diff)
        eps_max = max(eps_max, report.epsilon_ntu)
        if not report.passed(tol):
            failures.append(f"random sequence {k}: oracle diff {report.max_diff:.3e}")
    summary = ValidationSummary(depth=args.depth, n_random=args.n_random, seed=config.seed,
                                tol=tol, product_energy=product.energy, max_diff=max_diff,
                                epsilon_max=eps_max, failures=failures, passed=not failures)
    _write_result(Path(config.out) / "validate.json", summary, config)
    print(msgspec.json.format(msgspec.json.encode(summary)).decode())
    return EXIT_OK if summary.passed else EXIT_FLAGGED


def cmd_summary(args, config: RunConfig) -> int:
    rows = []
    for path in args.results:
        try:
            record = msgspec.json.decode(Path(path).read_bytes())
        except (OSError, msgspec.DecodeError) as e:
            raise ConfigError(f"Cannot read result {path}: {e}")
        if "dt_star" in record:
            rows.append((record["N"], "AP", record["energy_star"], record.get("epsilon_ntu", 0.0)))
        elif "strategies" in record:
            rows.append((record["N"], "BB", record["energy"], record["epsilon_ntu"]))
        else:
            raise ConfigError(f"{path}: neither a scan nor an optimization result")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "summary.csv", ["N", "protocol", "energy", "epsilon_ntu"], sorted(rows),
               config, results=[str(p) for p in args.results])
    return EXIT_OK


_COMMANDS = {
    "evolve": cmd_evolve,
    "scan-dt": cmd_scan_dt,
    "optimize-bb": cmd_optimize_bb,
    "correlate": cmd_correlate,
    "validate": cmd_validate,
    "summary": cmd_summary,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level)
    try:
        config = _load_config(args)
        return _COMMANDS[args.command](args, config)
    except (NumericalError, np.linalg.LinAlgError) as e:
        logger.error("numerical failure: %s", e)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
