import argparse
import logging
import os
import sys
import time
from logging.handlers import RotatingFileHandler

import numpy as np
from pydantic import ValidationError

import config
from core.biot import DiscreteState, assemble_operators, initial_state, run
from core.errors import BiotError, ConfigError
from core.mesh import build_structured_tet_mesh
from core.params import MaterialParams, RunConfig, SolverConfig, load_run_config
from studies.convergence import run_convergence_study
from studies.export import export_fields
from studies.manufactured import ManufacturedCase
from studies.verify import run_oracle_suite


def setup_logging(quiet: bool = False):
    os.makedirs(config.LOG_DIR, exist_ok=True)

    file_handler = RotatingFileHandler(
        os.path.join(config.LOG_DIR, config.LOG_FILE),
        maxBytes=config.LOG_MAX_BYTES,
        backupCount=config.LOG_BACKUP_COUNT,
        encoding="utf-8"
    )
    console_handler = logging.StreamHandler()

    log_format = logging.Formatter(
        "%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )
    file_handler.setFormatter(log_format)
    console_handler.setFormatter(log_format)

    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        handlers=[file_handler, console_handler],
        force=True
    )


# -----------------------------
# Argument parsing
# -----------------------------
def parse_levels(text: str):
    try:
        levels = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma separated integers, got {text!r}")
    if not levels or any(n < 1 for n in levels):
        raise argparse.ArgumentTypeError(f"levels must be positive, got {text!r}")
    return levels


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biot_runner",
        description="Fixed-stress Biot solver with line-source singularity removal",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    converge = sub.add_parser("converge", parents=[common], help="manufactured-solution convergence study")
    converge.add_argument("--levels", type=parse_levels,
                          default=list(config.CONVERGENCE_LEVELS), help="e.g. 8,16,32")
    converge.add_argument("--config", help="JSON run config for material/solver values")
    converge.add_argument("--tau", type=float)
    converge.add_argument("--T", type=float)
    converge.add_argument("--jobs", type=int, default=1, help="mesh levels run in parallel")
    converge.add_argument("--report", nargs="?", const=config.REPORT_FILE, help="write the report as JSON")

    solve = sub.add_parser("solve", parents=[common], help="single run from a JSON config")
    solve.add_argument("--config", help="JSON run config (defaults when omitted)")
    solve.add_argument("--export", help="legacy VTK output of the final state")
    solve.add_argument("--tau", type=float)
    solve.add_argument("--T", type=float)

    verify = sub.add_parser("verify", parents=[common], help="Green's function and assembly oracle checks")
    verify.add_argument("--quick", action="store_true")
    return parser


def _run_config(args) -> RunConfig:
    run_cfg = load_run_config(args.config) if args.config else RunConfig()
    overrides = {k: getattr(args, k) for k in ("tau", "T") if getattr(args, k, None) is not None}
    try:
        if overrides:
            run_cfg = RunConfig.model_validate({**run_cfg.model_dump(), **overrides})
        run_cfg.material()
        run_cfg.solver()
    except ValidationError as e:
        raise ConfigError(f"Invalid command-line override {overrides}: {e}") from e
    return run_cfg


# -----------------------------
# Subcommands
# -----------------------------
def cmd_converge(args) -> int:
    run_cfg = _run_config(args)
    report = run_convergence_study(
        args.levels, run_cfg.material(), run_cfg.solver(), jobs=args.jobs, progress=not args.quiet
    )
    print(report.table())
    if args.report:
        report.save(args.report)
    return 0


def cmd_solve(args) -> int:
    run_cfg = _run_config(args)
    params: MaterialParams = run_cfg.material()
    solver: SolverConfig = run_cfg.solver()
    case = ManufacturedCase(params=params, a=run_cfg.segment_a, b=run_cfg.segment_b)
    network = case.network

    mesh = build_structured_tet_mesh(run_cfg.mesh_size)
    ops = assemble_operators(mesh, params, solver)
    loads = case.loads()
    initial: DiscreteState = initial_state(ops, network, loads)
    trajectory = run(ops, initial, network, loads, progress=not args.quiet)

    final = trajectory.final
    print(
        f"t={final.t:.3f}: max|p_r|={np.max(np.abs(final.p_r)):.4e} "
        f"max|u|={np.max(np.abs(final.u)):.4e} iterations={trajectory.iterations}"
    )
    output = args.export or run_cfg.output
    if output:
        export_fields(ops, final, network, output)
    return 0


def cmd_verify(args) -> int:
    results = run_oracle_suite(quick=args.quick)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<42} {r.value:.3e}  (< {r.threshold:.1e})")
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {"converge": cmd_converge, "solve": cmd_solve, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.quiet)
    logging.info(f"=== biot_runner {args.command} started ===")
    start_time = time.time()
    try:
        code = COMMANDS[args.command](args)
    except BiotError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return 1
    except OSError as e:
        logging.error(f"I/O failure: {e}")
        return 1
    logging.info(f"=== biot_runner {args.command} finished in {time.time() - start_time:.1f}s ===")
    return code


if __name__ == "__main__":
    sys.exit(main())
