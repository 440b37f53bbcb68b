import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError
from rich.logging import RichHandler

from config import ENV_MAX_COST, ENV_OUTPUT_DIR, ENV_WORKERS
from qremlib.errors import ConfigError, QremLabError
from qremlib.experiments import RUNNERS
from qremlib.records import write_rows
from qremlib.runconfig import RunConfig, build_run_config, load_config_file
from services.load_env import load_env

logger = logging.getLogger("qremlab")

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_ENGINE_ERROR = 3

DEFAULT_OUTPUT_NAMES = {
    "pressure": "pressure",
    "converge-p": "converge_p",
    "phase-diagram": "phase_diagram",
    "selfavg": "selfavg",
    "cluster-census": "cluster_census",
    "closed-form": "closed_form",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qremlab",
        description="Pressures, closed forms and cluster geometry of quantum p-spin glasses and the quantum random energy model.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for command, help_text in (
        ("pressure", "Quenched pressure per (variant, p, n, beta, gamma) grid point"),
        ("converge-p", "Quenched pressure along p next to the p = infinity limit and its 1/p correction"),
        ("phase-diagram", "Quenched pressure on a (beta, gamma) grid with QREM branches and the critical field"),
        ("selfavg", "Concentration of the pressure around its disorder mean"),
        ("cluster-census", "Deep-hole cluster diameters and restricted transverse-field norms per disorder seed"),
        ("closed-form", "REM / QREM pressures, critical field and 1/p corrections"),
    ):
        sub = subparsers.add_parser(command, help=help_text)
        sub.add_argument("--config", help="Flat KEY=VALUE configuration file; flags override its values")
        sub.add_argument("--variant", help="Disorder variant: strict, full, rem, or strict:3 / full:3")
        sub.add_argument("--p-list", help="Comma-separated interaction orders")
        sub.add_argument("--n-list", help="Comma-separated spin counts")
        sub.add_argument("--beta-grid", help="Comma-separated inverse temperatures")
        sub.add_argument("--gamma-grid", help="Comma-separated transverse field strengths")
        sub.add_argument("--epsilon", type=float, help="Deep-hole deviation density")
        sub.add_argument("--r", type=float, help="Connectivity scale (overrides the schedule together with --L)")
        sub.add_argument("--L", type=int, help="Path length (overrides the schedule together with --r)")
        sub.add_argument("--num-disorder", type=int, help="Number of disorder realizations")
        sub.add_argument("--probes", type=int, help="Rademacher probes for the stochastic engine")
        sub.add_argument("--krylov-dim", type=int, help="Lanczos steps per probe")
        sub.add_argument("--base-seed", type=int, help="Seed of the first realization")
        sub.add_argument(
            "--method", choices=["auto", "classical_exact", "dense_eig", "stochastic_lanczos"], help="Pressure engine"
        )
        sub.add_argument("--output", "-o", help="Output file, '-' for stdout")
        sub.add_argument("--format", choices=["csv", "json"], help="Output format")
        sub.add_argument("--workers", type=int, help="Worker threads")
        sub.add_argument("--max-cost", type=float, help="Ceiling on the estimated operation count")
        sub.add_argument("--timing", action="store_true", default=None, help="Record wall time per row")
        sub.add_argument("--include-rem", action="store_true", default=None, help="converge-p: add REM baseline rows")
    return parser


def environment_defaults() -> dict[str, Any]:
    defaults: dict[str, Any] = {}
    if max_cost := os.getenv(ENV_MAX_COST):
        defaults["max_cost"] = max_cost
    if workers := os.getenv(ENV_WORKERS):
        defaults["workers"] = workers
    return defaults


def resolve_output(config: RunConfig, command: str) -> Optional[Path | str]:
    if config.output is not None:
        return config.output
    output_dir = os.getenv(ENV_OUTPUT_DIR)
    if not output_dir:
        return None
    return Path(output_dir) / f"{DEFAULT_OUTPUT_NAMES[command]}.{config.output_format.value}"


def run(command: str, args: argparse.Namespace) -> int:
    runner, model = RUNNERS[command]
    overrides = {
        "variant": args.variant,
        "p_list": args.p_list,
        "n_list": args.n_list,
        "beta_grid": args.beta_grid,
        "gamma_grid": args.gamma_grid,
        "epsilon": args.epsilon,
        "r": args.r,
        "L": args.L,
        "num_disorder": args.num_disorder,
        "probes": args.probes,
        "krylov_dim": args.krylov_dim,
        "base_seed": args.base_seed,
        "method": args.method,
        "output": args.output,
        "format": args.format,
        "workers": args.workers,
        "max_cost": args.max_cost,
        "timing": args.timing,
        "include_rem": args.include_rem,
    }
    try:
        file_values = load_config_file(args.config) if args.config else {}
        config = build_run_config({**environment_defaults(), **file_values}, overrides)
        rows = runner(config)
    except (ConfigError, ValidationError) as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG_ERROR
    except QremLabError as exc:
        logger.error("Engine error in %s: %s", command, exc)
        return EXIT_ENGINE_ERROR
    write_rows(rows, resolve_output(config, command), config.output_format, model)
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(format="%(message)s", datefmt="[%X]", handlers=[RichHandler(rich_tracebacks=True)])
        # Only our logger goes to DEBUG, library loggers stay quiet
        logger.setLevel(logging.DEBUG)
    load_env()
    return run(args.command, args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
