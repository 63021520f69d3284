"""Run the numerical-error study from config/defaults.yml and print a summary.

Runs the horizon/interval sweep over both models, the CCPP substep study and
the per-waypoint error profiles at the coarsest interval, writing CSVs into an
output directory.

Usage:
    poetry run python scripts/reproduce_numerics.py [--out results/] [--corpus-size 256]
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

# Add project root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from actionlift.analysis.harness import (  # noqa: E402
    pareto_substeps,
    run_sweep,
    sequence_errors,
    summarize,
)
from actionlift.analysis.metrics import error_profile  # noqa: E402
from actionlift.config import get_defaults  # noqa: E402
from actionlift.core.types import ModelKind, Scheme  # noqa: E402
from actionlift.formats import write_profile_csv, write_records_csv  # noqa: E402

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments for the study script.

    Args:
        argv: Arguments to parse. Uses sys.argv if None.

    Returns:
        Parsed namespace with output directory and corpus size.
    """
    parser = argparse.ArgumentParser(
        description="Reproduce the integrator, interval and substep studies.",
    )
    parser.add_argument(
        "--out",
        type=Path,
        default=Path("results"),
        help="Directory for the CSV outputs (default: results/)",
    )
    parser.add_argument(
        "--corpus-size",
        type=int,
        default=None,
        help="Override the corpus size of the default sweep",
    )
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> None:
    args = parse_args(argv)
    spec = get_defaults().sweep
    if args.corpus_size is not None:
        spec = spec.model_copy(update={"corpus_size": args.corpus_size})

    records = run_sweep(spec)
    write_records_csv(args.out / "sweep.csv", records, with_yaw=True)

    ccpp = spec.model_copy(update={"models": [ModelKind.CCPP]})
    pareto = pareto_substeps(ccpp)
    write_records_csv(args.out / "pareto.csv", pareto)

    dt = max(spec.intervals)
    cf = max(spec.horizons)
    for model in spec.models:
        for scheme in spec.schemes:
            n_int = max(spec.substeps) if model is ModelKind.CCPP else 1
            errors = sequence_errors(spec, model, scheme, n_int, cf, dt)
            name = f"profile_{model.value}_{scheme.value}.csv"
            write_profile_csv(args.out / name, error_profile(errors))

    print("=" * 60)
    print("Numerical study summary")
    print("=" * 60)
    for row in summarize(records):
        marker = "*" if row.scheme is Scheme.RK4 else " "
        print(
            f"{marker} {row.model.value:4s} {row.scheme.value:5s} C_f={row.cf:2d} "
            f"dt={row.dt:<4g} n_int={row.n_int:2d}  mean={row.mean_l1:.3e} m  "
            f"terminal={row.terminal_l1:.3e} m  rhs={row.rhs_evals}"
        )
    print("=" * 60)
    logger.info("Results written to %s", args.out)


if __name__ == "__main__":
    main()
