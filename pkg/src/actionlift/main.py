"""actionlift command-line entry point.

Subcommands:
    lift       lift an action CSV (or a directory of them) to waypoint CSV
    gradcheck  verify analytic Jacobians against finite differences
    sweep      numerical-error study over horizons, intervals and schemes
    pareto     CCPP substep accuracy vs. compute study
    train      policy training demo through a lift
    fit-mlp    fit the learned lifting baseline

Data goes to files given by --out; diagnostics go to stderr. Exit status is 0
on success, 1 when the command's success contract fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import yaml
from pydantic import ValidationError

from actionlift import __version__
from actionlift.analysis.gradients import finite_diff_check
from actionlift.analysis.harness import pareto_substeps, run_sweep, summarize
from actionlift.config import (
    MlpFitConfig,
    SweepSpec,
    TrainConfig,
    get_defaults,
    get_settings,
    load_document,
    load_lift_job,
)
from actionlift.core.errors import FormatError, LiftError
from actionlift.core.types import InitialState, ModelKind, RawActionSequence, Scheme
from actionlift.formats import (
    read_actions_csv,
    read_json,
    write_json,
    write_loss_curve_csv,
    write_records_csv,
    write_waypoints_csv,
)
from actionlift.lifting.operator import make_lift
from actionlift.training.networks import MlpLift
from actionlift.training.trainer import fit_mlp_lift, run_training

if TYPE_CHECKING:
    from actionlift.config import LiftConfig
    from actionlift.core.types import ErrorRecord

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        msg = f"must be >= 1, got {value}"
        raise argparse.ArgumentTypeError(msg)
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        msg = f"must be > 0, got {value}"
        raise argparse.ArgumentTypeError(msg)
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON or YAML document for the command")
    common.add_argument(
        "--seed", type=int, default=None, help="Random seed (default: the document's, 0)"
    )
    common.add_argument("--out", type=Path, help="Output file or directory")

    parser = argparse.ArgumentParser(
        prog="actionlift",
        description="Lift raw driving actions to ego-frame waypoints and study the lifts",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    lift = sub.add_parser("lift", parents=[common], help="Lift actions to waypoints")
    lift.add_argument("--actions", type=Path, required=True, help="Action CSV or directory")
    lift.add_argument("--mlp-params", type=Path, help="Fitted MLP lift JSON for model 'mlp'")
    lift.add_argument("--no-headings", action="store_true", help="Omit the theta column")

    check = sub.add_parser("gradcheck", parents=[common], help="Verify lift Jacobians")
    check.add_argument("--cases", type=_positive_int, help="Random cases per model and scheme")
    check.add_argument("--tolerance", type=_positive_float, help="Maximum relative error")
    check.add_argument("--fd-step", type=_positive_float, help="Central-difference step")

    sweep = sub.add_parser("sweep", parents=[common], help="Numerical-error sweep")
    sweep.add_argument("--with-yaw", action="store_true", help="Append yaw error columns")

    pareto = sub.add_parser("pareto", parents=[common], help="CCPP substep study")
    pareto.add_argument("--with-yaw", action="store_true", help="Append yaw error columns")

    train = sub.add_parser("train", parents=[common], help="Policy training demo")
    train.add_argument("--model", choices=["kbm", "ccpp"], help="Swap in a model preset")

    sub.add_parser("fit-mlp", parents=[common], help="Fit the learned lift baseline")
    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _require_out(args: argparse.Namespace) -> Path:
    if args.out is None:
        msg = f"'{args.command}' needs --out"
        raise FormatError(msg)
    return Path(args.out)


def cmd_lift(args: argparse.Namespace) -> int:
    if args.config is None:
        msg = "'lift' needs --config with a lift job document"
        raise FormatError(msg)
    out = _require_out(args)
    job = load_lift_job(args.config)
    mlp = None
    if job.lift.model is ModelKind.MLP and args.mlp_params is not None:
        mlp = MlpLift.from_dict(read_json(args.mlp_params))
    lift = make_lift(job.lift, mlp)
    state = job.initial_state.to_initial_state()

    if args.actions.is_dir():
        sources = sorted(args.actions.glob("*.csv"))
        if not sources:
            msg = f"no action CSV files in {args.actions}"
            raise FormatError(msg)
        for source in sources:
            traj = lift(read_actions_csv(source), state)
            write_waypoints_csv(out / source.name, traj, with_headings=not args.no_headings)
        logger.info("Lifted %d sequences into %s", len(sources), out)
        return 0

    traj = lift(read_actions_csv(args.actions), state)
    write_waypoints_csv(out, traj, with_headings=not args.no_headings)
    logger.info("Lifted %d waypoints into %s", len(traj), out)
    return 0


def _gradcheck_targets(args: argparse.Namespace) -> list[LiftConfig]:
    if args.config is not None:
        return [load_lift_job(args.config).lift]
    defaults = get_defaults()
    return [
        defaults.preset(model, scheme)
        for model in (ModelKind.KBM, ModelKind.CCPP)
        for scheme in (Scheme.EULER, Scheme.RK4)
    ]


def cmd_gradcheck(args: argparse.Namespace) -> int:
    base = get_defaults().gradcheck
    overrides = {
        "cases": args.cases,
        "tolerance": args.tolerance,
        "fd_step": args.fd_step,
    }
    check = base.model_copy(update={k: v for k, v in overrides.items() if v is not None})
    seed = 0 if args.seed is None else args.seed
    rng = np.random.default_rng(seed)

    summary: list[dict[str, Any]] = []
    ok = True
    for cfg in _gradcheck_targets(args):
        worst = 0.0
        failures = 0
        flagged = 0
        for _ in range(check.cases):
            actions = RawActionSequence(rng.standard_normal((check.horizon, 3)))
            state = InitialState(v0=float(rng.uniform(0.0, check.v0_max)))
            report = finite_diff_check(actions, state, cfg, check.fd_step)
            if report.boundary_flag:
                flagged += 1
                continue
            worst = max(worst, report.max_rel_err)
            if not report.passed(check.tolerance):
                failures += 1
        passed = failures == 0
        ok = ok and passed
        summary.append(
            {
                "model": cfg.model.value,
                "scheme": cfg.scheme.value,
                "cases": check.cases,
                "boundary_flagged": flagged,
                "failures": failures,
                "max_rel_err": worst,
                "passed": passed,
            }
        )
        log = logger.info if passed else logger.error
        log(
            "gradcheck %s/%s: %d failures, max_rel_err=%.3e (%d boundary-flagged)",
            cfg.model.value,
            cfg.scheme.value,
            failures,
            worst,
            flagged,
        )

    payload = {"tolerance": check.tolerance, "fd_step": check.fd_step, "results": summary}
    if args.out is not None:
        write_json(args.out, payload)
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    return 0 if ok else 1


def _sweep_spec(args: argparse.Namespace) -> SweepSpec:
    spec = (
        get_defaults().sweep
        if args.config is None
        else SweepSpec.model_validate(load_document(args.config))
    )
    if args.seed is not None:
        spec = spec.model_copy(update={"rng_seed": args.seed})
    return spec


def _emit_records(args: argparse.Namespace, records: list[ErrorRecord]) -> int:
    out = _require_out(args)
    write_records_csv(out, records, with_yaw=args.with_yaw)
    for row in summarize(records):
        sys.stdout.write(
            f"{row.model.value},{row.scheme.value},cf={row.cf},dt={row.dt!r},"
            f"n_int={row.n_int},mean_l1={row.mean_l1!r},rhs_evals={row.rhs_evals}\n"
        )
    logger.info("Wrote %d records to %s", len(records), out)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    return _emit_records(args, run_sweep(_sweep_spec(args)))


def cmd_pareto(args: argparse.Namespace) -> int:
    spec = _sweep_spec(args)
    if args.config is None:
        spec = spec.model_copy(update={"models": [ModelKind.CCPP]})
    return _emit_records(args, pareto_substeps(spec))


def cmd_train(args: argparse.Namespace) -> int:
    out = _require_out(args)
    defaults = get_defaults()
    cfg = (
        defaults.train
        if args.config is None
        else TrainConfig.model_validate(load_document(args.config))
    )
    updates: dict[str, Any] = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.model is not None:
        updates["lift"] = defaults.preset(ModelKind(args.model), cfg.lift.scheme)
    cfg = cfg.model_copy(update=updates)

    result = run_training(cfg)
    write_loss_curve_csv(out / "loss_curve.csv", result.losses)
    write_json(out / "policy.json", result.policy.to_dict())
    write_json(
        out / "summary.json",
        {
            "model": cfg.lift.model.value,
            "scheme": cfg.lift.scheme.value,
            "steps": cfg.steps,
            "initial_loss": result.initial_loss,
            "final_loss": result.final_loss,
            "ratio": result.ratio,
        },
    )
    sys.stdout.write(f"final/initial loss ratio: {result.ratio!r}\n")
    return 0


def cmd_fit_mlp(args: argparse.Namespace) -> int:
    out = _require_out(args)
    cfg = (
        get_defaults().mlp_fit
        if args.config is None
        else MlpFitConfig.model_validate(load_document(args.config))
    )
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    result = fit_mlp_lift(cfg)
    write_json(out / "mlp_lift.json", result.model.to_dict())
    write_loss_curve_csv(out / "loss_curve.csv", result.epoch_losses)
    sys.stdout.write(f"held-out mean waypoint error: {result.heldout_error!r} m\n")
    return 0


_COMMANDS = {
    "lift": cmd_lift,
    "gradcheck": cmd_gradcheck,
    "sweep": cmd_sweep,
    "pareto": cmd_pareto,
    "train": cmd_train,
    "fit-mlp": cmd_fit_mlp,
}


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv`` and run one subcommand, returning the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        fields = ", ".join(".".join(str(p) for p in err["loc"]) for err in exc.errors())
        logger.error("Invalid document (fields: %s): %s", fields, exc)
    except (LiftError, ValueError, yaml.YAMLError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
    return 1


def main() -> None:
    """Synchronous entry point."""
    logging.basicConfig(level=get_settings().log_level, format=LOG_FORMAT, stream=sys.stderr)
    sys.exit(run())


if __name__ == "__main__":
    main()
