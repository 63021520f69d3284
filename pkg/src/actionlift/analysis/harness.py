"""Numerical-error harness: refined oracle rollouts and integrator studies.

The oracle integrates the same piecewise-constant physical controls as the
lift with many small RK4 steps. For CCPP it follows the continuous clamped
clothoid: a refined step that would carry the curvature past its bound is
split where the bound is reached and continues with the curvature pinned.
Its step is the interval arc length over ``refine``, independent of n_int,
so one oracle serves every substep count of a study.

Sweeps evaluate grid groups (model, C_f, dt) concurrently in worker threads,
bounded by a semaphore, then sort the records so that output is
byte-for-byte reproducible.
"""

from __future__ import annotations

import asyncio
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import special

from actionlift.analysis.metrics import error_profile
from actionlift.config import LiftConfig, get_settings, validate_config
from actionlift.core.errors import ConfigError
from actionlift.core.state import init_ccpp, init_kbm
from actionlift.core.types import ErrorRecord, ModelKind, Scheme, WaypointTrajectory
from actionlift.lifting.activation import activate_array
from actionlift.lifting.ccpp import ccpp_field
from actionlift.lifting.integrators import rk4_step
from actionlift.lifting.kbm import rk4_kbm
from actionlift.lifting.operator import rhs_evaluations, rollout

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from numpy.typing import ArrayLike, NDArray

    from actionlift.config import SweepSpec
    from actionlift.core.types import InitialState, RawActionSequence

logger = logging.getLogger(__name__)

# Smallest admissible oracle refinement
MIN_REFINE = 64

# Default refinement for single-sequence oracle rollouts
DEFAULT_REFINE = 1024


# ---------------------------------------------------------------------------
# Closed-form references
# ---------------------------------------------------------------------------


def constant_turn_arc(
    v: float, delta: float, wheelbase: float, t: float
) -> tuple[float, float, float]:
    """Pose after driving ``t`` seconds at constant speed and steering from the origin."""
    omega = v * math.tan(delta) / wheelbase
    if omega == 0.0:
        return v * t, 0.0, 0.0
    radius = v / omega
    theta = omega * t
    return radius * math.sin(theta), radius * (1.0 - math.cos(theta)), theta


def clothoid_pose(
    kappa0: float, sharpness: float, s: float, theta0: float = 0.0
) -> tuple[float, float, float]:
    """Pose after arc length ``s`` along an unclamped clothoid from the origin.

    Uses Fresnel integrals; a zero sharpness degenerates to a circular arc or
    a straight line.
    """
    theta = theta0 + kappa0 * s + 0.5 * sharpness * s * s
    if sharpness == 0.0:
        if kappa0 == 0.0:
            return s * math.cos(theta0), s * math.sin(theta0), theta0
        return (
            (math.sin(theta) - math.sin(theta0)) / kappa0,
            (math.cos(theta0) - math.cos(theta)) / kappa0,
            theta,
        )
    scale = math.sqrt(math.pi * abs(sharpness))
    s_end, c_end = special.fresnel((kappa0 + sharpness * s) / scale)
    s_start, c_start = special.fresnel(kappa0 / scale)
    rotation = math.sqrt(math.pi / abs(sharpness)) * np.exp(
        1j * (theta0 - kappa0**2 / (2.0 * sharpness))
    )
    spiral = np.sign(sharpness) * (c_end - c_start) + 1j * (s_end - s_start)
    pos = rotation * spiral
    return float(pos.real), float(pos.imag), theta


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------


def _check_refine(refine: int) -> None:
    if refine < MIN_REFINE:
        msg = f"oracle refinement must be >= {MIN_REFINE}, got {refine}"
        raise ValueError(msg)


def _clamped_clothoid_step(
    p: NDArray[np.float64],
    sharpness: NDArray[np.float64],
    h: NDArray[np.float64],
    kappa_max: float,
) -> NDArray[np.float64]:
    kappa = p[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        reach = np.where(
            sharpness != 0.0, (np.sign(sharpness) * kappa_max - kappa) / sharpness, np.inf
        )
    free = np.minimum(h, np.clip(reach, 0.0, None))
    p = rk4_step(lambda q: ccpp_field(q, sharpness), p, free)
    p[:, 3] = np.clip(p[:, 3], -kappa_max, kappa_max)
    pinned = h - free
    if np.any(pinned > 0.0):
        p = rk4_step(lambda q: ccpp_field(q, 0.0), p, pinned)
    return p


def oracle_trace(
    actions: ArrayLike, v0: ArrayLike, kappa0: ArrayLike, cfg: LiftConfig, refine: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Reference waypoints (N, C_f, 2) and headings (N, C_f) for a batch."""
    validate_config(cfg)
    _check_refine(refine)
    raw = np.asarray(actions, dtype=np.float64)
    n_seq, horizon = raw.shape[0], raw.shape[1]
    points = np.zeros((n_seq, horizon, 2))
    headings = np.zeros((n_seq, horizon))
    v = np.broadcast_to(np.asarray(v0, dtype=np.float64), (n_seq,)).copy()

    if cfg.model is ModelKind.KBM:
        a_lon, delta = activate_array(raw, cfg.a_max, cfg.delta_max)
        z = np.zeros((n_seq, 4))
        z[:, 3] = v
        h = cfg.dt / refine
        for k in range(horizon):
            for _ in range(refine):
                z = rk4_kbm(z, a_lon[:, k], delta[:, k], h, cfg.wheelbase)
            points[:, k] = z[:, :2]
            headings[:, k] = z[:, 2]
        return points, headings

    if cfg.model is not ModelKind.CCPP:
        msg = f"oracle needs an analytic model, got {cfg.model.value}"
        raise ConfigError("model", msg)
    a_lon, sharpness = activate_array(raw, cfg.a_max, cfg.sharpness_max)
    p = np.zeros((n_seq, 4))
    p[:, 3] = np.broadcast_to(np.asarray(kappa0, dtype=np.float64), (n_seq,))
    for k in range(horizon):
        v = np.maximum(v + a_lon[:, k] * cfg.dt, 0.0)
        h = (v * cfg.dt) / refine
        for _ in range(refine):
            p = _clamped_clothoid_step(p, sharpness[:, k], h, cfg.kappa_max)
        points[:, k] = p[:, :2]
        headings[:, k] = p[:, 2]
    return points, headings


def oracle_rollout(
    a: RawActionSequence, s: InitialState, cfg: LiftConfig, refine: int = DEFAULT_REFINE
) -> WaypointTrajectory:
    """Converged reference trajectory for one sequence under the same controls.

    Raises:
        ValueError: If ``refine`` is below the minimum refinement.
    """
    if cfg.model is ModelKind.CCPP:
        start = init_ccpp(s, cfg)
        v0, kappa0 = start.v, start.kappa
    else:
        v0, kappa0 = init_kbm(s).v, 0.0
    points, headings = oracle_trace(a.values[None], [v0], [kappa0], cfg, refine)
    return WaypointTrajectory(points=points[0], headings=headings[0])


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Corpus:
    """Raw action sequences (N, C_f, 3) with their initial speeds (N,)."""

    actions: NDArray[np.float64]
    v0: NDArray[np.float64]

    @property
    def size(self) -> int:
        return int(self.actions.shape[0])


def sample_corpus(horizon: int, size: int, seed: int, v0_max: float) -> Corpus:
    """Standard-normal raw actions and uniform initial speeds, keyed by (seed, horizon)."""
    rng = np.random.default_rng((seed, horizon))
    actions = rng.standard_normal((size, horizon, 3))
    v0 = rng.uniform(0.0, v0_max, size)
    return Corpus(actions=actions, v0=v0)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridGroup:
    """Grid points sharing one corpus and one oracle."""

    model: ModelKind
    cf: int
    dt: float


@dataclass(frozen=True)
class SweepSummary:
    """Errors of one grid point averaged over waypoints."""

    model: ModelKind
    scheme: Scheme
    cf: int
    dt: float
    n_int: int
    mean_l1: float
    terminal_l1: float
    rhs_evals: int


def _candidates(spec: SweepSpec, model: ModelKind) -> list[tuple[Scheme, int]]:
    if model is ModelKind.KBM:
        return [(scheme, 1) for scheme in spec.schemes]
    return [(scheme, n) for scheme in spec.schemes for n in spec.substeps]


def _config(
    spec: SweepSpec, model: ModelKind, dt: float, scheme: Scheme, n_int: int
) -> LiftConfig:
    return LiftConfig.from_vehicle(spec.vehicle, dt=dt, n_int=n_int, scheme=scheme, model=model)


def _sequence_errors(
    cfg: LiftConfig,
    corpus: Corpus,
    ref_points: NDArray[np.float64],
    ref_headings: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    trace = rollout(corpus.actions, corpus.v0, 0.0, cfg)
    errors = np.sum(np.abs(trace.waypoints - ref_points), axis=2)
    yaw = np.abs(trace.headings - ref_headings)
    return errors, yaw


def _evaluate_group(group: GridGroup, corpus: Corpus, spec: SweepSpec) -> list[ErrorRecord]:
    ref_cfg = _config(spec, group.model, group.dt, Scheme.RK4, 1)
    ref_points, ref_headings = oracle_trace(corpus.actions, corpus.v0, 0.0, ref_cfg, spec.refine)
    records: list[ErrorRecord] = []
    for scheme, n_int in _candidates(spec, group.model):
        cfg = _config(spec, group.model, group.dt, scheme, n_int)
        errors, yaw = _sequence_errors(cfg, corpus, ref_points, ref_headings)
        evals = rhs_evaluations(cfg, group.cf)
        yaw_mean, yaw_std = yaw.mean(axis=0), yaw.std(axis=0)
        for row in error_profile(errors):
            records.append(
                ErrorRecord(
                    model=group.model,
                    scheme=scheme,
                    cf=group.cf,
                    dt=group.dt,
                    n_int=n_int,
                    k=row.k,
                    mean_l1=row.mean_l1,
                    std_l1=row.std_l1,
                    rhs_evals=evals,
                    mean_yaw=float(yaw_mean[row.k - 1]),
                    std_yaw=float(yaw_std[row.k - 1]),
                )
            )
    logger.info(
        "Evaluated %s C_f=%d dt=%g on %d sequences (%d candidates)",
        group.model.value,
        group.cf,
        group.dt,
        corpus.size,
        len(_candidates(spec, group.model)),
    )
    return records


def _corpora(spec: SweepSpec, overrides: Mapping[int, Corpus] | None) -> dict[int, Corpus]:
    given = dict(overrides or {})
    return {
        cf: given.get(cf) or sample_corpus(cf, spec.corpus_size, spec.rng_seed, spec.v0_max)
        for cf in spec.horizons
    }


async def run_sweep_async(
    spec: SweepSpec,
    corpora: Mapping[int, Corpus] | None = None,
    concurrency: int | None = None,
) -> list[ErrorRecord]:
    """Evaluate every grid group concurrently and return sorted records."""
    limit = concurrency or get_settings().harness_concurrency
    semaphore = asyncio.Semaphore(limit)
    by_horizon = _corpora(spec, corpora)
    groups = [
        GridGroup(model=model, cf=cf, dt=dt)
        for model in spec.models
        for cf in spec.horizons
        for dt in spec.intervals
    ]

    async def evaluate(group: GridGroup) -> list[ErrorRecord]:
        async with semaphore:
            return await asyncio.to_thread(_evaluate_group, group, by_horizon[group.cf], spec)

    results = await asyncio.gather(*(evaluate(g) for g in groups))
    records = sorted((r for batch in results for r in batch), key=lambda r: r.sort_key)
    logger.info("Sweep complete: %d groups, %d records", len(groups), len(records))
    return records


def run_sweep(spec: SweepSpec, corpora: Mapping[int, Corpus] | None = None) -> list[ErrorRecord]:
    """Synchronous wrapper around :func:`run_sweep_async`."""
    return asyncio.run(run_sweep_async(spec, corpora))


def pareto_substeps(
    spec: SweepSpec, corpora: Mapping[int, Corpus] | None = None
) -> list[ErrorRecord]:
    """Substep study: CCPP records over the n_int grid, rhs evaluations as compute.

    Raises:
        ConfigError: If ``spec.models`` includes a model other than CCPP.
    """
    if any(model is not ModelKind.CCPP for model in spec.models):
        msg = "the substep study is defined for ccpp only"
        raise ConfigError("models", msg)
    records = run_sweep(spec, corpora)
    for summary in summarize(records):
        logger.info(
            "Pareto %s n_int=%d: mean_l1=%.3e rhs_evals=%d",
            summary.scheme.value,
            summary.n_int,
            summary.mean_l1,
            summary.rhs_evals,
        )
    return records


def sequence_errors(
    spec: SweepSpec,
    model: ModelKind,
    scheme: Scheme,
    n_int: int,
    cf: int,
    dt: float,
    corpus: Corpus | None = None,
) -> NDArray[np.float64]:
    """Per-sequence per-waypoint errors (N, C_f) of one grid point, for paired comparisons."""
    data = corpus or sample_corpus(cf, spec.corpus_size, spec.rng_seed, spec.v0_max)
    ref_cfg = _config(spec, model, dt, Scheme.RK4, 1)
    ref_points, ref_headings = oracle_trace(data.actions, data.v0, 0.0, ref_cfg, spec.refine)
    cfg = _config(spec, model, dt, scheme, n_int)
    errors, _ = _sequence_errors(cfg, data, ref_points, ref_headings)
    return errors


def summarize(records: Sequence[ErrorRecord]) -> list[SweepSummary]:
    """Collapse per-waypoint records into one summary per grid point."""
    grouped: dict[tuple[str, str, int, float, int], list[ErrorRecord]] = {}
    for record in records:
        grouped.setdefault(record.sort_key[:5], []).append(record)
    summaries = []
    for rows in grouped.values():
        rows = sorted(rows, key=lambda r: r.k)
        head = rows[0]
        summaries.append(
            SweepSummary(
                model=head.model,
                scheme=head.scheme,
                cf=head.cf,
                dt=head.dt,
                n_int=head.n_int,
                mean_l1=float(np.mean([r.mean_l1 for r in rows])),
                terminal_l1=rows[-1].mean_l1,
                rhs_evals=head.rhs_evals,
            )
        )
    return summaries
