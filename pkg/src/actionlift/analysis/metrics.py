"""Waypoint-space loss and evaluation statistics.

The training loss is the alpha-weighted mean over waypoints of the L1 position
error; headings are never supervised. Profiles aggregate per-waypoint errors
over a corpus, and :func:`pearson` relates an offline metric series to a
closed-loop outcome series.
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

import numpy as np
from scipy import stats

from actionlift.core.errors import LossError, UndefinedCorrelationError
from actionlift.core.types import ProfileRow
from actionlift.lifting.activation import activate_array
from actionlift.lifting.operator import make_lift

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from numpy.typing import ArrayLike, NDArray

    from actionlift.config import LiftConfig
    from actionlift.core.types import (
        InitialState,
        LossWeights,
        RawActionSequence,
        WaypointTrajectory,
    )

logger = logging.getLogger(__name__)


def _check_lengths(pred: WaypointTrajectory, gt: WaypointTrajectory) -> None:
    if len(pred) != len(gt):
        msg = f"length mismatch: prediction has {len(pred)} waypoints, target {len(gt)}"
        raise LossError(msg)


def _weights(w: LossWeights | None, horizon: int) -> NDArray[np.float64]:
    if w is None:
        return np.ones(horizon)
    if len(w) != horizon:
        msg = f"length mismatch: {len(w)} loss weights for {horizon} waypoints"
        raise LossError(msg)
    if w.total <= 0.0:
        msg = "loss weights must have a positive sum"
        raise LossError(msg)
    return w.alpha


def per_waypoint_error(pred: WaypointTrajectory, gt: WaypointTrajectory) -> NDArray[np.float64]:
    """Unweighted |dx| + |dy| at every waypoint."""
    _check_lengths(pred, gt)
    return np.sum(np.abs(pred.points - gt.points), axis=1)


def waypoint_l1_loss(
    pred: WaypointTrajectory, gt: WaypointTrajectory, w: LossWeights | None = None
) -> float:
    """Weighted L1 waypoint loss; uniform weights when ``w`` is None.

    Raises:
        LossError: On length mismatch or weights summing to zero.
    """
    errors = per_waypoint_error(pred, gt)
    alpha = _weights(w, len(pred))
    return float(np.dot(alpha, errors) / np.sum(alpha))


def l1_subgradient(
    pred: WaypointTrajectory, gt: WaypointTrajectory, w: LossWeights | None = None
) -> NDArray[np.float64]:
    """Derivative of :func:`waypoint_l1_loss` with respect to the predicted points.

    Uses sign(0) = 0, so exact matches contribute nothing.
    """
    _check_lengths(pred, gt)
    alpha = _weights(w, len(pred))
    return (alpha / np.sum(alpha))[:, None] * np.sign(pred.points - gt.points)


def yaw_error(pred: WaypointTrajectory, ref: WaypointTrajectory) -> NDArray[np.float64]:
    """Absolute heading difference per waypoint (both trajectories need headings)."""
    _check_lengths(pred, ref)
    if pred.headings is None or ref.headings is None:
        msg = "yaw error needs recorded headings on both trajectories"
        raise LossError(msg)
    return np.abs(pred.headings - ref.headings)


def error_profile(errors: ArrayLike) -> list[ProfileRow]:
    """Mean and population standard deviation per waypoint over a corpus.

    Args:
        errors: Per-waypoint errors of shape (N, C_f).
    """
    table = np.asarray(errors, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 1:
        msg = f"errors must have shape (N >= 1, C_f), got {table.shape}"
        raise LossError(msg)
    mean = table.mean(axis=0)
    std = table.std(axis=0)
    return [
        ProfileRow(k=k + 1, mean_l1=float(mean[k]), std_l1=float(std[k]))
        for k in range(table.shape[1])
    ]


# ---------------------------------------------------------------------------
# Correlation
# ---------------------------------------------------------------------------


def pearson(xs: Sequence[float] | ArrayLike, ys: Sequence[float] | ArrayLike) -> float:
    """Sample Pearson correlation of two equally long series.

    Raises:
        ValueError: If lengths differ or fewer than two points are given.
        UndefinedCorrelationError: If either series is constant or non-finite.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        msg = f"series must be 1-D and equally long, got {x.shape} and {y.shape}"
        raise ValueError(msg)
    if x.size < 2:
        msg = "pearson needs at least two points"
        raise ValueError(msg)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        msg = "undefined correlation: series contain non-finite values"
        raise UndefinedCorrelationError(msg)
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        msg = "undefined correlation: constant series"
        raise UndefinedCorrelationError(msg)
    rho = float(stats.pearsonr(x, y).statistic)
    return min(1.0, max(-1.0, rho))


def steering_error(
    pred: RawActionSequence, target: RawActionSequence, cfg: LiftConfig
) -> float:
    """Mean absolute difference of the activated lateral control only."""
    _, lat_pred = activate_array(pred.values, cfg.a_max, cfg.lateral_bound)
    _, lat_target = activate_array(target.values, cfg.a_max, cfg.lateral_bound)
    return float(np.mean(np.abs(lat_pred - lat_target)))


def action_l1_error(pred: RawActionSequence, target: RawActionSequence) -> float:
    """Mean absolute raw-action difference over every step and channel."""
    if pred.horizon != target.horizon:
        msg = f"length mismatch: {pred.horizon} vs {target.horizon} actions"
        raise LossError(msg)
    return float(np.mean(np.abs(pred.values - target.values)))


def lifted_l1_error(
    pred: RawActionSequence,
    target: RawActionSequence,
    s: InitialState,
    cfg: LiftConfig,
) -> float:
    """Waypoint L1 loss between the lifts of two action sequences."""
    lift = make_lift(cfg)
    return waypoint_l1_loss(lift(pred, s), lift(target, s))


def correlation_table(
    outcomes: Sequence[float], series: Mapping[str, Sequence[float]]
) -> dict[str, float]:
    """Pearson correlation of every named metric series against ``outcomes``.

    Series whose correlation is undefined map to NaN and are logged.
    """
    table: dict[str, float] = {}
    for name, values in series.items():
        try:
            table[name] = pearson(values, outcomes)
        except UndefinedCorrelationError:
            logger.warning("Correlation of '%s' is undefined (constant series)", name)
            table[name] = math.nan
    return table


def metric_series(
    predictions: Sequence[RawActionSequence],
    targets: Sequence[RawActionSequence],
    initial_states: Sequence[InitialState],
    cfg: LiftConfig,
) -> dict[str, list[float]]:
    """Offline metrics for paired predicted/expert action sequences.

    Returns the steering-only error, the raw action L1 error and the lifted
    waypoint L1 error of every pair, keyed by metric name.
    """
    if not len(predictions) == len(targets) == len(initial_states):
        msg = "predictions, targets and initial states must be equally long"
        raise LossError(msg)
    out: dict[str, list[float]] = {"steering": [], "action_l1": [], "lifted_l1": []}
    for pred, target, s in zip(predictions, targets, initial_states, strict=True):
        out["steering"].append(steering_error(pred, target, cfg))
        out["action_l1"].append(action_l1_error(pred, target))
        out["lifted_l1"].append(lifted_l1_error(pred, target, s, cfg))
    return out
