"""Synthetic supervision for the training demo.

A hidden expert reads (speed, target curvature, target speed change) and
picks smooth bounded controls: a constant acceleration and either a constant
steering angle (KBM) or a sharpness ramp that builds the target curvature over
the first part of the horizon (CCPP). The controls are expressed as raw
actions and rolled out by the oracle of the configured model, so the expert
trajectory is exactly reachable by the lift up to discretization error.
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

import numpy as np

from actionlift.analysis.harness import oracle_trace
from actionlift.config import ExpertConfig, validate_config
from actionlift.core.errors import ConfigError
from actionlift.core.types import (
    ACTION_DIM,
    Command,
    ModelKind,
    SyntheticSample,
    WaypointTrajectory,
)

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from actionlift.config import LiftConfig

logger = logging.getLogger(__name__)

# Observation layout: speed, target curvature, target speed change, command one-hot
OBS_DIM = 6

# Targets below this fraction of the curvature range count as "straight"
_STRAIGHT_BAND = 0.1

_COMMANDS = (Command.LEFT, Command.STRAIGHT, Command.RIGHT)


def command_for(target_curvature: float, expert: ExpertConfig) -> Command:
    """Navigation command implied by the sign of the requested curvature."""
    band = _STRAIGHT_BAND * expert.max_target_curvature
    if target_curvature > band:
        return Command.LEFT
    if target_curvature < -band:
        return Command.RIGHT
    return Command.STRAIGHT


def encode_observation(
    v0: float, target_curvature: float, speed_delta: float, expert: ExpertConfig
) -> NDArray[np.float64]:
    """Scaled feature vector of length :data:`OBS_DIM`."""
    obs = np.zeros(OBS_DIM)
    obs[0] = v0 / max(expert.v0_max, 1e-9)
    obs[1] = target_curvature / max(expert.max_target_curvature, 1e-9)
    obs[2] = speed_delta / max(expert.max_speed_delta, 1e-9)
    obs[3 + _COMMANDS.index(command_for(target_curvature, expert))] = 1.0
    return obs


def _raw_throttle(a_target: float, a_max: float) -> float:
    # a_lon = a_max * tanh(x / 2) when tau = x and beta = -x
    return 2.0 * math.atanh(a_target / a_max)


def expert_actions(
    v0: float,
    target_curvature: float,
    speed_delta: float,
    cfg: LiftConfig,
    horizon: int,
    expert: ExpertConfig | None = None,
) -> NDArray[np.float64]:
    """Raw actions (C_f, 3) of the hidden expert.

    Zero targets give zero raw actions, i.e. zero acceleration and a straight
    path.
    """
    expert = expert or ExpertConfig()
    fraction = expert.control_fraction
    limit = fraction * cfg.a_max
    a_target = min(max(speed_delta / (horizon * cfg.dt), -limit), limit)
    throttle = _raw_throttle(a_target, cfg.a_max)

    actions = np.zeros((horizon, ACTION_DIM))
    actions[:, 0] = throttle
    actions[:, 2] = -throttle

    if cfg.model is ModelKind.KBM:
        delta = math.atan(target_curvature * cfg.wheelbase)
        bound = fraction * cfg.delta_max
        delta = min(max(delta, -bound), bound)
        actions[:, 1] = math.atanh(delta / cfg.delta_max)
        return actions

    if cfg.model is not ModelKind.CCPP:
        msg = f"the expert drives analytic models only, got {cfg.model.value}"
        raise ConfigError("model", msg)
    ramp = max(1, math.ceil(expert.ramp_fraction * horizon))
    speeds = np.maximum(v0 + a_target * cfg.dt * np.arange(1, ramp + 1), 0.0)
    ramp_length = float(np.sum(speeds) * cfg.dt)
    sharpness = target_curvature / ramp_length if ramp_length > 0.0 else 0.0
    bound = fraction * cfg.sharpness_max
    sharpness = min(max(sharpness, -bound), bound)
    actions[:ramp, 1] = math.atanh(sharpness / cfg.sharpness_max)
    return actions


def generate_dataset(
    n: int,
    cfg: LiftConfig,
    expert: ExpertConfig | None = None,
    seed: int = 0,
    horizon: int = 8,
    refine: int = 128,
) -> list[SyntheticSample]:
    """Draw ``n`` expert demonstrations with oracle ground truth.

    Deterministic given ``seed``.

    Raises:
        ValueError: If ``n`` or ``horizon`` is below one.
    """
    if n < 1 or horizon < 1:
        msg = f"dataset needs n >= 1 and horizon >= 1, got n={n}, horizon={horizon}"
        raise ValueError(msg)
    validate_config(cfg)
    expert = expert or ExpertConfig()
    rng = np.random.default_rng(seed)
    v0 = rng.uniform(expert.v0_min, expert.v0_max, n)
    curvature = rng.uniform(-expert.max_target_curvature, expert.max_target_curvature, n)
    speed_delta = rng.uniform(-expert.max_speed_delta, expert.max_speed_delta, n)

    targets = [(float(v0[i]), float(curvature[i]), float(speed_delta[i])) for i in range(n)]
    actions = np.stack([expert_actions(*t, cfg, horizon, expert) for t in targets])
    points, headings = oracle_trace(actions, v0, np.zeros(n), cfg, refine)

    samples = [
        SyntheticSample(
            obs=encode_observation(*targets[i], expert),
            gt=WaypointTrajectory(points=points[i], headings=headings[i]),
            v0=targets[i][0],
            command=command_for(targets[i][1], expert),
            expert_actions=actions[i],
        )
        for i in range(n)
    ]
    logger.info(
        "Generated %d %s demonstrations (horizon %d, seed %d)",
        n,
        cfg.model.value,
        horizon,
        seed,
    )
    return samples
