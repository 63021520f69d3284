"""Kinematic bicycle model rollout under semi-implicit Euler and RK4.

State z = (x, y, theta, v) in the ego frame, controls u = (a_lon, delta) held
constant over each control interval. Speed is never clamped, so braking from
rest drives v negative and the vehicle reverses along its heading.

Every step function has a paired Jacobian function returning
``(dz'/dz, dz'/du)``; the gradients module chains them in reverse.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from actionlift.config import validate_config
from actionlift.core.errors import ActivationError, ConfigError, RolloutError
from actionlift.core.state import init_kbm
from actionlift.core.types import (
    KbmControls,
    KbmDerivative,
    KbmState,
    ModelKind,
    Scheme,
    WaypointTrajectory,
)
from actionlift.lifting.activation import activate_array
from actionlift.lifting.integrators import rk4_step, rk4_step_jacobian

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from actionlift.config import LiftConfig
    from actionlift.core.types import InitialState, RawActionSequence

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Array kernels (any leading batch shape)
# ---------------------------------------------------------------------------


def kbm_field(
    z: NDArray[np.float64], a_lon: ArrayLike, delta: ArrayLike, wheelbase: float
) -> NDArray[np.float64]:
    """Continuous dynamics (v cos theta, v sin theta, v tan(delta) / L, a_lon)."""
    theta, v = z[..., 2], z[..., 3]
    return np.stack(
        [
            v * np.cos(theta),
            v * np.sin(theta),
            (v / wheelbase) * np.tan(delta),
            np.broadcast_to(a_lon, v.shape).astype(np.float64),
        ],
        axis=-1,
    )


def kbm_field_jacobian(
    z: NDArray[np.float64], a_lon: float, delta: float, wheelbase: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Derivatives of :func:`kbm_field` for one state: (4 x 4, 4 x 2)."""
    theta, v = float(z[2]), float(z[3])
    c, s = math.cos(theta), math.sin(theta)
    fz = np.zeros((4, 4))
    fz[0, 2] = -v * s
    fz[0, 3] = c
    fz[1, 2] = v * c
    fz[1, 3] = s
    fz[2, 3] = math.tan(delta) / wheelbase
    fu = np.zeros((4, 2))
    fu[2, 1] = (v / wheelbase) / math.cos(delta) ** 2
    fu[3, 0] = 1.0
    return fz, fu


def euler_kbm(
    z: NDArray[np.float64], a_lon: ArrayLike, delta: ArrayLike, dt: float, wheelbase: float
) -> NDArray[np.float64]:
    """Semi-implicit Euler: speed, then heading, then position."""
    v = z[..., 3] + np.multiply(a_lon, dt)
    theta = z[..., 2] + (v / wheelbase) * np.tan(delta) * dt
    x = z[..., 0] + v * np.cos(theta) * dt
    y = z[..., 1] + v * np.sin(theta) * dt
    return np.stack([x, y, theta, v], axis=-1)


def rk4_kbm(
    z: NDArray[np.float64], a_lon: ArrayLike, delta: ArrayLike, dt: ArrayLike, wheelbase: float
) -> NDArray[np.float64]:
    """Classical RK4 with controls frozen over the interval."""
    return rk4_step(lambda s: kbm_field(s, a_lon, delta, wheelbase), z, dt)


# ---------------------------------------------------------------------------
# Single-state API
# ---------------------------------------------------------------------------


def _check_steering(delta: float) -> None:
    if not abs(delta) < math.pi / 2:
        msg = f"steering angle {delta} rad reaches the tangent singularity at pi/2"
        raise ActivationError(msg)


def kbm_rhs(z: KbmState, u: KbmControls, wheelbase: float) -> KbmDerivative:
    """Time derivative of ``z`` under controls ``u``.

    Raises:
        ValueError: If ``|delta| >= pi/2``.
    """
    _check_steering(u.delta)
    dx, dy, dtheta, dv = (
        float(c) for c in kbm_field(z.as_array(), u.a_lon, u.delta, wheelbase)
    )
    return KbmDerivative(dx=dx, dy=dy, dtheta=dtheta, dv=dv)


def step_euler_kbm(z: KbmState, u: KbmControls, dt: float, wheelbase: float) -> KbmState:
    """One semi-implicit Euler step of length ``dt``."""
    _check_steering(u.delta)
    return KbmState.from_array(euler_kbm(z.as_array(), u.a_lon, u.delta, dt, wheelbase))


def step_rk4_kbm(z: KbmState, u: KbmControls, dt: float, wheelbase: float) -> KbmState:
    """One RK4 step of length ``dt``."""
    _check_steering(u.delta)
    return KbmState.from_array(rk4_kbm(z.as_array(), u.a_lon, u.delta, dt, wheelbase))


def step_euler_kbm_jacobian(
    z: KbmState, u: KbmControls, dt: float, wheelbase: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Derivatives of :func:`step_euler_kbm` with respect to state and controls."""
    # Columns: x, y, theta, v, a_lon, delta
    tan_d = math.tan(u.delta)
    v_next = z.v + u.a_lon * dt
    theta_next = z.theta + (v_next / wheelbase) * tan_d * dt
    c, s = math.cos(theta_next), math.sin(theta_next)

    d_v = np.array([0.0, 0.0, 0.0, 1.0, dt, 0.0])
    d_theta = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]) + (tan_d / wheelbase) * dt * d_v
    d_theta[5] += (v_next / wheelbase) * dt / math.cos(u.delta) ** 2
    d_x = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]) + dt * (c * d_v - v_next * s * d_theta)
    d_y = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]) + dt * (s * d_v + v_next * c * d_theta)

    jac = np.vstack([d_x, d_y, d_theta, d_v])
    return jac[:, :4], jac[:, 4:]


def step_rk4_kbm_jacobian(
    z: KbmState, u: KbmControls, dt: float, wheelbase: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Derivatives of :func:`step_rk4_kbm` with respect to state and controls."""
    _, dz, du, _ = rk4_step_jacobian(
        lambda s: kbm_field(s, u.a_lon, u.delta, wheelbase),
        lambda s: kbm_field_jacobian(s, u.a_lon, u.delta, wheelbase),
        z.as_array(),
        dt,
    )
    return dz, du


# ---------------------------------------------------------------------------
# Rollout
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KbmTrace:
    """Recorded batch rollout.

    ``states`` has shape (N, C_f + 1, 4) with the ego-frame initial state at
    index 0; ``a_lon`` and ``delta`` have shape (N, C_f).
    """

    states: NDArray[np.float64]
    a_lon: NDArray[np.float64]
    delta: NDArray[np.float64]

    @property
    def waypoints(self) -> NDArray[np.float64]:
        return self.states[:, 1:, :2]

    @property
    def headings(self) -> NDArray[np.float64]:
        return self.states[:, 1:, 2]


def _require_kbm(cfg: LiftConfig) -> None:
    validate_config(cfg)
    if cfg.model is not ModelKind.KBM:
        msg = f"model mismatch: expected kbm, got {cfg.model.value}"
        raise ConfigError("model", msg)


def rollout_kbm(actions: ArrayLike, v0: ArrayLike, cfg: LiftConfig) -> KbmTrace:
    """Roll out a batch of raw action sequences.

    Args:
        actions: Raw actions of shape (N, C_f, 3).
        v0: Initial speeds of shape (N,).
        cfg: KBM configuration.

    Raises:
        RolloutError: If a state becomes non-finite, with the offending step.
    """
    _require_kbm(cfg)
    raw = np.asarray(actions, dtype=np.float64)
    speeds = np.asarray(v0, dtype=np.float64)
    n_seq, horizon = raw.shape[0], raw.shape[1]
    a_lon, delta = activate_array(raw, cfg.a_max, cfg.delta_max)

    states = np.zeros((n_seq, horizon + 1, 4))
    states[:, 0, 3] = speeds
    step = euler_kbm if cfg.scheme is Scheme.EULER else rk4_kbm
    for k in range(horizon):
        z_next = step(states[:, k], a_lon[:, k], delta[:, k], cfg.dt, cfg.wheelbase)
        if not np.all(np.isfinite(z_next)):
            msg = "non-finite KBM state"
            raise RolloutError(msg, step=k)
        states[:, k + 1] = z_next
    logger.debug("KBM rollout: %d sequences x %d steps (%s)", n_seq, horizon, cfg.scheme.value)
    return KbmTrace(states=states, a_lon=a_lon, delta=delta)


def lift_kbm(a: RawActionSequence, s: InitialState, cfg: LiftConfig) -> WaypointTrajectory:
    """Lift one action sequence to KBM waypoints, recording headings."""
    _require_kbm(cfg)
    start = init_kbm(s)
    trace = rollout_kbm(a.values[None], np.array([start.v]), cfg)
    return WaypointTrajectory(points=trace.waypoints[0], headings=trace.headings[0])
