"""Continuous-curvature (clothoid) rollout parameterised by arc length.

Per control interval the speed is updated once and clamped at zero, the
travelled arc length v' * dt is split into n_int uniform substeps, and the pose
(x, y, theta, kappa) is advanced along the field (cos theta, sin theta, kappa,
sharpness). Curvature is clamped to [-kappa_max, kappa_max]: inside the Euler
substep before the new curvature is used, after the combined update for RK4.

Traces keep the pre-clamp speeds and curvatures so that derivatives and the
finite-difference verifier can tell which saturations were active.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from actionlift.config import validate_config
from actionlift.core.errors import ConfigError, InitialStateError, RolloutError
from actionlift.core.state import init_ccpp
from actionlift.core.types import CcppPose, ModelKind, Scheme, WaypointTrajectory
from actionlift.lifting.activation import activate_array
from actionlift.lifting.integrators import rk4_step, rk4_step_jacobian

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from actionlift.config import LiftConfig
    from actionlift.core.types import InitialState, RawActionSequence

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Interval bookkeeping
# ---------------------------------------------------------------------------


def ccpp_speed_update(v: float, a_lon: float, dt: float) -> float:
    """Speed after one interval, clamped to be nonnegative."""
    return max(v + a_lon * dt, 0.0)


def arc_increment(v_next: float, dt: float, n_int: int) -> tuple[float, float]:
    """Arc length of the interval and of each of its ``n_int`` substeps."""
    total = v_next * dt
    return total, total / n_int


# ---------------------------------------------------------------------------
# Array kernels
# ---------------------------------------------------------------------------


def ccpp_field(p: NDArray[np.float64], sharpness: ArrayLike) -> NDArray[np.float64]:
    """Arc-length dynamics (cos theta, sin theta, kappa, sharpness)."""
    theta, kappa = p[..., 2], p[..., 3]
    return np.stack(
        [
            np.cos(theta),
            np.sin(theta),
            kappa,
            np.broadcast_to(sharpness, kappa.shape).astype(np.float64),
        ],
        axis=-1,
    )


def ccpp_field_jacobian(
    p: NDArray[np.float64], sharpness: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Derivatives of :func:`ccpp_field` for one pose: (4 x 4, 4 x 1)."""
    theta = float(p[2])
    fz = np.zeros((4, 4))
    fz[0, 2] = -math.sin(theta)
    fz[1, 2] = math.cos(theta)
    fz[2, 3] = 1.0
    fp = np.zeros((4, 1))
    fp[3, 0] = 1.0
    return fz, fp


def euler_substep(
    p: NDArray[np.float64], sharpness: ArrayLike, ds: ArrayLike, kappa_max: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Euler substep on poses of shape (..., 4).

    Returns:
        ``(next_pose, pre_clamp_curvature)``.
    """
    kappa_raw = p[..., 3] + np.multiply(sharpness, ds)
    kappa = np.clip(kappa_raw, -kappa_max, kappa_max)
    theta = p[..., 2] + kappa * ds
    x = p[..., 0] + np.cos(theta) * ds
    y = p[..., 1] + np.sin(theta) * ds
    return np.stack([x, y, theta, kappa], axis=-1), kappa_raw


def rk4_substep(
    p: NDArray[np.float64], sharpness: ArrayLike, ds: ArrayLike, kappa_max: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """RK4 substep on poses of shape (..., 4), curvature clamped afterwards."""
    nxt = rk4_step(lambda q: ccpp_field(q, sharpness), p, ds)
    kappa_raw = nxt[..., 3].copy()
    nxt[..., 3] = np.clip(kappa_raw, -kappa_max, kappa_max)
    return nxt, kappa_raw


# ---------------------------------------------------------------------------
# Single-pose API
# ---------------------------------------------------------------------------


def substep_euler_ccpp(p: CcppPose, sharpness: float, ds: float, kappa_max: float) -> CcppPose:
    """One Euler substep of arc length ``ds``."""
    nxt, _ = euler_substep(p.as_array(), sharpness, ds, kappa_max)
    return CcppPose.from_array(nxt)


def substep_rk4_ccpp(p: CcppPose, sharpness: float, ds: float, kappa_max: float) -> CcppPose:
    """One RK4 substep of arc length ``ds``."""
    nxt, _ = rk4_substep(p.as_array(), sharpness, ds, kappa_max)
    return CcppPose.from_array(nxt)


def _clamp_gate(kappa_raw: float, kappa_max: float) -> float:
    # Pass-through inside and on the bound, blocked strictly outside
    return 1.0 if abs(kappa_raw) <= kappa_max else 0.0


def substep_euler_ccpp_jacobian(
    p: CcppPose, sharpness: float, ds: float, kappa_max: float
) -> NDArray[np.float64]:
    """4 x 6 derivative of :func:`substep_euler_ccpp`.

    Columns are (x, y, theta, kappa, sharpness, ds).
    """
    kappa_raw = p.kappa + sharpness * ds
    kappa = min(max(kappa_raw, -kappa_max), kappa_max)
    theta = p.theta + kappa * ds
    c, s = math.cos(theta), math.sin(theta)

    d_kappa = _clamp_gate(kappa_raw, kappa_max) * np.array([0.0, 0.0, 0.0, 1.0, ds, sharpness])
    d_theta = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]) + ds * d_kappa
    d_theta[5] += kappa
    d_x = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]) - s * ds * d_theta
    d_x[5] += c
    d_y = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]) + c * ds * d_theta
    d_y[5] += s
    return np.vstack([d_x, d_y, d_theta, d_kappa])


def substep_rk4_ccpp_jacobian(
    p: CcppPose, sharpness: float, ds: float, kappa_max: float
) -> NDArray[np.float64]:
    """4 x 6 derivative of :func:`substep_rk4_ccpp`, same column layout."""
    nxt, d_pose, d_sharp, d_ds = rk4_step_jacobian(
        lambda q: ccpp_field(q, sharpness),
        lambda q: ccpp_field_jacobian(q, sharpness),
        p.as_array(),
        ds,
    )
    jac = np.hstack([d_pose, d_sharp, d_ds[:, None]])
    jac[3] *= _clamp_gate(float(nxt[3]), kappa_max)
    return jac


# ---------------------------------------------------------------------------
# Rollout
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CcppTrace:
    """Recorded batch rollout.

    Shapes: ``states`` (N, C_f + 1, 5) as (x, y, theta, kappa, v);
    ``a_lon``, ``sharpness``, ``speed_raw`` (N, C_f); ``poses``
    (N, C_f, n_int + 1, 4) substep chain per interval; ``kappa_raw``
    (N, C_f, n_int) curvature before each clamp.
    """

    states: NDArray[np.float64]
    a_lon: NDArray[np.float64]
    sharpness: NDArray[np.float64]
    speed_raw: NDArray[np.float64]
    poses: NDArray[np.float64]
    kappa_raw: NDArray[np.float64]
    kappa_max: float

    @property
    def waypoints(self) -> NDArray[np.float64]:
        return self.states[:, 1:, :2]

    @property
    def headings(self) -> NDArray[np.float64]:
        return self.states[:, 1:, 2]

    def clamp_pattern(self) -> tuple[NDArray[np.bool_], NDArray[np.int8]]:
        """Active saturations: speed clamp per interval, curvature clamp side per substep."""
        speed_clamped = self.speed_raw < 0.0
        side = np.zeros(self.kappa_raw.shape, dtype=np.int8)
        side[self.kappa_raw > self.kappa_max] = 1
        side[self.kappa_raw < -self.kappa_max] = -1
        return speed_clamped, side

    def on_boundary(self) -> NDArray[np.bool_]:
        """Per sequence, whether any pre-clamp value sits exactly on a bound."""
        speed = np.any(self.speed_raw == 0.0, axis=1)
        kappa = np.any(np.abs(self.kappa_raw) == self.kappa_max, axis=(1, 2))
        return np.asarray(speed | kappa)


def _require_ccpp(cfg: LiftConfig) -> None:
    validate_config(cfg)
    if cfg.model is not ModelKind.CCPP:
        msg = f"model mismatch: expected ccpp, got {cfg.model.value}"
        raise ConfigError("model", msg)


def rollout_ccpp(
    actions: ArrayLike, v0: ArrayLike, kappa0: ArrayLike, cfg: LiftConfig
) -> CcppTrace:
    """Roll out a batch of raw action sequences.

    Args:
        actions: Raw actions of shape (N, C_f, 3).
        v0: Initial speeds of shape (N,), nonnegative.
        kappa0: Initial curvatures of shape (N,), within the curvature bound.
        cfg: CCPP configuration.

    Raises:
        InitialStateError: If an initial speed or curvature is inadmissible.
        RolloutError: If a pose becomes non-finite, with interval and substep.
    """
    _require_ccpp(cfg)
    raw = np.asarray(actions, dtype=np.float64)
    n_seq, horizon = raw.shape[0], raw.shape[1]
    speeds = np.broadcast_to(np.asarray(v0, dtype=np.float64), (n_seq,))
    curvatures = np.broadcast_to(np.asarray(kappa0, dtype=np.float64), (n_seq,))
    if np.any(~np.isfinite(speeds)) or np.any(speeds < 0.0):
        msg = "initial speeds must be finite and >= 0"
        raise InitialStateError(msg)
    if np.any(~np.isfinite(curvatures)) or np.any(np.abs(curvatures) > cfg.kappa_max):
        msg = f"initial curvature exceeds curvature bound {cfg.kappa_max}"
        raise InitialStateError(msg)

    a_lon, sharpness = activate_array(raw, cfg.a_max, cfg.sharpness_max)
    n_int = cfg.n_int
    substep = euler_substep if cfg.scheme is Scheme.EULER else rk4_substep

    states = np.zeros((n_seq, horizon + 1, 5))
    states[:, 0, 3] = curvatures
    states[:, 0, 4] = speeds
    speed_raw = np.zeros((n_seq, horizon))
    poses = np.zeros((n_seq, horizon, n_int + 1, 4))
    kappa_raw = np.zeros((n_seq, horizon, n_int))

    for k in range(horizon):
        speed_raw[:, k] = states[:, k, 4] + a_lon[:, k] * cfg.dt
        v_next = np.maximum(speed_raw[:, k], 0.0)
        ds = (v_next * cfg.dt) / n_int
        pose = states[:, k, :4]
        poses[:, k, 0] = pose
        for j in range(n_int):
            pose, kappa_raw[:, k, j] = substep(pose, sharpness[:, k], ds, cfg.kappa_max)
            if not np.all(np.isfinite(pose)):
                msg = "non-finite CCPP pose"
                raise RolloutError(msg, step=k, substep=j)
            poses[:, k, j + 1] = pose
        states[:, k + 1, :4] = pose
        states[:, k + 1, 4] = v_next

    logger.debug(
        "CCPP rollout: %d sequences x %d steps x %d substeps (%s)",
        n_seq,
        horizon,
        n_int,
        cfg.scheme.value,
    )
    return CcppTrace(
        states=states,
        a_lon=a_lon,
        sharpness=sharpness,
        speed_raw=speed_raw,
        poses=poses,
        kappa_raw=kappa_raw,
        kappa_max=cfg.kappa_max,
    )


def lift_ccpp(a: RawActionSequence, s: InitialState, cfg: LiftConfig) -> WaypointTrajectory:
    """Lift one action sequence to CCPP waypoints, recording terminal-substep headings."""
    _require_ccpp(cfg)
    start = init_ccpp(s, cfg)
    trace = rollout_ccpp(a.values[None], np.array([start.v]), np.array([start.kappa]), cfg)
    return WaypointTrajectory(points=trace.waypoints[0], headings=trace.headings[0])
