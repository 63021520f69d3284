"""Exact reverse-mode derivatives of the analytic lifts with respect to raw actions.

The rollout is recorded once; for every interval the paired step Jacobians
give A_k = dz_{k+1}/dz_k and B_k = dz_{k+1}/da_k (activation included).
Waypoint i reads out the position of z_{i+1}, so adjoints are accumulated
backwards from each readout. Saturations follow one convention everywhere:
the inner derivative passes when the pre-clamp value lies inside or on the
bound, and is blocked when it lies strictly outside.

:func:`finite_diff_check` compares the result with centered differences,
evaluating all probes as one batched rollout.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np

from actionlift.analysis.metrics import l1_subgradient, waypoint_l1_loss
from actionlift.config import validate_config
from actionlift.core.errors import ConfigError
from actionlift.core.state import init_ccpp, init_kbm
from actionlift.core.types import (
    ACTION_DIM,
    CcppPose,
    GradCheckReport,
    Jacobian,
    KbmControls,
    KbmState,
    ModelKind,
    Scheme,
    WaypointTrajectory,
)
from actionlift.lifting.activation import activation_jacobian
from actionlift.lifting.ccpp import (
    CcppTrace,
    rollout_ccpp,
    substep_euler_ccpp_jacobian,
    substep_rk4_ccpp_jacobian,
)
from actionlift.lifting.kbm import (
    KbmTrace,
    rollout_kbm,
    step_euler_kbm_jacobian,
    step_rk4_kbm_jacobian,
)

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from actionlift.config import LiftConfig
    from actionlift.core.types import InitialState, LossWeights, RawActionSequence

logger = logging.getLogger(__name__)

# Default centered-difference probe size
DEFAULT_FD_STEP = 1e-5


def _start(s: InitialState, cfg: LiftConfig) -> tuple[float, float]:
    validate_config(cfg)
    if cfg.model is ModelKind.KBM:
        return init_kbm(s).v, 0.0
    if cfg.model is ModelKind.CCPP:
        state = init_ccpp(s, cfg)
        return state.v, state.kappa
    msg = "gradients are available for the analytic models (kbm, ccpp) only"
    raise ConfigError("model", msg)


def _rollout(
    actions: NDArray[np.float64], v0: float, kappa0: float, cfg: LiftConfig
) -> KbmTrace | CcppTrace:
    n_seq = actions.shape[0]
    if cfg.model is ModelKind.KBM:
        return rollout_kbm(actions, np.full(n_seq, v0), cfg)
    return rollout_ccpp(actions, np.full(n_seq, v0), np.full(n_seq, kappa0), cfg)


# ---------------------------------------------------------------------------
# Local Jacobians
# ---------------------------------------------------------------------------


def _kbm_local(
    trace: KbmTrace, actions: NDArray[np.float64], cfg: LiftConfig
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    horizon = actions.shape[0]
    step_jac = step_euler_kbm_jacobian if cfg.scheme is Scheme.EULER else step_rk4_kbm_jacobian
    a_mats = np.zeros((horizon, 4, 4))
    b_mats = np.zeros((horizon, 4, ACTION_DIM))
    for k in range(horizon):
        z = KbmState.from_array(trace.states[0, k])
        u = KbmControls(a_lon=float(trace.a_lon[0, k]), delta=float(trace.delta[0, k]))
        a_mats[k], d_u = step_jac(z, u, cfg.dt, cfg.wheelbase)
        b_mats[k] = d_u @ activation_jacobian(actions[k], cfg.a_max, cfg.delta_max)
    return a_mats, b_mats


def _ccpp_local(
    trace: CcppTrace, actions: NDArray[np.float64], cfg: LiftConfig
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    horizon, n_int = actions.shape[0], cfg.n_int
    substep_jac = (
        substep_euler_ccpp_jacobian if cfg.scheme is Scheme.EULER else substep_rk4_ccpp_jacobian
    )
    a_mats = np.zeros((horizon, 5, 5))
    b_mats = np.zeros((horizon, 5, ACTION_DIM))
    width = 5 + ACTION_DIM
    for k in range(horizon):
        act = activation_jacobian(actions[k], cfg.a_max, cfg.sharpness_max)
        # Columns: x, y, theta, kappa, v, then the three raw channels
        d_speed = np.zeros(width)
        if trace.speed_raw[0, k] >= 0.0:
            d_speed[4] = 1.0
            d_speed[5:] = cfg.dt * act[0]
        d_ds = d_speed * (cfg.dt / n_int)
        d_sharp = np.zeros(width)
        d_sharp[5:] = act[1]

        ds = float(trace.states[0, k + 1, 4] * cfg.dt / n_int)
        sharpness = float(trace.sharpness[0, k])
        d_pose = np.zeros((4, width))
        d_pose[:, :4] = np.eye(4)
        for j in range(n_int):
            pose = CcppPose.from_array(trace.poses[0, k, j])
            sub = substep_jac(pose, sharpness, ds, cfg.kappa_max)
            d_pose = (
                sub[:, :4] @ d_pose + np.outer(sub[:, 4], d_sharp) + np.outer(sub[:, 5], d_ds)
            )

        full = np.vstack([d_pose, d_speed])
        a_mats[k] = full[:, :5]
        b_mats[k] = full[:, 5:]
    return a_mats, b_mats


def local_jacobians(
    a: RawActionSequence, s: InitialState, cfg: LiftConfig
) -> tuple[KbmTrace | CcppTrace, NDArray[np.float64], NDArray[np.float64]]:
    """Record one rollout and its per-interval Jacobians.

    Returns:
        ``(trace, A, B)`` with ``A[k] = dz_{k+1}/dz_k`` and ``B[k] = dz_{k+1}/da_k``.
    """
    v0, kappa0 = _start(s, cfg)
    trace = _rollout(a.values[None], v0, kappa0, cfg)
    if isinstance(trace, KbmTrace):
        a_mats, b_mats = _kbm_local(trace, a.values, cfg)
    else:
        a_mats, b_mats = _ccpp_local(trace, a.values, cfg)
    return trace, a_mats, b_mats


# ---------------------------------------------------------------------------
# Reverse accumulation
# ---------------------------------------------------------------------------


def lift_jacobian(a: RawActionSequence, s: InitialState, cfg: LiftConfig) -> Jacobian:
    """Dense derivative of every waypoint coordinate with respect to every raw action."""
    _, a_mats, b_mats = local_jacobians(a, s, cfg)
    horizon = a.horizon
    n = a_mats.shape[1]
    matrix = np.zeros((2 * horizon, ACTION_DIM * horizon))
    for i in range(horizon):
        adjoint = np.eye(2, n)
        for j in range(i, -1, -1):
            cols = slice(ACTION_DIM * j, ACTION_DIM * (j + 1))
            matrix[2 * i : 2 * i + 2, cols] = adjoint @ b_mats[j]
            adjoint = adjoint @ a_mats[j]
    return Jacobian(matrix=matrix)


def loss_and_grad(
    a: RawActionSequence,
    s: InitialState,
    cfg: LiftConfig,
    gt: WaypointTrajectory,
    w: LossWeights | None = None,
) -> tuple[float, NDArray[np.float64]]:
    """Waypoint L1 loss of the lift and its gradient over the raw actions (C_f x 3)."""
    trace, a_mats, b_mats = local_jacobians(a, s, cfg)
    pred = WaypointTrajectory(points=trace.waypoints[0])
    loss = waypoint_l1_loss(pred, gt, w)
    g_points = l1_subgradient(pred, gt, w)

    grad = np.zeros((a.horizon, ACTION_DIM))
    adjoint = np.zeros(a_mats.shape[1])
    for k in range(a.horizon - 1, -1, -1):
        adjoint[:2] += g_points[k]
        grad[k] = b_mats[k].T @ adjoint
        adjoint = a_mats[k].T @ adjoint
    return loss, grad


def loss_grad(
    a: RawActionSequence,
    s: InitialState,
    cfg: LiftConfig,
    gt: WaypointTrajectory,
    w: LossWeights | None = None,
) -> NDArray[np.float64]:
    """Gradient of the waypoint L1 loss composed with the lift, shape (C_f, 3).

    Raises:
        LossError: If ``w`` sums to zero or lengths disagree.
    """
    _, grad = loss_and_grad(a, s, cfg, gt, w)
    return grad


# ---------------------------------------------------------------------------
# Finite-difference verification
# ---------------------------------------------------------------------------


def _boundary_crossed(base: CcppTrace, probes: CcppTrace) -> bool:
    if bool(base.on_boundary()[0]):
        return True
    base_speed, base_side = base.clamp_pattern()
    probe_speed, probe_side = probes.clamp_pattern()
    return bool(np.any(probe_speed != base_speed[0]) or np.any(probe_side != base_side[0]))


def central_difference_jacobian(
    a: RawActionSequence, s: InitialState, cfg: LiftConfig, fd_step: float = DEFAULT_FD_STEP
) -> tuple[NDArray[np.float64], bool]:
    """Centered-difference Jacobian and whether any probe changed the active saturations."""
    if not fd_step > 0.0:
        msg = f"fd_step must be > 0, got {fd_step}"
        raise ValueError(msg)
    v0, kappa0 = _start(s, cfg)
    horizon = a.horizon
    n_cols = ACTION_DIM * horizon
    probes = np.repeat(a.values[None], 2 * n_cols, axis=0)
    for col in range(n_cols):
        step, channel = divmod(col, ACTION_DIM)
        probes[2 * col, step, channel] += fd_step
        probes[2 * col + 1, step, channel] -= fd_step

    trace = _rollout(probes, v0, kappa0, cfg)
    flat = trace.waypoints.reshape(2 * n_cols, 2 * horizon)
    fd = ((flat[0::2] - flat[1::2]) / (2.0 * fd_step)).T

    crossed = False
    if isinstance(trace, CcppTrace):
        base = rollout_ccpp(a.values[None], np.array([v0]), np.array([kappa0]), cfg)
        crossed = _boundary_crossed(base, trace)
    return fd, crossed


def finite_diff_check(
    a: RawActionSequence, s: InitialState, cfg: LiftConfig, fd_step: float = DEFAULT_FD_STEP
) -> GradCheckReport:
    """Compare :func:`lift_jacobian` against centered differences entrywise.

    Relative error uses a unit floor, ``|J - F| / max(|J|, |F|, 1)``.
    """
    fd, crossed = central_difference_jacobian(a, s, cfg, fd_step)
    analytic = lift_jacobian(a, s, cfg).matrix
    abs_err = np.abs(analytic - fd)
    rel_err = abs_err / np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1.0)
    row, col = np.unravel_index(int(np.argmax(rel_err)), rel_err.shape)
    report = GradCheckReport(
        max_abs_err=float(abs_err.max()),
        max_rel_err=float(rel_err.max()),
        worst_entry=(int(row), int(col)),
        fd_step=fd_step,
        boundary_flag=crossed,
    )
    logger.debug(
        "Gradient check %s/%s: max_rel_err=%.3e boundary=%s",
        cfg.model.value,
        cfg.scheme.value,
        report.max_rel_err,
        report.boundary_flag,
    )
    return report
