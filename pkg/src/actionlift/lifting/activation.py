"""Control activation: raw per-step actions to bounded physical controls.

Both models share the longitudinal channel, a_lon = a_max * (sigmoid(tau) -
sigmoid(beta)). The lateral channel is a scaled tanh: steering angle for KBM,
path sharpness for CCPP. The array functions here work on any leading batch
shape so that batched rollouts and single lifts use the same arithmetic.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy.special import expit

from actionlift.core.errors import ActivationError
from actionlift.core.types import ACTION_DIM, CcppControls, KbmControls

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from actionlift.config import LiftConfig


def activate_array(
    raw: ArrayLike, a_max: float, lateral_max: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Activate raw actions of shape (..., 3).

    Returns:
        ``(a_lon, lateral)``, each of shape (...).

    Raises:
        ActivationError: If any raw value is non-finite or the last axis is not 3.
    """
    values = np.asarray(raw, dtype=np.float64)
    if values.shape[-1:] != (ACTION_DIM,):
        msg = f"raw actions must end in an axis of size {ACTION_DIM}, got {values.shape}"
        raise ActivationError(msg)
    if not np.all(np.isfinite(values)):
        msg = "raw actions must be finite"
        raise ActivationError(msg)
    throttle, lateral, brake = values[..., 0], values[..., 1], values[..., 2]
    a_lon = a_max * (expit(throttle) - expit(brake))
    return a_lon, lateral_max * np.tanh(lateral)


def activation_jacobian(raw: ArrayLike, a_max: float, lateral_max: float) -> NDArray[np.float64]:
    """2 x 3 derivative of ``(a_lon, lateral)`` with respect to one raw action."""
    throttle, lateral, brake = (float(c) for c in np.asarray(raw, dtype=np.float64))
    s_t = expit(throttle)
    s_b = expit(brake)
    t_l = np.tanh(lateral)
    jac = np.zeros((2, ACTION_DIM))
    jac[0, 0] = a_max * s_t * (1.0 - s_t)
    jac[0, 2] = -a_max * s_b * (1.0 - s_b)
    jac[1, 1] = lateral_max * (1.0 - t_l * t_l)
    return jac


def activate_kbm(raw: ArrayLike, cfg: LiftConfig) -> KbmControls:
    """Map ``(tau, sigma, beta)`` to KBM acceleration and steering angle."""
    a_lon, delta = activate_array(raw, cfg.a_max, cfg.delta_max)
    return KbmControls(a_lon=float(a_lon), delta=float(delta))


def activate_ccpp(raw: ArrayLike, cfg: LiftConfig) -> CcppControls:
    """Map ``(tau, xi, beta)`` to CCPP acceleration and sharpness."""
    a_lon, sharpness = activate_array(raw, cfg.a_max, cfg.sharpness_max)
    return CcppControls(a_lon=float(a_lon), sharpness=float(sharpness))
