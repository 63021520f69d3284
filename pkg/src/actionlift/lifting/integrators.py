"""Classical fourth-order Runge-Kutta step and its exact forward sensitivity.

Controls are held constant across the four stages, so a field is any callable
mapping a state array of shape (..., n) to its derivative. The step size may
be a scalar or an array over the leading batch axes.
"""

from __future__ import annotations

from collections.abc import Callable
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

Field = Callable[["NDArray[np.float64]"], "NDArray[np.float64]"]
FieldJacobian = Callable[
    ["NDArray[np.float64]"], tuple["NDArray[np.float64]", "NDArray[np.float64]"]
]


def _step_size(h: ArrayLike) -> float | NDArray[np.float64]:
    if np.ndim(h) == 0:
        return float(h)  # type: ignore[arg-type]
    return np.asarray(h, dtype=np.float64)[..., None]


def rk4_step(field: Field, z: NDArray[np.float64], h: ArrayLike) -> NDArray[np.float64]:
    """Advance ``z`` by one RK4 step of size ``h``."""
    step = _step_size(h)
    k1 = field(z)
    k2 = field(z + 0.5 * step * k1)
    k3 = field(z + 0.5 * step * k2)
    k4 = field(z + step * k3)
    return z + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_jacobian(
    field: Field, field_jacobian: FieldJacobian, z: NDArray[np.float64], h: float
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """One RK4 step of a single state together with its sensitivities.

    ``field_jacobian(z)`` returns ``(dF/dz, dF/dp)`` where ``p`` are the
    controls held constant over the step. Sensitivities are propagated through
    every stage, so the result is the exact derivative of :func:`rk4_step`.

    Returns:
        ``(z_next, dz_next/dz, dz_next/dp, dz_next/dh)``.
    """
    n = z.shape[0]
    _, fp0 = field_jacobian(z)
    m = fp0.shape[1]
    width = n + m + 1
    seed_z = np.zeros((n, width))
    seed_z[:, :n] = np.eye(n)
    seed_p = np.zeros((m, width))
    seed_p[:, n : n + m] = np.eye(m)
    e_h = np.zeros(width)
    e_h[-1] = 1.0

    def stage(
        zi: NDArray[np.float64], dzi: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        fz, fp = field_jacobian(zi)
        return field(zi), fz @ dzi + fp @ seed_p

    k1, d1 = stage(z, seed_z)
    k2, d2 = stage(z + 0.5 * h * k1, seed_z + 0.5 * h * d1 + 0.5 * np.outer(k1, e_h))
    k3, d3 = stage(z + 0.5 * h * k2, seed_z + 0.5 * h * d2 + 0.5 * np.outer(k2, e_h))
    k4, d4 = stage(z + h * k3, seed_z + h * d3 + np.outer(k3, e_h))

    incr = k1 + 2.0 * k2 + 2.0 * k3 + k4
    z_next = z + (h / 6.0) * incr
    d_next = seed_z + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4) + np.outer(incr, e_h) / 6.0
    return z_next, d_next[:, :n], d_next[:, n : n + m], d_next[:, -1]
