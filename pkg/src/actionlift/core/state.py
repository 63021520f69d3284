"""Initial-state construction in the ego frame.

Every rollout starts at the origin with zero heading; only speed (and, for
CCPP, curvature) is carried over from the vehicle at decision time.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

from actionlift.core.errors import InitialStateError
from actionlift.core.types import CcppState, InitialState, KbmState

if TYPE_CHECKING:
    from actionlift.config import LiftConfig


def _check_speed(v0: float) -> None:
    if not math.isfinite(v0):
        msg = f"initial speed must be finite, got {v0}"
        raise InitialStateError(msg)
    if v0 < 0.0:
        msg = f"initial speed must be >= 0, got {v0}"
        raise InitialStateError(msg)


def init_kbm(s: InitialState) -> KbmState:
    """Anchor a KBM state at the ego origin with speed ``s.v0``."""
    _check_speed(s.v0)
    return KbmState(x=0.0, y=0.0, theta=0.0, v=float(s.v0))


def init_ccpp(s: InitialState, cfg: LiftConfig) -> CcppState:
    """Anchor a CCPP state at the ego origin.

    Raises:
        InitialStateError: If the speed is invalid or ``|kappa0| > kappa_max``.
    """
    _check_speed(s.v0)
    if not math.isfinite(s.kappa0) or abs(s.kappa0) > cfg.kappa_max:
        msg = f"initial curvature {s.kappa0} exceeds curvature bound {cfg.kappa_max}"
        raise InitialStateError(msg)
    return CcppState(x=0.0, y=0.0, theta=0.0, kappa=float(s.kappa0), v=float(s.v0))
