"""Lifting operator dispatch.

A lifting operator maps a raw action sequence and an initial state to
ego-frame waypoints. Callers select one through :func:`make_lift` from the
configured model instead of importing the model modules directly.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Protocol

import numpy as np

from actionlift.config import validate_config
from actionlift.core.errors import ConfigError
from actionlift.core.types import ModelKind
from actionlift.lifting.ccpp import CcppTrace, lift_ccpp, rollout_ccpp
from actionlift.lifting.kbm import KbmTrace, lift_kbm, rollout_kbm

if TYPE_CHECKING:
    from numpy.typing import ArrayLike

    from actionlift.config import LiftConfig
    from actionlift.core.types import InitialState, RawActionSequence, WaypointTrajectory


class LiftingOperator(Protocol):
    """Deterministic map from (actions, initial state) to waypoints."""

    def __call__(self, a: RawActionSequence, s: InitialState) -> WaypointTrajectory:
        ...  # pragma: no cover


class MlpLifter(Protocol):
    """Anything that lifts like a fitted MLP (duck-typed)."""

    def lift(self, a: RawActionSequence, s: InitialState) -> WaypointTrajectory:
        ...  # pragma: no cover


def make_lift(cfg: LiftConfig, mlp: MlpLifter | None = None) -> LiftingOperator:
    """Return the lifting operator configured by ``cfg.model``.

    Raises:
        ConfigError: If ``cfg`` is invalid, or the model is MLP and no fitted
            lifter was supplied.
    """
    validate_config(cfg)
    if cfg.model is ModelKind.KBM:
        return lambda a, s: lift_kbm(a, s, cfg)
    if cfg.model is ModelKind.CCPP:
        return lambda a, s: lift_ccpp(a, s, cfg)
    if mlp is None:
        msg = "model 'mlp' requires fitted parameters"
        raise ConfigError("model", msg)
    return mlp.lift


def rollout(
    actions: ArrayLike, v0: ArrayLike, kappa0: ArrayLike, cfg: LiftConfig
) -> KbmTrace | CcppTrace:
    """Batch rollout of an analytic model; ``kappa0`` is ignored for KBM."""
    if cfg.model is ModelKind.KBM:
        return rollout_kbm(actions, v0, cfg)
    if cfg.model is ModelKind.CCPP:
        n_seq = np.asarray(actions).shape[0]
        return rollout_ccpp(actions, v0, np.broadcast_to(kappa0, (n_seq,)), cfg)
    msg = f"batch rollout needs an analytic model, got {cfg.model.value}"
    raise ConfigError("model", msg)


def rhs_evaluations(cfg: LiftConfig, horizon: int) -> int:
    """Right-hand-side evaluations needed to lift one sequence of ``horizon`` steps."""
    substeps = cfg.n_int if cfg.model is ModelKind.CCPP else 1
    return horizon * substeps * cfg.scheme.stages
