"""Shared dataclass contracts between all actionlift modules.

These types define the boundaries between activation, rollout, gradient and
analysis code. All modules import from here -- no module imports a peer's
private types. Array-carrying contracts hold read-only float64 copies so that a
value can be shared between threads without synchronization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Iterable

    from numpy.typing import ArrayLike, NDArray

# Number of raw action channels per step: throttle, lateral, brake
ACTION_DIM = 3


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------


class Scheme(str, Enum):
    """Integration scheme for one control interval (or substep)."""

    EULER = "euler"
    RK4 = "rk4"

    @property
    def stages(self) -> int:
        """Right-hand-side evaluations per step."""
        return 1 if self is Scheme.EULER else 4


class ModelKind(str, Enum):
    """Lifting operator family."""

    KBM = "kbm"
    CCPP = "ccpp"
    MLP = "mlp"


class Command(str, Enum):
    """High-level navigation command encoded in synthetic observations."""

    LEFT = "left"
    STRAIGHT = "straight"
    RIGHT = "right"


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _frozen_array(values: ArrayLike, name: str) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(arr)):
        msg = f"{name} must contain only finite values"
        raise ValueError(msg)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Data contracts (all frozen)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialState:
    """Minimal state needed to start a rollout in the ego frame.

    ``v0`` is the speed in m/s and ``kappa0`` the curvature in 1/m. The
    curvature is only read by the CCPP rollout.
    """

    v0: float
    kappa0: float = 0.0


@dataclass(frozen=True)
class KbmState:
    """Kinematic bicycle state: position (m), heading (rad), speed (m/s)."""

    x: float
    y: float
    theta: float
    v: float

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y, self.theta, self.v], dtype=np.float64)

    @classmethod
    def from_array(cls, values: ArrayLike) -> KbmState:
        x, y, theta, v = (float(c) for c in np.asarray(values, dtype=np.float64))
        return cls(x=x, y=y, theta=theta, v=v)


@dataclass(frozen=True)
class KbmDerivative:
    """Time derivative of a KbmState."""

    dx: float
    dy: float
    dtheta: float
    dv: float

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.dx, self.dy, self.dtheta, self.dv], dtype=np.float64)


@dataclass(frozen=True)
class CcppPose:
    """Arc-length pose advanced by CCPP substeps: position, heading, curvature."""

    x: float
    y: float
    theta: float
    kappa: float

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y, self.theta, self.kappa], dtype=np.float64)

    @classmethod
    def from_array(cls, values: ArrayLike) -> CcppPose:
        x, y, theta, kappa = (float(c) for c in np.asarray(values, dtype=np.float64))
        return cls(x=x, y=y, theta=theta, kappa=kappa)


@dataclass(frozen=True)
class CcppState:
    """CCPP pose plus the speed tracked alongside it (m/s, nonnegative)."""

    x: float
    y: float
    theta: float
    kappa: float
    v: float

    @property
    def pose(self) -> CcppPose:
        return CcppPose(x=self.x, y=self.y, theta=self.theta, kappa=self.kappa)

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.x, self.y, self.theta, self.kappa, self.v], dtype=np.float64)


@dataclass(frozen=True)
class KbmControls:
    """Bounded KBM controls: longitudinal acceleration (m/s^2), steering (rad)."""

    a_lon: float
    delta: float


@dataclass(frozen=True)
class CcppControls:
    """Bounded CCPP controls: longitudinal acceleration (m/s^2), sharpness (1/m^2)."""

    a_lon: float
    sharpness: float


@dataclass(frozen=True, eq=False)
class RawActionSequence:
    """Unbounded network outputs, one (throttle, lateral, brake) row per step.

    The lateral channel is the steering logit for KBM and the sharpness logit
    for CCPP.
    """

    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = _frozen_array(self.values, "raw actions")
        if arr.ndim != 2 or arr.shape[1] != ACTION_DIM or arr.shape[0] < 1:
            msg = f"raw actions must have shape (C_f >= 1, {ACTION_DIM}), got {arr.shape}"
            raise ValueError(msg)
        object.__setattr__(self, "values", arr)

    @property
    def horizon(self) -> int:
        return int(self.values.shape[0])

    def __len__(self) -> int:
        return self.horizon

    def prefix(self, steps: int) -> RawActionSequence:
        """First ``steps`` actions of the sequence."""
        return RawActionSequence(self.values[:steps])

    @classmethod
    def zeros(cls, horizon: int) -> RawActionSequence:
        return cls(np.zeros((horizon, ACTION_DIM)))

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[float]]) -> RawActionSequence:
        return cls(np.array([list(r) for r in rows], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class WaypointTrajectory:
    """Ego-frame waypoints (m) with optional headings (rad, never supervised)."""

    points: NDArray[np.float64]
    headings: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        points = _frozen_array(self.points, "waypoints")
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 1:
            msg = f"waypoints must have shape (C_f >= 1, 2), got {points.shape}"
            raise ValueError(msg)
        object.__setattr__(self, "points", points)
        if self.headings is not None:
            headings = _frozen_array(self.headings, "headings")
            if headings.shape != (points.shape[0],):
                msg = f"headings must have shape ({points.shape[0]},), got {headings.shape}"
                raise ValueError(msg)
            object.__setattr__(self, "headings", headings)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def without_headings(self) -> WaypointTrajectory:
        return WaypointTrajectory(self.points)


@dataclass(frozen=True, eq=False)
class LossWeights:
    """Nonnegative temporal weights of the waypoint loss."""

    alpha: NDArray[np.float64]

    def __post_init__(self) -> None:
        alpha = _frozen_array(self.alpha, "loss weights")
        if alpha.ndim != 1 or alpha.size < 1:
            msg = f"loss weights must be a non-empty vector, got shape {alpha.shape}"
            raise ValueError(msg)
        if np.any(alpha < 0.0):
            msg = "loss weights must be nonnegative"
            raise ValueError(msg)
        object.__setattr__(self, "alpha", alpha)

    @property
    def total(self) -> float:
        return float(np.sum(self.alpha))

    def __len__(self) -> int:
        return int(self.alpha.size)

    @classmethod
    def uniform(cls, horizon: int) -> LossWeights:
        return cls(np.ones(horizon))


@dataclass(frozen=True, eq=False)
class Jacobian:
    """Dense derivative of waypoints with respect to raw actions.

    Row ``2*i + c`` is coordinate ``c`` (0 = x, 1 = y) of waypoint ``i``;
    column ``3*j + ch`` is channel ``ch`` of action ``j``. Blocks with
    ``j > i`` are exactly zero.
    """

    matrix: NDArray[np.float64]

    @property
    def horizon(self) -> int:
        return int(self.matrix.shape[0] // 2)

    def block(self, waypoint: int, step: int) -> NDArray[np.float64]:
        """2 x 3 derivative of one waypoint with respect to one action."""
        rows = slice(2 * waypoint, 2 * waypoint + 2)
        cols = slice(ACTION_DIM * step, ACTION_DIM * step + ACTION_DIM)
        return self.matrix[rows, cols]


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of comparing the analytic Jacobian to central differences."""

    max_abs_err: float
    max_rel_err: float
    worst_entry: tuple[int, int]
    fd_step: float
    boundary_flag: bool

    def passed(self, tolerance: float) -> bool:
        """True when the case is boundary-flagged or within ``tolerance``."""
        return self.boundary_flag or self.max_rel_err < tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_abs_err": self.max_abs_err,
            "max_rel_err": self.max_rel_err,
            "worst_entry": list(self.worst_entry),
            "fd_step": self.fd_step,
            "boundary_flag": self.boundary_flag,
        }


@dataclass(frozen=True)
class ErrorRecord:
    """Aggregated oracle-relative error at one waypoint index of one grid point."""

    model: ModelKind
    scheme: Scheme
    cf: int
    dt: float
    n_int: int
    k: int
    mean_l1: float
    std_l1: float
    rhs_evals: int
    mean_yaw: float = 0.0
    std_yaw: float = 0.0

    @property
    def sort_key(self) -> tuple[str, str, int, float, int, int]:
        return (self.model.value, self.scheme.value, self.cf, self.dt, self.n_int, self.k)

    def to_dict(self) -> dict[str, str | int | float]:
        return {
            "model": self.model.value,
            "scheme": self.scheme.value,
            "cf": self.cf,
            "dt": self.dt,
            "n_int": self.n_int,
            "k": self.k,
            "mean_l1": self.mean_l1,
            "std_l1": self.std_l1,
            "rhs_evals": self.rhs_evals,
            "mean_yaw": self.mean_yaw,
            "std_yaw": self.std_yaw,
        }


@dataclass(frozen=True)
class ProfileRow:
    """Mean and standard deviation of the L1 error at waypoint index ``k`` (1-based)."""

    k: int
    mean_l1: float
    std_l1: float


@dataclass(frozen=True, eq=False)
class SyntheticSample:
    """One supervised example for the training demo.

    ``obs`` encodes speed, target curvature, target speed change and a command
    one-hot; ``gt`` is the expert trajectory produced by the oracle rollout.
    """

    obs: NDArray[np.float64]
    gt: WaypointTrajectory
    v0: float
    command: Command = Command.STRAIGHT
    expert_actions: NDArray[np.float64] = field(
        default_factory=lambda: np.zeros((0, ACTION_DIM))
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "obs", _frozen_array(self.obs, "observation"))
        object.__setattr__(
            self, "expert_actions", _frozen_array(self.expert_actions, "expert actions")
        )
