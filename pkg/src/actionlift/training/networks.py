"""Small numpy networks with hand-written backward passes.

:class:`TinyPolicy` maps observations to raw action sequences (affine, tanh,
affine). :class:`MlpLift` is the learned lifting baseline: raw actions plus
initial speed to waypoints through three ReLU-separated affine layers, with
inputs and outputs standardized by statistics frozen at fit time.

Parameters are immutable; updates build a new instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from actionlift.core.types import ACTION_DIM, WaypointTrajectory

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from actionlift.core.types import InitialState, RawActionSequence


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> NDArray[np.float64]:
    scale = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, scale, (fan_in, fan_out))


def _array(values: Any) -> NDArray[np.float64]:
    return np.asarray(values, dtype=np.float64)


# ---------------------------------------------------------------------------
# Policy
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolicyGrads:
    w1: NDArray[np.float64]
    b1: NDArray[np.float64]
    w2: NDArray[np.float64]
    b2: NDArray[np.float64]

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(g * g) for g in (self.w1, self.b1, self.w2, self.b2))))

    def scaled(self, factor: float) -> PolicyGrads:
        return PolicyGrads(
            w1=self.w1 * factor, b1=self.b1 * factor, w2=self.w2 * factor, b2=self.b2 * factor
        )

    def flat(self) -> NDArray[np.float64]:
        return np.concatenate([g.ravel() for g in (self.w1, self.b1, self.w2, self.b2)])


@dataclass(frozen=True, eq=False)
class TinyPolicy:
    """Two affine layers with a tanh hidden layer; output is (C_f, 3) raw actions."""

    w1: NDArray[np.float64]
    b1: NDArray[np.float64]
    w2: NDArray[np.float64]
    b2: NDArray[np.float64]
    horizon: int

    @classmethod
    def init(cls, obs_dim: int, horizon: int, hidden: int = 32, seed: int = 0) -> TinyPolicy:
        """Glorot-initialized policy; the output layer starts small so raw actions start near 0."""
        rng = np.random.default_rng(seed)
        out = horizon * ACTION_DIM
        return cls(
            w1=_glorot(rng, obs_dim, hidden),
            b1=np.zeros(hidden),
            w2=0.1 * _glorot(rng, hidden, out),
            b2=np.zeros(out),
            horizon=horizon,
        )

    @property
    def hidden(self) -> int:
        return int(self.b1.size)

    @property
    def parameter_count(self) -> int:
        return int(self.w1.size + self.b1.size + self.w2.size + self.b2.size)

    def forward(self, obs: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Raw actions (B, C_f, 3) and the hidden activations needed by :meth:`backward`."""
        x = np.atleast_2d(_array(obs))
        hidden = np.tanh(x @ self.w1 + self.b1)
        out = hidden @ self.w2 + self.b2
        return out.reshape(x.shape[0], self.horizon, ACTION_DIM), hidden

    def __call__(self, obs: ArrayLike) -> NDArray[np.float64]:
        return self.forward(obs)[0]

    def backward(
        self, obs: ArrayLike, hidden: NDArray[np.float64], g_actions: NDArray[np.float64]
    ) -> PolicyGrads:
        """Parameter gradients given the loss gradient over the raw actions (B, C_f, 3)."""
        x = np.atleast_2d(_array(obs))
        g_out = g_actions.reshape(x.shape[0], -1)
        g_hidden = (g_out @ self.w2.T) * (1.0 - hidden * hidden)
        return PolicyGrads(
            w1=x.T @ g_hidden,
            b1=g_hidden.sum(axis=0),
            w2=hidden.T @ g_out,
            b2=g_out.sum(axis=0),
        )

    def step(self, grads: PolicyGrads, lr: float) -> TinyPolicy:
        """Plain gradient-descent update."""
        return TinyPolicy(
            w1=self.w1 - lr * grads.w1,
            b1=self.b1 - lr * grads.b1,
            w2=self.w2 - lr * grads.w2,
            b2=self.b2 - lr * grads.b2,
            horizon=self.horizon,
        )

    def parameters(self) -> NDArray[np.float64]:
        return np.concatenate([p.ravel() for p in (self.w1, self.b1, self.w2, self.b2)])

    def with_parameters(self, flat: ArrayLike) -> TinyPolicy:
        """Copy with every parameter taken from a flat vector in :meth:`parameters` order."""
        values = _array(flat)
        if values.size != self.parameter_count:
            msg = f"expected {self.parameter_count} parameters, got {values.size}"
            raise ValueError(msg)
        parts = []
        offset = 0
        for p in (self.w1, self.b1, self.w2, self.b2):
            parts.append(values[offset : offset + p.size].reshape(p.shape))
            offset += p.size
        return TinyPolicy(*parts, horizon=self.horizon)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "tiny_policy",
            "horizon": self.horizon,
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TinyPolicy:
        return cls(
            w1=_array(data["w1"]),
            b1=_array(data["b1"]),
            w2=_array(data["w2"]),
            b2=_array(data["b2"]),
            horizon=int(data["horizon"]),
        )


# ---------------------------------------------------------------------------
# Learned lift
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MlpLift:
    """Feedforward regressor from (flattened raw actions, v0) to (C_f, 2) waypoints.

    ``weights`` and ``biases`` hold the three affine layers; ``x_mean``,
    ``x_std``, ``y_mean`` and ``y_std`` standardize inputs and outputs.
    """

    weights: tuple[NDArray[np.float64], ...]
    biases: tuple[NDArray[np.float64], ...]
    x_mean: NDArray[np.float64]
    x_std: NDArray[np.float64]
    y_mean: NDArray[np.float64]
    y_std: NDArray[np.float64]
    horizon: int

    @classmethod
    def init(
        cls,
        horizon: int,
        hidden: int = 256,
        seed: int = 0,
        x_stats: tuple[ArrayLike, ArrayLike] | None = None,
        y_stats: tuple[ArrayLike, ArrayLike] | None = None,
    ) -> MlpLift:
        rng = np.random.default_rng(seed)
        n_in = horizon * ACTION_DIM + 1
        n_out = horizon * 2
        sizes = (n_in, hidden, hidden, n_out)
        weights = tuple(
            rng.normal(0.0, np.sqrt(2.0 / sizes[i]), (sizes[i], sizes[i + 1])) for i in range(3)
        )
        biases = tuple(np.zeros(sizes[i + 1]) for i in range(3))
        x_mean, x_std = x_stats or (np.zeros(n_in), np.ones(n_in))
        y_mean, y_std = y_stats or (np.zeros(n_out), np.ones(n_out))
        return cls(
            weights=weights,
            biases=biases,
            x_mean=_array(x_mean),
            x_std=_array(x_std),
            y_mean=_array(y_mean),
            y_std=_array(y_std),
            horizon=horizon,
        )

    @staticmethod
    def features(actions: ArrayLike, v0: ArrayLike) -> NDArray[np.float64]:
        """Input rows [a_1 .. a_C flattened, v0] for a batch (N, C_f, 3)."""
        raw = _array(actions)
        speeds = np.broadcast_to(_array(v0), (raw.shape[0],))
        return np.concatenate([raw.reshape(raw.shape[0], -1), speeds[:, None]], axis=1)

    def forward_normalized(
        self, x_norm: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], list[NDArray[np.float64]]]:
        """Standardized outputs and the layer inputs recorded for :meth:`backward`."""
        inputs = [x_norm]
        h = x_norm
        for layer, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            h = h @ w + b
            if layer < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
                inputs.append(h)
        return h, inputs

    def backward(
        self, inputs: list[NDArray[np.float64]], g_out: NDArray[np.float64]
    ) -> tuple[list[NDArray[np.float64]], list[NDArray[np.float64]]]:
        """Weight and bias gradients for a gradient over the standardized outputs."""
        g_w: list[NDArray[np.float64]] = [np.zeros(0)] * len(self.weights)
        g_b: list[NDArray[np.float64]] = [np.zeros(0)] * len(self.weights)
        g = g_out
        for layer in range(len(self.weights) - 1, -1, -1):
            g_w[layer] = inputs[layer].T @ g
            g_b[layer] = g.sum(axis=0)
            if layer > 0:
                g = (g @ self.weights[layer].T) * (inputs[layer] > 0.0)
        return g_w, g_b

    def normalize_inputs(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return (x - self.x_mean) / self.x_std

    def predict(self, actions: ArrayLike, v0: ArrayLike) -> NDArray[np.float64]:
        """Waypoints (N, C_f, 2) in metres."""
        x = self.normalize_inputs(self.features(actions, v0))
        y, _ = self.forward_normalized(x)
        return (y * self.y_std + self.y_mean).reshape(x.shape[0], self.horizon, 2)

    def lift(self, a: RawActionSequence, s: InitialState) -> WaypointTrajectory:
        """Lift one sequence; horizon must match the fitted horizon."""
        if a.horizon != self.horizon:
            msg = f"MLP lift was fitted for horizon {self.horizon}, got {a.horizon}"
            raise ValueError(msg)
        return WaypointTrajectory(points=self.predict(a.values[None], [s.v0])[0])

    def with_layers(
        self, weights: tuple[NDArray[np.float64], ...], biases: tuple[NDArray[np.float64], ...]
    ) -> MlpLift:
        return MlpLift(
            weights=weights,
            biases=biases,
            x_mean=self.x_mean,
            x_std=self.x_std,
            y_mean=self.y_mean,
            y_std=self.y_std,
            horizon=self.horizon,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "mlp_lift",
            "horizon": self.horizon,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean.tolist(),
            "y_std": self.y_std.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MlpLift:
        if data.get("kind") != "mlp_lift":
            msg = f"not an MLP lift parameter file (kind={data.get('kind')!r})"
            raise ValueError(msg)
        return cls(
            weights=tuple(_array(w) for w in data["weights"]),
            biases=tuple(_array(b) for b in data["biases"]),
            x_mean=_array(data["x_mean"]),
            x_std=_array(data["x_std"]),
            y_mean=_array(data["y_mean"]),
            y_std=_array(data["y_std"]),
            horizon=int(data["horizon"]),
        )
