"""Training loops: the policy demo and the learned-lift fit.

The policy demo runs the full forward pass policy -> lift -> waypoint L1 loss
and pushes the exact lift gradient back into the policy parameters, updating
them by plain gradient descent with a linearly decaying rate. The MLP lift is
fitted with Adam on mini-batches against KBM rollouts of random actions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from actionlift.analysis.gradients import loss_and_grad
from actionlift.core.errors import TrainingDivergedError
from actionlift.core.types import InitialState, ModelKind, RawActionSequence
from actionlift.lifting.kbm import rollout_kbm
from actionlift.training.dataset import OBS_DIM, generate_dataset
from actionlift.training.networks import MlpLift, PolicyGrads, TinyPolicy

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from actionlift.config import LiftConfig, MlpFitConfig, TrainConfig
    from actionlift.core.types import SyntheticSample

logger = logging.getLogger(__name__)

# Adam moments and stabilizer
_BETA1 = 0.9
_BETA2 = 0.999
_EPS = 1e-8


# ---------------------------------------------------------------------------
# Policy demo
# ---------------------------------------------------------------------------


def batch_loss_and_grads(
    policy: TinyPolicy, batch: Sequence[SyntheticSample], cfg: LiftConfig
) -> tuple[float, PolicyGrads]:
    """Mean waypoint loss over ``batch`` and its gradient over the policy parameters."""
    obs = np.stack([sample.obs for sample in batch])
    actions, hidden = policy.forward(obs)
    g_actions = np.zeros_like(actions)
    total = 0.0
    for i, sample in enumerate(batch):
        loss, grad = loss_and_grad(
            RawActionSequence(actions[i]), InitialState(v0=sample.v0), cfg, sample.gt
        )
        total += loss
        g_actions[i] = grad
    n = len(batch)
    return total / n, policy.backward(obs, hidden, g_actions / n)


def batch_loss(policy: TinyPolicy, batch: Sequence[SyntheticSample], cfg: LiftConfig) -> float:
    loss, _ = batch_loss_and_grads(policy, batch, cfg)
    return loss


def _clip(grads: PolicyGrads, max_norm: float | None) -> tuple[PolicyGrads, float]:
    norm = grads.norm()
    if max_norm is not None and norm > max_norm:
        return grads.scaled(max_norm / norm), norm
    return grads, norm


def train_step(
    policy: TinyPolicy,
    batch: Sequence[SyntheticSample],
    cfg: LiftConfig,
    lr: float,
    max_grad_norm: float | None = None,
) -> tuple[TinyPolicy, float]:
    """One gradient-descent update; returns the new policy and the pre-update batch loss.

    Raises:
        ValueError: If ``lr`` is negative or the batch is empty.
        TrainingDivergedError: If the loss or gradient is non-finite.
    """
    if lr < 0.0:
        msg = f"learning rate must be >= 0, got {lr}"
        raise ValueError(msg)
    if not batch:
        msg = "batch must contain at least one sample"
        raise ValueError(msg)
    loss, grads = batch_loss_and_grads(policy, batch, cfg)
    grads, norm = _clip(grads, max_grad_norm)
    if not (math.isfinite(loss) and math.isfinite(norm)):
        msg = f"non-finite training loss ({loss}) or gradient norm ({norm})"
        raise TrainingDivergedError(msg, {"loss": loss, "grad_norm": norm, "lr": lr})
    return policy.step(grads, lr), loss


def learning_rate(cfg: TrainConfig, step: int) -> float:
    """Linear decay from ``lr`` to ``lr * lr_final_fraction`` over the run."""
    if cfg.steps <= 1:
        return cfg.lr
    progress = step / (cfg.steps - 1)
    return cfg.lr * (1.0 - (1.0 - cfg.lr_final_fraction) * progress)


@dataclass(frozen=True, eq=False)
class TrainingResult:
    """Trained policy with its loss curve.

    ``losses[t]`` is the batch loss before update ``t``; the last entry is
    the full-dataset loss after training.
    """

    policy: TinyPolicy
    losses: list[float]
    initial_loss: float
    final_loss: float

    @property
    def ratio(self) -> float:
        if self.initial_loss == 0.0:
            return 0.0 if self.final_loss == 0.0 else math.inf
        return self.final_loss / self.initial_loss


def run_training(
    cfg: TrainConfig, dataset: Sequence[SyntheticSample] | None = None
) -> TrainingResult:
    """Train a fresh policy on the synthetic task; deterministic given ``cfg.seed``."""
    samples = list(dataset) if dataset is not None else generate_dataset(
        cfg.dataset_size,
        cfg.lift,
        cfg.expert,
        seed=cfg.seed,
        horizon=cfg.horizon,
        refine=cfg.oracle_refine,
    )
    policy = TinyPolicy.init(OBS_DIM, cfg.horizon, hidden=cfg.hidden, seed=cfg.seed)
    rng = np.random.default_rng((cfg.seed, len(samples)))
    batch_size = min(cfg.batch_size, len(samples))

    initial = batch_loss(policy, samples, cfg.lift)
    logger.info(
        "Training %s/%s policy: %d samples, %d steps, initial loss %.4f",
        cfg.lift.model.value,
        cfg.lift.scheme.value,
        len(samples),
        cfg.steps,
        initial,
    )
    losses: list[float] = []
    order = np.arange(len(samples))
    cursor = len(samples)
    for step in range(cfg.steps):
        if batch_size == len(samples):
            batch = samples
        else:
            if cursor + batch_size > len(samples):
                order = rng.permutation(len(samples))
                cursor = 0
            batch = [samples[i] for i in order[cursor : cursor + batch_size]]
            cursor += batch_size
        lr = learning_rate(cfg, step)
        policy, loss = train_step(policy, batch, cfg.lift, lr, cfg.max_grad_norm)
        losses.append(loss)
        if step % 50 == 0:
            logger.debug("step %d: loss %.6f", step, loss)

    final = batch_loss(policy, samples, cfg.lift)
    if not math.isfinite(final):
        msg = "training ended with a non-finite loss"
        raise TrainingDivergedError(msg, {"final_loss": final, "steps": cfg.steps})
    losses.append(final)
    result = TrainingResult(policy=policy, losses=losses, initial_loss=initial, final_loss=final)
    logger.info("Training done: final loss %.4f (ratio %.4f)", final, result.ratio)
    return result


# ---------------------------------------------------------------------------
# Learned lift
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MlpDataset:
    """Raw actions (N, C_f, 3), initial speeds (N,) and KBM waypoints (N, C_f, 2)."""

    actions: NDArray[np.float64]
    v0: NDArray[np.float64]
    waypoints: NDArray[np.float64]

    @property
    def size(self) -> int:
        return int(self.actions.shape[0])


def make_mlp_dataset(size: int, cfg: MlpFitConfig, seed: int) -> MlpDataset:
    """Random actions scaled by ``action_scale`` and their KBM lifts."""
    if cfg.lift.model is not ModelKind.KBM:
        msg = f"the learned lift regresses KBM rollouts, got model {cfg.lift.model.value}"
        raise ValueError(msg)
    rng = np.random.default_rng((seed, cfg.horizon))
    actions = cfg.action_scale * rng.standard_normal((size, cfg.horizon, 3))
    v0 = rng.uniform(0.0, cfg.v0_max, size)
    trace = rollout_kbm(actions, v0, cfg.lift)
    return MlpDataset(actions=actions, v0=v0, waypoints=np.array(trace.waypoints))


@dataclass
class _Adam:
    lr: float
    moments: list[NDArray[np.float64]]
    squares: list[NDArray[np.float64]]
    t: int = 0

    @classmethod
    def for_params(cls, params: Sequence[NDArray[np.float64]], lr: float) -> _Adam:
        return cls(
            lr=lr,
            moments=[np.zeros_like(p) for p in params],
            squares=[np.zeros_like(p) for p in params],
        )

    def update(
        self, params: Sequence[NDArray[np.float64]], grads: Sequence[NDArray[np.float64]]
    ) -> list[NDArray[np.float64]]:
        self.t += 1
        out = []
        for i, (p, g) in enumerate(zip(params, grads, strict=True)):
            self.moments[i] = _BETA1 * self.moments[i] + (1.0 - _BETA1) * g
            self.squares[i] = _BETA2 * self.squares[i] + (1.0 - _BETA2) * g * g
            m_hat = self.moments[i] / (1.0 - _BETA1**self.t)
            v_hat = self.squares[i] / (1.0 - _BETA2**self.t)
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + _EPS))
        return out


def _standardize(values: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    return mean, np.where(std > 0.0, std, 1.0)


def mlp_heldout_error(model: MlpLift, data: MlpDataset) -> float:
    """Mean per-waypoint L1 error (m) of the learned lift on ``data``."""
    pred = model.predict(data.actions, data.v0)
    return float(np.mean(np.sum(np.abs(pred - data.waypoints), axis=2)))


@dataclass(frozen=True, eq=False)
class MlpFitResult:
    model: MlpLift
    epoch_losses: list[float]
    initial_loss: float
    heldout_error: float
    history: dict[str, float] = field(default_factory=dict)


def fit_mlp_lift(
    cfg: MlpFitConfig,
    train: MlpDataset | None = None,
    heldout: MlpDataset | None = None,
) -> MlpFitResult:
    """Fit the learned lift with Adam on the L1 loss of standardized waypoints.

    Raises:
        TrainingDivergedError: If an epoch loss is non-finite or the loss rises
            for ``cfg.patience`` consecutive epochs.
    """
    train = train or make_mlp_dataset(cfg.train_size, cfg, cfg.seed)
    heldout = heldout or make_mlp_dataset(cfg.heldout_size, cfg, cfg.seed + 1)

    x = MlpLift.features(train.actions, train.v0)
    y = train.waypoints.reshape(train.size, -1)
    x_stats, y_stats = _standardize(x), _standardize(y)
    model = MlpLift.init(cfg.horizon, cfg.hidden, cfg.seed, x_stats=x_stats, y_stats=y_stats)
    x_norm = model.normalize_inputs(x)
    y_norm = (y - model.y_mean) / model.y_std

    def full_loss(m: MlpLift) -> float:
        out, _ = m.forward_normalized(x_norm)
        return float(np.mean(np.abs(out - y_norm)))

    initial = full_loss(model)
    logger.info(
        "Fitting MLP lift: %d train / %d held-out sequences, %d epochs, initial loss %.4f",
        train.size,
        heldout.size,
        cfg.epochs,
        initial,
    )
    optimizer = _Adam.for_params([*model.weights, *model.biases], cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    n_layers = len(model.weights)
    losses: list[float] = []
    rising = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(train.size)
        total = 0.0
        for start in range(0, train.size, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            out, inputs = model.forward_normalized(x_norm[idx])
            diff = out - y_norm[idx]
            total += float(np.sum(np.abs(diff)))
            g_w, g_b = model.backward(inputs, np.sign(diff) / diff.size)
            params = optimizer.update([*model.weights, *model.biases], [*g_w, *g_b])
            model = model.with_layers(tuple(params[:n_layers]), tuple(params[n_layers:]))
        epoch_loss = total / y_norm.size
        if not math.isfinite(epoch_loss):
            msg = f"non-finite MLP loss at epoch {epoch}"
            raise TrainingDivergedError(msg, {"epoch": epoch, "loss": epoch_loss})
        if losses and epoch_loss > losses[-1]:
            rising += 1
            if rising >= cfg.patience:
                msg = f"MLP loss increased for {rising} consecutive epochs"
                raise TrainingDivergedError(msg, {"epoch": epoch, "losses": losses[-rising:]})
        else:
            rising = 0
        losses.append(epoch_loss)
        if epoch % 25 == 0:
            logger.debug("epoch %d: loss %.6f", epoch, epoch_loss)

    error = mlp_heldout_error(model, heldout)
    logger.info("MLP lift fitted: held-out mean waypoint error %.4f m", error)
    return MlpFitResult(
        model=model,
        epoch_losses=losses,
        initial_loss=initial,
        heldout_error=error,
        history={"final_train_loss": full_loss(model)},
    )
