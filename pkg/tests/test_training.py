"""Tests for the synthetic dataset, the numpy networks and both training loops."""

from __future__ import annotations

import math

import numpy as np
import pytest

from actionlift.analysis.harness import oracle_trace
from actionlift.config import ExpertConfig, LiftConfig, MlpFitConfig, TrainConfig, get_defaults
from actionlift.core.errors import ConfigError, TrainingDivergedError
from actionlift.core.types import (
    Command,
    InitialState,
    ModelKind,
    RawActionSequence,
    Scheme,
    SyntheticSample,
)
from actionlift.training import trainer
from actionlift.training.dataset import (
    OBS_DIM,
    command_for,
    encode_observation,
    expert_actions,
    generate_dataset,
)
from actionlift.training.networks import MlpLift, TinyPolicy
from actionlift.training.trainer import (
    TrainingResult,
    batch_loss,
    batch_loss_and_grads,
    fit_mlp_lift,
    learning_rate,
    make_mlp_dataset,
    run_training,
    train_step,
)
from tests.conftest import make_config


def _train_config(lift: LiftConfig, **changes: object) -> TrainConfig:
    base: dict[str, object] = {
        "lift": lift.model_dump(mode="json"),
        "dataset_size": 4,
        "batch_size": 4,
        "steps": 3,
        "oracle_refine": 64,
    }
    base.update(changes)
    return TrainConfig.model_validate(base)


def _mlp_config(**changes: object) -> MlpFitConfig:
    base: dict[str, object] = {
        "lift": make_config(ModelKind.KBM, n_int=1).model_dump(mode="json"),
        "train_size": 64,
        "heldout_size": 16,
        "epochs": 20,
        "batch_size": 16,
        "hidden": 16,
        "lr": 1e-2,
    }
    base.update(changes)
    return MlpFitConfig.model_validate(base)


class TestExpert:
    @pytest.mark.parametrize("model", [ModelKind.KBM, ModelKind.CCPP])
    def test_zero_targets_give_zero_actions(self, model: ModelKind) -> None:
        actions = expert_actions(8.0, 0.0, 0.0, make_config(model), 8)
        np.testing.assert_array_equal(actions, 0.0)

    def test_kbm_constant_steering(self, kbm_cfg: LiftConfig) -> None:
        actions = expert_actions(8.0, 0.1, 0.0, kbm_cfg, 8)
        steer = 0.6 * np.tanh(actions[:, 1])
        np.testing.assert_allclose(steer, math.atan(0.1 * 2.9))

    def test_acceleration_stays_within_fraction(self, kbm_cfg: LiftConfig) -> None:
        actions = expert_actions(8.0, 0.0, 100.0, kbm_cfg, 8)
        a_lon = 1.0 / (1.0 + np.exp(-actions[:, 0])) - 1.0 / (1.0 + np.exp(-actions[:, 2]))
        np.testing.assert_allclose(a_lon, 0.8)

    def test_ccpp_ramp_then_hold(self, ccpp_cfg: LiftConfig) -> None:
        actions = expert_actions(8.0, 0.1, 0.0, ccpp_cfg, 8)
        assert np.all(actions[:4, 1] > 0.0)
        np.testing.assert_array_equal(actions[4:, 1], 0.0)

    def test_ccpp_target_beyond_bound_is_clamped(self, ccpp_cfg: LiftConfig) -> None:
        """Ground truth for an unreachable curvature holds the curvature bound."""
        actions = expert_actions(10.0, 1.0, 0.0, ccpp_cfg, 8)
        _, headings = oracle_trace(actions[None], [10.0], [0.0], ccpp_cfg, 128)
        turn = np.diff(headings[0])
        np.testing.assert_allclose(turn[-3:], 0.4 * 5.0, rtol=1e-9)

    def test_mlp_rejected(self) -> None:
        with pytest.raises(ConfigError):
            expert_actions(8.0, 0.1, 0.0, make_config(ModelKind.MLP), 8)


class TestObservations:
    def test_commands(self) -> None:
        expert = ExpertConfig()
        assert command_for(0.1, expert) is Command.LEFT
        assert command_for(-0.1, expert) is Command.RIGHT
        assert command_for(0.01, expert) is Command.STRAIGHT

    def test_encoding(self) -> None:
        obs = encode_observation(6.0, -0.15, 1.5, ExpertConfig())
        assert obs.shape == (OBS_DIM,)
        np.testing.assert_allclose(obs, [0.5, -1.0, 0.5, 0.0, 0.0, 1.0])


class TestDataset:
    def test_deterministic(self, kbm_cfg: LiftConfig) -> None:
        first = generate_dataset(4, kbm_cfg, seed=1, refine=64)
        second = generate_dataset(4, kbm_cfg, seed=1, refine=64)
        for a, b in zip(first, second, strict=True):
            np.testing.assert_array_equal(a.obs, b.obs)
            np.testing.assert_array_equal(a.gt.points, b.gt.points)

    def test_samples(self, ccpp_cfg: LiftConfig) -> None:
        samples = generate_dataset(5, ccpp_cfg, seed=2, horizon=6, refine=64)
        assert len(samples) == 5
        for sample in samples:
            assert len(sample.gt) == 6
            assert sample.expert_actions.shape == (6, 3)
            assert 2.0 <= sample.v0 <= 12.0

    def test_empty_rejected(self, kbm_cfg: LiftConfig) -> None:
        with pytest.raises(ValueError):
            generate_dataset(0, kbm_cfg)


class TestTinyPolicy:
    def test_initial_actions_near_zero(self) -> None:
        policy = TinyPolicy.init(OBS_DIM, 8, seed=0)
        actions = policy(np.ones((3, OBS_DIM)))
        assert actions.shape == (3, 8, 3)
        assert np.max(np.abs(actions)) < 1.0

    def test_round_trip(self) -> None:
        policy = TinyPolicy.init(OBS_DIM, 4, hidden=5, seed=3)
        restored = TinyPolicy.from_dict(policy.to_dict())
        np.testing.assert_array_equal(restored.parameters(), policy.parameters())
        assert restored.horizon == 4

    def test_with_parameters_checks_size(self) -> None:
        policy = TinyPolicy.init(OBS_DIM, 4, hidden=5)
        with pytest.raises(ValueError, match="parameters"):
            policy.with_parameters(np.zeros(3))


class TestPolicyTraining:
    @pytest.fixture
    def samples(self, kbm_cfg: LiftConfig) -> list[SyntheticSample]:
        return generate_dataset(4, kbm_cfg, seed=0, refine=64)

    def test_gradients_match_differences(
        self, samples: list[SyntheticSample], kbm_cfg: LiftConfig
    ) -> None:
        """Policy -> lift -> loss gradients agree with centered differences."""
        policy = TinyPolicy.init(OBS_DIM, 8, hidden=6, seed=1)
        _, grads = batch_loss_and_grads(policy, samples, kbm_cfg)
        flat = grads.flat()
        theta = policy.parameters()
        h = 1e-6
        for idx in np.random.default_rng(0).choice(theta.size, 12, replace=False):
            e = np.zeros_like(theta)
            e[idx] = h
            up = batch_loss(policy.with_parameters(theta + e), samples, kbm_cfg)
            down = batch_loss(policy.with_parameters(theta - e), samples, kbm_cfg)
            assert flat[idx] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-8)

    def test_zero_rate_keeps_parameters(
        self, samples: list[SyntheticSample], kbm_cfg: LiftConfig
    ) -> None:
        policy = TinyPolicy.init(OBS_DIM, 8, seed=0)
        updated, _ = train_step(policy, samples, kbm_cfg, lr=0.0)
        np.testing.assert_array_equal(updated.parameters(), policy.parameters())

    def test_small_step_reduces_loss(
        self, samples: list[SyntheticSample], kbm_cfg: LiftConfig
    ) -> None:
        policy = TinyPolicy.init(OBS_DIM, 8, seed=0)
        updated, before = train_step(policy, samples, kbm_cfg, lr=1e-4)
        assert batch_loss(updated, samples, kbm_cfg) < before

    def test_step_validation(
        self, samples: list[SyntheticSample], kbm_cfg: LiftConfig
    ) -> None:
        policy = TinyPolicy.init(OBS_DIM, 8)
        with pytest.raises(ValueError, match="learning rate"):
            train_step(policy, samples, kbm_cfg, lr=-1.0)
        with pytest.raises(ValueError, match="batch"):
            train_step(policy, [], kbm_cfg, lr=0.1)

    def test_non_finite_loss_aborts(
        self,
        samples: list[SyntheticSample],
        kbm_cfg: LiftConfig,
        monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        policy = TinyPolicy.init(OBS_DIM, 8)
        _, grads = batch_loss_and_grads(policy, samples, kbm_cfg)
        monkeypatch.setattr(trainer, "batch_loss_and_grads", lambda *_: (math.nan, grads))
        with pytest.raises(TrainingDivergedError) as info:
            train_step(policy, samples, kbm_cfg, lr=0.1)
        assert "loss" in info.value.diagnostics


class TestRunTraining:
    def test_zero_rate_gives_flat_curve(self, kbm_cfg: LiftConfig) -> None:
        result = run_training(_train_config(kbm_cfg, lr=0.0))
        assert len(result.losses) == 4
        assert result.losses == pytest.approx([result.initial_loss] * 4, rel=1e-12)
        assert result.ratio == pytest.approx(1.0)

    def test_deterministic(self, ccpp_cfg: LiftConfig) -> None:
        cfg = _train_config(ccpp_cfg, batch_size=2)
        assert run_training(cfg).losses == run_training(cfg).losses

    def test_learning_rate_schedule(self, kbm_cfg: LiftConfig) -> None:
        cfg = _train_config(kbm_cfg, steps=11, lr=0.1, lr_final_fraction=0.1)
        assert learning_rate(cfg, 0) == pytest.approx(0.1)
        assert learning_rate(cfg, 10) == pytest.approx(0.01)

    def test_ratio_edge_cases(self) -> None:
        policy = TinyPolicy.init(OBS_DIM, 2)
        assert TrainingResult(policy, [0.0], 0.0, 0.0).ratio == 0.0
        assert TrainingResult(policy, [1.0], 0.0, 1.0).ratio == math.inf
        assert TrainingResult(policy, [2.0, 1.0], 2.0, 1.0).ratio == 0.5


class TestMlpLift:
    def test_features(self) -> None:
        x = MlpLift.features(np.ones((2, 3, 3)), [4.0, 5.0])
        assert x.shape == (2, 10)
        assert x[:, -1].tolist() == [4.0, 5.0]

    def test_backward_matches_differences(self) -> None:
        model = MlpLift.init(2, hidden=4, seed=0)
        x = np.random.default_rng(1).standard_normal((3, 7))
        g = np.random.default_rng(2).standard_normal((3, 4))
        out, inputs = model.forward_normalized(x)
        g_w, _ = model.backward(inputs, g)
        h = 1e-6
        for i, j in [(0, 0), (3, 2), (6, 1)]:
            weights = [w.copy() for w in model.weights]
            weights[0][i, j] += h
            up, _ = model.with_layers(tuple(weights), model.biases).forward_normalized(x)
            weights[0][i, j] -= 2 * h
            down, _ = model.with_layers(tuple(weights), model.biases).forward_normalized(x)
            numeric = float(np.sum((up - down) * g)) / (2 * h)
            assert g_w[0][i, j] == pytest.approx(numeric, rel=1e-5, abs=1e-8)
        assert out.shape == (3, 4)

    def test_horizon_mismatch(self) -> None:
        model = MlpLift.init(4, hidden=4)
        with pytest.raises(ValueError, match="horizon"):
            model.lift(RawActionSequence.zeros(3), InitialState(v0=1.0))

    def test_from_dict_rejects_other_kinds(self) -> None:
        with pytest.raises(ValueError, match="kind"):
            MlpLift.from_dict(TinyPolicy.init(OBS_DIM, 2).to_dict())

    def test_round_trip(self) -> None:
        model = MlpLift.init(3, hidden=4, seed=5)
        restored = MlpLift.from_dict(model.to_dict())
        a = RawActionSequence(np.random.default_rng(0).standard_normal((3, 3)))
        s = InitialState(v0=7.0)
        np.testing.assert_array_equal(restored.lift(a, s).points, model.lift(a, s).points)

    def test_dataset_requires_kbm(self) -> None:
        cfg = _mlp_config(lift=make_config(ModelKind.CCPP).model_dump(mode="json"))
        with pytest.raises(ValueError, match="KBM"):
            make_mlp_dataset(4, cfg, seed=0)

    def test_fit_reduces_loss(self) -> None:
        result = fit_mlp_lift(_mlp_config())
        assert len(result.epoch_losses) == 20
        assert result.epoch_losses[-1] < result.initial_loss
        assert math.isfinite(result.heldout_error)

    def test_runaway_loss_aborts(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(
            trainer._Adam, "update", lambda self, params, grads: [2.0 * p for p in params]
        )
        with pytest.raises(TrainingDivergedError):
            fit_mlp_lift(_mlp_config(patience=2))


@pytest.mark.slow
class TestReferenceRuns:
    """Full-size runs with the shipped defaults."""

    @pytest.mark.parametrize("model", [ModelKind.KBM, ModelKind.CCPP])
    def test_policy_loss_drops_tenfold(self, model: ModelKind) -> None:
        defaults = get_defaults()
        cfg = defaults.train.model_copy(update={"lift": defaults.preset(model, Scheme.EULER)})
        result = run_training(cfg)
        assert result.ratio <= 0.1

    def test_mlp_lift_heldout_error(self) -> None:
        result = fit_mlp_lift(get_defaults().mlp_fit)
        assert result.heldout_error < 0.1
