"""Tests for the kinematic bicycle rollout (semi-implicit Euler and RK4)."""

from __future__ import annotations

import math
from collections.abc import Callable
from typing import Any

import numpy as np
import pytest

from actionlift.analysis.harness import constant_turn_arc
from actionlift.config import LiftConfig
from actionlift.core.errors import ActivationError, ConfigError, InitialStateError
from actionlift.core.types import (
    InitialState,
    KbmControls,
    KbmState,
    ModelKind,
    RawActionSequence,
    Scheme,
)
from actionlift.lifting.kbm import (
    kbm_rhs,
    lift_kbm,
    rollout_kbm,
    step_euler_kbm,
    step_euler_kbm_jacobian,
    step_rk4_kbm,
    step_rk4_kbm_jacobian,
)
from tests.conftest import make_config, random_actions


def _finite_difference(
    step: Callable[..., KbmState], z: KbmState, u: KbmControls
) -> np.ndarray[Any, Any]:
    h = 1e-6
    base = np.concatenate([z.as_array(), [u.a_lon, u.delta]])
    cols = []
    for i in range(6):
        plus, minus = base.copy(), base.copy()
        plus[i] += h
        minus[i] -= h
        fp = step(KbmState.from_array(plus[:4]), KbmControls(*plus[4:]), 0.5, 2.9).as_array()
        fm = step(KbmState.from_array(minus[:4]), KbmControls(*minus[4:]), 0.5, 2.9).as_array()
        cols.append((fp - fm) / (2 * h))
    return np.stack(cols, axis=1)


class TestSingleStep:
    def test_rhs(self) -> None:
        d = kbm_rhs(KbmState(0.0, 0.0, 0.0, 10.0), KbmControls(1.0, 0.0), 2.9)
        assert (d.dx, d.dy, d.dtheta, d.dv) == (10.0, 0.0, 0.0, 1.0)

    def test_rhs_steering_singularity(self) -> None:
        with pytest.raises(ActivationError, match="singularity"):
            kbm_rhs(KbmState(0.0, 0.0, 0.0, 1.0), KbmControls(0.0, math.pi / 2), 2.9)

    def test_euler_updates_speed_first(self) -> None:
        """Position uses the updated speed and heading."""
        z = step_euler_kbm(KbmState(0.0, 0.0, 0.0, 10.0), KbmControls(1.0, 0.0), 0.5, 2.9)
        assert z.v == 10.5
        assert z.x == pytest.approx(5.25)
        assert z.y == 0.0

    def test_euler_heading_uses_new_speed(self) -> None:
        z = step_euler_kbm(KbmState(0.0, 0.0, 0.0, 4.0), KbmControls(2.0, 0.3), 0.5, 2.9)
        assert z.theta == pytest.approx(5.0 / 2.9 * math.tan(0.3) * 0.5)

    def test_euler_full_steer_reference(self) -> None:
        z = step_euler_kbm(KbmState(0.0, 0.0, 0.0, 10.0), KbmControls(0.0, 0.6), 0.5, 2.9)
        theta = 10.0 / 2.9 * math.tan(0.6) * 0.5
        assert z.theta == pytest.approx(theta, rel=1e-12)
        assert z.x == pytest.approx(5.0 * math.cos(theta), rel=1e-12)
        assert z.y == pytest.approx(5.0 * math.sin(theta), rel=1e-12)
        assert (z.x, z.theta) == pytest.approx((1.906722, 1.179546), abs=1e-6)
        assert z.v == 10.0

    def test_rk4_straight_line_exact(self) -> None:
        z = step_rk4_kbm(KbmState(0.0, 0.0, 0.0, 10.0), KbmControls(1.0, 0.0), 0.5, 2.9)
        assert z.x == pytest.approx(10.0 * 0.5 + 0.5 * 1.0 * 0.25, abs=1e-12)
        assert z.v == pytest.approx(10.5)

    @pytest.mark.parametrize("step", [step_euler_kbm, step_rk4_kbm])
    def test_no_speed_clamp(self, step: Callable[..., KbmState]) -> None:
        """KBM lets the speed go negative; the vehicle reverses."""
        z = step(KbmState(0.0, 0.0, 0.0, 0.2), KbmControls(-1.0, 0.0), 0.5, 2.9)
        assert z.v == pytest.approx(-0.3)
        assert z.x < 0.0

    @pytest.mark.parametrize(
        ("step", "jacobian"),
        [(step_euler_kbm, step_euler_kbm_jacobian), (step_rk4_kbm, step_rk4_kbm_jacobian)],
    )
    def test_step_jacobian(
        self, step: Callable[..., KbmState], jacobian: Callable[..., Any]
    ) -> None:
        z = KbmState(0.3, -0.2, 0.4, 6.0)
        u = KbmControls(0.7, -0.25)
        dz, du = jacobian(z, u, 0.5, 2.9)
        fd = _finite_difference(step, z, u)
        np.testing.assert_allclose(np.hstack([dz, du]), fd, atol=1e-6)


class TestRollout:
    def test_zero_actions_straight_line(self, kbm_cfg: LiftConfig) -> None:
        traj = lift_kbm(RawActionSequence.zeros(8), InitialState(v0=10.0), kbm_cfg)
        expected_x = 10.0 * 0.5 * np.arange(1, 9)
        np.testing.assert_allclose(traj.points[:, 0], expected_x, atol=1e-12)
        np.testing.assert_array_equal(traj.points[:, 1], 0.0)
        assert traj.headings is not None
        np.testing.assert_array_equal(traj.headings, 0.0)

    def test_standstill(self, kbm_cfg: LiftConfig) -> None:
        traj = lift_kbm(RawActionSequence.zeros(4), InitialState(v0=0.0), kbm_cfg)
        np.testing.assert_array_equal(traj.points, 0.0)

    def test_negative_speed_propagates(self, kbm_cfg: LiftConfig) -> None:
        """Full braking from rest drives the vehicle backwards."""
        actions = np.tile([-20.0, 0.0, 20.0], (4, 1))
        trace = rollout_kbm(actions[None], np.array([0.0]), kbm_cfg)
        assert np.all(trace.states[0, 1:, 3] < 0.0)
        assert trace.waypoints[0, -1, 0] < 0.0

    def test_constant_turn_matches_arc(self) -> None:
        """RK4 at a fine interval follows the closed-form circular arc."""
        cfg = make_config(ModelKind.KBM, Scheme.RK4, dt=0.01)
        steer = math.atanh(0.2 / 0.6)
        actions = np.tile([0.0, steer, 0.0], (100, 1))
        traj = lift_kbm(RawActionSequence(actions), InitialState(v0=5.0), cfg)
        x, y, theta = constant_turn_arc(5.0, 0.2, 2.9, 1.0)
        np.testing.assert_allclose(traj.points[-1], [x, y], atol=1e-8)
        assert traj.headings is not None
        assert traj.headings[-1] == pytest.approx(theta, abs=1e-10)

    def test_batch_matches_single(
        self, kbm_cfg: LiftConfig, rng: np.random.Generator
    ) -> None:
        seqs = [random_actions(rng) for _ in range(3)]
        speeds = np.array([0.0, 4.0, 12.0])
        trace = rollout_kbm(np.stack([s.values for s in seqs]), speeds, kbm_cfg)
        for i, seq in enumerate(seqs):
            single = lift_kbm(seq, InitialState(v0=float(speeds[i])), kbm_cfg)
            np.testing.assert_allclose(trace.waypoints[i], single.points, rtol=0, atol=1e-12)

    def test_deterministic(self, rng: np.random.Generator) -> None:
        for scheme in Scheme:
            cfg = make_config(ModelKind.KBM, scheme)
            seq = random_actions(rng)
            first = lift_kbm(seq, InitialState(v0=8.0), cfg).points.tobytes()
            for _ in range(50):
                assert lift_kbm(seq, InitialState(v0=8.0), cfg).points.tobytes() == first

    def test_model_mismatch(self, ccpp_cfg: LiftConfig) -> None:
        with pytest.raises(ConfigError, match="model"):
            lift_kbm(RawActionSequence.zeros(2), InitialState(v0=1.0), ccpp_cfg)

    def test_negative_initial_speed(self, kbm_cfg: LiftConfig) -> None:
        with pytest.raises(InitialStateError):
            lift_kbm(RawActionSequence.zeros(2), InitialState(v0=-1.0), kbm_cfg)

    def test_invalid_config(self) -> None:
        cfg = make_config().replace(dt=0.0)
        with pytest.raises(ConfigError, match="nonpositive interval"):
            lift_kbm(RawActionSequence.zeros(2), InitialState(v0=1.0), cfg)
