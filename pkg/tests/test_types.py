"""Tests for shared dataclass types, enums and the error hierarchy.

Validates that contracts reject malformed arrays, array-carrying types are
read-only, and the Jacobian indexing convention is what the rest of the
package assumes.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from actionlift.core.errors import (
    ConfigError,
    LiftError,
    RolloutError,
    TrainingDivergedError,
)
from actionlift.core.types import (
    ErrorRecord,
    GradCheckReport,
    InitialState,
    Jacobian,
    KbmState,
    LossWeights,
    ModelKind,
    RawActionSequence,
    Scheme,
    WaypointTrajectory,
)

# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------


class TestEnums:
    """Verify enum values used in documents and CSV output."""

    def test_scheme_values(self) -> None:
        assert Scheme.EULER.value == "euler"
        assert Scheme.RK4.value == "rk4"
        assert len(Scheme) == 2

    def test_scheme_stages(self) -> None:
        assert Scheme.EULER.stages == 1
        assert Scheme.RK4.stages == 4

    def test_model_values(self) -> None:
        assert [m.value for m in ModelKind] == ["kbm", "ccpp", "mlp"]

    def test_enum_from_string(self) -> None:
        assert ModelKind("ccpp") is ModelKind.CCPP
        assert Scheme("rk4") is Scheme.RK4


# ---------------------------------------------------------------------------
# Array contracts
# ---------------------------------------------------------------------------


class TestRawActionSequence:
    def test_valid_sequence(self) -> None:
        seq = RawActionSequence(np.zeros((8, 3)))
        assert seq.horizon == 8
        assert len(seq) == 8

    def test_values_are_read_only(self) -> None:
        seq = RawActionSequence.zeros(3)
        with pytest.raises(ValueError):
            seq.values[0, 0] = 1.0

    def test_input_is_copied(self) -> None:
        """Mutating the source array does not change the sequence."""
        source = np.zeros((2, 3))
        seq = RawActionSequence(source)
        source[0, 0] = 5.0
        assert seq.values[0, 0] == 0.0

    @pytest.mark.parametrize("shape", [(0, 3), (4, 2), (4,), (2, 3, 1)])
    def test_bad_shape_rejected(self, shape: tuple[int, ...]) -> None:
        with pytest.raises(ValueError, match="shape"):
            RawActionSequence(np.zeros(shape))

    def test_non_finite_rejected(self) -> None:
        values = np.zeros((2, 3))
        values[1, 2] = np.nan
        with pytest.raises(ValueError, match="finite"):
            RawActionSequence(values)

    def test_prefix_and_rows(self) -> None:
        seq = RawActionSequence.from_rows([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        assert seq.prefix(2).values.tolist() == [[1, 2, 3], [4, 5, 6]]

    def test_frozen(self) -> None:
        seq = RawActionSequence.zeros(1)
        with pytest.raises(dataclasses.FrozenInstanceError):
            seq.values = np.ones((1, 3))  # type: ignore[misc]


class TestWaypointTrajectory:
    def test_without_headings(self) -> None:
        traj = WaypointTrajectory(points=np.ones((3, 2)), headings=np.zeros(3))
        assert traj.without_headings().headings is None
        assert len(traj) == 3

    def test_heading_length_must_match(self) -> None:
        with pytest.raises(ValueError, match="headings"):
            WaypointTrajectory(points=np.ones((3, 2)), headings=np.zeros(2))

    def test_points_must_be_planar(self) -> None:
        with pytest.raises(ValueError, match="waypoints"):
            WaypointTrajectory(points=np.ones((3, 3)))


class TestLossWeights:
    def test_negative_rejected(self) -> None:
        with pytest.raises(ValueError, match="nonnegative"):
            LossWeights(np.array([1.0, -0.5]))

    def test_uniform(self) -> None:
        w = LossWeights.uniform(4)
        assert w.total == 4.0
        assert len(w) == 4


# ---------------------------------------------------------------------------
# Jacobian and reports
# ---------------------------------------------------------------------------


class TestJacobian:
    def test_block_indexing(self) -> None:
        """Row 2i+c is waypoint i coordinate c, column 3j+ch is action j channel ch."""
        matrix = np.arange(6 * 9, dtype=np.float64).reshape(6, 9)
        jac = Jacobian(matrix=matrix)
        assert jac.horizon == 3
        block = jac.block(1, 2)
        assert block.shape == (2, 3)
        assert block[0, 0] == matrix[2, 6]
        assert block[1, 2] == matrix[3, 8]


class TestReports:
    def test_gradcheck_passed(self) -> None:
        report = GradCheckReport(
            max_abs_err=1e-9, max_rel_err=2e-6, worst_entry=(0, 1), fd_step=1e-5,
            boundary_flag=False,
        )
        assert report.passed(1e-5)
        assert not report.passed(1e-6)
        assert report.to_dict()["worst_entry"] == [0, 1]

    def test_boundary_flag_always_passes(self) -> None:
        report = GradCheckReport(
            max_abs_err=1.0, max_rel_err=1.0, worst_entry=(0, 0), fd_step=1e-5,
            boundary_flag=True,
        )
        assert report.passed(1e-12)

    def test_error_record_sort_key(self) -> None:
        a = ErrorRecord(ModelKind.CCPP, Scheme.RK4, 8, 0.5, 2, 1, 0.1, 0.0, 64)
        b = ErrorRecord(ModelKind.CCPP, Scheme.EULER, 8, 0.5, 10, 3, 0.1, 0.0, 80)
        c = ErrorRecord(ModelKind.KBM, Scheme.EULER, 8, 0.1, 1, 1, 0.1, 0.0, 8)
        assert sorted([c, a, b], key=lambda r: r.sort_key) == [b, a, c]


class TestStates:
    def test_kbm_state_round_trip(self) -> None:
        z = KbmState(x=1.0, y=-2.0, theta=0.3, v=4.0)
        assert KbmState.from_array(z.as_array()) == z

    def test_initial_state_default_curvature(self) -> None:
        assert InitialState(v0=3.0).kappa0 == 0.0


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class TestErrors:
    def test_config_error_names_field(self) -> None:
        err = ConfigError("n_int", "zero substeps")
        assert err.field == "n_int"
        assert "n_int" in str(err)
        assert isinstance(err, LiftError)
        assert isinstance(err, ValueError)

    def test_rollout_error_location(self) -> None:
        assert "step 3, substep 1" in str(RolloutError("bad pose", step=3, substep=1))
        assert str(RolloutError("bad state", step=2)).endswith("at step 2")

    def test_training_diverged_carries_diagnostics(self) -> None:
        err = TrainingDivergedError("diverged", {"loss": float("nan")})
        assert "loss" in err.diagnostics
        assert isinstance(err, RuntimeError)
