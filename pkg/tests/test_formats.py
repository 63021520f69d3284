"""Tests for CSV and JSON file contracts."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from actionlift.core.errors import FormatError
from actionlift.core.types import (
    ErrorRecord,
    ModelKind,
    ProfileRow,
    RawActionSequence,
    Scheme,
    WaypointTrajectory,
)
from actionlift.formats import (
    SWEEP_HEADER,
    parse_actions_csv,
    read_actions_csv,
    read_json,
    records_to_csv,
    waypoints_to_csv,
    write_actions_csv,
    write_json,
    write_loss_curve_csv,
    write_profile_csv,
)


class TestActionsCsv:
    def test_parse(self) -> None:
        seq = parse_actions_csv("k,tau,lat,brake\n1,0.5,-0.2,0\n2,1,0,0.25\n")
        np.testing.assert_array_equal(seq.values, [[0.5, -0.2, 0.0], [1.0, 0.0, 0.25]])

    def test_rows_sorted_by_index(self) -> None:
        seq = parse_actions_csv("k,tau,lat,brake\n2,2,0,0\n1,1,0,0\n")
        assert seq.values[:, 0].tolist() == [1.0, 2.0]

    def test_column_order_free(self) -> None:
        seq = parse_actions_csv("brake,lat,tau,k\n3,2,1,1\n")
        assert seq.values.tolist() == [[1.0, 2.0, 3.0]]

    @pytest.mark.parametrize(
        ("text", "reason"),
        [
            ("k,tau,lat\n1,0,0\n", "missing column"),
            ("k,tau,lat,brake\n1,abc,0,0\n", "line 2"),
            ("k,tau,lat,brake\n1,0,0,0\n1,0,0,0\n", "duplicate"),
            ("k,tau,lat,brake\n", "no steps"),
            ("k,tau,lat,brake\n1,nan,0,0\n", "finite"),
            ("", "missing column"),
        ],
    )
    def test_malformed(self, text: str, reason: str) -> None:
        with pytest.raises(FormatError, match=reason):
            parse_actions_csv(text)

    def test_file_round_trip(self, tmp_path: Path) -> None:
        seq = RawActionSequence.from_rows([[0.1, -0.7, 2.0], [1e-17, 3.0, -1.5]])
        path = write_actions_csv(tmp_path / "nested" / "a.csv", seq)
        np.testing.assert_array_equal(read_actions_csv(path).values, seq.values)


class TestOutputs:
    def test_waypoints_with_headings(self) -> None:
        traj = WaypointTrajectory(
            points=np.array([[5.0, 0.0], [10.0, 0.5]]), headings=np.array([0.0, 0.1])
        )
        assert waypoints_to_csv(traj) == "k,x,y,theta\n1,5.0,0.0,0.0\n2,10.0,0.5,0.1\n"

    def test_waypoints_without_headings(self) -> None:
        traj = WaypointTrajectory(points=np.array([[5.0, 0.0]]), headings=np.array([0.2]))
        assert waypoints_to_csv(traj, with_headings=False) == "k,x,y\n1,5.0,0.0\n"
        assert waypoints_to_csv(traj.without_headings()) == "k,x,y\n1,5.0,0.0\n"

    def test_floats_keep_full_precision(self) -> None:
        traj = WaypointTrajectory(points=np.array([[0.1 + 0.2, 1.0 / 3.0]]))
        assert "0.30000000000000004" in waypoints_to_csv(traj)
        assert "0.3333333333333333" in waypoints_to_csv(traj)

    def test_records(self) -> None:
        record = ErrorRecord(ModelKind.CCPP, Scheme.RK4, 8, 0.5, 5, 1, 0.25, 0.0, 160, 0.01, 0.0)
        lines = records_to_csv([record]).splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert lines[1] == "ccpp,rk4,8,0.5,5,1,0.25,0.0,160"
        yaw = records_to_csv([record], with_yaw=True).splitlines()
        assert yaw[0].endswith(",mean_yaw,std_yaw")
        assert yaw[1].endswith(",0.01,0.0")

    def test_unix_line_endings(self, tmp_path: Path) -> None:
        path = write_profile_csv(tmp_path / "p.csv", [ProfileRow(1, 0.5, 0.1)])
        assert path.read_bytes() == b"k,mean_l1,std_l1\n1,0.5,0.1\n"

    def test_loss_curve_starts_at_zero(self, tmp_path: Path) -> None:
        path = write_loss_curve_csv(tmp_path / "loss.csv", [2.0, 1.5])
        assert path.read_text().splitlines() == ["step,loss", "0,2.0", "1,1.5"]


class TestJson:
    def test_sorted_keys(self, tmp_path: Path) -> None:
        path = write_json(tmp_path / "out.json", {"b": 1, "a": [1.5]})
        assert path.read_text().startswith('{\n  "a"')
        assert read_json(path) == {"a": [1.5], "b": 1}

    def test_malformed(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(FormatError, match="not valid JSON"):
            read_json(path)
