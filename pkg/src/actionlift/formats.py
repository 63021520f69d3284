"""File contracts of the command-line tools.

Action sequences come in as CSV (header ``k,tau,lat,brake``; ``lat`` is the
steering logit for KBM and the sharpness logit for CCPP). Everything written
uses '.' decimals via ``repr`` and '\\n' line endings, so identical results
give identical bytes on every platform.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

from actionlift.core.errors import FormatError
from actionlift.core.types import RawActionSequence

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from actionlift.core.types import ErrorRecord, ProfileRow, WaypointTrajectory

logger = logging.getLogger(__name__)

ACTIONS_HEADER = ("k", "tau", "lat", "brake")
SWEEP_HEADER = ("model", "scheme", "cf", "dt", "n_int", "k", "mean_l1", "std_l1", "rhs_evals")
YAW_COLUMNS = ("mean_yaw", "std_yaw")
PROFILE_HEADER = ("k", "mean_l1", "std_l1")
LOSS_HEADER = ("step", "loss")


def _cell(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def _write(path: str | Path, text: str) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8", newline="")
    return target


# ---------------------------------------------------------------------------
# Inputs
# ---------------------------------------------------------------------------


def parse_actions_csv(text: str) -> RawActionSequence:
    """Parse one action sequence; rows are ordered by their ``k`` column.

    Raises:
        FormatError: On a missing column, a malformed number, duplicate
            indices or an empty table.
    """
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in ACTIONS_HEADER if c not in (reader.fieldnames or [])]
    if missing:
        msg = f"actions CSV is missing column(s) {', '.join(missing)}"
        raise FormatError(msg)

    rows: dict[int, tuple[float, float, float]] = {}
    for line, row in enumerate(reader, start=2):
        try:
            k = int(row["k"])
            values = (float(row["tau"]), float(row["lat"]), float(row["brake"]))
        except (TypeError, ValueError) as exc:
            msg = f"actions CSV line {line}: {exc}"
            raise FormatError(msg) from exc
        if k in rows:
            msg = f"actions CSV line {line}: duplicate step index {k}"
            raise FormatError(msg)
        rows[k] = values

    if not rows:
        msg = "actions CSV contains no steps"
        raise FormatError(msg)
    try:
        return RawActionSequence.from_rows(rows[k] for k in sorted(rows))
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def read_actions_csv(path: str | Path) -> RawActionSequence:
    """Read an action sequence from ``path``."""
    source = Path(path)
    actions = parse_actions_csv(source.read_text(encoding="utf-8"))
    logger.debug("Read %d actions from %s", actions.horizon, source)
    return actions


def write_actions_csv(path: str | Path, actions: RawActionSequence) -> Path:
    rows = ((k + 1, *map(float, row)) for k, row in enumerate(actions.values))
    return _write(path, _render(ACTIONS_HEADER, rows))


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------


def waypoints_to_csv(traj: WaypointTrajectory, with_headings: bool = True) -> str:
    """Render waypoints as ``k,x,y[,theta]`` with 1-based ``k``."""
    include = with_headings and traj.headings is not None
    header = ("k", "x", "y", "theta") if include else ("k", "x", "y")
    rows: list[list[object]] = []
    for i, (x, y) in enumerate(traj.points):
        row: list[object] = [i + 1, float(x), float(y)]
        if include and traj.headings is not None:
            row.append(float(traj.headings[i]))
        rows.append(row)
    return _render(header, rows)


def write_waypoints_csv(
    path: str | Path, traj: WaypointTrajectory, with_headings: bool = True
) -> Path:
    return _write(path, waypoints_to_csv(traj, with_headings))


def records_to_csv(records: Iterable[ErrorRecord], with_yaw: bool = False) -> str:
    """Render sweep records in the given order; yaw columns are appended on request."""
    header = SWEEP_HEADER + YAW_COLUMNS if with_yaw else SWEEP_HEADER
    rows = []
    for record in records:
        values = record.to_dict()
        rows.append([values[column] for column in header])
    return _render(header, rows)


def write_records_csv(
    path: str | Path, records: Iterable[ErrorRecord], with_yaw: bool = False
) -> Path:
    return _write(path, records_to_csv(records, with_yaw))


def write_profile_csv(path: str | Path, rows: Iterable[ProfileRow]) -> Path:
    return _write(path, _render(PROFILE_HEADER, ((r.k, r.mean_l1, r.std_l1) for r in rows)))


def write_loss_curve_csv(path: str | Path, losses: Sequence[float]) -> Path:
    """Write ``step,loss`` rows; step 0 is the loss before the first update."""
    return _write(path, _render(LOSS_HEADER, ((i, float(v)) for i, v in enumerate(losses))))


def write_json(path: str | Path, payload: Any) -> Path:
    """Write ``payload`` as indented JSON with sorted keys."""
    return _write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> Any:
    source = Path(path)
    try:
        return json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        msg = f"{source} is not valid JSON: {exc}"
        raise FormatError(msg) from exc
