"""Text formats for matrices, trajectories and twin reports.

Serializers return strings; the ``write_*`` helpers store them atomically.
Floats are written with 17 significant digits so values survive a round trip.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Any, Literal, Sequence

from qsp.cubic import CubicMatrix
from qsp.defaults import CSV_FLOAT_FORMAT
from qsp.errors import DomainError
from qsp.evolution import Trajectory
from qsp.twins import TwinReport
from shared.run_context import dumps_report, write_text_atomic

MatrixFormat = Literal["json", "text"]


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return CSV_FLOAT_FORMAT % value


# ---------------------------------------------------------------------------
# Cubic matrices
# ---------------------------------------------------------------------------


def cubic_to_json(q: CubicMatrix) -> dict[str, Any]:
    """``{"m": m, "entries": [...]}`` in the flat ``i*m*m + j*m + k`` order."""
    return {"m": q.m, "entries": q.flat()}


def cubic_from_json(data: Any) -> CubicMatrix:
    if not isinstance(data, dict) or "m" not in data or "entries" not in data:
        raise DomainError('matrix JSON needs the keys "m" and "entries"')
    m, entries = data["m"], data["entries"]
    if not isinstance(m, int) or isinstance(m, bool):
        raise DomainError(f'"m" must be an integer, got {m!r}')
    if not isinstance(entries, list):
        raise DomainError('"entries" must be a list')
    return CubicMatrix(entries, m=m)


def cubic_to_text(q: CubicMatrix) -> str:
    """``m`` on the first line, then one line of ``m`` numbers per ``(i, j)``."""
    lines = [str(q.m)]
    for row in q.array.reshape(q.m * q.m, q.m).tolist():
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def cubic_from_text(text: str) -> CubicMatrix:
    tokens = text.split()
    if not tokens:
        raise DomainError("empty matrix text")
    try:
        m = int(tokens[0])
        values = [float(tok) for tok in tokens[1:]]
    except ValueError as exc:
        raise DomainError(f"malformed matrix text: {exc}") from exc
    return CubicMatrix(values, m=m)


def dumps_matrix(q: CubicMatrix, fmt: MatrixFormat = "json") -> str:
    if fmt == "json":
        return json.dumps(cubic_to_json(q), sort_keys=True) + "\n"
    if fmt == "text":
        return cubic_to_text(q)
    raise DomainError(f"unknown matrix format {fmt!r}")


def loads_matrix(text: str, fmt: MatrixFormat = "json") -> CubicMatrix:
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"invalid matrix JSON: {exc}") from exc
        return cubic_from_json(data)
    if fmt == "text":
        return cubic_from_text(text)
    raise DomainError(f"unknown matrix format {fmt!r}")


def write_matrix(path: str, q: CubicMatrix, fmt: MatrixFormat = "json") -> str:
    return write_text_atomic(path, dumps_matrix(q, fmt))


def read_matrix(path: str, fmt: MatrixFormat = "json") -> CubicMatrix:
    with open(path, encoding="utf-8") as fh:
        return loads_matrix(fh.read(), fmt)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


def trajectory_csv(traj: Trajectory) -> str:
    """Header ``t,x0,...,x{m-1}``, one row per output time."""
    m = traj.points[0].m if traj.points else 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", *(f"x{i}" for i in range(m))])
    for row in traj.rows():
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_trajectory_csv(path: str, traj: Trajectory) -> str:
    return write_text_atomic(path, trajectory_csv(traj))


# ---------------------------------------------------------------------------
# Twin reports
# ---------------------------------------------------------------------------

TWIN_CSV_FIELDS = (
    "s", "t", "p_ff", "p_mixed", "p_mm",
    "limit_ff", "limit_mixed", "limit_mm", "limit_status",
)


def twin_reports_csv(reports: Sequence[TwinReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TWIN_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({
            "s": _fmt(r.s),
            "t": _fmt(r.t),
            "p_ff": _fmt(r.female_female),
            "p_mixed": _fmt(r.mixed),
            "p_mm": _fmt(r.male_male),
            "limit_ff": _fmt(r.limit_female_female),
            "limit_mixed": _fmt(r.limit_mixed),
            "limit_mm": _fmt(r.limit_male_male),
            "limit_status": r.limit_status,
        })
    return buf.getvalue()


def twin_reports_json(reports: Sequence[TwinReport]) -> str:
    return dumps_report([r.to_dict() for r in reports])


def write_twin_reports(path: str, reports: Sequence[TwinReport]) -> str:
    """CSV when *path* ends in ``.csv``, JSON records otherwise."""
    text = twin_reports_csv(reports) if path.endswith(".csv") else twin_reports_json(reports)
    return write_text_atomic(path, text)
