"""CSV and manifest emission.

Floats are written with ``repr`` (shortest string that round-trips exactly),
so re-reading a CSV with ``float()`` restores every value bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .pipeline import FLAG_KEYS, RunConfig
from .systemfile import system_to_dict


class OutputError(OSError):
    pass


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if hasattr(v, "item"):  # numpy scalar
        v = v.item()
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if hasattr(v, "value") and not isinstance(v, (int, float, str)):  # enums
        return v.value
    return v


def config_to_dict(config: RunConfig) -> dict:
    f, c, r, i = config.field, config.coupling, config.rates, config.integrator
    return {
        "system": system_to_dict(config.system),
        "chi_rad": config.chi,
        "field": {"b0_ut": f.b0_ut, "theta_rad": f.theta, "phi_rad": f.phi, "convention": f.convention.value},
        "coupling": {
            "j_mt": c.j_mt,
            "d_mt": c.d_mt,
            "dipolar_axis": list(c.dipolar_axis),
            "dipolar_scale": c.dipolar_scale,
        },
        "rates": asdict(r),
        "integrator": {k: _jsonable(v) for k, v in asdict(i).items()},
        "renormalize_before_entropy": config.renormalize_before_entropy,
        "paper_literal_bracket": config.paper_literal_bracket,
        "max_dim": config.max_dim,
    }


def emit_csv(rows: Iterable[dict], path: str | Path, columns: Sequence[str]) -> Path:
    """Write ``rows`` with a fixed column order; an empty iterable gives a header-only file."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row.get(c, "")) for c in columns])
    except OSError as exc:
        raise OutputError(f"cannot write CSV {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return list(reader.fieldnames or []), list(reader)


def write_manifest(path: str | Path, doc: dict) -> Path:
    path = Path(path)
    body = {"package": "chiralrp", "version": __version__, **doc}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write manifest {path}: {exc}") from exc
    return path


def record_columns(records, include_wall_time: bool = False, axes=(), outputs=()) -> list[str]:
    """Axes first, outputs next, flags and the error text last.

    ``axes``/``outputs`` name the columns when ``records`` is empty.
    """
    if records:
        axes, outputs = records[0].coords, records[0].outputs
    cols = list(axes) + list(outputs)
    if include_wall_time:
        cols.append("wall_time_s")
    return cols + list(FLAG_KEYS) + ["error"]


def record_rows(records, include_wall_time: bool = False) -> list[dict]:
    rows = []
    for rec in records:
        row = {**rec.coords, **rec.outputs}
        if include_wall_time:
            row["wall_time_s"] = rec.wall_time
        row.update({k: bool(rec.flags.get(k, False)) for k in FLAG_KEYS})
        row["error"] = rec.error
        rows.append(row)
    return rows


def emit_records(records, path: str | Path, include_wall_time: bool = False, axes=(), outputs=()) -> Path:
    columns = record_columns(records, include_wall_time, axes, outputs)
    return emit_csv(record_rows(records, include_wall_time), path, columns)
