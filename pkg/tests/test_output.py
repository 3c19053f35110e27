import json
import math

import numpy as np

from chiralrp.output import (
    config_to_dict,
    emit_csv,
    emit_records,
    format_value,
    read_csv,
    record_columns,
    write_manifest,
)
from chiralrp.pipeline import FLAG_KEYS
from chiralrp.sweep import SweepRecord


def test_format_value():
    assert format_value(True) == "1" and format_value(False) == "0"
    assert format_value(np.float64(0.1)) == "0.1"
    assert format_value(np.int64(3)) == "3"
    assert format_value(math.nan) == "nan"


def test_float_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vals = list(rng.normal(size=50) * 10.0 ** rng.integers(-300, 300, size=50))
    path = emit_csv(({"x": v} for v in vals), tmp_path / "a.csv", ["x"])
    _, rows = read_csv(path)
    assert [float(r["x"]) for r in rows] == vals


def test_header_only(tmp_path):
    path = emit_csv([], tmp_path / "empty.csv", ["a", "b"])
    assert path.read_text() == "a,b\n"
    emit_records([], tmp_path / "rec.csv", axes=("chi",), outputs=("M_G",))
    header = (tmp_path / "rec.csv").read_text().strip().split(",")
    assert header == ["chi", "M_G", *FLAG_KEYS, "error"]


def test_record_columns_order():
    rec = SweepRecord(0, {"k_r": 1.0, "chi": 0.0}, {"M_G": 1.0}, {k: True for k in FLAG_KEYS})
    cols = record_columns([rec], include_wall_time=True)
    assert cols[:4] == ["k_r", "chi", "M_G", "wall_time_s"]
    assert cols[-1] == "error"


def test_manifest(tmp_path, base1):
    path = write_manifest(tmp_path / "m.json", {"config": config_to_dict(base1)})
    doc = json.loads(path.read_text())
    assert doc["package"] == "chiralrp"
    assert doc["config"]["integrator"]["engine"] == "eigenbasis"
    assert doc["config"]["system"]["radicals"][0]["name"] == "donor"
    assert path.read_text() == json.dumps(doc, indent=2, sort_keys=True) + "\n"
