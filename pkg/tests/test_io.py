import json
import math

import numpy as np
import pytest

from chnsdbc import io as cio
from chnsdbc.config import parse_config_text
from chnsdbc.diagnostics import EnergyReport
from chnsdbc.solver import run


def test_snapshot_round_trip_is_bitwise(tmp_path, state):
    files = cio.write_snapshot(tmp_path, 7, state)
    assert len(files) == len(cio.FIELDS)
    back = cio.read_snapshot(tmp_path, 7, state.grid)
    assert back.bitwise_equal(state)
    assert cio.snapshot_indices(tmp_path) == [7]


def test_sidecar_fields(tmp_path, state):
    cio.write_snapshot(tmp_path, 0, state.with_(t=0.25))
    arr, meta = cio.read_field(tmp_path / "snapshots" / "000000_uy.f8")
    assert set(meta) == {"field", "shape", "stagger", "t", "units", "dtype"}
    assert meta["stagger"] == "y-face" and meta["t"] == 0.25 and meta["dtype"] == "<f8"
    assert tuple(meta["shape"]) == state.uy.shape
    raw = (tmp_path / "snapshots" / "000000_uy.f8").read_bytes()
    assert len(raw) == 8 * state.uy.size


def test_energy_csv_header_order_and_append(tmp_path, state, params, scheme):
    ledger = run(state, params, scheme, 4 * scheme.dt).ledger
    path = tmp_path / "energy.csv"
    cio.write_energy_csv(path, ledger[:2])
    cio.write_energy_csv(path, ledger[2:], append=True)
    header = path.read_text().splitlines()[0].split(",")
    assert tuple(header) == tuple(cio.ENERGY_COLUMNS) and header[0] == "t"
    back = cio.read_energy_csv(path)
    np.testing.assert_array_equal([r.row() for r in back], [r.row() for r in ledger])
    cio.truncate_energy_csv(path, ledger[1].t)
    assert len(cio.read_energy_csv(path)) == 2


def test_energy_csv_rejects_foreign_header(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        cio.read_energy_csv(p)


def test_manifest_hash(tmp_path):
    cfg = parse_config_text("[run]\nseed = 5\n")
    path = cio.write_manifest(tmp_path, cfg, steps=3, snapshots=["a"], complete=False)
    data, back = cio.read_manifest(path)
    assert back == cfg and data["steps"] == 3 and not data["complete"]
    assert {"code_version", "backend", "config_hash"} <= set(data)
    data["config"] = data["config"].replace("seed = 5", "seed = 6")
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError, match="hash"):
        cio.read_manifest(path)


def test_sanitize():
    out = cio.sanitize({"a": np.float64(math.nan), "b": np.arange(2), 3: (np.int64(4), np.bool_(True), math.inf)})
    assert out == {"a": None, "b": [0, 1], "3": [4, True, None]}
    json.dumps(out, allow_nan=False)


def test_energy_report_row_is_fixed_order():
    r = EnergyReport(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    assert list(r.row()[:6]) == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
