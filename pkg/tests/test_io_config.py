import json
import math
from pathlib import Path

import numpy as np
import pytest

from hybridcrane import io
from hybridcrane.config import (Scenario, SchemaError, fixture_path, load_params,
                                load_scenario, params_from_dict, params_to_dict)
from hybridcrane.core import CraneState
from hybridcrane.records import RecordKind
from hybridcrane.reference import lab_params
from hybridcrane.sim.cases import case1, case2
from hybridcrane.sim.hybrid import SimConfig, integrate
from hybridcrane.synth import ExperimentSpec, run_experiment

GOLDEN = Path(__file__).parent / "golden" / "scenario_defaults.json"


def test_scenario_defaults_match_golden_file():
    sc = Scenario.from_dict({"params": {}, "initial_state": {}})
    assert sc.to_dict() == json.loads(GOLDEN.read_text())


def test_scenario_round_trip_is_stable():
    doc = json.loads(fixture_path("case1").read_text())
    again = Scenario.from_dict(doc).to_dict()
    assert again == doc
    assert Scenario.from_dict(again).to_dict() == again


def test_bundled_cases_match_code():
    for name, case in (("case1", case1()), ("case2", case2())):
        sc = load_scenario(fixture_path(name))
        assert sc.params == case.params
        assert sc.initial_state == case.state
        assert sc.sim == case.config


def test_table_fixture_equals_reference_params():
    assert load_params(fixture_path("table3_params")) == lab_params()


def test_voltage_units_scaled_by_gain():
    d = params_to_dict(lab_params(), "V")
    assert d["coulomb_units"] == "V"
    assert d["friction_x"]["C_pos"]["coeffs"][0] == pytest.approx(2.63)
    back = params_from_dict(d)
    assert back.friction_x.C_pos(0.1) == pytest.approx(lab_params().friction_x.C_pos(0.1))


@pytest.mark.parametrize("doc", [
    {"params": {"m_q": 1.0}, "initial_state": {}},
    {"params": {}, "initial_state": {"gamma": 0.0}},
    {"params": {}, "initial_state": {}, "sim": {"solver": "rk4"}},
    {"params": {}, "initial_state": {}, "extra": 1},
    {"params": {"coulomb_units": "kg"}, "initial_state": {}},
    {"params": {"m_t": -1.0}, "initial_state": {}},
    {"params": {}},
])
def test_invalid_scenarios_rejected(doc):
    with pytest.raises(SchemaError):
        Scenario.from_dict(doc)


def test_incomplete_estimate_refused(tmp_path):
    p = tmp_path / "est.json"
    p.write_text(json.dumps({"incomplete": True, "params": {"K_l": 8.8}}))
    with pytest.raises(SchemaError):
        load_params(p)


def test_fixture_path_unknown():
    assert fixture_path("nope") is None
    assert fixture_path("../etc/passwd") is None


# --- CSV ------------------------------------------------------------------------------

def test_trajectory_csv_round_trip_is_lossless(tmp_path):
    c = case1(t_end=0.5)
    tr = integrate(c.state, c.params, c.config)
    path = tmp_path / "traj.csv"
    io.write_trajectory(path, tr)
    cols = io.read_trajectory(path)
    assert np.array_equal(cols["t"], tr.t)
    for i, name in enumerate(io.TRAJECTORY_HEADER[1:11]):
        assert np.array_equal(cols[name], tr.states[:, i])
    assert np.array_equal(cols["q_y"], tr.modes[:, 1])
    text = path.read_bytes()
    assert b"\r" not in text and text.endswith(b"\n")
    assert text.splitlines()[0].decode() == ",".join(io.TRAJECTORY_HEADER)


def test_fmt_round_trips_awkward_values():
    for v in (0.1, 1 / 3, 2.6300000000000003, 1e-300, -5e-324, 12345678901234567.0):
        assert float(io.fmt(v)) == v
    assert io.fmt(3) == "3"


def test_trajectory_reader_checks_invariants(tmp_path):
    bad = tmp_path / "bad.csv"
    row = ["0"] * len(io.TRAJECTORY_HEADER)
    row[11] = "4"
    bad.write_text(",".join(io.TRAJECTORY_HEADER) + "\n" + ",".join(row) + "\n")
    with pytest.raises(io.CsvFormatError):
        io.read_trajectory(bad)
    bad.write_text(",".join(io.TRAJECTORY_HEADER) + "\n" + ",".join(["0"] * 11 + ["2"] * 3 +
                                                                     ["0"] * 3) * 2)
    with pytest.raises(io.CsvFormatError):
        io.read_trajectory(bad)
    bad.write_text("t,x\n0,abc\n")
    with pytest.raises(io.CsvFormatError):
        io.read_table(bad)


def test_dataset_round_trip(tmp_path):
    spec = ExperimentSpec("swing", RecordKind.FREE_SWING, m_p=0.457, duration=1.0,
                          initial={"L": 0.5, "alpha": math.pi / 2 + 0.2},
                          locked=("x", "y", "l"))
    rec = run_experiment(spec, lab_params())
    rows = [(0.01, 0.01, "x", 1, 2.63), (0.01, 0.01, "y", -1, 3.37)]
    io.write_dataset(tmp_path, [rec], rows, {"seed": 0})
    recs, rows2, manifest = io.read_dataset(tmp_path)
    assert manifest["seed"] == 0
    assert rows2 == rows
    assert recs[0].kind == RecordKind.FREE_SWING and recs[0].m_p == 0.457
    assert np.array_equal(recs[0].t, rec.t)
    assert np.array_equal(recs[0]["alpha"], rec["alpha"])


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "out.csv"
    target.write_text("old\n")

    class Boom:
        def __iter__(self):
            raise RuntimeError("disk full")

    with pytest.raises(RuntimeError):
        io.write_table(target, ["a"], Boom())
    assert target.read_text() == "old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]


def test_experiment_spec_round_trip():
    s = ExperimentSpec("r", RecordKind.QUASISTATIC_RAMP, duration=3.0, axis="l", direction=1)
    assert ExperimentSpec.from_dict(json.loads(json.dumps(s.to_dict()))) == s
    with pytest.raises(ValueError):
        ExperimentSpec.from_dict({"name": "r", "kind": "NOPE"})


def test_state_defaults():
    s = CraneState()
    assert s.L > 0 and s.alpha == pytest.approx(math.pi / 2)
    cfg = SimConfig()
    assert cfg.rel_tol == 1e-8 and cfg.model == "hybrid"
