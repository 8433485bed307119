import csv
import json

import numpy as np
import pytest

from leadppc import cli
from leadppc.scenario import (
    ParseError,
    RunSummary,
    UnknownPreset,
    ValidationError,
    dump_scenario,
    emit,
    exit_code,
    load_scenario,
    preset,
    preset_names,
    run,
    trace_rows,
)
from leadppc.sim import Mode

STAR_DOC = {
    "name": "star11",
    "n": 11,
    "edges": [[i, 11] for i in range(1, 11)],
    "leaders": [11],
    "perf": {"rho0": 5.0, "rho_inf": 0.1, "l": 1.0, "M": 1.0},
    "gains": [1.0] * 10,
    "xbar0": [4, 3, -2, -3, 4.9, 1, 4.7, -4, 1, 4.8],
}


def short(sc, **kw):
    return sc.with_(dt=kw.pop("dt", 0.01), t_end=kw.pop("t_end", 1.0), **kw)


def test_load_star_document():
    sc = load_scenario(json.dumps(STAR_DOC))
    assert sc.n == 11 and sc.mode is Mode.LEADER_PPC
    assert sc.xbar0 == (4, 3, -2, -3, 4.9, 1, 4.7, -4, 1, 4.8)
    assert sc == preset("star11")
    x0 = sc.x0()
    assert x0[-1] == 0 and np.allclose(x0[:-1], sc.xbar0)


@pytest.mark.parametrize(
    "patch, exc",
    [
        ({"xbar0": [4, 3, -2, -3, 5.1, 1, 4.7, -4, 1, 4.8]}, ValidationError),
        ({"gains": [1.0] * 9 + [0.0]}, ValidationError),
        ({"gains": [1.0] * 9}, ValidationError),
        ({"edges": [[i, 11] for i in range(1, 10)] + [[1, 2]]}, ValidationError),
        ({"leaders": [1]}, ValidationError),
        ({"perf": {"rho0": 5.0, "rho_inf": 0.1, "l": 1.0}}, ParseError),
        ({"perf": {"rho0": 0.1, "rho_inf": 5.0, "l": 1.0, "M": 1.0}}, ValidationError),
        ({"mode": "bogus"}, ValidationError),
        ({"edges": [[1]] * 10}, ParseError),
    ],
)
def test_invalid_documents(patch, exc):
    with pytest.raises(exc):
        load_scenario(json.dumps({**STAR_DOC, **patch}))


def test_parse_errors():
    with pytest.raises(ParseError):
        load_scenario("{not json")
    with pytest.raises(ParseError):
        load_scenario("[1, 2]")
    doc = dict(STAR_DOC)
    del doc["xbar0"]
    with pytest.raises(ParseError):
        load_scenario(json.dumps(doc))


@pytest.mark.parametrize("name", ["tree6", "chain5_f2", "chain5_f3", "star11"])
def test_document_round_trip(name):
    sc = preset(name, mode=Mode.NO_CONTROL)
    assert load_scenario(dump_scenario(sc)) == sc


def test_presets():
    assert preset_names() == ["tree6", "chain5_f2", "chain5_f3", "star11"]
    assert preset("chain5_f3", "B").gains == (1, 1, 100, 1)
    assert preset("chain5_f3", "A").gains == (1, 1, 10, 1)
    assert preset("chain5_f2", "A").gains == (1, 10, 1, 1)
    assert preset("chain5_f2").gains == (1, 200, 1, 1)
    assert preset("chain5_f2").xbar0 == (4.8, 3, -2, 1)
    assert preset("chain5_f2").topology.leaders == {3, 4, 5}
    assert preset("tree6").xbar0 == (4.6, 4.9, 4.5, 4.7, 4.5)
    assert preset("tree6").inferred_topology
    assert preset("star11").perf.l == 1
    assert preset("chain5_f2").perf.l == 2
    for name in preset_names():
        sc = preset(name)
        assert (sc.perf.rho0, sc.perf.rho_inf, sc.perf.M) == (5.0, 0.1, 1.0)
    with pytest.raises(UnknownPreset):
        preset("ring7")
    with pytest.raises(UnknownPreset):
        preset("star11", "Z")


def test_consensus_start_emits_zero_relative_states(tmp_path):
    sc = short(preset("star11"), xbar0=(0.0,) * 10)
    trace, summary = run(sc)
    (csv_path, _) = emit(trace, summary, "csv", tmp_path)
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == int(1.0 / 0.01) + 1
    for k in range(1, 11):
        assert all(float(r[f"xbar_{k}"]) == 0.0 for r in rows)


def test_csv_layout_and_precision(tmp_path):
    sc = short(preset("chain5_f3"), t_end=0.5)
    trace, summary = run(sc)
    csv_path, _ = emit(trace, summary, "csv", tmp_path)
    header, first = csv_path.read_text().splitlines()[:2]
    assert header == "t,x_1,x_2,x_3,x_4,x_5,xbar_1,xbar_2,xbar_3,xbar_4,rho,neg_rho,V,viol_flag"
    assert first.split(",")[-4:-2] == ["5", "-5"]
    values = [float(v) for v in csv_path.read_text().splitlines()[2].split(",")[1:6]]
    assert np.allclose(values, trace.x[1], rtol=1e-14)
    assert len(csv_path.read_text().splitlines()) == 51 + 1


def test_viol_flag_column(tmp_path):
    trace, summary = run(short(preset("chain5_f2", mode=Mode.NO_CONTROL), t_end=3.0))
    rows = list(trace_rows(trace))[1:]
    flagged = sum(r[-1] == "1" for r in rows)
    assert flagged == len({v.time for v in trace.violations}) > 0


def test_json_emit(tmp_path):
    trace, summary = run(short(preset("star11")))
    (path,) = emit(trace, summary, "json", tmp_path)
    doc = json.loads(path.read_text())
    assert doc["summary"]["name"] == "star11"
    assert len(doc["trace"]["t"]) == trace.times.size
    with pytest.raises(ValueError):
        emit(trace, summary, "xml", tmp_path)


def test_emit_io_error(tmp_path):
    trace, summary = run(short(preset("star11")))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit(trace, summary, "csv", blocker / "sub")


def test_summary_round_trip():
    _, summary = run(short(preset("chain5_f2", "A")))
    assert RunSummary.from_json(summary.to_json()) == summary


def test_deterministic_replay(tmp_path):
    sc = short(preset("chain5_f2"), t_end=2.0)
    a = emit(*run(sc), "csv", tmp_path / "a")[0].read_bytes()
    b = emit(*run(sc), "csv", tmp_path / "b")[0].read_bytes()
    assert a == b


def test_chain5_f2_final_relative_states_small(tmp_path):
    csv_path, _ = emit(*run(preset("chain5_f2")), "csv", tmp_path)
    last = list(csv.DictReader(open(csv_path)))[-1]
    assert all(abs(float(last[f"xbar_{k}"])) < 0.1 for k in range(1, 5))


def test_exit_codes():
    _, ok = run(short(preset("star11")))
    assert exit_code(ok) == 0
    _, bad = run(short(preset("star11", mode=Mode.NO_CONTROL), t_end=3.0))
    assert bad.violation_count > 0 and exit_code(bad) == 2


# -- command line ---------------------------------------------------------------

def test_cli_presets(capsys):
    assert cli.main(["presets"]) == 0
    assert "chain5_f3" in capsys.readouterr().out


def test_cli_certify(capsys, tmp_path):
    doc = tmp_path / "s.json"
    doc.write_text(json.dumps(STAR_DOC))
    assert cli.main(["certify", str(doc)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["approved"] and out["method"] == "star_special"
    assert cli.main(["certify", "--preset", "tree6"]) == 0


def test_cli_simulate_writes_outputs(capsys, tmp_path):
    code = cli.main(["simulate", "--preset", "star11", "--dt", "0.01", "--t-end", "1",
                     "--out", str(tmp_path), "--format", "csv"])
    assert code == 0
    assert (tmp_path / "star11" / "star11.csv").exists()
    assert json.loads(capsys.readouterr().out)["violation_count"] == 0


def test_cli_violations_exit_two(capsys):
    code = cli.main(["simulate", "--preset", "chain5_f2", "--mode", "no_control", "--t-end", "3"])
    assert code == 2


def test_cli_parallel_jobs(capsys, tmp_path):
    code = cli.main(["simulate", "--preset", "star11", "--preset", "chain5_f3", "--dt", "0.01",
                     "--t-end", "1", "--jobs", "2", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "chain5_f3" / "chain5_f3.csv").exists()


def test_cli_errors(capsys, tmp_path):
    assert cli.main(["simulate", "--preset", "nope"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**STAR_DOC, "xbar0": [9.0] * 10}))
    assert cli.main(["certify", str(bad)]) == 1
    assert cli.main(["certify", str(tmp_path / "missing.json")]) == 1
