import json
import math

import numpy as np
import pytest

from bloch_pulse.cli import (
    COMPARE_COLUMNS,
    RunConfig,
    UsageError,
    compare_rows,
    default_seed,
    load_schedule,
    main,
    parse_vector,
)
from bloch_pulse.formats import PULSE_HEADER, SchemaError, dumps_csv, encode, loads

from conftest import X, Z


def synth(tmp_path, name, *args):
    path = tmp_path / name
    assert main(["synth", *args, "-o", str(path)]) == 0
    return path


def read_json(path):
    return json.loads(path.read_text())


# ---------------------------------------------------------------- parsing


def test_parse_vector_normalizes_with_warning(capsys):
    warnings = []
    v = parse_vector("0,0,2", "s_i", warnings)
    np.testing.assert_array_equal(v, Z)
    assert warnings and "normalized" in warnings[0]
    assert "warning" in capsys.readouterr().err


def test_parse_vector_quiet_near_unit():
    warnings = []
    parse_vector("0,0,1.0000000001", "s_i", warnings)
    assert warnings == []


@pytest.mark.parametrize("text", ["1,2", "a,b,c", "nan,0,1", "inf,0,0", "0,0,0"])
def test_parse_vector_rejects(text):
    with pytest.raises(UsageError):
        parse_vector(text)


def test_run_config_rejects_coarse_grid():
    with pytest.raises(UsageError):
        RunConfig(s_i=Z, s_f=X, grid_n=50)


def test_seed_from_environment(monkeypatch):
    monkeypatch.delenv("BLOCH_PULSE_SEED", raising=False)
    assert default_seed() == 42
    monkeypatch.setenv("BLOCH_PULSE_SEED", "9")
    assert default_seed() == 9
    monkeypatch.setenv("BLOCH_PULSE_SEED", "x")
    with pytest.raises(UsageError):
        default_seed()


# ---------------------------------------------------------------- synth


def test_synth_b1_quarter_turn(tmp_path):
    doc = read_json(synth(tmp_path, "p.json", "--si", "0,0,1", "--sf", "1,0,0", "--family", "b1", "--n", "0"))
    b = np.array(doc["samples"])[:, 1:]
    np.testing.assert_allclose(b, np.tile([0.0, math.pi / 2, 0.0], (len(b), 1)), atol=1e-15)
    assert doc["meta"]["spec"]["family"] == "b1"
    assert doc["meta"]["warnings"] == []
    assert list(doc) == ["meta", "samples"]


def test_synth_b3_reports_angle(tmp_path):
    doc = read_json(synth(tmp_path, "p.json", "--family", "b3", "--omega", "5"))
    assert doc["meta"]["integral_along_axis"] == pytest.approx(math.pi / 2, rel=1e-10)
    assert doc["meta"]["target_angle"] == pytest.approx(math.pi / 2, rel=1e-15)


def test_synth_antipodal_warns(tmp_path, capsys):
    doc = read_json(synth(tmp_path, "p.json", "--si", "0,0,1", "--sf", "0,0,-1", "--family", "b1"))
    assert any("fallback" in w for w in doc["meta"]["warnings"])
    b = np.array(doc["samples"])[:, 1:]
    np.testing.assert_allclose(np.linalg.norm(b, axis=1), math.pi, rtol=1e-14)
    assert "warning" in capsys.readouterr().err


def test_synth_csv_to_stdout(capsys):
    assert main(["synth", "--format", "csv", "--grid-n", "100"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "t,bx,by,bz" and len(out) == 102


def test_synth_invalid_family_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--family", "b9"])
    assert exc.value.code == 2


@pytest.mark.parametrize("args", [["--grid-n", "10"], ["--omega", "-1"], ["--si", "1,2"], ["--family", "cn", "--n", "1"]])
def test_synth_bad_config_exits_2(args, capsys):
    assert main(["synth", *args]) == 2
    assert "error" in capsys.readouterr().err


# ---------------------------------------------------------------- simulate


def test_simulate_b1_quarter_turn(tmp_path, capsys):
    pulse = synth(tmp_path, "p.json", "--family", "b1")
    out = tmp_path / "s.json"
    assert main(["simulate", str(pulse), "-o", str(out)]) == 0
    doc = read_json(out)
    assert doc["meta"]["final_error"] <= 1e-8
    assert doc["meta"]["closed_form_field"] is True
    np.testing.assert_allclose(doc["samples"][-1][1:], X, atol=1e-8)
    assert "final_error=" in capsys.readouterr().out


def test_simulate_zero_pulse_fails(tmp_path, capsys):
    t = np.linspace(0, 1, 101)
    path = tmp_path / "zero.csv"
    path.write_text(dumps_csv(PULSE_HEADER, t, np.zeros((101, 3))))
    code = main(["simulate", str(path), "--si", "0,0,1", "--sf", "1,0,0", "--format", "csv", "-o", str(tmp_path / "s.csv")])
    assert code == 1
    line = capsys.readouterr().out
    err = float(line.split("final_error=")[1].split()[0])
    assert err == pytest.approx(math.sqrt(2), rel=1e-15)


def test_simulate_b2_second_branch_from_csv(tmp_path, capsys):
    pulse = synth(tmp_path, "p.csv", "--family", "b2", "--n", "1", "--format", "csv")
    code = main(["simulate", str(pulse), "--si", "0,0,1", "--sf", "1,0,0"])
    assert code == 0
    captured = capsys.readouterr()
    err = float(captured.err.split("final_error=")[1].split()[0])
    assert err <= 1e-6
    assert json.loads(captured.out)["meta"]["closed_form_field"] is False


def test_simulate_csv_needs_endpoints(tmp_path):
    pulse = synth(tmp_path, "p.csv", "--format", "csv")
    assert main(["simulate", str(pulse)]) == 2


@pytest.mark.parametrize(
    "text",
    [
        '{"samples": [[0, 0, 0, 0]]}',
        '{"meta": {"spec": null, "version": "1", "seed": 1}, "samples": [[0,0,0,0],[0.5,0,0,0],[1,0,0,0]]}',
        '{"meta": {"spec": null, "version": "1", "seed": 1, "warnings": []}, "samples": [[0,0,0],[1,0,0]]}',
        "t,x,y,z\n0,0,0,0\n",
        "t,bx,by,bz\n0,0,0,0\n0.3,0,0,0\n1,0,0,0\n",
        "{not json",
    ],
)
def test_simulate_schema_mismatch_exits_2(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert main(["simulate", str(path), "--si", "0,0,1", "--sf", "1,0,0"]) == 2


def test_simulate_missing_file_exits_2(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.json")]) == 2


def test_load_schedule_ignores_tampered_samples(tmp_path):
    text = synth(tmp_path, "p.json", "--family", "b2").read_text()
    doc = json.loads(text)
    doc["samples"][5][2] += 1e-3
    _, sched = load_schedule(json.dumps(doc))
    assert sched.field is None


@pytest.mark.parametrize(
    "family, extra",
    [("b1", []), ("b2", []), ("b3", ["--omega", "0.5"]), ("b3", ["--omega", "50"]), ("cn", ["--mu", "0.5"]), ("cn", ["--mu", "1"])],
)
@pytest.mark.parametrize("theta", [math.pi / 4, math.pi / 2, 2.5])
@pytest.mark.parametrize("n", [0, 1])
@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_round_trip_all_families(tmp_path, family, extra, theta, n, fmt):
    if family == "cn" and n:
        return
    sf = f"{math.sin(theta)!r},0,{math.cos(theta)!r}"
    pulse = synth(tmp_path, f"p.{fmt}", "--family", family, "--n", str(n), "--sf", sf, "--format", fmt, *extra)
    out = tmp_path / "s.json"
    assert main(["simulate", str(pulse), "--si", "0,0,1", "--sf", sf, "-o", str(out)]) == 0
    assert read_json(out)["meta"]["final_error"] <= 1e-5


# ---------------------------------------------------------------- verify


@pytest.mark.parametrize("criterion", ["fluence", "rate", "mixed"])
def test_verify_passes(tmp_path, criterion):
    out = tmp_path / "v.json"
    assert main(["verify", "--criterion", criterion, "--trials", "200", "-o", str(out)]) == 0
    doc = read_json(out)
    assert doc["verdict"]["passed"] is True
    assert doc["verdict"]["worst_violation"] <= doc["verdict"]["tolerance"]
    assert doc["meta"]["seed"] == 42


def test_verify_uses_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOCH_PULSE_SEED", "5")
    out = tmp_path / "v.json"
    assert main(["verify", "--trials", "10", "-o", str(out)]) == 0
    assert read_json(out)["verdict"]["seed"] == 5
    assert main(["verify", "--trials", "10", "--seed", "6", "-o", str(out)]) == 0
    assert read_json(out)["verdict"]["seed"] == 6


def test_verify_rejects_antipodal():
    assert main(["verify", "--sf", "0,0,-1"]) == 2
    assert main(["verify", "--trials", "0"]) == 2


# ---------------------------------------------------------------- compare


@pytest.fixture(scope="module")
def default_rows():
    return compare_rows([math.pi / 4, math.pi / 2, 2.5], [0, 1], [0.5, 5.0, 50.0], [0.5, 1.0])


def test_compare_constant_norm_fluence(default_rows):
    for r in default_rows:
        if r["family"] == "cn":
            assert r["fluence"] == pytest.approx((1 + r["mu"] ** 2) * r["theta"] ** 2, rel=1e-8)
            assert r["fluence_excess_over_b1"] == pytest.approx(r["mu"] ** 2 * r["theta"] ** 2, rel=1e-7)


def test_compare_sine_ratio(default_rows):
    sines = [r for r in default_rows if r["family"] == "sine"]
    assert len(sines) == 6
    for r in sines:
        assert r["rate_ratio_to_b2"] == pytest.approx(1.0147, abs=1e-4)


def test_compare_branch_dominance(default_rows):
    key = lambda r: (r["theta"], r["family"], r["omega"] if not math.isnan(r["omega"]) else None)
    zero = {key(r): r for r in default_rows if r["n"] == 0 and r["family"] != "cn"}
    for r in default_rows:
        if r["n"] == 1:
            base = zero[key(r)]
            for col in ("fluence", "rate_cost", "mixed_cost"):
                assert r[col] >= base[col]
            assert r["fluence"] > base["fluence"]


def test_compare_all_rows_arrive(default_rows):
    assert len(default_rows) == 3 * (2 * 6 + 2)
    assert max(r["arrival_error"] for r in default_rows) <= 1e-5


@pytest.mark.parametrize("fmt", ["csv", "markdown", "json"])
def test_compare_formats(tmp_path, fmt):
    out = tmp_path / "c.txt"
    assert main(["compare", "--thetas", "45", "--degrees", "--ns", "0", "--omegas", "5", "--mus", "1", "--format", fmt, "-o", str(out)]) == 0
    text = out.read_text()
    if fmt == "json":
        doc = json.loads(text)
        assert doc["columns"] == list(COMPARE_COLUMNS) and len(doc["rows"]) == 5
        assert doc["rows"][0][0] == pytest.approx(math.pi / 4, rel=1e-15)
    elif fmt == "csv":
        lines = text.splitlines()
        assert lines[0] == ",".join(COMPARE_COLUMNS) and len(lines) == 6
    else:
        assert text.startswith("| theta")


@pytest.mark.parametrize("args", [["--thetas", "4"], ["--thetas", "x"], ["--omegas", "-1"], ["--grid-n", "10"], ["--ns", "a"]])
def test_compare_bad_ranges(args):
    assert main(["compare", *args]) == 2


# ---------------------------------------------------------------- determinism and formats


@pytest.mark.parametrize("cmd", [["synth", "--family", "b3"], ["synth", "--family", "cn", "--format", "csv"], ["verify", "--criterion", "rate", "--trials", "50"]])
def test_byte_identical_outputs(tmp_path, cmd):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([*cmd, "-o", str(a)]) == 0
    assert main([*cmd, "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_encode_is_deterministic_and_exact():
    x = 0.1 + 0.2
    text = encode({"b": [x, float("nan")], "a": {"k": True, "n": None}})
    assert text.index('"b"') < text.index('"a"')
    doc = json.loads(text)
    assert doc["b"][0] == x and doc["b"][1] is None and doc["a"]["k"] is True
    with pytest.raises(TypeError):
        encode(object())


def test_loads_csv_round_trip():
    t = np.linspace(0, 1, 5)
    v = np.random.default_rng(0).standard_normal((5, 3))
    meta, t2, v2 = loads(dumps_csv(PULSE_HEADER, t, v), PULSE_HEADER)
    assert meta == {}
    np.testing.assert_array_equal(t2, t)
    np.testing.assert_array_equal(v2, v)


def test_loads_rejects_non_finite():
    with pytest.raises(SchemaError):
        loads("t,bx,by,bz\n0,0,0,0\n0.5,nan,0,0\n1,0,0,0\n", PULSE_HEADER)


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "bloch_pulse", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
