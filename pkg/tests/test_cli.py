import json
from fractions import Fraction

import pytest

from nmrcartan import cartan, cli, qmat, serialize


def run(*argv):
    return cli.main([str(a) for a in argv])


def load(path):
    return serialize.strip_timestamps(json.loads(path.read_text()))


def test_no_command_is_usage_error():
    assert run() == 2


def test_unknown_flag_is_usage_error(capsys):
    assert run("synth", "u10", "--frobnicate") == 2
    assert "error" in capsys.readouterr().err


def test_bogus_target(tmp_path):
    assert run("synth", "u77", "--out", tmp_path) == 2
    assert run("synth", "--out", tmp_path) == 2


def test_synth_nonconvergence_exits_one(tmp_path):
    assert run("synth", "u10", "--starts", 1, "--max-iter", 1, "--workers", 1, "--out", tmp_path) == 1
    data = json.loads((tmp_path / "synth_u10.json").read_text())
    assert data["results"] == [] and "best_effort" in data


def test_synth_writes_outputs(tmp_path, capsys):
    assert run("synth", "--target", "u10xcp2", "--starts", 4, "--seed", 3, "--workers", 1,
               "--out", tmp_path) == 0
    data = json.loads((tmp_path / "synth_u10xcp2.json").read_text())
    assert data["manifest"]["seed"] == 3 and data["manifest"]["command"] == "synth"
    assert data["summary"]["starts"] == 4
    assert data["kak"]["lower_bound"] == pytest.approx(0.5)
    csv = (tmp_path / "spectrum_u10xcp2.csv").read_text()
    assert csv.startswith("#") and "winding_index,time,count" in csv
    starts = (tmp_path / "starts_u10xcp2.csv").read_text().splitlines()
    assert starts[1].startswith("seed,converged") and len(starts) == 2 + 4
    assert "Weyl bound" in capsys.readouterr().out


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# search settings\nstarts = 3\nseed = 9\nphase-mode = exact\n")
    args = cli.build_parser().parse_args(["synth", "u10", "--config", str(cfg), "--seed", "4"])
    opts = cli.resolve_options(args)
    assert (opts["starts"], opts["seed"], opts["phase_mode"]) == (3, 4, "exact")
    assert opts["tol"] == 1e-8


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run("synth", "u10", "--config", cfg) == 2
    cfg.write_text("starts = many\n")
    assert run("synth", "u10", "--config", cfg) == 2
    assert run("synth", "u10", "--config", tmp_path / "missing.cfg") == 2


def test_compile_preset(capsys):
    assert run("compile", "--preset", "conventional:u10xcp") == 0
    out = capsys.readouterr().out
    assert "pulses 14, coupling time 2/J" in out


def test_compile_preset_writes_files(tmp_path):
    assert run("compile", "--preset", "optimal:u10xcp", "--out", tmp_path) == 0
    data = json.loads((tmp_path / "program_optimal_u10xcp.json").read_text())
    assert data["program"]["pulse_count"] == 5
    assert (tmp_path / "program_optimal_u10xcp.txt").read_text().startswith("#")


def test_compile_identity_params(tmp_path, capsys):
    path = tmp_path / "identity.json"
    path.write_text(json.dumps(cartan.ControlParams().to_json()))
    assert run("compile", path) == 0
    out = capsys.readouterr().out
    assert out.startswith("1:\n2:\n")
    assert "pulses 0, coupling time 0/J" in out


def test_compile_reference_merged(tmp_path, capsys):
    path = tmp_path / "ref.json"
    path.write_text(json.dumps({"params": cartan.REFERENCE_SOLUTIONS["u10xcp"].to_json()}))
    assert run("compile", path, "--merge", "--no-frame-tracking") == 0
    assert "pulses 4, coupling time 1/2J" in capsys.readouterr().out


def test_compile_usage_errors(tmp_path):
    assert run("compile") == 2
    assert run("compile", "--preset", "optimal:u99") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("compile", bad) == 2
    bad.write_text(json.dumps({"params": {"k1_left": [0, 0]}}))
    assert run("compile", bad) == 2


def test_verify_reference(capsys):
    assert run("verify", "--reference", "u10") == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3


def test_verify_detects_perturbation(tmp_path, capsys):
    p = cartan.REFERENCE_SOLUTIONS["u10xcp2"]
    bad = cartan.ControlParams(p.k1_left, p.k1_right, p.k2_left, p.k2_right,
                               (p.cartan_times[0], p.cartan_times[1], p.cartan_times[2] + 0.1))
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"params": bad.to_json(), "target": "u10xcp2"}))
    assert run("verify", path) == 1
    out = capsys.readouterr().out
    assert "FAIL penalty" in out and "FAIL simulation" in out


def test_verify_raw_target(tmp_path):
    from nmrcartan import targets
    path = tmp_path / "ok.json"
    path.write_text(json.dumps({"params": cartan.REFERENCE_SOLUTIONS["u10"].to_json(),
                                "target": {"matrix": qmat.matrix_to_json(targets.resolve(
                                    targets.parse_target("u10")))}}))
    assert run("verify", path, "--out", tmp_path) == 0
    checks = json.loads((tmp_path / "verify.json").read_text())["checks"]
    assert all(c["passed"] for c in checks)


def test_verify_identity(tmp_path, capsys):
    path = tmp_path / "identity.json"
    path.write_text(json.dumps({"params": cartan.ControlParams().to_json(), "target": "identity"}))
    assert run("verify", path) == 0
    assert capsys.readouterr().out.count("PASS") == 3


def test_verify_usage_errors(tmp_path):
    assert run("verify") == 2
    assert run("verify", "--reference", "u11") == 2
    path = tmp_path / "notarget.json"
    path.write_text(json.dumps({"params": cartan.ControlParams().to_json()}))
    assert run("verify", path) == 2


def test_synth_then_verify_and_compile(tmp_path):
    assert run("synth", "u10xcp2", "--starts", 8, "--workers", 1, "--out", tmp_path) == 0
    path = tmp_path / "synth_u10xcp2.json"
    assert run("verify", path, "--all") == 0
    assert run("compile", path, "--merge", "--out", tmp_path) == 0
    summary = json.loads(path.read_text())["summary"]
    prog = json.loads((tmp_path / "program_synth_u10xcp2.json").read_text())["program"]
    assert float(Fraction(prog["coupling_time"])) == pytest.approx(summary["min_time"], abs=1e-6)


def test_simulate_readout(tmp_path, capsys):
    assert run("simulate", "--readout", "--pi2-us", "0", "--out", tmp_path) == 0
    rows = json.loads((tmp_path / "readout.json").read_text())["rows"]
    peaks = rows[0]["peaks"]
    assert peaks["dominant"] == "10"
    assert peaks["carbon"][0] == pytest.approx(-4 / 3)
    assert peaks["carbon"][1] == pytest.approx(0.0, abs=1e-12)
    assert (tmp_path / "readout.csv").read_text().splitlines()[1].startswith("pi2_us,carbon_0")


def test_simulate_compare(tmp_path):
    assert run("simulate", "--pi2-us", "0,25", "--workers", 1, "--out", tmp_path) == 0
    data = json.loads((tmp_path / "comparison.json").read_text())
    assert len(data["report"]["rows"]) == 2
    assert (tmp_path / "comparison.csv").read_text().startswith("#")


def test_simulate_program_files(tmp_path):
    text = tmp_path / "opt.txt"
    text.write_text("2: -Y -X -(1/2J)-Xm-\n")
    assert run("simulate", "--readout", text, "--pi2-us", "0") == 0
    specs = ["optimal:u10", "optimal:u10xcp", "optimal:u10xcp2"] * 2
    assert run("simulate", *specs, "--pi2-us", "25") == 0


def test_simulate_usage_errors(tmp_path):
    assert run("simulate", "--state", "12") == 2
    assert run("simulate", "--pi2-us", "-5") == 2
    assert run("simulate", "optimal:u10") == 2
    assert run("simulate", "--readout", "optimal:u10", "optimal:u10") == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1: -Q-\n")
    assert run("simulate", "--readout", bad) == 2
    assert run("simulate", "--readout", tmp_path / "missing.txt") == 2
    assert run("simulate", "--j-hz", "-1", "--pi2-us", "25") == 2


@pytest.mark.parametrize("argv,name", [
    (["synth", "u10xcp", "--starts", 6], "synth_u10xcp.json"),
    (["simulate", "--pi2-us", "25,100"], "comparison.json"),
])
def test_worker_count_does_not_change_output(tmp_path, argv, name):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*argv, "--workers", 1, "--out", a) == 0
    assert run(*argv, "--workers", 2, "--out", b) == 0
    assert load(a / name) == load(b / name)


def test_version(capsys):
    with pytest.raises(SystemExit):
        run("--version")
    assert "0.1.0" in capsys.readouterr().out
