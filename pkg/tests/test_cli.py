"""Command line: output formats, config precedence and exit codes."""

import csv
import io
import json

import pytest

from contextsim import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify(capsys):
    code, out, _ = run(capsys, "verify")
    d = json.loads(out)
    assert code == 0 and d["passed"]
    assert d["check_count"] >= 12
    ctx = [r for r in d["reports"] if r["subject"] == "context_operators"][0]
    assert any(c["name"].startswith("C_degenerate") and c["passed"] for c in ctx["checks"])


def test_verify_perturbed_fails(capsys):
    code, out, _ = run(capsys, "verify", "--perturb", "1e-3")
    assert code == 1 and not json.loads(out)["passed"]


def test_analytic_example(capsys):
    code, out, _ = run(capsys, "analytic", "--state", "example")
    d = json.loads(out)
    assert code == 0
    assert d["max_discrepancy"] <= 1e-10
    assert d["expectations"]["B'"] == pytest.approx({"DirectC": 1 / 3, "ViaAB": 0.0, "ViaAPrimeBPrime": 1 / 3})
    assert set(d["final_states"]) == {"DirectC", "ViaAB", "ViaAPrimeBPrime"}
    assert len(d["final_states"]["ViaAB"]["phi_basis"]) == 4


def test_analytic_plusplus_warns(capsys):
    code, out, _ = run(capsys, "analytic", "--state", "plusplus")
    d = json.loads(out)
    assert code == 0 and d["warning"].startswith("DegeneratePreparation")
    assert len(d["expectations"]) == 5


def test_analytic_random_needs_seed(capsys):
    assert run(capsys, "analytic", "--state", "random")[0] == 2
    code, out, _ = run(capsys, "analytic", "--state", "random", "--seed", "3", "--route", "via-ab")
    assert code == 0 and json.loads(out)["max_discrepancy"] <= 1e-10


def test_discriminate(capsys, tmp_path):
    shots = tmp_path / "shots.csv"
    code, out, _ = run(capsys, "discriminate", "--route", "via-ab", "--shots", "1000", "--seed", "7",
                       "--state", "example", "--per-shot", str(shots))
    d = json.loads(out)
    assert code == 0 and d["inferred_route"] == "ViaAB"
    rows = list(csv.reader(io.StringIO(shots.read_text())))
    assert rows[0] == "shot,route,a,b,aprime,bprime,c,probe,probe_outcome".split(",")
    assert len(rows) == 1001
    assert rows[1][4] == "" and rows[1][7] == "B"


def test_json_round_trip(capsys, tmp_path):
    out_file = tmp_path / "r.json"
    run(capsys, "discriminate", "--route", "direct-c", "--seed", "1", "--out", str(out_file))
    text = out_file.read_text()
    assert cli.dumps(json.loads(text)) == text


def test_csv_format(capsys):
    code, out, _ = run(capsys, "discriminate", "--route", "via-apbp", "--seed", "1", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["inferred_route"] == "ViaAPrimeBPrime"


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"route": "via-ab", "shots": 400, "seed": 9, "state": "example"}))
    _, out, _ = run(capsys, "discriminate", "--config", str(cfg))
    d = json.loads(out)
    assert d["shots"] == 400 and d["seed"] == 9 and d["true_route"]["tag"] == "ViaAB"
    _, out, _ = run(capsys, "discriminate", "--config", str(cfg), "--shots", "600")
    assert json.loads(out)["shots"] == 600


def test_amplitudes(capsys, caplog):
    amps = json.dumps([[3 ** -0.5, 0], [0, -(3 ** -0.5)], [0, 0], [3 ** -0.5, 0]])
    code, out, _ = run(capsys, "analytic", "--amplitudes", amps)
    assert code == 0
    code, _, err = run(capsys, "analytic", "--amplitudes", "[[1,0],[1,0],[0,0],[0,0]]")
    assert code == 2 and json.loads(err)["error"] == "NotNormalized"
    code, _, _ = run(capsys, "analytic", "--amplitudes", "[[1,0],[0,0],[0,0],[0.0005,0]]")
    assert code == 0 and "renormalizing" in caplog.text


@pytest.mark.parametrize("argv,code,error", [
    (["discriminate", "--route", "via-ab"], 2, "BadInput"),
    (["discriminate", "--route", "nowhere", "--seed", "1"], 2, "BadInput"),
    (["discriminate", "--route", "via-ab", "--seed", "1", "--state", "uniform"], 3, "DegeneratePreparation"),
    (["discriminate", "--route", "via-ab", "--seed", "1", "--split", "1.5"], 2, "BadInput"),
    (["apparatus", "--box", "lueders", "--observable", "sz", "--seed", "1"], 3, "NonDiscriminable"),
    (["analytic", "--state", "bogus"], 2, "BadInput"),
    (["discriminate", "--config", "/nonexistent.json", "--seed", "1"], 2, "BadInput"),
])
def test_error_exit_codes(capsys, argv, code, error):
    got, out, err = run(capsys, *argv)
    assert got == code and out == ""
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == error and payload["exit_code"] == code


def test_apparatus(capsys):
    code, out, _ = run(capsys, "apparatus", "--box", "von-neumann", "--shots", "10000", "--seed", "3")
    assert code == 0 and json.loads(out)["decision"] == "VonNeumann"


@pytest.mark.parametrize("name,count", [("context5", 8), ("mermin9", 0), ("additive", 2)])
def test_hv(capsys, name, count):
    code, out, _ = run(capsys, "hv", "--set", name)
    d = json.loads(out)
    assert code == 0 and d["count"] == count
    if count and name != "mermin9":
        assert d["route_independence_tv"] == 0.0


def test_hv_relax(capsys):
    _, out, _ = run(capsys, "hv", "--set", "mermin9", "--relax", "0")
    assert json.loads(out)["count"] == 16
    assert run(capsys, "hv", "--set", "mermin9", "--relax", "9")[0] == 2


def test_additive(capsys):
    code, out, _ = run(capsys, "additive", "--rho", "[[0.5,0],[0.25,0.1],[0.25,-0.1],[0.5,0]]")
    d = json.loads(out)
    assert code == 0 and d["sx_direct"] == pytest.approx(0.5) and d["sx_sum"] == 0.0
    assert d["rho_direct"] == d["rho_initial"]


def test_bad_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["teleport"])
    assert exc.value.code == 2
