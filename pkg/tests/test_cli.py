import csv
import json
import math

import pytest

from rbseq import sampler
from rbseq.cli import main

LN4 = 2 * math.log(2)
GEO = '{"family": "geometric", "mu": 2}'
GAMMA2_SPEC = '{"xi": 0.5, "m": 0.25, "phi": {"kind": "power_log", "gamma": 2}}'


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def provenance(path):
    return json.loads((path / "provenance.json").read_text())


def test_generate_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        code, out, _ = run_cli(capsys, "generate", "--model", GEO, "--length", "1000",
                               "--seed", "42", "--out", str(tmp_path / name), "--text")
        assert code == 0
        assert json.loads(out)["command"] == "generate"
    a, b = (tmp_path / "a" / "sequence.rbsq"), (tmp_path / "b" / "sequence.rbsq")
    assert a.read_bytes() == b.read_bytes()
    assert provenance(tmp_path / "a")["outputs"] == provenance(tmp_path / "b")["outputs"]
    assert len(sampler.load(a)) == 1000
    assert (tmp_path / "a" / "sequence.txt").read_text().strip() == "".join(
        map(str, sampler.load(a).bits))


def test_thread_count_does_not_change_outputs(tmp_path, capsys):
    hashes = []
    for threads in ("1", "3"):
        out = tmp_path / threads
        assert run_cli(capsys, "generate", "--model", GEO, "--length", "5000", "--seed", "1",
                       "--replicas", "4", "--threads", threads, "--out", str(out))[0] == 0
        hashes.append(provenance(out)["outputs"])
    assert hashes[0] == hashes[1] and len(hashes[0]) == 4


def test_model_file_and_replay(tmp_path, capsys):
    model = tmp_path / "model.json"
    model.write_text('{"family": "polynomial", "gamma": 2}')
    out = tmp_path / "run"
    assert run_cli(capsys, "generate", "--model", str(model), "--length", "20000",
                   "--seed", "3", "--out", str(out))[0] == 0
    prov = provenance(out)
    assert prov["seeds"] == [3] and len(prov["config_hash"]) == 64
    # the descriptor is embedded, so the replay survives the file going away
    model.unlink()
    assert run_cli(capsys, "replay", str(out / "provenance.json"),
                   "--out", str(tmp_path / "again"))[0] == 0
    prov["outputs"]["sequence.rbsq"] = "0" * 64
    (out / "provenance.json").write_text(json.dumps(prov))
    code, _, err = run_cli(capsys, "replay", str(out / "provenance.json"))
    assert code == 3 and json.loads(err)["error"] == "NumericalError"


def test_invert_spec(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "invert", "--spec", GAMMA2_SPEC, "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)["summary"]
    assert summary["mean"] == pytest.approx(2.0, abs=1e-6)
    lines = (tmp_path / "density.csv").read_text().splitlines()
    assert any(line.startswith("# clipped_mass=") for line in lines)


def test_invert_csv_and_errors(tmp_path, capsys):
    cov = tmp_path / "c.csv"
    cov.write_text("t,c_t\n" + "".join(f"{t},{0.25 if t else 0.5}\n" for t in range(80)))
    code, out, _ = run_cli(capsys, "invert", "--cov", str(cov), "--out", str(tmp_path / "o"))
    assert code == 0 and json.loads(out)["summary"]["mean"] == pytest.approx(2.0)
    cov.write_text("t,c_t\n0,0.5\n1,0.4\n2,0.1\n3,0.25\n4,0.25\n")
    with pytest.warns(UserWarning):
        code, _, err = run_cli(capsys, "invert", "--cov", str(cov), "--out", str(tmp_path / "o"))
    assert code == 3 and json.loads(err)["error"] == "NotRenewable"
    code, _, err = run_cli(capsys, "invert", "--spec", '{"xi": 0.5}', "--out", str(tmp_path))
    assert code == 2 and json.loads(err)["error"] == "ConfigError"


@pytest.mark.parametrize("argv, err", [
    (["generate", "--model", GEO, "--length", "10"], "ConfigError"),
    (["generate", "--model", GEO, "--length", "0", "--seed", "1"], "ConfigError"),
    (["generate", "--model", '{"family": "nope"}', "--length", "10", "--seed", "1"], None),
    (["generate", "--model", GEO, "--length", "10", "--seed", "-4"], "ConfigError"),
    (["autocov", "--model", "/nonexistent.json", "--horizon", "5"], None),
    (["loglik", "--model", GEO], "ConfigError"),
])
def test_config_errors_exit_2(tmp_path, capsys, argv, err):
    code, _, stderr = run_cli(capsys, *argv, "--out", str(tmp_path))
    assert code == 2
    info = json.loads(stderr)
    assert info["exit_code"] == 2
    if err:
        assert info["error"] == err


def test_loglik_reports_position(tmp_path, capsys):
    seq = tmp_path / "x.txt"
    seq.write_text("0101100\n")
    code, _, err = run_cli(capsys, "loglik", "--model", '{"family": "table", "density": [0, 1]}',
                           "--input", str(seq), "--out", str(tmp_path))
    assert code == 3
    assert json.loads(err)["position"] == 5


def test_analysis_commands(tmp_path, capsys):
    out = str(tmp_path)
    code, stdout, _ = run_cli(capsys, "entropy", "--model", GEO, "--length", "50", "--out", out)
    assert code == 0
    assert json.loads(stdout)["summary"]["H_p"] == pytest.approx(LN4, abs=1e-12)
    code, stdout, _ = run_cli(capsys, "loglik", "--model", GEO, "--length", "400", "--seed", "2",
                              "--replicas", "2", "--out", out)
    rows = json.loads(stdout)["summary"]["results"]
    assert code == 0 and len(rows) == 2
    assert all(r["aep_statistic"] == pytest.approx(LN4, rel=1e-12) for r in rows)
    assert run_cli(capsys, "estimate", "--model", GEO, "--length", "3000", "--seed", "2",
                   "--out", out)[0] == 0
    rows = list(csv.DictReader((tmp_path / "estimates.csv").open()))
    assert len(rows) == 20 + 11
    assert run_cli(capsys, "autocov", "--model", GEO, "--horizon", "30", "--out", out)[0] == 0
    assert run_cli(capsys, "mixing", "--model", GEO, "--horizon", "10", "--out", out)[0] == 0
    rows = list(csv.reader((tmp_path / "mixing.csv").open()))
    assert float(rows[1][1]) == pytest.approx(4.0)


def test_figures_desk_scale(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "figures", "--desk-scale", "--out", str(tmp_path),
                           "--s-max", "30", "--tau-max", "20", "--horizon", "500", "--threads", "2")
    assert code == 0
    names = sorted(p.name for p in tmp_path.glob("fig*.csv"))
    assert names == [
        "fig1_autocov_polynomial.csv", "fig2_autocov_stretched.csv",
        "fig3_waiting_polynomial.csv", "fig4_waiting_stretched.csv",
        "fig5_rho_polynomial.csv", "fig6_rho_stretched.csv",
    ]
    summary = json.loads(out)["summary"]
    assert summary["lengths"] == [10**4, 10**6]
    rows = list(csv.DictReader((tmp_path / "fig3_waiting_polynomial.csv").open()))
    assert len(rows) == 2 * 2 * 30
    assert set(provenance(tmp_path)["outputs"]) == set(names)
