import json

import pytest

from aircomp.cli import main


def test_usage_error_exit_code_2():
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_fig1_small_run(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "kind": "fig1", "name": "t", "seed": 5, "trials": 20000,
        "offsets": [0.0, 0.25], "snr_db": [0, 10],
    }))
    out = tmp_path / "out.csv"
    assert main(["fig1", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("P_over_N0_dB,o,mse_closed")
    assert len(lines) == 5


def test_fig2_small_run_writes_summary(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "kind": "fig2", "name": "t2", "seed": 5, "realizations": 30,
        "sigmas": [0.1], "message_variants": ["raw"],
    }))
    out = tmp_path / "f2.csv"
    assert main(["fig2", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.exists()
    summary = json.loads((tmp_path / "f2.summary.json").read_text())
    assert summary["anchor"]["variants"]["raw"]["mse_per_dim"] > 0


def test_verify_subcommand(tmp_path, capsys):
    out = tmp_path / "verify.json"
    code = main(["verify", "--suite", "numerics", "--suite", "keys", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["passed"]
    printed = capsys.readouterr().out
    assert "[PASS] numerics/mod1-identities" in printed


def test_keys_subcommand(tmp_path):
    out = tmp_path / "bundle.json"
    code = main(["keys", "--clients", "4", "--dims", "16", "--seed", "11", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["K"] == 4 and doc["D"] == 16
    assert all(item["passed"] for item in doc["verification"])


def test_oracle_subcommand(tmp_path, capsys):
    out = tmp_path / "oracle.json"
    code = main(["oracle", "--q", "3", "--clients", "3", "--view", "server",
                 "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["mi_nats"] == 0.0
    assert doc["outcomes"] == 3**3 * 3**2


def test_mse_subcommand(tmp_path, capsys):
    out = tmp_path / "mse.csv"
    code = main(["mse", "--s", "0.1,0.2", "--sigma-eff", "0.3",
                 "--trials", "20000", "--seed", "3", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "scheme,sigma,leakage_nats,leakage_bits,mse_closed,mse_mc,mc_stderr,L,tail_bound"
    assert "closed=" in capsys.readouterr().out
