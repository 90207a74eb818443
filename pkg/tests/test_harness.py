import csv
import json
import math

import numpy as np
import pytest

from aircomp import harness
from aircomp.harness import (
    Fig1Spec,
    Fig2Spec,
    FIG1_COLUMNS,
    FIG2_COLUMNS,
    db_to_linear,
    default_fig1_config,
    default_fig2_config,
    fig1_point,
    fig1_spec_from_config,
    fig2_spec_from_config,
    parallel_map,
    run_fig1,
    run_fig2,
    run_verify,
    write_csv,
    write_round_trace,
)
from aircomp.protocol import MessageModel, NoiseScheme, ProtocolConfig, run_round

SMALL_FIG1 = Fig1Spec(offsets=(0.0, 0.2, 1.0 / 3.0), snr_db=(-10.0, 0.0, 10.0, 20.0, 30.0),
                      trials=20_000, master_seed=4242)

SMALL_FIG2 = Fig2Spec(sigmas=(0.05, 0.2), realizations=80, master_seed=4242)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestDbConversion:
    def test_powers_of_ten(self):
        assert db_to_linear(0.0) == 1.0
        assert db_to_linear(10.0) == pytest.approx(10.0)
        assert db_to_linear(15.0) == pytest.approx(31.6227766, rel=1e-8)
        assert db_to_linear(5.0) == pytest.approx(10**0.5)


class TestConfigs:
    def test_fig1_default_round_trip(self):
        spec = fig1_spec_from_config(default_fig1_config())
        assert spec.offsets == Fig1Spec().offsets
        assert len(spec.snr_db) == 41
        assert spec.trials == 1_000_000

    def test_fig2_db_fields_converted(self):
        spec = fig2_spec_from_config(default_fig2_config())
        assert spec.p_x == pytest.approx(db_to_linear(15.0))
        assert spec.rician_kappa == pytest.approx(db_to_linear(5.0))
        assert spec.p_e_p2 == pytest.approx(1.0 / 12.0)

    def test_overrides(self):
        cfg = default_fig1_config()
        cfg["trials"] = 55_000
        cfg["snr_db"] = [0, 5]
        spec = fig1_spec_from_config(cfg)
        assert spec.trials == 55_000 and spec.snr_db == (0.0, 5.0)

    def test_load_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"kind": "fig1", "seed": 9}))
        assert harness.load_config(path)["seed"] == 9


class TestFig1:
    @pytest.fixture(scope="class")
    def rows(self):
        return run_fig1(SMALL_FIG1)

    def test_row_count_and_columns(self, rows):
        assert len(rows) == len(SMALL_FIG1.offsets) * len(SMALL_FIG1.snr_db)
        for c in FIG1_COLUMNS:
            assert c in rows[0]

    def test_zero_offset_row_equals_lower_bound_exactly(self, rows):
        for r in rows:
            if r["o"] == 0.0:
                assert r["mse_closed"] == r["lower_bound"]

    def test_boundary_offset_row_equals_upper_bound_exactly(self, rows):
        for r in rows:
            if r["o"] == 1.0 / 3.0:
                assert r["mse_closed"] == r["upper_bound"]

    def test_curves_ordered_by_offset_at_every_snr(self, rows):
        by_snr = {}
        for r in rows:
            by_snr.setdefault(r["P_over_N0_dB"], []).append((r["o"], r["mse_closed"]))
        for pts in by_snr.values():
            pts.sort()
            vals = [v for _, v in pts]
            assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_all_curves_inside_bounds(self, rows):
        for r in rows:
            assert r["lower_bound"] - 1e-12 <= r["mse_closed"] <= r["upper_bound"] + 1e-12

    def test_high_snr_offsets_converge(self, rows):
        top = [r for r in rows if r["P_over_N0_dB"] == 30.0]
        vals = [r["mse_closed"] for r in top]
        spread = (max(vals) - min(vals)) / min(vals)
        assert spread < 0.01

    def test_mc_agrees_with_closed_form(self, rows):
        for r in rows:
            assert abs(r["mse_closed"] - r["mse_mc"]) <= 3.5 * r["stderr"]

    def test_single_point_rerun_from_lineage(self, rows):
        r = rows[7]
        again = fig1_point(SMALL_FIG1, r["point_index"], r["P_over_N0_dB"], r["o"])
        assert again == r


class TestDeterminism:
    def test_fig1_thread_count_invariance(self, tmp_path):
        outs = []
        for threads in (1, 4):
            spec = Fig1Spec(offsets=(0.0, 0.25), snr_db=(0.0, 10.0, 20.0),
                            trials=20_000, master_seed=7, threads=threads)
            path = tmp_path / f"f1_{threads}.csv"
            write_csv(run_fig1(spec), FIG1_COLUMNS, path)
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_fig2_thread_count_invariance(self, tmp_path):
        outs = []
        for threads in (1, 4):
            spec = Fig2Spec(sigmas=(0.1,), realizations=40, master_seed=7,
                            threads=threads, message_variants=("raw",))
            rows, _ = run_fig2(spec)
            path = tmp_path / f"f2_{threads}.csv"
            write_csv(rows, FIG2_COLUMNS, path)
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_parallel_map_preserves_order(self):
        assert parallel_map(lambda x: x * x, range(20), threads=8) == [x * x for x in range(20)]


class TestFig2:
    @pytest.fixture(scope="class")
    def result(self):
        return run_fig2(SMALL_FIG2)

    def test_p2_rows_leak_exactly_zero(self, result):
        rows, _ = result
        p2 = [r for r in rows if r["scheme"] == "p2-modulo"]
        assert len(p2) == len(SMALL_FIG2.message_variants)
        for r in p2:
            assert r["leakage_nats"] == 0.0
            assert r["sigma"] == ""

    def test_columns_present(self, result):
        rows, _ = result
        for c in FIG2_COLUMNS:
            assert c in rows[0]

    def test_rows_cover_grid(self, result):
        rows, _ = result
        baselines = [r for r in rows if r["scheme"] != "p2-modulo"]
        assert len(baselines) == (len(SMALL_FIG2.schemes) * len(SMALL_FIG2.sigmas)
                                  * len(SMALL_FIG2.message_variants))

    def test_leakage_ordering_in_rows(self, result):
        rows, _ = result
        for variant in SMALL_FIG2.message_variants:
            for sigma in SMALL_FIG2.sigmas:
                sub = {r["scheme"]: r["leakage_nats"] for r in rows
                       if r["message_variant"] == variant and r["sigma"] == sigma}
                assert sub["independent"] < sub["correlated"] < sub["zero-sum"]

    def test_summary_structure(self, result):
        _, summary = result
        assert summary["kind"] == "fig2"
        assert set(summary["anchor"]) == {"window_log10", "variants", "discrepancy"}
        for variant in SMALL_FIG2.message_variants:
            assert variant in summary["anchor"]["variants"]
        assert summary["gaps"]

    def test_anchor_out_of_window_is_documented(self, result):
        _, summary = result
        anchor = summary["anchor"]
        for variant, entry in anchor["variants"].items():
            if not entry["in_window"]:
                assert anchor["discrepancy"] is not None
                assert variant in anchor["discrepancy"]

    def test_paired_gaps_positive(self, result):
        _, summary = result
        for entry in summary["gaps"].values():
            for g in entry.values():
                assert g["mean"] > 0

    def test_summary_is_json_serializable(self, result):
        _, summary = result
        json.dumps(summary)


class TestCsv:
    def test_write_and_parse_round_trip(self, tmp_path):
        rows = [{"a": 1, "b": 0.1, "c": "x"}, {"a": 2, "b": -3.5e-7, "c": ""}]
        path = tmp_path / "t.csv"
        write_csv(rows, ("a", "b", "c"), path)
        text = path.read_text()
        assert text.splitlines()[0] == "a,b,c"
        assert "." in text.splitlines()[1]  # decimal point separator
        back = read_csv(path)
        assert float(back[1]["b"]) == -3.5e-7

    def test_round_trace(self, tmp_path):
        cfg = ProtocolConfig(K=3, D=4, a=0.4, p_x=10.0, p_e=1 / 12, n0=0.5,
                             rician_kappa=db_to_linear(5.0),
                             message=MessageModel.uniform_box(),
                             scheme=NoiseScheme.p2_modulo())
        results = [run_round(cfg, seed=s) for s in (1, 2)]
        path = tmp_path / "trace.csv"
        write_round_trace(results, path)
        back = read_csv(path)
        assert len(back) == 2
        assert back[0]["scheme"] == "p2-modulo"
        assert len(back[0]["per_dim_error"].split()) == 4
        assert len(back[0]["realized_powers"].split()) == 3


class TestVerify:
    def test_all_suites_pass_with_default_seed(self):
        report = run_verify(["all"])
        failing = [c for c in report["checks"] if not c["passed"]]
        assert report["passed"], f"failing checks: {failing}"
        json.dumps(report)

    def test_suite_selection(self):
        report = run_verify(["numerics"])
        assert {c["suite"] for c in report["checks"]} == {"numerics"}

    def test_unknown_suite_rejected(self):
        with pytest.raises(ValueError):
            run_verify(["nonsense"])
