import numpy as np
import pytest

from dpoad.bench import (
    ExperimentConfig,
    SyntheticSpec,
    _cumulative_sets,
    emit_results,
    generate_synthetic,
    ingest_csv,
    read_results,
    run_experiment,
)
from dpoad.sampler import k_learning, m_learning, rho_star_learning

TINY = SyntheticSpec(windows_per_iteration=6, steps_per_window=20,
                     records_per_step=15.0, anomaly_rate=0.1, anomaly_fraction=0.3)


def tiny_config(**kw):
    base = dict(seeds=1, seed_base=7, bins=5, c_max=12, synthetic=TINY, iterations=2,
                c_const=0.3)
    base.update(kw)
    return ExperimentConfig(**base)


class TestGenerateSynthetic:
    def test_zero_anomaly_rate_has_no_labels(self, rng):
        spec = SyntheticSpec(anomaly_rate=0.0, windows_per_iteration=10, steps_per_window=5)
        _, labels = generate_synthetic(spec, 3, rng)
        assert not any(lab.any() for lab in labels)

    def test_fixed_seed_reproduces_corpus(self):
        spec = TINY
        d1, l1 = generate_synthetic(spec, 2, np.random.default_rng(4))
        d2, l2 = generate_synthetic(spec, 2, np.random.default_rng(4))
        assert all(np.array_equal(a, b) for i in range(2) for a, b in zip(d1[i], d2[i]))
        assert all(np.array_equal(a, b) for a, b in zip(l1, l2))

    def test_magnitude_zero_gives_chance_level_precision_vs_injected(self):
        # undetectable anomalies: overlap of any detection with the injected
        # labels is at chance, so precision vs injected ~ anomaly rate
        from dpoad.bench import _count_matrices, _detect_series, _session_config
        spec = SyntheticSpec(windows_per_iteration=40, steps_per_window=40,
                             anomaly_rate=0.05, magnitude=0.0, anomaly_fraction=0.2)
        hits = total = 0
        for seed in range(6):
            data, labels = generate_synthetic(spec, 2, np.random.default_rng(seed))
            cfg = _session_config(tiny_config(bins=11, c_max=18), 1.0, 0.2, 0.9, spec)
            mats = _count_matrices(data, cfg)
            scores = _detect_series(mats, cfg)
            detected = _cumulative_sets(scores, 0.9)[-1]
            injected = {(i + 1, int(w)) for i, lab in enumerate(labels)
                        for w in np.flatnonzero(lab)}
            hits += len(detected & injected)
            total += len(detected)
        if total:
            assert hits / total < 0.3

    def test_anomaly_rate_bounds(self):
        with pytest.raises(ValueError):
            SyntheticSpec(anomaly_rate=0.6)


class TestIngestCsv:
    def test_two_by_two(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0\n3.5,4.5\n")
        steps = ingest_csv(path, records_per_step=2)
        assert len(steps) == 1
        assert steps[0].shape == (2, 2)

    def test_non_numeric_cell_names_location(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0\n3.5,oops\n")
        with pytest.raises(ValueError, match="row 1, column 1"):
            ingest_csv(path)

    def test_header_skipped_when_flagged(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1.0,2.0\n3.0,4.0\n")
        steps = ingest_csv(path, records_per_step=1, skip_header=True)
        assert len(steps) == 2

    def test_window_column_grouping(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,1.0\n0,2.0\n1,3.0\n")
        steps = ingest_csv(path, window_column=0)
        assert len(steps) == 2
        assert steps[0].shape == (2, 1)

    def test_label_column_stripped_and_returned(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,0\n2.0,0\n3.0,1\n4.0,0\n")
        steps, labels = ingest_csv(path, records_per_step=2, label_column=1)
        assert len(steps) == 2
        assert steps[0].shape == (2, 1)
        assert labels.tolist() == [False, True]


class TestRunExperiment:
    def test_single_point_yields_three_rows(self):
        rows = run_experiment(tiny_config(iterations=1))
        assert len(rows) == 3
        assert {r["mechanism"] for r in rows} == {"laplace", "painfree", "dpoad"}

    def test_row_mk_matches_sampler_formulas(self):
        rows = run_experiment(tiny_config(iterations=3))
        rho = rho_star_learning(0.2)
        m_l = m_learning(0.2, rho)
        k_l = k_learning(m_l, 0.2, rho)
        for row in rows:
            assert row["k"] <= row["m"] or row["m"] == 0
            if row["mechanism"] == "painfree":
                assert (row["m"], row["k"]) == (m_l, k_l)
            if row["mechanism"] == "laplace":
                assert (row["m"], row["k"]) == (0, 0)
                assert row["sensitivity_used"] == 12.0
            if row["mechanism"] == "dpoad" and row["iteration"] < row["phase_switch_iter"]:
                assert (row["m"], row["k"]) == (m_l, k_l)

    def test_dpoad_reports_phase_switch(self):
        rows = run_experiment(tiny_config(iterations=3, mechanism="dpoad"))
        assert all(r["phase_switch_iter"] >= 1 for r in rows)

    def test_trace_dump_round_trips(self, tmp_path):
        from dpoad.protocol import parse_release, parse_report
        run_experiment(tiny_config(iterations=2, mechanism="dpoad",
                                   trace_dir=str(tmp_path)))
        dumps = sorted(tmp_path.glob("trace_*.txt"))
        assert len(dumps) == 1
        text = dumps[0].read_text()
        blocks = [b for b in text.split("schema: dpoad/1\n") if b]
        assert len(blocks) == 4  # release + report per iteration
        parse_release("schema: dpoad/1\n" + blocks[0])
        parse_report("schema: dpoad/1\n" + blocks[1])

    def test_deterministic_result_table(self):
        cfg = tiny_config(iterations=2)
        rows1 = run_experiment(cfg)
        rows2 = run_experiment(cfg)
        strip = lambda rows: [{k: v for k, v in r.items() if k != "runtime_ms"} for r in rows]
        assert strip(rows1) == strip(rows2)

    def test_csv_dataset_with_attribute_selection(self, tmp_path, rng):
        path = tmp_path / "d.csv"
        rows_txt = []
        for _ in range(400):
            rows_txt.append(f"{rng.normal():.4f},{rng.normal(2.0, 1.0):.4f}")
        path.write_text("\n".join(rows_txt) + "\n")
        spec = SyntheticSpec(windows_per_iteration=2, steps_per_window=5)
        cfg = ExperimentConfig(seeds=1, iterations=1, bins=4, c_max=10,
                               synthetic=spec, dataset=str(path),
                               dataset_records_per_step=4, attribute_index=1,
                               mechanism="laplace")
        rows = run_experiment(cfg)
        assert len(rows) == 1
        assert rows[0]["mechanism"] == "laplace"

    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(mechanism="bogus")
        with pytest.raises(ValueError):
            ExperimentConfig(seeds=0)
        with pytest.raises(ValueError):
            ExperimentConfig(epsilons=())


class TestEmitResults:
    def test_empty_rows_header_only(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_results([], "csv", path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("mechanism,")

    def test_round_trip_csv_and_json_agree(self, tmp_path):
        rows = run_experiment(tiny_config(iterations=1))
        csv_path = tmp_path / "r.csv"
        json_path = tmp_path / "r.json"
        emit_results(rows, "csv", csv_path)
        emit_results(rows, "json", json_path)
        from_csv = read_results(csv_path, "csv")
        from_json = read_results(json_path, "json")
        for a, b, orig in zip(from_csv, from_json, rows):
            for col in ("mechanism", "epsilon", "iteration", "seed", "m", "k"):
                assert a[col] == b[col] == orig[col]
            assert a["precision"] == pytest.approx(b["precision"])
            assert a["precision"] == pytest.approx(orig["precision"])

    def test_unwritable_path_raises(self, tmp_path):
        with pytest.raises(OSError):
            emit_results([], "csv", tmp_path / "missing" / "r.csv")


class TestCli:
    def test_cli_end_to_end(self, tmp_path, capsys):
        from dpoad.cli import main
        out = tmp_path / "out.csv"
        rc = main([
            "--mechanism", "laplace", "--seeds", "1", "--iterations", "1",
            "--windows", "4", "--steps", "10", "--bins", "4", "--c-max", "10",
            "--rate", "10", "--out", str(out),
        ])
        assert rc == 0
        assert out.exists()
        rows = read_results(out)
        assert len(rows) == 1

    def test_cli_error_exit_code(self, tmp_path):
        from dpoad.cli import main
        rc = main(["--dataset", str(tmp_path / "nope.csv"), "--seeds", "1"])
        assert rc == 1

    def test_config_file_with_flag_override(self, tmp_path):
        import json

        from dpoad.cli import main
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seeds": 1, "iterations": 1, "windows": 4,
                                   "steps": 10, "bins": 4, "c_max": 10, "rate": 10,
                                   "mechanism": "painfree"}))
        out = tmp_path / "out.csv"
        rc = main(["--config", str(cfg), "--mechanism", "laplace", "--out", str(out)])
        assert rc == 0
        rows = read_results(out)
        assert {r["mechanism"] for r in rows} == {"laplace"}
