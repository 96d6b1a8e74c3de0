import csv
import json

import pytest

from dcflex.cli import EXIT_INPUT, EXIT_OK, main


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    path = tmp_path_factory.mktemp("bundles") / "b"
    code = main(["gen-instance", "--out", str(path), "--seed", "3",
                 "--preset", "small", "--quiet"])
    assert code == EXIT_OK
    return path


@pytest.fixture(scope="module")
def solved_dir(bundle, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "run"
    code = main(["solve", "--bundle", str(bundle), "--out", str(out),
                 "--mode", "joint", "--strategy", "cooperative", "--quiet"])
    assert code == EXIT_OK
    return out


class TestGenInstance:
    def test_writes_manifest_with_all_files(self, bundle):
        manifest = json.loads((bundle / "manifest.json").read_text())
        assert set(manifest) >= {"grid.json", "workload.csv", "latency.csv",
                                 "signal.csv", "dc.json", "config.json"}

    def test_seed_reproducibility_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert main(["gen-instance", "--out", str(tmp_path / sub), "--seed", "9",
                         "--preset", "small", "--quiet"]) == EXIT_OK
        ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
        mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert ma == mb

    def test_seed_is_required(self, tmp_path, capsys):
        with pytest.raises(SystemExit):
            main(["gen-instance", "--out", str(tmp_path / "x")])

    def test_dimension_overrides(self, tmp_path):
        out = tmp_path / "c"
        assert main(["gen-instance", "--out", str(out), "--seed", "1",
                     "--n-dc", "2", "--slots", "3", "--clusters", "5",
                     "--buses", "4", "--gens", "2", "--signal-days", "7",
                     "--quiet"]) == EXIT_OK
        dcs = json.loads((out / "dc.json").read_text())["dcs"]
        assert len(dcs) == 2 and len(dcs[0]["cpu_cap"]) == 3


class TestFitSignal:
    def test_artifacts_and_dominance(self, bundle, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit-signal", "--trace", str(bundle / "signal.csv"),
                     "--out", str(out), "--quiet"]) == EXIT_OK
        env = json.loads((out / "envelope.json").read_text())
        report = json.loads((out / "fit_report.json").read_text())
        assert env["sigma"] >= 0.0
        assert all(m["dominance_margin"] >= -1e-9 for m in report["dominance"])
        table = json.loads((out / "var_table.json").read_text())
        assert all(lo <= hi for lo, hi in zip(table["s_low"], table["s_high"]))

    def test_malformed_trace_exits_4(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("timestamp,s\n0,0.1\n2,oops\n")
        code = main(["fit-signal", "--trace", str(bad), "--out", str(tmp_path / "o")])
        assert code == EXIT_INPUT
        assert "line 3" in capsys.readouterr().err


class TestSolve:
    def test_solution_and_validation_artifacts(self, solved_dir):
        sol = json.loads((solved_dir / "solution.json").read_text())
        val = json.loads((solved_dir / "validation.json").read_text())
        assert sol["status"] == "optimal"
        assert val["ok"] is True
        br = sol["breakdown"]
        recon = (br["generation_cost"] + br["penalty_cost"] + br["migration_cost"]
                 - br["regulation_revenue"])
        assert abs(recon - br["net_cost"]) <= 1e-6 * max(1.0, abs(br["net_cost"]))

    def test_mode_none_less_flexible_than_joint(self, bundle, tmp_path):
        outs = {}
        for mode in ("none", "joint"):
            out = tmp_path / mode
            assert main(["solve", "--bundle", str(bundle), "--out", str(out),
                         "--mode", mode, "--quiet"]) == EXIT_OK
            outs[mode] = json.loads((out / "solution.json").read_text())["objective_total"]
        assert outs["joint"] <= outs["none"] + 1e-6 * max(1.0, abs(outs["none"]))

    def test_missing_bundle_exits_4(self, tmp_path):
        assert main(["solve", "--bundle", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_INPUT

    def test_reproducible_solution_bytes(self, bundle, tmp_path):
        blobs = []
        for sub in ("r1", "r2"):
            out = tmp_path / sub
            assert main(["solve", "--bundle", str(bundle), "--out", str(out),
                         "--mode", "joint", "--quiet"]) == EXIT_OK
            blobs.append((out / "solution.json").read_bytes())
        assert blobs[0] == blobs[1]


class TestSimulate:
    def test_summary_and_series(self, bundle, solved_dir, tmp_path):
        out = tmp_path / "sim"
        assert main(["simulate", "--bundle", str(bundle),
                     "--solution", str(solved_dir / "solution.json"),
                     "--out", str(out), "--scenarios", "4", "--seed", "7",
                     "--quiet"]) == EXIT_OK
        summary = json.loads((out / "sim_summary.json").read_text())
        assert summary["scenarios"] == 4
        assert 0.0 <= summary["power_violation_rate_mean"] <= 1.0
        assert (out / "series_scenario0.csv").exists()
        assert (out / "frontier.csv").exists()

    def test_seeded_rerun_same_digest(self, bundle, solved_dir, tmp_path):
        digests = []
        for sub in ("s1", "s2"):
            out = tmp_path / sub
            assert main(["simulate", "--bundle", str(bundle),
                         "--solution", str(solved_dir / "solution.json"),
                         "--out", str(out), "--scenarios", "3", "--seed", "5",
                         "--quiet"]) == EXIT_OK
            digests.append(json.loads((out / "sim_summary.json").read_text())["digest"])
        assert digests[0] == digests[1]


class TestCompare:
    def test_three_strategies_sorted_by_construction(self, bundle, tmp_path):
        out = tmp_path / "cmp"
        assert main(["compare", "--bundle", str(bundle), "--out", str(out),
                     "--strategies", "cooperative,independent,decoupled",
                     "--modes", "joint", "--quiet"]) == EXIT_OK
        with open(out / "compare.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        net = {r["strategy"]: float(r["net_cost_kusd"]) for r in rows}
        assert net["cooperative"] <= net["independent"] + 1e-9
        assert net["independent"] <= net["decoupled"] + 1e-9
        assert (out / "loadcurve_cooperative_joint.csv").exists()

    def test_single_cell_table(self, bundle, tmp_path):
        out = tmp_path / "one"
        assert main(["compare", "--bundle", str(bundle), "--out", str(out),
                     "--strategies", "cooperative", "--modes", "joint",
                     "--quiet"]) == EXIT_OK
        with open(out / "compare.csv", newline="") as fh:
            assert len(list(csv.DictReader(fh))) == 1

    def test_four_modes_for_load_curves(self, bundle, tmp_path):
        out = tmp_path / "modes"
        assert main(["compare", "--bundle", str(bundle), "--out", str(out),
                     "--strategies", "cooperative",
                     "--modes", "none,spatial,temporal,joint", "--quiet"]) == EXIT_OK
        with open(out / "compare.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        curves = [p.name for p in out.iterdir() if p.name.startswith("loadcurve_")]
        assert len(curves) == 4


class TestExperimentConfig:
    def test_config_file_supplies_model_and_sim_settings(self, bundle, solved_dir, tmp_path):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps({
            "scenarios": 2,
            "seed": 13,
            "threshold": 0.5,
            "model": {"eps_p": 0.1},
        }))
        out = tmp_path / "sim"
        assert main(["simulate", "--bundle", str(bundle),
                     "--solution", str(solved_dir / "solution.json"),
                     "--out", str(out), "--config", str(cfg_path),
                     "--quiet"]) == EXIT_OK
        summary = json.loads((out / "sim_summary.json").read_text())
        assert summary["scenarios"] == 2

    def test_flags_override_config_file(self, bundle, solved_dir, tmp_path):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps({"scenarios": 2, "seed": 13}))
        out = tmp_path / "sim"
        assert main(["simulate", "--bundle", str(bundle),
                     "--solution", str(solved_dir / "solution.json"),
                     "--out", str(out), "--config", str(cfg_path),
                     "--scenarios", "3", "--quiet"]) == EXIT_OK
        summary = json.loads((out / "sim_summary.json").read_text())
        assert summary["scenarios"] == 3

    def test_missing_seed_is_config_error(self, bundle, solved_dir, tmp_path):
        out = tmp_path / "sim"
        assert main(["simulate", "--bundle", str(bundle),
                     "--solution", str(solved_dir / "solution.json"),
                     "--out", str(out), "--quiet"]) == EXIT_INPUT

    def test_unknown_config_key_rejected(self, bundle, tmp_path):
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps({"scenarioz": 2}))
        assert main(["solve", "--bundle", str(bundle),
                     "--out", str(tmp_path / "o"), "--config", str(cfg_path),
                     "--quiet"]) == EXIT_INPUT


def test_report_summarizes_run(solved_dir, capsys):
    assert main(["report", "--out", str(solved_dir), "--quiet"]) == EXIT_OK
    text = (solved_dir / "report.md").read_text()
    assert "Artifacts" in text and "Solution" in text


def test_pipeline_round_trip_readers(bundle):
    # Everything the generator wrote loads back through the module readers.
    from dcflex.instance import load_bundle

    inst, cfg, trace = load_bundle(bundle)
    assert inst.n_slots == len(inst.grid.buses[0].base_load)
    assert len(trace) > 1000
