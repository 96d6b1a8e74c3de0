import numpy as np
import pytest

from dcflex.grid import validate_case
from dcflex.instance import (
    DEMO_SEED,
    GenParams,
    build_synthetic,
    cc_stress_params,
    default_var_horizons,
    demo_case,
    demo_data_dir,
    demo_params,
    fit_signal_artifacts,
    generate_instance,
    load_bundle,
    small_params,
)
from dcflex.workload import load_matrix, validate_schedule


class TestSyntheticInstances:
    def test_demo_shape_matches_shipped_reduction(self):
        inst, cfg, trace = build_synthetic(demo_params(), seed=DEMO_SEED)
        assert inst.n_dc == 3
        assert len(inst.grid.buses) == 6
        assert len(inst.grid.generators) == 2
        assert inst.n_slots == 6

    def test_all_validators_accept_generated_instances(self):
        for seed in (1, 2, 3):
            inst, cfg, trace = build_synthetic(small_params(), seed=seed)
            inst.validate()
            assert validate_case(inst.grid) == []
            validate_schedule(inst.x_base, inst.jobs)

    def test_class_mix_spans_all_three(self):
        inst, _, _ = build_synthetic(demo_params(), seed=1)
        classes = {j.flex_class for j in inst.jobs}
        assert classes == {"fixed", "interactive", "deferrable"}
        # energy split roughly 50/30/20 by construction
        energy = {}
        for j in inst.jobs:
            energy[j.flex_class] = energy.get(j.flex_class, 0.0) + j.energy_mwh
        total = sum(energy.values())
        assert energy["fixed"] / total == pytest.approx(0.5, abs=0.2)

    def test_baseline_feasible_against_power_floor(self):
        inst, cfg, _ = build_synthetic(small_params(), seed=5)
        nodal = load_matrix(inst.x_base, inst.jobs, cfg.slot_hours)
        for l, dc in enumerate(inst.dcs):
            assert np.all(nodal[l] >= dc.p_min - 1e-9)
            assert np.all(nodal[l] <= dc.p_max + 1e-9)

    def test_queue_center_and_arrival_identity(self):
        inst, cfg, _ = build_synthetic(small_params(), seed=5)
        nodal = load_matrix(inst.x_base, inst.jobs, cfg.slot_hours)
        assert np.allclose(inst.queue.arrivals, nodal * cfg.slot_hours, atol=1e-5)
        assert np.all(inst.queue.q_init >= inst.queue.q_min)
        assert np.all(inst.queue.q_init <= inst.queue.q_max)

    def test_signal_sized_for_var_fitting(self):
        inst, cfg, trace = build_synthetic(small_params(), seed=9)
        fitted = fit_signal_artifacts(trace, cfg)
        assert min(fitted.var_table.n_windows) >= 30

    def test_default_horizons_include_full_horizon(self):
        hs = default_var_horizons(6, 1.0)
        assert 6.0 in hs and 0.25 in hs and 4.0 in hs
        assert default_var_horizons(3, 1.0)[-1] == 3.0

    def test_invalid_shape_rejected(self):
        with pytest.raises(ValueError, match="buses"):
            build_synthetic(GenParams(n_dc=4, n_buses=3), seed=1)


class TestBundleIo:
    def test_round_trip(self, tmp_path):
        params = small_params()
        generate_instance(params, 11, tmp_path / "b")
        inst, cfg, trace = load_bundle(tmp_path / "b")
        fresh, fresh_cfg, fresh_trace = build_synthetic(params, 11)
        assert inst.n_dc == fresh.n_dc
        assert [j.id for j in inst.jobs] == [j.id for j in fresh.jobs]
        assert np.allclose(trace.samples, fresh_trace.samples)
        assert cfg.var_horizons == fresh_cfg.var_horizons
        assert np.allclose(inst.queue.arrivals, fresh.queue.arrivals)

    def test_byte_identical_for_same_seed(self, tmp_path):
        generate_instance(small_params(), 42, tmp_path / "a")
        generate_instance(small_params(), 42, tmp_path / "b")
        for name in ("grid.json", "workload.csv", "latency.csv", "signal.csv",
                     "dc.json", "config.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_different_seed_differs(self, tmp_path):
        generate_instance(small_params(), 1, tmp_path / "a")
        generate_instance(small_params(), 2, tmp_path / "b")
        assert (tmp_path / "a" / "workload.csv").read_bytes() != (tmp_path / "b" / "workload.csv").read_bytes()

    def test_missing_file_reported(self, tmp_path):
        generate_instance(small_params(), 3, tmp_path / "b")
        (tmp_path / "b" / "dc.json").unlink()
        with pytest.raises(FileNotFoundError, match="dc.json"):
            load_bundle(tmp_path / "b")


class TestDemoPackageData:
    def test_bundled_case_is_valid(self):
        case = demo_case()
        assert validate_case(case) == []
        assert len(case.buses) == 6 and len(case.generators) == 2

    def test_static_files_match_generator_output(self, tmp_path):
        generate_instance(demo_params(), DEMO_SEED, tmp_path / "demo")
        for name in ("grid.json", "dc.json", "workload.csv", "latency.csv", "config.json"):
            static = (demo_data_dir() / name).read_bytes()
            fresh = (tmp_path / "demo" / name).read_bytes()
            assert static == fresh, f"{name} drifted from the generator output"


def test_cc_stress_preset_has_loose_caps():
    inst, cfg, trace = build_synthetic(cc_stress_params(), seed=100)
    nodal = load_matrix(inst.x_base, inst.jobs, cfg.slot_hours)
    for l, dc in enumerate(inst.dcs):
        active = nodal[l] > 0
        assert np.all(dc.p_max[active] >= 3.0 * nodal[l][active])
