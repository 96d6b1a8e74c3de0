"""Instance bundles: on-disk format, loading, and synthetic generation.

A bundle directory holds grid.json, workload.csv, latency.csv, signal.csv,
dc.json, and config.json. The synthetic generator builds desk-scale
instances that are feasible by construction (the baseline assignment
witnesses feasibility of every constraint family) and deterministic per
seed; presets cover the shipped demo shape and a chance-constraint stress
shape used for signal-model comparisons.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Bus, Generator, GridCase, Line, read_grid_json, write_grid_json
from .optimizer import ModelConfig, ProblemInstance, QueueParameters
from .signals import (
    RegulationTrace,
    build_var_table,
    fit_direct_gaussian,
    fit_gaussian_envelope,
    generate_trace,
    mean_abs_signal,
    read_trace_csv,
    write_trace_csv,
)
from .optimizer import FittedSignal
from .workload import (
    DataCenterSpec,
    JobCluster,
    LatencyMap,
    baseline_assignment,
    load_matrix,
    read_latency_csv,
    read_workload_csv,
    write_latency_csv,
    write_workload_csv,
)

BUNDLE_FILES = ("grid.json", "workload.csv", "latency.csv", "signal.csv",
                "dc.json", "config.json")

CLASS_ENERGY_SHARES = {"fixed": 0.5, "interactive": 0.3, "deferrable": 0.2}


@dataclass(frozen=True)
class GenParams:
    """Shape knobs of the synthetic instance generator."""

    n_dc: int = 3
    n_slots: int = 6
    n_clusters: int = 9
    n_buses: int = 6
    n_gens: int = 2
    signal_kind: str = "sinusoid_noise"
    signal_dt_seconds: float = 4.0
    signal_days: float | None = None  # None -> sized from the VaR horizons
    slot_hours: float = 1.0
    dc_energy_share: float = 0.35
    power_headroom: float = 1.7  # p_max multiple of the baseline profile
    pcap_slack_frac: float = 0.6  # flat p_max slack, fraction of mean profile
    p_min_fraction: float = 0.25
    # Tight backlog bounds are the coupling that punishes revenue-blind
    # scheduling: parking the queue near a wall leaves no headroom for the
    # committed band's cumulative energy swings.
    queue_band_hours: float = 1.2
    reg_price_scale: float = 2.2
    delta_qos: float = 6.0
    eps_p: float = 0.05
    eps_e: float = 0.05
    migration_fric_mwh: float = 5.0  # $ per MWh-equivalent moved one hop
    arrival_spread: str = "peaked"  # or "uniform"
    region_mix: str = "random"  # or "round_robin"


def demo_params() -> GenParams:
    """The shipped desk-scale shape: 6 buses, 2 generators, 3 DCs."""
    return GenParams()


def small_params() -> GenParams:
    """Compact shape for randomized sweeps."""
    return GenParams(n_dc=2, n_slots=4, n_clusters=6, n_buses=4, n_gens=2)


def cc_stress_params() -> GenParams:
    """Chance-constraint stress shape: heavy-tailed signal, loose caps.

    Power headroom and queue bands are widened so the upward chance
    constraint is the binding limit on committed capacity at every node,
    which is the regime that separates envelope and direct-Gaussian fits.
    """
    return GenParams(
        n_dc=2, n_slots=4, n_clusters=16, n_buses=4, n_gens=2,
        signal_kind="heavy_tailed", power_headroom=4.0, pcap_slack_frac=2.0,
        p_min_fraction=0.3, queue_band_hours=60.0, reg_price_scale=3.0,
        arrival_spread="uniform", region_mix="round_robin",
    )


PRESETS = {"demo": demo_params, "small": small_params, "cc_stress": cc_stress_params}

DEMO_SEED = 7


def demo_data_dir() -> Path:
    return Path(__file__).parent / "data" / "demo"


def demo_case():
    """The bundled desk-scale grid case (6 buses, 2 generators)."""
    return read_grid_json(demo_data_dir() / "grid.json")


def materialize_demo(out_dir) -> list[Path]:
    """Write the full demo bundle (static shape plus deterministic signal)."""
    return generate_instance(demo_params(), DEMO_SEED, out_dir)


def default_var_horizons(n_slots: int, slot_hours: float) -> tuple[float, ...]:
    """Sub-hour windows plus whole-slot windows up to four slots, plus the
    full horizon when longer (cheap drift protection)."""
    hs = [0.25 * slot_hours, 0.5 * slot_hours]
    hs += [k * slot_hours for k in range(1, min(4, n_slots) + 1)]
    full = n_slots * slot_hours
    if full > hs[-1] + 1e-9:
        hs.append(full)
    return tuple(hs)


def _signal_days(params: GenParams) -> float:
    if params.signal_days is not None:
        return params.signal_days
    horizon_h = params.n_slots * params.slot_hours
    fit_hours = 30.0 * horizon_h / 0.7  # 30 windows of the longest horizon
    return math.ceil(fit_hours / 24.0) + 1.0


def build_synthetic(params: GenParams, seed: int) -> tuple[ProblemInstance, ModelConfig, RegulationTrace]:
    """Deterministic in-memory instance for a seed; see generate_instance
    for the on-disk variant."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n_dc, t_total = params.n_dc, params.n_slots
    n_bus, n_gen = params.n_buses, params.n_gens
    if n_bus < max(2, n_dc):
        raise ValueError("need at least as many buses as DCs (and two overall)")
    dh = params.slot_hours

    # Peaked daily base-load shape; DCs and temporal shifting act against it.
    t_axis = np.arange(t_total)
    peak_slot = t_total * 0.55
    shape = 1.0 + 0.8 * np.exp(-((t_axis - peak_slot) / (0.22 * t_total + 0.6)) ** 2)
    bus_scale = rng.uniform(8.0, 15.0, size=n_bus)
    base_loads = np.outer(bus_scale, shape) * rng.uniform(0.95, 1.05, size=(n_bus, t_total))

    # Workload clusters sized against the base system energy.
    base_energy = float(base_loads.sum()) * dh
    target_dc_energy = params.dc_energy_share * base_energy
    class_of = []
    for cls, share in CLASS_ENERGY_SHARES.items():
        count = max(1, int(round(share * params.n_clusters)))
        class_of += [cls] * count
    class_of = class_of[: params.n_clusters]
    while len(class_of) < params.n_clusters:
        class_of.append("fixed")
    d_kwh = 1.7
    jobs = []
    if params.arrival_spread == "uniform":
        arrival_probs = np.full(t_total, 1.0 / t_total)
    else:
        arrival_probs = shape / shape.sum()
    for i, cls in enumerate(class_of):
        share = CLASS_ENERGY_SHARES[cls] / sum(1 for c in class_of if c == cls)
        energy = target_dc_energy * share * float(rng.uniform(0.7, 1.3))
        weight = energy * 1000.0 / d_kwh
        arrival = int(rng.choice(t_total, p=arrival_probs)) + 1
        if params.region_mix == "round_robin":
            region = f"r{i % n_dc + 1}"
        else:
            region = f"r{int(rng.integers(1, n_dc + 1))}"
        jobs.append(JobCluster(
            id=f"c{i + 1:02d}", user_region=region, arrival_slot=arrival,
            flex_class=cls, weight=round(weight, 3),
            r_cpu=round(float(rng.uniform(0.8, 1.2)), 3),
            r_mem=round(float(rng.uniform(0.8, 1.2)), 3),
            r_io=round(float(rng.uniform(0.3, 0.7)), 3),
            d_kwh_per_task=d_kwh,
        ))

    # Latency grows with ring distance between the user's home DC and the
    # serving DC; the home DC is always strictly nearest.
    entries = {}
    for r in range(1, n_dc + 1):
        for l in range(1, n_dc + 1):
            ring = min(abs(r - l), n_dc - abs(r - l))
            entries[(f"r{r}", l)] = round(5.0 + 8.0 * ring + float(rng.uniform(0.0, 1.0)), 3)
    latmap = LatencyMap(entries)

    # Resource capacities: generous, binding only under heavy concentration.
    total_cpu = sum(j.weight * j.r_cpu for j in jobs)
    total_mem = sum(j.weight * j.r_mem for j in jobs)
    total_io = sum(j.weight * j.r_io for j in jobs)
    dc_buses = sorted(rng.choice(np.arange(1, n_bus + 1), size=n_dc, replace=False).tolist())
    dcs_tmp = []
    for l in range(1, n_dc + 1):
        dcs_tmp.append(DataCenterSpec(
            id=l, bus=int(dc_buses[l - 1]),
            cpu_cap=np.full(t_total, max(1.0, 0.75 * total_cpu)),
            mem_cap=np.full(t_total, max(1.0, 0.75 * total_mem)),
            io_cap=np.full(t_total, max(1.0, 0.75 * total_io)),
            p_min=np.zeros(t_total), p_max=np.full(t_total, 1e6),
            q_min=-1e9, q_max=1e9,
        ))
    x_base = baseline_assignment(jobs, latmap, dcs_tmp)
    nodal_base = load_matrix(x_base, jobs, dh)

    dcs = []
    for l in range(1, n_dc + 1):
        profile = nodal_base[l - 1]
        p_min = params.p_min_fraction * profile
        # Shaping p_max to the profile makes committable capacity depend on
        # the schedule: both draining and saturating a slot costs headroom.
        slack = params.pcap_slack_frac * max(float(profile.mean()), 0.5) + 1.0
        p_max = params.power_headroom * profile + slack
        dcs.append(DataCenterSpec(
            id=l, bus=int(dc_buses[l - 1]),
            cpu_cap=dcs_tmp[l - 1].cpu_cap, mem_cap=dcs_tmp[l - 1].mem_cap,
            io_cap=dcs_tmp[l - 1].io_cap,
            p_min=np.round(p_min, 6), p_max=np.round(p_max, 6),
            q_min=0.0,
            q_max=round(params.queue_band_hours * max(float(profile.mean()), 0.5), 6),
        ))
    q_max = np.array([dc.q_max for dc in dcs])
    queue = QueueParameters(
        q_init=np.round(q_max / 2.0, 6),
        arrivals=np.round(nodal_base * dh, 6),
        q_min=np.zeros(n_dc),
        q_max=q_max,
    )

    # Generators: a cheap base unit plus increasingly expensive peakers.
    system_peak = float((base_loads.sum(axis=0) + nodal_base.sum(axis=0)).max())
    cost_ladder = [25.0, 85.0, 45.0][:n_gen]
    # The cheap unit spans valleys with room for every movable MWh, so the
    # day-ahead price seen off-peak stays real after collective shifting.
    cap_ladder = [0.85, 0.65, 0.45][:n_gen]
    gen_buses = rng.choice(np.arange(1, n_bus + 1), size=n_gen, replace=False)
    gens = []
    for g in range(n_gen):
        p_max = round(cap_ladder[g] * system_peak, 4)
        gens.append(Generator(
            id=g + 1, bus=int(gen_buses[g]),
            cost_per_mwh=round(cost_ladder[g] * float(rng.uniform(0.95, 1.05)), 4),
            p_min=round(0.12 * p_max, 4) if g == 0 else 0.0,
            p_max=p_max,
            ramp_up=round(0.9 * p_max, 4), ramp_down=round(0.9 * p_max, 4),
            startup_ramp=p_max, shutdown_ramp=p_max,
        ))

    # Ring topology plus one chord; limits sized to stay slack at the peak.
    lines = []
    limit = round(1.5 * system_peak, 4)
    for b in range(1, n_bus + 1):
        other = b % n_bus + 1
        lines.append(Line(
            id=b, from_bus=b, to_bus=other,
            susceptance=round(float(rng.uniform(300.0, 600.0)), 4),
            limit_mw=limit,
        ))
    if n_bus >= 4:
        lines.append(Line(
            id=n_bus + 1, from_bus=1, to_bus=n_bus // 2 + 1,
            susceptance=round(float(rng.uniform(300.0, 600.0)), 4),
            limit_mw=limit,
        ))
    buses = tuple(Bus(b, np.round(base_loads[b - 1], 6)) for b in range(1, n_bus + 1))
    grid = GridCase(buses, tuple(lines), tuple(gens), slack_bus=1)

    horizons = default_var_horizons(t_total, dh)
    cfg = ModelConfig(
        eps_p=params.eps_p,
        eps_e=params.eps_e,
        delta_qos=params.delta_qos,
        slot_hours=dh,
        c_rc=round(5.0 * params.reg_price_scale, 4),
        c_rp=round(2.5 * params.reg_price_scale, 4),
        var_horizons=horizons,
        migration_cost=round(params.migration_fric_mwh * d_kwh / 1000.0, 6),
    )

    trace = generate_trace(
        params.signal_kind,
        hours=_signal_days(params) * 24.0,
        dt_seconds=params.signal_dt_seconds,
        seed=int(rng.integers(0, 2**63 - 1)),
    )
    inst = ProblemInstance(tuple(jobs), latmap, tuple(dcs), grid, queue)
    inst.validate()
    return inst, cfg, trace


def save_bundle(out_dir, inst: ProblemInstance, cfg: ModelConfig,
                trace: RegulationTrace) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_grid_json(inst.grid, out / "grid.json")
    write_workload_csv(inst.jobs, out / "workload.csv")
    write_latency_csv(inst.latency, out / "latency.csv")
    write_trace_csv(trace, out / "signal.csv")
    dc_entries = []
    for l, dc in enumerate(inst.dcs):
        dc_entries.append({
            "id": dc.id,
            "bus": dc.bus,
            "cpu_cap": [float(v) for v in dc.cpu_cap],
            "mem_cap": [float(v) for v in dc.mem_cap],
            "io_cap": [float(v) for v in dc.io_cap],
            "p_min": [float(v) for v in dc.p_min],
            "p_max": [float(v) for v in dc.p_max],
            "q_min": float(dc.q_min),
            "q_max": float(dc.q_max),
            "q_init": float(inst.queue.q_init[l]),
            "arrivals": [float(v) for v in inst.queue.arrivals[l]],
        })
    with open(out / "dc.json", "w", encoding="utf-8") as fh:
        json.dump({"dcs": dc_entries}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [out / name for name in BUNDLE_FILES]


def generate_instance(params: GenParams, seed: int, out_dir) -> list[Path]:
    """Build and write a complete bundle; deterministic per seed."""
    inst, cfg, trace = build_synthetic(params, seed)
    return save_bundle(out_dir, inst, cfg, trace)


def load_bundle(bundle_dir) -> tuple[ProblemInstance, ModelConfig, RegulationTrace]:
    bundle = Path(bundle_dir)
    missing = [name for name in BUNDLE_FILES if not (bundle / name).exists()]
    if missing:
        raise FileNotFoundError(f"{bundle}: bundle is missing {missing}")
    grid = read_grid_json(bundle / "grid.json")
    jobs = read_workload_csv(bundle / "workload.csv")
    latmap = read_latency_csv(bundle / "latency.csv")
    trace = read_trace_csv(bundle / "signal.csv")
    with open(bundle / "dc.json", encoding="utf-8") as fh:
        dc_data = json.load(fh)["dcs"]
    dcs = []
    q_init, arrivals, q_min, q_max = [], [], [], []
    for entry in dc_data:
        dcs.append(DataCenterSpec(
            id=int(entry["id"]), bus=int(entry["bus"]),
            cpu_cap=np.asarray(entry["cpu_cap"], dtype=float),
            mem_cap=np.asarray(entry["mem_cap"], dtype=float),
            io_cap=np.asarray(entry["io_cap"], dtype=float),
            p_min=np.asarray(entry["p_min"], dtype=float),
            p_max=np.asarray(entry["p_max"], dtype=float),
            q_min=float(entry["q_min"]), q_max=float(entry["q_max"]),
        ))
        q_init.append(float(entry["q_init"]))
        arrivals.append([float(v) for v in entry["arrivals"]])
        q_min.append(float(entry["q_min"]))
        q_max.append(float(entry["q_max"]))
    queue = QueueParameters(np.array(q_init), np.array(arrivals),
                            np.array(q_min), np.array(q_max))
    with open(bundle / "config.json", encoding="utf-8") as fh:
        cfg = ModelConfig.from_dict(json.load(fh))
    inst = ProblemInstance(tuple(jobs), latmap, tuple(dcs), grid, queue)
    inst.validate()
    return inst, cfg, trace


def fit_signal_artifacts(trace: RegulationTrace, cfg: ModelConfig) -> FittedSignal:
    """Fit envelope, direct moments, and the VaR table on the fitting split."""
    fit_seg, _ = trace.split(cfg.fit_split)
    envelope = fit_gaussian_envelope(fit_seg, quantile_grid=cfg.quantile_grid)
    direct = fit_direct_gaussian(fit_seg)
    var_table = build_var_table(fit_seg, horizons=cfg.var_horizons, eps_e=cfg.eps_e)
    return FittedSignal(envelope, direct, var_table, mean_abs_signal(fit_seg))
