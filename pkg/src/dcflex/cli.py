"""Command-line workflow: generate, fit, solve, simulate, compare, report.

Every command is deterministic given its inputs and an explicit seed, and
writes its artifacts under --out together with a manifest of content
hashes. Exit codes: 0 success, 2 infeasible model, 3 validation failure,
4 input/configuration error.
"""

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .instance import (
    GenParams,
    PRESETS,
    fit_signal_artifacts,
    generate_instance,
    load_bundle,
)
from .optimizer import (
    InfeasibleModel,
    ModelConfig,
    resolve_config,
    run_strategy,
    solution_from_json,
    solution_to_json,
)
from .signals import (
    build_var_table,
    empirical_quantile,
    fit_direct_gaussian,
    fit_gaussian_envelope,
    inverse_normal_cdf,
    mean_abs_signal,
    read_trace_csv,
)
from .simulator import compliance_report, monte_carlo, results_digest, write_series_csv
from .validate import validate_solution
from .workload import load_matrix

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_VALIDATION = 3
EXIT_INPUT = 4


@dataclass
class ExperimentConfig:
    """Full run configuration: paths, model overrides, backend, simulation.

    A --config JSON file mirrors this layout: top-level keys ``backend``,
    ``scenarios``, ``seed``, ``threshold``, ``split``, and a ``model``
    object of ModelConfig fields. Command-line flags override file values.
    Seeds are always explicit; there is no wall-clock default.
    """

    bundle: str | None = None
    out: str | None = None
    backend: str = "bundled"
    scenarios: int = 20
    seed: int | None = None
    threshold: float | None = None
    split: float | None = None
    model: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{path}: unknown experiment config keys {sorted(unknown)}")
        return cls(**data)

    def merge_flags(self, args) -> "ExperimentConfig":
        merged = replace(self)
        for name in ("bundle", "out", "backend", "scenarios", "seed",
                     "threshold", "split"):
            value = getattr(args, name, None)
            if value is not None:
                setattr(merged, name, value)
        return merged

    def validate_paths(self, need_bundle: bool = True) -> None:
        if need_bundle:
            if not self.bundle:
                raise ValueError("no bundle directory configured")
            if not Path(self.bundle).is_dir():
                raise FileNotFoundError(f"bundle directory {self.bundle} does not exist")
        if not self.out:
            raise ValueError("no output directory configured")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _update_manifest(out_dir: Path, paths) -> None:
    manifest_path = out_dir / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for p in paths:
        p = Path(p)
        manifest[str(p.relative_to(out_dir))] = _sha256(p)
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _say(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message)


def _experiment(args, need_bundle: bool = True) -> "ExperimentConfig":
    exp = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    exp = exp.merge_flags(args)
    exp.validate_paths(need_bundle)
    return exp


def _resolve_model_config(bundle_cfg: ModelConfig, exp: "ExperimentConfig", args) -> ModelConfig:
    data = bundle_cfg.to_dict()
    data.update(exp.model)
    for flag, key in (("mode", "shifting_mode"), ("strategy", "strategy"),
                      ("signal_model", "signal_model"), ("eps_p", "eps_p"),
                      ("eps_e", "eps_e")):
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    return ModelConfig.from_dict(data)


def cmd_gen_instance(args) -> int:
    out = Path(args.out)
    if args.preset:
        params = PRESETS[args.preset]()
    else:
        params = GenParams()
    overrides = {}
    for flag, key in (("n_dc", "n_dc"), ("slots", "n_slots"), ("clusters", "n_clusters"),
                      ("buses", "n_buses"), ("gens", "n_gens"),
                      ("signal_kind", "signal_kind"), ("signal_days", "signal_days"),
                      ("signal_dt", "signal_dt_seconds")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if overrides:
        params = replace(params, **overrides)
    paths = generate_instance(params, args.seed, out)
    _update_manifest(out, paths)
    _say(args, f"wrote instance bundle to {out} (seed {args.seed})")
    return EXIT_OK


def _fit_report(trace, cfg: ModelConfig) -> tuple[dict, dict, dict]:
    fit_seg, _ = trace.split(cfg.fit_split)
    envelope = fit_gaussian_envelope(fit_seg, quantile_grid=cfg.quantile_grid)
    direct = fit_direct_gaussian(fit_seg)
    table = build_var_table(fit_seg, horizons=cfg.var_horizons, eps_e=cfg.eps_e)
    margins = []
    for q in cfg.quantile_grid:
        emp = empirical_quantile(fit_seg.samples, q)
        margins.append({
            "quantile": q,
            "empirical": emp,
            "envelope": envelope.mu + inverse_normal_cdf(q) * envelope.sigma,
            "dominance_margin": envelope.mu + inverse_normal_cdf(q) * envelope.sigma - emp,
        })
    env_doc = {"mu": envelope.mu, "sigma": envelope.sigma, "source": envelope.source,
               "direct_mu": direct.mu, "direct_sigma": direct.sigma}
    table_doc = {
        "eps_e": table.eps_e,
        "horizons": list(table.horizons),
        "s_low": list(table.s_low),
        "s_high": list(table.s_high),
        "n_windows": list(table.n_windows),
    }
    report = {
        "samples_fit": len(fit_seg),
        "samples_held_out": len(trace) - len(fit_seg),
        "mean_abs_signal": mean_abs_signal(fit_seg),
        "dominance": margins,
    }
    return env_doc, table_doc, report


def cmd_fit_signal(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = read_trace_csv(args.trace)
    cfg = ModelConfig()
    if args.eps_e is not None:
        cfg = replace(cfg, eps_e=args.eps_e)
    if args.split is not None:
        cfg = replace(cfg, fit_split=args.split)
    if args.horizons:
        cfg = replace(cfg, var_horizons=tuple(float(h) for h in args.horizons.split(",")))
    env_doc, table_doc, report = _fit_report(trace, cfg)
    paths = [
        _write_json(out / "envelope.json", env_doc),
        _write_json(out / "var_table.json", table_doc),
        _write_json(out / "fit_report.json", report),
    ]
    _update_manifest(out, paths)
    _say(args, f"fitted signal: mu={env_doc['mu']:.5f} sigma={env_doc['sigma']:.5f} "
               f"(direct sigma {env_doc['direct_sigma']:.5f})")
    return EXIT_OK


def _solve_bundle(bundle_dir, cfg: ModelConfig, backend: str):
    inst, _, trace = load_bundle(bundle_dir)
    fitted = fit_signal_artifacts(trace, cfg)
    solution = run_strategy(inst, cfg, fitted, backend=backend)
    return inst, trace, fitted, solution


def cmd_solve(args) -> int:
    exp = _experiment(args)
    out = Path(exp.out)
    out.mkdir(parents=True, exist_ok=True)
    inst, bundle_cfg, trace = load_bundle(exp.bundle)
    cfg = _resolve_model_config(bundle_cfg, exp, args)
    fitted = fit_signal_artifacts(trace, cfg)
    cfg = resolve_config(cfg, inst.n_slots, fitted.mean_abs)
    solution = run_strategy(inst, cfg, fitted, backend=exp.backend)
    report = validate_solution(inst, cfg, fitted, solution)
    env_doc, table_doc, fit_doc = _fit_report(trace, cfg)
    paths = [
        _write_json(out / "envelope.json", env_doc),
        _write_json(out / "var_table.json", table_doc),
        _write_json(out / "fit_report.json", fit_doc),
        _write_json(out / "validation.json", report.to_dict()),
    ]
    sol_path = out / "solution.json"
    solution_to_json(solution, inst.jobs, sol_path)
    paths.append(sol_path)
    _update_manifest(out, paths)
    _say(args, f"status {solution.status}; net cost {solution.objective_total:.3f} "
               f"(generation {solution.generation_cost:.3f}, revenue "
               f"{solution.regulation_revenue:.3f}); validation "
               f"{'clean' if report.ok else 'VIOLATIONS'}")
    if not report.ok:
        for v in report.violations[:10]:
            _say(args, f"  violation: {v}")
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_simulate(args) -> int:
    exp = _experiment(args)
    if exp.seed is None:
        raise ValueError("simulate needs an explicit --seed (flag or config)")
    out = Path(exp.out)
    out.mkdir(parents=True, exist_ok=True)
    inst, bundle_cfg, trace = load_bundle(exp.bundle)
    cfg = _resolve_model_config(bundle_cfg, exp, args)
    if exp.threshold is not None:
        cfg = replace(cfg, compliance_threshold=exp.threshold)
    if exp.split is not None:
        cfg = replace(cfg, fit_split=exp.split)
    solution = solution_from_json(args.solution)
    fitted = fit_signal_artifacts(trace, cfg)
    cfg = resolve_config(cfg, inst.n_slots, fitted.mean_abs)
    _, held_out = trace.split(cfg.fit_split)
    results, agg = monte_carlo(inst, cfg, fitted, solution, held_out,
                               n_scenarios=exp.scenarios, seed=exp.seed)
    agg["digest"] = results_digest(agg)
    paths = [
        _write_json(out / "sim_summary.json", agg),
        _write_json(out / "compliance.json",
                    compliance_report(results, cfg.compliance_threshold)),
    ]
    first = results[0]
    per_slot = first.samples_per_slot
    needed = per_slot * inst.n_slots
    from .signals import RegulationTrace

    segment = RegulationTrace(
        held_out.samples[first.trace_offset:first.trace_offset + needed].copy(),
        held_out.dt_seconds,
    )
    series_path = out / "series_scenario0.csv"
    write_series_csv(first, inst, segment, series_path)
    paths.append(series_path)
    frontier_path = out / "frontier.csv"
    with open(frontier_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps_p", "eps_e", "signal_model", "committed_r_mw",
                         "power_violation_rate", "committed_revenue",
                         "realized_revenue_mean"])
        writer.writerow([
            repr(cfg.eps_p), repr(cfg.eps_e), cfg.signal_model,
            repr(float(solution.reg.sum())),
            repr(agg["power_violation_rate_mean"]),
            repr(agg["committed_revenue"]),
            repr(agg["realized_revenue_mean"]),
        ])
    paths.append(frontier_path)
    _update_manifest(out, paths)
    _say(args, f"{len(results)} scenarios, power violation rate "
               f"{agg['power_violation_rate_mean']:.5f}, realized revenue "
               f"{agg['realized_revenue_mean']:.3f} of {agg['committed_revenue']:.3f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inst, bundle_cfg, trace = load_bundle(args.bundle)
    strategies = args.strategies.split(",") if args.strategies else ["cooperative"]
    modes = args.modes.split(",") if args.modes else [bundle_cfg.shifting_mode]
    cells = [(s, m) for s in strategies for m in modes]
    if len(cells) < 1:
        raise ValueError("compare needs at least one strategy/mode cell")
    rows, errors = [], []
    paths = []
    base_total = np.sum([b.base_load for b in inst.grid.buses], axis=0)
    for strategy, mode in cells:
        cfg = replace(bundle_cfg, strategy=strategy, shifting_mode=mode)
        fitted = fit_signal_artifacts(trace, cfg)
        cfg = resolve_config(cfg, inst.n_slots, fitted.mean_abs)
        try:
            solution = run_strategy(inst, cfg, fitted, backend=args.backend)
            report = validate_solution(inst, cfg, fitted, solution)
            if not report.ok:
                errors.append({"strategy": strategy, "mode": mode,
                               "error": f"{len(report.violations)} validation violations"})
                continue
        except InfeasibleModel as exc:
            errors.append({"strategy": strategy, "mode": mode, "error": str(exc),
                           "families": exc.family_report})
            continue
        dc_load = load_matrix(solution.x, inst.jobs, cfg.slot_hours)
        system = base_total + dc_load.sum(axis=0)
        rows.append({
            "strategy": strategy,
            "mode": mode,
            "average_load_mw": float(dc_load.sum(axis=0).mean()),
            "total_cost_kusd": (solution.generation_cost + solution.penalty_cost
                                 + solution.migration_cost) / 1000.0,
            "average_regulation_capacity_mw": float(solution.reg.mean()),
            "regulation_profit_kusd": solution.regulation_revenue / 1000.0,
            "net_cost_kusd": solution.objective_total / 1000.0,
            "peak_system_load_mw": float(system.max()),
        })
        curve_path = out / f"loadcurve_{strategy}_{mode}.csv"
        with open(curve_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slot", "base_load_mw", "dc_load_mw", "system_load_mw"])
            for t in range(inst.n_slots):
                writer.writerow([t + 1, repr(float(base_total[t])),
                                 repr(float(dc_load.sum(axis=0)[t])),
                                 repr(float(system[t]))])
        paths.append(curve_path)
    table_path = out / "compare.csv"
    fieldnames = ["strategy", "mode", "average_load_mw", "total_cost_kusd",
                  "average_regulation_capacity_mw", "regulation_profit_kusd",
                  "net_cost_kusd", "peak_system_load_mw"]
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
    paths.append(table_path)
    paths.append(_write_json(out / "compare.json", {"rows": rows, "errors": errors}))
    _update_manifest(out, paths)
    for row in rows:
        _say(args, f"{row['strategy']:12s} {row['mode']:9s} "
                   f"net {row['net_cost_kusd']:10.4f} k$  "
                   f"avg R {row['average_regulation_capacity_mw']:7.3f} MW")
    if errors and not rows:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{out}: no manifest.json; run a command first")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    lines = ["# Run report", "", "## Artifacts", ""]
    for name, digest in sorted(manifest.items()):
        lines.append(f"- `{name}` sha256 `{digest[:16]}...`")
    for probe, title in (("solution.json", "Solution"),
                         ("sim_summary.json", "Simulation"),
                         ("compare.json", "Comparison")):
        path = out / probe
        if not path.exists():
            continue
        data = json.loads(path.read_text(encoding="utf-8"))
        lines += ["", f"## {title}", ""]
        if probe == "solution.json":
            br = data["breakdown"]
            lines.append(f"- status: {data['status']}")
            lines.append(f"- net cost: {br['net_cost']:.3f} $")
            lines.append(f"- generation: {br['generation_cost']:.3f} $, "
                         f"revenue: {br['regulation_revenue']:.3f} $")
        elif probe == "sim_summary.json":
            lines.append(f"- scenarios: {data['scenarios']}, samples: {data['samples_total']}")
            lines.append(f"- power violation rate: {data['power_violation_rate_mean']:.5f}")
            lines.append(f"- realized revenue: {data['realized_revenue_mean']:.3f} "
                         f"of {data['committed_revenue']:.3f} $")
        else:
            for row in data.get("rows", []):
                lines.append(f"- {row['strategy']}/{row['mode']}: "
                             f"net {row['net_cost_kusd']:.4f} k$")
    report_path = out / "report.md"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _update_manifest(out, [report_path])
    _say(args, f"wrote {report_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcflex",
        description="Co-optimized data center scheduling and regulation bidding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_seed=False):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--quiet", action="store_true")
        if needs_seed:
            p.add_argument("--seed", type=int, required=True,
                           help="explicit seed (no wall-clock default)")

    g = sub.add_parser("gen-instance", help="write a synthetic instance bundle")
    common(g, needs_seed=True)
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--n-dc", type=int, dest="n_dc")
    g.add_argument("--slots", type=int)
    g.add_argument("--clusters", type=int)
    g.add_argument("--buses", type=int)
    g.add_argument("--gens", type=int)
    g.add_argument("--signal-kind", dest="signal_kind")
    g.add_argument("--signal-days", type=float, dest="signal_days")
    g.add_argument("--signal-dt", type=float, dest="signal_dt")
    g.set_defaults(func=cmd_gen_instance)

    f = sub.add_parser("fit-signal", help="fit envelope and VaR table from a trace")
    common(f)
    f.add_argument("--trace", required=True)
    f.add_argument("--eps-e", type=float, dest="eps_e")
    f.add_argument("--split", type=float)
    f.add_argument("--horizons", help="comma-separated window hours")
    f.set_defaults(func=cmd_fit_signal)

    s = sub.add_parser("solve", help="solve a bundle day-ahead")
    common(s)
    s.add_argument("--bundle", help="instance bundle directory (or via --config)")
    s.add_argument("--mode", choices=["none", "spatial", "temporal", "joint"])
    s.add_argument("--strategy", choices=["decoupled", "independent", "cooperative"])
    s.add_argument("--signal-model", dest="signal_model",
                   choices=["direct_gaussian", "envelope"])
    s.add_argument("--eps-p", type=float, dest="eps_p")
    s.add_argument("--eps-e", type=float, dest="eps_e")
    s.add_argument("--backend", help="bundled (default) or cmd:<command>")
    s.add_argument("--config", help="JSON experiment-config file")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="replay signals against a solution")
    common(m)
    m.add_argument("--bundle", help="instance bundle directory (or via --config)")
    m.add_argument("--solution", required=True)
    m.add_argument("--seed", type=int, help="explicit scenario seed")
    m.add_argument("--scenarios", type=int)
    m.add_argument("--threshold", type=float)
    m.add_argument("--split", type=float)
    m.add_argument("--eps-p", type=float, dest="eps_p",
                   help="echoed into the frontier row")
    m.add_argument("--eps-e", type=float, dest="eps_e")
    m.add_argument("--signal-model", dest="signal_model",
                   choices=["direct_gaussian", "envelope"])
    m.add_argument("--config", help="JSON experiment-config file")
    m.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="strategy/mode comparison table")
    common(c)
    c.add_argument("--bundle", required=True)
    c.add_argument("--strategies", help="comma-separated strategy list")
    c.add_argument("--modes", help="comma-separated mode list")
    c.add_argument("--backend", default="bundled")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("report", help="summarize an output directory")
    common(r)
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleModel as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        for family, amount in exc.family_report.items():
            print(f"  binding family {family}: total violation {amount}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
