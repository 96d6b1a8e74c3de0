"""Intra-slot delivery simulation of committed regulation capacity.

Replays a regulation-signal segment against a solved commitment: per
sample, DC power is the scheduled nodal load minus signal times committed
capacity; the backlog queue absorbs the cumulative regulation energy on
top of scheduled service. Violations are counted per sample and at the
same checkpoint set the optimizer constrained, and revenue is settled per
slot against a compliance threshold.
"""

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .optimizer import (
    FittedSignal,
    ModelConfig,
    ProblemInstance,
    Solution,
    queue_check_points,
    resolve_config,
)
from .signals import RegulationTrace, empirical_quantile
from .workload import load_matrix

SIM_TOL = 1e-9


@dataclass
class ScenarioResult:
    """One replayed scenario: trajectories, violations, settled revenue."""

    scenario_id: int
    trace_offset: int
    power: np.ndarray            # (N, T, K) MW
    queue: np.ndarray            # (N, T*K + 1) MWh-equivalent
    power_violation_frac: np.ndarray   # (N, T) per-slot sample fraction
    queue_violation_frac: np.ndarray   # (N, T) per-slot sample fraction
    checkpoint_ok: list          # (dc, slot, tau_h, horizon_h, value, ok)
    slot_compliant: np.ndarray   # (N, T) bool at the configured threshold
    committed_revenue: float
    realized_revenue: float
    samples_per_slot: int

    @property
    def n_samples(self) -> int:
        return int(self.power_violation_frac.size * self.samples_per_slot)

    @property
    def power_violation_rate(self) -> float:
        return float(self.power_violation_frac.mean())

    @property
    def queue_violation_rate(self) -> float:
        return float(self.queue_violation_frac.mean())

    @property
    def checkpoint_coverage(self) -> float:
        if not self.checkpoint_ok:
            return 1.0
        return float(np.mean([1.0 if ok else 0.0 for *_, ok in self.checkpoint_ok]))

    def summary(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "trace_offset": self.trace_offset,
            "power_violation_rate": self.power_violation_rate,
            "queue_violation_rate": self.queue_violation_rate,
            "checkpoint_coverage": self.checkpoint_coverage,
            "checkpoints_total": len(self.checkpoint_ok),
            "slots_compliant": int(self.slot_compliant.sum()),
            "slots_total": int(self.slot_compliant.size),
            "committed_revenue": self.committed_revenue,
            "realized_revenue": self.realized_revenue,
            "n_samples": self.n_samples,
        }


def simulate(
    inst: ProblemInstance,
    cfg: ModelConfig,
    solution: Solution,
    segment: RegulationTrace,
    scenario_id: int = 0,
    trace_offset: int = 0,
) -> ScenarioResult:
    """Replay one horizon-length signal segment against a solution.

    ``cfg`` must be price-resolved (m_bar set). The segment must cover the
    whole horizon at its sampling interval.
    """
    if cfg.m_bar is None:
        raise ValueError("resolve the config (m_bar) before simulating")
    t_total, n_dc = inst.n_slots, inst.n_dc
    per_slot = int(round(cfg.slot_hours * 3600.0 / segment.dt_seconds))
    needed = per_slot * t_total
    if len(segment) < needed:
        raise ValueError(
            f"trace segment has {len(segment)} samples, horizon needs {needed}"
        )
    s = segment.samples[:needed].reshape(t_total, per_slot)
    dh_sample = segment.dt_seconds / 3600.0
    nodal = load_matrix(solution.x, inst.jobs, cfg.slot_hours)
    reg = solution.reg

    p_min = np.stack([dc.p_min for dc in inst.dcs])
    p_max = np.stack([dc.p_max for dc in inst.dcs])
    power = nodal[:, :, None] - s[None, :, :] * reg[:, :, None]
    viol_lo = power < p_min[:, :, None] - SIM_TOL
    viol_hi = power > p_max[:, :, None] + SIM_TOL
    power_violation_frac = (viol_lo | viol_hi).mean(axis=2)

    # Queue: arrivals prorate uniformly; service is scheduled energy per
    # sample shifted by the regulation energy (positive signal slows
    # computing, so the backlog grows with +s).
    queue = np.empty((n_dc, t_total * per_slot + 1))
    queue[:, 0] = inst.queue.q_init
    q_viol_frac = np.zeros((n_dc, t_total))
    for t in range(t_total):
        arrive = inst.queue.arrivals[:, t][:, None] / per_slot
        serve = nodal[:, t][:, None] * dh_sample
        regen = reg[:, t][:, None] * s[t][None, :] * dh_sample
        delta = arrive - serve + regen
        start = queue[:, t * per_slot]
        block = start[:, None] + np.cumsum(delta, axis=1)
        queue[:, t * per_slot + 1: (t + 1) * per_slot + 1] = block
        outside = (block < inst.queue.q_min[:, None] - SIM_TOL) | (
            block > inst.queue.q_max[:, None] + SIM_TOL
        )
        q_viol_frac[:, t] = outside.mean(axis=1)

    checkpoint_ok = []
    for cp in queue_check_points(t_total, cfg.slot_hours, cfg.var_horizons):
        k = int(round(cp.tau_hours * 3600.0 / segment.dt_seconds))
        k = min(k, t_total * per_slot)
        for l in range(n_dc):
            value = float(queue[l, k])
            ok = (inst.queue.q_min[l] - SIM_TOL <= value
                  <= inst.queue.q_max[l] + SIM_TOL)
            checkpoint_ok.append(
                (inst.dcs[l].id, cp.slot, cp.tau_hours, cp.horizon_hours, value, bool(ok))
            )

    slot_compliant = power_violation_frac <= cfg.compliance_threshold + SIM_TOL
    rev_rate = cfg.revenue_rate(t_total, 0.0)
    committed = float(sum(rev_rate[t] * reg[:, t].sum() * cfg.slot_hours
                          for t in range(t_total)))
    realized = 0.0
    for l in range(n_dc):
        for t in range(t_total):
            pay = rev_rate[t] * reg[l, t] * cfg.slot_hours
            if cfg.forfeiture == "proportional":
                realized += pay * (1.0 - float(power_violation_frac[l, t]))
            elif slot_compliant[l, t]:
                realized += pay
    return ScenarioResult(
        scenario_id=scenario_id,
        trace_offset=trace_offset,
        power=power,
        queue=queue,
        power_violation_frac=power_violation_frac,
        queue_violation_frac=q_viol_frac,
        checkpoint_ok=checkpoint_ok,
        slot_compliant=slot_compliant,
        committed_revenue=committed,
        realized_revenue=float(realized),
        samples_per_slot=per_slot,
    )


def monte_carlo(
    inst: ProblemInstance,
    cfg: ModelConfig,
    fitted: FittedSignal,
    solution: Solution,
    held_out: RegulationTrace,
    n_scenarios: int,
    seed: int,
) -> tuple[list[ScenarioResult], dict]:
    """Replay seeded random windows of the held-out trace; aggregate stats.

    Deterministic for a given (solution, trace, seed); scenario windows may
    overlap when the held-out segment is short.
    """
    if n_scenarios < 1:
        raise ValueError("need at least one scenario")
    cfg = resolve_config(cfg, inst.n_slots, fitted.mean_abs)
    per_slot = int(round(cfg.slot_hours * 3600.0 / held_out.dt_seconds))
    needed = per_slot * inst.n_slots
    if len(held_out) < needed:
        raise ValueError(
            f"held-out trace has {len(held_out)} samples, scenarios need {needed}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    max_start = len(held_out) - needed
    starts = sorted(int(v) for v in rng.integers(0, max_start + 1, size=n_scenarios))
    results = []
    for sid, start in enumerate(starts):
        segment = RegulationTrace(held_out.samples[start:start + needed].copy(),
                                  held_out.dt_seconds)
        results.append(simulate(inst, cfg, solution, segment,
                                scenario_id=sid, trace_offset=start))
    return results, aggregate(results)


def aggregate(results: list[ScenarioResult]) -> dict:
    """Deterministic cross-scenario statistics keyed for JSON export."""
    if not results:
        raise ValueError("no scenarios to aggregate")
    power_rates = [r.power_violation_rate for r in results]
    queue_rates = [r.queue_violation_rate for r in results]
    coverages = [r.checkpoint_coverage for r in results]
    revenues = [r.realized_revenue for r in results]
    n_dc = results[0].power_violation_frac.shape[0]
    per_dc = []
    for l in range(n_dc):
        per_dc.append({
            "power_violation_rate": float(np.mean([r.power_violation_frac[l].mean() for r in results])),
            "queue_violation_rate": float(np.mean([r.queue_violation_frac[l].mean() for r in results])),
            "slot_compliance_rate": float(np.mean([r.slot_compliant[l].mean() for r in results])),
        })
    total_checkpoints = sum(len(r.checkpoint_ok) for r in results)
    ok_checkpoints = sum(1 for r in results for *_, ok in r.checkpoint_ok if ok)
    return {
        "scenarios": len(results),
        "samples_total": int(sum(r.n_samples for r in results)),
        "power_violation_rate_mean": float(np.mean(power_rates)),
        "power_violation_rate_max": float(np.max(power_rates)),
        "queue_violation_rate_mean": float(np.mean(queue_rates)),
        "checkpoint_coverage_mean": float(np.mean(coverages)),
        "checkpoint_coverage_overall": (
            ok_checkpoints / total_checkpoints if total_checkpoints else 1.0
        ),
        "checkpoints_total": int(total_checkpoints),
        "committed_revenue": float(results[0].committed_revenue),
        "realized_revenue_mean": float(np.mean(revenues)),
        "realized_revenue_p05": empirical_quantile(revenues, 0.05),
        "realized_revenue_p95": empirical_quantile(revenues, 0.95),
        "per_dc": per_dc,
    }


def compliance_report(results: list[ScenarioResult], threshold: float = 0.25) -> dict:
    """Per-slot/per-DC pass rates and revenue retention at a threshold."""
    if not results:
        raise ValueError("no scenarios to report on")
    n_dc, t_total = results[0].power_violation_frac.shape
    passes = np.zeros((n_dc, t_total))
    for r in results:
        passes += (r.power_violation_frac <= threshold + SIM_TOL)
    passes /= len(results)
    committed = results[0].committed_revenue
    realized = float(np.mean([r.realized_revenue for r in results]))
    return {
        "threshold": threshold,
        "slot_pass_rate": [[float(v) for v in row] for row in passes],
        "pass_rate_overall": float(passes.mean()),
        "revenue_retention": realized / committed if committed > 0 else 1.0,
    }


def write_series_csv(result: ScenarioResult, inst: ProblemInstance,
                     segment: RegulationTrace, path) -> None:
    """One row per (dc, slot, sample): signal, power, queue, violations."""
    per_slot = result.samples_per_slot
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dc", "slot", "k", "s", "power_mw", "queue_mwh",
                         "power_violation", "queue_violation"])
        for l, dc in enumerate(inst.dcs):
            for t in range(result.power.shape[1]):
                for k in range(per_slot):
                    sval = float(segment.samples[t * per_slot + k])
                    p = float(result.power[l, t, k])
                    q = float(result.queue[l, t * per_slot + k + 1])
                    pv = int(p < dc.p_min[t] - SIM_TOL or p > dc.p_max[t] + SIM_TOL)
                    qv = int(q < inst.queue.q_min[l] - SIM_TOL
                             or q > inst.queue.q_max[l] + SIM_TOL)
                    writer.writerow([dc.id, t + 1, k + 1, repr(sval), repr(p),
                                     repr(q), pv, qv])


def results_digest(aggregate_stats: dict) -> str:
    """Stable content hash of an aggregate summary (reproducibility checks)."""
    blob = json.dumps(aggregate_stats, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
