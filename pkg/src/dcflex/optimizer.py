"""Day-ahead co-optimization of workload placement and regulation capacity.

Builds one solver-agnostic model covering grid dispatch with unit
commitment, DC power flow, workload completion/QoS/resource constraints,
the two-sided regulation power limits (deterministic cap downward,
Gaussian chance constraint upward), and Value-at-Risk queue-energy
constraints at sub-hour and multi-slot checkpoints. Also implements the
three bidding strategies (decoupled, independent, cooperative) and the
shifting-mode restrictions (none, spatial, temporal, joint).
"""

import json
import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .bnb import solve_mip
from .grid import GridCase
from .mps import run_external_solver
from .signals import GaussianEnvelope, VaRTable, inverse_normal_cdf
from .simplex import solve_lp
from .spacetime import SpaceTimeIndex, VirtualLink
from .standard_form import INF, StandardFormModel
from .workload import (
    LatencyMap,
    baseline_assignment,
    baseline_latency_profile,
    cluster_energies_mwh,
    load_matrix,
)

SHIFTING_MODES = ("none", "spatial", "temporal", "joint")
STRATEGIES = ("decoupled", "independent", "cooperative")
SIGNAL_MODELS = ("direct_gaussian", "envelope")
BACKEND_BUNDLED = "bundled"

DEFAULT_VAR_HORIZONS = (0.25, 0.5, 1.0, 2.0, 3.0, 4.0)


class ModelBuildError(ValueError):
    """Model assembly failed; the message names the offending family."""


class InfeasibleModel(RuntimeError):
    """Solve came back infeasible; carries a per-family violation report."""

    def __init__(self, message, family_report=None):
        super().__init__(message)
        self.family_report = family_report or {}


@dataclass(frozen=True)
class QueueParameters:
    """Backlog state data per DC: initial level, exogenous arrivals, bounds.

    Arrivals are energy-equivalent MWh per (dc, slot); queue bounds come
    from the DC specs and must bracket the initial level.
    """

    q_init: np.ndarray
    arrivals: np.ndarray
    q_min: np.ndarray
    q_max: np.ndarray

    def __post_init__(self):
        for name in ("q_init", "arrivals", "q_min", "q_max"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        n = self.q_init.size
        if self.arrivals.shape[0] != n or self.q_min.size != n or self.q_max.size != n:
            raise ValueError("queue parameter arrays disagree on DC count")
        if np.any(self.q_min > self.q_init) or np.any(self.q_init > self.q_max):
            raise ValueError("need q_min <= q_init <= q_max per DC")


@dataclass
class ModelConfig:
    """All knobs of one optimization run; mirrors the bundle config file."""

    shifting_mode: str = "joint"
    strategy: str = "cooperative"
    signal_model: str = "envelope"
    eps_p: float = 0.05
    eps_e: float = 0.05
    delta_qos: float = 5.0
    c_penal: float = 10_000.0
    slot_hours: float = 1.0
    c_rc: object = 8.0  # $/MW-slot, scalar or per-slot list
    c_rp: object = 3.0
    m_bar: object = None  # None -> mean |s| of the fitted trace
    var_horizons: tuple = DEFAULT_VAR_HORIZONS
    quantile_grid: tuple = (0.80, 0.85, 0.90, 0.925, 0.95, 0.975, 0.99)
    extra_signal_variance: float = 0.0
    integral_x: bool = False
    migration_cost: float = 0.0  # reporting-only, per task moved
    fit_split: float = 0.7
    compliance_threshold: float = 0.25
    forfeiture: str = "full"  # or "proportional"

    def validate(self, max_gen_cost: float = 0.0) -> None:
        if self.shifting_mode not in SHIFTING_MODES:
            raise ValueError(f"unknown shifting mode {self.shifting_mode!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.signal_model not in SIGNAL_MODELS:
            raise ValueError(f"unknown signal model {self.signal_model!r}")
        if not 0.0 < self.eps_p < 0.5:
            raise ValueError(f"eps_p must be in (0, 0.5), got {self.eps_p}")
        if not 0.0 < self.eps_e < 0.5:
            raise ValueError(f"eps_e must be in (0, 0.5), got {self.eps_e}")
        if self.delta_qos < 0:
            raise ValueError("delta_qos must be >= 0")
        if self.slot_hours <= 0:
            raise ValueError("slot_hours must be > 0")
        if self.c_penal <= max_gen_cost:
            raise ValueError(
                f"c_penal {self.c_penal} must exceed the highest generator cost {max_gen_cost}"
            )
        if not 0.0 < self.fit_split < 1.0:
            raise ValueError("fit_split must be in (0, 1)")
        if self.forfeiture not in ("full", "proportional"):
            raise ValueError(f"unknown forfeiture mode {self.forfeiture!r}")

    def prices(self, t_total: int, mean_abs: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(c_rc, c_rp, m_bar) as per-slot arrays."""
        def as_array(v, name):
            arr = np.full(t_total, float(v)) if np.isscalar(v) else np.asarray(v, dtype=float)
            if arr.size != t_total:
                raise ValueError(f"{name} has {arr.size} entries, horizon is {t_total}")
            return arr

        c_rc = as_array(self.c_rc, "c_rc")
        c_rp = as_array(self.c_rp, "c_rp")
        if self.m_bar is None:
            m_bar = np.full(t_total, mean_abs)
        else:
            m_bar = as_array(self.m_bar, "m_bar")
        return c_rc, c_rp, m_bar

    def revenue_rate(self, t_total: int, mean_abs: float) -> np.ndarray:
        """$ per MW of committed capacity and slot: c_rc + c_rp * m_bar."""
        c_rc, c_rp, m_bar = self.prices(t_total, mean_abs)
        return c_rc + c_rp * m_bar

    def to_dict(self) -> dict:
        def plain(v):
            if isinstance(v, np.ndarray):
                return [float(x) for x in v]
            if isinstance(v, tuple):
                return list(v)
            return v

        return {k: plain(v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        kwargs = dict(data)
        for key in ("var_horizons", "quantile_grid"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class ProblemInstance:
    """One complete optimization instance (workloads, grid, queues)."""

    jobs: tuple
    latency: LatencyMap
    dcs: tuple
    grid: GridCase
    queue: QueueParameters

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "dcs", tuple(self.dcs))

    @property
    def n_dc(self) -> int:
        return len(self.dcs)

    @property
    def n_slots(self) -> int:
        return self.dcs[0].n_slots

    @property
    def index(self) -> SpaceTimeIndex:
        return SpaceTimeIndex(self.n_dc, self.n_slots)

    @cached_property
    def x_base(self) -> np.ndarray:
        x = baseline_assignment(self.jobs, self.latency, self.dcs)
        x.flags.writeable = False
        return x

    @cached_property
    def baseline_latency(self) -> np.ndarray:
        return baseline_latency_profile(self.x_base, self.jobs, self.latency)

    def validate(self) -> None:
        from .grid import validate_case

        if not self.dcs:
            raise ValueError("instance needs at least one data center")
        t_total = self.n_slots
        for dc in self.dcs:
            if dc.n_slots != t_total:
                raise ValueError(f"dc {dc.id}: horizon differs from dc {self.dcs[0].id}")
        if self.grid.n_slots != t_total:
            raise ValueError("grid base load horizon differs from DC horizon")
        violations = validate_case(self.grid)
        if violations:
            raise ValueError("grid case invalid: " + "; ".join(violations))
        if not self.grid.generators:
            raise ValueError("grid case has no generators")
        bus_ids = set(self.grid.bus_ids())
        for dc in self.dcs:
            if dc.bus not in bus_ids:
                raise ValueError(f"dc {dc.id}: attached bus {dc.bus} not in grid")
        if self.queue.q_init.size != self.n_dc or self.queue.arrivals.shape != (self.n_dc, t_total):
            raise ValueError("queue parameters do not match (n_dc, n_slots)")
        regions = {j.user_region for j in self.jobs}
        self.latency.check_complete(sorted(regions), [dc.id for dc in self.dcs])
        for job in self.jobs:
            if job.arrival_slot > t_total:
                raise ValueError(f"cluster {job.id}: arrival slot beyond horizon")

    def baseline_dc(self, i: int) -> tuple[int, int]:
        """(slot, dc) both 1-based where cluster i sits in the baseline."""
        flat = int(np.argmax(self.x_base[i]))
        t, l = divmod(flat, self.n_dc)
        return t + 1, l + 1


@dataclass(frozen=True)
class FittedSignal:
    """Fitted signal artifacts shared by model building and simulation."""

    envelope: GaussianEnvelope
    direct: GaussianEnvelope
    var_table: VaRTable
    mean_abs: float

    def moments(self, signal_model: str) -> GaussianEnvelope:
        if signal_model == "envelope":
            return self.envelope
        if signal_model == "direct_gaussian":
            return self.direct
        raise ValueError(f"unknown signal model {signal_model!r}")


@dataclass
class Solution:
    """Solved decision variables plus the objective breakdown."""

    x: np.ndarray           # (M, T, N) fractions
    reg: np.ndarray         # (N, T) committed MW
    gen: np.ndarray         # (G, T) MW
    commit: np.ndarray      # (G, T) 0/1
    theta: np.ndarray       # (B, T) rad
    shed: np.ndarray        # (B, T) MW
    objective_total: float
    generation_cost: float
    penalty_cost: float
    regulation_revenue: float
    status: str
    migration_cost: float = 0.0
    solver_stats: dict = field(default_factory=dict)

    def breakdown(self) -> dict:
        return {
            "generation_cost": self.generation_cost,
            "penalty_cost": self.penalty_cost,
            "migration_cost": self.migration_cost,
            "regulation_revenue": self.regulation_revenue,
            "net_cost": self.objective_total,
        }

    def to_dict(self, jobs=None) -> dict:
        m, t_total, n_dc = self.x.shape
        sparse = []
        for i in range(m):
            for t in range(t_total):
                for l in range(n_dc):
                    v = float(self.x[i, t, l])
                    if abs(v) > 1e-12:
                        sparse.append([i + 1, t + 1, l + 1, v])
        return {
            "status": self.status,
            "objective_total": self.objective_total,
            "breakdown": self.breakdown(),
            "dims": {"clusters": m, "slots": t_total, "dcs": n_dc},
            "cluster_ids": [j.id for j in jobs] if jobs is not None else None,
            "x": sparse,
            "R": [[float(v) for v in row] for row in self.reg],
            "p": [[float(v) for v in row] for row in self.gen],
            "u": [[int(round(v)) for v in row] for row in self.commit],
            "theta": [[float(v) for v in row] for row in self.theta],
            "q": [[float(v) for v in row] for row in self.shed],
            "solver_stats": self.solver_stats,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Solution":
        dims = data["dims"]
        x = np.zeros((dims["clusters"], dims["slots"], dims["dcs"]))
        for i, t, l, v in data["x"]:
            x[i - 1, t - 1, l - 1] = v
        br = data["breakdown"]
        return cls(
            x=x,
            reg=np.asarray(data["R"], dtype=float),
            gen=np.asarray(data["p"], dtype=float),
            commit=np.asarray(data["u"], dtype=float),
            theta=np.asarray(data["theta"], dtype=float),
            shed=np.asarray(data["q"], dtype=float),
            objective_total=float(data["objective_total"]),
            generation_cost=float(br["generation_cost"]),
            penalty_cost=float(br["penalty_cost"]),
            regulation_revenue=float(br["regulation_revenue"]),
            status=data["status"],
            migration_cost=float(br.get("migration_cost", 0.0)),
            solver_stats=data.get("solver_stats", {}),
        )


def chance_coefficient(moments: GaussianEnvelope, eps_p: float,
                       extra_variance: float = 0.0) -> float:
    """Linear coefficient of R in the upward-regulation chance constraint.

    mu + z_{1-eps_p} * sqrt(sigma^2 + extra); at eps_p = 0.5 the z term
    vanishes and the coefficient reduces to the mean.
    """
    if not 0.0 < eps_p <= 0.5:
        raise ValueError(f"eps_p must be in (0, 0.5], got {eps_p}")
    sigma = math.sqrt(moments.sigma ** 2 + max(0.0, extra_variance))
    if eps_p == 0.5:
        return moments.mu
    return moments.mu + inverse_normal_cdf(1.0 - eps_p) * sigma


@dataclass(frozen=True)
class QueueCheckPoint:
    """One VaR checkpoint: window of ``horizon_hours`` ending at ``tau_hours``
    inside commitment slot ``slot`` (1-based)."""

    slot: int
    tau_hours: float
    horizon_hours: float


def queue_check_points(t_total: int, slot_hours: float, horizons) -> list[QueueCheckPoint]:
    """Deterministic checkpoint set: sub-hour offsets within each slot plus
    multi-slot windows ending at slot boundaries."""
    points = []
    seen = set()
    for t in range(1, t_total + 1):
        end = t * slot_hours
        for h in horizons:
            if h <= 0:
                raise ValueError("var horizons must be positive")
            if h < slot_hours - 1e-12:
                tau = (t - 1) * slot_hours + h
            elif h > end + 1e-12:
                continue  # window does not fit before this slot's end
            else:
                tau = end
            key = (t, round(tau, 9), round(float(h), 9))
            if key not in seen:
                seen.add(key)
                points.append(QueueCheckPoint(t, tau, float(h)))
    return points


def queue_baseline_expr(inst: ProblemInstance, slot_hours: float, l: int,
                        tau_hours: float) -> tuple[float, dict]:
    """Affine baseline-queue expression at DC l (1-based) and time tau.

    Returns (constant, coeffs) where coeffs maps (cluster index, slot index)
    to the MWh coefficient of x[i, t, l]; arrivals and service inside a
    partially covered slot are prorated uniformly.
    """
    if tau_hours < 0 or tau_hours > inst.n_slots * slot_hours + 1e-9:
        raise ValueError(f"tau {tau_hours} outside the horizon")
    energies = cluster_energies_mwh(inst.jobs)
    full = int(math.floor(tau_hours / slot_hours + 1e-9))
    frac = (tau_hours - full * slot_hours) / slot_hours
    if frac < 1e-12:
        frac = 0.0
    const = float(inst.queue.q_init[l - 1])
    coeffs: dict[tuple[int, int], float] = {}
    for t in range(1, full + 1):
        const += float(inst.queue.arrivals[l - 1, t - 1])
        for i in range(len(inst.jobs)):
            if energies[i] != 0.0:
                coeffs[(i, t)] = coeffs.get((i, t), 0.0) - float(energies[i])
    if frac > 0.0 and full < inst.n_slots:
        t = full + 1
        const += frac * float(inst.queue.arrivals[l - 1, t - 1])
        for i in range(len(inst.jobs)):
            if energies[i] != 0.0:
                coeffs[(i, t)] = coeffs.get((i, t), 0.0) - frac * float(energies[i])
    return const, coeffs


def queue_baseline_value(inst: ProblemInstance, slot_hours: float, l: int,
                         tau_hours: float, x: np.ndarray) -> float:
    """Evaluate the baseline-queue expression for a concrete schedule."""
    const, coeffs = queue_baseline_expr(inst, slot_hours, l, tau_hours)
    total = const
    for (i, t), coef in coeffs.items():
        total += coef * float(x[i, t - 1, l - 1])
    return total


def allowed_cells(inst: ProblemInstance, cfg: ModelConfig, i: int) -> set[tuple[int, int]]:
    """(slot, dc) cells, 1-based, where cluster i may place mass.

    Intersection of the cluster's flexibility class with the run's shifting
    mode; fixed clusters and mode "none" collapse to the baseline cell.
    Deferral is causal: work can run no earlier than its arrival slot.
    """
    t0, l0 = inst.baseline_dc(i)
    job = inst.jobs[i]
    if job.flex_class == "fixed" or cfg.shifting_mode == "none":
        return {(t0, l0)}
    spatial_ok = cfg.shifting_mode in ("spatial", "joint")
    temporal_ok = cfg.shifting_mode in ("temporal", "joint") and job.flex_class == "deferrable"
    slots = range(job.arrival_slot, inst.n_slots + 1) if temporal_ok else (t0,)
    dcs = range(1, inst.n_dc + 1) if spatial_ok else (l0,)
    return {(t, l) for t in slots for l in dcs}


def _row_family(name: str) -> str:
    return re.sub(r"(_[0-9p.]+)+$", "", name)


class _VarMap:
    """Index bookkeeping for the co-optimization variable blocks."""

    def __init__(self, m, t_total, n_dc, n_gen, n_bus):
        self.m, self.t, self.n, self.g, self.b = m, t_total, n_dc, n_gen, n_bus

    def x(self, i, t, l):  # all 1-based except cluster index i (0-based)
        return i * self.t * self.n + (t - 1) * self.n + (l - 1)

    def r(self, l, t):
        return self.m * self.t * self.n + (l - 1) * self.t + (t - 1)

    def p(self, g, t):
        return self.m * self.t * self.n + self.n * self.t + (g - 1) * self.t + (t - 1)

    def u(self, g, t):
        return self.p(self.g, self.t) + 1 + (g - 1) * self.t + (t - 1)

    def theta(self, b, t):
        return self.u(self.g, self.t) + 1 + (b - 1) * self.t + (t - 1)

    def q(self, b, t):
        return self.theta(self.b, self.t) + 1 + (b - 1) * self.t + (t - 1)

    @property
    def total(self):
        return self.m * self.t * self.n + self.t * (self.n + 2 * self.g + 2 * self.b)


def build_model(
    inst: ProblemInstance,
    cfg: ModelConfig,
    moments: GaussianEnvelope,
    var_table: VaRTable,
    *,
    fix_x: np.ndarray | None = None,
    fix_r: np.ndarray | None = None,
    pin_r_zero: bool = False,
    name: str = "coopt",
) -> StandardFormModel:
    """Assemble the full day-ahead co-optimization model.

    Always declares the complete variable set (x, R, p, u, theta, q);
    shifting-mode and flexibility-class pins act through variable bounds,
    as do the fix_x / fix_r / pin_r_zero overrides used by the sequential
    and per-DC strategies.
    """
    inst.validate()
    cfg.validate(inst.grid.max_generator_cost())
    t_total, n_dc, m = inst.n_slots, inst.n_dc, len(inst.jobs)
    gens = inst.grid.generators
    buses = inst.grid.buses
    n_gen, n_bus = len(gens), len(buses)
    dh = cfg.slot_hours
    energies = cluster_energies_mwh(inst.jobs)
    mw = energies / dh  # MW contribution of a fully placed cluster
    try:
        ccoef = chance_coefficient(moments, cfg.eps_p, cfg.extra_signal_variance)
    except ValueError as exc:
        raise ModelBuildError(f"chance family: {exc}") from exc
    check_points = queue_check_points(t_total, dh, cfg.var_horizons)
    for cp in check_points:
        try:
            var_table.bounds(cp.horizon_hours)
        except KeyError as exc:
            raise ModelBuildError(f"queue family: {exc}") from exc

    model = StandardFormModel(name)
    vm = _VarMap(m, t_total, n_dc, n_gen, n_bus)

    # Variable blocks. Pins are bounds so the count formula stays exact.
    if fix_x is not None and fix_x.shape != (m, t_total, n_dc):
        raise ModelBuildError(f"x family: fix_x shape {fix_x.shape} mismatches model")
    for i in range(m):
        cells = None if fix_x is not None else allowed_cells(inst, cfg, i)
        t0, l0 = inst.baseline_dc(i)
        for t in range(1, t_total + 1):
            for l in range(1, n_dc + 1):
                vname = f"x_{i + 1}_{t}_{l}"
                # Migration friction along the canonical temporal-then-
                # spatial path: one unit per slot hop plus one per DC hop.
                hops = abs(t - t0) + (1 if l != l0 else 0)
                fric = cfg.migration_cost * inst.jobs[i].weight * hops
                if fix_x is not None:
                    v = float(fix_x[i, t - 1, l - 1])
                    model.add_variable(vname, v, v, obj=fric)
                elif len(cells) == 1:
                    v = 1.0 if (t, l) in cells else 0.0
                    model.add_variable(vname, v, v, obj=fric)
                elif (t, l) in cells:
                    model.add_variable(vname, 0.0, 1.0, integer=cfg.integral_x, obj=fric)
                else:
                    model.add_variable(vname, 0.0, 0.0, obj=fric)
    if cfg.m_bar is None:
        raise ModelBuildError(
            "revenue family: m_bar is unresolved; call resolve_config with the "
            "fitted signal before building"
        )
    rev = cfg.revenue_rate(t_total, 0.0)
    for l in range(1, n_dc + 1):
        for t in range(1, t_total + 1):
            if pin_r_zero:
                lo = hi = 0.0
            elif fix_r is not None:
                lo = hi = float(fix_r[l - 1, t - 1])
            else:
                lo, hi = 0.0, INF
            model.add_variable(f"R_{l}_{t}", lo, hi, obj=-rev[t - 1] * dh)
    for g, gen in enumerate(gens, start=1):
        for t in range(1, t_total + 1):
            model.add_variable(f"p_{g}_{t}", 0.0, gen.p_max, obj=gen.cost_per_mwh * dh)
    for g in range(1, n_gen + 1):
        for t in range(1, t_total + 1):
            model.add_variable(f"u_{g}_{t}", 0.0, 1.0, integer=True)
    slack_pos = inst.grid.bus_position(inst.grid.slack_bus) + 1
    for b in range(1, n_bus + 1):
        for t in range(1, t_total + 1):
            if b == slack_pos:
                model.add_variable(f"th_{b}_{t}", 0.0, 0.0)
            else:
                model.add_variable(f"th_{b}_{t}", -INF, INF)
    for b in range(1, n_bus + 1):
        for t in range(1, t_total + 1):
            model.add_variable(f"q_{b}_{t}", 0.0, INF, obj=cfg.c_penal * dh)
    assert model.n_vars == vm.total

    dc_pos_at_bus: dict[int, list[int]] = {}
    for l, dc in enumerate(inst.dcs, start=1):
        dc_pos_at_bus.setdefault(inst.grid.bus_position(dc.bus) + 1, []).append(l)
    gen_at_bus: dict[int, list[int]] = {}
    for g, gen in enumerate(gens, start=1):
        gen_at_bus.setdefault(inst.grid.bus_position(gen.bus) + 1, []).append(g)

    # Nodal balance: gen + shed - DC load - net outflow = base load.
    for t in range(1, t_total + 1):
        for b in range(1, n_bus + 1):
            coeffs = [(vm.q(b, t), 1.0)]
            for g in gen_at_bus.get(b, []):
                coeffs.append((vm.p(g, t), 1.0))
            for l in dc_pos_at_bus.get(b, []):
                for i in range(m):
                    if mw[i] != 0.0:
                        coeffs.append((vm.x(i, t, l), -mw[i]))
            for line in inst.grid.lines:
                fpos = inst.grid.bus_position(line.from_bus) + 1
                tpos = inst.grid.bus_position(line.to_bus) + 1
                if fpos == b:
                    coeffs.append((vm.theta(fpos, t), -line.susceptance))
                    coeffs.append((vm.theta(tpos, t), line.susceptance))
                elif tpos == b:
                    coeffs.append((vm.theta(tpos, t), -line.susceptance))
                    coeffs.append((vm.theta(fpos, t), line.susceptance))
            model.add_row(f"bal_{b}_{t}", coeffs, "=", float(buses[b - 1].base_load[t - 1]))

    for k, line in enumerate(inst.grid.lines, start=1):
        fpos = inst.grid.bus_position(line.from_bus) + 1
        tpos = inst.grid.bus_position(line.to_bus) + 1
        for t in range(1, t_total + 1):
            flow = [(vm.theta(fpos, t), line.susceptance), (vm.theta(tpos, t), -line.susceptance)]
            model.add_row(f"flow_hi_{k}_{t}", flow, "<=", line.limit_mw)
            model.add_row(f"flow_lo_{k}_{t}", flow, ">=", -line.limit_mw)

    for g, gen in enumerate(gens, start=1):
        for t in range(1, t_total + 1):
            model.add_row(f"pmax_{g}_{t}", [(vm.p(g, t), 1.0), (vm.u(g, t), -gen.p_max)], "<=", 0.0)
            model.add_row(f"pmin_{g}_{t}", [(vm.p(g, t), -1.0), (vm.u(g, t), gen.p_min)], "<=", 0.0)
        for t in range(2, t_total + 1):
            model.add_row(
                f"rup_{g}_{t}",
                [
                    (vm.p(g, t), 1.0),
                    (vm.p(g, t - 1), -1.0),
                    (vm.u(g, t - 1), -(gen.ramp_up - gen.startup_ramp)),
                    (vm.u(g, t), -gen.startup_ramp),
                ],
                "<=",
                0.0,
            )
            model.add_row(
                f"rdn_{g}_{t}",
                [
                    (vm.p(g, t - 1), 1.0),
                    (vm.p(g, t), -1.0),
                    (vm.u(g, t), -(gen.ramp_down - gen.shutdown_ramp)),
                    (vm.u(g, t - 1), -gen.shutdown_ramp),
                ],
                "<=",
                0.0,
            )

    for i in range(m):
        coeffs = [(vm.x(i, t, l), 1.0) for t in range(1, t_total + 1) for l in range(1, n_dc + 1)]
        model.add_row(f"done_{i + 1}", coeffs, "=", 1.0)

    base_lat = inst.baseline_latency
    for t in range(1, t_total + 1):
        bound = base_lat[t - 1] + cfg.delta_qos
        coeffs = []
        for i, job in enumerate(inst.jobs):
            for l in range(1, n_dc + 1):
                coef = inst.latency.latency(job.user_region, inst.dcs[l - 1].id) - bound
                if coef != 0.0:
                    coeffs.append((vm.x(i, t, l), coef))
        model.add_row(f"qos_{t}", coeffs, "<=", 0.0)

    for l, dc in enumerate(inst.dcs, start=1):
        for t in range(1, t_total + 1):
            for tag, r_attr, cap in (
                ("cpu", "r_cpu", dc.cpu_cap[t - 1]),
                ("mem", "r_mem", dc.mem_cap[t - 1]),
                ("io", "r_io", dc.io_cap[t - 1]),
            ):
                coeffs = [
                    (vm.x(i, t, l), job.weight * getattr(job, r_attr))
                    for i, job in enumerate(inst.jobs)
                    if job.weight * getattr(job, r_attr) != 0.0
                ]
                model.add_row(f"{tag}_{l}_{t}", coeffs, "<=", float(cap))

    for l, dc in enumerate(inst.dcs, start=1):
        for t in range(1, t_total + 1):
            load_coeffs = [(vm.x(i, t, l), mw[i]) for i in range(m) if mw[i] != 0.0]
            model.add_row(
                f"pcap_{l}_{t}",
                load_coeffs + [(vm.r(l, t), 1.0)],
                "<=",
                float(dc.p_max[t - 1]),
            )
            model.add_row(
                f"chance_{l}_{t}",
                [(j, -c) for j, c in load_coeffs] + [(vm.r(l, t), ccoef)],
                "<=",
                -float(dc.p_min[t - 1]),
            )

    for cp in check_points:
        s_lo, s_hi = var_table.bounds(cp.horizon_hours)
        htag = format(cp.horizon_hours, "g").replace(".", "p")
        for l, dc in enumerate(inst.dcs, start=1):
            const, coeffs = queue_baseline_expr(inst, dh, l, cp.tau_hours)
            x_terms = [(vm.x(i, t, l), coef) for (i, t), coef in sorted(coeffs.items())]
            model.add_row(
                f"qhi_{l}_{cp.slot}_{htag}",
                x_terms + [(vm.r(l, cp.slot), s_hi)],
                "<=",
                float(inst.queue.q_max[l - 1]) - const,
            )
            model.add_row(
                f"qlo_{l}_{cp.slot}_{htag}",
                x_terms + [(vm.r(l, cp.slot), s_lo)],
                ">=",
                float(inst.queue.q_min[l - 1]) - const,
            )

    model.validate()
    return model


def resolve_config(cfg: ModelConfig, t_total: int, mean_abs: float) -> ModelConfig:
    """Fill the defaulted mileage proxy so all phases price revenue alike."""
    if cfg.m_bar is not None:
        return cfg
    return replace(cfg, m_bar=[mean_abs] * t_total)


def extract_solution(inst: ProblemInstance, cfg: ModelConfig, values: np.ndarray,
                     status: str, mean_abs: float, stats: dict | None = None) -> Solution:
    """Map raw variable values back to named arrays and price the objective."""
    t_total, n_dc, m = inst.n_slots, inst.n_dc, len(inst.jobs)
    n_gen, n_bus = len(inst.grid.generators), len(inst.grid.buses)
    vm = _VarMap(m, t_total, n_dc, n_gen, n_bus)
    x = np.zeros((m, t_total, n_dc))
    for i in range(m):
        for t in range(1, t_total + 1):
            for l in range(1, n_dc + 1):
                x[i, t - 1, l - 1] = values[vm.x(i, t, l)]
    reg = np.array([[values[vm.r(l, t)] for t in range(1, t_total + 1)] for l in range(1, n_dc + 1)])
    gen = np.array([[values[vm.p(g, t)] for t in range(1, t_total + 1)] for g in range(1, n_gen + 1)])
    commit = np.array([[values[vm.u(g, t)] for t in range(1, t_total + 1)] for g in range(1, n_gen + 1)])
    theta = np.array([[values[vm.theta(b, t)] for t in range(1, t_total + 1)] for b in range(1, n_bus + 1)])
    shed = np.array([[values[vm.q(b, t)] for t in range(1, t_total + 1)] for b in range(1, n_bus + 1)])
    reg = np.clip(reg, 0.0, None)
    dh = cfg.slot_hours
    generation_cost = float(sum(
        inst.grid.generators[g].cost_per_mwh * gen[g, t] * dh
        for g in range(n_gen) for t in range(t_total)
    ))
    penalty_cost = float(cfg.c_penal * shed.sum() * dh)
    rev_rate = cfg.revenue_rate(t_total, mean_abs)
    regulation_revenue = float(sum(rev_rate[t] * reg[:, t].sum() * dh for t in range(t_total)))
    migration = migration_cost_of(inst, cfg, x)
    objective_total = generation_cost + penalty_cost + migration - regulation_revenue
    return Solution(
        x=x, reg=reg, gen=gen, commit=commit, theta=theta, shed=shed,
        objective_total=objective_total,
        generation_cost=generation_cost,
        penalty_cost=penalty_cost,
        regulation_revenue=regulation_revenue,
        status=status,
        migration_cost=migration,
        solver_stats=stats or {},
    )


def migration_cost_of(inst: ProblemInstance, cfg: ModelConfig, x: np.ndarray) -> float:
    """Friction charge of a schedule: cost per task and hop moved from the
    baseline cell along the canonical temporal-then-spatial path."""
    if cfg.migration_cost == 0.0:
        return 0.0
    total = 0.0
    for i, job in enumerate(inst.jobs):
        t0, l0 = inst.baseline_dc(i)
        for t in range(1, inst.n_slots + 1):
            for l in range(1, inst.n_dc + 1):
                hops = abs(t - t0) + (1 if l != l0 else 0)
                if hops:
                    total += cfg.migration_cost * job.weight * hops * float(x[i, t - 1, l - 1])
    return total


def diagnose_infeasibility(model: StandardFormModel) -> dict[str, float]:
    """Per-family total violation of the elastic relaxation of a model.

    Every row gains nonnegative violation variables; minimizing total
    violation names which constraint families cannot be satisfied together.
    """
    elastic = StandardFormModel(model.name + "_elastic")
    for v in model.variables:
        elastic.add_variable(v.name, v.lb, v.ub, integer=False)
    slacks_of_row: dict[int, list[int]] = {}
    for ri, row in enumerate(model.rows):
        s = elastic.add_variable(f"__viol_{ri}", 0.0, INF, obj=1.0)
        slacks_of_row[ri] = [s]
        if row.sense == "<=":
            elastic.add_row(row.name, list(row.coeffs) + [(s, -1.0)], "<=", row.rhs)
        elif row.sense == ">=":
            elastic.add_row(row.name, list(row.coeffs) + [(s, 1.0)], ">=", row.rhs)
        else:
            s2 = elastic.add_variable(f"__viol2_{ri}", 0.0, INF, obj=1.0)
            slacks_of_row[ri].append(s2)
            elastic.add_row(row.name, list(row.coeffs) + [(s, -1.0), (s2, 1.0)], "=", row.rhs)
    res = solve_lp(elastic)
    report: dict[str, float] = {}
    if res.status != "optimal":
        return report
    for ri, row in enumerate(model.rows):
        total = float(sum(res.x[s] for s in slacks_of_row[ri]))
        if total > 1e-7:
            family = _row_family(row.name)
            report[family] = report.get(family, 0.0) + total
    return {k: round(v, 9) for k, v in sorted(report.items())}


def solve_model(model: StandardFormModel, backend: str = BACKEND_BUNDLED,
                workdir=None, time_limit_s: float | None = None):
    """Dispatch a model to the bundled solver or an external command.

    Returns (values, stats). Raises InfeasibleModel with a family report
    when the model admits no feasible point.
    """
    has_free_integers = any(
        v.integer and v.ub - v.lb > 1e-12 for v in model.variables
    )
    if backend == BACKEND_BUNDLED:
        if has_free_integers:
            res = solve_mip(model, time_limit_s=time_limit_s)
            stats = {"backend": "bundled", "nodes": res.nodes, "status": res.status}
            if res.status == "optimal" or (res.status == "time_limit" and res.x is not None):
                if res.gap is not None:
                    stats["gap"] = res.gap
                return res.x, stats
            if res.status == "infeasible":
                raise InfeasibleModel(
                    f"model {model.name} is infeasible", diagnose_infeasibility(model)
                )
            raise RuntimeError(f"bundled MIP failed with status {res.status}")
        res = solve_lp(model)
        stats = {"backend": "bundled", "iterations": res.iterations, "status": res.status}
        if res.status == "optimal":
            return res.x, stats
        if res.status == "infeasible":
            raise InfeasibleModel(
                f"model {model.name} is infeasible", diagnose_infeasibility(model)
            )
        raise RuntimeError(f"bundled LP failed with status {res.status}")
    if backend.startswith("cmd:"):
        import tempfile

        command = backend[4:]
        if workdir is None:
            workdir = tempfile.mkdtemp(prefix="dcflex_ext_")
        status, values = run_external_solver(model, command, workdir)
        if status == "infeasible":
            raise InfeasibleModel(
                f"model {model.name} is infeasible (external)", diagnose_infeasibility(model)
            )
        return values, {"backend": command, "status": "optimal"}
    raise ValueError(f"unknown backend {backend!r}; use 'bundled' or 'cmd:<command>'")


def _frozen_nodal_load(inst: ProblemInstance, cfg: ModelConfig, x: np.ndarray) -> np.ndarray:
    return load_matrix(x, inst.jobs, cfg.slot_hours)


def build_regulation_only_model(inst: ProblemInstance, cfg: ModelConfig,
                                moments: GaussianEnvelope, var_table: VaRTable,
                                x_frozen: np.ndarray, mean_abs: float) -> StandardFormModel:
    """Revenue maximization over R alone with the schedule frozen.

    The power caps, the chance constraint, and the queue VaR rows are kept
    with their x terms replaced by the frozen values.
    """
    t_total, n_dc = inst.n_slots, inst.n_dc
    dh = cfg.slot_hours
    nodal = _frozen_nodal_load(inst, cfg, x_frozen)
    ccoef = chance_coefficient(moments, cfg.eps_p, cfg.extra_signal_variance)
    rev = cfg.revenue_rate(t_total, mean_abs)
    model = StandardFormModel("regulation_adjustment")
    ridx = {}
    for l in range(1, n_dc + 1):
        for t in range(1, t_total + 1):
            ridx[(l, t)] = model.add_variable(f"R_{l}_{t}", 0.0, INF, obj=-rev[t - 1] * dh)
    for l, dc in enumerate(inst.dcs, start=1):
        for t in range(1, t_total + 1):
            load = float(nodal[l - 1, t - 1])
            model.add_row(f"pcap_{l}_{t}", [(ridx[(l, t)], 1.0)], "<=", dc.p_max[t - 1] - load)
            model.add_row(f"chance_{l}_{t}", [(ridx[(l, t)], ccoef)], "<=", load - dc.p_min[t - 1])
    for cp in queue_check_points(t_total, dh, cfg.var_horizons):
        s_lo, s_hi = var_table.bounds(cp.horizon_hours)
        htag = format(cp.horizon_hours, "g").replace(".", "p")
        for l in range(1, n_dc + 1):
            q_base = queue_baseline_value(inst, dh, l, cp.tau_hours, x_frozen)
            model.add_row(
                f"qhi_{l}_{cp.slot}_{htag}", [(ridx[(l, cp.slot)], s_hi)], "<=",
                float(inst.queue.q_max[l - 1]) - q_base,
            )
            model.add_row(
                f"qlo_{l}_{cp.slot}_{htag}", [(ridx[(l, cp.slot)], s_lo)], ">=",
                float(inst.queue.q_min[l - 1]) - q_base,
            )
    return model


def residual_supply_segments(inst: ProblemInstance, slot_hours: float,
                             l: int) -> list[list[tuple[float, float]]]:
    """Per-slot piecewise energy price a single DC faces, price-taker style.

    The rest of the system (base load plus the other DCs' baseline) is
    held fixed; the DC's own energy at a slot then fills the stacked
    generator bands from where the residual load left off. Returns, per
    slot, (width_mwh, price) segments in merit order; the last segment is
    unbounded at the most expensive unit's price.
    """
    gens = sorted(inst.grid.generators, key=lambda g: (g.cost_per_mwh, g.id))
    base = np.sum([b.base_load for b in inst.grid.buses], axis=0)
    nodal = load_matrix(inst.x_base, inst.jobs, slot_hours)
    others = base + nodal.sum(axis=0) - nodal[l - 1]
    out = []
    for t in range(inst.n_slots):
        segments = []
        cum = 0.0
        for g in gens:
            lo = max(0.0, (cum - others[t]) * slot_hours)
            cum += g.p_max
            hi = max(0.0, (cum - others[t]) * slot_hours)
            if hi > lo:
                segments.append((hi - lo, g.cost_per_mwh))
        segments.append((INF, gens[-1].cost_per_mwh))
        out.append(segments)
    return out


def build_per_dc_model(inst: ProblemInstance, cfg: ModelConfig, moments: GaussianEnvelope,
                       var_table: VaRTable, l: int, mean_abs: float) -> tuple[StandardFormModel, list[int]]:
    """Single-DC bill-minus-revenue optimization with temporal-only shifting.

    Covers the clusters whose baseline sits at DC l: completion, local
    resources, a per-DC share of the QoS row (summing the per-DC rows over
    DCs recovers the global constraint), power caps, the chance constraint,
    and the DC's queue VaR rows. Energy is billed against the residual
    supply curve (price-taker view), so the DC is cost-aware without
    seeing the other DCs' decisions or the network. Returns the model plus
    the covered cluster indices; x variables are indexed x[(k, t)] in
    cluster-major order after the R block.
    """
    t_total = inst.n_slots
    dh = cfg.slot_hours
    dc = inst.dcs[l - 1]
    members = [i for i in range(len(inst.jobs)) if inst.baseline_dc(i)[1] == l]
    energies = cluster_energies_mwh(inst.jobs)
    mw = energies / dh
    ccoef = chance_coefficient(moments, cfg.eps_p, cfg.extra_signal_variance)
    rev = cfg.revenue_rate(t_total, mean_abs)
    segments = residual_supply_segments(inst, dh, l)
    temporal_ok = cfg.shifting_mode in ("temporal", "joint")

    model = StandardFormModel(f"dc{l}_independent")
    ridx = {t: model.add_variable(f"R_{l}_{t}", 0.0, INF, obj=-rev[t - 1] * dh)
            for t in range(1, t_total + 1)}
    xidx: dict[tuple[int, int], int] = {}
    for k, i in enumerate(members):
        t0, _ = inst.baseline_dc(i)
        job = inst.jobs[i]
        movable = temporal_ok and job.flex_class == "deferrable"
        for t in range(1, t_total + 1):
            fric = cfg.migration_cost * job.weight * abs(t - t0)
            if movable and t >= job.arrival_slot:
                xidx[(k, t)] = model.add_variable(f"x_{i + 1}_{t}_{l}", 0.0, 1.0, obj=fric)
            else:
                pin = 1.0 if t == t0 else 0.0
                xidx[(k, t)] = model.add_variable(f"x_{i + 1}_{t}_{l}", pin, pin, obj=fric)
    # Energy bill: own energy per slot fills priced supply segments; the
    # convex merit order makes the LP use cheap segments first.
    for t in range(1, t_total + 1):
        seg_vars = []
        for s, (width, price) in enumerate(segments[t - 1]):
            seg_vars.append(model.add_variable(
                f"bill_{t}_{s}", 0.0, width, obj=price))
        coeffs = [(xidx[(k, t)], float(energies[i])) for k, i in enumerate(members)
                  if energies[i] != 0.0]
        coeffs += [(sv, -1.0) for sv in seg_vars]
        model.add_row(f"bill_{t}", coeffs, "=", 0.0)
    for k, i in enumerate(members):
        model.add_row(f"done_{i + 1}", [(xidx[(k, t)], 1.0) for t in range(1, t_total + 1)], "=", 1.0)
    base_lat = inst.baseline_latency
    for t in range(1, t_total + 1):
        bound = base_lat[t - 1] + cfg.delta_qos
        coeffs = []
        for k, i in enumerate(members):
            coef = inst.latency.latency(inst.jobs[i].user_region, dc.id) - bound
            if coef != 0.0:
                coeffs.append((xidx[(k, t)], coef))
        model.add_row(f"qos_{t}", coeffs, "<=", 0.0)
    for t in range(1, t_total + 1):
        for tag, r_attr, cap in (
            ("cpu", "r_cpu", dc.cpu_cap[t - 1]),
            ("mem", "r_mem", dc.mem_cap[t - 1]),
            ("io", "r_io", dc.io_cap[t - 1]),
        ):
            coeffs = [
                (xidx[(k, t)], inst.jobs[i].weight * getattr(inst.jobs[i], r_attr))
                for k, i in enumerate(members)
                if inst.jobs[i].weight * getattr(inst.jobs[i], r_attr) != 0.0
            ]
            model.add_row(f"{tag}_{l}_{t}", coeffs, "<=", float(cap))
    for t in range(1, t_total + 1):
        load_coeffs = [(xidx[(k, t)], mw[i]) for k, i in enumerate(members) if mw[i] != 0.0]
        model.add_row(f"pcap_{l}_{t}", load_coeffs + [(ridx[t], 1.0)], "<=", float(dc.p_max[t - 1]))
        model.add_row(
            f"chance_{l}_{t}",
            [(j, -c) for j, c in load_coeffs] + [(ridx[t], ccoef)],
            "<=",
            -float(dc.p_min[t - 1]),
        )
    for cp in queue_check_points(t_total, dh, cfg.var_horizons):
        s_lo, s_hi = var_table.bounds(cp.horizon_hours)
        htag = format(cp.horizon_hours, "g").replace(".", "p")
        const, coeffs = queue_baseline_expr(inst, dh, l, cp.tau_hours)
        pos_of = {i: k for k, i in enumerate(members)}
        x_terms = [
            (xidx[(pos_of[i], t)], coef)
            for (i, t), coef in sorted(coeffs.items())
            if i in pos_of
        ]
        model.add_row(
            f"qhi_{l}_{cp.slot}_{htag}", x_terms + [(ridx[cp.slot], s_hi)], "<=",
            float(inst.queue.q_max[l - 1]) - const,
        )
        model.add_row(
            f"qlo_{l}_{cp.slot}_{htag}", x_terms + [(ridx[cp.slot], s_lo)], ">=",
            float(inst.queue.q_min[l - 1]) - const,
        )
    return model, members


def run_strategy(inst: ProblemInstance, cfg: ModelConfig, fitted: FittedSignal,
                 backend: str = BACKEND_BUNDLED, workdir=None) -> Solution:
    """Solve an instance under the configured bidding strategy."""
    moments = fitted.moments(cfg.signal_model)
    mean_abs = fitted.mean_abs
    cfg = resolve_config(cfg, inst.n_slots, mean_abs)
    if cfg.strategy == "cooperative":
        model = build_model(inst, cfg, moments, fitted.var_table)
        values, stats = solve_model(model, backend, workdir)
        return extract_solution(inst, cfg, values, "optimal", mean_abs, stats)

    if cfg.strategy == "decoupled":
        phase1 = build_model(inst, cfg, moments, fitted.var_table,
                             pin_r_zero=True, name="decoupled_phase1")
        values1, stats1 = solve_model(phase1, backend, workdir)
        sol1 = extract_solution(inst, cfg, values1, "optimal", mean_abs, stats1)
        phase2 = build_regulation_only_model(inst, cfg, moments, fitted.var_table,
                                             sol1.x, mean_abs)
        res2 = solve_lp(phase2)
        if res2.status != "optimal":
            raise InfeasibleModel("regulation adjustment phase failed",
                                  diagnose_infeasibility(phase2))
        reg = np.array([
            [res2.x[(l - 1) * inst.n_slots + (t - 1)] for t in range(1, inst.n_slots + 1)]
            for l in range(1, inst.n_dc + 1)
        ])
        reg = np.clip(reg, 0.0, None)
        rev_rate = cfg.revenue_rate(inst.n_slots, mean_abs)
        revenue = float(sum(rev_rate[t] * reg[:, t].sum() * cfg.slot_hours
                            for t in range(inst.n_slots)))
        return Solution(
            x=sol1.x, reg=reg, gen=sol1.gen, commit=sol1.commit, theta=sol1.theta,
            shed=sol1.shed,
            objective_total=(sol1.generation_cost + sol1.penalty_cost
                             + sol1.migration_cost - revenue),
            generation_cost=sol1.generation_cost,
            penalty_cost=sol1.penalty_cost,
            regulation_revenue=revenue,
            status="optimal",
            migration_cost=sol1.migration_cost,
            solver_stats={"phase1": stats1, "phase2_iterations": res2.iterations},
        )

    if cfg.strategy == "independent":
        m, t_total, n_dc = len(inst.jobs), inst.n_slots, inst.n_dc
        x_all = inst.x_base.copy()
        reg_all = np.zeros((n_dc, t_total))
        per_dc_stats = []
        for l in range(1, n_dc + 1):
            model, members = build_per_dc_model(inst, cfg, moments, fitted.var_table, l, mean_abs)
            res = solve_lp(model)
            if res.status != "optimal":
                raise InfeasibleModel(f"per-DC model for dc {l} failed ({res.status})",
                                      diagnose_infeasibility(model))
            for t in range(1, t_total + 1):
                reg_all[l - 1, t - 1] = max(0.0, res.x[t - 1])
            offset = t_total  # R block comes first
            for k, i in enumerate(members):
                for t in range(1, t_total + 1):
                    x_all[i, t - 1, l - 1] = res.x[offset + k * t_total + (t - 1)]
                # zero out other DCs for this cluster (baseline had one cell)
                for other in range(n_dc):
                    if other != l - 1:
                        x_all[i, :, other] = 0.0
            per_dc_stats.append({"dc": l, "iterations": res.iterations})
        dispatch = build_model(inst, cfg, moments, fitted.var_table,
                               fix_x=x_all, fix_r=reg_all, name="independent_dispatch")
        values, stats = solve_model(dispatch, backend, workdir)
        sol = extract_solution(inst, cfg, values, "optimal", mean_abs,
                               {"dispatch": stats, "per_dc": per_dc_stats})
        return sol

    raise ValueError(f"unknown strategy {cfg.strategy!r}")


def derived_link_flows(inst: ProblemInstance, x: np.ndarray,
                       x_base: np.ndarray | None = None) -> dict[VirtualLink, float]:
    """Post-hoc signed task flows on virtual links implied by a schedule.

    Movement of each cluster from its baseline cell is decomposed along a
    canonical temporal-then-spatial path: defer along the baseline DC to
    the target slot, then migrate within that slot. Values are task counts;
    the sign follows each link's canonical orientation.
    """
    if x_base is None:
        x_base = inst.x_base
    idx = inst.index
    flows: dict[VirtualLink, float] = {link: 0.0 for link in idx.links()}
    keyed = {(link.kind, link.tail, link.head): link for link in flows}

    def add(kind, tail, head, amount):
        flows[keyed[(kind, tail, head)]] += amount

    for i, job in enumerate(inst.jobs):
        base_flat = int(np.argmax(x_base[i]))
        t0, l0 = base_flat // inst.n_dc + 1, base_flat % inst.n_dc + 1
        for t in range(1, inst.n_slots + 1):
            for l in range(1, inst.n_dc + 1):
                if (t, l) == (t0, l0):
                    continue
                mass = float(x[i, t - 1, l - 1]) * job.weight
                if mass == 0.0:
                    continue
                if t != t0:
                    lo_t, hi_t, signed = (t0, t, mass) if t > t0 else (t, t0, -mass)
                    for s in range(lo_t, hi_t):
                        add("temporal", idx.node_index(l0, s), idx.node_index(l0, s + 1), signed)
                if l != l0:
                    tail = idx.node_index(min(l0, l), t)
                    head = idx.node_index(max(l0, l), t)
                    add("spatial", tail, head, mass if l0 < l else -mass)
    return flows


def solution_to_json(solution: Solution, jobs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(solution.to_dict(jobs), fh, indent=2, sort_keys=True)
        fh.write("\n")


def solution_from_json(path) -> Solution:
    with open(path, encoding="utf-8") as fh:
        return Solution.from_dict(json.load(fh))
