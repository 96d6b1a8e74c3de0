"""Aggregated computing workloads, latency map, and DC capacity data.

Jobs are aggregated into clusters keyed by (user region, arrival slot,
flexibility class). A schedule is a dense array x[i, t, l] of fractions in
[0, 1]; completeness requires each cluster's fractions to sum to 1 over the
horizon. Power conversion divides cluster energy (kWh/task * tasks) by the
slot duration.
"""

from dataclasses import dataclass
from typing import NamedTuple

import csv

import numpy as np

FLEX_CLASSES = ("fixed", "interactive", "deferrable")

COMPLETENESS_TOL = 1e-9


class InfeasibleBaseline(Exception):
    """No data center can host a cluster within per-slot capacities."""


@dataclass(frozen=True)
class JobCluster:
    """One aggregated workload cluster.

    weight is a task count; r_cpu/r_mem/r_io are normalized resource units
    per unit weight; d_kwh_per_task converts tasks to energy.
    """

    id: str
    user_region: str
    arrival_slot: int
    flex_class: str
    weight: float
    r_cpu: float
    r_mem: float
    r_io: float
    d_kwh_per_task: float

    def __post_init__(self):
        if self.flex_class not in FLEX_CLASSES:
            raise ValueError(f"unknown flex class {self.flex_class!r}")
        if self.arrival_slot < 1:
            raise ValueError(f"arrival_slot must be >= 1, got {self.arrival_slot}")
        for name in ("weight", "r_cpu", "r_mem", "r_io", "d_kwh_per_task"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def energy_mwh(self) -> float:
        """Total energy of the cluster if fully executed."""
        return self.d_kwh_per_task * self.weight / 1000.0


@dataclass(frozen=True)
class LatencyMap:
    """Latency cost per (user region, dc id) pair, ms-equivalent units."""

    entries: dict

    def __post_init__(self):
        for key, v in self.entries.items():
            if v < 0:
                raise ValueError(f"latency for {key} must be >= 0, got {v}")

    def latency(self, user_region: str, dc_id: int) -> float:
        try:
            return self.entries[(user_region, dc_id)]
        except KeyError:
            raise KeyError(f"no latency entry for region {user_region!r}, dc {dc_id}") from None

    def regions(self) -> list[str]:
        return sorted({r for r, _ in self.entries})

    def check_complete(self, regions, dc_ids) -> None:
        missing = [(r, d) for r in regions for d in dc_ids if (r, d) not in self.entries]
        if missing:
            raise ValueError(f"latency map missing {len(missing)} pairs, first {missing[0]}")


@dataclass(frozen=True)
class DataCenterSpec:
    """Per-DC capacity profiles, power bounds, and queue bounds."""

    id: int
    bus: int
    cpu_cap: np.ndarray
    mem_cap: np.ndarray
    io_cap: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray
    q_min: float
    q_max: float

    def __post_init__(self):
        for name in ("cpu_cap", "mem_cap", "io_cap", "p_min", "p_max"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        t = self.cpu_cap.size
        for name in ("mem_cap", "io_cap", "p_min", "p_max"):
            if getattr(self, name).size != t:
                raise ValueError(f"dc {self.id}: {name} length differs from cpu_cap")
        if np.any(self.cpu_cap < 0) or np.any(self.mem_cap < 0) or np.any(self.io_cap < 0):
            raise ValueError(f"dc {self.id}: capacities must be >= 0")
        if np.any(self.p_min > self.p_max):
            raise ValueError(f"dc {self.id}: p_min exceeds p_max in some slot")
        if self.q_min > self.q_max:
            raise ValueError(f"dc {self.id}: q_min exceeds q_max")

    @property
    def n_slots(self) -> int:
        return self.cpu_cap.size


class SlotLatency(NamedTuple):
    value: float
    has_jobs: bool


def zeros_schedule(n_jobs: int, n_slots: int, n_dc: int) -> np.ndarray:
    return np.zeros((n_jobs, n_slots, n_dc))


def validate_schedule(x: np.ndarray, jobs, tol: float = COMPLETENESS_TOL) -> None:
    """Check bounds and per-cluster completeness of a schedule array."""
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] != len(jobs):
        raise ValueError(f"schedule shape {x.shape} does not match {len(jobs)} clusters")
    if np.any(x < -tol) or np.any(x > 1.0 + tol):
        raise ValueError("schedule fractions outside [0, 1]")
    totals = x.sum(axis=(1, 2))
    bad = np.where(np.abs(totals - 1.0) > tol)[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"cluster {jobs[i].id}: fractions sum to {totals[i]:.12f}, expected 1"
        )


def cluster_energies_mwh(jobs) -> np.ndarray:
    return np.array([j.energy_mwh for j in jobs])


def aggregate_load(x: np.ndarray, jobs, slot_hours: float) -> np.ndarray:
    """Nodal power demand in MW, flattened by 1-based virtual node id.

    Entry p-1 of the result is the demand of node p = (l-1)*T + t, i.e. the
    result reshapes to an (n_dc, n_slots) matrix.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[0] != len(jobs):
        raise ValueError(f"schedule shape {x.shape} does not match {len(jobs)} clusters")
    if slot_hours <= 0:
        raise ValueError("slot_hours must be > 0")
    energy = cluster_energies_mwh(jobs)  # MWh per fully-placed cluster
    nodal = np.tensordot(energy, x, axes=(0, 0)) / slot_hours  # (T, N) MW
    return nodal.T.reshape(-1)


def load_matrix(x: np.ndarray, jobs, slot_hours: float) -> np.ndarray:
    """Nodal demand as an (n_dc, n_slots) MW matrix."""
    n_dc = np.asarray(x).shape[2]
    return aggregate_load(x, jobs, slot_hours).reshape(n_dc, -1)


def effective_latency(x: np.ndarray, t: int, jobs, latmap: LatencyMap) -> SlotLatency:
    """Schedule-weighted average latency at slot t (1-based).

    An empty slot is reported as latency 0 with has_jobs False.
    """
    x = np.asarray(x)
    num = 0.0
    den = 0.0
    for i, job in enumerate(jobs):
        for l in range(x.shape[2]):
            w = float(x[i, t - 1, l])
            if w != 0.0:
                num += latmap.latency(job.user_region, l + 1) * w
                den += w
    if den <= 0.0:
        return SlotLatency(0.0, False)
    return SlotLatency(num / den, True)


def baseline_latency_profile(x_base: np.ndarray, jobs, latmap: LatencyMap) -> np.ndarray:
    """Per-slot baseline latency, with empty slots filled by the horizon mean.

    Deferring work into a slot the baseline left empty needs a reference
    latency; the schedule-weighted mean over the whole horizon is used so
    the tolerance stays anchored to typical baseline service.
    """
    t_total = x_base.shape[1]
    values = np.zeros(t_total)
    mass = np.zeros(t_total)
    for t in range(1, t_total + 1):
        lat = effective_latency(x_base, t, jobs, latmap)
        if lat.has_jobs:
            values[t - 1] = lat.value
            mass[t - 1] = 1.0
    if mass.sum() == 0:
        return values
    horizon_mean = float(np.sum(values * mass) / mass.sum())
    values[mass == 0] = horizon_mean
    return values


def qos_deviation(x: np.ndarray, x_base: np.ndarray, jobs, latmap: LatencyMap) -> np.ndarray:
    """Per-slot latency deviation of x from the baseline profile.

    Slots where x schedules nothing contribute deviation 0.
    """
    profile = baseline_latency_profile(x_base, jobs, latmap)
    out = np.zeros_like(profile)
    for t in range(1, len(profile) + 1):
        lat = effective_latency(x, t, jobs, latmap)
        if lat.has_jobs:
            out[t - 1] = lat.value - profile[t - 1]
    return out


def resource_usage(x: np.ndarray, jobs, l: int, t: int) -> tuple[float, float, float]:
    """(cpu, mem, io) consumed at DC l, slot t (both 1-based)."""
    x = np.asarray(x)
    cpu = mem = io = 0.0
    for i, job in enumerate(jobs):
        w = float(x[i, t - 1, l - 1]) * job.weight
        cpu += w * job.r_cpu
        mem += w * job.r_mem
        io += w * job.r_io
    return cpu, mem, io


def baseline_assignment(jobs, latmap: LatencyMap, dcs) -> np.ndarray:
    """Greedy nominal assignment: whole cluster at arrival slot, nearest DC.

    Clusters are placed in input order; each takes the feasible DC with the
    lowest latency for its region (lowest DC id on ties), spilling to the
    next-nearest DC when capacity is exhausted. Raises InfeasibleBaseline
    naming the slot and resource when no DC has room.
    """
    if not dcs:
        raise ValueError("need at least one data center")
    t_total = dcs[0].n_slots
    n_dc = len(dcs)
    used = np.zeros((3, n_dc, t_total))  # cpu/mem/io committed so far
    caps = np.stack(
        [
            np.stack([dc.cpu_cap for dc in dcs]),
            np.stack([dc.mem_cap for dc in dcs]),
            np.stack([dc.io_cap for dc in dcs]),
        ]
    )
    x = zeros_schedule(len(jobs), t_total, n_dc)
    for i, job in enumerate(jobs):
        if job.arrival_slot > t_total:
            raise ValueError(f"cluster {job.id}: arrival slot {job.arrival_slot} > horizon {t_total}")
        t = job.arrival_slot - 1
        demand = np.array([job.r_cpu, job.r_mem, job.r_io]) * job.weight
        order = sorted(range(n_dc), key=lambda l: (latmap.latency(job.user_region, dcs[l].id), dcs[l].id))
        placed = False
        for l in order:
            if np.all(used[:, l, t] + demand <= caps[:, l, t] + 1e-9):
                used[:, l, t] += demand
                x[i, t, l] = 1.0
                placed = True
                break
        if not placed:
            gaps = caps[:, :, t] - used[:, :, t] - demand[:, None]
            worst = int(np.argmin(np.max(gaps, axis=1)))
            name = ("cpu", "mem", "io")[worst]
            raise InfeasibleBaseline(
                f"cluster {job.id}: no DC fits at slot {job.arrival_slot}, "
                f"binding resource {name}"
            )
    return x


def read_workload_csv(path) -> list[JobCluster]:
    """Read clusters from CSV with the canonical workload header."""
    required = ["id", "user_region", "arrival_slot", "class", "weight",
                "r_cpu", "r_mem", "r_io", "d_kwh_per_task"]
    jobs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != required:
            raise ValueError(f"{path}: expected header {','.join(required)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                jobs.append(
                    JobCluster(
                        id=row["id"].strip(),
                        user_region=row["user_region"].strip(),
                        arrival_slot=int(row["arrival_slot"]),
                        flex_class=row["class"].strip(),
                        weight=float(row["weight"]),
                        r_cpu=float(row["r_cpu"]),
                        r_mem=float(row["r_mem"]),
                        r_io=float(row["r_io"]),
                        d_kwh_per_task=float(row["d_kwh_per_task"]),
                    )
                )
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path} line {line_no}: {exc}") from None
    if not jobs:
        raise ValueError(f"{path}: no workload rows")
    return jobs


def write_workload_csv(jobs, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "user_region", "arrival_slot", "class", "weight",
                         "r_cpu", "r_mem", "r_io", "d_kwh_per_task"])
        for j in jobs:
            writer.writerow([j.id, j.user_region, j.arrival_slot, j.flex_class,
                             repr(j.weight), repr(j.r_cpu), repr(j.r_mem),
                             repr(j.r_io), repr(j.d_kwh_per_task)])


def read_latency_csv(path) -> LatencyMap:
    entries = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = ["user_region", "dc_id", "latency"]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != required:
            raise ValueError(f"{path}: expected header {','.join(required)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                entries[(row["user_region"].strip(), int(row["dc_id"]))] = float(row["latency"])
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path} line {line_no}: {exc}") from None
    if not entries:
        raise ValueError(f"{path}: no latency rows")
    return LatencyMap(entries)


def write_latency_csv(latmap: LatencyMap, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_region", "dc_id", "latency"])
        for (region, dc), v in sorted(latmap.entries.items()):
            writer.writerow([region, dc, repr(v)])
