"""Bundled MIP solver: best-first branch and bound over binary variables.

Each node re-solves the LP relaxation with tightened bounds via the
bundled simplex. Binaries only; desk-scale models (a few dozen binaries)
solve exactly, and an optional time limit returns the best incumbent with
its optimality gap.
"""

import heapq
import time
from dataclasses import dataclass

import numpy as np

from .simplex import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, solve_lp
from .standard_form import StandardFormModel

INT_TOL = 1e-6
GAP_TOL = 1e-9


@dataclass
class MIPResult:
    status: str  # optimal | infeasible | unbounded | time_limit
    objective: float | None
    x: np.ndarray | None
    best_bound: float | None
    nodes: int

    @property
    def gap(self) -> float | None:
        if self.objective is None or self.best_bound is None:
            return None
        return abs(self.objective - self.best_bound) / max(1.0, abs(self.objective))


def _check_binary(model: StandardFormModel) -> list[int]:
    idx = model.integer_indices()
    for j in idx:
        v = model.variables[j]
        if v.lb < -INT_TOL or v.ub > 1.0 + INT_TOL:
            raise ValueError(
                f"integer variable {v.name} has bounds [{v.lb}, {v.ub}]; "
                "only binaries are supported"
            )
    return idx

def _fractional(x: np.ndarray, int_idx: list[int]):
    worst_j = -1
    worst_frac = INT_TOL
    for j in int_idx:
        frac = abs(x[j] - round(x[j]))
        if frac > worst_frac:
            worst_frac = frac
            worst_j = j
    return worst_j


def _solve_with_bounds(model: StandardFormModel, fixed: dict[int, float]):
    saved = {}
    for j, val in fixed.items():
        v = model.variables[j]
        saved[j] = (v.lb, v.ub)
        v.lb = val
        v.ub = val
    try:
        return solve_lp(model)
    finally:
        for j, (lb, ub) in saved.items():
            model.variables[j].lb = lb
            model.variables[j].ub = ub


def solve_mip(model: StandardFormModel, time_limit_s: float | None = None) -> MIPResult:
    """Exact minimization over the model's binaries by branch and bound."""
    int_idx = _check_binary(model)
    start = time.monotonic()
    root = solve_lp(model)
    if root.status in (INFEASIBLE, UNBOUNDED):
        return MIPResult(root.status, None, None, None, 1)
    if root.status == ITERATION_LIMIT:
        return MIPResult("time_limit", None, None, None, 1)

    incumbent_x: np.ndarray | None = None
    incumbent_obj = float("inf")

    def consider(result):
        nonlocal incumbent_x, incumbent_obj
        if result.status == OPTIMAL and result.objective < incumbent_obj - GAP_TOL:
            if _fractional(result.x, int_idx) < 0:
                incumbent_obj = result.objective
                incumbent_x = result.x.copy()
                return True
        return False

    consider(root)
    if incumbent_x is None and int_idx:
        # Rounding heuristic for an early incumbent to prune against.
        rounded = {j: float(round(root.x[j])) for j in int_idx}
        consider(_solve_with_bounds(model, rounded))

    counter = 0
    heap: list = []
    frac_j = _fractional(root.x, int_idx)
    if frac_j >= 0:
        heapq.heappush(heap, (root.objective, counter, {}, frac_j))
    best_bound = root.objective
    nodes = 1

    while heap:
        bound, _, fixed, branch_j = heapq.heappop(heap)
        best_bound = bound
        if bound >= incumbent_obj - GAP_TOL:
            best_bound = incumbent_obj
            break
        if time_limit_s is not None and time.monotonic() - start > time_limit_s:
            status = "time_limit"
            obj = incumbent_obj if incumbent_x is not None else None
            return MIPResult(status, obj, incumbent_x, bound, nodes)
        for val in (0.0, 1.0):
            child_fixed = dict(fixed)
            child_fixed[branch_j] = val
            result = _solve_with_bounds(model, child_fixed)
            nodes += 1
            if result.status != OPTIMAL:
                continue
            if result.objective >= incumbent_obj - GAP_TOL:
                continue
            if consider(result):
                continue
            child_branch = _fractional(result.x, int_idx)
            if child_branch < 0:
                continue
            counter += 1
            heapq.heappush(heap, (result.objective, counter, child_fixed, child_branch))

    if incumbent_x is None:
        return MIPResult(INFEASIBLE, None, None, None, nodes)
    if not heap:
        best_bound = incumbent_obj
    # Re-solve with the binary pattern pinned so continuous values are clean
    # at exactly integral binaries.
    pattern = {j: float(round(incumbent_x[j])) for j in int_idx}
    final = _solve_with_bounds(model, pattern)
    if final.status == OPTIMAL:
        x = final.x
        obj = final.objective
    else:
        x = incumbent_x.copy()
        for j in int_idx:
            x[j] = float(round(x[j]))
        obj = model.evaluate_objective(x)
    return MIPResult(OPTIMAL, obj, x, best_bound, nodes)
