"""Solver-agnostic linear/mixed-integer model carrier.

A model is a list of bounded (optionally integer) variables, a list of
sparse linear rows with a sense and right-hand side, and a minimized
linear objective. Both bundled solvers, the MPS writer/reader, and the
external-backend adapter consume this one representation.
"""

from dataclasses import dataclass, field

import numpy as np

SENSES = ("<=", "=", ">=")

INF = float("inf")


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    integer: bool = False

    def __post_init__(self):
        if self.lb > self.ub:
            raise ValueError(f"variable {self.name}: lb {self.lb} > ub {self.ub}")


@dataclass
class LinearRow:
    name: str
    coeffs: list  # [(var_index, coefficient), ...]
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"row {self.name}: bad sense {self.sense!r}")


@dataclass
class StandardFormModel:
    """Minimization model over bounded variables with sparse linear rows."""

    name: str = "model"
    variables: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)  # var_index -> coefficient

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = INF,
                     integer: bool = False, obj: float = 0.0) -> int:
        idx = len(self.variables)
        self.variables.append(Variable(name, lb, ub, integer))
        if obj != 0.0:
            self.objective[idx] = self.objective.get(idx, 0.0) + obj
        return idx

    def add_row(self, name: str, coeffs, sense: str, rhs: float) -> int:
        merged: dict[int, float] = {}
        for j, c in coeffs:
            if c != 0.0:
                merged[j] = merged.get(j, 0.0) + c
        row = LinearRow(name, sorted(merged.items()), sense, rhs)
        self.rows.append(row)
        return len(self.rows) - 1

    def set_objective_coeff(self, idx: int, value: float) -> None:
        if value == 0.0:
            self.objective.pop(idx, None)
        else:
            self.objective[idx] = value

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, v in self.objective.items():
            c[j] = v
        return c

    def integer_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.integer]

    def validate(self) -> None:
        names = set()
        for v in self.variables:
            if v.name in names:
                raise ValueError(f"duplicate variable name {v.name!r}")
            names.add(v.name)
            if v.lb > v.ub:
                raise ValueError(f"variable {v.name}: inconsistent bounds")
        n = self.n_vars
        row_names = set()
        for row in self.rows:
            if row.name in row_names:
                raise ValueError(f"duplicate row name {row.name!r}")
            row_names.add(row.name)
            for j, _ in row.coeffs:
                if not 0 <= j < n:
                    raise ValueError(f"row {row.name}: coefficient on unknown variable {j}")
        for j in self.objective:
            if not 0 <= j < n:
                raise ValueError(f"objective coefficient on unknown variable {j}")

    def evaluate_objective(self, values: np.ndarray) -> float:
        return float(sum(c * values[j] for j, c in self.objective.items()))

    def row_activity(self, row: LinearRow, values: np.ndarray) -> float:
        return float(sum(c * values[j] for j, c in row.coeffs))

    def max_violation(self, values: np.ndarray) -> float:
        """Worst bound/row violation of a candidate point (for checks)."""
        worst = 0.0
        for j, v in enumerate(self.variables):
            worst = max(worst, v.lb - values[j], values[j] - v.ub)
        for row in self.rows:
            act = self.row_activity(row, values)
            if row.sense == "<=":
                worst = max(worst, act - row.rhs)
            elif row.sense == ">=":
                worst = max(worst, row.rhs - act)
            else:
                worst = max(worst, abs(act - row.rhs))
        return worst
