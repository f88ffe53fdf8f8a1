"""Container for 0-1 equality ILPs whose constraints are decision diagrams."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bdd import Bdd, build_equality_bdd


@dataclass(frozen=True)
class LinearRow:
    """One integer equality row, kept alongside its compiled diagram.

    Rows back the exact integer feasibility check and the LP export; the
    solver itself only ever touches the diagrams.
    """

    variables: np.ndarray
    coefficients: np.ndarray
    rhs: int
    tag: str = ""

    def residual(self, x: np.ndarray) -> int:
        return int(self.coefficients @ x[self.variables]) - self.rhs


class IlpInstance:
    """Objective vector plus one diagram per constraint.

    ``variable_order`` is the order in which averaging passes visit
    variables.  It equals the identity for freshly built instances;
    constraint splitting inserts its auxiliary variables right at their
    split boundary so that every diagram still sees its layers in
    visitation order (this keeps cached sweep distances exact during a
    pass).  Every diagram's variable list must be increasing with respect
    to this order.
    """

    def __init__(
        self,
        costs: np.ndarray,
        constraints: Sequence[Bdd],
        rows: Sequence[LinearRow] | None = None,
        variable_order: np.ndarray | None = None,
    ):
        self.costs = np.asarray(costs, dtype=np.float64)
        if self.costs.ndim != 1:
            raise ValueError("costs must be a flat vector")
        self.constraints = list(constraints)
        self.rows = list(rows) if rows is not None else None
        n = len(self.costs)
        if variable_order is None:
            variable_order = np.arange(n, dtype=np.int64)
        self.variable_order = np.asarray(variable_order, dtype=np.int64)
        if len(self.variable_order) != n or set(self.variable_order.tolist()) != set(range(n)):
            raise ValueError("variable_order must be a permutation of all variables")
        self.positions = np.empty(n, dtype=np.int64)
        self.positions[self.variable_order] = np.arange(n, dtype=np.int64)
        counts = np.zeros(n, dtype=np.int64)
        for bdd in self.constraints:
            v = bdd.variables
            if len(v) and (v.min() < 0 or v.max() >= n):
                raise ValueError("constraint references unknown variable")
            pos = self.positions[v]
            if (np.diff(pos) <= 0).any():
                raise ValueError("constraint variables must follow the global order")
            counts[v] += 1
        self.constraint_counts = counts

    @property
    def num_variables(self) -> int:
        return len(self.costs)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def unconstrained_variables(self) -> np.ndarray:
        return np.flatnonzero(self.constraint_counts == 0)

    def __repr__(self) -> str:
        return (
            f"IlpInstance({self.num_variables} vars, {self.num_constraints} constraints)"
        )

    @classmethod
    def from_rows(
        cls, costs: np.ndarray, rows: Sequence[LinearRow]
    ) -> "IlpInstance":
        """Compile integer equality rows into diagrams and wrap them up."""
        constraints = []
        canonical = []
        for row in rows:
            variables = np.asarray(row.variables, dtype=np.int64)
            coefficients = np.asarray(row.coefficients, dtype=np.int64)
            order = np.argsort(variables, kind="stable")
            variables = variables[order]
            coefficients = coefficients[order]
            canonical.append(
                LinearRow(variables, coefficients, int(row.rhs), row.tag)
            )
            constraints.append(
                build_equality_bdd(coefficients, int(row.rhs), variables)
            )
        return cls(np.asarray(costs, dtype=np.float64), constraints, rows=canonical)


def make_row(variables, coefficients, rhs, tag="") -> LinearRow:
    return LinearRow(
        np.asarray(variables, dtype=np.int64),
        np.asarray(coefficients, dtype=np.int64),
        int(rhs),
        tag,
    )
