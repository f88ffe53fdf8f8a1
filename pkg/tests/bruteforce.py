"""Independent brute-force oracles used to freeze expected test values.

Everything here enumerates assignments directly and never touches the
diagram-based code paths it is used to check.
"""

from __future__ import annotations

import itertools

import numpy as np


def row_solutions(coeffs, rhs):
    """All 0-1 vectors with sum(coeffs * x) == rhs, by direct enumeration."""
    n = len(coeffs)
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        if sum(c * b for c, b in zip(coeffs, bits)) == rhs:
            out.append(bits)
    return out


def row_min(coeffs, rhs, costs):
    """(value, argmin) of the cheapest feasible vector; lexicographic ties."""
    best = None
    for bits in row_solutions(coeffs, rhs):
        value = sum(c * b for c, b in zip(costs, bits))
        if best is None or value < best[0] - 1e-15 or (abs(value - best[0]) <= 1e-15 and bits < best[1]):
            best = (value, bits)
    return best


def row_min_marginals(coeffs, rhs, costs):
    """Per variable (m0, m1) over the enumerated feasible set; inf if empty."""
    n = len(coeffs)
    m0 = [np.inf] * n
    m1 = [np.inf] * n
    for bits in row_solutions(coeffs, rhs):
        value = sum(c * b for c, b in zip(costs, bits))
        for i, b in enumerate(bits):
            if b:
                m1[i] = min(m1[i], value)
            else:
                m0[i] = min(m0[i], value)
    return list(zip(m0, m1))


def all_assignments(num_vars):
    """Matrix of all 2^n assignments as rows (n <= 22)."""
    n = int(num_vars)
    cols = [((np.arange(2**n) >> (n - 1 - i)) & 1).astype(np.int8) for i in range(n)]
    return np.column_stack(cols) if n else np.zeros((1, 0), np.int8)


def ilp_optimum(costs, rows):
    """Exact optimum of a 0-1 equality ILP by full enumeration.

    ``rows`` is a list of (variable ids, coefficients, rhs).  Returns
    (value, assignment) or None when infeasible.  Spends 2^n work.
    """
    costs = np.asarray(costs, dtype=np.float64)
    n = len(costs)
    X = all_assignments(n)
    feasible = np.ones(len(X), dtype=bool)
    for variables, coeffs, rhs in rows:
        lhs = X[:, list(variables)] @ np.asarray(coeffs, dtype=np.int64)
        feasible &= lhs == rhs
    if not feasible.any():
        return None
    values = X[feasible].astype(np.float64) @ costs
    pick = int(np.argmin(values))
    return float(values[pick]), tuple(int(b) for b in X[feasible][pick])
