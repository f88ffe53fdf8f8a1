"""Lagrangian dual state and monotone min-marginal-averaging passes.

Each constraint is an independent subproblem whose one-arc costs are its
dual vector; feasibility ties the duals back to the objective through
``sum_j lambda_i^j == c_i`` for every variable ``i``.  The sum of the
subproblem optima is a lower bound on the integer optimum, and an
averaging pass never decreases it.

Variables appearing in no constraint cannot occur in the shape-matching
program but are accepted for generic instances: they are clamped upfront
to their cheaper value and contribute ``min(0, c_i)`` to every bound.
"""

from __future__ import annotations

import numpy as np

from .ilp import IlpInstance
from .kernels import (
    FlatBdds,
    k_argmin,
    k_backward,
    k_forward,
    k_min_marginals,
    k_mma_backward,
    k_mma_forward,
)

FORWARD = "forward"
BACKWARD = "backward"


class DualState:
    """Per-constraint dual vectors plus cached sweep distances.

    ``lam`` holds one entry per (variable, constraint) incidence, indexed
    by global layer id (see FlatBdds).  The forward/backward distance
    caches are only trusted while their validity flag is set; any direct
    dual update must go through :meth:`shift_lambda` so they are dropped.
    """

    def __init__(self, instance: IlpInstance, flat: FlatBdds | None = None):
        self.instance = instance
        self.flat = flat if flat is not None else FlatBdds(instance)
        self.lam = np.zeros(self.flat.num_layers)
        self.F = np.zeros(self.flat.num_nodes)
        self.B = np.zeros(self.flat.num_nodes)
        self._bounds = np.zeros(self.flat.num_bdds)
        self._m0s = np.zeros(max(self.flat.max_degree, 1))
        self._m1s = np.zeros(max(self.flat.max_degree, 1))
        self._scratch_B: np.ndarray | None = None
        self.f_valid = False
        self.b_valid = False
        self.bound = -np.inf
        self.best_bound = -np.inf
        free = instance.unconstrained_variables()
        self.free_values = {
            int(v): (0 if instance.costs[v] >= 0 else 1) for v in free
        }
        self.free_contribution = float(
            np.minimum(instance.costs[free], 0.0).sum()
        ) if len(free) else 0.0

    # -- cache management -------------------------------------------------

    def _set_bound(self) -> None:
        self.bound = float(self._bounds.sum()) + self.free_contribution
        if self.bound > self.best_bound:
            self.best_bound = self.bound

    def refresh_backward(self) -> None:
        f = self.flat
        k_backward(f.bdd_layer_lo, f.layer_node_lo, f.zero_t, f.one_t, self.lam, self.B, self._bounds)
        self.b_valid = True
        self._set_bound()

    def refresh_forward(self) -> None:
        f = self.flat
        k_forward(f.bdd_layer_lo, f.layer_node_lo, f.zero_t, f.one_t, self.lam, self.F, self._bounds)
        self.f_valid = True
        self._set_bound()

    def shift_lambda(self, delta: np.ndarray) -> None:
        """Move the duals along a feasibility-preserving direction."""
        self.lam += delta
        self.f_valid = False
        self.b_valid = False

    def set_lambda(self, lam: np.ndarray) -> None:
        """Replace the duals wholesale (caller keeps them feasible)."""
        lam = np.asarray(lam, dtype=np.float64)
        if lam.shape != self.lam.shape:
            raise ValueError("dual vector length mismatch")
        self.lam[:] = lam
        self.f_valid = False
        self.b_valid = False
        self.refresh_backward()

    def eval_lambda(self, lam_trial: np.ndarray) -> float:
        """Dual objective of a trial vector; caches are left untouched."""
        f = self.flat
        if self._scratch_B is None:
            self._scratch_B = np.zeros(f.num_nodes)
        bounds = np.zeros(f.num_bdds)
        k_backward(f.bdd_layer_lo, f.layer_node_lo, f.zero_t, f.one_t, lam_trial, self._scratch_B, bounds)
        return float(bounds.sum()) + self.free_contribution

    # -- dual vectors per constraint --------------------------------------

    def lambda_of(self, constraint: int) -> np.ndarray:
        f = self.flat
        return self.lam[f.bdd_layer_lo[constraint] : f.bdd_layer_lo[constraint + 1]]

    def lambda_sums(self) -> np.ndarray:
        """Per-variable sum of dual entries (== costs when feasible)."""
        out = np.zeros(self.instance.num_variables)
        np.add.at(out, self.flat.layer_var, self.lam)
        out[list(self.free_values)] = self.instance.costs[list(self.free_values)]
        return out

    def min_marginal_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Fresh (m0, m1) per layer at the current duals."""
        f = self.flat
        if not self.f_valid:
            self.refresh_forward()
        if not self.b_valid:
            self.refresh_backward()
        m0 = np.zeros(f.num_layers)
        m1 = np.zeros(f.num_layers)
        k_min_marginals(
            f.bdd_layer_lo, f.layer_node_lo, f.layer_bdd, f.zero_t, f.one_t,
            self.lam, self.F, self.B, m0, m1,
        )
        return m0, m1


def init_duals(instance: IlpInstance) -> DualState:
    """Spread every cost uniformly over the constraints containing it."""
    state = DualState(instance)
    counts = instance.constraint_counts
    lv = state.flat.layer_var
    state.lam[:] = instance.costs[lv] / counts[lv]
    state.refresh_backward()
    return state


def dual_objective(state: DualState) -> float:
    """Sum of subproblem optima; a lower bound for the integer program."""
    if not (state.b_valid or state.f_valid):
        state.refresh_backward()
    return state.bound


def mma_pass(state: DualState, direction: str) -> DualState:
    """One monotone averaging pass over all variables.

    Forward passes consume the backward distance cache and rebuild the
    forward one (and vice versa); within the pass, a variable's
    min-marginal differences are equalised across its subproblems, which
    preserves dual feasibility exactly and never lowers the bound.
    """
    f = state.flat
    if direction == FORWARD:
        if not state.b_valid:
            state.refresh_backward()
        k_mma_forward(
            f.bdd_layer_lo, f.layer_node_lo, f.layer_bdd, f.zero_t, f.one_t,
            f.proc_ptr, f.proc_layers, state.lam, state.F, state.B,
            state._bounds, state._m0s, state._m1s,
        )
        state.f_valid = True
        state.b_valid = False
    elif direction == BACKWARD:
        if not state.f_valid:
            state.refresh_forward()
        k_mma_backward(
            f.bdd_layer_lo, f.layer_node_lo, f.layer_bdd, f.zero_t, f.one_t,
            f.proc_ptr, f.proc_layers, state.lam, state.F, state.B,
            state._bounds, state._m0s, state._m1s,
        )
        state.b_valid = True
        state.f_valid = False
    else:
        raise ValueError(f"unknown pass direction {direction!r}")
    state._set_bound()
    return state


def subgradient(state: DualState) -> np.ndarray:
    """Concatenated minimising assignments of all subproblems.

    Entry ``l`` is the value (0 or 1) the subproblem owning layer ``l``
    assigns to that layer's variable, with zero-arc tie-breaking; this is
    a supergradient of the concave dual objective.
    """
    f = state.flat
    if not state.b_valid:
        state.refresh_backward()
    bits = np.zeros(f.num_layers)
    k_argmin(f.bdd_layer_lo, f.layer_node_lo, f.zero_t, f.one_t, state.lam, state.B, bits)
    return bits
