"""Feasible solution recovery and the exact residual solver.

The pipeline reads the converged duals' min-marginal differences as votes:
a variable whose subproblems all pull the same way is fixed to its
preferred value (the top-scoring share of them), every diagram is
conditioned on those fixes, and the remaining instance is handed to an
exact depth-first branch-and-bound whose node bound is the conditioned
dual objective.  When fixing at the configured fraction kills
feasibility, the fraction ladder backs off gracefully and the untouched
instance is solved exactly as a last resort.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import SolveConfig
from .dual import DualState
from .errors import InfeasibleAfterFixing
from .ilp import IlpInstance
from .kernels import FlatBdds, k_backward

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIMEOUT = "timeout"

CERTIFIED_GAP = 1e-2


@dataclass(frozen=True)
class GapReport:
    """Primal/dual summary; certified means gap below the global-optimality bar."""

    primal_objective: float
    best_dual: float
    primal_dual_gap: float
    certified: bool


def make_gap_report(primal: float, dual: float) -> GapReport:
    """Relative gap (p - d)/|p|, with the zero-objective case degenerating
    to 0 when the dual confirms it."""
    if abs(primal) > 1e-12:
        gap = (primal - dual) / abs(primal)
    else:
        gap = 0.0 if primal - dual <= 1e-9 else math.inf
    gap = max(gap, 0.0)
    return GapReport(primal, dual, gap, gap < CERTIFIED_GAP)


@dataclass(frozen=True)
class PartialAssignment:
    """Clamped variables; everything absent stays free."""

    values: dict[int, int]

    def __len__(self) -> int:
        return len(self.values)

    def validate(self, instance: IlpInstance) -> None:
        """No clamp may contradict a branch the diagrams force structurally."""
        for bdd in instance.constraints:
            fixes = {
                int(v): self.values[int(v)]
                for v in bdd.variables
                if int(v) in self.values
            }
            if fixes:
                bdd.condition(fixes)  # raises EmptyFeasibleSet on contradiction


@dataclass(frozen=True)
class AgreementScores:
    agrees: np.ndarray
    score: np.ndarray
    preferred: np.ndarray


def agreement_scores(state: DualState) -> AgreementScores:
    """Per variable: do all subproblems vote the same way, and how loudly.

    A subproblem's vote is the sign of its min-marginal difference
    (positive prefers 0); a clamped branch votes its forced value with
    infinite weight.  Variables with any zero or conflicting vote do not
    agree.  Scores are |sum of differences|.
    """
    m0, m1 = state.min_marginal_table()
    diff = np.empty_like(m0)
    both = np.isfinite(m0) & np.isfinite(m1)
    diff[both] = m1[both] - m0[both]
    diff[np.isinf(m1) & ~np.isinf(m0)] = np.inf
    diff[np.isinf(m0) & ~np.isinf(m1)] = -np.inf

    nv = state.instance.num_variables
    vote = np.sign(diff)
    vmax = np.full(nv, -2.0)
    vmin = np.full(nv, 2.0)
    lv = state.flat.layer_var
    np.maximum.at(vmax, lv, vote)
    np.minimum.at(vmin, lv, vote)
    agrees = (vmax == vmin) & (vmax != 0.0) & (state.instance.constraint_counts > 0)

    total = np.zeros(nv)
    np.add.at(total, lv, diff)
    score = np.abs(np.nan_to_num(total, nan=0.0, posinf=np.inf, neginf=-np.inf))
    preferred = np.where(vmax > 0, 0, 1).astype(np.int8)
    return AgreementScores(agrees, score, preferred)


def _constant_under(bdd, fixed_mask: np.ndarray) -> bool:
    """Whether a conditioned diagram accepts every fix-consistent assignment.

    True exactly when reduction collapsed it to a single chain in which
    every non-clamped layer allows both values.
    """
    from .bdd import FALSE_T

    for layer, var in enumerate(bdd.variables):
        z, o = bdd.zeros[layer], bdd.ones[layer]
        if len(z) != 1:
            return False
        if fixed_mask[var]:
            continue
        if int(z[0]) == FALSE_T or int(z[0]) != int(o[0]):
            return False
    return True


def fix_and_reduce(
    instance: IlpInstance, state: DualState, fraction: float = 0.9
) -> tuple[PartialAssignment, IlpInstance]:
    """Clamp the top-scoring share of the agreeing variables and condition.

    Diagrams that become tautologies are dropped; one that empties raises
    InfeasibleAfterFixing (the caller retries with a smaller fraction).
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    scores = agreement_scores(state)
    agreeing = np.flatnonzero(scores.agrees)
    take = int(math.floor(fraction * len(agreeing) + 1e-9))
    order = np.lexsort((agreeing, -scores.score[agreeing]))
    chosen = agreeing[order[:take]]
    partial = PartialAssignment(
        {int(v): int(scores.preferred[v]) for v in chosen}
    )

    fixed_mask = np.zeros(instance.num_variables, dtype=bool)
    fixed_mask[chosen] = True
    kept = []
    from .errors import EmptyFeasibleSet

    for bdd in instance.constraints:
        hit = fixed_mask[bdd.variables]
        if not hit.any():
            kept.append(bdd)
            continue
        fixes = {int(v): partial.values[int(v)] for v in bdd.variables[hit]}
        try:
            conditioned = bdd.condition(fixes)
        except EmptyFeasibleSet as exc:
            raise InfeasibleAfterFixing(
                f"fixing fraction {fraction} emptied a constraint"
            ) from exc
        if not _constant_under(conditioned, fixed_mask):
            kept.append(conditioned)
    reduced = IlpInstance(
        instance.costs, kept, rows=None, variable_order=instance.variable_order
    )
    return partial, reduced


@dataclass
class ExactResult:
    status: str
    assignment: np.ndarray | None
    objective: float | None


class _Frontier:
    """Reachable nodes of one diagram at its current layer, with path costs."""

    __slots__ = ("dist", "done")

    def __init__(self, dist):
        self.dist = dist
        self.done = None  # scalar once the diagram has been fully traversed


def exact_solve(
    instance: IlpInstance,
    time_limit: float | None = None,
    preassigned: PartialAssignment | None = None,
    preferred: np.ndarray | None = None,
    bound_iterations: int = 60,
    clock=time.perf_counter,
) -> ExactResult:
    """Depth-first branch and bound, provably exact.

    Branches on variables in the instance's visitation order, preferring
    the hinted value; each node is bounded by the dual objective of the
    subproblems conditioned on the current prefix.  The bounding duals
    come from a short internal dual solve; their quality affects speed
    only, never correctness.  Intended for residual instances or full
    instances of desk scale; ``time_limit`` returns the incumbent, if
    any, as a timeout.
    """
    from .qn import solve as _dual_solve

    start = clock()
    nv = instance.num_variables
    fixed = dict(preassigned.values) if preassigned is not None else {}
    costs = instance.costs

    if instance.num_constraints == 0:
        x = np.zeros(nv, dtype=np.int8)
        for v in range(nv):
            x[v] = fixed.get(v, 1 if costs[v] < 0 else 0)
        return ExactResult(OPTIMAL, x, float(costs @ x))

    bound_cfg = SolveConfig(max_iterations=max(2, bound_iterations), dual_tolerance=1e-12)
    lam = _dual_solve(instance, bound_cfg, clock=clock).state.lam

    flat = FlatBdds(instance)
    B = np.zeros(flat.num_nodes)
    bounds = np.zeros(flat.num_bdds)
    k_backward(flat.bdd_layer_lo, flat.layer_node_lo, flat.zero_t, flat.one_t, lam, B, bounds)

    # Variables outside every constraint take their cheap (or clamped) value.
    x = np.full(nv, -1, dtype=np.int8)
    free = instance.unconstrained_variables()
    for v in free:
        x[v] = fixed.get(int(v), 1 if costs[v] < 0 else 0)
    free_cost = float(costs[free] @ x[free]) if len(free) else 0.0

    frontiers = [_Frontier(None) for _ in range(flat.num_bdds)]
    contrib = bounds.copy()
    for j in range(flat.num_bdds):
        root = flat.layer_node_lo[flat.bdd_layer_lo[j]]
        width = flat.layer_node_lo[flat.bdd_layer_lo[j] + 1] - root
        dist = np.full(width, np.inf)
        dist[0] = 0.0
        frontiers[j].dist = dist
    total_bound = float(contrib.sum()) + free_cost

    proc_ptr, proc_layers = flat.proc_ptr, flat.proc_layers
    layer_lo, layer_bdd = flat.layer_node_lo, flat.layer_bdd
    zero_t, one_t = flat.zero_t, flat.one_t
    bdd_layer_lo = flat.bdd_layer_lo

    order = instance.variable_order
    branch_positions = [
        p for p in range(nv) if proc_ptr[p] != proc_ptr[p + 1]
    ]

    def advance(pos: int, bit: int, undo: list) -> bool:
        """Assign order[pos] := bit; returns False when a diagram dies."""
        nonlocal total_bound
        alive = True
        for t in range(proc_ptr[pos], proc_ptr[pos + 1]):
            l = proc_layers[t]
            j = layer_bdd[l]
            fr = frontiers[j]
            undo.append((j, fr.dist, fr.done, contrib[j]))
            lo, hi = layer_lo[l], layer_lo[l + 1]
            arcs = (one_t if bit else zero_t)[lo:hi]
            cost = lam[l] if bit else 0.0
            reached = fr.dist + cost
            last = l + 1 == bdd_layer_lo[j + 1]
            if last:
                hit = arcs == -2
                value = float(reached[hit].min()) if hit.any() else np.inf
                fr.dist = None
                fr.done = value
                new_contrib = value
            else:
                nlo, nhi = layer_lo[l + 1], layer_lo[l + 2]
                nxt = np.full(nhi - nlo, np.inf)
                mask = arcs >= 0
                np.minimum.at(nxt, arcs[mask] - nlo, reached[mask])
                fr.dist = nxt
                new_contrib = float((nxt + B[nlo:nhi]).min())
            total_bound += new_contrib - contrib[j]
            contrib[j] = new_contrib
            if not np.isfinite(new_contrib):
                alive = False
        return alive

    def restore(undo: list) -> None:
        nonlocal total_bound
        for j, dist, done, old_contrib in reversed(undo):
            fr = frontiers[j]
            fr.dist = dist
            fr.done = done
            total_bound += old_contrib - contrib[j]
            contrib[j] = old_contrib

    incumbent: np.ndarray | None = None
    incumbent_value = np.inf
    expansions = 0
    timed_out = False

    # Iterative DFS; each frame owns the undo log of its current branch.
    depth = 0
    num_branch = len(branch_positions)
    frames: list[dict] = []

    def branch_values(pos: int) -> list[int]:
        v = int(order[pos])
        if v in fixed:
            return [fixed[v]]
        if preferred is not None:
            first = int(preferred[v])
            return [first, 1 - first]
        return [0, 1]

    frames.append({"idx": 0, "values": branch_values(branch_positions[0]), "undo": None})
    while frames:
        frame = frames[-1]
        if frame["undo"] is not None:
            restore(frame["undo"])
            frame["undo"] = None
        if frame["idx"] >= len(frame["values"]):
            frames.pop()
            continue
        expansions += 1
        if time_limit is not None and expansions % 256 == 0:
            if clock() - start > time_limit:
                timed_out = True
                break
        depth = len(frames) - 1
        pos = branch_positions[depth]
        bit = frame["values"][frame["idx"]]
        frame["idx"] += 1
        undo: list = []
        frame["undo"] = undo
        x[order[pos]] = bit
        if not advance(pos, bit, undo):
            continue
        if total_bound >= incumbent_value - 1e-12:
            continue
        if depth + 1 == num_branch:
            # all branch positions assigned; free variables were set upfront
            value = float(costs @ x)
            if value < incumbent_value:
                incumbent = x.copy()
                incumbent_value = value
        else:
            nxt = branch_positions[depth + 1]
            frames.append({"idx": 0, "values": branch_values(nxt), "undo": None})
    # unwind any state mutations left on the stack
    for frame in reversed(frames):
        if frame["undo"] is not None:
            restore(frame["undo"])

    if timed_out:
        if incumbent is not None:
            return ExactResult(TIMEOUT, incumbent.astype(np.int8), incumbent_value)
        return ExactResult(TIMEOUT, None, None)
    if incumbent is None:
        return ExactResult(INFEASIBLE, None, None)
    return ExactResult(OPTIMAL, incumbent.astype(np.int8), incumbent_value)


FIXING_LADDER = (0.75, 0.5, 0.25)


@dataclass
class RecoveredSolution:
    status: str  # "certified" | "feasible" | "infeasible" | "unknown"
    assignment: np.ndarray | None
    report: GapReport | None
    ladder_stage: int  # 0: first fraction worked; len(ladder)+1: untouched solve


def recover_primal(
    instance: IlpInstance,
    state: DualState,
    cfg: SolveConfig | None = None,
    clock=time.perf_counter,
) -> RecoveredSolution:
    """Agreement fixing, conditioning, then exact residual solving.

    Falls down the fixing-fraction ladder when a stage turns out
    infeasible; the last resort solves the untouched instance exactly, so
    only a genuinely infeasible instance comes back infeasible.
    """
    cfg = cfg or SolveConfig()
    scores = agreement_scores(state)
    fractions = [cfg.fixing_fraction] + [
        f for f in FIXING_LADDER if f < cfg.fixing_fraction
    ]
    attempt = None
    stage_used = len(fractions)
    for stage, fraction in enumerate(fractions):
        try:
            partial, residual = fix_and_reduce(instance, state, fraction)
        except InfeasibleAfterFixing:
            continue
        result = exact_solve(
            residual,
            time_limit=cfg.max_seconds,
            preassigned=partial,
            preferred=scores.preferred,
            clock=clock,
        )
        if result.status == OPTIMAL:
            attempt = result
            stage_used = stage
            break
    if attempt is None:
        attempt = exact_solve(
            instance,
            time_limit=cfg.max_seconds,
            preferred=scores.preferred,
            clock=clock,
        )
    if attempt.status == INFEASIBLE:
        return RecoveredSolution(INFEASIBLE, None, None, stage_used)
    if attempt.assignment is None:
        return RecoveredSolution("unknown", None, None, stage_used)
    x = attempt.assignment
    report = make_gap_report(float(instance.costs @ x), state.best_bound)
    status = "certified" if report.certified else "feasible"
    return RecoveredSolution(status, x, report, stage_used)
