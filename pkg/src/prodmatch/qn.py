"""Quasi-Newton acceleration of the averaging passes.

One solver iteration follows the hybrid scheme: take the subproblem
argmin indicators as a supergradient, multiply by the limited-memory
inverse-Hessian estimate, project the direction onto the dual-feasible
subspace (zero sum per variable), search a step size, move, then run one
forward and one backward averaging pass and refresh the history.

Sign convention: the dual is maximised; history pairs are stored for the
negated (minimised) objective, i.e. ``y_k = g_k - g_{k+1}`` on
supergradients, which turns the curvature test into the standard
``s^T y >= eps`` and keeps the two-loop recursion textbook.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import MODE_HYBRID, SolveConfig
from .dual import BACKWARD, FORWARD, DualState, dual_objective, init_duals, mma_pass, subgradient
from .errors import EmptyHistory
from .ilp import IlpInstance
from .kernels import set_threads


@dataclass
class StepConfig:
    """Parameters of the history update and the bounded step search."""

    curvature_eps: float = 1e-8
    grow: float = 1.1
    shrink: float = 0.8
    max_trials: int = 5
    min_ascent: float = 0.0  # frozen after the first iteration
    initial_step: float = 1.0
    memory: int = 10

    def __post_init__(self) -> None:
        if not (0.0 < self.shrink < 1.0 < self.grow):
            raise ValueError("need 0 < shrink < 1 < grow")
        if self.max_trials < 1 or self.curvature_eps <= 0:
            raise ValueError("invalid step search parameters")

    @classmethod
    def from_solve_config(cls, cfg: SolveConfig) -> "StepConfig":
        return cls(
            curvature_eps=cfg.curvature_eps,
            grow=cfg.step_grow,
            shrink=cfg.step_shrink,
            max_trials=cfg.max_step_trials,
            initial_step=cfg.initial_step,
            memory=cfg.history_size,
        )


class LbfgsHistory:
    """Ring buffer of (s, y, rho) curvature pairs, newest first."""

    def __init__(self, memory: int):
        if memory < 1:
            raise ValueError("history size must be positive")
        self.memory = memory
        self._pairs: deque = deque(maxlen=memory)

    def __len__(self) -> int:
        return len(self._pairs)

    def push(self, s: np.ndarray, y: np.ndarray, rho: float) -> None:
        self._pairs.appendleft((s, y, rho))

    def newest_first(self):
        return iter(self._pairs)

    def oldest_first(self):
        return reversed(self._pairs)

    def newest(self):
        return self._pairs[0]


def update_history(
    s: np.ndarray, y: np.ndarray, history: LbfgsHistory, cfg: StepConfig
) -> LbfgsHistory:
    """Store the pair iff the curvature condition s^T y >= eps holds."""
    sy = float(s @ y)
    if sy >= cfg.curvature_eps:
        history.push(s, y, 1.0 / sy)
    return history


def lbfgs_direction(g: np.ndarray, history: LbfgsHistory) -> np.ndarray:
    """Two-loop recursion: the inverse-Hessian estimate applied to ``g``.

    Initial scaling is (s.y / y.y) of the newest pair.  Raises
    EmptyHistory when no pairs are stored; the caller then skips the
    quasi-Newton step for this iteration.
    """
    if len(history) == 0:
        raise EmptyHistory("no curvature pairs stored yet")
    q = np.array(g, dtype=np.float64, copy=True)
    alphas = []
    for s, y, rho in history.newest_first():
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    s0, y0, _ = history.newest()
    d = (float(s0 @ y0) / float(y0 @ y0)) * q
    for (s, y, rho), a in zip(history.oldest_first(), reversed(alphas)):
        b = rho * float(y @ d)
        d += s * (a - b)
    return d


def project_direction(d_hat: np.ndarray, state: DualState) -> np.ndarray:
    """Subtract each variable's mean over its subproblems.

    The result satisfies sum_j d_i^j == 0 for every variable, so stepping
    along it preserves dual feasibility; coordinates of variables living
    in a single subproblem become zero.
    """
    flat = state.flat
    nv = state.instance.num_variables
    sums = np.bincount(flat.layer_var, weights=d_hat, minlength=nv)
    counts = np.maximum(state.instance.constraint_counts, 1)
    return d_hat - (sums / counts)[flat.layer_var]


def find_step_size(
    state: DualState, d: np.ndarray, gamma_prev: float, cfg: StepConfig
) -> tuple[float, bool]:
    """Bounded search for a step along ``d`` with sufficient ascent.

    The baseline is the objective at the previous step length along the
    new direction.  The step shrinks while the trial does not improve on
    the baseline and grows otherwise; the search stops early once the
    improvement reaches the ascent threshold.  Returns the best trial and
    whether it strictly improves on the current objective (if not, the
    caller skips the quasi-Newton move this iteration).
    """
    lam = state.lam
    base = dual_objective(state)
    gamma = float(gamma_prev)
    e_init = state.eval_lambda(lam + gamma * d)
    gamma_best = gamma
    e_best = e_init
    e_cur = e_init
    for _ in range(cfg.max_trials):
        gamma *= cfg.shrink if e_cur <= e_init else cfg.grow
        e_cur = state.eval_lambda(lam + gamma * d)
        if e_cur >= e_best:
            gamma_best = gamma
            e_best = e_cur
        if e_cur - e_init >= cfg.min_ascent:
            break
    return gamma_best, bool(e_best > base)


@dataclass
class IterationRecord:
    iteration: int
    kind: str  # "init", "mma", or "hybrid" (quasi-Newton step taken)
    dual_objective: float
    time_s: float


@dataclass
class SolveResult:
    state: DualState
    history: LbfgsHistory
    records: list[IterationRecord]
    best_bound: float
    iterations: int
    stop_reason: str

    @property
    def bounds(self) -> list[float]:
        return [r.dual_objective for r in self.records]


def solver_iteration(
    state: DualState,
    history: LbfgsHistory,
    gamma_prev: float,
    cfg: StepConfig,
    hybrid: bool = True,
) -> tuple[float, bool]:
    """One full iteration: optional quasi-Newton move, then both passes.

    Returns the carried step size and whether the quasi-Newton move was
    taken.  With an empty history (or in averaging-only mode) this
    degenerates to a pure averaging iteration.
    """
    used_qn = False
    gamma = gamma_prev
    if hybrid and len(history) > 0:
        g = subgradient(state)
        d = project_direction(lbfgs_direction(g, history), state)
        gamma, improved = find_step_size(state, d, gamma_prev, cfg)
        if improved:
            state.shift_lambda(gamma * d)
            used_qn = True
    mma_pass(state, FORWARD)
    mma_pass(state, BACKWARD)
    return gamma, used_qn


def solve(
    instance: IlpInstance,
    cfg: SolveConfig | None = None,
    clock=time.perf_counter,
) -> SolveResult:
    """Run the dual solver on one instance until a stopping rule fires.

    History snapshots are taken between consecutive iteration ends (after
    the averaging passes); the ascent threshold is frozen to its fraction
    of the first iteration's gain.
    """
    cfg = cfg or SolveConfig()
    set_threads(cfg.threads)
    step_cfg = StepConfig.from_solve_config(cfg)
    hybrid = cfg.mode == MODE_HYBRID

    start = clock()
    state = init_duals(instance)
    history = LbfgsHistory(step_cfg.memory)
    records = [IterationRecord(0, "init", dual_objective(state), clock() - start)]
    initial_bound = records[0].dual_objective

    lam_prev = state.lam.copy()
    g_prev = subgradient(state)
    gamma = step_cfg.initial_step
    stop_reason = "max_iterations"
    iterations = 0
    for it in range(1, cfg.max_iterations + 1):
        gamma, used_qn = solver_iteration(state, history, gamma, step_cfg, hybrid)
        iterations = it
        bound = dual_objective(state)
        records.append(
            IterationRecord(it, "hybrid" if used_qn else "mma", bound, clock() - start)
        )
        if it == 1:
            step_cfg.min_ascent = cfg.ascent_rel_threshold * (bound - initial_bound)
        if hybrid:
            g_now = subgradient(state)
            update_history(state.lam - lam_prev, g_prev - g_now, history, step_cfg)
            lam_prev = state.lam.copy()
            g_prev = g_now
        prev_bound = records[-2].dual_objective
        if bound - prev_bound < cfg.dual_tolerance * max(1.0, abs(bound)):
            stop_reason = "dual_tolerance"
            break
        if cfg.max_seconds is not None and clock() - start > cfg.max_seconds:
            stop_reason = "max_seconds"
            break
    return SolveResult(state, history, records, state.best_bound, iterations, stop_reason)
