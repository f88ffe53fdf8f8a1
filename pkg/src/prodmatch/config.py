"""Solver configuration shared by the library API and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

MODE_HYBRID = "hybrid"
MODE_MMA_ONLY = "mma-only"


@dataclass
class SolveConfig:
    """Knobs of the dual solver and the primal recovery pipeline.

    The step-search parameters follow the published defaults; the ascent
    threshold is expressed relative to the first iteration's gain and
    frozen after it.
    """

    mode: str = MODE_HYBRID
    chunk_size: int = 128
    curvature_eps: float = 1e-8       # epsilon: reject history pairs below this
    step_grow: float = 1.1            # step multiplier on improvement
    step_shrink: float = 0.8          # step multiplier on non-improvement
    max_step_trials: int = 5          # K: trial evaluations per step search
    ascent_rel_threshold: float = 1e-6  # min ascent as a fraction of the first gain
    initial_step: float = 1.0
    history_size: int = 10
    max_iterations: int = 2000
    max_seconds: float | None = None
    dual_tolerance: float = 1e-10     # stop on relative per-pass improvement below
    fixing_fraction: float = 0.9
    ring: int = 2
    threads: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in (MODE_HYBRID, MODE_MMA_ONLY):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0.0 < self.step_shrink < 1.0 < self.step_grow):
            raise ValueError("need 0 < shrink < 1 < grow")
        if self.max_step_trials < 1 or self.history_size < 1:
            raise ValueError("search iterations and history size must be positive")
        if self.curvature_eps <= 0:
            raise ValueError("curvature threshold must be positive")
        if self.chunk_size < 2:
            raise ValueError("chunk size must be at least 2")
        if not 0.0 < self.fixing_fraction <= 1.0:
            raise ValueError("fixing fraction must lie in (0, 1]")
