"""Settings, reports and error types shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class Infeasible(Exception):
    """The constraint set is empty.

    ``certificate`` is the best achievable minimum constraint slack found by
    the feasibility phase (negative when infeasible), in noise-normalised
    units.
    """

    def __init__(self, message: str, certificate: float = float("nan")):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class SolverSettings:
    epsilon: float = 1e-4
    max_outer_iters: int = 100
    inner_tol: float = 1e-8
    barrier_mu: float = 10.0
    tau_grid: int = 200
    subgradient_c: float = 1.0
    subgradient_steps: int = 5000
    seed: int = 0

    def __post_init__(self):
        for name in ("epsilon", "inner_tol", "barrier_mu", "subgradient_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.barrier_mu <= 1:
            raise ValueError("barrier_mu must exceed 1")
        if self.max_outer_iters < 1 or self.subgradient_steps < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.tau_grid < 2:
            raise ValueError("tau_grid must be >= 2")


@dataclass
class SolveReport:
    """Outcome of an outer (Dinkelbach / fractional-programming) loop.

    ``trace`` holds the per-iteration auxiliary ratio for Dinkelbach solvers
    and the weighted sum rate for the quadratic-transform solver.
    """

    p_star: np.ndarray
    objective: float
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)
    residual: float = float("nan")
    status: str = "optimal"
    info: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "p_star_w": [float(v) for v in self.p_star],
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "residual": float(self.residual),
            "status": self.status,
            "trace": [float(v) for v in self.trace],
        }
