"""Euclidean projection of a power vector onto the rate-floor feasible set."""

from __future__ import annotations

import numpy as np

from ..noma_rates import DecodingOrder, Scenario
from .barrier import ConcaveFn, find_strictly_feasible, solve_concave_subproblem
from .common import SolverSettings
from .sumrate import _check_floors
from .terms import Terms


def _distance_fn(target, scale: float = 1.0) -> ConcaveFn:
    target = np.asarray(target, dtype=float)
    n = target.size
    k = 1.0 / scale
    return ConcaveFn(
        lambda p: -k * float(np.sum((p - target) ** 2)),
        lambda p: -2.0 * k * (p - target),
        lambda p: -2.0 * k * np.eye(n),
    )


def project_feasible(
    p_prime,
    r,
    order: DecodingOrder | None,
    s: Scenario,
    cfg: SolverSettings | None = None,
) -> np.ndarray:
    """Closest point to ``p_prime`` satisfying the rate floors and ``0 <= p <= p_cap``.

    A point that is already feasible is returned unchanged.

    Raises:
        Infeasible: no power vector meets the floors.
    """
    cfg = cfg or SolverSettings()
    p_prime = np.asarray(p_prime, dtype=float)
    if p_prime.shape != (s.size,):
        raise ValueError(f"expected {s.size} powers")
    r = _check_floors(r, s)
    terms = Terms(s, order)
    caps = s.p_cap
    constraints = terms.floor_constraints(r)

    in_box = bool(np.all(p_prime >= 0) and np.all(p_prime <= caps))
    if in_box and all(c.value(p_prime) >= 0 for c in constraints):
        return p_prime.copy()
    clipped = np.clip(p_prime, 0.0, caps)
    if all(c.value(clipped) >= 0 for c in constraints):
        # the box projection already meets every floor, and no feasible point is closer
        return clipped

    p_start, min_slack = find_strictly_feasible(constraints, caps)
    if min_slack <= 0:
        return p_start
    # the barrier tolerance is set by the gradient at the start, which is loose
    # when the start is far away; re-solve once from a strictly feasible point
    # next to the first answer
    p = p_start
    for _ in range(2):
        scale = max(float(np.sum((p - p_prime) ** 2)), 1e-300)
        p = solve_concave_subproblem(
            _distance_fn(p_prime, scale), constraints, caps, x0=p_start, tol=cfg.inner_tol, mu=cfg.barrier_mu
        ).p
        p_start = 0.999 * p + 0.001 * p_start
    return p
