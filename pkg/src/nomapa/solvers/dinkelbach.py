"""Dinkelbach solver for the rate-profile problem.

Maximise the rate of a target user while every other user ``k`` keeps
``R_k >= tau_k`` under a fixed decoding order, with powers capped at
``min(p_max, p_opt)``.  With the two-user scenario and ``target=0`` this
traces the boundary of one decoding order's rate region.
"""

from __future__ import annotations

import math

import numpy as np

from ..noma_rates import DecodingOrder, Scenario
from .barrier import ConcaveFn, find_strictly_feasible, solve_concave_subproblem
from .common import Infeasible, SolverSettings, SolveReport
from .terms import Terms


def rate_floors(tau, k: int, target: int = 0) -> np.ndarray:
    """Expand ``tau`` (scalar for K=2, else K-1 values) into a per-user floor vector."""
    others = [u for u in range(k) if u != target]
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if tau.size != len(others):
        raise ValueError(f"expected {len(others)} rate targets, got {tau.size}")
    if np.any(tau < 0):
        raise ValueError("rate targets must be >= 0")
    floors = np.zeros(k)
    floors[others] = tau
    return floors


def ratio_objective(terms: Terms, target: int, gamma: float) -> ConcaveFn:
    """``p_t g_t - gamma * (interference + distortion + 1)`` for the target user."""
    e = np.zeros(terms.k)
    e[target] = terms.g[target]

    def value(p):
        return float(p[target] * terms.g[target] - gamma * terms.denominator(target, p))

    def grad(p):
        return e - gamma * terms.denominator_grad(target, p)

    def hess(p):
        return np.diag(-gamma * terms.dist_hess_diag(p))

    return ConcaveFn(value, grad, hess)


def _bisect(pred, lo, hi, iters=200):
    """Boundary between ``pred(lo)`` False and ``pred(hi)`` True."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _with(p, k, v):
    q = p.copy()
    q[k] = v
    return q


def _feasible_for(terms, p, c, users):
    return all(terms.slack(k, p, c[k]) >= 0 for k in users)


def polish_profile(terms: Terms, p, floors, caps, target):
    """Exact clean-up of an interior-point rate-profile solution.

    Non-target users are lifted onto their cap when that costs the target
    nothing, the target is raised to the largest feasible power, and every
    other user is trimmed to the least power meeting its floor.  None of
    these moves can lower the target's SINR.
    """
    p = np.asarray(p, dtype=float).copy()
    c = np.power(2.0, floors) - 1.0
    others = [k for k in range(terms.k) if k != target]
    constrained = [k for k in others if c[k] > 0]

    def target_sinr(q):
        return q[target] * terms.g[target] / terms.denominator(target, q)

    for k in others:
        if caps[k] - p[k] <= 1e-6 * caps[k]:
            q = _with(p, k, caps[k])
            base = target_sinr(p)
            if target_sinr(q) >= base - 1e-13 * base and _feasible_for(terms, q, c, constrained):
                p = q

    for _ in range(3):
        # raise the target: other users' slacks only shrink as its power grows
        if _feasible_for(terms, p, c, constrained):
            p[target] = _largest_feasible(terms, p, c, constrained, target, p[target], caps[target])
        # trim every other user to its least feasible power (Gauss-Seidel sweeps)
        for _sweep in range(50):
            moved = False
            for k in others:
                if c[k] == 0.0:
                    if p[k] != 0.0:
                        p[k], moved = 0.0, True
                    continue
                if terms.slack(k, p, c[k]) < 0:
                    continue
                if terms.slack(k, _with(p, k, 0.0), c[k]) >= 0:
                    new = 0.0
                else:
                    new = _bisect(lambda v: terms.slack(k, _with(p, k, v), c[k]) >= 0, 0.0, p[k])
                if new < p[k]:
                    moved = moved or (p[k] - new) > 1e-15 * caps[k]
                    p[k] = new
            if not moved:
                break
    return p


def _largest_feasible(terms, p, c, users, target, lo, hi):
    """Largest target power in ``[lo, hi]`` keeping ``users`` feasible (``lo`` is feasible)."""
    if _feasible_for(terms, _with(p, target, hi), c, users):
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _feasible_for(terms, _with(p, target, mid), c, users):
            lo = mid
        else:
            hi = mid
    return lo


def dinkelbach_rate_profile(
    tau,
    order: DecodingOrder,
    s: Scenario,
    cfg: SolverSettings | None = None,
    target: int = 0,
) -> SolveReport:
    """Maximise the target user's rate subject to ``R_k >= tau_k`` for the others.

    Args:
        tau: rate floor(s) in bits/s/Hz for the non-target users, in user order.
        order: decoding order.
        s: scenario.
        cfg: solver settings; ``epsilon`` bounds the final Dinkelbach residual.
        target: user whose rate is maximised.

    Returns:
        A report whose ``objective`` is the target's rate and whose ``trace``
        is the non-decreasing sequence of auxiliary SINR values.

    Raises:
        Infeasible: some floor exceeds what the user can reach.
    """
    cfg = cfg or SolverSettings()
    terms = Terms(s, order)
    floors = rate_floors(tau, s.size, target)
    caps = s.p_cap
    max_rates = s.max_rates

    excess = floors - max_rates
    if np.any(excess > 1e-12 * np.maximum(1.0, max_rates)):
        raise Infeasible("rate target above the single-user maximum", certificate=-float(np.max(excess)))

    at_max = np.flatnonzero((floors > 0) & (floors >= max_rates * (1 - 1e-12)))
    if at_max.size:
        # a user at its single-link maximum needs every other user silent
        k = int(at_max[0])
        if at_max.size > 1 or np.any(np.delete(floors, k) > 0):
            raise Infeasible("only one user can sit at its single-link maximum", certificate=0.0)
        p = np.zeros(s.size)
        p[k] = caps[k]
        return SolveReport(p, 0.0, 0, True, [0.0], 0.0, "degenerate")

    constraints = terms.floor_constraints(floors)
    p_start, min_slack = find_strictly_feasible(constraints, caps)
    if min_slack <= 0:
        p = polish_profile(terms, p_start, floors, caps, target)
        rate = math.log2(1.0 + float(terms.sinr(p)[target]))
        return SolveReport(p, rate, 0, True, [0.0], 0.0, "degenerate")

    def numer(p):
        return p[target] * terms.g[target]

    def denom(p):
        return terms.denominator(target, p)

    gamma = 0.0
    trace: list[float] = []
    p = p_start
    converged = False
    residual = math.inf
    it = 0
    p_prev = p_start
    for it in range(1, cfg.max_outer_iters + 1):
        sol = solve_concave_subproblem(
            ratio_objective(terms, target, gamma),
            constraints,
            caps,
            x0=p_start,
            tol=cfg.inner_tol,
            mu=cfg.barrier_mu,
        )
        p = sol.p
        residual = numer(p) - gamma * denom(p)
        trace.append(gamma)
        if abs(residual) <= cfg.epsilon:
            converged = True
            break
        if residual < 0:
            # the inner solve fell short of the point that set gamma, where F is
            # exactly 0; refine it from there with a tighter tolerance
            sol = solve_concave_subproblem(
                ratio_objective(terms, target, gamma),
                constraints,
                caps,
                x0=p_prev,
                tol=cfg.inner_tol * 1e-4,
                mu=cfg.barrier_mu,
            )
            refined = numer(sol.p) - gamma * denom(sol.p)
            if refined > cfg.epsilon:
                p, residual = sol.p, refined
            else:
                # no point beats the ratio gamma by more than epsilon
                p, residual = (sol.p, refined) if refined >= 0 else (p_prev, 0.0)
                converged = True
                break
        new_gamma = numer(p) / denom(p)
        if new_gamma <= gamma:
            converged = abs(residual) <= cfg.epsilon
            break
        gamma = new_gamma
        p_prev = p

    p = polish_profile(terms, p, floors, caps, target)
    rate = math.log2(1.0 + float(terms.sinr(p)[target]))
    status = "optimal" if converged else "not_converged"
    return SolveReport(p, rate, it, converged, trace, abs(residual), status)
