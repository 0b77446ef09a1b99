"""Sum-rate maximisation with optional per-user rate floors.

The sum rate does not depend on the decoding order, so the problem is a
single-ratio program ``max sum(p g) / (dist(p) + 1)`` and Dinkelbach's method
applies.  For fixed ``gamma`` the Lagrangian separates per user and every
power has a closed form; multipliers for the rate floors are found by a
projected subgradient method, with the log-barrier solver as a fallback
when the subgradient iterates do not settle within the step budget.
"""

from __future__ import annotations

import math

import numpy as np

from ..noma_rates import DecodingOrder, Scenario
from .barrier import ConcaveFn, find_strictly_feasible, solve_concave_subproblem
from .common import Infeasible, SolverSettings, SolveReport
from .terms import Terms

_VIOLATION_TOL = 1e-6


def _check_floors(r, s: Scenario) -> np.ndarray:
    r = np.zeros(s.size) if r is None else np.broadcast_to(np.asarray(r, dtype=float), (s.size,)).copy()
    if np.any(r < 0):
        raise ValueError("rate floors must be >= 0")
    excess = r - s.max_rates
    if np.any(excess > 1e-12 * np.maximum(1.0, s.max_rates)):
        raise Infeasible("rate floor above the single-user maximum", certificate=-float(np.max(excess)))
    return r


def _argmax_separable(lin, quad, alpha, cap):
    """Maximise ``lin*p - quad*p**alpha`` over ``[0, cap]`` per entry (``quad >= 0``).

    Ties go to the smaller power.
    """
    p = np.zeros_like(cap)
    for k in range(cap.size):
        if lin[k] <= 0:
            continue
        if quad[k] > 0 and alpha[k] > 1:
            p[k] = min(cap[k], (lin[k] / (quad[k] * alpha[k])) ** (1.0 / (alpha[k] - 1.0)))
        else:
            # linear or concave-distortion case: optimum at an endpoint
            top = lin[k] * cap[k] - quad[k] * cap[k] ** alpha[k]
            p[k] = cap[k] if top > 0 else 0.0
    return p


def lagrangian_power(gamma_hat: float, lam, c, terms: Terms, caps) -> np.ndarray:
    """Per-user maximiser of the partial Lagrangian for fixed ``gamma_hat`` and multipliers.

    ``c[k] = 2**r_k - 1``.  The weight on user k's own signal is
    ``1 + lam_k - sum(lam_i c_i)`` over users ``i`` decoded before ``k``
    (they see user ``k`` as interference); the distortion weight is
    ``gamma_hat + sum(lam_i c_i)`` over all users.
    """
    lam = np.asarray(lam, dtype=float)
    lc = lam * c
    # before[k, i]: user i is decoded before user k
    before = terms.after.T
    num = 1.0 + lam - before.astype(float) @ lc
    den = gamma_hat + float(np.sum(lc))
    return _argmax_separable(terms.g * num, den * terms.a * terms.g, terms.alpha, caps)


def _sum_ratio(terms: Terms, p):
    return float(np.sum(p * terms.g)), terms.dist(p) + 1.0


def _ratio_fn(terms: Terms, gamma: float) -> ConcaveFn:
    def value(p):
        n, d = _sum_ratio(terms, p)
        return n - gamma * d

    def grad(p):
        return terms.g - gamma * terms.dist_grad(p)

    def hess(p):
        return np.diag(-gamma * terms.dist_hess_diag(p))

    return ConcaveFn(value, grad, hess)


def _rate_gaps(terms: Terms, p, r):
    return r - np.log2(1.0 + terms.sinr(p))


def _subgradient(gamma_hat, c, r, terms, caps, cfg, lam0):
    """Projected subgradient on the multipliers; returns ``(p, lam, ok)``."""
    lam = lam0.copy()
    active = c > 0
    for t in range(1, cfg.subgradient_steps + 1):
        p = lagrangian_power(gamma_hat, lam, c, terms, caps)
        gaps = _rate_gaps(terms, p, r)
        viol = float(np.max(np.where(active, gaps, -np.inf)))
        # complementary slackness: a positive multiplier needs a tight floor
        cs = float(np.max(np.where(lam > 0, np.abs(gaps), 0.0)))
        if viol <= _VIOLATION_TOL and cs <= _VIOLATION_TOL:
            return p, lam, True
        slack = np.array([terms.slack(k, p, c[k]) for k in range(terms.k)])
        d = np.where(active, slack / np.maximum(1.0, terms.g * caps), 0.0)
        norm = float(np.linalg.norm(d))
        if norm == 0.0:
            break
        lam = np.maximum(0.0, lam - cfg.subgradient_c / math.sqrt(t) * d / norm)
    return lagrangian_power(gamma_hat, lam, c, terms, caps), lam, False


def sum_rate_maximize(
    r,
    s: Scenario,
    cfg: SolverSettings | None = None,
    order: DecodingOrder | None = None,
) -> SolveReport:
    """Maximise the sum rate subject to ``R_k >= r_k`` under a decoding order.

    Args:
        r: per-user rate floors in bits/s/Hz (scalar broadcasts; ``None`` means 0).
        s: scenario.
        cfg: solver settings.
        order: decoding order used by the floors (identity by default); the
            objective itself is order-free.

    Returns:
        Report with the sum rate as ``objective`` and the auxiliary ratio
        sequence as ``trace``.  ``info["inner"]`` lists how each inner problem
        was solved (``closed_form``, ``subgradient`` or ``barrier``).

    Raises:
        Infeasible: the floors cannot be met jointly.
    """
    cfg = cfg or SolverSettings()
    r = _check_floors(r, s)
    terms = Terms(s, order)
    caps = s.p_cap
    c = np.power(2.0, r) - 1.0
    constrained = bool(np.any(r > 0))

    constraints = terms.floor_constraints(r)
    p_feas = None
    if constrained:
        p_feas, min_slack = find_strictly_feasible(constraints, caps)
        if min_slack <= 0:
            # the floors pin a single point
            n, d = _sum_ratio(terms, p_feas)
            return SolveReport(p_feas, math.log2(1.0 + n / d), 0, True, [n / d], 0.0, "degenerate",
                               {"inner": [], "lambda": []})

    gamma = 0.0
    lam = np.zeros(s.size)
    trace: list[float] = []
    inner: list[str] = []
    p = caps.copy() if p_feas is None else p_feas
    converged = False
    residual = math.inf
    p_prev = None
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        if not constrained:
            p = lagrangian_power(gamma, lam, c, terms, caps)
            inner.append("closed_form")
        else:
            # once the subgradient budget has run out, later (nearby) gammas
            # go straight to the barrier solver
            ok = False
            if "barrier" not in inner:
                p_sub, lam, ok = _subgradient(gamma, c, r, terms, caps, cfg, lam)
            if ok:
                p = p_sub
                inner.append("subgradient")
            else:
                x0 = p if np.all(terms.slacks(p, r)[c > 0] > 0) else p_feas
                sol = solve_concave_subproblem(
                    _ratio_fn(terms, gamma), constraints, caps, x0=x0, tol=cfg.inner_tol, mu=cfg.barrier_mu
                )
                p = sol.p
                inner.append("barrier")
        n, d = _sum_ratio(terms, p)
        residual = n - gamma * d
        trace.append(gamma)
        if abs(residual) <= cfg.epsilon:
            converged = True
            break
        if residual < 0 and p_prev is not None:
            # the inner solve fell short of the point that set gamma (F = 0 there)
            p_ref = p_prev
            if constrained:
                p_ref = solve_concave_subproblem(
                    _ratio_fn(terms, gamma), constraints, caps, x0=p_prev, tol=cfg.inner_tol * 1e-4,
                    mu=cfg.barrier_mu,
                ).p
                inner.append("barrier")
            n, d = _sum_ratio(terms, p_ref)
            refined = n - gamma * d
            if refined < 0:
                p_ref, refined = p_prev, 0.0
                n, d = _sum_ratio(terms, p_ref)
            p, residual = p_ref, refined
            if refined <= cfg.epsilon:
                converged = True
                break
        new_gamma = n / d
        if new_gamma <= gamma:
            converged = abs(residual) <= cfg.epsilon
            break
        gamma = new_gamma
        p_prev = p

    if constrained and np.any(_rate_gaps(terms, p, r)[c > 0] > 0):
        # the subgradient stops within a small floor violation; finish with a feasible inner solve
        p = solve_concave_subproblem(
            _ratio_fn(terms, gamma), constraints, caps, x0=p_feas, tol=cfg.inner_tol, mu=cfg.barrier_mu
        ).p
        inner.append("barrier")
    n, d = _sum_ratio(terms, p)
    status = "optimal" if converged else "not_converged"
    return SolveReport(
        p, math.log2(1.0 + n / d), it, converged, trace, abs(residual), status,
        {"inner": inner, "lambda": [float(v) for v in lam]},
    )
