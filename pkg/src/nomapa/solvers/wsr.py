"""Weighted sum-rate maximisation by the quadratic transform.

Rates are first rewritten with auxiliary SINR variables ``gamma`` (Lagrangian
dual transform) and the remaining sum of ratios with auxiliary ``y``
(quadratic transform).  For fixed ``(gamma, y)`` the objective is concave in
the powers; the three blocks are updated in turn.

Internally the transform uses natural logarithms, which makes the optimal
``gamma`` equal to the SINR; reported rates are converted back to bits.
"""

from __future__ import annotations

import math

import numpy as np

from ..noma_rates import DecodingOrder, Scenario
from .barrier import ConcaveFn, find_strictly_feasible, solve_concave_subproblem
from .common import Infeasible, SolverSettings, SolveReport
from .sumrate import _check_floors
from .terms import Terms

LN2 = math.log(2.0)
POLISH_EVERY = 10  # outer iterations between floor-aware polish steps


def _check_weights(weights, k: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (k,):
        raise ValueError(f"expected {k} weights")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if not math.isclose(float(np.sum(w)), 1.0, rel_tol=1e-9):
        raise ValueError("weights must sum to 1")
    return w


class QuadraticTransform:
    """The quadratic-transform surrogate ``F_q(p, gamma, y)`` for one scenario and order."""

    def __init__(self, weights, terms: Terms):
        self.w = np.asarray(weights, dtype=float)
        self.t = terms
        # at_or_after[k, j]: user j is decoded no earlier than user k
        self.at_or_after = terms.after | np.eye(terms.k, dtype=bool)

    def total(self, p):
        """Per-user ``own signal + later users + distortion + noise``."""
        x = p * self.t.g
        return self.at_or_after.astype(float) @ x + self.t.dist(p) + 1.0

    def gamma_update(self, p):
        return self.t.sinr(p)

    def y_update(self, p, gamma):
        return np.sqrt(self.w * (1.0 + gamma) * self.t.g * p) / self.total(p)

    def value(self, p, gamma, y):
        p = np.asarray(p, dtype=float)
        lagr = float(np.sum(self.w * np.log1p(gamma)) - np.sum(self.w * gamma))
        quad = 2.0 * y * np.sqrt(self.w * (1.0 + gamma) * self.t.g * p) - y**2 * self.total(p)
        return lagr + float(np.sum(quad))

    def _coeffs(self, gamma, y):
        amp = y * np.sqrt(self.w * (1.0 + gamma) * self.t.g)
        lin = self.t.g * (self.at_or_after.T.astype(float) @ y**2)
        ysq = float(np.sum(y**2))
        return amp, lin, ysq

    def grad(self, p, gamma, y):
        """Gradient of ``F_q`` with respect to ``p`` (interior points)."""
        p = np.asarray(p, dtype=float)
        amp, lin, ysq = self._coeffs(gamma, y)
        return amp / np.sqrt(p) - lin - ysq * self.t.dist_grad(p)

    def wsr(self, p) -> float:
        """True weighted sum rate in nats."""
        return float(np.sum(self.w * np.log1p(self.t.sinr(p))))

    def wsr_grad(self, p):
        """Gradient of :meth:`wsr` with respect to ``p``."""
        p = np.asarray(p, dtype=float)
        g = self.t.g
        x = p * g
        den = self.t.after.astype(float) @ x + self.t.dist(p) + 1.0
        gam = x / den
        coef = self.w / (1.0 + gam)
        # d gamma_k / d p_j = (delta_kj g_k - gamma_k dden_k/dp_j) / den_k
        dden = self.t.after * g[None, :] + self.t.dist_grad(p)[None, :]
        jac = (np.diag(g) - gam[:, None] * dden) / den[:, None]
        return coef @ jac

    def as_concave(self, gamma, y) -> ConcaveFn:
        amp, lin, ysq = self._coeffs(gamma, y)

        def hess(p):
            with np.errstate(divide="ignore"):
                d = -0.5 * amp * np.power(p, -1.5)
            return np.diag(d - ysq * self.t.dist_hess_diag(p))

        return ConcaveFn(lambda p: self.value(p, gamma, y), lambda p: self.grad(p, gamma, y), hess)

    def power_step(self, gamma, y, caps) -> np.ndarray:
        """Unconstrained (box-only) maximiser of ``F_q`` over ``p``; separable per user."""
        amp, lin, ysq = self._coeffs(gamma, y)
        a, alpha, g = self.t.a, self.t.alpha, self.t.g
        quad = ysq * a * g

        def deriv(p):
            with np.errstate(divide="ignore", invalid="ignore"):
                dd = alpha * np.power(p, alpha - 1.0)
            return amp / np.sqrt(p) - lin - quad * np.where(quad > 0, dd, 0.0)

        p = np.zeros_like(caps)
        live = amp > 0
        at_cap = live & (deriv(caps) >= 0)
        p[at_cap] = caps[at_cap]
        todo = live & ~at_cap
        if np.any(todo):
            lo = np.zeros_like(caps)
            hi = caps.copy()
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                pos = deriv(np.where(todo, mid, 1.0)) > 0
                lo = np.where(todo & pos, mid, lo)
                hi = np.where(todo & ~pos, mid, hi)
            p[todo] = 0.5 * (lo + hi)[todo]
        return p


def wsr_maximize(
    weights,
    r,
    order: DecodingOrder | None,
    s: Scenario,
    cfg: SolverSettings | None = None,
    p0=None,
) -> SolveReport:
    """Maximise ``sum_k w_k R_k`` subject to ``R_k >= r_k`` under a decoding order.

    Args:
        weights: positive weights summing to one.
        r: per-user rate floors, bits/s/Hz (scalar broadcasts, ``None`` is 0).
        order: decoding order; identity (user 1 decoded first) when ``None``.
        s: scenario.
        cfg: solver settings; stops when the surrogate changes by less than
            ``epsilon`` between outer iterations.
        p0: optional starting powers (default ``p_cap / 2``).

    Returns:
        Report whose ``trace`` is the weighted sum rate (bits/s/Hz) after each
        outer iteration.  ``info["fixed_point"]`` is the largest relative
        change of ``gamma`` or ``y`` in the final iteration.

    Raises:
        Infeasible: the floors cannot be met jointly.
    """
    cfg = cfg or SolverSettings()
    order = DecodingOrder.identity(s.size) if order is None else order
    w = _check_weights(weights, s.size)
    r = _check_floors(r, s)
    terms = Terms(s, order)
    qt = QuadraticTransform(w, terms)
    caps = s.p_cap
    constraints = terms.floor_constraints(r)
    if constraints and np.any(s.alpha < 1):
        raise ValueError("rate floors need alpha >= 1 for every user (the power step is not concave otherwise)")

    p = 0.5 * caps if p0 is None else np.clip(np.asarray(p0, dtype=float), 0.0, caps)
    if constraints:
        gv = np.array([c.value(p) for c in constraints])
        if not np.all(gv > 0):
            p, min_slack = find_strictly_feasible(constraints, caps)
            if min_slack <= 0:
                # floors pin a single point
                f = float(np.sum(w * np.log2(1.0 + terms.sinr(p))))
                return SolveReport(p, f, 0, True, [f], 0.0, "degenerate", {"fixed_point": 0.0})

    gamma = qt.gamma_update(p)
    y = qt.y_update(p, gamma)
    f_prev = float(np.sum(w * np.log1p(gamma)))
    trace = [f_prev / LN2]
    converged = False
    residual = math.inf
    fixed_point = math.inf
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        p_prev = p
        if constraints:
            x0 = p if np.all(np.array([c.value(p) for c in constraints]) > 0) else None
            sol = solve_concave_subproblem(
                qt.as_concave(gamma, y), constraints, caps, x0=x0, tol=cfg.inner_tol, mu=cfg.barrier_mu
            )
            p_next = sol.p
        else:
            p_next = qt.power_step(gamma, y, caps)
        p = _extrapolate(qt, p_prev, p_next, caps, constraints)
        if constraints and it % POLISH_EVERY == 0:
            # the surrogate creeps along active floors; jump to a nearby KKT point
            p = _polish_floors(qt, p, caps, constraints, cfg)
        new_gamma = qt.gamma_update(p)
        new_y = qt.y_update(p, new_gamma)
        fixed_point = max(_rel_change(new_gamma, gamma), _rel_change(new_y, y))
        gamma, y = new_gamma, new_y
        f = float(np.sum(w * np.log1p(gamma)))
        trace.append(f / LN2)
        residual = abs(f - f_prev)
        f_prev = f
        if residual < cfg.epsilon:
            converged = True
            break

    p = _polish_floors(qt, p, caps, constraints, cfg) if constraints else p
    p = _polish(qt, p, caps, constraints)
    gamma = qt.gamma_update(p)
    y = qt.y_update(p, gamma)
    f_final = qt.wsr(p)
    if f_final > f_prev:
        trace.append(f_final / LN2)
        f_prev = f_final
    # one more sweep of the alternating updates measures how far p is from
    # being a fixed point of the algorithm
    if constraints and np.all(np.array([c.value(p) for c in constraints]) > 0):
        p_chk = solve_concave_subproblem(
            qt.as_concave(gamma, y), constraints, caps, x0=p, tol=cfg.inner_tol, mu=cfg.barrier_mu
        ).p
    elif constraints:
        p_chk = p
    else:
        p_chk = qt.power_step(gamma, y, caps)
    g_chk = qt.gamma_update(p_chk)
    fixed_point = max(_rel_change(g_chk, gamma), _rel_change(qt.y_update(p_chk, g_chk), y))
    if not converged:
        # the stopping rule applied to one more outer iteration from the returned point
        residual = abs(float(np.sum(w * np.log1p(g_chk))) - float(np.sum(w * np.log1p(gamma))))
        converged = residual < cfg.epsilon

    status = "optimal" if converged else "not_converged"
    return SolveReport(
        p, f_prev / LN2, it, converged, trace, residual, status,
        {"fixed_point": fixed_point, "gamma": gamma.tolist(), "y": y.tolist()},
    )


def _rel_change(new, old) -> float:
    scale = float(np.max(np.abs(old)))
    return float(np.max(np.abs(new - old))) / scale if scale > 0 else float(np.max(np.abs(new)))


def _extrapolate(qt: QuadraticTransform, p_prev, p_next, caps, constraints, max_doublings=12):
    """Over-relaxed step ``p_prev + beta (p_next - p_prev)`` along the surrogate update.

    The surrogate update is a minorise-maximise step and creeps when the
    true objective is flat.  Longer steps along the same direction are
    accepted while the true weighted rate keeps rising and the point stays
    feasible, so the objective sequence stays monotone.
    """
    def objective(p):
        return float(np.sum(qt.w * np.log1p(qt.t.sinr(p))))

    def ok(p):
        return all(c.value(p) >= 0 for c in constraints)

    best, f_best = p_next, objective(p_next)
    d = p_next - p_prev
    if not np.any(d):
        return best
    beta = 2.0
    for _ in range(max_doublings):
        cand = np.clip(p_prev + beta * d, 0.0, caps)
        if not ok(cand):
            break
        f = objective(cand)
        if f <= f_best:
            break
        best, f_best = cand, f
        beta *= 2.0
    return best


def _fd_hessian(grad, p, caps) -> np.ndarray:
    """Central-difference Hessian of ``grad`` with steps kept inside ``[0, caps]``."""
    n = p.size
    h = np.zeros((n, n))
    for j in range(n):
        step = min(1e-6 * caps[j], 0.5 * p[j], 0.5 * (caps[j] - p[j]))
        if step <= 0:
            continue
        e = np.zeros(n)
        e[j] = step
        h[:, j] = (grad(p + e) - grad(p - e)) / (2.0 * step)
    return 0.5 * (h + h.T)


def _polish_floors(qt: QuadraticTransform, p, caps, constraints, cfg: SolverSettings):
    """Warm-started barrier ascent on the true weighted rate inside the floor set.

    The objective Hessian is projected onto the negative semidefinite cone,
    so each Newton step is an ascent step even where the rate is not
    concave.  The floor set itself is convex.  The result replaces ``p``
    only when it is feasible and strictly better.
    """
    p = np.asarray(p, dtype=float)
    # the barrier needs a strictly interior start
    start = np.clip(p, 1e-9 * caps, (1.0 - 1e-9) * caps)
    if not all(c.value(start) > 0 for c in constraints):
        return p

    def hess(q):
        vals, vecs = np.linalg.eigh(_fd_hessian(qt.wsr_grad, q, caps))
        return (vecs * np.minimum(vals, 0.0)) @ vecs.T

    fn = ConcaveFn(qt.wsr, qt.wsr_grad, hess)
    try:
        sol = solve_concave_subproblem(fn, constraints, caps, x0=start, tol=cfg.inner_tol, mu=cfg.barrier_mu, t0=1e4)
    except Infeasible:
        return p
    q = sol.p
    if all(c.value(q) >= 0 for c in constraints) and qt.wsr(q) > qt.wsr(p):
        return q
    return p


def _polish(qt: QuadraticTransform, p, caps, constraints, max_steps=100):
    """Projected Newton ascent on the true weighted rate from the surrogate's answer.

    Only steps that raise the objective and keep every floor satisfied are
    taken, so the result is never worse than the input.  The Hessian comes
    from central differences of the analytic gradient.
    """
    p = np.asarray(p, dtype=float).copy()
    f = qt.wsr(p)

    def ok(q):
        return all(c.value(q) >= 0 for c in constraints)

    for _ in range(max_steps):
        grad = qt.wsr_grad(p) * caps  # unit-box coordinates
        at_lo = (p <= 0.0) & (grad <= 0)
        at_hi = (p >= caps) & (grad >= 0)
        free = ~(at_lo | at_hi)
        if not np.any(free) or float(np.max(np.abs(grad[free]))) <= 1e-13:
            break
        idx = np.flatnonzero(free)
        h = np.zeros((idx.size, idx.size))
        for col, j in enumerate(idx):
            e = np.zeros_like(p)
            e[j] = 1e-6 * caps[j]
            hi = np.minimum(p + e, caps)
            lo = np.maximum(p - e, 0.0)
            step = (hi[j] - lo[j]) / caps[j]
            if step <= 0:
                continue
            h[:, col] = ((qt.wsr_grad(hi) - qt.wsr_grad(lo)) * caps)[idx] / step
        h = 0.5 * (h + h.T)
        gf = grad[idx]
        try:
            np.linalg.cholesky(-h)
            d = np.linalg.solve(-h, gf)
        except np.linalg.LinAlgError:
            d = gf / float(np.max(np.abs(gf)))
        t = 1.0
        moved = False
        for _halving in range(40):
            cand = p.copy()
            cand[idx] = np.clip(p[idx] + t * d * caps[idx], 0.0, caps[idx])
            if ok(cand):
                fc = qt.wsr(cand)
                if fc > f:
                    p, f, moved = cand, fc, True
                    break
            t *= 0.5
        if not moved:
            break
    return p


def wsr_maximize_multistart(
    weights,
    r,
    order: DecodingOrder | None,
    s: Scenario,
    cfg: SolverSettings | None = None,
    extra_starts=(),
    n_random: int = 0,
) -> SolveReport:
    """Best of several :func:`wsr_maximize` runs from different starting powers.

    The weighted sum rate is not concave, so one run stops at a local
    maximum.  Starts are ``p_cap / 2``, ``p_cap``, each user alone at its
    cap, any ``extra_starts`` (e.g. the answer to a neighbouring problem) and
    ``n_random`` uniform draws seeded by ``cfg.seed``.  Starts that violate
    the floors are replaced by one shared strictly feasible point, so
    duplicates run once.  ``info["starts"]`` lists every run's objective.
    """
    cfg = cfg or SolverSettings()
    order = DecodingOrder.identity(s.size) if order is None else order
    floors = _check_floors(r, s)
    caps = s.p_cap
    constraints = Terms(s, order).floor_constraints(floors)
    starts = [0.5 * caps, caps.copy()]
    for k in range(s.size):
        v = np.zeros_like(caps)
        v[k] = caps[k]
        starts.append(v)
    starts += [np.clip(np.asarray(p, dtype=float), 0.0, caps) for p in extra_starts]
    rng = np.random.default_rng(cfg.seed)
    starts += [rng.uniform(0.0, 1.0, caps.size) * caps for _ in range(n_random)]

    feasible_point = None
    unique: list[np.ndarray] = []
    for p0 in starts:
        if constraints and not all(c.value(p0) > 0 for c in constraints):
            if feasible_point is None:
                feasible_point, _ = find_strictly_feasible(constraints, caps)
            p0 = feasible_point
        if not any(np.array_equal(p0, q) for q in unique):
            unique.append(p0)

    best, values = None, []
    for p0 in unique:
        rep = wsr_maximize(weights, floors, order, s, cfg, p0=p0)
        values.append(float(rep.objective))
        if best is None or rep.objective > best.objective + 1e-12:
            best = rep
    best.info["starts"] = values
    return best
