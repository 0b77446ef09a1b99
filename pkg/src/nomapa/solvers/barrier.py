"""Log-barrier interior-point method for small concave programs.

Solves ``max f(p)`` subject to ``g_j(p) >= 0`` and ``0 <= p <= upper`` with
``f`` and every ``g_j`` concave and twice differentiable on the open box.
Variables are rescaled to the unit box internally.  Centering uses damped
Newton steps and falls back to gradient ascent when the Newton system is
singular or not an ascent direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .common import Infeasible

Vector = np.ndarray


@dataclass(frozen=True)
class ConcaveFn:
    """A concave function given by value, gradient and Hessian callables."""

    value: Callable[[Vector], float]
    grad: Callable[[Vector], Vector]
    hess: Callable[[Vector], np.ndarray]


def linear(c) -> ConcaveFn:
    c = np.asarray(c, dtype=float)
    n = c.size
    return ConcaveFn(lambda p: float(c @ p), lambda p: c.copy(), lambda p: np.zeros((n, n)))


@dataclass
class ConcaveSolution:
    p: Vector
    value: float
    status: str  # "optimal" | "degenerate" | "not_converged"
    gap: float
    newton_steps: int
    min_slack: float

    @property
    def converged(self) -> bool:
        return self.status != "not_converged"


class _Scaled:
    """Problem data mapped to the unit box ``x = p / upper``."""

    def __init__(self, objective, constraints, upper):
        self.f = objective
        self.cons = list(constraints)
        self.ub = np.asarray(upper, dtype=float)

    def p(self, x):
        return self.ub * x

    def fval(self, x):
        return self.f.value(self.p(x))

    def fgrad(self, x):
        return self.ub * self.f.grad(self.p(x))

    def fhess(self, x):
        return self.f.hess(self.p(x)) * np.outer(self.ub, self.ub)

    def gvals(self, x):
        p = self.p(x)
        return np.array([c.value(p) for c in self.cons])

    def ggrads(self, x):
        p = self.p(x)
        return [self.ub * c.grad(p) for c in self.cons]

    def ghess(self, x):
        p = self.p(x)
        uu = np.outer(self.ub, self.ub)
        return [c.hess(p) * uu for c in self.cons]


def _box_ok(x):
    return bool(np.all(x > 0) and np.all(x < 1))


def _phase_one(sc: _Scaled, x, tol, mu, feas_tol, max_newton):
    """Maximise ``min_j g_j`` over the box; returns ``(x, s, gap, steps)``.

    Stops early at a strictly feasible point.
    """
    n = x.size
    m = len(sc.cons) + 2 * n

    def split(z):
        return z[:n], z[n]

    gv0 = sc.gvals(x)
    z = np.append(x, float(np.min(gv0)) - 1.0)

    def feasible(zz):
        xx, s = split(zz)
        return bool(np.all(sc.gvals(xx) - s > 0))

    def make(t):
        def phi(zz):
            xx, s = split(zz)
            h = sc.gvals(xx) - s
            return t * s + np.sum(np.log(h)) + np.sum(np.log(xx)) + np.sum(np.log1p(-xx))

        def gh(zz):
            xx, s = split(zz)
            hv = sc.gvals(xx) - s
            grads = sc.ggrads(xx)
            hesses = sc.ghess(xx)
            g = np.zeros(n + 1)
            H = np.zeros((n + 1, n + 1))
            g[n] = t
            for hj, gj, Hj in zip(hv, grads, hesses):
                v = np.append(gj, -1.0)
                g += v / hj
                H[:n, :n] += Hj / hj
                H -= np.outer(v, v) / hj**2
            g[:n] += 1.0 / xx - 1.0 / (1.0 - xx)
            H[np.arange(n), np.arange(n)] -= 1.0 / xx**2 + 1.0 / (1.0 - xx) ** 2
            return g, H

        return phi, gh

    t, steps = 1.0, 0
    while True:
        phi, gh = make(t)
        z, k = _newton_center(phi, gh, z, max_newton, feasible, n)
        steps += k
        x, s = split(z)
        gap = m / t
        if s > 0:
            return x, s, gap, steps
        if s + gap < -feas_tol:
            return x, s, gap, steps
        if gap <= tol:
            return x, s, gap, steps
        t *= mu


def _newton_center(phi, grad_hess, z, max_steps, feasible, n=None):
    """Damped Newton ascent on the barrier function ``phi``.

    Only the first ``n`` coordinates (default: all) live in the unit box.
    """
    n = z.size if n is None else n
    steps = 0
    val = phi(z)
    for _ in range(max_steps):
        g, h = grad_hess(z)
        dz = None
        try:
            cand = np.linalg.solve(-h, g)
            dec = float(g @ cand)
            if np.all(np.isfinite(cand)) and dec > 0:
                dz = cand
        except np.linalg.LinAlgError:
            pass
        if dz is None:
            dz = g / max(1.0, float(np.max(np.abs(g))))
            dec = float(g @ dz)
        if dec <= 1e-11:
            break
        x, dx = z[:n], dz[:n]
        step = 1.0
        pos, neg = dx > 0, dx < 0
        if np.any(pos):
            step = min(step, 0.99 * float(np.min((1.0 - x[pos]) / dx[pos])))
        if np.any(neg):
            step = min(step, 0.99 * float(np.min(-x[neg] / dx[neg])))
        improved = False
        for _halving in range(40):
            zn = z + step * dz
            if _box_ok(zn[:n]) and feasible(zn):
                vn = phi(zn)
                # near the centre phi differences drown in rounding, so a
                # full Newton step inside the domain is taken as is
                if vn >= val + 0.25 * step * dec or (dec < 1e-6 and step == 1.0):
                    improved = True
                    break
            step *= 0.5
        steps += 1
        if not improved:
            break
        z, val = zn, max(vn, val)
    return z, steps


def _scale_fn(fn: ConcaveFn, k: float) -> ConcaveFn:
    return ConcaveFn(lambda p: fn.value(p) / k, lambda p: fn.grad(p) / k, lambda p: fn.hess(p) / k)


def find_strictly_feasible(
    constraints: Sequence[ConcaveFn],
    upper,
    x0=None,
    tol: float = 1e-10,
    mu: float = 10.0,
    feas_tol: float = 1e-9,
    max_newton: int = 100,
):
    """Feasibility phase: maximise the minimum constraint value over the box.

    Returns ``(p, min_slack)``.  ``min_slack > 0`` means a strictly feasible
    point was found; raises :class:`Infeasible` when the maximum is below
    ``-feas_tol``.  A value in ``[-feas_tol, 0]`` signals a feasible set with
    empty interior.
    """
    upper = np.asarray(upper, dtype=float)
    x = np.full(upper.size, 0.5) if x0 is None else np.clip(np.asarray(x0) / upper, 1e-6, 1 - 1e-6)
    sc = _Scaled(linear(np.zeros(upper.size)), constraints, upper)
    if not constraints:
        return sc.p(x), math.inf
    gv = sc.gvals(x)
    if np.all(gv > 0):
        return sc.p(x), float(np.min(gv))
    # phase one couples all constraints through one slack variable, so put
    # them on a common scale first
    kappa = [
        max(1.0, abs(v), float(np.max(np.abs(gg))))
        for v, gg in zip(gv, sc.ggrads(x))
    ]
    scaled = _Scaled(sc.f, [_scale_fn(c, k) for c, k in zip(constraints, kappa)], upper)
    x, s, gap, _ = _phase_one(scaled, x, tol, mu, feas_tol, max_newton)
    s_true = float(np.min(sc.gvals(x)))
    if s_true > 0:
        return sc.p(x), s_true
    if s + gap < -feas_tol:
        raise Infeasible("constraint set is empty", certificate=s + gap)
    return sc.p(x), s_true


def solve_concave_subproblem(
    objective: ConcaveFn,
    constraints: Sequence[ConcaveFn],
    upper,
    x0=None,
    tol: float = 1e-8,
    mu: float = 10.0,
    feas_tol: float = 1e-9,
    max_newton: int = 100,
    snap_tol: float = 1e-6,
    t0: float = 1.0,
) -> ConcaveSolution:
    """Maximise a concave objective under concave ``>= 0`` constraints and a box.

    Args:
        objective: concave objective in physical variables.
        constraints: concave functions required to be non-negative.
        upper: per-coordinate upper bounds (lower bounds are zero), all > 0.
        x0: optional starting point; used when strictly feasible.
        tol: target duality gap, relative to the objective's gradient scale
            at the starting point.
        t0: initial barrier weight; a large value with a good ``x0`` keeps
            the path close to that point (warm start).

    Raises:
        Infeasible: the constraints cannot be met inside the box.
    """
    upper = np.asarray(upper, dtype=float)
    if np.any(upper <= 0):
        raise ValueError("upper bounds must be positive")
    n = upper.size
    constraints = list(constraints)
    sc = _Scaled(objective, constraints, upper)

    x = None
    if x0 is not None:
        xs = np.asarray(x0, dtype=float) / upper
        if _box_ok(xs) and (not constraints or np.all(sc.gvals(xs) > 0)):
            x = xs
    steps = 0
    if x is None:
        p_start, s0 = find_strictly_feasible(constraints, upper, None, min(tol, 1e-10), mu, feas_tol, max_newton)
        x = p_start / upper
        if s0 <= 0:
            # feasible set has no interior: the phase-one maximiser is the answer
            return ConcaveSolution(sc.p(x), sc.fval(x), "degenerate", 0.0, 0, s0)

    scale = float(np.max(np.abs(sc.fgrad(x))))
    if not math.isfinite(scale) or scale <= 0:
        scale = 1.0
    m = len(constraints) + 2 * n

    def feasible(xx):
        return not constraints or bool(np.all(sc.gvals(xx) > 0))

    def make(t):
        w = t / scale

        def phi(xx):
            val = w * sc.fval(xx) + np.sum(np.log(xx)) + np.sum(np.log1p(-xx))
            if constraints:
                val += np.sum(np.log(sc.gvals(xx)))
            return val

        def gh(xx):
            g = w * sc.fgrad(xx) + 1.0 / xx - 1.0 / (1.0 - xx)
            H = w * sc.fhess(xx)
            H[np.arange(n), np.arange(n)] -= 1.0 / xx**2 + 1.0 / (1.0 - xx) ** 2
            if constraints:
                for gv, gg, gH in zip(sc.gvals(xx), sc.ggrads(xx), sc.ghess(xx)):
                    g += gg / gv
                    H += gH / gv - np.outer(gg, gg) / gv**2
            return g, H

        return phi, gh

    t = float(t0)
    status = "not_converged"
    for _ in range(60):
        phi, gh = make(t)
        x, k = _newton_center(phi, gh, x, max_newton, feasible)
        steps += k
        if m / t <= tol:
            status = "optimal"
            break
        t *= mu

    x = _snap(sc, x, snap_tol)
    gv = sc.gvals(x) if constraints else np.array([math.inf])
    return ConcaveSolution(sc.p(x), sc.fval(x), status, m / t * scale, steps, float(np.min(gv)))


def _snap(sc: _Scaled, x, snap_tol):
    """Move near-bound coordinates onto the bound when that costs nothing."""
    x = x.copy()
    fx = sc.fval(x)
    ok = 1e-12 * max(1.0, abs(fx))
    for i in range(x.size):
        for bound, near in ((1.0, x[i] > 1 - snap_tol), (0.0, x[i] < snap_tol)):
            if not near:
                continue
            cand = x.copy()
            cand[i] = bound
            if sc.cons:
                gc = sc.gvals(cand)
                if np.any(gc < np.minimum(0.0, sc.gvals(x))):
                    continue
            fc = sc.fval(cand)
            if math.isfinite(fc) and fc >= fx - ok:
                x, fx = cand, max(fx, fc)
    return x
