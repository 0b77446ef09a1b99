"""Capacity regions of the two-user (and K-user) uplink under PA distortion.

Boundaries are traced with the rate-profile method: for each floor ``tau``
on the other users, maximise user 1's rate.  The region of the system is
the convex hull of the per-order regions, whose sum-rate face is the
time-sharing segment between the two sum-rate corner points.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .noma_rates import DecodingOrder, Scenario, user_rates
from .solvers.common import Infeasible, SolverSettings
from .solvers.dinkelbach import dinkelbach_rate_profile
from .solvers.sumrate import sum_rate_maximize


@dataclass(frozen=True)
class RatePoint:
    """An achievable rate tuple and how to reach it.

    Time-shared points carry ``mix = (first, second, lam)`` instead of a
    single power vector: ``rates = lam * first.rates + (1 - lam) * second.rates``.
    Invalid points (solver failure or infeasible floors) have ``valid=False``
    and ``-inf`` as the objective user's rate.
    """

    rates: np.ndarray
    powers: np.ndarray | None
    order: DecodingOrder | None
    tau: np.ndarray | None = None
    valid: bool = True
    converged: bool = True
    mix: tuple | None = field(default=None, compare=False)

    @property
    def total(self) -> float:
        return float(np.sum(self.rates))


@dataclass(frozen=True)
class RegionBoundary:
    """Traced boundaries of both orders, their upper-right hull and the sum-rate corners."""

    points: list[RatePoint]
    hull: np.ndarray  # (n, 2) hull vertices, R1 increasing
    corners: tuple[RatePoint, RatePoint]

    @property
    def sum_rate(self) -> float:
        return self.corners[0].total

    def points_for(self, order: DecodingOrder) -> list[RatePoint]:
        return [pt for pt in self.points if pt.order == order]


def _profile_point(args) -> RatePoint:
    tau, order, s, cfg, target = args
    tau_vec = np.atleast_1d(np.asarray(tau, dtype=float))
    try:
        rep = dinkelbach_rate_profile(tau_vec, order, s, cfg, target=target)
    except Infeasible:
        rates = np.full(s.size, np.nan)
        others = [k for k in range(s.size) if k != target]
        rates[others] = tau_vec
        rates[target] = -np.inf
        return RatePoint(rates, None, order, tau_vec, valid=False, converged=False)
    rates = user_rates(rep.p_star, order, s)
    return RatePoint(rates, rep.p_star, order, tau_vec, valid=True, converged=rep.converged)


def _run(tasks, workers: int | None):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_profile_point, tasks))
    return [_profile_point(t) for t in tasks]


def trace_boundary_2user(
    order: DecodingOrder,
    s: Scenario,
    cfg: SolverSettings | None = None,
    workers: int | None = None,
) -> list[RatePoint]:
    """Boundary of one order's rate region on a uniform ``tau`` grid over ``[0, R2_max]``.

    Point ``i`` maximises user 1's rate subject to ``R_2 >= tau_i``.  Points
    whose solve fails are kept with ``valid=False``.
    """
    if s.size != 2:
        raise ValueError("trace_boundary_2user needs exactly two users")
    cfg = cfg or SolverSettings()
    taus = np.linspace(0.0, s.max_rates[1], cfg.tau_grid)
    return _run([(t, order, s, cfg, 0) for t in taus], workers)


def sum_rate_corner_points(s: Scenario, cfg: SolverSettings | None = None) -> tuple[RatePoint, RatePoint]:
    """Corner points B (order 2->1) and C (order 1->2) of the sum-rate face.

    Both use the same sum-rate optimal powers; only the decoding order differs,
    so their rate sums agree.
    """
    if s.size != 2:
        raise ValueError("corner points are defined for two users")
    cfg = cfg or SolverSettings()
    rep = sum_rate_maximize(None, s, replace(cfg, epsilon=min(cfg.epsilon, 1e-12)))
    out = []
    for order in (DecodingOrder((1, 0)), DecodingOrder((0, 1))):
        out.append(RatePoint(user_rates(rep.p_star, order, s), rep.p_star.copy(), order))
    return out[0], out[1]


def time_share(first: RatePoint, second: RatePoint, lam: float) -> RatePoint:
    """Rate point reached by using ``first`` a fraction ``lam`` of the time."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    rates = lam * first.rates + (1.0 - lam) * second.rates
    return RatePoint(rates, None, None, mix=(first, second, float(lam)))


def capacity_region_2user(
    s: Scenario,
    cfg: SolverSettings | None = None,
    workers: int | None = None,
) -> RegionBoundary:
    """Trace both decoding orders and convexify, including the corner segment."""
    cfg = cfg or SolverSettings()
    pts: list[RatePoint] = []
    for order in (DecodingOrder((1, 0)), DecodingOrder((0, 1))):
        pts.extend(trace_boundary_2user(order, s, cfg, workers))
    b, c = sum_rate_corner_points(s, cfg)
    hull = convex_hull_frontier([p for p in pts if p.valid] + [b, c])
    return RegionBoundary(pts, hull, (b, c))


def multiuser_tau_grid(s: Scenario, per_axis: int = 10, target: int = 0) -> list[np.ndarray]:
    """Uniform floors over ``[0, R_k^max]`` for every non-target user."""
    if per_axis < 1:
        raise ValueError("per_axis must be >= 1")
    axes = [np.linspace(0.0, s.max_rates[k], per_axis) for k in range(s.size) if k != target]
    return [np.array(t) for t in itertools.product(*axes)]


def trace_boundary_multiuser(
    order: DecodingOrder,
    tau_vec_grid: Sequence,
    s: Scenario,
    cfg: SolverSettings | None = None,
    workers: int | None = None,
) -> list[RatePoint]:
    """Maximise user 1's rate for every floor vector in ``tau_vec_grid``.

    Infeasible floors produce ``valid=False`` points whose user-1 rate is ``-inf``.
    """
    cfg = cfg or SolverSettings()
    return _run([(t, order, s, cfg, 0) for t in tau_vec_grid], workers)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def pareto_filter(rates: np.ndarray) -> np.ndarray:
    """Rows of ``rates`` not weakly dominated by another row (duplicates collapse)."""
    rates = np.unique(np.asarray(rates, dtype=float), axis=0)
    keep = []
    for i, r in enumerate(rates):
        ge = np.all(rates >= r, axis=1)
        gt = np.any(rates > r, axis=1)
        if not np.any(ge & gt):
            keep.append(i)
    return rates[keep]


def convex_hull_frontier(points, dims: tuple[int, int] | None = None) -> np.ndarray:
    """Upper-right convex frontier of a set of rate points.

    Args:
        points: ``RatePoint`` objects or an ``(n, K)`` array of rates.
        dims: for ``K > 2``, the pair of users to project onto.  Without it a
            ``K > 2`` input is only Pareto-filtered.

    Returns:
        For two dimensions, hull vertices ordered by increasing first rate,
        running from the highest second-user rate to the highest first-user
        rate.  Collinear interior points are dropped.
    """
    if len(points) == 0:
        raise ValueError("convex_hull_frontier needs at least one point")
    if isinstance(points[0], RatePoint):
        rates = np.array([p.rates for p in points if p.valid], dtype=float)
    else:
        rates = np.asarray(points, dtype=float)
    if rates.ndim != 2 or rates.shape[0] == 0:
        raise ValueError("no valid points")
    rates = rates[np.all(np.isfinite(rates), axis=1)]
    if rates.shape[0] == 0:
        raise ValueError("no finite points")
    if rates.shape[1] > 2:
        if dims is None:
            return pareto_filter(rates)
        rates = rates[:, list(dims)]
    elif rates.shape[1] == 1:
        return rates[np.argmax(rates[:, 0])][None, :]

    pts = sorted(set(map(tuple, rates)))
    upper: list[tuple[float, float]] = []
    for p in pts:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) >= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(upper)
    top = np.flatnonzero(hull[:, 1] == hull[:, 1].max())[-1]
    return hull[top:]


def hull_radius(hull: np.ndarray, direction) -> float:
    """Distance from the origin to the region boundary along ``direction``.

    The region is the down-closure of the hull in the positive quadrant.
    """
    d = np.asarray(direction, dtype=float)
    if d.shape != (2,) or np.any(d < 0) or not np.any(d > 0):
        raise ValueError("direction must be a non-negative, non-zero 2-vector")
    d = d / np.linalg.norm(d)
    # close the polygon with the axis projections of its end vertices
    poly = np.vstack([[0.0, hull[0, 1]], hull, [hull[-1, 0], 0.0]])
    best = 0.0
    for a, b in zip(poly[:-1], poly[1:]):
        e = b - a
        den = d[0] * e[1] - d[1] * e[0]
        if den == 0.0:
            continue
        # solve t*d = a + u*e
        t = (a[0] * e[1] - a[1] * e[0]) / den
        u = (a[0] * d[1] - a[1] * d[0]) / den
        if -1e-12 <= u <= 1 + 1e-12 and t >= 0:
            best = max(best, t)
    return best


def ray_directions(n: int) -> np.ndarray:
    """``n`` unit directions spread over the open first quadrant."""
    ang = (np.arange(n) + 0.5) * (math.pi / 2) / n
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)
