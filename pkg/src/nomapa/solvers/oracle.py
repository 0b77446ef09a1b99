"""Exhaustive grid search over the power box, used as a verification oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..noma_rates import DecodingOrder, Scenario, sum_rate, user_rates

MAX_USERS = 3
MAX_RESOLUTION = 1000


@dataclass(frozen=True)
class SumRateObjective:
    """Sum rate (bits/s/Hz)."""


@dataclass(frozen=True)
class WsrObjective:
    weights: tuple[float, ...]
    order: DecodingOrder


@dataclass(frozen=True)
class RateProfileObjective:
    """Rate of ``target`` subject to every other user reaching its floor."""

    tau: tuple[float, ...]
    order: DecodingOrder
    target: int = 0


@dataclass(frozen=True)
class OracleResult:
    p: np.ndarray
    value: float
    step: np.ndarray  # grid spacing per user, watts
    lipschitz_gap: float  # largest objective change between adjacent grid points, summed over axes
    feasible: bool


def _evaluate(objective, p, s: Scenario):
    """Objective values and feasibility mask on a block of grid points."""
    if isinstance(objective, SumRateObjective):
        v = sum_rate(p, s)
        return v, np.ones(v.shape, dtype=bool)
    rates = user_rates(p, objective.order, s)
    if isinstance(objective, WsrObjective):
        v = rates @ np.asarray(objective.weights, dtype=float)
        return v, np.ones(v.shape, dtype=bool)
    if isinstance(objective, RateProfileObjective):
        others = [k for k in range(s.size) if k != objective.target]
        tau = np.atleast_1d(np.asarray(objective.tau, dtype=float))
        ok = np.all(rates[..., others] >= tau, axis=-1)
        return rates[..., objective.target], ok
    raise TypeError(f"unknown objective {objective!r}")


def grid_oracle(s: Scenario, objective, resolution: int) -> OracleResult:
    """Best point of a uniform ``resolution``-per-axis grid over ``[0, p_cap]^K``.

    Ties go to the first point in lexicographic order, i.e. smaller powers.
    Infeasible grid points (rate-profile floors) are skipped; when none is
    feasible, ``feasible`` is False and ``value`` is ``-inf``.
    """
    k = s.size
    if k > MAX_USERS:
        raise ValueError(f"grid oracle supports at most {MAX_USERS} users")
    if not 2 <= resolution <= MAX_RESOLUTION:
        raise ValueError(f"resolution must lie in [2, {MAX_RESOLUTION}]")
    axes = [np.linspace(0.0, c, resolution) for c in s.p_cap]
    step = np.array([ax[1] - ax[0] for ax in axes])

    best_val, best_p = -np.inf, None
    jumps = np.zeros(k)
    prev_last = None
    # chunk along the first axis so K=3 grids stay within memory
    chunk = max(1, int(2_000_000 // resolution ** (k - 1)))
    for start in range(0, resolution, chunk):
        rows = axes[0][start : start + chunk]
        mesh = np.stack(np.meshgrid(rows, *axes[1:], indexing="ij"), axis=-1)
        vals, ok = _evaluate(objective, mesh, s)
        for ax in range(1, k):
            if vals.shape[ax] > 1:
                jumps[ax] = max(jumps[ax], float(np.max(np.abs(np.diff(vals, axis=ax)))))
        block = vals if prev_last is None else np.concatenate([prev_last[None], vals], axis=0)
        if block.shape[0] > 1:
            jumps[0] = max(jumps[0], float(np.max(np.abs(np.diff(block, axis=0)))))
        prev_last = vals[-1]
        masked = np.where(ok, vals, -np.inf)
        i = int(np.argmax(masked))
        if masked.flat[i] > best_val:
            best_val = float(masked.flat[i])
            best_p = mesh.reshape(-1, k)[i].copy()

    feasible = best_p is not None
    if not feasible:
        best_p = np.full(k, np.nan)
    return OracleResult(best_p, best_val, step, float(np.sum(jumps)), feasible)
