"""Concave building blocks of the NOMA power-control problems.

Everything here works in noise-normalised units: gains are ``|h|^2 / N_0``
so the receiver noise power is 1.
"""

from __future__ import annotations

import numpy as np

from ..noma_rates import DecodingOrder, Scenario
from .barrier import ConcaveFn


class Terms:
    """Distortion, interference masks and rate-floor constraints for one scenario/order."""

    def __init__(self, s: Scenario, order: DecodingOrder | None = None):
        self.s = s
        self.order = DecodingOrder.identity(s.size) if order is None else order
        k = s.size
        self.k = k
        self.g = s.g
        self.a = s.a
        self.alpha = s.alpha
        pos = np.empty(k, dtype=int)
        pos[list(self.order.perm)] = np.arange(k)
        self.pos = pos
        # after[k, j]: user j is decoded after user k (interferes with k)
        self.after = pos[None, :] > pos[:, None]

    # distortion sum_i a_i p_i^alpha_i g_i and its derivatives (diagonal Hessian)
    def dist(self, p):
        return float(np.sum(self.a * np.power(p, self.alpha) * self.g))

    def dist_grad(self, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.a * self.alpha * np.power(p, self.alpha - 1.0) * self.g
        return np.where(self.a > 0, d, 0.0)

    def dist_hess_diag(self, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.a * self.alpha * (self.alpha - 1.0) * np.power(p, self.alpha - 2.0) * self.g
        return np.where((self.a > 0) & (self.alpha != 1.0), d, 0.0)

    def interference(self, user, p):
        return float(np.sum(p * self.g * self.after[user]))

    def denominator(self, user, p):
        """Interference-plus-distortion-plus-noise seen by ``user``."""
        return self.interference(user, p) + self.dist(p) + 1.0

    def denominator_grad(self, user, p):
        return self.g * self.after[user] + self.dist_grad(p)

    def sinr(self, p):
        p = np.asarray(p, dtype=float)
        x = p * self.g
        return x / (self.after.astype(float) @ x + self.dist(p) + 1.0)

    def slack(self, user, p, c):
        return p[user] * self.g[user] - c * self.denominator(user, p)

    def floor_constraint(self, user: int, rate_floor: float) -> ConcaveFn:
        """``p_k g_k - (2^r - 1)(interference + distortion + 1) >= 0``."""
        c = 2.0**rate_floor - 1.0
        e = np.zeros(self.k)
        e[user] = self.g[user]

        def value(p):
            return float(p[user] * self.g[user] - c * self.denominator(user, p))

        def grad(p):
            return e - c * self.denominator_grad(user, p)

        def hess(p):
            return np.diag(-c * self.dist_hess_diag(p))

        return ConcaveFn(value, grad, hess)

    def floor_constraints(self, floors) -> list[ConcaveFn]:
        floors = np.asarray(floors, dtype=float)
        return [self.floor_constraint(k, floors[k]) for k in range(self.k) if floors[k] > 0]

    def slacks(self, p, floors):
        c = np.power(2.0, np.asarray(floors, dtype=float)) - 1.0
        return np.array([self.slack(k, p, c[k]) for k in range(self.k)])
