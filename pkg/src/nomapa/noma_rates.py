"""Uplink NOMA SINR and rates with SIC and non-cancellable PA distortion.

Users are indexed ``0..K-1``.  A :class:`DecodingOrder` lists users in the
order the base station decodes them; a user sees interference from every
user decoded after it, plus the distortion noise of *all* users (SIC cannot
remove it, including the user's own).

Every rate function accepts a power array whose last axis is the user axis,
so whole grids of allocations can be evaluated at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .pa_model import IDEAL, LinkBudget, PaModel, optimal_p2p_power, max_p2p_rate


@dataclass(frozen=True)
class DecodingOrder:
    """Permutation of ``0..K-1``; ``perm[i]`` is the user decoded i-th."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        if sorted(perm) != list(range(len(perm))) or not perm:
            raise ValueError(f"not a permutation of 0..K-1: {self.perm}")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, k: int) -> "DecodingOrder":
        return cls(tuple(range(k)))

    @classmethod
    def reverse(cls, k: int) -> "DecodingOrder":
        return cls(tuple(range(k - 1, -1, -1)))

    @classmethod
    def parse(cls, text: str) -> "DecodingOrder":
        """Parse the one-based arrow notation, e.g. ``"2->1"`` or ``"4->3->2->1"``."""
        parts = [t.strip() for t in text.replace("→", "->").split("->")]
        try:
            return cls(tuple(int(t) - 1 for t in parts))
        except ValueError as exc:
            raise ValueError(f"cannot parse decoding order {text!r}") from exc

    @property
    def size(self) -> int:
        return len(self.perm)

    def position(self, user: int) -> int:
        return self.perm.index(user)

    def label(self) -> str:
        return "->".join(str(u + 1) for u in self.perm)

    def __iter__(self):
        return iter(self.perm)


@dataclass(frozen=True)
class Scenario:
    """Per-user channel power gains, PA models and power limits.

    ``noise_power`` is the receiver noise ``N_0`` in watts over ``bandwidth``.
    """

    gains: tuple[float, ...]
    models: tuple[PaModel, ...]
    noise_power: float
    p_max: tuple[float, ...]
    bandwidth: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        object.__setattr__(self, "models", tuple(self.models))
        p_max = self.p_max
        if np.ndim(p_max) == 0:
            p_max = (float(p_max),) * len(self.gains)
        object.__setattr__(self, "p_max", tuple(float(p) for p in p_max))
        k = len(self.gains)
        if k < 1:
            raise ValueError("a scenario needs at least one user")
        if len(self.models) != k or len(self.p_max) != k:
            raise ValueError("gains, models and p_max must have one entry per user")
        if any(g < 0 for g in self.gains):
            raise ValueError("channel gains must be >= 0")
        if any(p <= 0 for p in self.p_max):
            raise ValueError("p_max must be > 0")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be > 0")

    @classmethod
    def homogeneous(
        cls,
        gains: Sequence[float],
        model: PaModel,
        noise_power: float,
        p_max: float,
        bandwidth: float = 1.0,
    ) -> "Scenario":
        return cls(tuple(gains), (model,) * len(gains), noise_power, p_max, bandwidth)

    @property
    def size(self) -> int:
        return len(self.gains)

    @property
    def users(self) -> list[LinkBudget]:
        return [LinkBudget(g, self.noise_power, pm) for g, pm in zip(self.gains, self.p_max)]

    @cached_property
    def g(self) -> np.ndarray:
        """Channel gains normalised by the noise power (noise becomes 1)."""
        return np.asarray(self.gains) / self.noise_power

    @cached_property
    def a(self) -> np.ndarray:
        return np.array([m.a for m in self.models])

    @cached_property
    def alpha(self) -> np.ndarray:
        return np.array([m.alpha for m in self.models])

    @cached_property
    def p_cap(self) -> np.ndarray:
        """Per-user cap ``min(p_max, p_opt)``."""
        return np.array([optimal_p2p_power(u, m) for u, m in zip(self.users, self.models)])

    @cached_property
    def max_rates(self) -> np.ndarray:
        """Single-user maximum rates (others silent), bits/s/Hz."""
        return np.array([max_p2p_rate(u, m) for u, m in zip(self.users, self.models)])

    def with_models(self, models: Sequence[PaModel] | PaModel) -> "Scenario":
        if isinstance(models, PaModel):
            models = (models,) * self.size
        return replace(self, models=tuple(models))

    def ideal(self) -> "Scenario":
        """Same links with distortion-free PAs."""
        return self.with_models(IDEAL)

    def subset(self, users: Sequence[int]) -> "Scenario":
        users = list(users)
        return Scenario(
            tuple(self.gains[i] for i in users),
            tuple(self.models[i] for i in users),
            self.noise_power,
            tuple(self.p_max[i] for i in users),
            self.bandwidth,
        )


def _check_power(p, k: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (k,):
        raise ValueError(f"power allocation must have {k} entries on the last axis")
    if np.any(p < 0):
        raise ValueError("transmit powers must be non-negative")
    return p


def distortion_received(p, s: Scenario) -> np.ndarray:
    """Aggregate received distortion ``sum_i a_i p_i^alpha_i g_i`` (noise units)."""
    return np.sum(s.a * np.power(p, s.alpha) * s.g, axis=-1)


def sinr_all(p, order: DecodingOrder, s: Scenario) -> np.ndarray:
    """SINR of every user (indexed by user) under ``order``."""
    p = _check_power(p, s.size)
    if order.size != s.size:
        raise ValueError("decoding order size does not match the scenario")
    perm = np.asarray(order.perm)
    x = (p * s.g)[..., perm]
    # signal power of users decoded after each position
    after = np.cumsum(x[..., ::-1], axis=-1)[..., ::-1] - x
    den = after + distortion_received(p, s)[..., None] + 1.0
    out = np.empty_like(x)
    out[..., perm] = x / den
    return out


def user_rates(p, order: DecodingOrder, s: Scenario) -> np.ndarray:
    return np.log2(1.0 + sinr_all(p, order, s))


def _user(user: int, s: Scenario) -> int:
    if not 0 <= user < s.size:
        raise IndexError(f"user index {user} out of range for K={s.size}")
    return user


def sinr(user: int, order: DecodingOrder, p, s: Scenario):
    """SINR of ``user`` under decoding ``order``."""
    return sinr_all(p, order, s)[..., _user(user, s)]


def user_rate(user: int, order: DecodingOrder, p, s: Scenario):
    """Rate of ``user`` in bits/s/Hz."""
    return np.log2(1.0 + sinr(user, order, p, s))


def sum_sinr(p, s: Scenario):
    p = _check_power(p, s.size)
    return np.sum(p * s.g, axis=-1) / (distortion_received(p, s) + 1.0)


def sum_rate(p, s: Scenario):
    """Sum rate in bits/s/Hz; identical for every decoding order."""
    return np.log2(1.0 + sum_sinr(p, s))


def weighted_sum_rate(p, weights, order: DecodingOrder, s: Scenario):
    return np.sum(np.asarray(weights) * user_rates(p, order, s), axis=-1)


def slacks(p, order: DecodingOrder, s: Scenario, floors) -> np.ndarray:
    """Rate-floor slacks of all users in noise-normalised units.

    Non-negative exactly when the user meets its floor.
    """
    p = _check_power(p, s.size)
    perm = np.asarray(order.perm)
    x = (p * s.g)[..., perm]
    after = np.cumsum(x[..., ::-1], axis=-1)[..., ::-1] - x
    c = np.power(2.0, np.asarray(floors, dtype=float)) - 1.0
    den = after + distortion_received(p, s)[..., None] + 1.0
    out = np.empty_like(x)
    out[..., perm] = x - c[perm] * den
    return out


def rate_constraint_slack(user: int, order: DecodingOrder, p, s: Scenario, r_k: float):
    """``p_k|h_k|^2 - (2^r_k - 1)(interference + distortion + N_0)`` in watts."""
    if r_k < 0:
        raise ValueError("rate floor must be >= 0")
    floors = np.zeros(s.size)
    floors[_user(user, s)] = r_k
    return slacks(p, order, s, floors)[..., user] * s.noise_power


def all_orders(k: int):
    return [DecodingOrder(perm) for perm in itertools.permutations(range(k))]


def throughput(rate_bits_per_hz, s: Scenario):
    """Convert spectral efficiency to bits/s."""
    return np.asarray(rate_bits_per_hz) * s.bandwidth


def tdma_rates(s: Scenario, shares=None) -> np.ndarray:
    """Per-user TDMA rates: each user alone at its optimal power for its time share."""
    shares = np.full(s.size, 1.0 / s.size) if shares is None else np.asarray(shares, float)
    if not math.isclose(float(np.sum(shares)), 1.0, rel_tol=1e-9):
        raise ValueError("time shares must sum to 1")
    return shares * s.max_rates
