"""Power-law PA distortion model and single-link optima.

Distortion noise power is modelled as ``P_N = a * P_T**alpha``.  ``a = 0`` is
an ideal PA, ``alpha = 1`` the linear (proportional) distortion model and
``alpha > 1`` the measured nonlinear regime.  All quantities are linear SI
units (watts, linear power gains, bits/s/Hz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PaModel:
    """Distortion-law coefficients ``(a, alpha)``."""

    a: float
    alpha: float

    def __post_init__(self):
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ValueError(f"a must be finite and >= 0, got {self.a}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")

    @property
    def is_ideal(self) -> bool:
        return self.a == 0.0

    @property
    def is_superlinear(self) -> bool:
        """True when the rate has an interior maximum (``a > 0, alpha > 1``)."""
        return self.a > 0.0 and self.alpha > 1.0

    @classmethod
    def ideal(cls) -> "PaModel":
        return cls(0.0, 1.0)

    def to_regression(self) -> "RegressionForm":
        return power_law_to_regression(self)


IDEAL = PaModel(0.0, 1.0)


@dataclass(frozen=True)
class RegressionForm:
    """NMSE regression line ``eta = k1 * 10 log10(1000 P_T) + k2`` (dB)."""

    k1: float
    k2: float

    def to_power_law(self) -> PaModel:
        return regression_to_power_law(self)


@dataclass(frozen=True)
class LinkBudget:
    """Single uplink: ``|h|^2``, receiver noise ``N_0`` (W) and ``p_max`` (W)."""

    channel_gain: float
    noise_power: float
    p_max: float

    def __post_init__(self):
        if not self.channel_gain >= 0:
            raise ValueError(f"channel_gain must be >= 0, got {self.channel_gain}")
        if not self.noise_power > 0:
            raise ValueError(f"noise_power must be > 0, got {self.noise_power}")
        if not self.p_max > 0:
            raise ValueError(f"p_max must be > 0, got {self.p_max}")


def distortion_power(p_t, model: PaModel):
    """Distortion noise power ``a * p_t**alpha`` in watts.

    Accepts scalars or arrays.  Raises ``ValueError`` for negative power.
    """
    p = np.asarray(p_t, dtype=float)
    if np.any(p < 0):
        raise ValueError("transmit power must be non-negative")
    out = model.a * np.power(p, model.alpha)
    return float(out) if out.ndim == 0 else out


def nmse_db(p_t, reg: RegressionForm):
    """NMSE in dB predicted by the regression line at output power ``p_t`` (W)."""
    p = np.asarray(p_t, dtype=float)
    if np.any(p <= 0):
        raise ValueError("output power must be positive")
    out = reg.k1 * 10.0 * np.log10(1000.0 * p) + reg.k2
    return float(out) if out.ndim == 0 else out


def regression_to_power_law(reg: RegressionForm) -> PaModel:
    # 10^(3 k1 + k2/10) is 1000**k1 * 10**(k2/10) without the extra rounding step
    return PaModel(a=10.0 ** (3.0 * reg.k1 + reg.k2 / 10.0), alpha=1.0 + reg.k1)


def power_law_to_regression(model: PaModel) -> RegressionForm:
    if model.a <= 0:
        raise ValueError("an ideal PA has no regression form (a must be > 0)")
    k1 = model.alpha - 1.0
    return RegressionForm(k1=k1, k2=10.0 * math.log10(model.a) - 30.0 * k1)


def p2p_sinr(p, link: LinkBudget, model: PaModel):
    p = np.asarray(p, dtype=float)
    g = link.channel_gain
    out = p * g / (model.a * np.power(p, model.alpha) * g + link.noise_power)
    return float(out) if out.ndim == 0 else out


def p2p_rate(p, link: LinkBudget, model: PaModel):
    """Achievable single-link rate in bits/s/Hz at transmit power ``p``."""
    return np.log2(1.0 + p2p_sinr(p, link, model))


def stationary_power(link: LinkBudget, model: PaModel) -> float:
    """Unconstrained SINR-maximising power; ``inf`` when the rate is monotone."""
    if not model.is_superlinear or link.channel_gain == 0.0:
        return math.inf
    return (link.noise_power / (model.a * (model.alpha - 1.0) * link.channel_gain)) ** (
        1.0 / model.alpha
    )


def optimal_p2p_power(link: LinkBudget, model: PaModel) -> float:
    """Power cap ``min(p_max, p_opt)`` beyond which a user never transmits."""
    return min(link.p_max, stationary_power(link, model))


def max_p2p_rate(link: LinkBudget, model: PaModel) -> float:
    """Maximum single-link rate, using the closed form when ``p_opt <= p_max``."""
    p_opt = stationary_power(link, model)
    if p_opt > link.p_max:
        return float(p2p_rate(link.p_max, link, model))
    # at p_opt the denominator collapses to alpha * N_0 / (alpha - 1)
    sinr = (model.alpha - 1.0) / model.alpha * p_opt * link.channel_gain / link.noise_power
    return math.log2(1.0 + sinr)
