"""Bussgang decomposition, NMSE and power-law regression of NMSE sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..pa_model import PaModel, RegressionForm, regression_to_power_law

NMSE_FLOOR_DB = -200.0


@dataclass(frozen=True)
class NmseMeasurement:
    """One sweep point: PA output power (W) and its NMSE (dB)."""

    p_out: float
    nmse_db: float
    dpd_enabled: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.p_out > 0:
            raise ValueError("p_out must be > 0")


def bussgang_decompose(u, y) -> tuple[complex, np.ndarray]:
    """Split ``y`` into ``G*u + e`` with ``e`` uncorrelated with ``u``.

    Uses ``<x, y> = sum(x * conj(y))``, so ``G = <y, u> / <u, u>``.
    """
    u = np.asarray(u, dtype=complex).reshape(-1)
    y = np.asarray(y, dtype=complex).reshape(-1)
    if u.size != y.size:
        raise ValueError("u and y must have equal length")
    pu = float(np.vdot(u, u).real)
    if pu == 0.0:
        raise ValueError("u has zero power")
    gain = complex(np.vdot(u, y) / pu)
    return gain, y - gain * u


def measure_nmse(u, y, gain: complex) -> float:
    """``10 log10(E|y - G u|^2 / E|y|^2)``, floored at -200 dB."""
    u = np.asarray(u, dtype=complex).reshape(-1)
    y = np.asarray(y, dtype=complex).reshape(-1)
    if u.size != y.size:
        raise ValueError("u and y must have equal length")
    py = float(np.vdot(y, y).real)
    if py == 0.0:
        raise ValueError("y has zero power")
    e = y - gain * u
    ratio = float(np.vdot(e, e).real) / py
    if ratio <= 0.0:
        return NMSE_FLOOR_DB
    return max(NMSE_FLOOR_DB, float(10.0 * np.log10(ratio)))


def fit_power_law(measurements) -> tuple[PaModel, RegressionForm, float]:
    """Ordinary least squares of NMSE (dB) against ``10 log10(1000 p_out)``.

    Returns the power-law model, the regression line and R².
    """
    p = np.array([m.p_out for m in measurements], dtype=float)
    eta = np.array([m.nmse_db for m in measurements], dtype=float)
    if p.size < 2:
        raise ValueError("need at least two measurements")
    x = 10.0 * np.log10(1000.0 * p)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-24 * max(1.0, float(x @ x)):
        raise ValueError("measurements need at least two distinct output powers")
    k1 = float(xc @ (eta - eta.mean())) / sxx
    k2 = float(eta.mean() - k1 * x.mean())
    resid = eta - (k1 * x + k2)
    ss_tot = float(np.sum((eta - eta.mean()) ** 2))
    ss_res = float(resid @ resid)
    # a constant NMSE (alpha = 1) leaves only rounding in ss_tot; the fit is exact
    flat = ss_tot <= eta.size * (1e-12 * max(1.0, float(np.max(np.abs(eta))))) ** 2
    r2 = 1.0 if flat else 1.0 - ss_res / ss_tot
    reg = RegressionForm(k1, k2)
    return regression_to_power_law(reg), reg, r2
