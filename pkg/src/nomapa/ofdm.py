"""Per-subcarrier rates of an OFDM link whose PA distortion depends on total power.

The distortion power ``a * P_T**alpha`` is spread evenly over the ``N``
subcarriers, so reallocating power between subcarriers at fixed total leaves
every subcarrier's distortion term unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pa_model import PaModel, distortion_power


@dataclass(frozen=True)
class OfdmConfig:
    """OFDM link parameters.

    Attributes:
        n_subcarriers: number of subcarriers ``N``.
        cp_len: cyclic-prefix length in samples (not charged in the rates).
        bandwidth: total bandwidth ``B`` in Hz.
        noise_psd: noise power spectral density ``N_1`` in W/Hz.
        subchannel_gains: per-subcarrier channel power gains.
        subcarrier_powers: per-subcarrier transmit powers in watts.
    """

    n_subcarriers: int
    cp_len: int
    bandwidth: float
    noise_psd: float
    subchannel_gains: np.ndarray
    subcarrier_powers: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.subchannel_gains, dtype=float).reshape(-1)
        powers = np.asarray(self.subcarrier_powers, dtype=float).reshape(-1)
        object.__setattr__(self, "subchannel_gains", gains)
        object.__setattr__(self, "subcarrier_powers", powers)
        if self.n_subcarriers < 1:
            raise ValueError("n_subcarriers must be >= 1")
        if self.cp_len < 0:
            raise ValueError("cp_len must be >= 0")
        if not (self.bandwidth > 0 and self.noise_psd > 0):
            raise ValueError("bandwidth and noise_psd must be positive")
        if gains.size != self.n_subcarriers or powers.size != self.n_subcarriers:
            raise ValueError("need one gain and one power per subcarrier")
        if np.any(gains < 0) or np.any(powers < 0):
            raise ValueError("gains and powers must be non-negative")

    @classmethod
    def flat(cls, n: int, bandwidth: float, noise_psd: float, gain: float, total_power: float, cp_len: int = 0):
        """Flat channel with the total power split evenly."""
        if n < 1:
            raise ValueError("n_subcarriers must be >= 1")
        return cls(n, cp_len, bandwidth, noise_psd, np.full(n, gain), np.full(n, total_power / n))

    @property
    def total_power(self) -> float:
        return float(np.sum(self.subcarrier_powers))

    @property
    def subcarrier_bandwidth(self) -> float:
        return self.bandwidth / self.n_subcarriers


def _rates(cfg: OfdmConfig, model: PaModel) -> np.ndarray:
    n = cfg.n_subcarriers
    h = cfg.subchannel_gains
    dist = distortion_power(cfg.total_power, model) / n
    noise = cfg.subcarrier_bandwidth * cfg.noise_psd
    return cfg.subcarrier_bandwidth * np.log2(1.0 + cfg.subcarrier_powers * h / (dist * h + noise))


def subcarrier_rate(m: int, cfg: OfdmConfig, model: PaModel) -> float:
    """Rate of subcarrier ``m`` in bits/s."""
    if not 0 <= m < cfg.n_subcarriers:
        raise IndexError(f"subcarrier {m} out of range for N={cfg.n_subcarriers}")
    return float(_rates(cfg, model)[m])


def ofdm_sum_rate(cfg: OfdmConfig, model: PaModel) -> float:
    """Sum of all subcarrier rates in bits/s."""
    return float(np.sum(_rates(cfg, model)))
