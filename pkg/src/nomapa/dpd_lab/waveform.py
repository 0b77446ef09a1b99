"""OFDM test waveforms."""

from __future__ import annotations

import numpy as np


def generate_ofdm_waveform(n: int, cp: int, total_power: float, seed: int, n_symbols: int = 1) -> np.ndarray:
    """Complex baseband OFDM samples with a cyclic prefix.

    Subcarrier symbols are i.i.d. circular complex Gaussian with unit power;
    an orthonormal IFFT keeps the time-domain samples at unit power before
    scaling, so the expected sample power is ``total_power``.

    Args:
        n: number of subcarriers.
        cp: cyclic-prefix length in samples (``0 <= cp <= n``).
        total_power: average sample power in watts.
        seed: RNG seed; equal seeds give identical sequences.
        n_symbols: number of OFDM symbols to concatenate.

    Returns:
        Array of ``n_symbols * (n + cp)`` samples.
    """
    if n < 1 or n_symbols < 1:
        raise ValueError("n and n_symbols must be >= 1")
    if not 0 <= cp <= n:
        raise ValueError("cp must lie in [0, n]")
    if total_power < 0:
        raise ValueError("total_power must be >= 0")
    rng = np.random.default_rng(seed)
    sym = (rng.standard_normal((n_symbols, n)) + 1j * rng.standard_normal((n_symbols, n))) / np.sqrt(2.0)
    t = np.fft.ifft(sym, axis=1, norm="ortho")
    frames = np.concatenate([t[:, n - cp :], t], axis=1) if cp else t
    return np.sqrt(total_power) * frames.reshape(-1)


def papr_db(x: np.ndarray) -> float:
    """Peak-to-average power ratio in dB."""
    p = np.abs(x) ** 2
    return float(10.0 * np.log10(np.max(p) / np.mean(p)))
