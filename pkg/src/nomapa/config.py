"""Experiment configuration: path-loss scenarios and a flat key=value file format.

A config file holds one ``key = value`` pair per line (``#`` starts a
comment).  Lists are comma separated.  Every key is optional; missing keys
take the defaults of :class:`ExperimentConfig`.  Example::

    kind = region
    distances = 120, 80
    pathloss_exponent = 2.6
    pa_a = 0.0032
    pa_alpha = 1.3552
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .noma_rates import DecodingOrder, Scenario
from .pa_model import IDEAL, PaModel, RegressionForm
from .solvers.common import SolverSettings
from .units import dbm_to_watts

KINDS = ("fit", "region", "wsr", "sumrate", "ofdm", "dpd-sweep")
SPEED_OF_LIGHT = 3e8


class ConfigError(ValueError):
    """Malformed configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def pathloss_gain(d, f_c: float, sigma: float, G_A: float):
    """Channel power gain ``G_A * (c / (4 pi f_c d))**sigma``.

    Raises:
        ValueError: a distance is not positive.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > 0)):
        raise ValueError("distance must be > 0")
    out = G_A * (SPEED_OF_LIGHT / (4.0 * math.pi * f_c * d_arr)) ** sigma
    return float(out) if out.ndim == 0 else out


def paper_distances(k: int) -> tuple[float, ...]:
    """Default user layout ``d_k = 60 + 20 (k - 1)`` metres."""
    return tuple(60.0 + 20.0 * i for i in range(k))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one CLI run needs.

    Rates in ``rate_floors`` are in bits/s.  The PA model comes from the
    first available source: ``pa_a``/``pa_alpha``, then ``pa_k1``/``pa_k2``,
    then a sweep CSV in ``sweep_file`` (no-DPD rows, or DPD rows when
    ``sweep_use_dpd`` is set).
    """

    kind: str = "sumrate"
    distances: tuple[float, ...] = (120.0, 80.0)
    carrier_freq: float = 2.4e9
    pathloss_exponent: float = 2.6
    antenna_gain: float = 4.11
    noise_psd_dbm_hz: float = -174.0
    bandwidth: float = 30e6
    p_max_dbm: float = 36.0
    pa_a: float | None = None
    pa_alpha: float | None = None
    pa_k1: float | None = None
    pa_k2: float | None = None
    sweep_file: str | None = None
    sweep_use_dpd: bool = False
    ideal: bool = False
    # solver settings
    epsilon: float = 1e-4
    max_outer_iters: int = 100
    tau_grid: int = 200
    workers: int = 1
    seed: int = 0
    # sumrate / wsr sweeps
    orders: tuple[str, ...] = ()
    weights: tuple[float, ...] = ()
    rate_floors: tuple[float, ...] = (0.0,)
    sigma_sweep: tuple[float, ...] = (2.2, 2.4, 2.6, 2.8, 3.0)
    bandwidth_sweep: tuple[float, ...] = (20e6, 30e6)
    k_sweep: tuple[int, ...] = tuple(range(2, 17))
    # ofdm
    subcarriers: tuple[int, ...] = (1, 16, 64, 1024)
    cp_len: int = 16
    # dpd-sweep
    drive_powers: tuple[float, ...] = ()
    n_seeds: int = 3
    n_symbols: int = 64
    dpd_iters: int = 3
    measurement_snr_db: float = 60.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        if len(self.distances) < 1:
            raise ConfigError("distances", "need at least one user")
        for name in ("distances", "sigma_sweep", "bandwidth_sweep", "drive_powers", "weights"):
            if any(not (v > 0 and math.isfinite(v)) for v in getattr(self, name)):
                raise ConfigError(name, "values must be positive and finite")
        for name in ("carrier_freq", "pathloss_exponent", "antenna_gain", "bandwidth", "epsilon"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(name, "must be positive and finite")
        for name in ("noise_psd_dbm_hz", "p_max_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(name, "must be finite")
        if any(r < 0 for r in self.rate_floors) or not self.rate_floors:
            raise ConfigError("rate_floors", "need at least one non-negative floor")
        if any(k < 1 for k in self.k_sweep):
            raise ConfigError("k_sweep", "user counts must be >= 1")
        if any(n < 1 for n in self.subcarriers):
            raise ConfigError("subcarriers", "must be >= 1")
        for name in ("tau_grid", "max_outer_iters", "workers", "n_seeds", "n_symbols", "dpd_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.tau_grid < 2:
            raise ConfigError("tau_grid", "must be >= 2")
        if self.cp_len < 0:
            raise ConfigError("cp_len", "must be >= 0")
        if self.pa_a is not None and self.pa_a < 0:
            raise ConfigError("pa_a", "must be >= 0")
        if self.pa_alpha is not None and self.pa_alpha < 0:
            raise ConfigError("pa_alpha", "must be >= 0")
        if (self.pa_a is None) != (self.pa_alpha is None):
            raise ConfigError("pa_a" if self.pa_a is None else "pa_alpha", "pa_a and pa_alpha go together")
        if (self.pa_k1 is None) != (self.pa_k2 is None):
            raise ConfigError("pa_k1" if self.pa_k1 is None else "pa_k2", "pa_k1 and pa_k2 go together")
        for o in self.orders:
            try:
                order = DecodingOrder.parse(o)
            except ValueError as exc:
                raise ConfigError("orders", str(exc)) from None
            if order.size != self.n_users:
                raise ConfigError("orders", f"order {o!r} does not cover {self.n_users} users")
        if self.weights:
            if len(self.weights) != self.n_users:
                raise ConfigError("weights", f"need {self.n_users} weights")
            if not math.isclose(sum(self.weights), 1.0, rel_tol=1e-9):
                raise ConfigError("weights", "must sum to 1")

    @property
    def n_users(self) -> int:
        return len(self.distances)

    @property
    def noise_power(self) -> float:
        """Receiver noise ``N_0`` in watts over ``bandwidth``."""
        return self.noise_power_for(self.bandwidth)

    def noise_power_for(self, bandwidth: float) -> float:
        return float(dbm_to_watts(self.noise_psd_dbm_hz)) * bandwidth

    @property
    def p_max(self) -> float:
        return float(dbm_to_watts(self.p_max_dbm))

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            epsilon=self.epsilon, max_outer_iters=self.max_outer_iters, tau_grid=self.tau_grid, seed=self.seed
        )

    def decoding_orders(self) -> list[DecodingOrder]:
        """Configured orders, defaulting to (last user first, first user first)."""
        if self.orders:
            return [DecodingOrder.parse(o) for o in self.orders]
        k = self.n_users
        if k == 1:
            return [DecodingOrder.identity(1)]
        return [DecodingOrder.reverse(k), DecodingOrder.identity(k)]

    def user_weights(self) -> np.ndarray:
        if self.weights:
            return np.asarray(self.weights, dtype=float)
        return np.full(self.n_users, 1.0 / self.n_users)

    def pa_model(self, base_dir: str | None = None) -> PaModel:
        """PA model from the configured source (IDEAL when ``ideal`` is set)."""
        if self.ideal:
            return IDEAL
        if self.pa_a is not None:
            return PaModel(self.pa_a, self.pa_alpha)
        if self.pa_k1 is not None:
            return RegressionForm(self.pa_k1, self.pa_k2).to_power_law()
        if self.sweep_file:
            from .dpd_lab.analysis import fit_power_law
            from .dpd_lab.sweep import read_sweep_csv

            path = self.sweep_file
            if base_dir and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            try:
                rows = [m for m in read_sweep_csv(path) if m.dpd_enabled == self.sweep_use_dpd]
            except (OSError, ValueError) as exc:
                raise ConfigError("sweep_file", str(exc)) from None
            if len(rows) < 2:
                raise ConfigError("sweep_file", "needs at least two matching measurements")
            return fit_power_law(rows)[0]
        return PaModel(0.0032, 1.3552)

    def scenario(
        self,
        model: PaModel,
        sigma: float | None = None,
        bandwidth: float | None = None,
        distances=None,
    ) -> Scenario:
        """Homogeneous scenario with path-loss gains, optionally overriding σ, B or the layout."""
        sigma = self.pathloss_exponent if sigma is None else sigma
        bandwidth = self.bandwidth if bandwidth is None else bandwidth
        distances = self.distances if distances is None else tuple(distances)
        gains = pathloss_gain(np.asarray(distances, dtype=float), self.carrier_freq, sigma, self.antenna_gain)
        return Scenario.homogeneous(
            tuple(np.atleast_1d(gains)), model, self.noise_power_for(bandwidth), self.p_max, bandwidth
        )


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_TUPLE_FLOAT = {"distances", "weights", "rate_floors", "sigma_sweep", "bandwidth_sweep", "drive_powers"}
_TUPLE_INT = {"k_sweep", "subcarriers"}
_TUPLE_STR = {"orders"}
_OPT_FLOAT = {"pa_a", "pa_alpha", "pa_k1", "pa_k2"}
_FLOAT = {
    "carrier_freq", "pathloss_exponent", "antenna_gain", "noise_psd_dbm_hz", "bandwidth",
    "p_max_dbm", "epsilon", "measurement_snr_db",
}
_INT = {"max_outer_iters", "tau_grid", "workers", "seed", "cp_len", "n_seeds", "n_symbols", "dpd_iters"}
_BOOL = {"sweep_use_dpd", "ideal"}
_SECTION = "experiment"


def _convert(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _TUPLE_FLOAT:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if key in _TUPLE_INT:
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if key in _TUPLE_STR:
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        if key in _OPT_FLOAT:
            return None if raw.lower() in ("", "none") else float(raw)
        if key in _FLOAT:
            return float(raw)
        if key in _INT:
            return int(raw)
        if key in _BOOL:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key == "sweep_file":
            return raw or None
        return raw
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r} ({exc})") from None


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse key=value text into a config; ``overrides`` win over file values."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    values = {}
    for key, raw in parser.items(_SECTION):
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        values[key] = _convert(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError("<file>", str(exc)) from None


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
