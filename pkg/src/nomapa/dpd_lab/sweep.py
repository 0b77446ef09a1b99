"""NMSE-versus-output-power sweeps of the synthetic PA, with and without DPD."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..units import dbm_to_watts, watts_to_dbm
from .analysis import NmseMeasurement, bussgang_decompose, measure_nmse
from .gmp import GmpStructure, dpd_train_indirect, gmp_apply
from .pa import SyntheticPa, synthetic_pa_apply
from .waveform import generate_ofdm_waveform

CSV_COLUMNS = ("p_out_dBm", "nmse_db", "dpd_enabled", "seed")
# PA input powers (watts) spanning the default PA's near-linear-in-dB NMSE range
DEFAULT_DRIVES = tuple(float(x) for x in np.logspace(-5, -3, 6))


@dataclass(frozen=True)
class SweepSettings:
    """Waveform, training and measurement parameters shared by every sweep point.

    ``measurement_snr_db`` sets the receiver noise added to the captured PA
    output, relative to its power; ``None`` gives a noiseless capture.
    """

    n_subcarriers: int = 64
    cp_len: int = 16
    n_symbols: int = 64
    dpd_iters: int = 3
    structure: GmpStructure = GmpStructure(5, 5)
    measurement_snr_db: float | None = 60.0


def measure_point(pa: SyntheticPa, drive_power: float, seed: int, dpd: bool,
                  settings: SweepSettings = SweepSettings()) -> NmseMeasurement:
    """NMSE and output power for one drive level (PA input power, watts)."""
    u = generate_ofdm_waveform(settings.n_subcarriers, settings.cp_len, drive_power, seed, settings.n_symbols)
    if dpd:
        coeffs = dpd_train_indirect(u, pa, settings.structure, settings.dpd_iters)
        y = synthetic_pa_apply(gmp_apply(u, coeffs), pa)
    else:
        y = synthetic_pa_apply(u, pa)
    if settings.measurement_snr_db is not None:
        rng = np.random.default_rng([seed, 1])
        sd = np.sqrt(np.mean(np.abs(y) ** 2) * 10.0 ** (-settings.measurement_snr_db / 10.0) / 2.0)
        y = y + sd * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
    gain, _ = bussgang_decompose(u, y)
    return NmseMeasurement(float(np.mean(np.abs(y) ** 2)), measure_nmse(u, y, gain), dpd, seed)


def _task(args):
    return measure_point(*args)


def nmse_sweep(
    pa: SyntheticPa,
    drive_powers,
    seeds=(0,),
    dpd: bool = False,
    settings: SweepSettings = SweepSettings(),
    workers: int | None = None,
) -> list[NmseMeasurement]:
    """Measure every (drive power, seed) pair; results follow the input order."""
    tasks = [(pa, float(p), int(s), dpd, settings) for p in drive_powers for s in seeds]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_task, tasks))
    return [_task(t) for t in tasks]


def write_sweep_csv(path, measurements) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for m in measurements:
            w.writerow([repr(float(watts_to_dbm(m.p_out))), repr(float(m.nmse_db)), int(m.dpd_enabled), m.seed])


def read_sweep_csv(path) -> list[NmseMeasurement]:
    """Load a sweep written by :func:`write_sweep_csv`."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            missing = [c for c in CSV_COLUMNS if c not in row]
            if missing:
                raise ValueError(f"sweep file lacks column(s) {', '.join(missing)}")
            p_w = float(dbm_to_watts(float(row["p_out_dBm"])))
            out.append(NmseMeasurement(p_w, float(row["nmse_db"]), bool(int(row["dpd_enabled"])), int(row["seed"])))
    return out
