"""Synthetic PA measurement lab: waveforms, DPD training and NMSE regression."""

from .analysis import NMSE_FLOOR_DB, NmseMeasurement, bussgang_decompose, fit_power_law, measure_nmse
from .gmp import DpdCoefficients, GmpStructure, dpd_train_indirect, gmp_apply, gmp_basis, ls_fit
from .pa import SyntheticPa, synthetic_pa_apply
from .sweep import DEFAULT_DRIVES, SweepSettings, measure_point, nmse_sweep, read_sweep_csv, write_sweep_csv
from .waveform import generate_ofdm_waveform, papr_db

__all__ = [
    "DEFAULT_DRIVES",
    "NMSE_FLOOR_DB",
    "DpdCoefficients",
    "GmpStructure",
    "NmseMeasurement",
    "SweepSettings",
    "SyntheticPa",
    "bussgang_decompose",
    "dpd_train_indirect",
    "fit_power_law",
    "generate_ofdm_waveform",
    "gmp_apply",
    "gmp_basis",
    "ls_fit",
    "measure_nmse",
    "measure_point",
    "nmse_sweep",
    "papr_db",
    "read_sweep_csv",
    "synthetic_pa_apply",
    "write_sweep_csv",
]
