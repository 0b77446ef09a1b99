"""Experiment drivers behind the CLI: each returns CSV rows plus a JSON-ready summary.

Rates in outputs are given in bits/s (``*_bps``) and bits/s/Hz
(``*_bps_hz``); powers in dBm and watts.  All drivers are deterministic for
a fixed config.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ExperimentConfig, paper_distances, pathloss_gain
from .dpd_lab.analysis import fit_power_law
from .dpd_lab.pa import SyntheticPa
from .dpd_lab.sweep import CSV_COLUMNS, DEFAULT_DRIVES, SweepSettings, nmse_sweep, read_sweep_csv
from .noma_rates import DecodingOrder, Scenario, sum_rate, user_rates, weighted_sum_rate
from .ofdm import OfdmConfig, ofdm_sum_rate
from .pa_model import LinkBudget, optimal_p2p_power, p2p_rate
from .region import capacity_region_2user
from .solvers.common import Infeasible, SolveReport, SolverSettings
from .solvers.projection import project_feasible
from .solvers.sumrate import sum_rate_maximize
from .solvers.wsr import wsr_maximize_multistart
from .units import watts_to_dbm


@dataclass
class ExperimentResult:
    """Tabular data, a summary and the list of failed solves (empty on success)."""

    kind: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    infeasible: list[str] = field(default_factory=list)
    not_converged: list[str] = field(default_factory=list)


def dbm(p) -> list[float | None]:
    """Powers in dBm; zero power maps to ``None`` (minus infinity)."""
    return [None if v <= 0 else float(watts_to_dbm(v)) for v in np.atleast_1d(p)]


def power_record(p) -> dict:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return {"p_w": [float(v) for v in p], "p_dbm": dbm(p)}


def _dbm_scalar(p: float) -> float:
    return float(watts_to_dbm(p)) if p > 0 else -math.inf


def pc_ideal_powers(
    s: Scenario,
    floors,
    order: DecodingOrder,
    cfg: SolverSettings,
    weights=None,
    extra_starts=(),
) -> np.ndarray:
    """PC-IDEAL powers: optimise as if the PA were ideal, then restore feasibility.

    Without floors the ideal optimum is returned as is; with floors it is
    projected onto the floor-feasible set of the true scenario.
    """
    ideal = s.ideal()
    if weights is None:
        rep = sum_rate_maximize(floors, ideal, cfg, order)
    else:
        rep = wsr_maximize_multistart(weights, floors, order, ideal, cfg, extra_starts=extra_starts)
    if np.any(np.asarray(floors, dtype=float) > 0):
        return project_feasible(rep.p_star, floors, order, s, cfg)
    return rep.p_star


def _gain_percent(ndm: float, ideal: float) -> float:
    return 100.0 * (ndm / ideal - 1.0) if ideal > 0 else math.inf


def _operating_point(p, order: DecodingOrder, s: Scenario) -> dict:
    rates = user_rates(p, order, s)
    return {
        **power_record(p),
        "order": order.label(),
        "rates_bps_hz": [float(r) for r in rates],
        "rates_bps": [float(r * s.bandwidth) for r in rates],
        "sum_rate_bps": float(np.sum(rates) * s.bandwidth),
    }


def _report_dict(rep: SolveReport) -> dict:
    d = rep.as_dict()
    d.pop("p_star_w")
    return d


# region ---------------------------------------------------------------------


REGION_COLUMNS = (
    "model", "kind", "order", "tau_bps", "r1_bps", "r2_bps",
    "p1_dbm", "p1_w", "p2_dbm", "p2_w", "valid", "converged",
)


def _region_rows(name: str, region, s: Scenario) -> list[tuple]:
    b = s.bandwidth
    rows = []
    for pt in region.points:
        p = pt.powers if pt.powers is not None else np.full(2, math.nan)
        rows.append((
            name, "trace", pt.order.label(), float(pt.tau[0]) * b, float(pt.rates[0]) * b, float(pt.rates[1]) * b,
            _dbm_scalar(p[0]) if pt.valid else math.nan, float(p[0]),
            _dbm_scalar(p[1]) if pt.valid else math.nan, float(p[1]),
            int(pt.valid), int(pt.converged),
        ))
    for v in region.hull:
        rows.append((name, "hull", "", math.nan, float(v[0]) * b, float(v[1]) * b,
                     math.nan, math.nan, math.nan, math.nan, 1, 1))
    for c in region.corners:
        rows.append((
            name, "corner", c.order.label(), math.nan, float(c.rates[0]) * b, float(c.rates[1]) * b,
            _dbm_scalar(c.powers[0]), float(c.powers[0]), _dbm_scalar(c.powers[1]), float(c.powers[1]), 1, 1,
        ))
    return rows


def run_region(cfg: ExperimentConfig, base_dir: str | None = None) -> ExperimentResult:
    """Two-user capacity regions under the configured PA and an ideal PA, with points G and H."""
    if cfg.n_users != 2:
        raise ConfigError("distances", "region needs exactly two users")
    model = cfg.pa_model(base_dir)
    s = cfg.scenario(model)
    scfg = cfg.solver_settings()
    res = ExperimentResult("region", REGION_COLUMNS)

    ndm = capacity_region_2user(s, scfg, cfg.workers)
    ideal = capacity_region_2user(s.ideal(), scfg, cfg.workers)
    res.rows += _region_rows("ndm", ndm, s)
    res.rows += _region_rows("ideal", ideal, s.ideal())

    order = DecodingOrder((1, 0))
    g_rep = sum_rate_maximize(None, s, scfg)
    point_g = _operating_point(g_rep.p_star, order, s)
    point_h = _operating_point(pc_ideal_powers(s, 0.0, order, scfg), order, s)
    for name, reg in (("ndm", ndm), ("ideal", ideal)):
        bad = [pt for pt in reg.points if pt.valid and not pt.converged]
        res.not_converged += [f"{name} boundary {pt.order.label()} tau={pt.tau[0]:.6g}" for pt in bad]
    if not g_rep.converged:
        res.not_converged.append("sum-rate point G")

    def corners(reg, sc):
        return {c.order.label(): _operating_point(c.powers, c.order, sc) for c in reg.corners}

    res.summary = {
        "scenario": _scenario_record(cfg, s),
        "point_G_pc_ndm": point_g,
        "point_H_pc_ideal": point_h,
        "gain_percent": _gain_percent(point_g["sum_rate_bps"], point_h["sum_rate_bps"]),
        "ndm_corners": corners(ndm, s),
        "ideal_corners": corners(ideal, s.ideal()),
        "ndm_sum_rate_bps": ndm.sum_rate * s.bandwidth,
        "ideal_sum_rate_bps": ideal.sum_rate * s.bandwidth,
        "invalid_points": {
            "ndm": sum(not p.valid for p in ndm.points),
            "ideal": sum(not p.valid for p in ideal.points),
        },
        "solver_point_G": _report_dict(g_rep),
        "tau_grid": scfg.tau_grid,
    }
    return res


def _scenario_record(cfg: ExperimentConfig, s: Scenario) -> dict:
    m = s.models[0]
    return {
        "distances_m": list(cfg.distances),
        "channel_gains": [float(g) for g in s.gains],
        "noise_power_w": s.noise_power,
        "bandwidth_hz": s.bandwidth,
        "p_max_dbm": cfg.p_max_dbm,
        "p_max_w": cfg.p_max,
        "pa_a": m.a,
        "pa_alpha": m.alpha,
    }


# sum rate ---------------------------------------------------------------------


SUMRATE_COLUMNS = (
    "sweep", "bandwidth_hz", "sigma", "n_users", "rate_floor_bps",
    "ndm_bps", "ideal_bps", "gain_percent", "ndm_bps_hz", "ideal_bps_hz", "status", "converged",
)


def _sumrate_point(args):
    s, floor_bps, order, scfg = args
    r = floor_bps / s.bandwidth
    try:
        rep = sum_rate_maximize(r, s, scfg, order)
        p_ideal = pc_ideal_powers(s, r, order, scfg)
    except Infeasible as exc:
        return None, None, str(exc)
    return rep, p_ideal, ""


def _map(fn, tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def run_sumrate(cfg: ExperimentConfig, base_dir: str | None = None) -> ExperimentResult:
    """Sum rate of PC-NDM and PC-IDEAL: base scenario, a σ sweep per bandwidth, and a user-count sweep.

    The σ sweep uses the configured user layout; the user-count sweep places
    user ``k`` at ``60 + 20 (k - 1)`` metres.
    """
    model = cfg.pa_model(base_dir)
    scfg = cfg.solver_settings()
    order = cfg.decoding_orders()[0]
    res = ExperimentResult("sumrate", SUMRATE_COLUMNS)

    jobs = []  # (sweep, bandwidth, sigma, K, floor, scenario, order)
    for floor in cfg.rate_floors:
        jobs.append(("base", cfg.bandwidth, cfg.pathloss_exponent, cfg.n_users, floor, cfg.scenario(model), order))
    for b in cfg.bandwidth_sweep:
        for sig in cfg.sigma_sweep:
            jobs.append(("sigma", b, sig, cfg.n_users, 0.0, cfg.scenario(model, sigma=sig, bandwidth=b), order))
    for b in cfg.bandwidth_sweep:
        for k in cfg.k_sweep:
            sc = cfg.scenario(model, bandwidth=b, distances=paper_distances(k))
            jobs.append(("users", b, cfg.pathloss_exponent, k, 0.0, sc, DecodingOrder.reverse(k)))

    outs = _map(_sumrate_point, [(j[5], j[4], j[6], scfg) for j in jobs], cfg.workers)
    points = []
    for (sweep, b, sig, k, floor, sc, o), (rep, p_ideal, err) in zip(jobs, outs):
        tag = f"{sweep} B={b:g} sigma={sig:g} K={k} r={floor:g}"
        if rep is None:
            res.infeasible.append(f"{tag}: {err}")
            res.rows.append((sweep, b, sig, k, floor, math.nan, math.nan, math.nan, math.nan, math.nan,
                             "infeasible", 0))
            points.append({"sweep": sweep, "status": "infeasible", "diagnostic": err})
            continue
        if not rep.converged:
            res.not_converged.append(tag)
        ndm = float(rep.objective)
        ideal = float(sum_rate(p_ideal, sc))
        res.rows.append((sweep, b, sig, k, floor, ndm * b, ideal * b, _gain_percent(ndm, ideal), ndm, ideal,
                         rep.status, int(rep.converged)))
        points.append({
            "sweep": sweep, "bandwidth_hz": b, "sigma": sig, "n_users": k, "rate_floor_bps": floor,
            "pc_ndm": _operating_point(rep.p_star, o, sc), "pc_ideal": _operating_point(p_ideal, o, sc),
            "solver": _report_dict(rep),
        })

    res.summary = {
        "scenario": _scenario_record(cfg, cfg.scenario(model)),
        "order": order.label(),
        "base": [p for p in points if p["sweep"] == "base"],
        "mean_gain_percent_sigma": _mean_gain(res.rows, "sigma", cfg.bandwidth_sweep),
        "mean_gain_percent_users": _mean_gain(res.rows, "users", cfg.bandwidth_sweep),
        "points": points,
    }
    return res


def _mean_gain(rows, sweep: str, bandwidths) -> dict:
    out = {}
    for b in bandwidths:
        g = [r[7] for r in rows if r[0] == sweep and r[1] == b and math.isfinite(r[7])]
        out[f"{b:g}"] = float(np.mean(g)) if g else None
    return out


# weighted sum rate ---------------------------------------------------------------


WSR_COLUMNS = (
    "sweep", "order", "sigma", "rate_floor_bps", "ndm_wsr_bps", "ideal_wsr_bps", "tdma_wsr_bps",
    "gain_percent", "status", "converged",
)


def tdma_weighted_rate(s: Scenario, weights) -> float:
    """TDMA baseline in bits/s/Hz: user ``k`` transmits alone for a fraction ``w_k`` at its best power."""
    w = np.asarray(weights, dtype=float)
    return float(np.sum(w * (w * s.max_rates)))


def _wsr_chain(args):
    """Solve a list of (scenario, floor) problems in order, warm-starting each from the last answer.

    Run with decreasing floors, every earlier answer is feasible for the
    next problem, so the weighted rate cannot drop below it.
    """
    problems, w, order, scfg = args
    out, warm_ndm, warm_ideal = [], [], []
    for s, floor_bps in problems:
        r = floor_bps / s.bandwidth
        try:
            rep = wsr_maximize_multistart(w, r, order, s, scfg, extra_starts=warm_ndm)
            p_ideal = pc_ideal_powers(s, r, order, scfg, weights=w, extra_starts=warm_ideal)
        except Infeasible as exc:
            out.append((None, None, str(exc)))
            continue
        warm_ndm, warm_ideal = [rep.p_star], [p_ideal]
        out.append((rep, p_ideal, ""))
    return out


def run_wsr(cfg: ExperimentConfig, base_dir: str | None = None) -> ExperimentResult:
    """Weighted sum rate of PC-NDM, PC-IDEAL and TDMA over rate floors and σ, per decoding order.

    Floors are solved from the largest down, each warm-started from the
    previous answer; σ points are solved independently.
    """
    model = cfg.pa_model(base_dir)
    scfg = cfg.solver_settings()
    w = cfg.user_weights()
    res = ExperimentResult("wsr", WSR_COLUMNS)

    jobs, chains = [], []  # jobs in output order; chains hold indices into jobs
    for order in cfg.decoding_orders():
        start = len(jobs)
        for floor in cfg.rate_floors:
            jobs.append(("floor", order, cfg.pathloss_exponent, floor, cfg.scenario(model)))
        chains.append(sorted(range(start, len(jobs)), key=lambda i: -jobs[i][3]))
        for sig in cfg.sigma_sweep:
            jobs.append(("sigma", order, sig, cfg.rate_floors[0], cfg.scenario(model, sigma=sig)))
            chains.append([len(jobs) - 1])

    tasks = [([(jobs[i][4], jobs[i][3]) for i in ch], w, jobs[ch[0]][1], scfg) for ch in chains]
    outs: list = [None] * len(jobs)
    for ch, chain_out in zip(chains, _map(_wsr_chain, tasks, cfg.workers)):
        for i, o in zip(ch, chain_out):
            outs[i] = o
    points = []
    for (sweep, order, sig, floor, sc), (rep, p_ideal, err) in zip(jobs, outs):
        b = sc.bandwidth
        tdma = tdma_weighted_rate(sc, w) * b
        tag = f"{sweep} order={order.label()} sigma={sig:g} r={floor:g}"
        if rep is None:
            res.infeasible.append(f"{tag}: {err}")
            res.rows.append((sweep, order.label(), sig, floor, math.nan, math.nan, tdma, math.nan, "infeasible", 0))
            points.append({"sweep": sweep, "order": order.label(), "status": "infeasible", "diagnostic": err})
            continue
        if not rep.converged:
            res.not_converged.append(tag)
        ndm = float(weighted_sum_rate(rep.p_star, w, order, sc))
        ideal = float(weighted_sum_rate(p_ideal, w, order, sc))
        res.rows.append((sweep, order.label(), sig, floor, ndm * b, ideal * b, tdma, _gain_percent(ndm, ideal),
                         rep.status, int(rep.converged)))
        points.append({
            "sweep": sweep, "order": order.label(), "sigma": sig, "rate_floor_bps": floor,
            "pc_ndm": _operating_point(rep.p_star, order, sc), "pc_ideal": _operating_point(p_ideal, order, sc),
            "tdma_wsr_bps": tdma, "fixed_point_residual": float(rep.info.get("fixed_point", math.nan)),
            "solver": _report_dict(rep),
        })

    res.summary = {
        "scenario": _scenario_record(cfg, cfg.scenario(model)),
        "weights": [float(v) for v in w],
        "orders": [o.label() for o in cfg.decoding_orders()],
        "points": points,
    }
    return res


# OFDM ---------------------------------------------------------------------------


OFDM_COLUMNS = (
    "n_subcarriers", "channel", "total_power_dbm", "total_power_w", "ofdm_bps", "single_link_bps", "rel_diff",
)


def run_ofdm(cfg: ExperimentConfig, base_dir: str | None = None) -> ExperimentResult:
    """OFDM sum rate of user 1's link for each subcarrier count, flat and Rayleigh-faded.

    Total power is the single-link optimum ``min(p_max, p_opt)`` split evenly.
    The flat case is compared with the single-link rate over the full band.
    """
    model = cfg.pa_model(base_dir)
    g = pathloss_gain(cfg.distances[0], cfg.carrier_freq, cfg.pathloss_exponent, cfg.antenna_gain)
    n1 = cfg.noise_power / cfg.bandwidth
    link = LinkBudget(g, cfg.noise_power, cfg.p_max)
    p_t = optimal_p2p_power(link, model)
    single = float(p2p_rate(p_t, link, model)) * cfg.bandwidth
    res = ExperimentResult("ofdm", OFDM_COLUMNS)
    rng = np.random.default_rng(cfg.seed)
    for n in cfg.subcarriers:
        flat = OfdmConfig.flat(n, cfg.bandwidth, n1, g, p_t, cfg.cp_len)
        rate = ofdm_sum_rate(flat, model)
        res.rows.append((n, "flat", _dbm_scalar(p_t), p_t, rate, single, abs(rate - single) / single))
        faded = OfdmConfig(n, cfg.cp_len, cfg.bandwidth, n1, g * rng.exponential(1.0, n), np.full(n, p_t / n))
        rate = ofdm_sum_rate(faded, model)
        res.rows.append((n, "rayleigh", _dbm_scalar(p_t), p_t, rate, single, (rate - single) / single))
    res.summary = {
        "pa_a": model.a, "pa_alpha": model.alpha, "channel_gain": g, "bandwidth_hz": cfg.bandwidth,
        "noise_psd_w_hz": n1, "total_power": power_record(p_t), "single_link_bps": single,
        "max_flat_rel_diff": max(r[6] for r in res.rows if r[1] == "flat"), "seed": cfg.seed,
    }
    return res


# DPD lab ----------------------------------------------------------------------------


def _fit_record(ms) -> dict:
    model, reg, r2 = fit_power_law(ms)
    return {"n_points": len(ms), "k1": reg.k1, "k2": reg.k2, "a": model.a, "alpha": model.alpha, "r_squared": r2}


def run_dpd_sweep(cfg: ExperimentConfig, base_dir: str | None = None) -> ExperimentResult:
    """NMSE sweep of the default synthetic PA with and without 5-5-0 GMP predistortion."""
    drives = cfg.drive_powers or DEFAULT_DRIVES
    seeds = tuple(range(cfg.seed, cfg.seed + cfg.n_seeds))
    settings = SweepSettings(n_symbols=cfg.n_symbols, dpd_iters=cfg.dpd_iters,
                             measurement_snr_db=cfg.measurement_snr_db)
    pa = SyntheticPa()
    raw = nmse_sweep(pa, drives, seeds, False, settings, cfg.workers)
    pre = nmse_sweep(pa, drives, seeds, True, settings, cfg.workers)
    res = ExperimentResult("dpd-sweep", CSV_COLUMNS)
    for m in raw + pre:
        res.rows.append((float(watts_to_dbm(m.p_out)), float(m.nmse_db), int(m.dpd_enabled), m.seed))
    res.summary = {
        "pa": {"smoothness": pa.smoothness, "saturation_amplitude": pa.saturation_amplitude,
               "linear_gain": pa.linear_gain, "memory_taps": list(pa.memory_taps)},
        "drive_powers_w": [float(d) for d in drives],
        "seeds": list(seeds),
        "measurement_snr_db": cfg.measurement_snr_db,
        "fit_no_dpd": _fit_record(raw),
        "fit_dpd": _fit_record(pre),
        "dpd_improves_every_point": all(b.nmse_db < a.nmse_db for a, b in zip(raw, pre)),
        "output_power_dbm": [float(watts_to_dbm(m.p_out)) for m in raw],
    }
    return res


FIT_COLUMNS = ("dpd_enabled", "n_points", "k1", "k2", "a", "alpha", "r_squared")


def run_fit(cfg: ExperimentConfig, base_dir: str | None = None) -> ExperimentResult:
    """Fit the distortion power law to each subset (no DPD / DPD) of a sweep CSV."""
    if not cfg.sweep_file:
        raise ConfigError("sweep_file", "fit needs a sweep CSV")
    path = cfg.sweep_file
    if base_dir and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    try:
        ms = read_sweep_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError("sweep_file", str(exc)) from None
    res = ExperimentResult("fit", FIT_COLUMNS)
    for flag in (False, True):
        sub = [m for m in ms if m.dpd_enabled == flag]
        if len(sub) < 2:
            continue
        rec = _fit_record(sub)
        res.rows.append((int(flag), rec["n_points"], rec["k1"], rec["k2"], rec["a"], rec["alpha"], rec["r_squared"]))
        res.summary["dpd" if flag else "no_dpd"] = rec
    if not res.rows:
        raise ConfigError("sweep_file", "no subset has two or more measurements")
    return res


RUNNERS = {
    "fit": run_fit,
    "region": run_region,
    "wsr": run_wsr,
    "sumrate": run_sumrate,
    "ofdm": run_ofdm,
    "dpd-sweep": run_dpd_sweep,
}


def run_experiment(cfg: ExperimentConfig, base_dir: str | None = None) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg, base_dir)
