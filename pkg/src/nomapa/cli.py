"""Command-line runner: ``nomapa <kind> --config FILE --out DIR``.

Each run writes ``<kind>.csv`` and ``<kind>_summary.json`` into the output
directory.  Exit codes: 0 success, 2 bad config or usage, 3 infeasible
rate floors, 4 a solver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

from .config import KINDS, ConfigError, ExperimentConfig, load_config, with_overrides
from .experiments import ExperimentResult, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED = 0, 2, 3, 4
log = logging.getLogger("nomapa")


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str, result: ExperimentResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(obj):
    """Replace non-finite floats by ``None`` and numpy scalars by Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_summary(path: str, result: ExperimentResult, cfg: ExperimentConfig) -> None:
    doc = {
        "kind": result.kind,
        "seed": cfg.seed,
        "status": _status(result),
        "infeasible": result.infeasible,
        "not_converged": result.not_converged,
        "summary": result.summary,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _status(result: ExperimentResult) -> str:
    if result.infeasible:
        return "infeasible"
    if result.not_converged:
        return "not_converged"
    return "ok"


class _Formatter(logging.Formatter):
    COLORS = {"WARNING": "\033[33m", "ERROR": "\033[31m", "INFO": "\033[36m"}

    def __init__(self, color: bool):
        super().__init__("%(levelname)s %(message)s")
        self.color = color

    def format(self, record):
        text = super().format(record)
        if self.color and record.levelname in self.COLORS:
            text = f"{self.COLORS[record.levelname]}{text}\033[0m"
        return text


def _setup_logging(verbose: bool) -> None:
    color = "NO_COLOR" not in os.environ and sys.stderr.isatty()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_Formatter(color))
    log.handlers[:] = [handler]
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    log.propagate = False


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nomapa", description="Uplink NOMA power control under PA distortion.")
    ap.add_argument("kind", choices=KINDS, help="experiment to run")
    ap.add_argument("--config", help="key=value config file (defaults apply when omitted)")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--tau-grid", type=int, dest="tau_grid", help="override the rate-profile grid size")
    ap.add_argument("--ideal", action="store_true", default=None, help="force an ideal PA (a = 0)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    overrides = {"kind": args.kind, "seed": args.seed, "tau_grid": args.tau_grid, "ideal": args.ideal}
    base_dir = None
    try:
        if args.config:
            cfg = load_config(args.config, **overrides)
            base_dir = os.path.dirname(os.path.abspath(args.config))
        else:
            cfg = with_overrides(ExperimentConfig(kind=args.kind), **overrides)
        if cfg.kind in ("fit", "dpd-sweep"):
            log.info("running %s", cfg.kind)
        else:
            log.info("running %s with %d user(s)", cfg.kind, cfg.n_users)
        result = run_experiment(cfg, base_dir)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_USAGE
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_USAGE

    os.makedirs(args.out, exist_ok=True)
    stem = cfg.kind.replace("-", "_")
    csv_path = os.path.join(args.out, f"{stem}.csv")
    json_path = os.path.join(args.out, f"{stem}_summary.json")
    write_csv(csv_path, result)
    write_summary(json_path, result, cfg)
    log.info("wrote %s and %s", csv_path, json_path)

    for msg in result.infeasible:
        log.error("infeasible: %s", msg)
    for msg in result.not_converged:
        log.error("not converged: %s", msg)
    if result.infeasible:
        return EXIT_INFEASIBLE
    if result.not_converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
