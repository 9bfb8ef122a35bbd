"""
Experiment runner: policy x load x repetition sweeps and their result tables.

Usage::

    python -m src.cli config/experiments/german.json --workers 4

Writes ``summary.csv``, ``runs.jsonl`` and ``topology.json`` to the output directory.
"""

import argparse
import csv
import json
import logging
import numbers
import sys
from collections import namedtuple
from dataclasses import dataclass, field
from pathlib import Path

from celery import group
from kombu.exceptions import OperationalError
from redis.exceptions import ConnectionError as RedisConnectionError

from config import settings
from src.engine import POLICIES
from src.metrics import METRIC_NAMES, RunReport, aggregate, mean_confidence
from src.modulation import load_modulation_table
from src.spectrum import SpectrumConfig
from src.tasks import build_cell, run_cell
from src.topology import TopologyError, describe_topology, load_topology
from src.traffic import DEFAULT_BANDWIDTHS, cell_seed
from src.utils import log_event, to_json

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_CONFIG = 2

SUMMARY_COLUMNS = (
    "policy",
    "load_erlangs",
    "rbp_mean",
    "rbp_ci",
    "bbp_mean",
    "bbp_ci",
    "nru_mean",
    "nru_ci",
    "asl_us_mean",
    "asl_us_ci",
    "ahl_mean",
    "ahl_ci",
    "cache_hit_rate",
)

Diagnostic = namedtuple("Diagnostic", ["level", "message"])
CellSelector = namedtuple("CellSelector", ["policy", "load_index", "repetition"])


@dataclass
class ExperimentConfig:
    topology: str
    loads: list
    policies: list = field(default_factory=lambda: list(POLICIES))
    name: str = "experiment"
    spectrum: dict = field(default_factory=dict)
    guard_band: bool = True
    mu: float = 1.0
    bandwidth_set: list = field(default_factory=lambda: list(DEFAULT_BANDWIDTHS))
    total_requests: int = 100_000
    warmup_requests: int = 10_000
    k: int = 3
    lb_alpha: float = 0.5
    lb_update_interval: int = 1500
    repetitions: int = 10
    base_seed: int = 1
    confidence: float = 0.99
    output_dir: str = None
    nru_links: str = "directed"
    tau_from: str = "warmup"
    use_cache: bool = True
    modulation_table: list = None

    def spectrum_dict(self):
        """Spectrum fields with the guard toggle applied."""
        spectrum = SpectrumConfig.from_dict(self.spectrum).to_dict()
        if not self.guard_band:
            spectrum["guard_slots"] = 0
        return spectrum

    def traffic_dict(self):
        return {
            "mu": self.mu,
            "bandwidth_set": list(self.bandwidth_set),
            "total_requests": self.total_requests,
            "warmup_requests": self.warmup_requests,
        }


def load_experiment_config(path):
    """
    Read an experiment configuration file.

    Args:
        path (str): JSON file

    Returns:
        ExperimentConfig: Parsed configuration, not yet validated

    Raises:
        OSError: If the file cannot be read
        ValueError: If it is not valid JSON or lacks required keys
    """
    with open(path, encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as e:
            raise ValueError(f"Cannot parse experiment config {path}: {e}") from e

    if not isinstance(document, dict):
        raise ValueError("Experiment config must be a JSON object")

    traffic = document.get("traffic", {})
    flat = {key: value for key, value in document.items() if key != "traffic"}
    flat.update(traffic)

    known = ExperimentConfig.__dataclass_fields__
    unknown = sorted(set(flat) - set(known))
    if unknown:
        raise ValueError(f"Unknown experiment config keys: {', '.join(unknown)}")
    missing = [key for key in ("topology", "loads") if key not in flat]
    if missing:
        raise ValueError(f"Experiment config is missing: {', '.join(missing)}")
    return ExperimentConfig(**flat)


INTEGER_FIELDS = (
    "k",
    "lb_update_interval",
    "repetitions",
    "base_seed",
    "total_requests",
    "warmup_requests",
)
REAL_FIELDS = ("lb_alpha", "confidence", "mu")
FLAG_FIELDS = ("guard_band", "use_cache")
LIST_FIELDS = ("loads", "policies", "bandwidth_set")


def _is_integer(value):
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def _is_real(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _type_errors(cfg):
    """
    Fields whose JSON value has the wrong type.

    Args:
        cfg (ExperimentConfig): Configuration to check

    Returns:
        dict: Field name -> diagnostic message
    """
    wrong = {}
    for name in INTEGER_FIELDS:
        value = getattr(cfg, name)
        if not _is_integer(value):
            wrong[name] = f"{name} must be an integer, got {value!r}"
    for name in REAL_FIELDS:
        value = getattr(cfg, name)
        if not _is_real(value):
            wrong[name] = f"{name} must be a number, got {value!r}"
    for name in FLAG_FIELDS:
        value = getattr(cfg, name)
        if not isinstance(value, bool):
            wrong[name] = f"{name} must be true or false, got {value!r}"
    for name in LIST_FIELDS:
        value = getattr(cfg, name)
        if not isinstance(value, list):
            wrong[name] = f"{name} must be a list, got {value!r}"
    if "bandwidth_set" not in wrong and not all(map(_is_real, cfg.bandwidth_set)):
        wrong["bandwidth_set"] = f"bandwidth_set must hold numbers, got {cfg.bandwidth_set!r}"
    if not isinstance(cfg.spectrum, dict):
        wrong["spectrum"] = f"spectrum must be an object, got {cfg.spectrum!r}"
    return wrong


def validate_config(cfg):
    """
    Collect every problem of a configuration without raising.

    Mistyped fields are reported once and skipped by the range checks.

    Args:
        cfg (ExperimentConfig): Configuration to check

    Returns:
        List[Diagnostic]: "error" and "warning" entries, empty when the config is clean
    """
    diagnostics = []

    def error(message):
        diagnostics.append(Diagnostic("error", message))

    def warning(message):
        diagnostics.append(Diagnostic("warning", message))

    wrong = _type_errors(cfg)
    for message in wrong.values():
        error(message)

    def typed(*names):
        return not any(name in wrong for name in names)

    if not isinstance(cfg.topology, str) or not Path(cfg.topology).is_file():
        error(f"Topology file not found: {cfg.topology}")

    if typed("loads"):
        if not cfg.loads:
            error("At least one offered load is required")
        for load in cfg.loads:
            if not _is_real(load) or load <= 0:
                error(f"Offered load must be positive, got {load!r}")

    if typed("policies"):
        if not cfg.policies:
            error("At least one policy is required")
        for policy in cfg.policies:
            if policy not in POLICIES:
                error(f"Unknown policy '{policy}', expected one of {', '.join(POLICIES)}")
        if len(set(map(str, cfg.policies))) != len(cfg.policies):
            error("Policies must not repeat")

    if typed("k"):
        if cfg.k < 1:
            error(f"K must be at least 1, got {cfg.k}")
        elif cfg.k == 1 and typed("policies") and "CALA" in cfg.policies:
            warning("CALA with K=1 serves only the shortest path and behaves like SP")
    if typed("lb_alpha") and not 0.0 <= cfg.lb_alpha <= 1.0:
        error(f"lb_alpha must lie in [0, 1], got {cfg.lb_alpha}")
    if typed("lb_update_interval") and cfg.lb_update_interval < 1:
        error(f"lb_update_interval must be at least 1, got {cfg.lb_update_interval}")

    if typed("repetitions"):
        if cfg.repetitions < 1:
            error(f"repetitions must be at least 1, got {cfg.repetitions}")
        elif cfg.repetitions == 1:
            warning("A single repetition gives no confidence interval")
    if typed("confidence") and not 0.0 < cfg.confidence < 1.0:
        error(f"confidence must lie in (0, 1), got {cfg.confidence}")

    if typed("spectrum", "guard_band"):
        try:
            cfg.spectrum_dict()
        except (TypeError, ValueError) as e:
            error(f"Invalid spectrum settings: {e}")

    if typed("mu") and cfg.mu <= 0:
        error(f"mu must be positive, got {cfg.mu}")
    if typed("bandwidth_set") and (
        not cfg.bandwidth_set or any(b <= 0 for b in cfg.bandwidth_set)
    ):
        error("bandwidth_set must hold positive rates")
    if typed("total_requests") and cfg.total_requests < 1:
        error(f"total_requests must be at least 1, got {cfg.total_requests}")
    if typed("total_requests", "warmup_requests") and not (
        0 <= cfg.warmup_requests < cfg.total_requests
    ):
        error("warmup_requests must be non-negative and below total_requests")

    if cfg.nru_links not in ("directed", "undirected"):
        error(f"nru_links must be 'directed' or 'undirected', got {cfg.nru_links}")
    if cfg.tau_from not in ("warmup", "zero"):
        error(f"tau_from must be 'warmup' or 'zero', got {cfg.tau_from}")

    if cfg.modulation_table is not None:
        try:
            load_modulation_table(cfg.modulation_table)
        except (TypeError, ValueError) as e:
            error(str(e))

    return diagnostics


def build_cells(cfg, only_cell=None):
    """
    Expand a configuration into its (policy, load, repetition) cells.

    Seeds depend on the load index and repetition only, so every policy sees
    the same request streams.

    Args:
        cfg (ExperimentConfig): Validated configuration
        only_cell (Optional[CellSelector]): Restrict the sweep to one cell

    Returns:
        List[dict]: Cells sorted by policy, load and repetition
    """
    spectrum = cfg.spectrum_dict()
    traffic = cfg.traffic_dict()
    cells = []
    for policy in sorted(cfg.policies):
        for load_index, load in enumerate(cfg.loads):
            for repetition in range(cfg.repetitions):
                if only_cell is not None and only_cell != (policy, load_index, repetition):
                    continue
                cells.append(
                    build_cell(
                        topology_path=cfg.topology,
                        policy=policy,
                        load_erlangs=load,
                        load_index=load_index,
                        repetition=repetition,
                        seed=cell_seed(cfg.base_seed, load_index, repetition),
                        spectrum=spectrum,
                        traffic=traffic,
                        k=cfg.k,
                        lb_alpha=cfg.lb_alpha,
                        lb_update_interval=cfg.lb_update_interval,
                        modulation_table=cfg.modulation_table,
                        nru_links=cfg.nru_links,
                        tau_from=cfg.tau_from,
                        use_cache=cfg.use_cache,
                    )
                )
    return cells


def execute_cells(cells, workers=1):
    """
    Run cells in-process or on the Celery worker pool.

    Args:
        cells (List[dict]): Cells from build_cells
        workers (int): 1 runs in-process; more dispatches a Celery group

    Returns:
        List[dict]: One result per cell, in cell order
    """
    if workers > 1:
        try:
            result = group(run_cell.s(cell) for cell in cells).apply_async()
            return result.get(timeout=settings.CELERY_TASK_TIMEOUT)
        except (OperationalError, RedisConnectionError, ConnectionError) as e:
            log_event(
                "broker_unavailable",
                {"broker": settings.CELERY_BROKER_URL, "error": str(e), "cells": len(cells)},
                level="warning",
            )
    return [run_cell.apply(args=(cell,)).get() for cell in cells]


def _format(value):
    return "" if value is None else f"{value:.8g}"


def _scaled(value, scale):
    return None if value is None else value * scale


def summarize(results, confidence=0.99):
    """
    One summary row per (policy, load) with the aggregated mean and half-width of
    every metric.

    Args:
        results (List[dict]): Cell results
        confidence (float): Two-sided interval level

    Returns:
        List[dict]: Rows keyed by SUMMARY_COLUMNS, sorted by policy then load
    """
    groups = {}
    for result in results:
        groups.setdefault((result["policy"], result["load_erlangs"]), []).append(result)

    rows = []
    for (policy, load), runs in sorted(groups.items()):
        reports = [RunReport.from_dict(run) for run in runs]
        if len(reports) > 1:
            summary = aggregate(reports, confidence)
            means, half_widths = summary.mean, summary.half_width
        else:
            # a single --cell run has no interval
            means = {name: getattr(reports[0], name) for name in METRIC_NAMES}
            half_widths = dict.fromkeys(METRIC_NAMES)

        row = {"policy": policy, "load_erlangs": _format(load)}
        for name, column, scale in (
            ("rbp", "rbp", 1.0),
            ("bbp", "bbp", 1.0),
            ("nru", "nru", 1.0),
            ("asl_seconds", "asl_us", 1e6),
            ("ahl", "ahl", 1.0),
        ):
            row[f"{column}_mean"] = _format(_scaled(means[name], scale))
            row[f"{column}_ci"] = _format(_scaled(half_widths[name], scale))
        hit_rate, _ = mean_confidence([report.cache_hit_rate for report in reports], confidence)
        row["cache_hit_rate"] = _format(hit_rate)
        rows.append(row)
    return rows


def write_outputs(output_dir, topology, results, confidence=0.99):
    """
    Write summary.csv, runs.jsonl and topology.json.

    Args:
        output_dir (Path): Target directory, created when missing
        topology (Topology): Simulated network
        results (List[dict]): Cell results
        confidence (float): Interval level of the summary
    """
    output_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(
        results, key=lambda r: (r["policy"], r["load_erlangs"], r["repetition"])
    )

    with open(output_dir / "summary.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(summarize(ordered, confidence))

    with open(output_dir / "runs.jsonl", "w", encoding="utf-8") as handle:
        for result in ordered:
            handle.write(to_json(result) + "\n")

    with open(output_dir / "topology.json", "w", encoding="utf-8") as handle:
        handle.write(to_json(describe_topology(topology), indent=2) + "\n")


def run_experiment(cfg, workers=1, only_cell=None, output_dir=None):
    """
    Validate, run and write one experiment.

    Args:
        cfg (ExperimentConfig): Configuration
        workers (int): Worker count for the sweep
        only_cell (Optional[CellSelector]): Run a single cell
        output_dir (Optional[str]): Overrides cfg.output_dir

    Returns:
        int: Exit status (0 ok, 1 I/O or run failure, 2 invalid configuration)
    """
    diagnostics = validate_config(cfg)
    for diagnostic in diagnostics:
        if diagnostic.level == "warning":
            log_event("config_warning", {"message": diagnostic.message}, level="warning")
    errors = [d.message for d in diagnostics if d.level == "error"]
    if errors:
        log_event("config_invalid", {"errors": errors}, level="error", include_stacktrace=False)
        return EXIT_INVALID_CONFIG

    try:
        topology = load_topology(cfg.topology)
    except TopologyError as e:
        log_event("config_invalid", {"errors": [str(e)]}, level="error")
        return EXIT_INVALID_CONFIG

    cells = build_cells(cfg, only_cell)
    if not cells:
        log_event("config_invalid", {"errors": [f"No cell matches {only_cell}"]}, level="error")
        return EXIT_INVALID_CONFIG

    target = Path(output_dir or cfg.output_dir or Path(settings.OUTPUT_DIR) / cfg.name)
    log_event(
        "experiment_started",
        {"name": cfg.name, "topology": topology.name, "cells": len(cells), "workers": workers},
    )

    try:
        results = execute_cells(cells, workers)
        write_outputs(target, topology, results, cfg.confidence)
    except Exception as e:
        log_event("experiment_failed", {"name": cfg.name, "error": str(e)}, level="error")
        return EXIT_FAILURE

    log_event(
        "experiment_completed",
        {"name": cfg.name, "cells": len(results), "output_dir": str(target)},
    )
    return EXIT_OK


def parse_cell_selector(text):
    """Parse POLICY:LOAD_INDEX:REP for --cell."""
    try:
        policy, load_index, repetition = text.split(":")
        return CellSelector(policy.upper(), int(load_index), int(repetition))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"Expected POLICY:LOAD_INDEX:REP, got '{text}'"
        ) from None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sdm-sim", description="Run RMCSA policy sweeps on an SDM elastic optical network."
    )
    parser.add_argument("config", help="Experiment configuration (JSON)")
    parser.add_argument("--output-dir", help="Override the configured output directory")
    parser.add_argument(
        "--workers", type=int, default=1, help="Parallel cells via Celery (default 1, in-process)"
    )
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    parser.add_argument(
        "--cell",
        type=parse_cell_selector,
        metavar="POLICY:LOAD_INDEX:REP",
        help="Run a single cell",
    )
    parser.add_argument(
        "--check", action="store_true", help="Validate the configuration and exit"
    )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        cfg = load_experiment_config(args.config)
    except OSError as e:
        log_event("config_unreadable", {"path": args.config, "error": str(e)}, level="error")
        return EXIT_FAILURE
    except (TypeError, ValueError) as e:
        log_event("config_invalid", {"path": args.config, "errors": [str(e)]}, level="error")
        return EXIT_INVALID_CONFIG

    if args.check:
        diagnostics = validate_config(cfg)
        for diagnostic in diagnostics:
            print(f"{diagnostic.level}: {diagnostic.message}")
        if any(d.level == "error" for d in diagnostics):
            return EXIT_INVALID_CONFIG
        print("configuration ok")
        return EXIT_OK

    return run_experiment(
        cfg, workers=args.workers, only_cell=args.cell, output_dir=args.output_dir
    )


if __name__ == "__main__":
    sys.exit(main())
