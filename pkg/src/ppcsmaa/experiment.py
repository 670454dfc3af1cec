"""Reproducible sweep harness: NSE versus sampling rate for CS / PPCS / PPCS-MAA.

For every (sampling rate, run) cell a run seed is derived from the base
seed, and from it the masks, the key ring, and the solver initialization.
All requested methods therefore see identical masks and keys within a cell,
so method-to-method differences are never mask noise. Failed solves become
failed rows, not sweep aborts.

Raw rows and summaries are emitted as CSV with a fixed, documented column
order plus a JSON manifest holding the full configuration; rerunning a sweep
from its manifest reproduces the raw CSV byte for byte. Wall-clock timings
are informational only and live in a separate file so they never break
replay comparison.
"""

import csv
import json
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .kvp import gen_private_key, gen_public_vectors
from .matrices import apply_mask, nse
from .pipeline import GroundTruthBundle, SynthSpec, drop_entries, load_bundle, synthesize
from .recovery import SolverConfig, cs_complete, ppcs_maa_recover_k, ppcs_recover

METHODS = ("CS", "PPCS", "PPCS-MAA")

# Environment variable that overrides the output directory, and nothing else.
OUTPUT_DIR_ENV = "PPCSMAA_OUTPUT_DIR"

RAW_COLUMNS = ("method", "attribute", "sampling_rate", "run", "seed",
               "nse", "iterations", "converged", "error")
SUMMARY_COLUMNS = ("method", "attribute", "sampling_rate", "runs_ok", "failures",
                   "mean_nse", "std_nse", "min_nse", "max_nse")
TIMING_COLUMNS = ("method", "attribute", "sampling_rate", "run", "wall_ms")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; serializes to/from the replay manifest."""

    methods: tuple
    sampling_rates: tuple
    solver: SolverConfig
    synth: SynthSpec | None = None
    bundle_dir: str | None = None
    runs_per_cell: int = 15
    base_seed: int = 0
    K: int = 4
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "sampling_rates", tuple(float(r) for r in self.sampling_rates))
        if not self.methods:
            raise ValueError("at least one method is required")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if not self.sampling_rates:
            raise ValueError("at least one sampling rate is required")
        for r in self.sampling_rates:
            if not 0.0 < r <= 1.0:
                raise ValueError(f"sampling rates must lie in (0, 1], got {r}")
        if list(self.sampling_rates) != sorted(set(self.sampling_rates)):
            raise ValueError(f"sampling rates must be strictly increasing, got {self.sampling_rates}")
        if self.runs_per_cell < 1:
            raise ValueError(f"runs_per_cell must be >= 1, got {self.runs_per_cell}")
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if (self.synth is None) == (self.bundle_dir is None):
            raise ValueError("exactly one of synth or bundle_dir must be given")


@dataclass
class ResultRow:
    """One method-attribute-cell outcome; seed makes the row replayable alone."""

    method: str
    attribute: str
    sampling_rate: float
    run: int
    seed: int
    nse: float | None
    iterations: int
    converged: bool
    error: str
    wall_ms: float

    @property
    def failed(self) -> bool:
        return self.error != ""


@dataclass
class SummaryRow:
    """Per (method, attribute, rate) aggregate over runs; None stats if all failed."""

    method: str
    attribute: str
    sampling_rate: float
    runs_ok: int
    failures: int
    mean_nse: float | None
    std_nse: float | None
    min_nse: float | None
    max_nse: float | None


def _mix(seed: int, label: str) -> int:
    """Deterministic, platform-stable sub-seed derivation."""
    return (seed ^ zlib.crc32(label.encode("utf-8"))) & 0x7FFFFFFF


def run_seed_for(base_seed: int, rate: float, run: int) -> int:
    """The seed that drives one (sampling rate, run) cell."""
    return _mix(base_seed, f"cell:{rate!r}:{run}")


def _load_dataset(cfg: ExperimentConfig) -> GroundTruthBundle:
    if cfg.synth is not None:
        return synthesize(cfg.synth)
    return load_bundle(cfg.bundle_dir)


def _cell_rows(arrays, names, cfg: ExperimentConfig, rate: float, run: int) -> list[ResultRow]:
    """Run every requested method on one (rate, run) cell with shared masks/keys."""
    rs = run_seed_for(cfg.base_seed, rate, run)
    n, t = arrays[0].shape
    masks = [
        drop_entries((n, t), 1.0 - rate, _mix(rs, f"mask:{name}")) for name in names
    ]
    sensed = [apply_mask(A, B) for A, B in zip(arrays, masks)]
    D = gen_public_vectors(t, cfg.K, _mix(rs, "public-vectors"))
    psi = gen_private_key(n, cfg.K, _mix(rs, "private-key"))
    solver = replace(cfg.solver, seed=_mix(rs, "solver-init"))

    def ok_row(method, attr_idx, estimate, report, wall_ms):
        return ResultRow(
            method=method, attribute=names[attr_idx], sampling_rate=rate, run=run,
            seed=rs, nse=nse(arrays[attr_idx], estimate),
            iterations=report.iterations_used, converged=report.converged,
            error="", wall_ms=wall_ms,
        )

    def failed_row(method, attr_idx, exc, wall_ms):
        return ResultRow(
            method=method, attribute=names[attr_idx], sampling_rate=rate, run=run,
            seed=rs, nse=None, iterations=0, converged=False,
            error=str(exc), wall_ms=wall_ms,
        )

    rows: list[ResultRow] = []
    for method in cfg.methods:
        if method in ("CS", "PPCS"):
            for idx in range(len(names)):
                start = time.perf_counter()
                try:
                    if method == "CS":
                        est, rep = cs_complete(sensed[idx].data, masks[idx], solver)
                    else:
                        est, rep = ppcs_recover(sensed[idx], D, psi, solver)
                    wall = 1e3 * (time.perf_counter() - start)
                    rows.append(ok_row(method, idx, est, rep, wall))
                except Exception as exc:
                    wall = 1e3 * (time.perf_counter() - start)
                    rows.append(failed_row(method, idx, exc, wall))
        else:  # PPCS-MAA: one joint solve covering every attribute
            start = time.perf_counter()
            try:
                recovered, rep = ppcs_maa_recover_k(
                    [s.data for s in sensed], masks, D, psi, solver
                )
                wall = 1e3 * (time.perf_counter() - start)
                rows.extend(ok_row(method, idx, recovered[idx], rep, wall)
                            for idx in range(len(names)))
            except Exception as exc:
                wall = 1e3 * (time.perf_counter() - start)
                rows.extend(failed_row(method, idx, exc, wall)
                            for idx in range(len(names)))
    return rows


def _cell_worker(args):
    arrays, names, cfg, rate, run = args
    return _cell_rows(arrays, names, cfg, rate, run)


def run_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    """Execute the full sweep and return rows sorted deterministically.

    Cells are independent; with cfg.workers > 1 they run in a process pool.
    The row order (method, attribute, rate, run) is fixed regardless of
    scheduling.
    """
    bundle = _load_dataset(cfg)
    names = bundle.names
    arrays = [bundle.attributes[name] for name in names]
    if "PPCS-MAA" in cfg.methods and len(names) < 2:
        raise ValueError("PPCS-MAA needs at least two attributes")

    cells = [(rate, run) for rate in cfg.sampling_rates for run in range(cfg.runs_per_cell)]
    rows: list[ResultRow] = []
    if cfg.workers == 1:
        for rate, run in cells:
            rows.extend(_cell_rows(arrays, names, cfg, rate, run))
    else:
        jobs = [(arrays, names, cfg, rate, run) for rate, run in cells]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for cell_rows in pool.map(_cell_worker, jobs):
                rows.extend(cell_rows)
    rows.sort(key=lambda r: (r.method, r.attribute, r.sampling_rate, r.run))
    return rows


def aggregate(rows: list[ResultRow]) -> list[SummaryRow]:
    """Mean/std/min/max NSE per (method, attribute, rate); failures counted out."""
    if not rows:
        raise ValueError("no rows to aggregate")
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.method, row.attribute, row.sampling_rate), []).append(row)
    summaries = []
    for key in sorted(groups):
        group = groups[key]
        values = [r.nse for r in group if not r.failed and r.nse is not None]
        failures = len(group) - len(values)
        if values:
            arr = np.asarray(values)
            std = float(arr.std(ddof=1)) if len(values) > 1 else 0.0
            stats = (float(arr.mean()), std, float(arr.min()), float(arr.max()))
        else:
            stats = (None, None, None, None)
        summaries.append(SummaryRow(key[0], key[1], key[2], len(values), failures, *stats))
    return summaries


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "methods": list(cfg.methods),
        "sampling_rates": list(cfg.sampling_rates),
        "solver": asdict(cfg.solver),
        "synth": asdict(cfg.synth) if cfg.synth is not None else None,
        "bundle_dir": cfg.bundle_dir,
        "runs_per_cell": cfg.runs_per_cell,
        "base_seed": cfg.base_seed,
        "K": cfg.K,
        "output_dir": cfg.output_dir,
        "workers": cfg.workers,
    }


def config_from_dict(payload: dict) -> ExperimentConfig:
    synth = SynthSpec(**payload["synth"]) if payload.get("synth") else None
    return ExperimentConfig(
        methods=tuple(payload["methods"]),
        sampling_rates=tuple(payload["sampling_rates"]),
        solver=SolverConfig(**payload["solver"]),
        synth=synth,
        bundle_dir=payload.get("bundle_dir"),
        runs_per_cell=int(payload.get("runs_per_cell", 15)),
        base_seed=int(payload.get("base_seed", 0)),
        K=int(payload.get("K", 4)),
        output_dir=payload.get("output_dir", "results"),
        workers=int(payload.get("workers", 1)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def _fmt(value) -> str:
    """Stable text form: shortest round-trip floats, empty string for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header, line_values) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for values in line_values:
            writer.writerow([_fmt(v) for v in values])


def emit(rows: list[ResultRow], summaries: list[SummaryRow], out_dir,
         cfg: ExperimentConfig) -> dict:
    """Write raw.csv, summary.csv, timing.csv, per-curve files, and the manifest.

    Returns a name -> path map of everything written. raw.csv carries no
    wall-clock column, so two runs of one manifest produce identical bytes.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    paths["raw"] = os.path.join(out_dir, "raw.csv")
    _write_csv(paths["raw"], RAW_COLUMNS, (
        (r.method, r.attribute, r.sampling_rate, r.run, r.seed,
         r.nse, r.iterations, r.converged, r.error)
        for r in rows
    ))

    paths["timing"] = os.path.join(out_dir, "timing.csv")
    _write_csv(paths["timing"], TIMING_COLUMNS, (
        (r.method, r.attribute, r.sampling_rate, r.run, f"{r.wall_ms:.3f}")
        for r in rows
    ))

    paths["summary"] = os.path.join(out_dir, "summary.csv")
    _write_csv(paths["summary"], SUMMARY_COLUMNS, (
        (s.method, s.attribute, s.sampling_rate, s.runs_ok, s.failures,
         s.mean_nse, s.std_nse, s.min_nse, s.max_nse)
        for s in summaries
    ))

    for (method, attribute) in sorted({(s.method, s.attribute) for s in summaries}):
        name = f"curve_{method}_{attribute}.csv"
        curve_rows = [
            (s.sampling_rate, s.mean_nse)
            for s in summaries
            if s.method == method and s.attribute == attribute and s.mean_nse is not None
        ]
        paths[name] = os.path.join(out_dir, name)
        _write_csv(paths[name], ("sampling_rate", "mean_nse"), curve_rows)

    paths["manifest"] = os.path.join(out_dir, "manifest.json")
    with open(paths["manifest"], "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
    return paths


def read_raw_csv(path) -> list[ResultRow]:
    """Read rows back from a raw.csv written by emit."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(ResultRow(
                method=rec["method"],
                attribute=rec["attribute"],
                sampling_rate=float(rec["sampling_rate"]),
                run=int(rec["run"]),
                seed=int(rec["seed"]),
                nse=float(rec["nse"]) if rec["nse"] != "" else None,
                iterations=int(rec["iterations"]),
                converged=rec["converged"] == "true",
                error=rec["error"],
                wall_ms=0.0,
            ))
    return rows
