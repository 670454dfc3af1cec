"""Sensor-record ingestion and dataset preparation.

The ingestion path turns delimited packet records (sensor id, time, one
column per attribute) into complete "ground truth" matrices on a common
node-by-slot grid: readings are bucketed into fixed-width time slots and
averaged, then rows/columns with the most jointly-missing cells are greedily
deleted until no missing entries remain.

The synthesis path substitutes for non-redistributable field datasets: it
generates correlated attribute matrices as a shared low-rank component plus
per-attribute low-rank privates plus optional noise, shifted to be
nonnegative like real sensor readings.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .matrices import as_matrix, read_matrix_csv, write_matrix_csv

# Width of one time slot in raw time units when bucketing records
# (31 s suits epoch-second indoor-deployment feeds).
DEFAULT_SLOT_WIDTH = 31

# Outlier band half-width in median-absolute-deviation units.
OUTLIER_MAD_FACTOR = 5.0


@dataclass(frozen=True)
class RecordSchema:
    """How to read one packet line: delimiter plus ordered column names.

    Columns must include 'id' and 'time'; every other name is an attribute.
    """

    delimiter: str
    columns: tuple

    def __post_init__(self):
        cols = tuple(self.columns)
        if "id" not in cols or "time" not in cols:
            raise ValueError(f"schema columns must include 'id' and 'time', got {cols}")
        object.__setattr__(self, "columns", cols)

    @property
    def attribute_names(self) -> tuple:
        return tuple(c for c in self.columns if c not in ("id", "time"))


@dataclass(frozen=True)
class PacketRecord:
    """One parsed sensor packet; absent attribute cells are stored as None."""

    sensor_id: int
    time: int
    attributes: dict

    def __post_init__(self):
        if self.sensor_id < 0:
            raise ValueError(f"sensor_id must be >= 0, got {self.sensor_id}")
        if not self.attributes:
            raise ValueError("record must carry at least one attribute")


def parse_records(lines, schema: RecordSchema) -> tuple[list[PacketRecord], int]:
    """Tolerantly parse delimited packet lines against a schema.

    Malformed lines (wrong field count, unparseable id/time/value) are
    skipped and counted; empty attribute cells become explicit None markers.
    Returns (records, skipped_count). Raises if more than half of the
    non-blank lines are malformed, which usually means the schema is wrong.
    """
    records: list[PacketRecord] = []
    skipped = 0
    total = 0
    for line in lines:
        line = line.strip()
        if not line:
            continue
        total += 1
        fields = line.split(schema.delimiter)
        if len(fields) != len(schema.columns):
            skipped += 1
            continue
        try:
            named = dict(zip(schema.columns, (f.strip() for f in fields)))
            sensor_id = int(named["id"])
            time = int(named["time"])
            attrs = {}
            for name in schema.attribute_names:
                cell = named[name]
                if cell == "":
                    attrs[name] = None
                else:
                    value = float(cell)
                    if not math.isfinite(value):
                        raise ValueError(f"non-finite value in {name}")
                    attrs[name] = value
            records.append(PacketRecord(sensor_id=sensor_id, time=time, attributes=attrs))
        except (ValueError, KeyError):
            skipped += 1
    if total > 0 and skipped > total / 2:
        raise ValueError(
            f"{skipped}/{total} lines malformed -- wrong schema? "
            f"(delimiter {schema.delimiter!r}, columns {schema.columns})"
        )
    return records, skipped


@dataclass
class GroundTruthBundle:
    """Complete per-attribute matrices over one shared node-by-slot grid."""

    attributes: dict  # name -> (n, t) float64 array, no missing entries
    node_ids: list
    slots: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {name: m.shape for name, m in self.attributes.items()}
        if len(set(shapes.values())) > 1:
            raise ValueError(f"attribute grids differ: {shapes}")

    @property
    def names(self) -> list:
        return list(self.attributes.keys())

    @property
    def shape(self) -> tuple:
        return next(iter(self.attributes.values())).shape


def _bucket_records(records, attribute_names, slot_width):
    """Average readings per (node, slot, attribute); returns the value grids."""
    if not records:
        raise ValueError("no records to grid")
    t0 = min(rec.time for rec in records)
    node_ids = sorted({rec.sensor_id for rec in records})
    node_index = {nid: i for i, nid in enumerate(node_ids)}

    def slot_of(time):
        return (time - t0) // slot_width

    slots = sorted({slot_of(rec.time) for rec in records})
    slot_index = {s: j for j, s in enumerate(slots)}

    n, t = len(node_ids), len(slots)
    sums = {name: np.zeros((n, t)) for name in attribute_names}
    counts = {name: np.zeros((n, t)) for name in attribute_names}
    for rec in records:
        i = node_index[rec.sensor_id]
        j = slot_index[slot_of(rec.time)]
        for name in attribute_names:
            value = rec.attributes.get(name)
            if value is not None:
                sums[name][i, j] += value
                counts[name][i, j] += 1

    values = {}
    observed = {}
    for name in attribute_names:
        has = counts[name] > 0
        grid = np.zeros((n, t))
        grid[has] = sums[name][has] / counts[name][has]
        values[name] = grid
        observed[name] = has
    return values, observed, node_ids, slots


def _greedy_densify(missing: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row/column deletion order that empties the joint-missing matrix.

    Repeatedly deletes whichever row or column has the most missing cells;
    on a row/column tie the column goes, and among equal candidates the
    lowest index goes. Returns boolean keep-vectors for rows and columns.
    """
    miss = missing.copy()
    keep_rows = np.ones(miss.shape[0], dtype=bool)
    keep_cols = np.ones(miss.shape[1], dtype=bool)
    while miss[np.ix_(keep_rows, keep_cols)].any():
        sub = miss[np.ix_(keep_rows, keep_cols)]
        row_counts = sub.sum(axis=1)
        col_counts = sub.sum(axis=0)
        best_row = int(row_counts.max())
        best_col = int(col_counts.max())
        if best_row > best_col:
            local = int(np.argmax(row_counts))
            keep_rows[np.flatnonzero(keep_rows)[local]] = False
        else:
            local = int(np.argmax(col_counts))
            keep_cols[np.flatnonzero(keep_cols)[local]] = False
        if not keep_rows.any() or not keep_cols.any():
            break
    return keep_rows, keep_cols


def build_ground_truth(records, attribute_names, n_min: int, t_min: int,
                       slot_width: int = DEFAULT_SLOT_WIDTH) -> GroundTruthBundle:
    """Extract the largest-practical complete submatrix grid from raw records.

    A cell counts as observed only if every requested attribute has at least
    one reading there; greedy row/column deletion (see _greedy_densify) then
    removes the loss until the grid is complete. Raises if the surviving
    grid is smaller than (n_min, t_min).
    """
    attribute_names = list(attribute_names)
    if not attribute_names:
        raise ValueError("at least one attribute name is required")
    values, observed, node_ids, slots = _bucket_records(records, attribute_names, slot_width)
    jointly_observed = np.logical_and.reduce([observed[name] for name in attribute_names])
    keep_rows, keep_cols = _greedy_densify(~jointly_observed)

    n_kept, t_kept = int(keep_rows.sum()), int(keep_cols.sum())
    if n_kept < n_min or t_kept < t_min:
        raise ValueError(
            f"complete grid is {n_kept}x{t_kept}, smaller than requested "
            f"minimum {n_min}x{t_min}"
        )
    attributes = {
        name: values[name][np.ix_(keep_rows, keep_cols)].copy() for name in attribute_names
    }
    return GroundTruthBundle(
        attributes=attributes,
        node_ids=[nid for nid, k in zip(node_ids, keep_rows) if k],
        slots=[s for s, k in zip(slots, keep_cols) if k],
        meta={"slot_width": slot_width},
    )


def clean_outliers(A) -> tuple[np.ndarray, int]:
    """Clamp entries outside median +- 5*MAD to the band edge.

    Clamping (rather than deletion) keeps the matrix complete. A zero MAD
    (constant-ish matrix) disables the rule. Returns (cleaned, clamp count).
    """
    A = as_matrix(A, "environment matrix")
    med = float(np.median(A))
    mad = float(np.median(np.abs(A - med)))
    if mad == 0.0:
        return A.copy(), 0
    lo, hi = med - OUTLIER_MAD_FACTOR * mad, med + OUTLIER_MAD_FACTOR * mad
    clamped = int(np.count_nonzero((A < lo) | (A > hi)))
    return np.clip(A, lo, hi), clamped


def drop_entries(shape: tuple[int, int], loss_rate: float, seed: int) -> np.ndarray:
    """Random 0/1 mask with exactly round(loss_rate * n * t) zeros.

    Zero positions are drawn uniformly without replacement, deterministically
    from the seed.
    """
    if not 0.0 <= loss_rate <= 0.95:
        raise ValueError(f"loss rate must be in [0, 0.95], got {loss_rate}")
    n, t = shape
    total = n * t
    n_zero = int(round(loss_rate * total))
    mask = np.ones(total)
    if n_zero > 0:
        rng = np.random.default_rng(seed)
        mask[rng.choice(total, size=n_zero, replace=False)] = 0.0
    return mask.reshape(n, t)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a correlated multi-attribute low-rank bundle."""

    n: int
    t: int
    shared_rank: int
    private_rank: int
    noise_std: float = 0.0
    attribute_count: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.t < 1:
            raise ValueError(f"matrix shape must be positive, got {self.n}x{self.t}")
        if self.shared_rank < 1:
            raise ValueError(f"shared rank must be >= 1, got {self.shared_rank}")
        if self.private_rank < 0:
            raise ValueError(f"private rank must be >= 0, got {self.private_rank}")
        if self.shared_rank + self.private_rank > min(self.n, self.t):
            raise ValueError(
                f"shared_rank + private_rank = {self.shared_rank + self.private_rank} "
                f"exceeds min(n, t) = {min(self.n, self.t)}"
            )
        if self.noise_std < 0.0:
            raise ValueError(f"noise std must be >= 0, got {self.noise_std}")
        if self.attribute_count < 2:
            raise ValueError(f"attribute count must be >= 2, got {self.attribute_count}")


# Private components carry this fraction of the shared component's energy.
PRIVATE_ENERGY_RATIO = 0.3


def _scaled_low_rank(rng, n, t, rank, norm):
    L = rng.standard_normal((n, rank))
    R = rng.standard_normal((t, rank))
    X = L @ R.T
    return X * (norm / np.linalg.norm(X))


def synthesize(spec: SynthSpec) -> GroundTruthBundle:
    """Generate a correlated attribute bundle A_k = U + Delta_k (+ noise).

    The shared component U is a random rank-shared_rank matrix scaled to
    Frobenius norm sqrt(n*t); each private Delta_k is rank-private_rank at
    0.3 of that energy. A common constant offset then shifts every attribute
    to be nonnegative; the offset is folded into the shared component (which
    therefore gains the rank-1 all-ones direction) and recorded in meta.
    """
    rng = np.random.default_rng(spec.seed)
    base_norm = np.sqrt(spec.n * spec.t)
    U = _scaled_low_rank(rng, spec.n, spec.t, spec.shared_rank, base_norm)

    privates = []
    for _ in range(spec.attribute_count):
        if spec.private_rank > 0:
            privates.append(
                _scaled_low_rank(rng, spec.n, spec.t, spec.private_rank,
                                 PRIVATE_ENERGY_RATIO * base_norm)
            )
        else:
            privates.append(np.zeros((spec.n, spec.t)))
    noises = [
        rng.normal(0.0, spec.noise_std, size=(spec.n, spec.t)) if spec.noise_std > 0
        else np.zeros((spec.n, spec.t))
        for _ in range(spec.attribute_count)
    ]

    raw = [U + d + e for d, e in zip(privates, noises)]
    offset = max(0.0, -min(float(a.min()) for a in raw))
    attributes = {
        f"attr{k + 1}": a + offset for k, a in enumerate(raw)
    }
    return GroundTruthBundle(
        attributes=attributes,
        node_ids=list(range(spec.n)),
        slots=list(range(spec.t)),
        meta={
            "offset": offset,
            "seed": spec.seed,
            "shared_rank": spec.shared_rank,
            "private_rank": spec.private_rank,
            "noise_std": spec.noise_std,
        },
    )


def save_bundle(directory, bundle: GroundTruthBundle) -> None:
    """Write a bundle as per-attribute CSV matrices plus a JSON manifest."""
    os.makedirs(directory, exist_ok=True)
    for name, matrix in bundle.attributes.items():
        write_matrix_csv(os.path.join(directory, f"{name}.csv"), matrix)
    manifest = {
        "attributes": bundle.names,
        "node_ids": bundle.node_ids,
        "slots": bundle.slots,
        "meta": bundle.meta,
    }
    with open(os.path.join(directory, "bundle.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def load_bundle(directory) -> GroundTruthBundle:
    """Read a bundle written by save_bundle."""
    with open(os.path.join(directory, "bundle.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    attributes = {
        name: read_matrix_csv(os.path.join(directory, f"{name}.csv"))
        for name in manifest["attributes"]
    }
    return GroundTruthBundle(
        attributes=attributes,
        node_ids=manifest["node_ids"],
        slots=manifest["slots"],
        meta=manifest.get("meta", {}),
    )
