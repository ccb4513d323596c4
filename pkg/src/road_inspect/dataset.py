"""Pavement segments: CSV I/O, seeded splitting, scaling and synthetic data.

A segment carries the seven FWD geophone deflections D1..D7 (plate center,
then 20, 40, 60, 90, 120 and 150 cm offsets, in microns) and the observed
PCI.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import (
    DegenerateFeature,
    InvalidParams,
    InvariantViolation,
    ParseError,
    SchemaMismatch,
    TooFewSegments,
)

N_GEOPHONES = 7
GEOPHONE_OFFSETS_CM = (0, 20, 40, 60, 90, 120, 150)
DEFLECTION_COLUMNS = tuple(f"d{i}" for i in range(1, N_GEOPHONES + 1))
CSV_COLUMNS = ("segment_id", *DEFLECTION_COLUMNS, "pci")
DEFAULT_TEST_FRACTION = 0.2


@dataclass(frozen=True)
class Segment:
    segment_id: str
    deflections: tuple[float, ...]
    pci: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "deflections", tuple(float(d) for d in self.deflections))
        if len(self.deflections) != N_GEOPHONES:
            raise InvariantViolation(f"expected {N_GEOPHONES} deflections, got {len(self.deflections)}", field="deflections")
        for name, d in zip(DEFLECTION_COLUMNS, self.deflections):
            if not (d >= 0.0 and math.isfinite(d)):
                raise InvariantViolation(f"deflection {d} must be finite and >= 0", field=name)
        if not (0.0 <= self.pci <= 100.0):
            raise InvariantViolation(f"pci {self.pci} outside [0, 100]", field="pci")


@dataclass(frozen=True)
class Dataset:
    segments: tuple[Segment, ...]
    provenance: dict[str, Any] = field(default_factory=lambda: {"kind": "real"}, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        seen: set[str] = set()
        for seg in self.segments:
            if seg.segment_id in seen:
                raise InvariantViolation(f"duplicate segment_id {seg.segment_id!r}", field="segment_id")
            seen.add(seg.segment_id)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def ids(self) -> list[str]:
        return [s.segment_id for s in self.segments]

    @property
    def X(self) -> np.ndarray:
        return np.array([s.deflections for s in self.segments], dtype=float).reshape(-1, N_GEOPHONES)

    @property
    def y(self) -> np.ndarray:
        return np.array([s.pci for s in self.segments], dtype=float)

    @classmethod
    def from_arrays(cls, X: np.ndarray, y: np.ndarray, ids: Sequence[str] | None = None,
                    provenance: dict[str, Any] | None = None) -> "Dataset":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if ids is None:
            ids = [f"S{i + 1:04d}" for i in range(len(y))]
        segs = tuple(Segment(str(i), tuple(row), float(t)) for i, row, t in zip(ids, X, y))
        return cls(segs, provenance or {"kind": "real"})


# ------------------------------------------------------------------ CSV


def _format_float(value: float) -> str:
    return repr(float(value))


def load_csv(path: str | Path, schema: Sequence[str] = CSV_COLUMNS) -> Dataset:
    """Load and validate a segment CSV, preserving row order."""
    schema = tuple(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file, expected header {','.join(schema)}") from None
        header = [h.strip() for h in header]
        if tuple(header) != schema:
            missing = [c for c in schema if c not in header]
            detail = f" (missing {', '.join(missing)})" if missing else ""
            raise SchemaMismatch(f"{path}: header {','.join(header)} does not match {','.join(schema)}{detail}")

        segments = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(schema):
                raise SchemaMismatch(f"{path}: line {lineno} has {len(row)} columns, expected {len(schema)}")
            values = []
            for name, cell in zip(schema[1:], row[1:]):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(f"column {name!r}: cannot parse {cell!r} as a number", line=lineno) from None
            try:
                segments.append(Segment(row[0].strip(), tuple(values[:-1]), values[-1]))
            except InvariantViolation as exc:
                raise InvariantViolation(str(exc), line=lineno, field=exc.field) from None
    try:
        return Dataset(tuple(segments), {"kind": "real", "source": str(path)})
    except InvariantViolation as exc:
        raise InvariantViolation(f"{path}: {exc}", field=exc.field) from None


def write_csv(data: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for seg in data.segments:
            writer.writerow([seg.segment_id, *map(_format_float, seg.deflections), _format_float(seg.pci)])


def write_provenance(data: Dataset, csv_path: str | Path) -> Path:
    """Write the provenance sidecar next to a dataset CSV."""
    sidecar = Path(str(csv_path) + ".provenance.json")
    sidecar.write_text(json.dumps(data.provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


# ------------------------------------------------------------ splitting


def split(data: Dataset, test_fraction: float = DEFAULT_TEST_FRACTION, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded train/test partition; both parts keep the input order."""
    n = len(data)
    if n < 2:
        raise TooFewSegments(f"need at least 2 segments to split, got {n}")
    if not (0.0 < test_fraction < 1.0):
        raise InvalidParams(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(math.floor(test_fraction * n + 0.5))
    n_test = min(max(n_test, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = set(perm[:n_test].tolist())
    train = tuple(s for i, s in enumerate(data.segments) if i not in test_idx)
    test = tuple(s for i, s in enumerate(data.segments) if i in test_idx)
    prov = {"parent": data.provenance, "split_seed": seed, "test_fraction": test_fraction}
    return Dataset(train, {**prov, "part": "train"}), Dataset(test, {**prov, "part": "test"})


# -------------------------------------------------------------- scaling


@dataclass(frozen=True)
class Scaler:
    """Min-max map of inputs and target onto [-1, 1]."""

    x_min: tuple[float, ...]
    x_max: tuple[float, ...]
    y_min: float
    y_max: float

    def transform_x(self, X: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.x_min), np.asarray(self.x_max)
        return 2.0 * (np.asarray(X, dtype=float) - lo) / (hi - lo) - 1.0

    def inverse_x(self, Z: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.x_min), np.asarray(self.x_max)
        return (np.asarray(Z, dtype=float) + 1.0) * 0.5 * (hi - lo) + lo

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        return 2.0 * (np.asarray(y, dtype=float) - self.y_min) / (self.y_max - self.y_min) - 1.0

    def inverse_y(self, z: np.ndarray) -> np.ndarray:
        return (np.asarray(z, dtype=float) + 1.0) * 0.5 * (self.y_max - self.y_min) + self.y_min

    def to_dict(self) -> dict[str, Any]:
        return {"x_min": list(self.x_min), "x_max": list(self.x_max), "y_min": self.y_min, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Scaler":
        return cls(tuple(map(float, doc["x_min"])), tuple(map(float, doc["x_max"])),
                   float(doc["y_min"]), float(doc["y_max"]))


def fit_scaler(train: Dataset | tuple[np.ndarray, np.ndarray]) -> Scaler:
    if isinstance(train, Dataset):
        X, y = train.X, train.y
    else:
        X, y = (np.asarray(a, dtype=float) for a in train)
    if len(y) == 0:
        raise TooFewSegments("cannot fit a scaler on an empty dataset")
    x_min, x_max = X.min(axis=0), X.max(axis=0)
    for j, (lo, hi) in enumerate(zip(x_min, x_max)):
        if not hi > lo:
            raise DegenerateFeature(f"feature {DEFLECTION_COLUMNS[j] if X.shape[1] == N_GEOPHONES else j} is constant ({lo})")
    if not y.max() > y.min():
        raise DegenerateFeature(f"target pci is constant ({y.min()})")
    return Scaler(tuple(map(float, x_min)), tuple(map(float, x_max)), float(y.min()), float(y.max()))


# ------------------------------------------------------------ synthetic


@dataclass(frozen=True)
class SynthParams:
    """Generator for monotone basins with a planted linear PCI relation.

    D7 (the subgrade term) is drawn uniformly; each inner deflection adds an
    independent uniform increment to its outer neighbour, so
    D1 >= D2 >= ... >= D7 >= 0 by construction. PCI is
    ``clamp(intercept + coefficients . D, 0, 100)`` plus Gaussian noise,
    clamped again to [0, 100].
    """

    d7_range: tuple[float, float] = (10.0, 90.0)
    # increments D1-D2, D2-D3, ..., D6-D7
    increment_ranges: tuple[tuple[float, float], ...] = (
        (40.0, 200.0), (20.0, 120.0), (20.0, 140.0), (10.0, 40.0), (5.0, 30.0), (10.0, 60.0),
    )
    coefficients: tuple[float, ...] = (-0.035, -0.035, -0.21, 0.07, 0.07, 0.07, 0.42)
    intercept: float = 86.0
    noise_sd: float = 3.0

    def validate(self) -> None:
        lo, hi = self.d7_range
        if not (0.0 <= lo <= hi):
            raise InvalidParams(f"d7_range must satisfy 0 <= lo <= hi, got {self.d7_range}")
        if len(self.increment_ranges) != N_GEOPHONES - 1:
            raise InvalidParams(f"need {N_GEOPHONES - 1} increment ranges")
        for lo, hi in self.increment_ranges:
            if not (0.0 <= lo <= hi):
                raise InvalidParams(f"increment range must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        if len(self.coefficients) != N_GEOPHONES:
            raise InvalidParams(f"need {N_GEOPHONES} coefficients")
        if self.noise_sd < 0.0:
            raise InvalidParams("noise_sd must be >= 0")

    def planted(self, X: np.ndarray) -> np.ndarray:
        """Noiseless PCI, clamp(g(D), 0, 100)."""
        return np.clip(self.intercept + np.asarray(X, dtype=float) @ np.asarray(self.coefficients), 0.0, 100.0)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["increment_ranges"] = [list(r) for r in self.increment_ranges]
        d["d7_range"] = list(self.d7_range)
        d["coefficients"] = list(self.coefficients)
        return d

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "SynthParams":
        return cls(
            d7_range=tuple(doc["d7_range"]),
            increment_ranges=tuple(tuple(r) for r in doc["increment_ranges"]),
            coefficients=tuple(doc["coefficients"]),
            intercept=float(doc["intercept"]),
            noise_sd=float(doc["noise_sd"]),
        )


def synth_generate(n: int, seed: int, params: SynthParams | None = None) -> Dataset:
    params = params or SynthParams()
    if n < 1:
        raise InvalidParams(f"n must be >= 1, got {n}")
    params.validate()
    rng = np.random.default_rng(seed)
    X = np.empty((n, N_GEOPHONES))
    X[:, -1] = rng.uniform(*params.d7_range, size=n)
    increments = np.column_stack([rng.uniform(lo, hi, size=n) for lo, hi in params.increment_ranges])
    for k in range(N_GEOPHONES - 2, -1, -1):
        X[:, k] = X[:, k + 1] + increments[:, k]
    pci = params.planted(X)
    if params.noise_sd > 0.0:
        pci = np.clip(pci + rng.normal(0.0, params.noise_sd, size=n), 0.0, 100.0)
    prov = {
        "kind": "synthetic",
        "seed": seed,
        "n": n,
        "units": "microns",
        "generator": "pci = clip(clip(intercept + coefficients . D, 0, 100) + N(0, noise_sd), 0, 100)",
        "params": params.to_dict(),
    }
    return Dataset.from_arrays(X, pci, provenance=prov)
