"""Deduct-value Pavement Condition Index computation.

Curves are data, not code: a :class:`DeductCurveSet` is loaded from a JSON
curve file. The package ships a SYNTHETIC sample set
(``data/sample_curves.json``) whose shapes resemble published deduct and
correction curves but whose values are invented; load licensed tables from
your own file for production use.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyCurveSet,
    InvalidCurve,
    InvalidDeduct,
    InvalidDensity,
    MissingCorrectionCurve,
    NegativeDamage,
    OutOfRange,
    ParseError,
    RoadInspectError,
    SchemaMismatch,
    UnknownDistress,
)

CURVE_SCHEMA = "road-inspect/curves"
CURVE_SCHEMA_VERSION = 1

# deduct values at or below this do not count toward q
Q_THRESHOLD = 2.0
MAX_DEDUCTS = 10.0


class Severity(str, enum.Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"

    @classmethod
    def parse(cls, text: "str | Severity") -> "Severity":
        if isinstance(text, Severity):
            return text
        key = str(text).strip().lower()
        for member in cls:
            if key in (member.value.lower(), member.value[0].lower()):
                return member
        raise ParseError(f"unknown severity {text!r}; use Low, Medium or High")


class Rating(str, enum.Enum):
    FAILED = "Failed"
    SERIOUS = "Serious"
    VERY_POOR = "VeryPoor"
    POOR = "Poor"
    FAIR = "Fair"
    SATISFACTORY = "Satisfactory"
    GOOD = "Good"


class MaintenanceProgram(str, enum.Enum):
    ROUTINE_MAINTENANCE = "RoutineMaintenance"
    MINOR_REHABILITATION = "MinorRehabilitation"
    MAJOR_REHABILITATION = "MajorRehabilitation"
    RECONSTRUCTION = "Reconstruction"


# lower bound of each band, ascending; bands are half-open [lo, next_lo)
_RATING_BANDS: tuple[tuple[float, Rating], ...] = (
    (0.0, Rating.FAILED),
    (10.0, Rating.SERIOUS),
    (25.0, Rating.VERY_POOR),
    (40.0, Rating.POOR),
    (55.0, Rating.FAIR),
    (70.0, Rating.SATISFACTORY),
    (85.0, Rating.GOOD),
)


@dataclass(frozen=True)
class DistressRecord:
    distress_kind: str
    severity: Severity
    density: float  # percent of sample-unit area

    def __post_init__(self) -> None:
        object.__setattr__(self, "severity", Severity.parse(self.severity))
        if not (0.0 <= self.density <= 100.0) or math.isnan(self.density):
            raise InvalidDensity(
                f"density {self.density} outside [0, 100] for {self.distress_kind}/{self.severity.value}"
            )


@dataclass(frozen=True)
class Curve:
    """Piecewise-linear curve, clamped to its end values outside the knots."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    def __call__(self, value: float) -> float:
        return float(np.interp(value, self.x, self.y))


@dataclass(frozen=True)
class DeductCurveSet:
    deduct_curves: Mapping[tuple[str, Severity], Curve]
    correction_curves: Mapping[int, Curve]
    label: str = ""

    def kinds(self) -> list[str]:
        return sorted({k for k, _ in self.deduct_curves})


@dataclass(frozen=True)
class PciResult:
    pci: float
    max_cdv: float
    rating: Rating
    deduct_values: tuple[float, ...]
    iterations: tuple[tuple[int, float, float], ...] = field(default_factory=tuple)


# ---------------------------------------------------------------- loading


def _check_non_decreasing(values: Sequence[float], what: str) -> None:
    if any(b < a for a, b in zip(values, values[1:])):
        raise InvalidCurve(f"{what} is not non-decreasing")


def _deduct_curve(kind: str, severity: Severity, knots: Sequence[Sequence[float]]) -> Curve:
    pts = [(float(d), float(v)) for d, v in knots]
    # an explicit (0, 0) anchor is allowed; zero density is handled separately
    pts = [p for p in pts if p[0] > 0.0 or p[1] != 0.0]
    if not pts:
        raise InvalidCurve(f"deduct curve {kind}/{severity.value} has no knots")
    dens = [d for d, _ in pts]
    vals = [v for _, v in pts]
    if any(d <= 0.0 or d > 100.0 for d in dens):
        raise InvalidCurve(f"deduct curve {kind}/{severity.value}: densities must lie in (0, 100]")
    if any(b <= a for a, b in zip(dens, dens[1:])):
        raise InvalidCurve(f"deduct curve {kind}/{severity.value}: densities must be strictly increasing")
    _check_non_decreasing(vals, f"deduct curve {kind}/{severity.value}")
    if any(v < 0.0 or v > 100.0 for v in vals):
        raise InvalidCurve(f"deduct curve {kind}/{severity.value}: values must lie in [0, 100]")
    return Curve(tuple(math.log10(d) for d in dens), tuple(vals))


def _correction_curve(q: int, knots: Sequence[Sequence[float]]) -> Curve:
    tdv = [float(t) for t, _ in knots]
    cdv = [float(c) for _, c in knots]
    if not tdv:
        raise InvalidCurve(f"correction curve q={q} has no knots")
    if any(b <= a for a, b in zip(tdv, tdv[1:])):
        raise InvalidCurve(f"correction curve q={q}: TDV knots must be strictly increasing")
    _check_non_decreasing(cdv, f"correction curve q={q}")
    return Curve(tuple(tdv), tuple(cdv))


def curves_from_dict(doc: Mapping) -> DeductCurveSet:
    if doc.get("schema") != CURVE_SCHEMA:
        raise InvalidCurve(f"unexpected schema id {doc.get('schema')!r}, want {CURVE_SCHEMA!r}")
    if int(doc.get("schema_version", -1)) != CURVE_SCHEMA_VERSION:
        raise InvalidCurve(f"unsupported curve schema version {doc.get('schema_version')!r}")

    deduct: dict[tuple[str, Severity], Curve] = {}
    for entry in doc.get("deduct_curves", []):
        sev = Severity.parse(entry["severity"])
        key = (str(entry["distress_kind"]), sev)
        if key in deduct:
            raise InvalidCurve(f"duplicate deduct curve {key[0]}/{sev.value}")
        deduct[key] = _deduct_curve(key[0], sev, entry["knots"])

    correction: dict[int, Curve] = {}
    for entry in doc.get("correction_curves", []):
        q = int(entry["q"])
        if q < 1:
            raise InvalidCurve(f"correction curve index q={q} must be >= 1")
        if q in correction:
            raise InvalidCurve(f"duplicate correction curve q={q}")
        correction[q] = _correction_curve(q, entry["knots"])

    if not deduct or not correction:
        raise EmptyCurveSet("curve set must define at least one deduct and one correction curve")
    curves = DeductCurveSet(deduct, correction, label=str(doc.get("label", "")))
    validate_curves(curves)
    return curves


def validate_curves(curves: DeductCurveSet) -> None:
    """Check the cross-curve invariants: q=1 identity and ordering in q."""
    corr = curves.correction_curves
    if 1 in corr:
        for t in np.linspace(0.0, 100.0, 201):
            if abs(corr[1](t) - t) > 1e-9:
                raise InvalidCurve("correction curve q=1 must be the identity on [0, 100]")
    grid = sorted({x for c in corr.values() for x in c.x} | {0.0, 100.0})
    qs = sorted(corr)
    for lo, hi in zip(qs, qs[1:]):
        for t in grid:
            if corr[lo](t) < corr[hi](t) - 1e-12:
                raise InvalidCurve(f"correction curves not ordered: CDV(q={lo}) < CDV(q={hi}) at TDV={t}")


def load_curves(path: str | Path) -> DeductCurveSet:
    with open(path, encoding="utf-8") as fh:
        return curves_from_dict(json.load(fh))


def sample_curves() -> DeductCurveSet:
    """The shipped SYNTHETIC curve set (test data, not ASTM values)."""
    text = resources.files("road_inspect").joinpath("data/sample_curves.json").read_text("utf-8")
    return curves_from_dict(json.loads(text))


# ------------------------------------------------------------- operations


def lookup_deduct(curves: DeductCurveSet, record: DistressRecord) -> float:
    """Deduct value for one distress, interpolated linearly in log10(density)."""
    curve = curves.deduct_curves.get((record.distress_kind, record.severity))
    if curve is None:
        raise UnknownDistress(
            f"no deduct curve for {record.distress_kind!r} at severity {record.severity.value}"
        )
    if not (0.0 <= record.density <= 100.0):
        raise InvalidDensity(f"density {record.density} outside [0, 100]")
    if record.density == 0.0:
        return 0.0
    return min(100.0, max(0.0, curve(math.log10(record.density))))


def max_allowable_deducts(hdv: float) -> float:
    """Maximum allowable number of deducts ``m`` for highest deduct ``hdv``, capped at 10."""
    if not (0.0 <= hdv <= 100.0):
        raise InvalidDeduct(f"highest deduct value {hdv} outside [0, 100]")
    return min(MAX_DEDUCTS, 1.0 + (100.0 - hdv) * 9.0 / 98.0)


def truncate_deducts(deducts: Iterable[float]) -> list[float]:
    """Keep the floor(m) largest deducts plus frac(m) of the next one.

    Returned in descending order; ties keep input order.
    """
    ordered = sorted(deducts, key=lambda v: -v)  # sorted() is stable
    if not ordered:
        return []
    m = max_allowable_deducts(ordered[0])
    whole = int(math.floor(m))
    if len(ordered) <= whole:
        return ordered
    frac = m - whole
    kept = ordered[:whole]
    if frac > 0.0:
        kept.append(frac * ordered[whole])
    return kept


def corrected_deduct(curves: DeductCurveSet, q: int, tdv: float) -> float:
    if q < 1:
        raise MissingCorrectionCurve(f"q must be >= 1, got {q}")
    if tdv < 0.0:
        raise InvalidDeduct(f"total deduct value {tdv} is negative")
    curve = curves.correction_curves.get(q)
    if curve is None:
        raise MissingCorrectionCurve(f"no correction curve defined for q={q}")
    return min(100.0, max(0.0, curve(tdv)))


def compute_pci(curves: DeductCurveSet, records: Sequence[DistressRecord]) -> PciResult:
    if not curves.deduct_curves or not curves.correction_curves:
        raise EmptyCurveSet("curve set is empty")
    dvs = truncate_deducts(lookup_deduct(curves, r) for r in records)
    work = list(dvs)
    trace: list[tuple[int, float, float]] = []
    while True:
        q = sum(1 for v in work if v > Q_THRESHOLD)
        # with at most one deduct above 2 the q=1 (identity) curve applies
        q_used = max(q, 1)
        tdv = math.fsum(work)
        trace.append((q_used, tdv, corrected_deduct(curves, q_used, tdv)))
        if q <= 1:
            break
        # smallest deduct above 2; first in order among ties
        _, idx = min((v, i) for i, v in enumerate(work) if v > Q_THRESHOLD)
        work[idx] = Q_THRESHOLD
    max_cdv = max(c for _, _, c in trace)
    pci = 100.0 - max_cdv
    return PciResult(
        pci=pci,
        max_cdv=max_cdv,
        rating=rate_condition(pci),
        deduct_values=tuple(dvs),
        iterations=tuple(trace),
    )


def rate_condition(pci: float) -> Rating:
    if not (0.0 <= pci <= 100.0):
        raise OutOfRange(f"PCI {pci} outside [0, 100]")
    rating = Rating.FAILED
    for lo, band in _RATING_BANDS:
        if pci >= lo:
            rating = band
    return rating


def maintenance_program(damage_percent: float) -> MaintenanceProgram:
    if damage_percent < 0.0 or math.isnan(damage_percent):
        raise NegativeDamage(f"damage percent {damage_percent} is negative")
    if damage_percent < 6.0:
        return MaintenanceProgram.ROUTINE_MAINTENANCE
    if damage_percent < 11.0:
        return MaintenanceProgram.MINOR_REHABILITATION
    if damage_percent < 15.0:
        return MaintenanceProgram.MAJOR_REHABILITATION
    return MaintenanceProgram.RECONSTRUCTION


# ----------------------------------------------------------------- survey I/O

SURVEY_COLUMNS = ("segment_id", "distress_kind", "severity", "density_percent")
RESULT_COLUMNS = ("segment_id", "pci", "rating", "max_cdv")


def load_survey(path: str | Path) -> dict[str, list[DistressRecord]]:
    """Distress records grouped by segment, in first-appearance order.

    A row with an empty ``distress_kind`` registers a segment with no
    distresses (PCI 100).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SURVEY_COLUMNS:
            raise SchemaMismatch(f"{path}: header must be {','.join(SURVEY_COLUMNS)}, got {header}")
        survey: dict[str, list[DistressRecord]] = {}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(SURVEY_COLUMNS):
                raise SchemaMismatch(f"{path}: line {line} has {len(row)} fields, expected {len(SURVEY_COLUMNS)}")
            sid, kind, sev, dens = (c.strip() for c in row)
            if not sid:
                raise ParseError("empty segment_id", line)
            records = survey.setdefault(sid, [])
            if not kind:
                continue
            try:
                density = float(dens)
            except ValueError:
                raise ParseError(f"density_percent {dens!r} is not a number", line) from None
            try:
                records.append(DistressRecord(kind, Severity.parse(sev), density))
            except RoadInspectError as exc:
                raise ParseError(str(exc), line) from exc
    return survey


def write_results(results: Mapping[str, PciResult], path_or_file) -> None:
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for sid, res in results.items():
            w.writerow([sid, repr(res.pci), res.rating.value, repr(res.max_cdv)])
    finally:
        if own:
            fh.close()
