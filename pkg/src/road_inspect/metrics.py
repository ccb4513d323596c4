"""Accuracy criteria, input relevancy and report/plot-data emission.

Relative criteria are expressed with ``(observed - predicted) / observed``,
so APRE is positive when a model under-predicts on average.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .dataset import DEFLECTION_COLUMNS, Dataset
from .errors import (
    ArtifactMismatch,
    DegenerateFeature,
    InsufficientSamples,
    InvalidParams,
    LengthMismatch,
    RoadInspectError,
    ZeroObserved,
)

SPLITS = ("Train", "Test", "Total")
REPORT_COLUMNS = ("model", "split", "n", "apre_pct", "aapre_pct", "rmse", "sd")


def _pair(observed, predicted) -> tuple[np.ndarray, np.ndarray]:
    obs = np.asarray(observed, dtype=float).reshape(-1)
    pred = np.asarray(predicted, dtype=float).reshape(-1)
    if obs.shape != pred.shape:
        raise LengthMismatch(f"observed has {obs.size} values, predicted has {pred.size}")
    if obs.size == 0:
        raise InsufficientSamples("at least one sample is required")
    return obs, pred


def relative_errors(observed, predicted) -> np.ndarray:
    """Per-sample ``(obs - pred) / obs``; observed values must be non-zero."""
    obs, pred = _pair(observed, predicted)
    zero = np.flatnonzero(obs == 0.0)
    if zero.size:
        raise ZeroObserved(int(zero[0]))
    return (obs - pred) / obs


def apre(observed, predicted) -> float:
    return 100.0 * float(np.mean(relative_errors(observed, predicted)))


def aapre(observed, predicted) -> float:
    return 100.0 * float(np.mean(np.abs(relative_errors(observed, predicted))))


def rmse(observed, predicted) -> float:
    obs, pred = _pair(observed, predicted)
    return math.sqrt(float(np.mean((obs - pred) ** 2)))


def sd(observed, predicted) -> float:
    obs, _ = _pair(observed, predicted)
    if obs.size < 2:
        raise InsufficientSamples("sd divides by N - 1 and needs at least 2 samples")
    e = relative_errors(observed, predicted)
    return math.sqrt(float(np.sum(e * e)) / (e.size - 1))


def input_impact(data: Dataset | tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Pearson correlation of each input with PCI (signed relevancy factor)."""
    if isinstance(data, Dataset):
        X, y = data.X, data.y
    else:
        X, y = (np.asarray(a, dtype=float) for a in data)
    X = np.atleast_2d(X)
    if X.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} input rows but {y.shape[0]} targets")
    if X.shape[0] < 3:
        raise InsufficientSamples(f"input impact needs at least 3 samples, got {X.shape[0]}")
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    x_norm = np.sqrt(np.sum(Xc * Xc, axis=0))
    y_norm = math.sqrt(float(yc @ yc))
    if y_norm == 0.0:
        raise DegenerateFeature("pci is constant")
    for j in np.flatnonzero(x_norm == 0.0):
        name = DEFLECTION_COLUMNS[j] if X.shape[1] == len(DEFLECTION_COLUMNS) else str(j)
        raise DegenerateFeature(f"feature {name} is constant")
    return np.clip((Xc.T @ yc) / (x_norm * y_norm), -1.0, 1.0)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class SplitMetrics:
    split: str
    n: int
    apre_pct: float
    aapre_pct: float
    rmse: float
    sd: float

    @classmethod
    def compute(cls, split: str, observed, predicted) -> "SplitMetrics":
        obs, pred = _pair(observed, predicted)
        return cls(split, int(obs.size), apre(obs, pred), aapre(obs, pred), rmse(obs, pred), sd(obs, pred))


@dataclass(frozen=True)
class EvalReport:
    model: str
    splits: tuple[SplitMetrics, ...]

    def __getitem__(self, split: str) -> SplitMetrics:
        for row in self.splits:
            if row.split == split:
                return row
        raise KeyError(split)

    def rows(self) -> list[dict[str, object]]:
        return [{"model": self.model, **asdict(s)} for s in self.splits]


def evaluate(model: str, train_obs, train_pred, test_obs, test_pred) -> EvalReport:
    """Train, Test and Total metrics; Total pools both splits' samples."""
    train = SplitMetrics.compute("Train", train_obs, train_pred)
    test = SplitMetrics.compute("Test", test_obs, test_pred)
    total = SplitMetrics.compute(
        "Total",
        np.concatenate([np.ravel(train_obs), np.ravel(test_obs)]),
        np.concatenate([np.ravel(train_pred), np.ravel(test_pred)]),
    )
    return EvalReport(model, (train, test, total))


class Predictor(Protocol):
    def predict(self, X_raw: np.ndarray) -> np.ndarray: ...


def _fmt(value: object) -> object:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else value


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_report_csv(reports: Sequence[EvalReport], path: str | Path) -> None:
    rows = ([r[c] for c in REPORT_COLUMNS] for rep in reports for r in rep.rows())
    _write_rows(Path(path), REPORT_COLUMNS, rows)


def write_plot_data(model: str, observed, predicted, outdir: str | Path) -> list[Path]:
    """Cross-plot, relative-error and cumulative-frequency series for one model."""
    obs, pred = _pair(observed, predicted)
    rel = 100.0 * relative_errors(obs, pred)
    outdir = Path(outdir)
    cross = outdir / f"crossplot_{model}.csv"
    relerr = outdir / f"relerr_{model}.csv"
    cum = outdir / f"cumfreq_{model}.csv"
    _write_rows(cross, ("observed", "predicted"), zip(obs, pred))
    _write_rows(relerr, ("observed", "rel_error_pct"), zip(obs, rel))
    abs_sorted = np.sort(np.abs(rel), kind="stable")
    freq = np.arange(1, abs_sorted.size + 1) / abs_sorted.size
    _write_rows(cum, ("abs_rel_error_pct", "cum_freq"), zip(abs_sorted, freq))
    return [cross, relerr, cum]


def _predict(name: str, model: Predictor, data: Dataset) -> np.ndarray:
    try:
        pred = np.asarray(model.predict(data.X), dtype=float).reshape(-1)
    except RoadInspectError as exc:
        raise ArtifactMismatch(f"model {name!r} cannot score this data: {exc}") from exc
    if pred.shape[0] != len(data):
        raise ArtifactMismatch(f"model {name!r} returned {pred.shape[0]} predictions for {len(data)} rows")
    return pred


def emit_report(models: Mapping[str, Predictor], train: Dataset, test: Dataset, outdir: str | Path,
                report_name: str = "report.csv") -> list[EvalReport]:
    """Score every model on both splits and write the report plus plot data.

    Plot-data series cover the Total (train followed by test) samples.
    """
    if not models:
        raise InvalidParams("no models to evaluate")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = []
    for name, model in models.items():
        p_train = _predict(name, model, train)
        p_test = _predict(name, model, test)
        reports.append(evaluate(name, train.y, p_train, test.y, p_test))
        write_plot_data(name, np.concatenate([train.y, test.y]), np.concatenate([p_train, p_test]), outdir)
    write_report_csv(reports, outdir / report_name)
    return reports


def write_impact_csv(impact: Sequence[float], path: str | Path) -> None:
    _write_rows(Path(path), ("feature", "impact"), zip(DEFLECTION_COLUMNS, impact))
