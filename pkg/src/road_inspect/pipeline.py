"""End-to-end workflow: split, scale, train the four members, fit the
committee, evaluate everything and write artifacts and reports.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

from . import artifacts
from .artifacts import Artifact
from .cmis import MEMBER_ORDER, fit_weights
from .dataset import DEFAULT_TEST_FRACTION, Dataset, fit_scaler, load_csv, split, write_csv
from .errors import InputFileError, InvalidParams, RoadInspectError, SchemaMismatch
from .metrics import EvalReport, emit_report, input_impact, write_impact_csv
from .mlp import DEFAULT_HIDDEN, MlpArchitecture, TrainConfig, init_weights, parse_hidden, train_lm, train_scg
from .rbf import RbfTrainConfig, train_rbf

PREDICTION_COLUMNS = ("segment_id", *MEMBER_ORDER, "pci")


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag errors raised inside the block with the pipeline stage name."""
    try:
        yield
    except RoadInspectError as exc:
        if exc.stage is None:
            exc.stage = name
        raise
    except OSError as exc:
        err = InputFileError(f"{exc.filename or ''}: {exc.strerror or exc}".lstrip(": "))
        err.stage = name
        raise err from exc


def load_dataset(path: str | Path) -> Dataset:
    if not Path(path).is_file():
        raise InputFileError(f"data file {path} does not exist")
    return load_csv(path)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    test_fraction: float = DEFAULT_TEST_FRACTION
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    mlp: TrainConfig = field(default_factory=TrainConfig)
    rbf: RbfTrainConfig = field(default_factory=RbfTrainConfig)
    cmis_constraint: str = "none"
    # members may train in parallel threads; results do not depend on it
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise InvalidParams("test_fraction must lie in (0, 1)")
        if self.workers < 1:
            raise InvalidParams("workers must be >= 1")
        object.__setattr__(self, "hidden", parse_hidden(self.hidden))

    def seeds(self) -> dict[str, int]:
        return {"split": self.seed, **{m: self.seed for m in MEMBER_ORDER}}

    def to_dict(self) -> dict[str, Any]:
        return {"seed": self.seed, "test_fraction": self.test_fraction, "hidden": list(self.hidden),
                "mlp": self.mlp.to_dict(), "rbf": self.rbf.to_dict(),
                "cmis_constraint": self.cmis_constraint, "workers": self.workers}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PipelineConfig":
        doc = dict(doc)
        unknown = set(doc) - {"seed", "test_fraction", "hidden", "mlp", "rbf", "cmis_constraint", "workers"}
        if unknown:
            raise InvalidParams(f"unknown pipeline config keys: {', '.join(sorted(unknown))}")
        if "mlp" in doc:
            doc["mlp"] = TrainConfig.from_dict(doc["mlp"])
        if "rbf" in doc:
            doc["rbf"] = RbfTrainConfig.from_dict(doc["rbf"])
        if "hidden" in doc:
            doc["hidden"] = parse_hidden(doc["hidden"])
        return cls(**doc)


def train_member(name: str, train: Dataset, config: PipelineConfig) -> Artifact:
    """Train one of mlp-lm, mlp-scg, rbf-ga, rbf-ica on raw data.

    The scaler is fitted on ``train`` and stored inside the model.
    """
    if name not in MEMBER_ORDER:
        raise InvalidParams(f"unknown model {name!r}; choose from {', '.join(MEMBER_ORDER)}")
    scaler = fit_scaler(train)
    Xs, ts = scaler.transform_x(train.X), scaler.transform_y(train.y)
    family, method = name.split("-")
    if family == "mlp":
        cfg = replace(config.mlp, seed=config.seed)
        model = init_weights(MlpArchitecture(hidden=config.hidden), cfg.seed, scaler)
        trained, report = (train_lm if method == "lm" else train_scg)(model, Xs, ts, cfg)
        summary = {"epochs": report.epochs, "termination": report.termination,
                   "initial_loss": report.train_loss[0], "final_loss": report.train_loss[-1]}
        training = {"trainer": method, "seed": cfg.seed, "config": cfg.to_dict(), "report": summary}
        return Artifact(name, trained, training)
    cfg = replace(config.rbf, seed=config.seed)
    rbf_model, trace = train_rbf(Xs, ts, method, cfg, scaler)
    summary = {"best_cost": trace.best_cost, "iterations": len(trace.best_costs),
               "evaluations": trace.evaluations, "termination": trace.termination}
    training = {"optimizer": method, "seed": cfg.seed, "config": cfg.to_dict(), "report": summary}
    return Artifact(name, rbf_model, training)


def member_predictions(members: Mapping[str, Artifact], data: Dataset) -> np.ndarray:
    return np.column_stack([members[m].predict(data.X) for m in MEMBER_ORDER])


def fit_committee(members: Mapping[str, Artifact], train: Dataset, constraint: str = "none") -> Artifact:
    P = member_predictions(members, train)
    cmis = fit_weights(P, train.y, constraint=constraint,
                       fitted_on={"n": len(train), "constraint": constraint, "provenance": train.provenance})
    return artifacts.committee_from_artifacts(cmis, members)


def write_predictions_csv(members: Mapping[str, Artifact], data: Dataset, path: str | Path) -> None:
    P = member_predictions(members, data)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for sid, row, t in zip(data.ids, P, data.y):
            w.writerow([sid, *map(repr, map(float, row)), repr(float(t))])


def read_predictions_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Member predictions (N, 4) and targets from a predictions CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path} is empty")
    header = rows[0]
    needed = (*MEMBER_ORDER, "pci")
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaMismatch(f"{path} lacks columns: {', '.join(missing)}")
    idx = [header.index(c) for c in needed]
    try:
        values = np.array([[float(r[i]) for i in idx] for r in rows[1:]], dtype=float).reshape(-1, len(needed))
    except (ValueError, IndexError) as exc:
        raise SchemaMismatch(f"{path}: malformed row ({exc})") from exc
    return values[:, :-1], values[:, -1]


@dataclass
class PipelineResult:
    reports: list[EvalReport]
    impact: np.ndarray
    committee: Artifact
    members: dict[str, Artifact]
    outputs: list[Path]

    def report(self, model: str) -> EvalReport:
        return next(r for r in self.reports if r.model == model)


def run_pipeline(data_path: str | Path, outdir: str | Path, config: PipelineConfig = PipelineConfig()
                 ) -> PipelineResult:
    outdir = Path(outdir)
    with stage("load"):
        data = load_dataset(data_path)
    with stage("split"):
        train, test = split(data, config.test_fraction, config.seed)
    with stage("scale"):
        fit_scaler(train)  # fail early on degenerate training features
    with stage("train"):
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = {m: pool.submit(train_member, m, train, config) for m in MEMBER_ORDER}
                members = {m: futures[m].result() for m in MEMBER_ORDER}
        else:
            members = {m: train_member(m, train, config) for m in MEMBER_ORDER}
    with stage("ensemble"):
        committee = fit_committee(members, train, config.cmis_constraint)
    with stage("evaluate"):
        plots = outdir / "plots"
        models = {**members, "cmis": committee}
        reports = emit_report(models, train, test, plots, report_name="report.csv")
        impact = input_impact(data)
    with stage("write"):
        outdir.mkdir(parents=True, exist_ok=True)
        model_dir = outdir / "models"
        outputs = [artifacts.save(art, model_dir / f"{name}.json") for name, art in models.items()]
        write_impact_csv(impact, plots / "impact.csv")
        write_csv(train, outdir / "train.csv")
        write_csv(test, outdir / "test.csv")
        write_predictions_csv(members, train, outdir / "train_predictions.csv")
        outputs += [outdir / "train.csv", outdir / "test.csv", outdir / "train_predictions.csv"]
        outputs += sorted(plots.glob("*.csv"))
    return PipelineResult(reports, impact, committee, members, outputs)
