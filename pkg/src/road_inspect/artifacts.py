"""JSON model documents shared by the MLP, RBF and committee models.

Floats are written with ``repr`` precision (the ``json`` default), so a
saved model reloads to bit-identical parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np

from .cmis import MEMBER_ORDER, CmisModel, combine
from .dataset import Scaler
from .errors import ArtifactMismatch, InvalidParams
from .mlp import MlpArchitecture, MlpModel
from .rbf import RbfModel

FORMAT = "road-inspect/model"
FORMAT_VERSION = 1
MODEL_NAMES = (*MEMBER_ORDER, "cmis")


@dataclass(frozen=True)
class Committee:
    """A fitted committee, optionally bundled with the member models it combines."""

    cmis: CmisModel
    members: Mapping[str, "Artifact"] = field(default_factory=dict)

    def with_members(self, members: Mapping[str, "Artifact"]) -> "Committee":
        return Committee(self.cmis, dict(members))

    def member_predictions(self, X_raw: np.ndarray) -> np.ndarray:
        missing = [m for m in MEMBER_ORDER if m not in self.members]
        if missing:
            raise ArtifactMismatch(f"committee has no member models for: {', '.join(missing)}")
        return np.column_stack([self.members[m].predict(X_raw) for m in MEMBER_ORDER])

    def predict(self, X_raw: np.ndarray) -> np.ndarray:
        return np.atleast_1d(combine(self.cmis, self.member_predictions(X_raw)))


Model = Union[MlpModel, RbfModel, Committee]


@dataclass(frozen=True)
class Artifact:
    name: str  # mlp-lm, mlp-scg, rbf-ga, rbf-ica or cmis
    model: Model
    training: dict[str, Any] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        if isinstance(self.model, MlpModel):
            return "mlp"
        if isinstance(self.model, RbfModel):
            return "rbf"
        return "cmis"

    def predict(self, X_raw: np.ndarray) -> np.ndarray:
        return np.asarray(self.model.predict(np.atleast_2d(X_raw)), dtype=float).reshape(-1)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"format": FORMAT, "format_version": FORMAT_VERSION,
                               "kind": self.kind, "name": self.name}
        m = self.model
        if isinstance(m, MlpModel):
            doc["architecture"] = m.architecture.to_dict()
            doc["params"] = m.params.tolist()
            doc["scaler"] = m.scaler.to_dict() if m.scaler else None
        elif isinstance(m, RbfModel):
            doc.update(centers=m.centers.tolist(), spread=m.spread, weights=m.weights.tolist(), bias=m.bias,
                       scaler=m.scaler.to_dict() if m.scaler else None)
        else:
            doc.update(m.cmis.to_dict())
            doc["member_models"] = {k: m.members[k].to_dict() for k in MEMBER_ORDER if k in m.members}
        doc["training"] = self.training
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Artifact":
        if doc.get("format") != FORMAT:
            raise ArtifactMismatch(f"not a model document (format={doc.get('format')!r})")
        if doc.get("format_version") != FORMAT_VERSION:
            raise ArtifactMismatch(f"unsupported format_version {doc.get('format_version')!r}")
        kind = doc.get("kind")
        scaler = Scaler.from_dict(doc["scaler"]) if doc.get("scaler") else None
        model: Model
        if kind == "mlp":
            model = MlpModel(MlpArchitecture.from_dict(doc["architecture"]), np.array(doc["params"]), scaler)
        elif kind == "rbf":
            model = RbfModel(np.array(doc["centers"]), doc["spread"], np.array(doc["weights"]), doc["bias"], scaler)
        elif kind == "cmis":
            members = {k: cls.from_dict(v) for k, v in doc.get("member_models", {}).items()}
            model = Committee(CmisModel.from_dict(doc), members)
        else:
            raise ArtifactMismatch(f"unknown model kind {kind!r}")
        return cls(doc.get("name", kind), model, dict(doc.get("training", {})))


def dumps(artifact: Artifact) -> str:
    return json.dumps(artifact.to_dict(), indent=2, allow_nan=False) + "\n"


def save(artifact: Artifact, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(artifact), encoding="utf-8")
    return path


def load(path: str | Path) -> Artifact:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactMismatch(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ArtifactMismatch(f"{path}: expected a JSON object")
    return Artifact.from_dict(doc)


def committee_from_artifacts(cmis: CmisModel, members: Mapping[str, Artifact] | None = None) -> Artifact:
    members = dict(members or {})
    for name, art in members.items():
        if name not in MEMBER_ORDER:
            raise ArtifactMismatch(f"{name!r} is not a committee member; expected one of {', '.join(MEMBER_ORDER)}")
        if art.kind == "cmis":
            raise InvalidParams(f"member {name!r} is itself a committee")
    return Artifact("cmis", Committee(cmis, members), {"constraint": cmis.fitted_on.get("constraint", "none")})
