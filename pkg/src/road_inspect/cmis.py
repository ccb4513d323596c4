"""Committee machine: an affine combination of the four hybrid models.

The combined estimate is ``c1 + c2*mlp_lm + c3*mlp_scg + c4*rbf_ga + c5*rbf_ica``.
The published coefficient set lists five unlabeled numbers; here the first
is read as the intercept and the rest follow the model order above. That
assignment is an interpretation, kept in one place (``MEMBER_ORDER``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Literal, Sequence

import numpy as np

from .errors import InsufficientSamples, InvalidParams, LengthMismatch, NonFinitePrediction, RankDeficient

MEMBER_ORDER = ("mlp-lm", "mlp-scg", "rbf-ga", "rbf-ica")
N_MEMBERS = len(MEMBER_ORDER)
MIN_FIT_SAMPLES = N_MEMBERS + 1


@dataclass(frozen=True)
class CmisModel:
    c1: float  # intercept
    c2: float
    c3: float
    c4: float
    c5: float
    fitted_on: dict[str, Any] = field(default_factory=dict, compare=False)
    train_rmse: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("c1", "c2", "c3", "c4", "c5"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidParams(f"coefficient {name} is not finite")
            object.__setattr__(self, name, value)

    @property
    def intercept(self) -> float:
        return self.c1

    @property
    def slopes(self) -> np.ndarray:
        return np.array([self.c2, self.c3, self.c4, self.c5])

    @classmethod
    def from_vector(cls, coef: Sequence[float], **kwargs: Any) -> "CmisModel":
        if len(coef) != N_MEMBERS + 1:
            raise LengthMismatch(f"expected {N_MEMBERS + 1} coefficients, got {len(coef)}")
        return cls(*map(float, coef), **kwargs)

    def as_vector(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3, self.c4, self.c5])

    def to_dict(self) -> dict[str, Any]:
        return {"coefficients": self.as_vector().tolist(), "members": list(MEMBER_ORDER),
                "fitted_on": self.fitted_on, "train_rmse": self.train_rmse}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "CmisModel":
        return cls.from_vector(doc["coefficients"], fitted_on=doc.get("fitted_on", {}),
                               train_rmse=doc.get("train_rmse"))


# Published coefficients, not renormalized (they sum to 1.001187).
PUBLISHED = CmisModel(0.0, 0.657295, 0.227583, 0.069749, 0.04656, fitted_on={"kind": "published"})


def combine(model: CmisModel, preds: np.ndarray) -> float | np.ndarray:
    """Apply the stored coefficients to one 4-vector or an (N, 4) matrix."""
    P = np.asarray(preds, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    if P.shape[1] != N_MEMBERS:
        raise LengthMismatch(f"expected {N_MEMBERS} member predictions per row, got {P.shape[1]}")
    if not np.all(np.isfinite(P)):
        bad = int(np.argwhere(~np.isfinite(P))[0, 0])
        raise NonFinitePrediction(f"member prediction in row {bad} is not finite")
    out = model.c1 + P @ model.slopes
    return float(out[0]) if single else out


def _rmse(A: np.ndarray, coef: np.ndarray, t: np.ndarray) -> float:
    r = t - A @ coef
    return math.sqrt(float(np.mean(r * r)))


def _nonnegative_fit(A: np.ndarray, t: np.ndarray, max_sweeps: int, tol: float) -> np.ndarray:
    # Start from the clipped OLS solution, then do exact coordinate minimization;
    # slopes are projected onto [0, inf), the intercept is free.
    coef = np.linalg.lstsq(A, t, rcond=None)[0]
    coef[1:] = np.maximum(coef[1:], 0.0)
    col_sq = np.sum(A * A, axis=0)
    r = t - A @ coef
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(A.shape[1]):
            if col_sq[j] == 0.0:
                continue
            new = coef[j] + float(A[:, j] @ r) / col_sq[j]
            if j > 0:
                new = max(new, 0.0)
            step = new - coef[j]
            if step != 0.0:
                r -= step * A[:, j]
                coef[j] = new
                biggest = max(biggest, abs(step))
        if biggest <= tol:
            break
    return coef


def fit_weights(preds: np.ndarray, targets: np.ndarray,
                constraint: Literal["none", "non-negative"] = "none",
                fitted_on: dict[str, Any] | None = None,
                max_sweeps: int = 10_000, tol: float = 1e-13) -> CmisModel:
    """Least-squares committee weights with an intercept.

    ``constraint="non-negative"`` keeps c2..c5 >= 0 via projected coordinate
    descent on the same squared-error objective.
    """
    P = np.asarray(preds, dtype=float)
    t = np.asarray(targets, dtype=float).reshape(-1)
    if P.ndim != 2 or P.shape[1] != N_MEMBERS:
        raise LengthMismatch(f"prediction matrix must be (N, {N_MEMBERS}), got {P.shape}")
    if P.shape[0] != t.shape[0]:
        raise LengthMismatch(f"{P.shape[0]} prediction rows but {t.shape[0]} targets")
    if P.shape[0] < MIN_FIT_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_FIT_SAMPLES} samples, got {P.shape[0]}")
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(t))):
        raise NonFinitePrediction("predictions and targets must be finite")
    A = np.column_stack([np.ones(P.shape[0]), P])
    if constraint == "none":
        rank = np.linalg.matrix_rank(A)
        if rank < A.shape[1]:
            raise RankDeficient(f"prediction columns are collinear (rank {rank} < {A.shape[1]})")
        coef = np.linalg.lstsq(A, t, rcond=None)[0]
    elif constraint == "non-negative":
        coef = _nonnegative_fit(A, t, max_sweeps, tol)
    else:
        raise InvalidParams(f"unknown constraint {constraint!r}; use 'none' or 'non-negative'")
    return CmisModel.from_vector(coef, fitted_on=dict(fitted_on or {}), train_rmse=_rmse(A, coef, t))
