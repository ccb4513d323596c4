"""Feed-forward multi-layer perceptron trained by Levenberg-Marquardt or SCG.

Parameters live in one flat vector; each layer contributes its weight
matrix (``n_out x n_in``, row-major) followed by its bias vector. The loss
throughout is half the mean squared residual, ``0.5 * mean((t - y)**2)``,
on scaled targets.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .dataset import N_GEOPHONES, Scaler
from .errors import EmptyBatch, InvalidParams, LengthMismatch, NonFiniteInput, NonFiniteLoss, SingularNormalMatrix


class Activation(str, enum.Enum):
    TANSIG = "tansig"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    LINEAR = "linear"

    @classmethod
    def parse(cls, name: "str | Activation") -> "Activation":
        return name if isinstance(name, Activation) else cls(str(name).strip().lower())


def _activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind in (Activation.TANSIG, Activation.TANH):
        return np.tanh(z)
    if kind is Activation.SIGMOID:
        return 0.5 * (1.0 + np.tanh(0.5 * z))  # overflow-free logistic
    return z


def _derivative_from_output(kind: Activation, a: np.ndarray) -> np.ndarray:
    if kind in (Activation.TANSIG, Activation.TANH):
        return 1.0 - a * a
    if kind is Activation.SIGMOID:
        return a * (1.0 - a)
    return np.ones_like(a)


DEFAULT_HIDDEN = (10, 10, 10, 10)
DEFAULT_ACTIVATIONS = (Activation.TANSIG, Activation.SIGMOID, Activation.TANSIG, Activation.TANSIG)


@dataclass(frozen=True)
class MlpArchitecture:
    n_inputs: int = N_GEOPHONES
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    activations: tuple[Activation, ...] = DEFAULT_ACTIVATIONS

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "activations", tuple(Activation.parse(a) for a in self.activations))
        if self.n_inputs < 1 or any(h < 1 for h in self.hidden):
            raise InvalidParams("layer sizes must be positive")
        if len(self.activations) != len(self.hidden):
            raise InvalidParams(
                f"{len(self.hidden)} hidden layers but {len(self.activations)} activations"
            )

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.n_inputs, *self.hidden, 1)

    @property
    def layer_activations(self) -> tuple[Activation, ...]:
        return (*self.activations, Activation.LINEAR)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        sizes = self.layer_sizes
        return [(n_out, n_in) for n_in, n_out in zip(sizes[:-1], sizes[1:])]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.shapes)

    def to_dict(self) -> dict[str, Any]:
        return {"n_inputs": self.n_inputs, "hidden": list(self.hidden),
                "activations": [a.value for a in self.activations]}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "MlpArchitecture":
        return cls(int(doc["n_inputs"]), tuple(doc["hidden"]), tuple(doc["activations"]))


def unflatten(arch: MlpArchitecture, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into per-layer ``(W, b)`` views."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (arch.n_params,):
        raise LengthMismatch(f"expected {arch.n_params} parameters, got {theta.shape}")
    layers = []
    pos = 0
    for n_out, n_in in arch.shapes:
        W = theta[pos:pos + n_out * n_in].reshape(n_out, n_in)
        pos += n_out * n_in
        b = theta[pos:pos + n_out]
        pos += n_out
        layers.append((W, b))
    return layers


@dataclass(frozen=True)
class MlpModel:
    architecture: MlpArchitecture
    params: np.ndarray
    scaler: Scaler | None = None

    def __post_init__(self) -> None:
        params = np.array(self.params, dtype=float)
        if params.shape != (self.architecture.n_params,):
            raise LengthMismatch(f"expected {self.architecture.n_params} parameters, got {params.shape}")
        if not np.all(np.isfinite(params)):
            raise NonFiniteInput("model parameters must be finite")
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    def with_params(self, theta: np.ndarray) -> "MlpModel":
        return replace(self, params=np.array(theta, dtype=float))

    def predict(self, X_raw: np.ndarray) -> np.ndarray:
        """Predict PCI from unscaled deflections using the attached scaler."""
        if self.scaler is None:
            raise InvalidParams("model has no scaler attached")
        z = forward(self, self.scaler.transform_x(np.atleast_2d(X_raw)))
        return self.scaler.inverse_y(z)


# ------------------------------------------------------------ forward/grad


def _check_batch(arch: MlpArchitecture, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise EmptyBatch("batch is empty")
    if X.shape[1] != arch.n_inputs:
        raise LengthMismatch(f"expected {arch.n_inputs} inputs, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("input contains NaN or inf")
    return X


def _forward_layers(arch: MlpArchitecture, theta: np.ndarray, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    a = X
    for (W, b), kind in zip(unflatten(arch, theta), arch.layer_activations):
        a = _activate(kind, a @ W.T + b)
        acts.append(a)
    return acts


def forward(model: MlpModel, X: np.ndarray) -> np.ndarray | float:
    """Network output for scaled input(s); a float for a single 1-D input."""
    single = np.ndim(X) == 1
    X = _check_batch(model.architecture, X)
    out = _forward_layers(model.architecture, model.params, X)[-1][:, 0]
    return float(out[0]) if single else out


def _targets(X: np.ndarray, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.shape[0] != X.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} inputs but {t.shape[0]} targets")
    return t


def loss(model: MlpModel, X: np.ndarray, t: np.ndarray) -> float:
    X = _check_batch(model.architecture, X)
    return _loss(model.architecture, model.params, X, _targets(X, t))


def _loss(arch: MlpArchitecture, theta: np.ndarray, X: np.ndarray, t: np.ndarray) -> float:
    r = t - _forward_layers(arch, theta, X)[-1][:, 0]
    return 0.5 * float(np.mean(r * r))


def _backprop(arch: MlpArchitecture, theta: np.ndarray, X: np.ndarray,
              out_sens: np.ndarray, per_sample: bool) -> np.ndarray:
    """Reverse pass with output sensitivities ``out_sens`` (one per sample).

    Returns the summed parameter gradient, or the per-sample gradient rows
    when ``per_sample`` is set.
    """
    layers = unflatten(arch, theta)
    acts = _forward_layers(arch, theta, X)
    kinds = arch.layer_activations
    delta = out_sens.reshape(-1, 1) * _derivative_from_output(kinds[-1], acts[-1])
    pieces: list[np.ndarray] = []
    for li in range(len(layers) - 1, -1, -1):
        a_prev = acts[li]
        if per_sample:
            gW = (delta[:, :, None] * a_prev[:, None, :]).reshape(X.shape[0], -1)
            pieces.append(delta)
            pieces.append(gW)
        else:
            pieces.append(delta.sum(axis=0))
            pieces.append((delta.T @ a_prev).ravel())
        if li > 0:
            W = layers[li][0]
            delta = (delta @ W) * _derivative_from_output(kinds[li - 1], acts[li])
    pieces.reverse()
    return np.concatenate(pieces, axis=1 if per_sample else 0)


def gradient(model: MlpModel, X: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Gradient of half the mean squared error with respect to all parameters."""
    X = _check_batch(model.architecture, X)
    t = _targets(X, t)
    return _gradient(model.architecture, model.params, X, t)


def _gradient(arch: MlpArchitecture, theta: np.ndarray, X: np.ndarray, t: np.ndarray) -> np.ndarray:
    y = _forward_layers(arch, theta, X)[-1][:, 0]
    return _backprop(arch, theta, X, -(t - y) / X.shape[0], per_sample=False)


def jacobian(model: MlpModel, X: np.ndarray, t: np.ndarray | None = None) -> np.ndarray:
    """Residual Jacobian: row i is d(t_i - y_i)/d(theta).

    Targets do not enter the Jacobian; ``t`` is accepted for symmetry with
    :func:`gradient` and only length-checked.
    """
    X = _check_batch(model.architecture, X)
    if t is not None:
        _targets(X, t)
    return _jacobian(model.architecture, model.params, X)


def _jacobian(arch: MlpArchitecture, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    return _backprop(arch, theta, X, -np.ones(X.shape[0]), per_sample=True)


# -------------------------------------------------------------- training


@dataclass(frozen=True)
class LmConfig:
    mu_init: float = 1e-3
    mu_increase: float = 10.0
    mu_decrease: float = 0.1
    mu_max: float = 1e10


@dataclass(frozen=True)
class ScgConfig:
    sigma_scale: float = 5e-5
    lambda_init: float = 5e-7


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 200
    loss_tolerance: float = 1e-14
    grad_tolerance: float = 1e-12
    seed: int = 0
    lm: LmConfig = field(default_factory=LmConfig)
    scg: ScgConfig = field(default_factory=ScgConfig)
    # early stopping on validation loss; only used when validation data is given
    patience: int | None = None

    def __post_init__(self) -> None:
        if self.max_epochs < 1:
            raise InvalidParams("max_epochs must be >= 1")
        if self.loss_tolerance < 0 or self.grad_tolerance < 0:
            raise InvalidParams("tolerances must be >= 0")
        lm = self.lm
        if not (lm.mu_init > 0 and lm.mu_max > 0 and lm.mu_increase > 1.0 > lm.mu_decrease > 0.0):
            raise InvalidParams("LM schedule needs mu_init, mu_max > 0 and mu_increase > 1 > mu_decrease > 0")
        if not (self.scg.sigma_scale > 0 and self.scg.lambda_init > 0):
            raise InvalidParams("SCG sigma_scale and lambda_init must be > 0")
        if self.patience is not None and self.patience < 1:
            raise InvalidParams("patience must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_epochs": self.max_epochs, "loss_tolerance": self.loss_tolerance,
            "grad_tolerance": self.grad_tolerance, "seed": self.seed, "patience": self.patience,
            "lm": vars(self.lm).copy(), "scg": vars(self.scg).copy(),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "TrainConfig":
        doc = dict(doc)
        lm = LmConfig(**doc.pop("lm", {}))
        scg = ScgConfig(**doc.pop("scg", {}))
        return cls(lm=lm, scg=scg, **doc)


@dataclass
class TrainReport:
    # entry 0 is the starting loss, then one entry per completed epoch
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    termination: str = ""
    epochs: int = 0
    param_norm: float = 0.0
    # set by callers that know the target scale
    train_rmse: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"train_loss": self.train_loss, "val_loss": self.val_loss, "termination": self.termination,
                "epochs": self.epochs, "param_norm": self.param_norm, "train_rmse": self.train_rmse}


def init_weights(arch: MlpArchitecture, seed: int, scaler: Scaler | None = None) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    pieces = []
    for n_out, n_in in arch.shapes:
        r = math.sqrt(6.0 / (n_in + n_out))
        pieces.append(rng.uniform(-r, r, size=n_out * n_in))
        pieces.append(np.zeros(n_out))
    return MlpModel(arch, np.concatenate(pieces), scaler)


class _EarlyStop:
    """Tracks validation loss and remembers the best parameters seen."""

    def __init__(self, arch, validation, patience):
        self.active = validation is not None and patience is not None
        self.arch = arch
        self.patience = patience
        if validation is not None:
            Xv, tv = validation
            self.Xv = _check_batch(arch, Xv)
            self.tv = _targets(self.Xv, tv)
        else:
            self.Xv = None
        self.best = math.inf
        self.best_theta = None
        self.bad = 0

    def observe(self, theta: np.ndarray, report: TrainReport) -> bool:
        """Record validation loss; True when training should stop."""
        if self.Xv is None:
            return False
        v = _loss(self.arch, theta, self.Xv, self.tv)
        report.val_loss.append(v)
        if v < self.best:
            self.best, self.best_theta, self.bad = v, theta.copy(), 0
            return False
        self.bad += 1
        return self.active and self.bad >= self.patience

    def final(self, theta: np.ndarray) -> np.ndarray:
        return self.best_theta if self.active and self.best_theta is not None else theta


def lm_step(J: np.ndarray, r: np.ndarray, mu: float) -> np.ndarray:
    """Parameter increment ``-(J^T J + mu I)^-1 J^T r``."""
    A = J.T @ J
    A[np.diag_indices_from(A)] += mu
    return -np.linalg.solve(A, J.T @ r)


def train_lm(model: MlpModel, X: np.ndarray, t: np.ndarray, config: TrainConfig = TrainConfig(),
             validation: tuple[np.ndarray, np.ndarray] | None = None) -> tuple[MlpModel, TrainReport]:
    """Levenberg-Marquardt with the classical multiplicative damping schedule.

    Every accepted step strictly lowers the training loss; a step that does
    not is rejected and the damping raised until one does or ``mu_max`` is
    exceeded.
    """
    arch = model.architecture
    X = _check_batch(arch, X)
    t = _targets(X, t)
    lm = config.lm
    theta = model.params.copy()
    r = t - _forward_layers(arch, theta, X)[-1][:, 0]
    current = 0.5 * float(np.mean(r * r))
    if not math.isfinite(current):
        raise NonFiniteLoss("initial training loss is not finite")
    report = TrainReport(train_loss=[current])
    stopper = _EarlyStop(arch, validation, config.patience)
    stopper.observe(theta, report)
    mu = lm.mu_init
    eye = np.eye(arch.n_params)
    reason = "max_epochs"
    while report.epochs < config.max_epochs:
        if current <= config.loss_tolerance:
            reason = "tolerance"
            break
        J = _jacobian(arch, theta, X)
        g = J.T @ r
        if np.linalg.norm(g) / X.shape[0] <= config.grad_tolerance:
            reason = "gradient"
            break
        JtJ = J.T @ J
        accepted = False
        solved = False
        while mu <= lm.mu_max:
            try:
                step = np.linalg.solve(JtJ + mu * eye, g)
            except np.linalg.LinAlgError:
                mu *= lm.mu_increase
                continue
            solved = True
            trial = theta - step
            r_trial = t - _forward_layers(arch, trial, X)[-1][:, 0]
            trial_loss = 0.5 * float(np.mean(r_trial * r_trial))
            if math.isfinite(trial_loss) and trial_loss < current:
                theta, r, current = trial, r_trial, trial_loss
                mu *= lm.mu_decrease
                accepted = True
                break
            mu *= lm.mu_increase
        if not accepted:
            if not solved:
                raise SingularNormalMatrix(f"damped normal matrix stayed singular up to mu={lm.mu_max:g}")
            reason = "mu_max"
            break
        report.epochs += 1
        report.train_loss.append(current)
        if stopper.observe(theta, report):
            reason = "early_stop"
            break
    theta = stopper.final(theta)
    report.termination = reason
    report.param_norm = float(np.linalg.norm(theta))
    return model.with_params(theta), report


def train_scg(model: MlpModel, X: np.ndarray, t: np.ndarray, config: TrainConfig = TrainConfig(),
              validation: tuple[np.ndarray, np.ndarray] | None = None) -> tuple[MlpModel, TrainReport]:
    """Moller's scaled conjugate gradient.

    Curvature along the search direction comes from a finite difference of
    the gradient; the scale parameter lambda stands in for a line search.
    The training loss never increases because only steps with a
    non-negative comparison ratio are taken.
    """
    arch = model.architecture
    X = _check_batch(arch, X)
    t = _targets(X, t)
    sigma = config.scg.sigma_scale
    n_w = arch.n_params

    def E(w: np.ndarray) -> float:
        return _loss(arch, w, X, t)

    def dE(w: np.ndarray) -> np.ndarray:
        return _gradient(arch, w, X, t)

    w = model.params.copy()
    current = E(w)
    if not math.isfinite(current):
        raise NonFiniteLoss("initial training loss is not finite")
    grad = dE(w)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteLoss("initial gradient is not finite")
    report = TrainReport(train_loss=[current])
    stopper = _EarlyStop(arch, validation, config.patience)
    stopper.observe(w, report)

    r = -grad
    p = r.copy()
    lam = config.scg.lambda_init
    lam_bar = 0.0
    success = True
    delta = 0.0
    k = 1
    reason = "max_epochs"
    while report.epochs < config.max_epochs:
        if current <= config.loss_tolerance:
            reason = "tolerance"
            break
        if np.linalg.norm(r) <= config.grad_tolerance:
            reason = "gradient"
            break
        p_sq = float(p @ p)
        if success:
            sigma_k = sigma / math.sqrt(p_sq)
            s = (dE(w + sigma_k * p) - dE(w)) / sigma_k
            delta = float(p @ s)
        delta += (lam - lam_bar) * p_sq
        if delta <= 0.0:
            lam_bar = 2.0 * (lam - delta / p_sq)
            delta = -delta + lam * p_sq
            lam = lam_bar
        mu = float(p @ r)
        alpha = mu / delta
        w_new = w + alpha * p
        new_loss = E(w_new)
        comparison = 2.0 * delta * (current - new_loss) / (mu * mu) if math.isfinite(new_loss) else -1.0
        if comparison >= 0.0:
            w, current = w_new, new_loss
            r_new = -dE(w)
            if not np.all(np.isfinite(r_new)):
                raise NonFiniteLoss("gradient became non-finite")
            lam_bar = 0.0
            success = True
            if k % n_w == 0:
                p = r_new.copy()
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            r = r_new
            if comparison >= 0.75:
                lam *= 0.25
        else:
            lam_bar = lam
            success = False
        if comparison < 0.25:
            lam += delta * (1.0 - comparison) / p_sq
        k += 1
        report.epochs += 1
        report.train_loss.append(current)
        if success and stopper.observe(w, report):
            reason = "early_stop"
            break
    w = stopper.final(w)
    report.termination = reason
    report.param_norm = float(np.linalg.norm(w))
    return model.with_params(w), report


Trainer = Callable[..., tuple[MlpModel, TrainReport]]
TRAINERS: dict[str, Trainer] = {"lm": train_lm, "scg": train_scg}


def parse_hidden(text: str | Sequence[int]) -> tuple[int, ...]:
    if isinstance(text, str):
        return tuple(int(x) for x in text.split(",") if x.strip())
    return tuple(int(x) for x in text)
