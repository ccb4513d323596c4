"""Gaussian radial basis function network with metaheuristic center search.

The network output is ``sum_j w_j * exp(-(||x - c_j|| / spread)**2) + bias``.
Training is hybrid: the GA or ICA searches over center positions (and,
optionally, the shared spread) while the output layer, being linear, is
solved exactly for every candidate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Literal

import numpy as np

from .dataset import N_GEOPHONES, Scaler
from .errors import InvalidParams, LengthMismatch, NonFiniteInput, SingularSystem
from .metaheuristics import GaConfig, IcaConfig, ObjectiveSpec, OptimizationTrace, ga_optimize, ica_optimize

DEFAULT_CENTERS = 55
DEFAULT_SPREAD = 0.37
DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True)
class RbfModel:
    centers: np.ndarray  # (n_centers, n_inputs)
    spread: float
    weights: np.ndarray  # (n_centers,)
    bias: float = 0.0
    scaler: Scaler | None = None

    def __post_init__(self) -> None:
        centers = np.array(self.centers, dtype=float, ndmin=2)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if centers.shape[0] < 1:
            raise InvalidParams("an RBF network needs at least one center")
        if weights.shape[0] != centers.shape[0]:
            raise LengthMismatch(f"{centers.shape[0]} centers but {weights.shape[0]} weights")
        if not (self.spread > 0 and math.isfinite(self.spread)):
            raise InvalidParams(f"spread must be positive and finite, got {self.spread}")
        if not (np.all(np.isfinite(centers)) and np.all(np.isfinite(weights)) and math.isfinite(self.bias)):
            raise NonFiniteInput("RBF parameters must be finite")
        centers.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "spread", float(self.spread))
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.centers.shape[1]

    def predict(self, X_raw: np.ndarray) -> np.ndarray:
        if self.scaler is None:
            raise InvalidParams("model has no scaler attached")
        return self.scaler.inverse_y(rbf_forward(self, self.scaler.transform_x(np.atleast_2d(X_raw))))


def design_matrix(X: np.ndarray, centers: np.ndarray, spread: float) -> np.ndarray:
    """Gaussian activations, shape (n_samples, n_centers)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sq = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.exp(-sq / (spread * spread))


def rbf_forward(model: RbfModel, X: np.ndarray) -> np.ndarray | float:
    single = np.ndim(X) == 1
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_inputs:
        raise LengthMismatch(f"expected {model.n_inputs} inputs, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("input contains NaN or inf")
    out = design_matrix(X, model.centers, model.spread) @ model.weights + model.bias
    return float(out[0]) if single else out


def solve_output_weights(centers: np.ndarray, spread: float, X: np.ndarray, t: np.ndarray,
                         ridge: float = DEFAULT_RIDGE) -> tuple[np.ndarray, float]:
    """Weights and bias minimizing ``||t - Phi w - b||^2 + ridge * ||w||^2``.

    The ridge-augmented least-squares system is solved by SVD, which gives
    the normal-equation minimizer without squaring the condition number.
    The bias is not penalized.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t = np.asarray(t, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise InvalidParams("training set is empty")
    if t.shape[0] != X.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} inputs but {t.shape[0]} targets")
    if ridge < 0:
        raise InvalidParams("ridge must be >= 0")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    Phi = design_matrix(X, centers, spread)
    A = np.column_stack([Phi, np.ones(X.shape[0])])
    k = centers.shape[0]
    if ridge > 0:
        reg = np.zeros((k, k + 1))
        reg[:, :k] = math.sqrt(ridge) * np.eye(k)
        A = np.vstack([A, reg])
        t = np.concatenate([t, np.zeros(k)])
    sol, _, rank, _ = np.linalg.lstsq(A, t, rcond=None)
    if ridge == 0 and rank < min(A.shape):
        raise SingularSystem(f"design matrix has rank {rank} < {min(A.shape)}; use ridge > 0")
    return sol[:k], float(sol[k])


# ------------------------------------------------------------- genomes


def encode_genome(model: RbfModel) -> np.ndarray:
    """Flattened centers followed by log(spread); output weights excluded."""
    return np.concatenate([model.centers.ravel(), [math.log(model.spread)]])


def decode_genome(genome: np.ndarray, n_centers: int, n_inputs: int = N_GEOPHONES) -> tuple[np.ndarray, float]:
    genome = np.asarray(genome, dtype=float)
    if genome.shape != (n_centers * n_inputs + 1,):
        raise LengthMismatch(f"genome length {genome.size} != {n_centers * n_inputs + 1}")
    return genome[:-1].reshape(n_centers, n_inputs).copy(), float(math.exp(genome[-1]))


# ------------------------------------------------------------ training


@dataclass(frozen=True)
class RbfTrainConfig:
    n_centers: int = DEFAULT_CENTERS
    spread: float = DEFAULT_SPREAD
    # search log(spread) too; otherwise the spread stays fixed at `spread`
    fit_spread: bool = False
    spread_bounds: tuple[float, float] = (0.05, 2.0)
    center_bounds: tuple[float, float] = (-1.0, 1.0)
    ridge: float = DEFAULT_RIDGE
    # seed the initial population with centers drawn from training inputs
    init_from_data: bool = True
    seed: int = 0
    # annealed mutation lets the GA refine centers once the population settles
    ga: GaConfig = field(default_factory=lambda: GaConfig(mutation_decay=2.0))
    ica: IcaConfig = field(default_factory=IcaConfig)

    def __post_init__(self) -> None:
        if self.n_centers < 1:
            raise InvalidParams("n_centers must be >= 1")
        if not self.spread > 0:
            raise InvalidParams("spread must be > 0")
        lo, hi = self.spread_bounds
        if not 0 < lo < hi:
            raise InvalidParams("spread_bounds must satisfy 0 < lo < hi")
        if not self.center_bounds[0] < self.center_bounds[1]:
            raise InvalidParams("center_bounds must satisfy lo < hi")
        if self.ridge < 0:
            raise InvalidParams("ridge must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["spread_bounds"] = list(self.spread_bounds)
        d["center_bounds"] = list(self.center_bounds)
        return d

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RbfTrainConfig":
        doc = dict(doc)
        ga = GaConfig(**{"mutation_decay": 2.0, **doc.pop("ga", {})})
        ica = IcaConfig(**doc.pop("ica", {}))
        doc["spread_bounds"] = tuple(doc.get("spread_bounds", (0.05, 2.0)))
        doc["center_bounds"] = tuple(doc.get("center_bounds", (-1.0, 1.0)))
        return cls(ga=ga, ica=ica, **doc)


def _initial_genomes(X: np.ndarray, config: RbfTrainConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    k = config.n_centers
    rows = []
    for _ in range(n):
        idx = rng.choice(X.shape[0], size=k, replace=k > X.shape[0])
        g = X[idx].ravel()
        if config.fit_spread:
            g = np.concatenate([g, [math.log(config.spread)]])
        rows.append(g)
    return np.array(rows)


def train_rbf(X: np.ndarray, t: np.ndarray, optimizer: Literal["ga", "ica"] = "ga",
              config: RbfTrainConfig = RbfTrainConfig(), scaler: Scaler | None = None
              ) -> tuple[RbfModel, OptimizationTrace]:
    """Fit an RBF network on scaled data; fitness is the training MSE after
    the exact output-layer solve."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t = np.asarray(t, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise InvalidParams("training set is empty")
    k, n_in = config.n_centers, X.shape[1]

    def split_genome(g: np.ndarray) -> tuple[np.ndarray, float]:
        centers = g[: k * n_in].reshape(k, n_in)
        spread = math.exp(g[-1]) if config.fit_spread else config.spread
        return centers, spread

    def fitness(g: np.ndarray) -> float:
        centers, spread = split_genome(g)
        w, b = solve_output_weights(centers, spread, X, t, config.ridge)
        r = t - (design_matrix(X, centers, spread) @ w + b)
        return float(np.mean(r * r))

    dim = k * n_in + (1 if config.fit_spread else 0)
    lower = np.full(dim, config.center_bounds[0])
    upper = np.full(dim, config.center_bounds[1])
    if config.fit_spread:
        lower[-1], upper[-1] = (math.log(s) for s in config.spread_bounds)
    spec = ObjectiveSpec(dim, lower, upper, fitness)

    if optimizer == "ga":
        opt_cfg = replace(config.ga, seed=config.seed)
        pop_size = opt_cfg.population_size
    elif optimizer == "ica":
        opt_cfg = replace(config.ica, seed=config.seed)
        pop_size = opt_cfg.n_countries
    else:
        raise InvalidParams(f"unknown optimizer {optimizer!r}; use 'ga' or 'ica'")
    initial = None
    if config.init_from_data:
        # independent stream so the optimizer's own draws are unaffected
        initial = _initial_genomes(X, config, pop_size, np.random.default_rng([config.seed, 1]))
    trace = ga_optimize(spec, opt_cfg, initial) if optimizer == "ga" else ica_optimize(spec, opt_cfg, initial)

    centers, spread = split_genome(trace.best_x)
    w, b = solve_output_weights(centers, spread, X, t, config.ridge)
    return RbfModel(centers, spread, w, b, scaler), trace
