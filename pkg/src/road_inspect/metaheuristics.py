"""Box-bounded black-box minimizers: a real-coded GA and the imperialist
competitive algorithm (ICA), plus the sphere/Rastrigin/Rosenbrock harness
used to calibrate them.

Both optimizers are deterministic for a given seed: fitness is evaluated in
candidate-index order and all randomness comes from one
``numpy.random.Generator``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidParams, NonFiniteFitness

Fitness = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class ObjectiveSpec:
    dimension: int
    lower: np.ndarray
    upper: np.ndarray
    fitness: Fitness

    def __post_init__(self) -> None:
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dimension,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dimension,)).copy()
        if self.dimension < 1:
            raise InvalidParams("dimension must be >= 1")
        if not np.all(lo < hi):
            raise InvalidParams("every lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dimension))


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    generations: int = 200
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_scale: float = 0.1  # Gaussian sd as a fraction of each coordinate's range
    tournament_size: int = 3
    elitism_count: int = 2
    seed: int = 0
    # mutation sd shrinks as (1 - progress) ** mutation_decay; 0 keeps it fixed
    mutation_decay: float = 0.0
    stagnation_generations: int = 50
    stagnation_tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise InvalidParams("population_size must be >= 2")
        if self.generations < 1:
            raise InvalidParams("generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidParams(f"{name} must lie in [0, 1]")
        if self.mutation_scale < 0:
            raise InvalidParams("mutation_scale must be >= 0")
        if self.mutation_decay < 0:
            raise InvalidParams("mutation_decay must be >= 0")
        if self.tournament_size < 1:
            raise InvalidParams("tournament_size must be >= 1")
        if not 0 <= self.elitism_count < self.population_size:
            raise InvalidParams("elitism_count must satisfy 0 <= elitism_count < population_size")
        if self.stagnation_generations < 1:
            raise InvalidParams("stagnation_generations must be >= 1")


@dataclass(frozen=True)
class IcaConfig:
    n_countries: int = 50
    n_imperialists: int = 8
    max_decades: int = 200
    assimilation_beta: float = 2.0
    revolution_rate: float = 0.1
    colony_mean_weight: float = 0.1  # xi: weight of the mean colony cost in empire cost
    seed: int = 0
    stagnation_decades: int = 50
    stagnation_tol: float = 1e-12
    stop_on_unification: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.n_imperialists < self.n_countries:
            raise InvalidParams("need 1 <= n_imperialists < n_countries")
        if self.max_decades < 1:
            raise InvalidParams("max_decades must be >= 1")
        if not self.assimilation_beta > 1.0:
            raise InvalidParams("assimilation_beta must be > 1")
        if not 0.0 <= self.revolution_rate <= 1.0:
            raise InvalidParams("revolution_rate must lie in [0, 1]")
        if not 0.0 <= self.colony_mean_weight <= 1.0:
            raise InvalidParams("colony_mean_weight must lie in [0, 1]")
        if self.stagnation_decades < 1:
            raise InvalidParams("stagnation_decades must be >= 1")


@dataclass
class OptimizationTrace:
    """Best-ever cost after each generation/decade (entry 0 is the initial population)."""

    best_costs: list[float] = field(default_factory=list)
    best_x: np.ndarray | None = None
    evaluations: int = 0
    termination: str = ""
    n_empires: list[int] = field(default_factory=list)

    @property
    def best_cost(self) -> float:
        return self.best_costs[-1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "best_costs": self.best_costs,
            "best_x": None if self.best_x is None else self.best_x.tolist(),
            "evaluations": self.evaluations,
            "termination": self.termination,
            "n_empires": self.n_empires,
        }


def _evaluate(spec: ObjectiveSpec, X: np.ndarray) -> np.ndarray:
    costs = np.empty(X.shape[0])
    for i, x in enumerate(X):
        c = float(spec.fitness(x))
        if not math.isfinite(c):
            raise NonFiniteFitness(f"fitness returned {c} for candidate {i}")
        costs[i] = c
    return costs


def _initial_population(spec: ObjectiveSpec, rng: np.random.Generator, n: int,
                        initial: np.ndarray | None) -> np.ndarray:
    pop = spec.uniform(rng, n)
    if initial is not None:
        seeds = np.atleast_2d(np.asarray(initial, dtype=float))[:n]
        if seeds.shape[1] != spec.dimension:
            raise InvalidParams(f"initial candidates have dimension {seeds.shape[1]}, expected {spec.dimension}")
        pop[: len(seeds)] = spec.clip(seeds)
    return pop


class _Stagnation:
    def __init__(self, limit: int, tol: float):
        self.limit, self.tol = limit, tol
        self.ref = math.inf
        self.count = 0

    def update(self, best: float) -> bool:
        if best < self.ref - self.tol:
            self.ref, self.count = best, 0
        else:
            self.count += 1
        return self.count >= self.limit


# ---------------------------------------------------------------- GA


def ga_optimize(spec: ObjectiveSpec, config: GaConfig = GaConfig(),
                initial: np.ndarray | None = None) -> OptimizationTrace:
    """Genetic algorithm: tournament selection, arithmetic crossover,
    clipped Gaussian mutation and elitism.

    ``config.generations`` counts populations, the random initial one
    included. ``initial`` optionally seeds the first rows of the initial
    population.
    """
    rng = np.random.default_rng(config.seed)
    P, E, d = config.population_size, config.elitism_count, spec.dimension
    sd = config.mutation_scale * (spec.upper - spec.lower)

    pop = _initial_population(spec, rng, P, initial)
    costs = _evaluate(spec, pop)
    trace = OptimizationTrace(evaluations=P)
    best_i = int(np.argmin(costs))
    best_x, best_c = pop[best_i].copy(), float(costs[best_i])
    trace.best_costs.append(best_c)
    stagnation = _Stagnation(config.stagnation_generations, config.stagnation_tol)
    stagnation.update(best_c)

    def tournament() -> np.ndarray:
        picks = rng.integers(0, P, size=config.tournament_size)
        return pop[picks[np.argmin(costs[picks])]]

    trace.termination = "generations"
    for gen in range(1, config.generations):
        sd_gen = sd * (1.0 - (gen - 1) / config.generations) ** config.mutation_decay
        order = np.argsort(costs, kind="stable")
        n_children = P - E
        children = np.empty((n_children, d))
        filled = 0
        while filled < n_children:
            a, b = tournament(), tournament()
            if rng.random() < config.crossover_rate:
                u = rng.random()
                pair = (u * a + (1.0 - u) * b, (1.0 - u) * a + u * b)
            else:
                pair = (a.copy(), b.copy())
            for child in pair:
                if filled == n_children:
                    break
                mask = rng.random(d) < config.mutation_rate
                child = child + mask * rng.normal(0.0, 1.0, d) * sd_gen
                children[filled] = spec.clip(child)
                filled += 1
        child_costs = _evaluate(spec, children)
        trace.evaluations += n_children
        pop = np.vstack([pop[order[:E]], children])
        costs = np.concatenate([costs[order[:E]], child_costs])
        i = int(np.argmin(costs))
        if costs[i] < best_c:
            best_x, best_c = pop[i].copy(), float(costs[i])
        trace.best_costs.append(best_c)
        if stagnation.update(best_c):
            trace.termination = "stagnation"
            break
    trace.best_x = best_x
    return trace


# --------------------------------------------------------------- ICA


@dataclass
class IcaState:
    """Snapshot handed to the per-decade callback.

    ``owner[i]`` is the empire index of country ``i``; ``imperialists[e]`` is
    the country ruling empire ``e``.
    """

    decade: int
    positions: np.ndarray
    costs: np.ndarray
    owner: np.ndarray
    imperialists: list[int]
    total_costs: np.ndarray
    powers: np.ndarray | None = None


def empire_total_costs(costs: np.ndarray, owner: np.ndarray, imperialists: Sequence[int], xi: float) -> np.ndarray:
    """Imperialist cost plus ``xi`` times the mean colony cost, per empire."""
    totals = np.empty(len(imperialists))
    for e, imp in enumerate(imperialists):
        members = np.flatnonzero(owner == e)
        colonies = members[members != imp]
        totals[e] = costs[imp] + (xi * float(np.mean(costs[colonies])) if colonies.size else 0.0)
    return totals


def empire_powers(total_costs: np.ndarray) -> np.ndarray:
    """Normalized possession probabilities from empire total costs.

    The weakest empire gets power zero; equal costs give equal powers.
    """
    tc = np.asarray(total_costs, dtype=float)
    normalized = tc - tc.max()
    s = normalized.sum()
    if s == 0.0:
        return np.full(tc.size, 1.0 / tc.size)
    p = np.abs(normalized / s)
    return p / p.sum()


def allocate_colonies(imperialist_costs: np.ndarray, n_colonies: int) -> np.ndarray:
    """Colony counts per empire, proportional to power, at least one each
    while colonies last (largest-remainder rounding)."""
    k = len(imperialist_costs)
    power = empire_powers(imperialist_costs)
    counts = np.zeros(k, dtype=int)
    base = min(n_colonies, k)
    order = np.argsort(-power, kind="stable")
    counts[order[:base]] = 1
    rest = n_colonies - base
    if rest:
        share = power * rest
        whole = np.floor(share).astype(int)
        counts += whole
        left = rest - int(whole.sum())
        frac_order = np.argsort(-(share - whole), kind="stable")
        counts[frac_order[:left]] += 1
    return counts


def exchange(costs: np.ndarray, owner: np.ndarray, imperialists: list[int]) -> list[int]:
    """Promote any colony that beats its imperialist (best colony per empire)."""
    new = list(imperialists)
    for e, imp in enumerate(imperialists):
        members = np.flatnonzero(owner == e)
        best = int(members[np.argmin(costs[members])])
        if costs[best] < costs[imp]:
            new[e] = best
    return new


def ica_optimize(spec: ObjectiveSpec, config: IcaConfig = IcaConfig(), initial: np.ndarray | None = None,
                 callback: Callable[[IcaState], None] | None = None) -> OptimizationTrace:
    """Imperialist competitive algorithm with straight-line assimilation.

    ``config.max_decades`` counts decades, the founding one (initial
    empires) included, so a budget of 1 returns the best initial country.
    """
    rng = np.random.default_rng(config.seed)
    n, xi = config.n_countries, config.colony_mean_weight

    pos = _initial_population(spec, rng, n, initial)
    costs = _evaluate(spec, pos)
    trace = OptimizationTrace(evaluations=n)

    # founding: best countries become imperialists
    order = np.argsort(costs, kind="stable")
    imperialists = [int(i) for i in order[: config.n_imperialists]]
    colonies = order[config.n_imperialists:]
    counts = allocate_colonies(costs[imperialists], len(colonies))
    owner = np.empty(n, dtype=int)
    for e, imp in enumerate(imperialists):
        owner[imp] = e
    shuffled = rng.permutation(colonies)
    start = 0
    for e, c in enumerate(counts):
        owner[shuffled[start:start + c]] = e
        start += c

    best_i = int(np.argmin(costs))
    best_x, best_c = pos[best_i].copy(), float(costs[best_i])
    trace.best_costs.append(best_c)
    trace.n_empires.append(len(imperialists))
    stagnation = _Stagnation(config.stagnation_decades, config.stagnation_tol)
    stagnation.update(best_c)
    if callback is not None:
        totals = empire_total_costs(costs, owner, imperialists, xi)
        callback(IcaState(0, pos.copy(), costs.copy(), owner.copy(), list(imperialists), totals))

    trace.termination = "max_decades"
    for decade in range(1, config.max_decades):
        is_imp = np.zeros(n, dtype=bool)
        is_imp[imperialists] = True
        col_idx = np.flatnonzero(~is_imp)

        # assimilation: move a uniform fraction in [0, beta] of the way to the imperialist
        targets = pos[np.asarray(imperialists)[owner[col_idx]]]
        step = rng.uniform(0.0, config.assimilation_beta, size=col_idx.size)
        pos[col_idx] = spec.clip(pos[col_idx] + step[:, None] * (targets - pos[col_idx]))

        # revolution: re-draw a fixed fraction of all colonies
        n_rev = int(math.floor(config.revolution_rate * col_idx.size + 0.5))
        if n_rev:
            revolt = np.sort(rng.choice(col_idx, size=n_rev, replace=False))
            pos[revolt] = spec.uniform(rng, n_rev)

        costs[col_idx] = _evaluate(spec, pos[col_idx])
        trace.evaluations += col_idx.size

        imperialists = exchange(costs, owner, imperialists)
        totals = empire_total_costs(costs, owner, imperialists, xi)
        powers = None

        if len(imperialists) > 1:
            powers = empire_powers(totals)
            weakest = int(np.argmax(totals))
            members = np.flatnonzero(owner == weakest)
            weak_colonies = members[members != imperialists[weakest]]
            if weak_colonies.size:
                victim = int(weak_colonies[np.argmax(costs[weak_colonies])])
                owner[victim] = int(rng.choice(len(imperialists), p=powers))
            # empires left without colonies collapse into a roulette-chosen rival
            for e in range(len(imperialists) - 1, -1, -1):
                if len(imperialists) == 1:
                    break
                if np.count_nonzero(owner == e) > 1:
                    continue
                rivals = [j for j in range(len(imperialists)) if j != e]
                p = empire_powers(np.delete(totals, e))
                winner = rivals[int(rng.choice(len(rivals), p=p))]
                owner[imperialists[e]] = winner
                del imperialists[e]
                totals = np.delete(totals, e)
                owner[owner > e] -= 1
            totals = empire_total_costs(costs, owner, imperialists, xi)

        i = int(np.argmin(costs))
        if costs[i] < best_c:
            best_x, best_c = pos[i].copy(), float(costs[i])
        trace.best_costs.append(best_c)
        trace.n_empires.append(len(imperialists))
        if callback is not None:
            callback(IcaState(decade, pos.copy(), costs.copy(), owner.copy(), list(imperialists), totals, powers))
        if stagnation.update(best_c):
            trace.termination = "stagnation"
            break
        if config.stop_on_unification and len(imperialists) == 1:
            trace.termination = "unification"
            break
    trace.best_x = best_x
    return trace


OPTIMIZERS = {"ga": ga_optimize, "ica": ica_optimize}


# ---------------------------------------------------------- benchmarks


def sphere(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * x))


def rastrigin(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


def rosenbrock(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


@dataclass(frozen=True)
class Benchmark:
    name: str
    fn: Fitness
    lower: float
    upper: float
    optimum: Callable[[int], np.ndarray]
    threshold: float = 1e-3

    def spec(self, dim: int) -> ObjectiveSpec:
        return ObjectiveSpec(dim, np.full(dim, self.lower), np.full(dim, self.upper), self.fn)


BENCHMARKS: dict[str, Benchmark] = {
    "sphere": Benchmark("sphere", sphere, -5.0, 5.0, lambda d: np.zeros(d)),
    "rastrigin": Benchmark("rastrigin", rastrigin, -5.12, 5.12, lambda d: np.zeros(d)),
    "rosenbrock": Benchmark("rosenbrock", rosenbrock, -2.048, 2.048, lambda d: np.ones(d)),
}


@dataclass(frozen=True)
class BenchmarkRow:
    optimizer: str
    function: str
    dim: int
    seed: int
    best_cost: float
    evaluations: int
    success: bool


def benchmark_suite(functions: Iterable[str] = ("sphere", "rastrigin", "rosenbrock"), dim: int = 5,
                    seeds: Iterable[int] = range(20), optimizers: Iterable[str] = ("ga", "ica"),
                    ga_config: GaConfig = GaConfig(), ica_config: IcaConfig = IcaConfig()) -> list[BenchmarkRow]:
    if dim < 1:
        raise InvalidParams("dim must be >= 1")
    rows = []
    for opt in optimizers:
        for fname in functions:
            bench = BENCHMARKS[fname]
            spec = bench.spec(dim)
            for seed in seeds:
                if opt == "ga":
                    trace = ga_optimize(spec, GaConfig(**{**asdict(ga_config), "seed": seed}))
                elif opt == "ica":
                    trace = ica_optimize(spec, IcaConfig(**{**asdict(ica_config), "seed": seed}))
                else:
                    raise InvalidParams(f"unknown optimizer {opt!r}")
                rows.append(BenchmarkRow(opt, fname, dim, seed, trace.best_cost, trace.evaluations,
                                         trace.best_cost <= bench.threshold))
    return rows


def success_rates(rows: Sequence[BenchmarkRow]) -> list[dict[str, Any]]:
    groups: dict[tuple[str, str, int], list[BenchmarkRow]] = {}
    for r in rows:
        groups.setdefault((r.optimizer, r.function, r.dim), []).append(r)
    out = []
    for (opt, fname, dim), rs in groups.items():
        costs = [r.best_cost for r in rs]
        out.append({
            "optimizer": opt, "function": fname, "dim": dim, "runs": len(rs),
            "successes": sum(r.success for r in rs), "success_rate": sum(r.success for r in rs) / len(rs),
            "threshold": BENCHMARKS[fname].threshold, "median_best_cost": float(np.median(costs)),
        })
    return out


def write_benchmark_csv(rows: Sequence[BenchmarkRow], path: str | Path) -> None:
    """Per-run rows followed by one ``summary`` row per (optimizer, function)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "optimizer", "function", "dim", "seed", "best_cost", "evaluations", "success", "success_rate"])
        for r in rows:
            w.writerow(["run", r.optimizer, r.function, r.dim, r.seed, repr(r.best_cost), r.evaluations, int(r.success), ""])
        for s in success_rates(rows):
            w.writerow(["summary", s["optimizer"], s["function"], s["dim"], "", repr(s["median_best_cost"]), "",
                        s["successes"], repr(s["success_rate"])])
