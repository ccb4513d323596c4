import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from road_inspect.errors import InvalidParams, LengthMismatch, NonFiniteInput, SingularSystem
from road_inspect.metaheuristics import GaConfig, IcaConfig
from road_inspect.rbf import (
    DEFAULT_CENTERS,
    DEFAULT_SPREAD,
    RbfModel,
    RbfTrainConfig,
    decode_genome,
    design_matrix,
    encode_genome,
    rbf_forward,
    solve_output_weights,
    train_rbf,
)


def _random_model(seed, k=4, n_in=7):
    rng = np.random.default_rng(seed)
    return RbfModel(rng.uniform(-1, 1, (k, n_in)), float(rng.uniform(0.1, 1.5)), rng.normal(size=k),
                    float(rng.normal()))


# ---------------------------------------------------------------- model


def test_defaults():
    assert (DEFAULT_CENTERS, DEFAULT_SPREAD) == (55, 0.37)
    cfg = RbfTrainConfig()
    assert (cfg.n_centers, cfg.spread) == (55, 0.37)
    assert RbfTrainConfig.from_dict(cfg.to_dict()) == cfg


def test_model_invariants():
    with pytest.raises(InvalidParams):
        RbfModel(np.zeros((1, 7)), 0.0, [1.0])
    with pytest.raises(LengthMismatch):
        RbfModel(np.zeros((2, 7)), 0.3, [1.0])
    with pytest.raises(NonFiniteInput):
        RbfModel(np.zeros((1, 7)), 0.3, [np.nan])


def test_center_at_input_gives_weight():
    x = np.array([0.1, -0.2, 0.3, 0.0, 0.5, -0.9, 1.0])
    assert rbf_forward(RbfModel(x[None, :], 0.37, [5.0]), x) == 5.0


def test_zero_weights_give_bias():
    X = np.random.default_rng(0).uniform(-1, 1, (9, 7))
    m = RbfModel(np.random.default_rng(1).uniform(-1, 1, (4, 7)), 0.37, np.zeros(4), -0.25)
    assert np.all(rbf_forward(m, X) == -0.25)


def test_two_center_hand_fixture():
    # distances 0.5 and 1.0 from the origin, spread 1:
    # exp(-0.25) + 2 exp(-1) - 0.5 = 0.7788007831 + 0.7357588823 - 0.5
    centers = np.zeros((2, 7))
    centers[0, :2] = (0.3, 0.4)
    centers[1, :2] = (0.6, 0.8)
    m = RbfModel(centers, 1.0, [1.0, 2.0], -0.5)
    assert rbf_forward(m, np.zeros(7)) == pytest.approx(1.0145596654, abs=1e-10)


def test_forward_rejects_bad_input():
    m = _random_model(0)
    with pytest.raises(NonFiniteInput):
        rbf_forward(m, np.full(7, np.inf))
    with pytest.raises(LengthMismatch):
        rbf_forward(m, np.zeros(6))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_permuting_coordinates_is_invisible(seed):
    m = _random_model(seed)
    rng = np.random.default_rng(seed + 1)
    X = rng.uniform(-1, 1, (5, 7))
    perm = rng.permutation(7)
    mp = RbfModel(m.centers[:, perm], m.spread, m.weights, m.bias)
    assert np.allclose(rbf_forward(mp, X[:, perm]), rbf_forward(m, X), rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(-50, 50), min_size=7, max_size=7))
def test_output_is_bounded_by_weight_mass(seed, x):
    m = _random_model(seed)
    assert abs(rbf_forward(m, np.array(x)) - m.bias) <= np.sum(np.abs(m.weights)) + 1e-12


# ---------------------------------------------------------------- solve


@pytest.mark.parametrize("n", [5, 20, 55])
def test_exact_interpolation_at_training_points(n):
    rng = np.random.default_rng(n)
    X = rng.uniform(-1, 1, (n, 7))
    t = rng.uniform(-1, 1, n)
    w, b = solve_output_weights(X, 0.37, X, t, ridge=0.0)
    r = t - (design_matrix(X, X, 0.37) @ w + b)
    assert np.max(np.abs(r)) <= 1e-8


def test_constant_targets():
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, (30, 7))
    centers = rng.uniform(-1, 1, (6, 7))
    w, b = solve_output_weights(centers, 0.5, X, np.full(30, 0.42))
    pred = design_matrix(X, centers, 0.5) @ w + b
    assert np.max(np.abs(pred - 0.42)) <= 1e-10


def test_huge_ridge_shrinks_weights():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, (40, 7))
    t = rng.uniform(-1, 1, 40)
    w, b = solve_output_weights(rng.uniform(-1, 1, (8, 7)), 0.8, X, t, ridge=1e12)
    assert np.linalg.norm(w) <= 1e-4
    assert b == pytest.approx(np.mean(t), abs=1e-4)


def test_rank_deficient_without_ridge():
    X = np.random.default_rng(4).uniform(-1, 1, (10, 7))
    centers = np.vstack([X[:2], X[:2]])  # duplicated centers
    with pytest.raises(SingularSystem):
        solve_output_weights(centers, 0.5, X, np.arange(10.0), ridge=0.0)
    solve_output_weights(centers, 0.5, X, np.arange(10.0), ridge=1e-8)


def _objective(Phi, t, w, b, lam):
    r = t - Phi @ w - b
    return float(r @ r + lam * (w @ w))


@pytest.mark.parametrize("seed", range(10))
def test_solved_weights_are_optimal(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (50, 7))
    t = rng.uniform(-1, 1, 50)
    centers, lam = rng.uniform(-1, 1, (6, 7)), 1e-3
    w, b = solve_output_weights(centers, 0.9, X, t, ridge=lam)
    Phi = design_matrix(X, centers, 0.9)
    base = _objective(Phi, t, w, b, lam)
    for _ in range(50):
        d = rng.normal(size=7)
        d *= 1e-4 / np.linalg.norm(d)
        assert _objective(Phi, t, w + d[:6], b + d[6], lam) >= base


def test_solve_validation():
    with pytest.raises(InvalidParams):
        solve_output_weights(np.zeros((1, 7)), 0.3, np.zeros((0, 7)), np.zeros(0))
    with pytest.raises(LengthMismatch):
        solve_output_weights(np.zeros((1, 7)), 0.3, np.zeros((3, 7)), np.zeros(2))
    with pytest.raises(InvalidParams):
        solve_output_weights(np.zeros((1, 7)), 0.3, np.zeros((3, 7)), np.zeros(3), ridge=-1)


# ---------------------------------------------------------------- genome


@pytest.mark.parametrize("k", [1, 3, 55])
def test_genome_round_trip(k):
    m = _random_model(k, k=k)
    g = encode_genome(m)
    assert g.shape == (7 * k + 1,)
    centers, spread = decode_genome(g, k)
    assert np.array_equal(centers, m.centers)
    assert spread == pytest.approx(m.spread, rel=1e-15)


def test_genome_coordinates_map_one_to_one():
    m = _random_model(5, k=3)
    g = encode_genome(m)
    for i in range(g.size):
        h = g.copy()
        h[i] += 0.1
        centers, spread = decode_genome(h, 3)
        changed = np.count_nonzero(centers != m.centers) + (not math.isclose(spread, m.spread, rel_tol=1e-15))
        assert changed == 1


def test_genome_length_checked():
    with pytest.raises(LengthMismatch):
        decode_genome(np.zeros(7 * 3), 3)


# ---------------------------------------------------------------- training


def _small_problem(seed=0, n=40):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 7))
    return X, np.tanh(X[:, 0] - X[:, 6])


def _fitness(X, t, centers, spread, ridge):
    w, b = solve_output_weights(centers, spread, X, t, ridge)
    r = t - (design_matrix(X, centers, spread) @ w + b)
    return float(np.mean(r * r))


@pytest.mark.parametrize("optimizer", ["ga", "ica"])
def test_one_generation_budget_returns_best_initial(optimizer):
    X, t = _small_problem()
    k, seed = 3, 11
    cfg = RbfTrainConfig(n_centers=k, seed=seed, init_from_data=False,
                         ga=GaConfig(generations=1, population_size=12, elitism_count=1),
                         ica=IcaConfig(max_decades=1, n_countries=12, n_imperialists=3))
    model, trace = train_rbf(X, t, optimizer, cfg)
    # the initial population is a plain uniform draw from the seeded generator
    pop = np.random.default_rng(seed).uniform(-1, 1, size=(12, 7 * k))
    costs = [_fitness(X, t, g.reshape(k, 7), cfg.spread, cfg.ridge) for g in pop]
    assert len(trace.best_costs) == 1
    assert trace.best_cost == min(costs)
    assert np.array_equal(model.centers, pop[int(np.argmin(costs))].reshape(k, 7))


@pytest.mark.parametrize("optimizer", ["ga", "ica"])
def test_training_is_deterministic_and_monotone(optimizer):
    X, t = _small_problem(1)
    cfg = RbfTrainConfig(n_centers=5, seed=3, ga=GaConfig(generations=15, mutation_decay=2.0),
                         ica=IcaConfig(max_decades=15))
    (m1, tr1), (m2, tr2) = (train_rbf(X, t, optimizer, cfg) for _ in range(2))
    assert np.array_equal(m1.centers, m2.centers) and np.array_equal(m1.weights, m2.weights)
    assert tr1.best_costs == tr2.best_costs
    assert all(b <= a for a, b in zip(tr1.best_costs, tr1.best_costs[1:]))
    mse = float(np.mean((rbf_forward(m1, X) - t) ** 2))
    assert mse == pytest.approx(tr1.best_cost, rel=1e-12, abs=1e-15)


def test_fit_spread_searches_log_spread():
    X, t = _small_problem(2)
    cfg = RbfTrainConfig(n_centers=4, fit_spread=True, spread_bounds=(0.2, 1.5), seed=0,
                         ga=GaConfig(generations=10))
    model, _ = train_rbf(X, t, "ga", cfg)
    assert 0.2 <= model.spread <= 1.5


def test_unknown_optimizer():
    X, t = _small_problem()
    with pytest.raises(InvalidParams):
        train_rbf(X, t, "pso", RbfTrainConfig(n_centers=2))
