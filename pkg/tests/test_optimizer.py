import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PUBLISHED_COMPROMISE, published_objectives, zdt_problem
from owfcontract.optimizer import (
    CONTRACT_BOUNDS,
    Bounds,
    ContractProblem,
    GAParams,
    compromise,
    contract_from_vector,
    crowding_distance,
    dominates,
    hypervolume_2d,
    non_dominated_sort,
    round_technicians,
    run_moga,
    scaling_context,
)
from owfcontract.simulator import RealizationBank


def brute_force_fronts(F):
    F = [tuple(p) for p in F]
    remaining = set(range(len(F)))
    fronts = []
    while remaining:
        front = sorted(i for i in remaining if not any(dominates(F[j], F[i]) for j in remaining if j != i))
        fronts.append(front)
        remaining -= set(front)
    return fronts


def test_dominates():
    assert dominates((0.1, -5), (0.2, -4))
    assert not dominates((0.1, -4), (0.2, -5))
    assert not dominates((0.1, -4), (0.1, -4))
    assert dominates((0.1, -4), (0.1, -3))


def test_sort_small_cases():
    assert non_dominated_sort([(0, 2), (1, 1), (2, 0)]) == [[0, 1, 2]]
    assert non_dominated_sort([(2, 2), (0, 0), (1, 1)]) == [[1], [2], [0]]
    assert non_dominated_sort([]) == []


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1), st.booleans())
def test_sort_matches_brute_force(n, seed, discrete):
    rng = np.random.default_rng(seed)
    F = rng.integers(0, 5, (n, 2)).astype(float) if discrete else rng.random((n, 2))
    got = [sorted(f) for f in non_dominated_sort(F)]
    assert got == brute_force_fronts(F)


def test_crowding_boundaries_infinite():
    d = crowding_distance(np.array([[0, 3], [1, 2], [2, 1], [3, 0]], dtype=float))
    assert np.isinf(d[0]) and np.isinf(d[3])
    assert d[1] == pytest.approx(d[2])


def test_hypervolume():
    assert hypervolume_2d([(0.5, 0.5)], (1, 1)) == pytest.approx(0.25)
    assert hypervolume_2d([(0, 1), (1, 0)], (2, 2)) == pytest.approx(3.0)
    assert hypervolume_2d([(3, 3)], (2, 2)) == 0.0
    # a dominated point adds nothing
    assert hypervolume_2d([(0.5, 0.5), (0.6, 0.6)], (1, 1)) == pytest.approx(0.25)


def test_compromise_examples():
    assert compromise([(0.3, -2.0)]) == 0
    assert compromise([(0, 1), (1, 0), (0.3, 0.3)]) == 2
    # exact tie between the two extremes goes to the smaller obj1
    assert compromise([(1, 0), (0, 1)]) == 1


def test_compromise_on_published_front():
    assert compromise(published_objectives()) == PUBLISHED_COMPROMISE


def test_compromise_empty():
    with pytest.raises(ValueError):
        compromise([])


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.01, 100), st.floats(-10, 10), st.floats(0.01, 1e8), st.floats(-1e8, 1e8), st.integers(0, 2**32 - 1)
)
def test_compromise_affine_invariant(a1, b1, a2, b2, seed):
    F = np.random.default_rng(seed).random((12, 2))
    base = compromise(F)
    G = np.column_stack([a1 * F[:, 0] + b1, a2 * F[:, 1] + b2])
    assert compromise(G) == base
    assert compromise(np.array(published_objectives()) * [a1, a2] + [b1, b2]) == PUBLISHED_COMPROMISE


def test_gaparams_validation():
    with pytest.raises(ValueError):
        GAParams(population=7)
    with pytest.raises(ValueError):
        GAParams(crossover_fraction=1.5)
    with pytest.raises(ValueError):
        GAParams(mutation="sometimes")


def test_mutation_off_single_vector():
    bounds = Bounds((0.0, 0.0), (1.0, 1.0))
    x0 = [[0.3, 0.7]] * 20
    res = run_moga(zdt_problem, bounds, GAParams(population=20, max_generations=15, mutation="off"), 4,
                   initial_population=x0)
    assert res.X.shape == (1, 2)
    assert np.allclose(res.X[0], [0.3, 0.7])


def test_one_generation_returns_initial_front():
    bounds = Bounds((0.0,) * 3, (1.0,) * 3)
    params = GAParams(population=40, max_generations=1)
    res = run_moga(zdt_problem, bounds, params, 9)
    F0 = res.final_objectives
    expected = {tuple(F0[i]) for i in non_dominated_sort(F0)[0]}
    assert {tuple(f) for f in res.F} == expected
    assert res.generations == 1 and len(res.history) == 1


def test_run_deterministic_and_in_bounds():
    bounds = Bounds((0.0,) * 3, (1.0,) * 3)
    params = GAParams(population=30, max_generations=25)
    a = run_moga(zdt_problem, bounds, params, 2)
    b = run_moga(zdt_problem, bounds, params, 2)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.F, b.F)
    assert np.all((a.final_population >= 0) & (a.final_population <= 1))
    for i in range(len(a.F)):
        for j in range(len(a.F)):
            assert not dominates(a.F[i], a.F[j])


def test_hypervolume_history_nondecreasing():
    bounds = Bounds((0.0,) * 4, (1.0,) * 4)
    res = run_moga(zdt_problem, bounds, GAParams(population=60, max_generations=60), 5)
    h = np.array(res.history)
    assert np.all(np.diff(h) >= -1e-3 * h[:-1])


def test_stall_stops_early():
    bounds = Bounds((0.0,), (1.0,))
    params = GAParams(population=20, max_generations=500, stall_generations=5, mutation="off")
    res = run_moga(lambda X: np.column_stack([X[:, 0], 1 - X[:, 0]]), bounds, params, 0,
                   initial_population=[[0.5]] * 20)
    assert res.stop_reason == "stall" and res.generations < 500


# -- contract problem -------------------------------------------------------------

def test_round_technicians_half_up():
    assert round_technicians(23.5) == 24
    assert round_technicians(23.49) == 23
    assert round_technicians(7.0) == 7


def test_contract_from_vector_ties(reference):
    c = contract_from_vector(reference.contract, (0.7, 0.8, 0.5, 22.42))
    assert (c.threshold_us, c.threshold_ld, c.cap_fraction, c.technicians) == (0.7, 0.8, 0.5, 22)
    assert c.cap_eur == pytest.approx(0.5 * reference.contract.fixed_fee)


@pytest.fixture(scope="module")
def problem(reference):
    bundle = reference.with_sim(samples=30)
    bank = RealizationBank(bundle, range(30))
    ctx = scaling_context(bank, bundle, Bounds((0.50, 0.60, 0.25, 14.0), (0.85, 0.95, 1.15, 18.0)))
    return ContractProblem(bundle, bank, ctx)


def test_evaluate_initial_terms(problem):
    F = problem(np.array([[0.85, 0.75, 0.35, 16.0]]))
    assert F.shape == (1, 2)
    assert 0.0 <= F[0, 0] <= 1.0 and np.isfinite(F[0, 1])
    assert np.array_equal(F, problem(np.array([[0.85, 0.75, 0.35, 16.0]])))


def test_cap_only_change_keeps_total(problem):
    # with these thresholds no transfer happens, so lambda cannot matter at all
    F = problem(np.array([[0.9999, 0.01, 0.25, 16.0], [0.9999, 0.01, 1.15, 16.0]]))
    assert F[0, 1] == F[1, 1]
    assert F[0, 0] == F[1, 0]


def test_total_profit_independent_of_transfers(problem):
    X = np.array([[0.5, 0.6, 0.25, 16.2], [0.85, 0.95, 1.15, 15.6], [0.7, 0.7, 0.7, 16.0]])
    F = problem(X)
    assert F[0, 1] == F[1, 1] == F[2, 1]


def test_contract_bounds():
    assert CONTRACT_BOUNDS.lower == (0.50, 0.60, 0.25, 7.0)
    assert CONTRACT_BOUNDS.upper == (0.85, 0.95, 1.15, 46.0)
