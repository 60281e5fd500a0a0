"""Elitist non-dominated sorting GA for the contract design problem.

Both objectives are minimized:

* ``obj1`` is the conflict of interest, ``|contractor_scaled - owner_scaled|``;
* ``obj2`` is the negated total profit of both parties.

Decision vectors are ``(r_us, r_ld, lambda, q)``. The technician gene is real
valued and rounded half up when a contract is built from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .model import Bundle, ContractTerms
from .simulator import RealizationBank, ScalingContext, ScenarioStats, stats_from_realizations

GENES = ("r_us", "r_ld", "lambda", "q")


# -- dominance ----------------------------------------------------------------

def dominates(p: Sequence[float], q: Sequence[float]) -> bool:
    """Pareto dominance for minimization."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return bool(np.all(p <= q) and np.any(p < q))


def non_dominated_sort(points) -> list[list[int]]:
    """Indices of successive non-dominated fronts, best front first."""
    F = np.asarray(points, dtype=float)
    n = F.shape[0]
    if n == 0:
        return []
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(count == 0)
    while current.size:
        fronts.append(current.tolist())
        count = count - dom[current].sum(axis=0)
        count[current] = -1
        current = np.flatnonzero(count == 0)
    return fronts


def crowding_distance(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    n, m = F.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        lo, hi = F[order[0], k], F[order[-1], k]
        dist[order[0]] = dist[order[-1]] = np.inf
        if hi == lo:
            continue
        dist[order[1:-1]] += (F[order[2:], k] - F[order[:-2], k]) / (hi - lo)
    return dist


def hypervolume_2d(points, ref: Sequence[float]) -> float:
    """Area dominated by ``points`` and bounded by ``ref`` (minimization)."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    P = P[(P[:, 0] < ref[0]) & (P[:, 1] < ref[1])]
    if P.size == 0:
        return 0.0
    P = P[np.lexsort((P[:, 1], P[:, 0]))]
    area = 0.0
    best_y = ref[1]
    for x, y in P:
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return float(area)


def rank_and_crowding(F) -> tuple[np.ndarray, np.ndarray]:
    F = np.asarray(F, dtype=float)
    rank = np.empty(len(F), dtype=int)
    crowd = np.empty(len(F))
    for r, front in enumerate(non_dominated_sort(F)):
        rank[front] = r
        crowd[front] = crowding_distance(F[front])
    return rank, crowd


# -- GA -----------------------------------------------------------------------

@dataclass(frozen=True)
class GAParams:
    population: int = 200
    crossover_fraction: float = 0.8
    max_generations: int = 800
    stall_generations: int = 100
    tolerance: float = 1e-4
    elite_fraction: float = 0.05
    mutation: str = "adaptive"  # or "off"
    eta_crossover: float = 15.0
    eta_mutation: float = 20.0

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be an even number >= 2")
        for name in ("crossover_fraction", "elite_fraction"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.max_generations < 1 or self.stall_generations < 1:
            raise ValueError("generation counts must be >= 1")
        if self.mutation not in ("adaptive", "off"):
            raise ValueError("mutation must be 'adaptive' or 'off'")


@dataclass(frozen=True)
class Bounds:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("invalid bounds")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    def clip(self, X) -> np.ndarray:
        return np.clip(X, self.lo, self.hi)


CONTRACT_BOUNDS = Bounds(lower=(0.50, 0.60, 0.25, 7.0), upper=(0.85, 0.95, 1.15, 46.0))


@dataclass
class MogaResult:
    X: np.ndarray
    F: np.ndarray
    generations: int
    stop_reason: str
    history: list[float] = field(default_factory=list)
    final_population: np.ndarray | None = None
    final_objectives: np.ndarray | None = None


def _sbx(p1, p2, lo, hi, eta, rng):
    """Bounded simulated binary crossover, each gene swapped with probability 1/2."""
    c1, c2 = p1.copy(), p2.copy()
    for k in range(len(p1)):
        if rng.random() > 0.5 or abs(p1[k] - p2[k]) < 1e-14:
            continue
        y1, y2 = min(p1[k], p2[k]), max(p1[k], p2[k])
        span = y2 - y1
        u = rng.random()
        out = []
        for beta in (1.0 + 2.0 * (y1 - lo[k]) / span, 1.0 + 2.0 * (hi[k] - y2) / span):
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                bq = (u * alpha) ** (1.0 / (eta + 1.0))
            else:
                bq = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
            out.append(bq)
        a = 0.5 * ((y1 + y2) - out[0] * span)
        b = 0.5 * ((y1 + y2) + out[1] * span)
        a, b = min(max(a, lo[k]), hi[k]), min(max(b, lo[k]), hi[k])
        if rng.random() < 0.5:
            a, b = b, a
        c1[k], c2[k] = a, b
    return c1, c2


def _polynomial_mutation(x, lo, hi, eta, rate, rng):
    """Bounded polynomial mutation; at least one gene always moves."""
    y = x.copy()
    n = len(x)
    genes = [k for k in range(n) if rng.random() < rate]
    if not genes:
        genes = [int(rng.integers(n))]
    for k in genes:
        span = hi[k] - lo[k]
        if span == 0:
            continue
        d1 = (y[k] - lo[k]) / span
        d2 = (hi[k] - y[k]) / span
        u = rng.random()
        p = 1.0 / (eta + 1.0)
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val**p - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val**p
        y[k] = min(max(y[k] + dq * span, lo[k]), hi[k])
    return y


def _tournament(rank, crowd, rng, size: int) -> np.ndarray:
    a = rng.integers(len(rank), size=size)
    b = rng.integers(len(rank), size=size)
    better_a = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] > crowd[b]))
    return np.where(better_a, a, b)


def _select(F, k: int) -> np.ndarray:
    """Indices of the ``k`` survivors by rank, then crowding distance."""
    chosen: list[int] = []
    for front in non_dominated_sort(F):
        if len(chosen) + len(front) <= k:
            chosen.extend(front)
            if len(chosen) == k:
                break
            continue
        d = crowding_distance(F[front])
        order = np.argsort(-d, kind="stable")
        chosen.extend(np.asarray(front)[order[: k - len(chosen)]].tolist())
        break
    return np.asarray(chosen, dtype=int)


def _normalizer(F0):
    lo = F0.min(axis=0)
    span = F0.max(axis=0) - lo
    span[span == 0] = 1.0
    return lambda F: (F - lo) / span


def _unique_front(X, F):
    """One representative per distinct objective vector, ordered by obj1 then obj2."""
    _, idx = np.unique(F, axis=0, return_index=True)
    idx = idx[np.lexsort((F[idx, 1], F[idx, 0]))]
    return X[idx], F[idx]


def run_moga(
    problem: Callable[[np.ndarray], np.ndarray],
    bounds: Bounds,
    params: GAParams = GAParams(),
    seed: int = 0,
    *,
    initial_population=None,
    callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> MogaResult:
    """Minimize a two-objective ``problem`` over a box.

    ``problem`` maps an ``(n, genes)`` array to an ``(n, 2)`` objective array.
    Generation 1 is the initial population; every later generation builds
    ``population`` children (elites, crossover children, mutants) and keeps
    the best ``population`` of parents and children. The run stops after
    ``max_generations`` or once the hypervolume of the best front has changed
    by less than ``tolerance`` (relative) over ``stall_generations``.
    """
    rng = np.random.default_rng(seed)
    lo, hi = bounds.lo, bounds.hi
    n_pop = params.population
    n_genes = len(lo)
    if initial_population is None:
        X = lo + rng.random((n_pop, n_genes)) * (hi - lo)
    else:
        X = bounds.clip(np.array(initial_population, dtype=float).reshape(-1, n_genes))
        if len(X) < n_pop:
            extra = lo + rng.random((n_pop - len(X), n_genes)) * (hi - lo)
            X = np.vstack([X, extra])
        X = X[:n_pop]
    F = np.asarray(problem(X), dtype=float)
    norm = _normalizer(F)
    ref = (1.1, 1.1)

    def front_hv(F_):
        first = non_dominated_sort(F_)[0]
        return hypervolume_2d(norm(F_[first]), ref)

    history = [front_hv(F)]
    if callback:
        callback(1, X, F)
    n_elite = min(n_pop, int(round(params.elite_fraction * n_pop)))
    n_cross = int(round(params.crossover_fraction * (n_pop - n_elite)))
    n_mut = n_pop - n_elite - n_cross
    eta_m = params.eta_mutation
    rate = 1.0 / n_genes
    stop = "max_generations"
    gen = 1

    while gen < params.max_generations:
        gen += 1
        rank, crowd = rank_and_crowding(F)
        order = np.lexsort((-crowd, rank))
        elites = X[order[:n_elite]]

        kids = []
        parents = _tournament(rank, crowd, rng, 2 * ((n_cross + 1) // 2))
        for a, b in zip(parents[0::2], parents[1::2]):
            c1, c2 = _sbx(X[a], X[b], lo, hi, params.eta_crossover, rng)
            kids.extend([c1, c2])
        cross = np.array(kids[:n_cross]).reshape(-1, n_genes)

        mut_parents = _tournament(rank, crowd, rng, n_mut)
        if params.mutation == "off":
            mutants = X[mut_parents].copy()
        else:
            mutants = np.array(
                [_polynomial_mutation(X[p], lo, hi, eta_m, rate, rng) for p in mut_parents]
            ).reshape(-1, n_genes)

        children = np.vstack([cross, mutants])
        F_children = np.asarray(problem(children), dtype=float) if len(children) else np.empty((0, 2))
        X_all = np.vstack([X, elites, children])
        F_all = np.vstack([F, F[order[:n_elite]], F_children])
        keep = _select(F_all, n_pop)

        if params.mutation == "adaptive" and n_mut:
            # Widen the mutation kernel while mutants keep reaching the best front.
            best = non_dominated_sort(F_all[keep])[0]
            hits = int(np.count_nonzero(keep[best] >= len(X_all) - n_mut))
            success = hits / n_mut
            eta_m = float(np.clip(eta_m * (0.85 if success > 0.2 else 1.15), 5.0, 200.0))

        X, F = X_all[keep], F_all[keep]
        history.append(front_hv(F))
        if callback:
            callback(gen, X, F)
        if len(history) > params.stall_generations:
            old = history[-1 - params.stall_generations]
            change = abs(history[-1] - old) / max(abs(old), 1e-12)
            if change < params.tolerance:
                stop = "stall"
                break

    first = non_dominated_sort(F)[0]
    Xf, Ff = _unique_front(X[first], F[first])
    return MogaResult(Xf, Ff, gen, stop, history, X, F)


def compromise(objectives) -> int:
    """Index of the point closest to the ideal point after min-max normalization.

    Ties go to the smaller first objective.
    """
    F = np.asarray(objectives, dtype=float).reshape(-1, 2)
    if len(F) == 0:
        raise ValueError("empty Pareto set")
    lo = F.min(axis=0)
    span = F.max(axis=0) - lo
    span[span == 0] = 1.0
    d = np.sqrt((((F - lo) / span) ** 2).sum(axis=1))
    best = np.flatnonzero(np.isclose(d, d.min(), rtol=0, atol=1e-12))
    return int(best[np.argmin(F[best, 0])])


# -- contract problem ---------------------------------------------------------

def round_technicians(q: float) -> int:
    return int(math.floor(q + 0.5))


def contract_from_vector(base: ContractTerms, x: Sequence[float]) -> ContractTerms:
    r_us, r_ld, lam, q = x
    return base.with_terms(
        threshold_us=float(r_us), threshold_ld=float(r_ld), cap_fraction=float(lam),
        technicians=round_technicians(q),
    )


def scaling_context(bank: RealizationBank, bundle: Bundle, bounds: Bounds = CONTRACT_BOUNDS, levels: int = 3) -> ScalingContext:
    """Profit ranges over a pre-sweep grid: every integer technician count in
    bounds times ``levels`` values of each of the other genes."""
    q_lo, q_hi = math.ceil(bounds.lower[3]), math.floor(bounds.upper[3])
    qs = range(q_lo, q_hi + 1)
    grids = [np.linspace(bounds.lower[k], bounds.upper[k], levels) for k in range(3)]
    bank.ensure(qs)
    own, con = [], []
    T = bundle.sim.horizon_days
    for q in qs:
        arrays = bank.get(q)
        for r_us in grids[0]:
            for r_ld in grids[1]:
                for lam in grids[2]:
                    c = contract_from_vector(bundle.contract, (r_us, r_ld, lam, q))
                    led = arrays.settle(c, T)
                    own.append(led["owner_profit"].mean())
                    con.append(led["contractor_profit"].mean())
    return ScalingContext.from_values(own, con)


class ContractProblem:
    """Objective function over contract vectors, using common random numbers."""

    def __init__(self, bundle: Bundle, bank: RealizationBank, context: ScalingContext):
        self.bundle = bundle
        self.bank = bank
        self.context = context

    def stats(self, x: Sequence[float], bank: RealizationBank | None = None) -> ScenarioStats:
        bank = self.bank if bank is None else bank
        c = contract_from_vector(self.bundle.contract, x)
        st = stats_from_realizations(bank.get(c.technicians), c, self.bundle.sim.horizon_days)
        return st.with_scaling(self.context)

    def objectives(self, stats: ScenarioStats) -> tuple[float, float]:
        return (
            float(stats.conflict),
            -stats.total_profit.mean,
        )

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.bank.ensure(round_technicians(q) for q in X[:, 3])
        return np.array([self.objectives(self.stats(x)) for x in X]).reshape(-1, 2)


@dataclass(frozen=True)
class ParetoSolution:
    vector: tuple[float, float, float, float]
    technicians: int
    obj1: float
    obj2: float
    final: ScenarioStats | None = None

    def row(self) -> dict[str, Any]:
        r_us, r_ld, lam, q = self.vector
        out = {"r_us": r_us, "r_ld": r_ld, "lambda": lam, "tech": q, "tech_rounded": self.technicians,
               "obj1": self.obj1, "obj2": self.obj2}
        if self.final is not None:
            out.update(
                final_owner_mean=self.final.owner_profit.mean,
                final_contractor_mean=self.final.contractor_profit.mean,
                final_total_mean=self.final.total_profit.mean,
                final_total_ci95=self.final.total_profit.ci95,
                final_obj1=self.final.conflict,
            )
        return out


@dataclass
class OptimizationResult:
    solutions: list[ParetoSolution]
    compromise_index: int
    context: ScalingContext
    moga: MogaResult

    @property
    def compromise(self) -> ParetoSolution:
        return self.solutions[self.compromise_index]


def optimize_contract(
    bundle: Bundle,
    params: GAParams = GAParams(),
    bounds: Bounds = CONTRACT_BOUNDS,
    seed: int = 0,
    *,
    samples: int = 200,
    final_samples: int = 2000,
    threads: int = 1,
    callback=None,
) -> OptimizationResult:
    """Run the GA on the contract problem and re-evaluate the front on fresh samples.

    The GA sees samples ``0..samples-1`` for every candidate. The front is
    then re-evaluated on samples ``samples..samples+final_samples-1``.
    """
    bank = RealizationBank(bundle, range(samples), threads=threads)
    context = scaling_context(bank, bundle, bounds)
    problem = ContractProblem(bundle, bank, context)
    res = run_moga(problem, bounds, params, seed, callback=callback)
    final_bank = None
    if final_samples >= 2:
        final_bank = RealizationBank(bundle, range(samples, samples + final_samples), threads=threads)
        final_bank.ensure(round_technicians(x[3]) for x in res.X)
    sols = []
    for x, f in zip(res.X, res.F):
        final = problem.stats(x, final_bank) if final_bank is not None else None
        sols.append(ParetoSolution(tuple(float(v) for v in x), round_technicians(x[3]), float(f[0]), float(f[1]), final))
    return OptimizationResult(sols, compromise(res.F), context, res)
