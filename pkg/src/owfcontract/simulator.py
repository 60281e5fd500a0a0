"""Monte Carlo engine: samples, scenario statistics, profit scaling and grid sweeps.

Sample ``i`` always sees the same weather, prices and failures whatever the
contract, so only the repair schedule depends on the technician count and
only the settlement depends on thresholds and caps. :class:`RealizationBank`
exploits this: it runs the scheduler once per (sample, technician count) and
settles any number of contracts against the cached realizations.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .availability import build_availability
from .economics import CashflowLedger, Realization, realize, settle_arrays, settle_realization
from .model import Bundle, ContractTerms
from .scheduler import MaintenanceTask, TechnicianLedger, build_drv
from .stochastic import DailyEnvironment, FailureEvent, sample_environment, substream

log = logging.getLogger(__name__)

Z95 = 1.96
AXIS_FIELDS = {"q": "technicians", "r_us": "threshold_us", "r_ld": "threshold_ld", "lambda": "cap_fraction"}


@dataclass(frozen=True, eq=False)
class SampleOutcome:
    sample_index: int
    environment: DailyEnvironment
    failures: list[FailureEvent]
    tasks: list[MaintenanceTask]
    technicians: TechnicianLedger
    availability: np.ndarray
    realization: Realization
    ledger: CashflowLedger


def _schedule(bundle: Bundle, env, failures, technicians: int, sample_index: int):
    stream = substream(bundle.sim.master_seed, sample_index, "scheduler")
    return build_drv(failures, env, technicians, bundle.catalog, bundle.sim, bundle.transports, stream)


def run_sample(bundle: Bundle, contract: ContractTerms | None = None, sample_index: int = 0) -> SampleOutcome:
    """Weather, prices, demand, failures, repair schedule, availability, settlement."""
    contract = bundle.contract if contract is None else contract
    env, failures = sample_environment(bundle, sample_index)
    tasks, ledger = _schedule(bundle, env, failures, contract.technicians, sample_index)
    matrix = build_availability(failures, tasks, bundle.farm.n, bundle.sim.horizon_days)
    real = realize(env, matrix, tasks, bundle.farm, bundle.catalog, bundle.sim.startup_energy_mwh)
    cash = settle_realization(real, contract, bundle.sim.horizon_days)
    return SampleOutcome(sample_index, env, failures, tasks, ledger, matrix, real, cash)


# -- realization cache --------------------------------------------------------

_SCALARS = (
    "base_income", "generation_mwh", "a_wf", "a_g", "materials", "shortage", "startup",
    "transport_distance", "transport_idle", "n_failures", "n_scheduled",
)


@dataclass(frozen=True, eq=False)
class RealizationArrays:
    """Realizations of many samples at one technician count, stacked along axis 0."""

    technicians: int
    sample_indices: np.ndarray
    columns: dict[str, np.ndarray]
    a_wt: np.ndarray

    def __getattr__(self, name: str) -> np.ndarray:
        try:
            return self.__dict__["columns"][name]
        except KeyError:
            raise AttributeError(name) from None

    def settle(self, contract: ContractTerms, horizon: int) -> dict[str, np.ndarray]:
        c = self.columns
        return settle_arrays(
            base_income=c["base_income"], a_wf=c["a_wf"], a_wt=self.a_wt, a_g=c["a_g"],
            materials=c["materials"], shortage=c["shortage"], startup=c["startup"],
            transport_distance=c["transport_distance"], transport_idle=c["transport_idle"],
            contract=contract, horizon=horizon,
        )


def _realize_chunk(bundle: Bundle, indices: Sequence[int], qs: Sequence[int]):
    """Worker: realizations for every (sample, q) pair, environment drawn once per sample."""
    n = bundle.farm.n
    T = bundle.sim.horizon_days
    out = {q: (np.empty((len(indices), len(_SCALARS))), np.empty((len(indices), n))) for q in qs}
    for row, i in enumerate(indices):
        env, failures = sample_environment(bundle, i)
        for q in qs:
            tasks, _ = _schedule(bundle, env, failures, q, i)
            matrix = build_availability(failures, tasks, n, T)
            real = realize(env, matrix, tasks, bundle.farm, bundle.catalog, bundle.sim.startup_energy_mwh)
            scal, awt = out[q]
            scal[row] = [getattr(real, k) for k in _SCALARS]
            awt[row] = real.a_wt
    return out


class RealizationBank:
    """Lazily computed realizations for a fixed set of samples, keyed by technician count."""

    def __init__(self, bundle: Bundle, sample_indices: Iterable[int], threads: int = 1, chunk: int = 50):
        self.bundle = bundle
        self.sample_indices = np.asarray(list(sample_indices), dtype=np.int64)
        if self.sample_indices.size == 0:
            raise ValueError("at least one sample is required")
        self.threads = max(1, int(threads))
        self.chunk = chunk
        self._cache: dict[int, RealizationArrays] = {}

    def __len__(self) -> int:
        return int(self.sample_indices.size)

    def ensure(self, technician_counts: Iterable[int]) -> None:
        qs = sorted({int(q) for q in technician_counts} - set(self._cache))
        if not qs:
            return
        idx = self.sample_indices.tolist()
        chunks = [idx[k : k + self.chunk] for k in range(0, len(idx), self.chunk)]
        if self.threads > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=self.threads) as pool:
                parts = list(pool.map(_realize_chunk, itertools.repeat(self.bundle), chunks, itertools.repeat(qs)))
        else:
            parts = [_realize_chunk(self.bundle, c, qs) for c in chunks]
        for q in qs:
            scal = np.concatenate([p[q][0] for p in parts])
            awt = np.concatenate([p[q][1] for p in parts])
            cols = {k: scal[:, j].copy() for j, k in enumerate(_SCALARS)}
            self._cache[q] = RealizationArrays(q, self.sample_indices, cols, awt)

    def get(self, technicians: int) -> RealizationArrays:
        self.ensure([technicians])
        return self._cache[int(technicians)]


# -- statistics ---------------------------------------------------------------

@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    ci95: float

    @classmethod
    def of(cls, values) -> "Summary":
        x = np.asarray(values, dtype=float)
        mean = float(x.mean())
        std = float(x.std(ddof=1)) if x.size > 1 else 0.0
        return cls(mean, std, Z95 * std / math.sqrt(x.size))

    @property
    def margin(self) -> float:
        """CI95 half-width relative to the magnitude of the mean."""
        return self.ci95 / abs(self.mean) if self.mean else math.inf


@dataclass(frozen=True)
class ScenarioStats:
    contract: ContractTerms
    samples: int
    owner_profit: Summary
    contractor_profit: Summary
    total_profit: Summary
    farm_availability: Summary
    energy_availability: Summary
    generation_mwh: Summary
    failures: Summary
    scheduled: Summary
    components: dict[str, float] = field(default_factory=dict)
    owner_scaled: float | None = None
    contractor_scaled: float | None = None

    @property
    def conflict(self) -> float | None:
        if self.owner_scaled is None or self.contractor_scaled is None:
            return None
        return abs(self.contractor_scaled - self.owner_scaled)

    def with_scaling(self, context: "ScalingContext") -> "ScenarioStats":
        own, con = context.scale(self.owner_profit.mean, self.contractor_profit.mean)
        return replace(self, owner_scaled=own, contractor_scaled=con)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "contract": {
                "technicians": self.contract.technicians,
                "threshold_us": self.contract.threshold_us,
                "threshold_ld": self.contract.threshold_ld,
                "cap_fraction": self.contract.cap_fraction,
                "fixed_fee": self.contract.fixed_fee,
                "annual_salary": self.contract.annual_salary,
            },
            "samples": self.samples,
        }
        for name in ("owner_profit", "contractor_profit", "total_profit", "farm_availability",
                     "energy_availability", "generation_mwh", "failures", "scheduled"):
            s = getattr(self, name)
            out[name] = {"mean": s.mean, "std": s.std, "ci95": s.ci95}
        out["components_mean"] = dict(self.components)
        out["owner_scaled"] = self.owner_scaled
        out["contractor_scaled"] = self.contractor_scaled
        out["conflict"] = self.conflict
        return out


def stats_from_realizations(arrays: RealizationArrays, contract: ContractTerms, horizon: int) -> ScenarioStats:
    ledger = arrays.settle(contract, horizon)
    own = ledger["owner_profit"]
    con = ledger["contractor_profit"]
    # Transfers cancel in the sum; leaving them out keeps the total bit-identical
    # across contracts with the same technician count.
    total = ledger["energy_sales"] - sum(
        ledger[k] for k in ("materials", "shortage", "startup", "transport_distance", "transport_idle", "technician_labor")
    )
    return ScenarioStats(
        contract=contract,
        samples=int(own.size),
        owner_profit=Summary.of(own),
        contractor_profit=Summary.of(con),
        total_profit=Summary.of(total),
        farm_availability=Summary.of(arrays.a_wf),
        energy_availability=Summary.of(arrays.a_g),
        generation_mwh=Summary.of(arrays.generation_mwh),
        failures=Summary.of(arrays.n_failures),
        scheduled=Summary.of(arrays.n_scheduled),
        components={k: float(np.mean(v)) for k, v in ledger.items()},
    )


def run_scenario(
    bundle: Bundle,
    contract: ContractTerms | None = None,
    samples: int | None = None,
    *,
    sample_indices: Sequence[int] | None = None,
    threads: int = 1,
    bank: RealizationBank | None = None,
) -> ScenarioStats:
    """Aggregate ``samples`` independent samples (indices ``0..samples-1`` by default)."""
    contract = bundle.contract if contract is None else contract
    if bank is None:
        if sample_indices is None:
            samples = bundle.sim.samples if samples is None else samples
            sample_indices = range(samples)
        bank = RealizationBank(bundle, sample_indices, threads=threads)
    if len(bank) < 2:
        raise ValueError("run_scenario needs at least 2 samples")
    return stats_from_realizations(bank.get(contract.technicians), contract, bundle.sim.horizon_days)


# -- scaling ------------------------------------------------------------------

def scale_profits(values) -> np.ndarray:
    """Min-max scale to [0, 1]; a degenerate set scales to all zeros with a warning."""
    x = np.asarray(values, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        warnings.warn("degenerate profit range; scaled profits set to 0", RuntimeWarning, stacklevel=2)
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


@dataclass(frozen=True)
class ScalingContext:
    owner_min: float
    owner_max: float
    contractor_min: float
    contractor_max: float

    @classmethod
    def from_values(cls, owner, contractor) -> "ScalingContext":
        return cls(float(np.min(owner)), float(np.max(owner)), float(np.min(contractor)), float(np.max(contractor)))

    @staticmethod
    def _one(x, lo, hi, clip):
        if hi == lo:
            return 0.0
        s = (x - lo) / (hi - lo)
        return min(1.0, max(0.0, s)) if clip else s

    def scale(self, owner: float, contractor: float, clip: bool = True) -> tuple[float, float]:
        return (
            self._one(owner, self.owner_min, self.owner_max, clip),
            self._one(contractor, self.contractor_min, self.contractor_max, clip),
        )

    def to_dict(self) -> dict[str, float]:
        return {
            "owner_min": self.owner_min, "owner_max": self.owner_max,
            "contractor_min": self.contractor_min, "contractor_max": self.contractor_max,
        }


# -- sweeps -------------------------------------------------------------------

def contract_for(base: ContractTerms, params: Mapping[str, float]) -> ContractTerms:
    changes = {}
    for name, value in params.items():
        if name not in AXIS_FIELDS:
            raise ValueError(f"unknown axis {name!r}; expected one of {sorted(AXIS_FIELDS)}")
        changes[AXIS_FIELDS[name]] = int(round(value)) if name == "q" else float(value)
    return base.with_terms(**changes)


@dataclass(frozen=True)
class SweepCell:
    params: dict[str, float]
    stats: ScenarioStats


@dataclass(frozen=True)
class SweepResult:
    axes: dict[str, list[float]]
    cells: list[SweepCell]
    context: ScalingContext

    def argmax_traces(self) -> list[dict[str, Any]]:
        """Technician count maximizing each party's mean profit, per slice of the other axes."""
        others = [a for a in self.axes if a != "q"]
        groups: dict[tuple, list[SweepCell]] = {}
        for cell in self.cells:
            key = tuple(cell.params[a] for a in others)
            groups.setdefault(key, []).append(cell)
        rows = []
        for key, cells in groups.items():
            row: dict[str, Any] = dict(zip(others, key))
            for label, attr in (("contractor", "contractor_profit"), ("owner", "owner_profit"), ("total", "total_profit")):
                best = max(cells, key=lambda c: getattr(c.stats, attr).mean)
                row[f"q_max_{label}"] = best.stats.contract.technicians
                row[f"max_{label}"] = getattr(best.stats, attr).mean
            rows.append(row)
        return rows


def parse_axis_values(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic range, robust to float step accumulation."""
    if step <= 0:
        raise ValueError("axis step must be positive")
    if stop < start:
        raise ValueError("axis stop must be >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(n)]


def sweep(
    bundle: Bundle,
    axes: Mapping[str, Sequence[float]],
    samples: int | None = None,
    *,
    threads: int = 1,
    bank: RealizationBank | None = None,
) -> SweepResult:
    """Evaluate every cell of the Cartesian product of ``axes`` on shared samples."""
    if not axes:
        raise ValueError("at least one axis is required")
    names = list(axes)
    for name in names:
        if name not in AXIS_FIELDS:
            raise ValueError(f"unknown axis {name!r}; expected one of {sorted(AXIS_FIELDS)}")
        if len(axes[name]) == 0:
            raise ValueError(f"axis {name!r} is empty")
    if bank is None:
        samples = bundle.sim.samples if samples is None else samples
        bank = RealizationBank(bundle, range(samples), threads=threads)
    combos = [dict(zip(names, vals)) for vals in itertools.product(*(axes[n] for n in names))]
    contracts = [contract_for(bundle.contract, p) for p in combos]
    bank.ensure(c.technicians for c in contracts)
    stats = [stats_from_realizations(bank.get(c.technicians), c, bundle.sim.horizon_days) for c in contracts]
    own = [s.owner_profit.mean for s in stats]
    con = [s.contractor_profit.mean for s in stats]
    if len(stats) > 1 and (min(own) == max(own) or min(con) == max(con)):
        warnings.warn("degenerate profit range over the sweep; scaled profits set to 0", RuntimeWarning, stacklevel=2)
    context = ScalingContext.from_values(own, con)
    cells = [SweepCell(p, s.with_scaling(context)) for p, s in zip(combos, stats)]
    return SweepResult({n: list(axes[n]) for n in names}, cells, context)
