"""Cash flows of owner and contractor for one evaluation period.

Availability penalties and the upside-sharing incentive are charged on the
energy-sales revenue of the period. The contractor pays liquidated damages
to the owner (capped), and the owner pays upside sharing to the contractor
(capped); both caps are ``cap_fraction * fixed_fee``.

Settlement is split in two steps. :func:`realize` reduces one sample to the
contract-independent quantities (revenue, availabilities, material and
transport costs). :func:`settle_arrays` then applies any contract to one or
many realizations at once, which is what makes contract sweeps cheap.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .availability import energy_availability, energy_per_day, farm_availability, turbine_availability
from .model import ContractTerms, FailureMode, TransportSpec, WindFarm
from .scheduler import MaintenanceTask
from .stochastic import DailyEnvironment


def task_cost_contractor(distance_km: float, repair_hours: float, transport: TransportSpec | None) -> float:
    """Round trip to the turbine plus the transport idling for half the repair."""
    if transport is None:
        return 0.0
    return 2.0 * distance_km * transport.per_km_cost + 0.5 * repair_hours * transport.hourly_cost


def _daily_generation(env: DailyEnvironment, matrix: np.ndarray, farm: WindFarm) -> np.ndarray:
    g = energy_per_day(env.wind_speed, farm.spec)
    return g * matrix.sum(axis=0)


def base_income(env: DailyEnvironment, matrix: np.ndarray, farm: WindFarm) -> float:
    return float((env.price * _daily_generation(env, matrix, farm)).sum())


def penalty_wf(base, a_wf, r_wf):
    return np.maximum(0.0, base * (r_wf - a_wf) / r_wf)


def penalty_wt(base, a_wt, r_wt, n: int | None = None):
    """Per-turbine penalties summed over the farm. ``a_wt`` has turbines on the last axis."""
    a_wt = np.asarray(a_wt, dtype=float)
    n = a_wt.shape[-1] if n is None else n
    base = np.asarray(base, dtype=float)[..., None]
    return np.maximum(0.0, (base / n) * (r_wt - a_wt) / r_wt).sum(axis=-1)


def penalty_g(base, a_g, r_g):
    return np.maximum(0.0, base * (r_g - a_g) / r_g)


def liquidated_damages(xi_wf, xi_wt, xi_g, cap):
    return np.minimum(cap, xi_wf + xi_wt + xi_g)


def upside_sharing(base, a_g, r_us, cap):
    return np.minimum(cap, np.maximum(0.0, base * (a_g - r_us) / r_us))


def shortage_cost(env: DailyEnvironment, matrix: np.ndarray, farm: WindFarm) -> float:
    gen = _daily_generation(env, matrix, farm)
    return float((env.price * np.maximum(0.0, env.demand - gen)).sum())


def startup_cost(env: DailyEnvironment, matrix: np.ndarray, k_up: float) -> float:
    """Start-up energy bought back at the day's price on every down-to-up transition."""
    prev = np.concatenate([np.ones((matrix.shape[0], 1), dtype=matrix.dtype), matrix[:, :-1]], axis=1)
    restarts = (matrix * (1 - prev)).sum(axis=0)
    return float((env.price * k_up * restarts).sum())


def technician_cost(contract: ContractTerms, horizon: int) -> float:
    return contract.technicians * contract.annual_salary / 365.0 * horizon


@dataclass(frozen=True, eq=False)
class Realization:
    """Contract-independent outcome of one sample at a fixed technician count."""

    base_income: float
    generation_mwh: float
    a_wf: float
    a_wt: np.ndarray
    a_g: float
    materials: float
    shortage: float
    startup: float
    transport_distance: float
    transport_idle: float
    n_failures: int
    n_scheduled: int


def realize(
    env: DailyEnvironment,
    matrix: np.ndarray,
    tasks: Sequence[MaintenanceTask],
    farm: WindFarm,
    catalog: Sequence[FailureMode],
    k_up: float,
) -> Realization:
    modes = {m.id: m for m in catalog}
    dist = farm.distances
    materials = transport_distance = transport_idle = 0.0
    n_sched = 0
    for t in tasks:
        if not t.scheduled:
            continue
        n_sched += 1
        m = modes[t.event.failure_mode_id]
        materials += m.material_cost
        transport_distance += 2.0 * dist[t.event.turbine_id - 1] * t.transport.per_km_cost
        transport_idle += 0.5 * m.repair_hours * t.transport.hourly_cost
    gen = _daily_generation(env, matrix, farm)
    return Realization(
        base_income=float((env.price * gen).sum()),
        generation_mwh=float(gen.sum()),
        a_wf=farm_availability(matrix),
        a_wt=np.asarray(turbine_availability(matrix), dtype=float),
        a_g=energy_availability(matrix, env.wind_speed, farm.spec),
        materials=materials,
        shortage=float((env.price * np.maximum(0.0, env.demand - gen)).sum()),
        startup=startup_cost(env, matrix, k_up),
        transport_distance=transport_distance,
        transport_idle=transport_idle,
        n_failures=len(tasks),
        n_scheduled=n_sched,
    )


LEDGER_FIELDS = (
    "owner_income", "owner_cost", "owner_profit",
    "contractor_income", "contractor_cost", "contractor_profit",
    "energy_sales", "shortage", "startup", "materials", "fixed_fee",
    "technician_labor", "transport_distance", "transport_idle",
    "xi_wf", "xi_wt", "xi_g", "xi_ld", "xi_us",
)


def settle_arrays(
    *,
    base_income,
    a_wf,
    a_wt,
    a_g,
    materials,
    shortage,
    startup,
    transport_distance,
    transport_idle,
    contract: ContractTerms,
    horizon: int,
) -> dict[str, np.ndarray]:
    """Full ledger for one contract over any number of realizations (leading axis)."""
    base = np.asarray(base_income, dtype=float)
    r = contract.threshold_ld
    cap = contract.cap_eur
    xi_wf = penalty_wf(base, np.asarray(a_wf, dtype=float), r)
    xi_wt = penalty_wt(base, a_wt, r)
    xi_g = penalty_g(base, np.asarray(a_g, dtype=float), r)
    xi_ld = liquidated_damages(xi_wf, xi_wt, xi_g, cap)
    xi_us = upside_sharing(base, np.asarray(a_g, dtype=float), contract.threshold_us, cap)
    fee = np.full_like(base, contract.fixed_fee)
    labor = np.full_like(base, technician_cost(contract, horizon))
    materials = np.asarray(materials, dtype=float)
    shortage = np.asarray(shortage, dtype=float)
    startup = np.asarray(startup, dtype=float)
    td = np.asarray(transport_distance, dtype=float)
    ti = np.asarray(transport_idle, dtype=float)

    owner_income = base + xi_ld
    owner_cost = fee + xi_us + materials + shortage + startup
    con_income = fee + xi_us
    con_cost = td + ti + xi_ld + labor
    return {
        "owner_income": owner_income,
        "owner_cost": owner_cost,
        "owner_profit": owner_income - owner_cost,
        "contractor_income": con_income,
        "contractor_cost": con_cost,
        "contractor_profit": con_income - con_cost,
        "energy_sales": base,
        "shortage": shortage,
        "startup": startup,
        "materials": materials,
        "fixed_fee": fee,
        "technician_labor": labor,
        "transport_distance": td,
        "transport_idle": ti,
        "xi_wf": xi_wf,
        "xi_wt": xi_wt,
        "xi_g": xi_g,
        "xi_ld": xi_ld,
        "xi_us": xi_us,
    }


@dataclass(frozen=True)
class CashflowLedger:
    owner_income: float
    owner_cost: float
    owner_profit: float
    contractor_income: float
    contractor_cost: float
    contractor_profit: float
    energy_sales: float
    shortage: float
    startup: float
    materials: float
    fixed_fee: float
    technician_labor: float
    transport_distance: float
    transport_idle: float
    xi_wf: float
    xi_wt: float
    xi_g: float
    xi_ld: float
    xi_us: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def settle_realization(real: Realization, contract: ContractTerms, horizon: int) -> CashflowLedger:
    out = settle_arrays(
        base_income=real.base_income,
        a_wf=real.a_wf,
        a_wt=real.a_wt,
        a_g=real.a_g,
        materials=real.materials,
        shortage=real.shortage,
        startup=real.startup,
        transport_distance=real.transport_distance,
        transport_idle=real.transport_idle,
        contract=contract,
        horizon=horizon,
    )
    return CashflowLedger(**{k: float(v) for k, v in out.items()})


def settle(
    env: DailyEnvironment,
    matrix: np.ndarray,
    tasks: Sequence[MaintenanceTask],
    contract: ContractTerms,
    catalog: Sequence[FailureMode],
    farm: WindFarm,
    k_up: float,
) -> CashflowLedger:
    real = realize(env, matrix, tasks, farm, catalog, k_up)
    return settle_realization(real, contract, env.horizon)
