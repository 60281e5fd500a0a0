import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CTV, tiny_doc
from owfcontract.availability import build_availability
from owfcontract.economics import (
    LEDGER_FIELDS,
    liquidated_damages,
    penalty_g,
    penalty_wf,
    penalty_wt,
    settle,
    settle_arrays,
    shortage_cost,
    startup_cost,
    task_cost_contractor,
    technician_cost,
    upside_sharing,
    base_income,
)
from owfcontract.model import ContractTerms, TransportSpec, TurbineSpec, validate_config
from owfcontract.scheduler import build_drv
from owfcontract.stochastic import DailyEnvironment, FailureEvent

CTV_SPEC = TransportSpec(**CTV)
HELI = TransportSpec("Helicopter", 69.87, 888.0, 3.53, 0.0236, 20.0, 99.0)


def test_task_cost_ctv():
    assert task_cost_contractor(30, 11, CTV_SPEC) == pytest.approx(578.265, abs=1e-9)
    assert task_cost_contractor(30, 11, CTV_SPEC) == pytest.approx(578.27, abs=0.005)


def test_task_cost_helicopter():
    assert round(task_cost_contractor(29.1, 2, HELI), 2) == pytest.approx(1093.45)


def test_task_cost_degenerate():
    assert task_cost_contractor(0, 0, CTV_SPEC) == 0.0
    assert task_cost_contractor(30, 11, None) == 0.0


def test_penalty_wf():
    assert penalty_wf(1e6, 0.60, 0.75) == pytest.approx(200_000.0)
    assert penalty_wf(1e6, 0.75, 0.75) == 0.0
    assert penalty_wf(1e6, 1.0, 0.75) == 0.0


def test_penalty_wt():
    assert penalty_wt(100.0, [0.8, 0.4], 0.8) == pytest.approx(25.0)
    assert penalty_wt(100.0, [0.9, 0.8], 0.8) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.floats(0.1, 1), st.floats(0, 1e7))
def test_penalty_wt_monotone_when_halving(a, r, base):
    a = np.array(a)
    assert penalty_wt(base, a / 2, r) >= penalty_wt(base, a, r) - 1e-6


def test_penalty_g():
    assert penalty_g(2e6, 0.7, 0.75) == pytest.approx(133_333.33, abs=0.01)
    assert penalty_g(2e6, 1.0, 0.75) == 0.0
    assert penalty_g(2e6, 0.375, 0.75) == pytest.approx(1e6)


def test_liquidated_damages():
    assert liquidated_damages(2e5, 2e5, 1e5, 3e5) == 3e5
    assert liquidated_damages(0, 0, 0, 3e5) == 0
    assert liquidated_damages(2e5, 2e5, 1e5, np.inf) == 5e5


def test_upside_sharing():
    assert upside_sharing(1e6, 0.935, 0.85, 2e5) == pytest.approx(1e5)
    assert upside_sharing(1e6, 0.935, 0.85, 5e4) == pytest.approx(5e4)
    assert upside_sharing(1e6, 0.80, 0.85, 2e5) == 0.0


def _env(wind, price, n, spec=TurbineSpec(8000.0)):
    from owfcontract.availability import energy_per_day

    wind = np.asarray(wind, dtype=float)
    return DailyEnvironment(wind, np.ones_like(wind), np.asarray(price, dtype=float), n * energy_per_day(wind, spec))


def test_base_income():
    env = _env([13.0], [50.0], 1)
    assert base_income(env, np.ones((1, 1), dtype=np.int8), _farm(1)) == pytest.approx(9600.0)
    assert base_income(env, np.zeros((1, 1), dtype=np.int8), _farm(1)) == 0.0
    env2 = _env([13.0], [100.0], 1)
    assert base_income(env2, np.ones((1, 1), dtype=np.int8), _farm(1)) == pytest.approx(19200.0)


def _farm(n):
    return validate_config(tiny_doc(distances=[10.0] * n)).farm


def test_shortage_cost():
    # 96 MWh per turbine: wind where the cubic ramp gives half of rated power
    w = ((64 + 0.5 * (2197 - 64)) ** (1 / 3))
    env = _env([w], [50.0], 2)
    a = np.array([[1], [0]], dtype=np.int8)
    assert shortage_cost(env, a, _farm(2)) == pytest.approx(4800.0)
    assert shortage_cost(env, np.ones((2, 1), dtype=np.int8), _farm(2)) == 0.0
    assert shortage_cost(_env([0.0], [50.0], 2), a, _farm(2)) == 0.0


def test_startup_cost():
    env = _env([10.0] * 4, [50.0] * 4, 1)
    assert startup_cost(env, np.ones((1, 4), dtype=np.int8), 0.06) == 0.0
    assert startup_cost(env, np.array([[0, 0, 1, 1]], dtype=np.int8), 0.06) == pytest.approx(3.0)
    env5 = _env([10.0] * 5, [50.0] * 5, 1)
    assert startup_cost(env5, np.array([[0, 1, 0, 1, 1]], dtype=np.int8), 0.06) == pytest.approx(6.0)


def test_technician_cost():
    c = ContractTerms(16, 0.85, 0.75, 0.35, 1e6, 44_000.0)
    assert round(technician_cost(c, 180), 2) == pytest.approx(347_178.08)


# -- independent ledger oracle --------------------------------------------------

def _oracle_ledger(wind, price, down, dists, scheduled_tasks, contract, T, k_up, spec):
    """Spreadsheet-style ledger from scalar loops only."""
    N = len(dists)

    def g(v):
        if v < spec.cut_in_speed or v >= spec.cut_out_speed:
            return 0.0
        if v < spec.rated_speed:
            return spec.rated_power_kw * 24 / 1000 * (v**3 - spec.cut_in_speed**3) / (spec.rated_speed**3 - spec.cut_in_speed**3)
        return spec.rated_power_kw * 24 / 1000

    up = [[0 if (w, t) in down else 1 for t in range(T)] for w in range(N)]
    base = sum(price[t] * g(wind[t]) * up[w][t] for w in range(N) for t in range(T))
    a_wf = sum(map(sum, up)) / (N * T)
    a_wt = [sum(up[w]) / T for w in range(N)]
    possible = sum(g(wind[t]) for t in range(T)) * N
    a_g = sum(g(wind[t]) * up[w][t] for w in range(N) for t in range(T)) / possible
    r = contract.threshold_ld
    cap = contract.cap_fraction * contract.fixed_fee
    xi_wf = max(0.0, base * (r - a_wf) / r)
    xi_wt = sum(max(0.0, base / N * (r - a) / r) for a in a_wt)
    xi_g = max(0.0, base * (r - a_g) / r)
    xi_ld = min(cap, xi_wf + xi_wt + xi_g)
    xi_us = min(cap, max(0.0, base * (a_g - contract.threshold_us) / contract.threshold_us))
    shortage = sum(price[t] * max(0.0, N * g(wind[t]) - sum(g(wind[t]) * up[w][t] for w in range(N))) for t in range(T))
    startup = 0.0
    for w in range(N):
        prev = 1
        for t in range(T):
            if up[w][t] == 1 and prev == 0:
                startup += price[t] * k_up
            prev = up[w][t]
    materials = sum(m for _, _, m, _ in scheduled_tasks)
    td = sum(2 * dists[w] * tr.per_km_cost for w, _, _, tr in scheduled_tasks)
    ti = sum(0.5 * h * tr.hourly_cost for _, h, _, tr in scheduled_tasks)
    labor = contract.technicians * contract.annual_salary / 365 * T
    oi = base + xi_ld
    oc = contract.fixed_fee + xi_us + materials + shortage + startup
    ci = contract.fixed_fee + xi_us
    cc = td + ti + xi_ld + labor
    return {
        "owner_income": oi, "owner_cost": oc, "owner_profit": oi - oc,
        "contractor_income": ci, "contractor_cost": cc, "contractor_profit": ci - cc,
        "energy_sales": base, "shortage": shortage, "startup": startup, "materials": materials,
        "fixed_fee": contract.fixed_fee, "technician_labor": labor,
        "transport_distance": td, "transport_idle": ti,
        "xi_wf": xi_wf, "xi_wt": xi_wt, "xi_g": xi_g, "xi_ld": xi_ld, "xi_us": xi_us,
    }


@pytest.mark.parametrize(
    "r_ld,r_us,lam",
    [(0.95, 0.85, 0.35), (0.75, 0.85, 0.35), (0.99, 0.5, 0.01), (0.95, 0.99, 2.0)],
)
def test_ledger_matches_oracle(r_ld, r_us, lam):
    T = 10
    failures = [{"id": 1, "name": "gen", "daily_rate": 0.0, "repair_hours": 16.0,
                 "material_cost": 1000.0, "required_technicians": 3}]
    doc = tiny_doc(distances=[10.0, 20.0], horizon=T, failures=failures, technicians=4,
                   threshold_ld=r_ld, threshold_us=r_us, cap_fraction=lam)
    b = validate_config(doc)
    wind = [15.0, 15.0, 9.0, 8.0, 3.0, 12.0, 15.0, 15.0, 6.0, 15.0]
    price = [40.0 + d for d in range(T)]
    env = _env(wind, price, 2)
    ev = [FailureEvent(2, 1, 3)]
    tasks, _ = build_drv(ev, env, 4, b.catalog, b.sim, b.transports)
    assert (tasks[0].start_day, tasks[0].completion_day) == (3, 4)
    matrix = build_availability(ev, tasks, 2, T)
    ledger = settle(env, matrix, tasks, b.contract, b.catalog, b.farm, 0.06).to_dict()

    expected = _oracle_ledger(
        wind, price, {(1, 2), (1, 3)}, [10.0, 20.0], [(1, 16.0, 1000.0, CTV_SPEC)],
        b.contract, T, 0.06, b.farm.spec,
    )
    assert set(ledger) == set(expected)
    for k in LEDGER_FIELDS:
        assert ledger[k] == pytest.approx(expected[k], abs=0.01), k


def test_zero_failures_contractor_profit():
    T = 10
    b = validate_config(tiny_doc(horizon=T, threshold_us=0.5))
    env = _env([15.0] * T, [50.0] * T, 2)
    led = settle(env, np.ones((2, T), dtype=np.int8), [], b.contract, b.catalog, b.farm, 0.06)
    assert led.xi_ld == 0.0
    assert led.contractor_profit == pytest.approx(b.contract.fixed_fee + led.xi_us - technician_cost(b.contract, T))


# -- randomized properties -------------------------------------------------------

def _random_settlements(rng, n_contracts=100, n_samples=100, n_turbines=8):
    for _ in range(n_contracts):
        c = ContractTerms(
            int(rng.integers(1, 50)), rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0),
            rng.uniform(0, 1.5), rng.uniform(0, 2e7),
        )
        a_wt = rng.uniform(0, 1, (n_samples, n_turbines))
        a_wf = a_wt.mean(axis=1)
        a_g = np.clip(a_wf + rng.normal(0, 0.05, n_samples), 0, 1)
        out = settle_arrays(
            base_income=rng.uniform(0, 5e7, n_samples), a_wf=a_wf, a_wt=a_wt, a_g=a_g,
            materials=rng.uniform(0, 1e6, n_samples), shortage=rng.uniform(0, 1e7, n_samples),
            startup=rng.uniform(0, 1e3, n_samples), transport_distance=rng.uniform(0, 1e5, n_samples),
            transport_idle=rng.uniform(0, 1e5, n_samples), contract=c, horizon=180,
        )
        yield c, a_wf, a_wt, a_g, out


def test_caps_and_zero_penalty_zone():
    rng = np.random.default_rng(2024)
    violations = 0
    count = 0
    for c, a_wf, a_wt, a_g, out in _random_settlements(rng):
        count += len(a_wf)
        cap = c.cap_eur
        violations += int(np.sum(out["xi_ld"] > cap + 1e-9))
        violations += int(np.sum(out["xi_us"] > cap + 1e-9))
        for k in ("xi_wf", "xi_wt", "xi_g", "xi_ld", "xi_us"):
            violations += int(np.sum(out[k] < 0))
        ok = (a_wf >= c.threshold_ld) & (a_g >= c.threshold_ld) & np.all(a_wt >= c.threshold_ld, axis=1)
        violations += int(np.sum(out["xi_ld"][ok] != 0))
        np.testing.assert_allclose(out["owner_profit"], out["owner_income"] - out["owner_cost"], rtol=1e-12)
        np.testing.assert_allclose(
            out["contractor_profit"], out["contractor_income"] - out["contractor_cost"], rtol=1e-12
        )
    assert count >= 10_000
    assert violations == 0


def test_zero_penalty_zone_explicit():
    out = settle_arrays(
        base_income=np.array([1e6]), a_wf=np.array([0.9]), a_wt=np.array([[0.8, 0.95]]), a_g=np.array([0.85]),
        materials=0, shortage=0, startup=0, transport_distance=0, transport_idle=0,
        contract=ContractTerms(5, 0.85, 0.8, 0.5, 1e6), horizon=180,
    )
    assert out["xi_ld"][0] == 0.0


def test_transfer_symmetry_on_fixed_realizations(reference):
    from owfcontract.simulator import RealizationBank

    bank = RealizationBank(reference.with_sim(master_seed=5), range(12))
    arrays = bank.get(16)
    rng = np.random.default_rng(0)
    base = arrays.settle(reference.contract, 180)
    total0 = base["owner_profit"] + base["contractor_profit"]
    for _ in range(50):
        c = reference.contract.with_terms(
            threshold_us=rng.uniform(0.5, 0.95), threshold_ld=rng.uniform(0.5, 0.99), cap_fraction=rng.uniform(0, 2)
        )
        led = arrays.settle(c, 180)
        total = led["owner_profit"] + led["contractor_profit"]
        assert np.all(np.abs(total - total0) <= 1e-6 * np.abs(total0))
