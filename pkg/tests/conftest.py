from __future__ import annotations

import copy

import numpy as np
import pytest

from owfcontract.model import reference_document, validate_config
from owfcontract.stochastic import DailyEnvironment

CTV = {
    "name": "CTV",
    "speed": 10.20,
    "hourly_cost": 81.03,
    "per_km_cost": 2.21,
    "use_rate": 1.0,
    "max_wind_access": 10.0,
    "max_wave_access": 1.5,
}


def tiny_doc(
    distances=(10.0, 20.0),
    horizon=10,
    failures=None,
    technicians=15,
    price=None,
    **contract,
) -> dict:
    """A small, fully explicit configuration document."""
    if failures is None:
        failures = [
            {"id": 1, "name": "minor", "daily_rate": 0.0, "repair_hours": 8.0,
             "material_cost": 100.0, "required_technicians": 2},
        ]
    terms = {
        "technicians": technicians,
        "threshold_us": 0.85,
        "threshold_ld": 0.75,
        "cap_fraction": 0.35,
        "fixed_fee": 100_000.0,
        "annual_salary": 44_000.0,
    }
    terms.update(contract)
    return {
        "farm": {"distances_km": list(distances)},
        "turbine": {"rated_power_kw": 8000.0, "cut_in_speed": 4.0, "rated_speed": 13.0, "cut_out_speed": 25.0},
        "failures": failures,
        "transports": [dict(CTV)],
        "contract": terms,
        "weather": {"weibull_shape": 2.0, "weibull_scale": 9.5, "wave_mean": 1.0, "wave_std": 0.6},
        "sim": {
            "horizon_days": horizon,
            "samples": 10,
            "master_seed": 7,
            "price": [50.0] * horizon if price is None else price,
        },
    }


def tiny_bundle(**kw):
    return validate_config(tiny_doc(**kw))


def flat_env(horizon, wind=10.0, wave=1.0, price=50.0, n=1, spec=None):
    from owfcontract.availability import energy_per_day
    from owfcontract.model import TurbineSpec

    spec = spec or TurbineSpec(8000.0)
    w = np.full(horizon, float(wind)) if np.isscalar(wind) else np.asarray(wind, dtype=float)
    v = np.full(horizon, float(wave)) if np.isscalar(wave) else np.asarray(wave, dtype=float)
    p = np.full(horizon, float(price)) if np.isscalar(price) else np.asarray(price, dtype=float)
    return DailyEnvironment(w, v, p, n * energy_per_day(w, spec))


@pytest.fixture(scope="session")
def reference_doc():
    return copy.deepcopy(reference_document())


@pytest.fixture(scope="session")
def reference():
    return validate_config(reference_document())


# Published Pareto set of the case study: r_us, r_ld, lambda, tech, obj1, total profit (EUR).
PUBLISHED_FRONT = [
    (0.751033, 0.793940, 0.288468, 23.94193, 6.0419e-06, 15255383.2),
    (0.661815, 0.718103, 0.603721, 27.34006, 0.00104061, 18577643.5),
    (0.704413, 0.817848, 0.403259, 26.49567, 1.9468e-05, 16300551.5),
    (0.623042, 0.679189, 0.588359, 22.42033, 0.03627416, 19492480.5),
    (0.712087, 0.703723, 0.512941, 18.05121, 0.42839238, 20039864.3),
    (0.657295, 0.741869, 0.730307, 32.40792, 0.00062719, 17133316.8),
    (0.699978, 0.781844, 0.461220, 27.16036, 0.74325435, 20238903.9),
    (0.626146, 0.680928, 0.507733, 24.40784, 0.23265378, 19955746.3),
    (0.688209, 0.632001, 0.694395, 22.89640, 0.09329032, 19540837.5),
    (0.659123, 0.70999009, 0.551804, 16.56258, 0.01439529, 19104818.9),
    (0.626146, 0.68092847, 0.507733, 24.40784, 0.00406444, 18794338.3),
]
PUBLISHED_COMPROMISE = 3  # "Solution 4"


def published_objectives():
    return [(row[4], -row[5]) for row in PUBLISHED_FRONT]


def zdt_problem(X):
    """obj1 = x1, obj2 = 1 - sqrt(x1) scaled by a g term that is 1 on the optimum."""
    X = np.atleast_2d(X)
    f1 = X[:, 0]
    g = 1.0 + 9.0 * X[:, 1:].mean(axis=1) if X.shape[1] > 1 else np.ones(len(X))
    f2 = g * (1.0 - np.sqrt(f1 / g))
    return np.column_stack([f1, f2])


ZDT_HV_REF = (1.1, 1.1)
# The box [0, 1.1]^2 minus the area under y = 1 - sqrt(x) on [0, 1].
ZDT_HV_OPTIMUM = 1.1 * 1.1 - 1.0 / 3.0
