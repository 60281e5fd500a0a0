"""Seeded random environment of one Monte Carlo sample.

Every sample draws from independent substreams keyed by
``(master_seed, sample_index, purpose)``. Wind, waves, prices and failures
therefore never depend on the contract under evaluation, which gives common
random numbers across candidate contracts for free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from .availability import energy_per_day
from .model import Bundle, FailureMode, LognormalPrice, SimConfig, WeatherModel, WindFarm

PURPOSES = {"wind": 1, "wave": 2, "price": 3, "failures": 4, "scheduler": 5}


def substream(master_seed: int, sample_index: int, purpose: str) -> np.random.Generator:
    """Independent generator for one (sample, purpose) pair."""
    seq = np.random.SeedSequence([master_seed, sample_index, PURPOSES[purpose]])
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class FailureEvent:
    turbine_id: int
    failure_mode_id: int
    occurrence_day: int


@dataclass(frozen=True, eq=False)
class DailyEnvironment:
    wind_speed: np.ndarray
    wave_height: np.ndarray
    price: np.ndarray
    demand: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.wind_speed)


def sample_weather(model: WeatherModel, horizon: int, wind_stream, wave_stream=None):
    """I.i.d. daily Weibull wind speeds and zero-truncated Gaussian wave heights.

    ``wave_stream`` defaults to ``wind_stream`` so a single generator also works.
    """
    wave_stream = wind_stream if wave_stream is None else wave_stream
    wind = model.weibull_scale * wind_stream.weibull(model.weibull_shape, size=horizon)
    if model.wave_std == 0:
        wave = np.full(horizon, max(model.wave_mean, 0.0))
    else:
        lower = (0.0 - model.wave_mean) / model.wave_std
        wave = truncnorm.rvs(
            lower, np.inf, loc=model.wave_mean, scale=model.wave_std,
            size=horizon, random_state=wave_stream,
        )
    return wind, np.asarray(wave, dtype=float)


def sample_failures(catalog: tuple[FailureMode, ...], farm: WindFarm, horizon: int, stream) -> list[FailureEvent]:
    """One Bernoulli draw per (turbine, day, mode), sorted by day, turbine, then mode."""
    rates = np.array([m.daily_rate for m in catalog])
    if np.any(rates > 1) or np.any(rates < 0):
        raise ValueError("daily failure rates must lie in [0, 1]")
    hits = stream.random((farm.n, horizon, len(catalog))) < rates
    w, t, j = np.nonzero(hits)
    order = np.lexsort((j, w, t))
    ids = [m.id for m in catalog]
    return [
        FailureEvent(int(w[k]) + 1, ids[j[k]], int(t[k]) + 1)
        for k in order
    ]


def sample_prices(sim: SimConfig, horizon: int, stream) -> np.ndarray:
    price = sim.price
    if not isinstance(price, LognormalPrice):
        return np.asarray(price, dtype=float).copy()
    if price.sigma == 0:
        return np.full(horizon, price.mean)
    mu = np.log(price.mean) - 0.5 * price.sigma**2
    return stream.lognormal(mu, price.sigma, size=horizon)


def derive_demand(wind, farm: WindFarm) -> np.ndarray:
    """Energy the whole farm would sell each day with every turbine available."""
    return farm.n * energy_per_day(np.asarray(wind, dtype=float), farm.spec)


def sample_environment(bundle: Bundle, sample_index: int) -> tuple[DailyEnvironment, list[FailureEvent]]:
    seed = bundle.sim.master_seed
    T = bundle.sim.horizon_days
    wind, wave = sample_weather(
        bundle.weather, T, substream(seed, sample_index, "wind"), substream(seed, sample_index, "wave")
    )
    price = sample_prices(bundle.sim, T, substream(seed, sample_index, "price"))
    env = DailyEnvironment(wind, wave, price, derive_demand(wind, bundle.farm))
    failures = sample_failures(bundle.catalog, bundle.farm, T, substream(seed, sample_index, "failures"))
    return env, failures


def write_environment_csv(env: DailyEnvironment, path) -> None:
    with open(path, "w") as fh:
        fh.write("day,wind_ms,wave_m,price_eur_mwh,demand_mwh\n")
        for t in range(env.horizon):
            fh.write(
                f"{t + 1},{env.wind_speed[t]:.6f},{env.wave_height[t]:.6f},"
                f"{env.price[t]:.6f},{env.demand[t]:.6f}\n"
            )


def write_failures_csv(failures: list[FailureEvent], path) -> None:
    with open(path, "w") as fh:
        fh.write("turbine,mode,day\n")
        for ev in failures:
            fh.write(f"{ev.turbine_id},{ev.failure_mode_id},{ev.occurrence_day}\n")
