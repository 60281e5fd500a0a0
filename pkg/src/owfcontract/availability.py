"""Power curve, daily availability matrix and the three availability metrics."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .model import TurbineSpec

PRODUCTION_HOURS_PER_DAY = 24.0


def energy_per_day(wind, spec: TurbineSpec):
    """Energy one turbine produces in a day at mean wind speed ``wind`` [MWh].

    Cubic ramp between cut-in and rated speed, flat at rated power up to the
    cut-out speed, zero below cut-in and at or above cut-out. Accepts scalars
    or arrays.
    """
    w = np.asarray(wind, dtype=float)
    c3 = spec.cut_in_speed**3
    ramp = (w**3 - c3) / (spec.rated_speed**3 - c3)
    frac = np.where(
        (w < spec.cut_in_speed) | (w >= spec.cut_out_speed),
        0.0,
        np.where(w < spec.rated_speed, ramp, 1.0),
    )
    mwh = frac * spec.rated_power_kw * PRODUCTION_HOURS_PER_DAY / 1000.0
    return float(mwh) if mwh.ndim == 0 else mwh


def build_availability(failures, tasks, n: int, horizon: int) -> np.ndarray:
    """Binary ``n x horizon`` matrix, 1 where the turbine is operational.

    Each task zeroes its turbine from the failure's occurrence day through the
    repair completion day (or through the horizon when unscheduled). Day and
    turbine ids are 1-based; the returned matrix is 0-based.
    """
    a = np.ones((n, horizon), dtype=np.int8)
    for task in tasks:
        ev = task.event
        end = horizon if task.completion_day is None else task.completion_day
        a[ev.turbine_id - 1, ev.occurrence_day - 1 : end] = 0
    return a


def farm_availability(matrix: np.ndarray) -> float:
    return float(matrix.sum() / matrix.size)


def turbine_availability(matrix: np.ndarray, w: int | None = None):
    """Fraction of days turbine ``w`` (1-based) was up; all turbines if ``w`` is None."""
    per = matrix.sum(axis=1) / matrix.shape[1]
    return per if w is None else float(per[w - 1])


def energy_availability(matrix: np.ndarray, wind, spec: TurbineSpec) -> float:
    """Produced over producible energy. Defined as 1 when nothing was producible."""
    g = energy_per_day(np.asarray(wind, dtype=float), spec)
    possible = g.sum() * matrix.shape[0]
    if possible <= 0:
        return 1.0
    # Work from the lost share so a fully available farm gives exactly 1.
    lost = ((matrix.shape[0] - matrix.sum(axis=0)) * g).sum()
    return float(min(1.0, max(0.0, 1.0 - lost / possible)))


def availability_report(matrix: np.ndarray, wind, spec: TurbineSpec) -> dict:
    return {
        "farm": farm_availability(matrix),
        "per_turbine": turbine_availability(matrix),
        "energy_based": energy_availability(matrix, wind, spec),
    }


def write_availability_csv(matrix: np.ndarray, path, turbine_ids: Iterable[int] | None = None) -> None:
    n, horizon = matrix.shape
    ids = list(turbine_ids) if turbine_ids is not None else list(range(1, n + 1))
    with open(path, "w") as fh:
        fh.write("turbine," + ",".join(f"d{t}" for t in range(1, horizon + 1)) + "\n")
        for wid, row in zip(ids, matrix):
            fh.write(f"{wid}," + ",".join(str(int(v)) for v in row) + "\n")
