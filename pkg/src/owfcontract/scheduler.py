"""Day-of-repair vector: greedy earliest-feasible assignment of repair windows.

A repair occupies whole consecutive working days. It may start on the day of
the failure and needs, on every day of its window, enough free technicians
and sea/wind conditions within the access limits of its transport.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import FailureMode, SimConfig, TransportSpec
from .stochastic import DailyEnvironment, FailureEvent


class UnschedulableWarning(UserWarning):
    """A failure mode needs more technicians than the contractor employs."""


@dataclass(frozen=True)
class MaintenanceTask:
    event: FailureEvent
    repair_days: int
    technicians_needed: int
    transport: TransportSpec
    start_day: int | None = None
    completion_day: int | None = None
    available_before: int | None = None
    note: str = ""

    @property
    def scheduled(self) -> bool:
        return self.start_day is not None


@dataclass(frozen=True, eq=False)
class TechnicianLedger:
    capacity: int
    available: np.ndarray


def repair_days(hours: float, hours_per_workday: float = 8.0) -> int:
    return max(1, math.ceil(hours / hours_per_workday - 1e-12))


def weather_window_ok(days: Iterable[int], wind, wave, transport: TransportSpec) -> bool:
    """True if every (1-based) day in ``days`` is within the transport's access limits."""
    for d in days:
        if wind[d - 1] > transport.max_wind_access or wave[d - 1] > transport.max_wave_access:
            return False
    return True


def access_runs(wind, wave, transport: TransportSpec) -> list[int]:
    """For each 0-based day, the length of the accessible run starting there."""
    ok = (np.asarray(wind) <= transport.max_wind_access) & (np.asarray(wave) <= transport.max_wave_access)
    runs = [0] * (len(ok) + 1)
    for t in range(len(ok) - 1, -1, -1):
        runs[t] = runs[t + 1] + 1 if ok[t] else 0
    return runs[:-1]


def assign_transport(
    transports: Sequence[TransportSpec], policy: str = "ctv_only", u: float | None = None, stream=None
) -> TransportSpec:
    """Pick the transport for one task.

    ``ctv_only`` always returns the most used transport. ``sample_use_rate``
    draws by use rate, consuming ``u`` if given or one uniform from ``stream``.
    """
    if len(transports) == 1 or policy == "ctv_only":
        return max(transports, key=lambda t: t.use_rate)
    if u is None:
        u = stream.random()
    acc = 0.0
    for t in transports:
        acc += t.use_rate
        if u < acc:
            return t
    return transports[-1]


def build_drv(
    failures: Sequence[FailureEvent],
    env: DailyEnvironment,
    technicians: int,
    catalog: Sequence[FailureMode],
    sim: SimConfig,
    transports: Sequence[TransportSpec],
    stream=None,
) -> tuple[list[MaintenanceTask], TechnicianLedger]:
    """Assign each failure the earliest repair window it can get.

    Failures are taken in (day, turbine) order, or in a random order drawn
    from ``stream`` under the ``random_order`` policy. Each one books the
    first window of ``repair_days`` consecutive accessible days, starting no
    earlier than its occurrence day plus the mobilization lag, on which at
    least ``technicians_needed`` technicians are free. Tasks with no such
    window inside the horizon stay unscheduled.
    """
    T = env.horizon
    modes = {m.id: m for m in catalog}
    n = len(failures)
    order: Sequence[int] = range(n)
    if sim.order_policy == "random_order" and n:
        order = stream.permutation(n).tolist()
    draws = None
    if sim.transport_policy == "sample_use_rate" and len(transports) > 1 and n:
        draws = stream.random(n).tolist()

    runs_cache: dict[str, list[int]] = {}
    avail = [technicians] * T
    lag = sim.mobilization_lag_days
    tasks: list[MaintenanceTask | None] = [None] * n
    warned = set()

    for i in order:
        ev = failures[i]
        mode = modes[ev.failure_mode_id]
        r = repair_days(mode.repair_hours, sim.hours_per_workday)
        k = mode.required_technicians
        tr = assign_transport(transports, sim.transport_policy, None if draws is None else draws[i])
        if k > technicians:
            if mode.id not in warned:
                warnings.warn(
                    f"failure mode {mode.id} needs {k} technicians but only {technicians} are employed",
                    UnschedulableWarning,
                    stacklevel=2,
                )
                warned.add(mode.id)
            tasks[i] = MaintenanceTask(ev, r, k, tr, note="understaffed")
            continue
        runs = runs_cache.get(tr.name)
        if runs is None:
            runs = runs_cache[tr.name] = access_runs(env.wind_speed, env.wave_height, tr)

        d = ev.occurrence_day - 1 + lag
        start = None
        while d + r <= T:
            if runs[d] < r:
                d += runs[d] + 1
                continue
            x = d
            end = d + r
            while x < end and avail[x] >= k:
                x += 1
            if x == end:
                start = d
                break
            d = x + 1

        if start is None:
            tasks[i] = MaintenanceTask(ev, r, k, tr, note="no window")
            continue
        before = avail[start]
        for x in range(start, start + r):
            avail[x] -= k
        tasks[i] = MaintenanceTask(ev, r, k, tr, start + 1, start + r, before)

    return list(tasks), TechnicianLedger(technicians, np.array(avail, dtype=int))


def write_drv_csv(tasks: Sequence[MaintenanceTask], path) -> None:
    with open(path, "w") as fh:
        fh.write("turbine,mode,occurrence_day,required_technicians,repair_days,available_technicians,day_of_repair\n")
        for t in tasks:
            ev = t.event
            avail = "" if t.available_before is None else t.available_before
            start = "" if t.start_day is None else t.start_day
            fh.write(
                f"{ev.turbine_id},{ev.failure_mode_id},{ev.occurrence_day},"
                f"{t.technicians_needed},{t.repair_days},{avail},{start}\n"
            )
