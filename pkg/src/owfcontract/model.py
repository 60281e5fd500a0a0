"""Domain types and configuration loading for the wind farm maintenance model.

Every type here is a frozen dataclass. A run starts by passing a raw JSON
document through :func:`validate_config`, which returns a :class:`Bundle`
that is shared read-only by every Monte Carlo sample.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

TRANSPORT_POLICIES = ("ctv_only", "sample_use_rate")
ORDER_POLICIES = ("fifo", "random_order")
TECHNICIAN_ROUNDING = ("ceil", "nearest")
USE_RATE_TOL = 1e-9


class ConfigError(ValueError):
    """Raised when a configuration document violates the schema or an invariant."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}" if path else reason)


@dataclass(frozen=True)
class TurbineSpec:
    rated_power_kw: float
    cut_in_speed: float = 4.0
    rated_speed: float = 13.0
    cut_out_speed: float = 25.0


@dataclass(frozen=True)
class Turbine:
    id: int
    base_distance_km: float


@dataclass(frozen=True)
class WindFarm:
    turbines: tuple[Turbine, ...]
    spec: TurbineSpec
    # Layout inputs are kept so the canonical form re-parses identically.
    distance_to_center_km: float | None = None
    area_km2: float | None = None

    @property
    def n(self) -> int:
        return len(self.turbines)

    @property
    def distances(self) -> tuple[float, ...]:
        return tuple(t.base_distance_km for t in self.turbines)


@dataclass(frozen=True)
class FailureMode:
    id: int
    name: str
    daily_rate: float
    repair_hours: float
    material_cost: float
    required_technicians: int
    # Catalog value before rounding, e.g. 2.41 technicians.
    raw_technicians: float | None = None


@dataclass(frozen=True)
class ContractTerms:
    """Decision variables of the contract plus the fixed fee and salary.

    The three penalty thresholds are tied to ``threshold_ld`` and both caps
    are ``cap_fraction * fixed_fee`` (see :attr:`cap_eur`).
    """

    technicians: int
    threshold_us: float
    threshold_ld: float
    cap_fraction: float
    fixed_fee: float
    annual_salary: float = 44_000.0

    @property
    def cap_eur(self) -> float:
        return self.cap_fraction * self.fixed_fee

    def with_terms(self, **changes: Any) -> "ContractTerms":
        terms = replace(self, **changes)
        _check_contract(terms, "contract")
        return terms


@dataclass(frozen=True)
class TransportSpec:
    name: str
    speed: float
    hourly_cost: float
    per_km_cost: float
    use_rate: float
    max_wind_access: float
    max_wave_access: float


@dataclass(frozen=True)
class WeatherModel:
    weibull_shape: float
    weibull_scale: float
    wave_mean: float
    wave_std: float


@dataclass(frozen=True)
class LognormalPrice:
    """Daily prices drawn i.i.d. with arithmetic mean ``mean`` and log-space std ``sigma``."""

    mean: float
    sigma: float


@dataclass(frozen=True)
class SimConfig:
    horizon_days: int
    samples: int
    master_seed: int
    price: tuple[float, ...] | LognormalPrice
    hours_per_workday: float = 8.0
    startup_energy_mwh: float = 0.06
    transport_policy: str = "ctv_only"
    order_policy: str = "fifo"
    mobilization_lag_days: int = 0


@dataclass(frozen=True)
class Bundle:
    farm: WindFarm
    catalog: tuple[FailureMode, ...]
    contract: ContractTerms
    transports: tuple[TransportSpec, ...]
    weather: WeatherModel
    sim: SimConfig
    technician_rounding: str = "ceil"

    def with_sim(self, **changes: Any) -> "Bundle":
        return replace(self, sim=replace(self.sim, **changes))

    def with_contract(self, contract: ContractTerms) -> "Bundle":
        return replace(self, contract=contract)

    @property
    def primary_transport(self) -> TransportSpec:
        """The transport with the highest use rate (the CTV in the reference case)."""
        return max(self.transports, key=lambda t: t.use_rate)


def default_layout(n: int, distance_to_center_km: float, area_km2: float) -> list[float]:
    """One-way distances from the O&M base to ``n`` turbines on a square grid.

    The grid fills a square of the given area whose centre lies
    ``distance_to_center_km`` from the base. Turbines are placed row by row on
    cell centres; a partially filled last row is centred horizontally.
    """
    side = math.sqrt(area_km2)
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    dx = side / cols
    dy = side / rows
    out = []
    for r in range(rows):
        k = min(cols, n - r * cols)
        y = (r + 0.5) * dy - side / 2
        x0 = -(k * dx) / 2
        for c in range(k):
            x = x0 + (c + 0.5) * dx
            out.append(math.hypot(distance_to_center_km + x, y))
    return out


# -- validation ---------------------------------------------------------------

def _get(doc: Mapping[str, Any], key: str, path: str, default: Any = ...) -> Any:
    if not isinstance(doc, Mapping):
        raise ConfigError(path, "expected an object")
    if key in doc:
        return doc[key]
    if default is ...:
        raise ConfigError(f"{path}.{key}", "required field missing")
    return default


def _num(doc, key, path, default=..., integer=False):
    val = _get(doc, key, path, default)
    where = f"{path}.{key}"
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(where, f"expected a number, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(where, "must be finite")
    if integer:
        if int(val) != val:
            raise ConfigError(where, f"expected an integer, got {val!r}")
        return int(val)
    return float(val)


def _require(cond: bool, path: str, reason: str) -> None:
    if not cond:
        raise ConfigError(path, reason)


def _parse_turbine(doc) -> TurbineSpec:
    p = "turbine"
    spec = TurbineSpec(
        rated_power_kw=_num(doc, "rated_power_kw", p),
        cut_in_speed=_num(doc, "cut_in_speed", p, 4.0),
        rated_speed=_num(doc, "rated_speed", p, 13.0),
        cut_out_speed=_num(doc, "cut_out_speed", p, 25.0),
    )
    _require(spec.rated_power_kw > 0, f"{p}.rated_power_kw", "rated_power_kw > 0 violated")
    _require(
        0 < spec.cut_in_speed < spec.rated_speed < spec.cut_out_speed,
        p,
        "0 < cut_in_speed < rated_speed < cut_out_speed violated",
    )
    return spec


def _parse_farm(doc, spec: TurbineSpec) -> WindFarm:
    p = "farm"
    explicit = _get(doc, "distances_km", p, None)
    d_center = _get(doc, "distance_to_center_km", p, None)
    area = _get(doc, "area_km2", p, None)
    if explicit is not None:
        _require(isinstance(explicit, list), f"{p}.distances_km", "expected a list")
        dists = []
        for i, z in enumerate(explicit):
            _require(
                isinstance(z, (int, float)) and not isinstance(z, bool),
                f"{p}.distances_km[{i}]",
                "expected a number",
            )
            dists.append(float(z))
        if "n_turbines" in doc:
            n = _num(doc, "n_turbines", p, integer=True)
            _require(n == len(dists), f"{p}.n_turbines", "does not match len(distances_km)")
    else:
        n = _num(doc, "n_turbines", p, integer=True)
        _require(n >= 1, f"{p}.n_turbines", "N >= 1 violated")
        d_center = _num(doc, "distance_to_center_km", p)
        area = _num(doc, "area_km2", p)
        _require(d_center > 0, f"{p}.distance_to_center_km", "must be > 0")
        _require(area > 0, f"{p}.area_km2", "must be > 0")
        dists = default_layout(n, d_center, area)
    _require(len(dists) >= 1, p, "N >= 1 violated")
    for i, z in enumerate(dists):
        _require(z > 0, f"{p}.distances_km[{i}]", "Z_w > 0 violated")
    turbines = tuple(Turbine(id=i + 1, base_distance_km=z) for i, z in enumerate(dists))
    if explicit is not None:
        d_center = area = None
    return WindFarm(
        turbines=turbines,
        spec=spec,
        distance_to_center_km=None if d_center is None else float(d_center),
        area_km2=None if area is None else float(area),
    )


def _round_technicians(raw: float, rule: str) -> int:
    if rule == "ceil":
        return max(1, math.ceil(raw - 1e-12))
    return max(1, int(math.floor(raw + 0.5)))


def _parse_failures(docs, rounding: str) -> tuple[FailureMode, ...]:
    _require(isinstance(docs, list) and len(docs) > 0, "failures", "expected a non-empty list")
    modes = []
    seen = set()
    for i, doc in enumerate(docs):
        p = f"failures[{i}]"
        mid = _num(doc, "id", p, integer=True)
        _require(mid not in seen, f"{p}.id", "duplicate failure mode id")
        seen.add(mid)
        name = _get(doc, "name", p, f"mode {mid}")
        _require(isinstance(name, str), f"{p}.name", "expected a string")
        rate = _num(doc, "daily_rate", p)
        hours = _num(doc, "repair_hours", p)
        cost = _num(doc, "material_cost", p)
        raw_tech = _num(doc, "required_technicians", p)
        _require(rate >= 0, f"{p}.daily_rate", "daily_rate >= 0 violated")
        _require(rate <= 1, f"{p}.daily_rate", "daily_rate <= 1 violated (rate is a daily probability)")
        _require(hours > 0, f"{p}.repair_hours", "repair_hours > 0 violated")
        _require(cost >= 0, f"{p}.material_cost", "material_cost >= 0 violated")
        _require(raw_tech > 0, f"{p}.required_technicians", "required_technicians >= 1 violated")
        modes.append(
            FailureMode(
                id=mid,
                name=name,
                daily_rate=rate,
                repair_hours=hours,
                material_cost=cost,
                required_technicians=_round_technicians(raw_tech, rounding),
                raw_technicians=raw_tech,
            )
        )
    return tuple(modes)


def _check_contract(c: ContractTerms, p: str) -> None:
    _require(c.technicians >= 1, f"{p}.technicians", "Q >= 1 violated")
    _require(0 < c.threshold_us <= 1, f"{p}.threshold_us", "0 < R_US <= 1 violated")
    _require(0 < c.threshold_ld <= 1, f"{p}.threshold_ld", "0 < R_LD <= 1 violated")
    _require(c.cap_fraction >= 0, f"{p}.cap_fraction", "lambda >= 0 violated")
    _require(c.fixed_fee >= 0, f"{p}.fixed_fee", "C_Fix >= 0 violated")
    _require(c.annual_salary >= 0, f"{p}.annual_salary", "annual_salary >= 0 violated")


def _parse_contract(doc) -> ContractTerms:
    p = "contract"
    c = ContractTerms(
        technicians=_num(doc, "technicians", p, integer=True),
        threshold_us=_num(doc, "threshold_us", p),
        threshold_ld=_num(doc, "threshold_ld", p),
        cap_fraction=_num(doc, "cap_fraction", p),
        fixed_fee=_num(doc, "fixed_fee", p),
        annual_salary=_num(doc, "annual_salary", p, 44_000.0),
    )
    _check_contract(c, p)
    return c


def _parse_transports(docs) -> tuple[TransportSpec, ...]:
    _require(isinstance(docs, list) and len(docs) > 0, "transports", "expected a non-empty list")
    out = []
    for i, doc in enumerate(docs):
        p = f"transports[{i}]"
        name = _get(doc, "name", p)
        _require(isinstance(name, str), f"{p}.name", "expected a string")
        t = TransportSpec(
            name=name,
            speed=_num(doc, "speed", p, 0.0),
            hourly_cost=_num(doc, "hourly_cost", p),
            per_km_cost=_num(doc, "per_km_cost", p),
            use_rate=_num(doc, "use_rate", p, 1.0 if len(docs) == 1 else ...),
            max_wind_access=_num(doc, "max_wind_access", p),
            max_wave_access=_num(doc, "max_wave_access", p),
        )
        for key in ("speed", "hourly_cost", "per_km_cost", "use_rate"):
            _require(getattr(t, key) >= 0, f"{p}.{key}", f"{key} >= 0 violated")
        out.append(t)
    total = sum(t.use_rate for t in out)
    _require(abs(total - 1.0) <= USE_RATE_TOL, "transports", f"use rates sum to {total!r}, expected 1")
    return tuple(out)


def _parse_weather(doc) -> WeatherModel:
    p = "weather"
    w = WeatherModel(
        weibull_shape=_num(doc, "weibull_shape", p),
        weibull_scale=_num(doc, "weibull_scale", p),
        wave_mean=_num(doc, "wave_mean", p),
        wave_std=_num(doc, "wave_std", p),
    )
    _require(w.weibull_shape > 0, f"{p}.weibull_shape", "weibull_shape > 0 violated")
    _require(w.weibull_scale > 0, f"{p}.weibull_scale", "weibull_scale > 0 violated")
    _require(w.wave_std >= 0, f"{p}.wave_std", "wave_std >= 0 violated")
    return w


def _parse_sim(doc) -> SimConfig:
    p = "sim"
    T = _num(doc, "horizon_days", p, integer=True)
    _require(T >= 1, f"{p}.horizon_days", "T >= 1 violated")
    samples = _num(doc, "samples", p, 2000, integer=True)
    _require(samples >= 1, f"{p}.samples", "samples >= 1 violated")
    seed = _num(doc, "master_seed", p, 0, integer=True)
    _require(0 <= seed < 2**64, f"{p}.master_seed", "must be a 64-bit unsigned integer")
    price_doc = _get(doc, "price", p)
    if isinstance(price_doc, list):
        curve = []
        for i, s in enumerate(price_doc):
            _require(
                isinstance(s, (int, float)) and not isinstance(s, bool) and s >= 0,
                f"{p}.price[{i}]",
                "prices must be non-negative numbers",
            )
            curve.append(float(s))
        _require(len(curve) == T, f"{p}.price", f"price curve length mismatch ({len(curve)} != T={T})")
        price: tuple[float, ...] | LognormalPrice = tuple(curve)
    else:
        ln = _get(price_doc, "lognormal", f"{p}.price")
        price = LognormalPrice(
            mean=_num(ln, "mean", f"{p}.price.lognormal"),
            sigma=_num(ln, "sigma", f"{p}.price.lognormal"),
        )
        _require(price.mean > 0, f"{p}.price.lognormal.mean", "mean > 0 violated")
        _require(price.sigma >= 0, f"{p}.price.lognormal.sigma", "sigma >= 0 violated")
    sim = SimConfig(
        horizon_days=T,
        samples=samples,
        master_seed=seed,
        price=price,
        hours_per_workday=_num(doc, "hours_per_workday", p, 8.0),
        startup_energy_mwh=_num(doc, "startup_energy_mwh", p, 0.06),
        transport_policy=_get(doc, "transport_policy", p, "ctv_only"),
        order_policy=_get(doc, "order_policy", p, "fifo"),
        mobilization_lag_days=_num(doc, "mobilization_lag_days", p, 0, integer=True),
    )
    _require(sim.hours_per_workday > 0, f"{p}.hours_per_workday", "must be > 0")
    _require(sim.startup_energy_mwh >= 0, f"{p}.startup_energy_mwh", "K_UP >= 0 violated")
    _require(sim.transport_policy in TRANSPORT_POLICIES, f"{p}.transport_policy", f"one of {TRANSPORT_POLICIES}")
    _require(sim.order_policy in ORDER_POLICIES, f"{p}.order_policy", f"one of {ORDER_POLICIES}")
    _require(sim.mobilization_lag_days >= 0, f"{p}.mobilization_lag_days", "must be >= 0")
    return sim


def validate_config(raw: Mapping[str, Any]) -> Bundle:
    """Parse and validate a raw configuration document.

    Raises
    ------
    ConfigError
        On any schema or invariant violation, carrying the offending field path.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("", "configuration must be a JSON object")
    rounding = raw.get("technician_rounding", "ceil")
    _require(rounding in TECHNICIAN_ROUNDING, "technician_rounding", f"one of {TECHNICIAN_ROUNDING}")
    spec = _parse_turbine(_get(raw, "turbine", ""))
    farm = _parse_farm(_get(raw, "farm", ""), spec)
    catalog = _parse_failures(_get(raw, "failures", ""), rounding)
    contract = _parse_contract(_get(raw, "contract", ""))
    transports = _parse_transports(_get(raw, "transports", ""))
    weather = _parse_weather(_get(raw, "weather", ""))
    sim = _parse_sim(_get(raw, "sim", ""))
    return Bundle(farm, catalog, contract, transports, weather, sim, rounding)


def to_document(bundle: Bundle) -> dict[str, Any]:
    """Canonical JSON-ready form of a bundle; ``validate_config`` re-parses it identically."""
    farm = bundle.farm
    if farm.distance_to_center_km is not None:
        farm_doc: dict[str, Any] = {
            "n_turbines": farm.n,
            "distance_to_center_km": farm.distance_to_center_km,
            "area_km2": farm.area_km2,
        }
    else:
        farm_doc = {"distances_km": list(farm.distances)}
    sim = bundle.sim
    price: Any = list(sim.price) if isinstance(sim.price, tuple) else {
        "lognormal": {"mean": sim.price.mean, "sigma": sim.price.sigma}
    }
    return {
        "technician_rounding": bundle.technician_rounding,
        "farm": farm_doc,
        "turbine": {
            "rated_power_kw": farm.spec.rated_power_kw,
            "cut_in_speed": farm.spec.cut_in_speed,
            "rated_speed": farm.spec.rated_speed,
            "cut_out_speed": farm.spec.cut_out_speed,
        },
        "failures": [
            {
                "id": m.id,
                "name": m.name,
                "daily_rate": m.daily_rate,
                "repair_hours": m.repair_hours,
                "material_cost": m.material_cost,
                "required_technicians": m.raw_technicians
                if m.raw_technicians is not None
                else m.required_technicians,
            }
            for m in bundle.catalog
        ],
        "transports": [
            {
                "name": t.name,
                "speed": t.speed,
                "hourly_cost": t.hourly_cost,
                "per_km_cost": t.per_km_cost,
                "use_rate": t.use_rate,
                "max_wind_access": t.max_wind_access,
                "max_wave_access": t.max_wave_access,
            }
            for t in bundle.transports
        ],
        "contract": {
            "technicians": bundle.contract.technicians,
            "threshold_us": bundle.contract.threshold_us,
            "threshold_ld": bundle.contract.threshold_ld,
            "cap_fraction": bundle.contract.cap_fraction,
            "fixed_fee": bundle.contract.fixed_fee,
            "annual_salary": bundle.contract.annual_salary,
        },
        "weather": {
            "weibull_shape": bundle.weather.weibull_shape,
            "weibull_scale": bundle.weather.weibull_scale,
            "wave_mean": bundle.weather.wave_mean,
            "wave_std": bundle.weather.wave_std,
        },
        "sim": {
            "horizon_days": sim.horizon_days,
            "samples": sim.samples,
            "master_seed": sim.master_seed,
            "price": price,
            "hours_per_workday": sim.hours_per_workday,
            "startup_energy_mwh": sim.startup_energy_mwh,
            "transport_policy": sim.transport_policy,
            "order_policy": sim.order_policy,
            "mobilization_lag_days": sim.mobilization_lag_days,
        },
    }


def config_hash(bundle: Bundle) -> str:
    text = json.dumps(to_document(bundle), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def load_config(path: str | Path) -> Bundle:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return validate_config(raw)


def reference_document() -> dict[str, Any]:
    """The bundled offshore case study: 62 turbines, 19 failure modes, three transports."""
    text = resources.files("owfcontract").joinpath("data/reference_case.json").read_text()
    return json.loads(text)


def reference_bundle(**sim_overrides: Any) -> Bundle:
    bundle = validate_config(reference_document())
    return bundle.with_sim(**sim_overrides) if sim_overrides else bundle


def dump_document(doc: Mapping[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


__all__ = [
    "Bundle",
    "ConfigError",
    "ContractTerms",
    "FailureMode",
    "LognormalPrice",
    "SimConfig",
    "TransportSpec",
    "Turbine",
    "TurbineSpec",
    "WeatherModel",
    "WindFarm",
    "config_hash",
    "default_layout",
    "load_config",
    "reference_bundle",
    "reference_document",
    "to_document",
    "validate_config",
]

