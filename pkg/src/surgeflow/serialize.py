"""JSON instance files: parsing, validation, and round-trip serialization.

Rationals are encoded as strings ("1/3", "2") so fixtures stay exact; JSON
floats are rejected outright.  A file describes either a continuous instance
(supply/demand mass vectors, optionally surge prices to verify) or a discrete
one (passenger/taxicab lists) — never both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from surgeflow.continuous import SurgeVector, ZeroDemandConvention
from surgeflow.discrete import DiscreteInstance, Passenger, Taxicab
from surgeflow.transport import (
    InputError,
    MassVector,
    MetricSpace,
    metric_closure,
)

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class InstanceFile:
    schema_version: str
    metric: MetricSpace
    supply: Optional[MassVector] = None
    demand: Optional[MassVector] = None
    passengers: Optional[Tuple[Passenger, ...]] = None
    taxicabs: Optional[Tuple[Taxicab, ...]] = None
    surge_prices: Optional[SurgeVector] = None
    new_supply: Optional[MassVector] = None

    def __post_init__(self) -> None:
        continuous = self.supply is not None or self.demand is not None
        discrete = self.passengers is not None or self.taxicabs is not None
        if continuous and discrete:
            raise InputError(
                "instance: continuous fields (supply/demand) and discrete "
                "fields (passengers/taxicabs) cannot be mixed"
            )
        if not continuous and not discrete:
            raise InputError(
                "instance: needs either supply+demand or passengers+taxicabs"
            )
        if continuous and (self.supply is None or self.demand is None):
            raise InputError("instance: supply and demand must come together")
        if discrete and (self.passengers is None or self.taxicabs is None):
            raise InputError(
                "instance: passengers and taxicabs must come together"
            )
        if discrete and (self.surge_prices is not None or self.new_supply is not None):
            raise InputError(
                "instance: surge_prices/new_supply only apply to continuous files"
            )

    @property
    def kind(self) -> str:
        return "continuous" if self.supply is not None else "discrete"

    def discrete_instance(self) -> DiscreteInstance:
        if self.kind != "discrete":
            raise InputError("not a discrete instance")
        return DiscreteInstance(
            metric=self.metric, passengers=self.passengers, taxicabs=self.taxicabs
        )


def _fraction_field(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise InputError(f"{where}: expected a rational, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise InputError(
            f"{where}: floats are not accepted; write rationals as \"p/q\" strings"
        )
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"{where}: not a rational: {value!r}") from exc
    raise InputError(f"{where}: expected a rational, got {type(value).__name__}")


def _mass_field(value, where: str) -> MassVector:
    if not isinstance(value, list):
        raise InputError(f"{where}: expected a list of rationals")
    return MassVector(
        tuple(_fraction_field(x, f"{where}[{i}]") for i, x in enumerate(value))
    )


def _metric_field(value) -> MetricSpace:
    if not isinstance(value, dict):
        raise InputError("metric: expected an object")
    has_matrix = "matrix" in value
    has_edges = "edges" in value
    if has_matrix == has_edges:
        raise InputError("metric: provide exactly one of 'matrix' or 'edges'")
    if has_matrix:
        matrix = value["matrix"]
        extra = set(value) - {"matrix", "closure"}
        if extra:
            raise InputError(f"metric: unexpected fields {sorted(extra)}")
        closure = value.get("closure", False)
        if not isinstance(closure, bool):
            raise InputError("metric.closure: expected true or false")
        if not isinstance(matrix, list) or not all(
            isinstance(row, list) for row in matrix
        ):
            raise InputError("metric.matrix: expected a list of rows")
        rows = []
        for i, row in enumerate(matrix):
            parsed_row = []
            for j, x in enumerate(row):
                if x is None:
                    if not closure:
                        raise InputError(
                            f"metric.matrix[{i}][{j}]: null (missing edge) "
                            "requires \"closure\": true"
                        )
                    parsed_row.append(None)
                else:
                    parsed_row.append(
                        _fraction_field(x, f"metric.matrix[{i}][{j}]")
                    )
            rows.append(parsed_row)
        if closure:
            return metric_closure(rows, len(rows))
        return MetricSpace.from_rows(rows)
    extra = set(value) - {"edges", "vertex_count"}
    if extra:
        raise InputError(f"metric: unexpected fields {sorted(extra)}")
    if "vertex_count" not in value:
        raise InputError("metric: edge form needs 'vertex_count'")
    k = value["vertex_count"]
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise InputError("metric.vertex_count: expected a positive integer")
    edges = value["edges"]
    if not isinstance(edges, list):
        raise InputError("metric.edges: expected a list of [u, v, weight]")
    parsed = []
    for idx, e in enumerate(edges):
        if not isinstance(e, list) or len(e) != 3:
            raise InputError(f"metric.edges[{idx}]: expected [u, v, weight]")
        u, v, w = e
        if not isinstance(u, int) or not isinstance(v, int):
            raise InputError(f"metric.edges[{idx}]: endpoints must be integers")
        parsed.append((u, v, _fraction_field(w, f"metric.edges[{idx}] weight")))
    from surgeflow.transport import metric_from_edges

    return metric_from_edges(k, parsed)


_KNOWN_FIELDS = {
    "schema_version",
    "metric",
    "supply",
    "demand",
    "passengers",
    "taxicabs",
    "surge_prices",
    "new_supply",
}


def parse_instance_data(data, where: str = "instance") -> InstanceFile:
    if not isinstance(data, dict):
        raise InputError(f"{where}: expected a JSON object")
    unknown = set(data) - _KNOWN_FIELDS
    if unknown:
        raise InputError(f"{where}: unknown fields {sorted(unknown)}")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InputError(
            f"{where}.schema_version: expected {SCHEMA_VERSION!r}, got {version!r}"
        )
    if "metric" not in data:
        raise InputError(f"{where}: missing metric")
    metric = _metric_field(data["metric"])
    k = metric.vertex_count

    def mass(key: str) -> Optional[MassVector]:
        if key not in data:
            return None
        vec = _mass_field(data[key], f"{where}.{key}")
        if len(vec) != k:
            raise InputError(
                f"{where}.{key}: expected {k} entries to match the metric"
            )
        return vec

    passengers = None
    if "passengers" in data:
        if not isinstance(data["passengers"], list):
            raise InputError(f"{where}.passengers: expected a list")
        passengers = []
        for i, p in enumerate(data["passengers"]):
            fields = {"id", "location", "value"}
            if not isinstance(p, dict) or set(p) != fields:
                raise InputError(
                    f"{where}.passengers[{i}]: expected id/location/value"
                )
            if not isinstance(p["location"], int) or isinstance(p["location"], bool):
                raise InputError(
                    f"{where}.passengers[{i}].location: expected an integer"
                )
            passengers.append(
                Passenger(
                    id=p["id"],
                    location=p["location"],
                    value=_fraction_field(
                        p["value"], f"{where}.passengers[{i}].value"
                    ),
                )
            )
        passengers = tuple(passengers)
    taxicabs = None
    if "taxicabs" in data:
        if not isinstance(data["taxicabs"], list):
            raise InputError(f"{where}.taxicabs: expected a list")
        taxicabs = []
        for i, t in enumerate(data["taxicabs"]):
            if not isinstance(t, dict) or set(t) != {"id", "location"}:
                raise InputError(f"{where}.taxicabs[{i}]: expected id/location")
            if not isinstance(t["location"], int) or isinstance(t["location"], bool):
                raise InputError(
                    f"{where}.taxicabs[{i}].location: expected an integer"
                )
            taxicabs.append(Taxicab(id=t["id"], location=t["location"]))
        taxicabs = tuple(taxicabs)
    surge = None
    if "surge_prices" in data:
        vec = data["surge_prices"]
        if not isinstance(vec, list) or len(vec) != k:
            raise InputError(
                f"{where}.surge_prices: expected a list of {k} rationals"
            )
        surge = SurgeVector(
            price=tuple(
                _fraction_field(x, f"{where}.surge_prices[{i}]")
                for i, x in enumerate(vec)
            ),
            zero_demand_convention=ZeroDemandConvention.Zero,
        )
    inst = InstanceFile(
        schema_version=version,
        metric=metric,
        supply=mass("supply"),
        demand=mass("demand"),
        passengers=passengers,
        taxicabs=taxicabs,
        surge_prices=surge,
        new_supply=mass("new_supply"),
    )
    # discrete instances get their location/id checks from the domain type
    if inst.kind == "discrete":
        inst.discrete_instance()
    return inst


def parse_instance(path: str) -> InstanceFile:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"instance file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    return parse_instance_data(data, where=path)


def _frac_str(x: Fraction) -> str:
    return str(x)


def serialize_instance(inst: InstanceFile) -> dict:
    """Inverse of parse_instance_data (round-trips exactly)."""
    out: dict = {
        "schema_version": inst.schema_version,
        "metric": {
            "matrix": [
                [_frac_str(x) for x in row] for row in inst.metric.distances
            ]
        },
    }
    if inst.supply is not None:
        out["supply"] = [_frac_str(x) for x in inst.supply]
        out["demand"] = [_frac_str(x) for x in inst.demand]
    if inst.passengers is not None:
        out["passengers"] = [
            {"id": p.id, "location": p.location, "value": _frac_str(p.value)}
            for p in inst.passengers
        ]
        out["taxicabs"] = [
            {"id": t.id, "location": t.location} for t in inst.taxicabs
        ]
    if inst.surge_prices is not None:
        out["surge_prices"] = [_frac_str(x) for x in inst.surge_prices.price]
    if inst.new_supply is not None:
        out["new_supply"] = [_frac_str(x) for x in inst.new_supply]
    return out
