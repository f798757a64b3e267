"""Atomic (indivisible) passengers and taxicabs: assignment, prices, surge.

The passengers-x-taxicabs market has valuation val(b) - distance(b, t); its
welfare-maximizing matching tells each taxicab whom to serve, minimal
Walrasian prices on the taxicabs induce per-vertex surge prices
r_v = min_t (distance(t, v) + p_t), and three verifiers check the resulting
incentives: passengers self-select correctly (envy-freeness), taxicabs cannot
gain by relocating (best response), and no passenger benefits from
misreporting her value (truthfulness, by enumeration).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

from surgeflow.market import (
    ClearingPrices,
    UnitDemandMarket,
    max_weight_matching,
    minimal_walrasian_prices,
)
from surgeflow.transport import (
    Flow,
    InputError,
    MassVector,
    MetricSpace,
    VerificationError,
    as_fraction,
    min_cost_flow,
    verify_min_cost,
)

ZERO = Fraction(0)


@dataclass(frozen=True)
class Passenger:
    id: Hashable
    location: int
    value: Fraction


@dataclass(frozen=True)
class Taxicab:
    id: Hashable
    location: int


@dataclass(frozen=True)
class DiscreteInstance:
    """Atomic market data.  Passenger list order breaks welfare ties (earlier
    passengers win), so callers should list passengers in id order."""

    metric: MetricSpace
    passengers: Tuple[Passenger, ...]
    taxicabs: Tuple[Taxicab, ...]

    def __post_init__(self) -> None:
        k = self.metric.vertex_count
        pids = [p.id for p in self.passengers]
        tids = [t.id for t in self.taxicabs]
        if len(set(pids)) != len(pids):
            raise InputError("instance: duplicate passenger ids")
        if len(set(tids)) != len(tids):
            raise InputError("instance: duplicate taxicab ids")
        for p in self.passengers:
            if not 0 <= p.location < k:
                raise InputError(f"passenger {p.id!r}: location out of range")
            if p.value < 0:
                raise InputError(f"passenger {p.id!r}: negative value")
        for t in self.taxicabs:
            if not 0 <= t.location < k:
                raise InputError(f"taxicab {t.id!r}: location out of range")

    @classmethod
    def of(
        cls,
        metric: MetricSpace,
        passengers: Sequence[Tuple[Hashable, int, object]],
        taxicabs: Sequence[Tuple[Hashable, int]],
    ) -> "DiscreteInstance":
        ps = tuple(
            Passenger(id=pid, location=loc, value=as_fraction(val, f"passenger {pid!r} value"))
            for (pid, loc, val) in passengers
        )
        ts = tuple(Taxicab(id=tid, location=loc) for (tid, loc) in taxicabs)
        return cls(metric=metric, passengers=ps, taxicabs=ts)

    def passenger_by_id(self, pid: Hashable) -> Passenger:
        for p in self.passengers:
            if p.id == pid:
                return p
        raise InputError(f"unknown passenger {pid!r}")

    def taxicab_by_id(self, tid: Hashable) -> Taxicab:
        for t in self.taxicabs:
            if t.id == tid:
                return t
        raise InputError(f"unknown taxicab {tid!r}")

    def supply_counts(self) -> Tuple[int, ...]:
        counts = [0] * self.metric.vertex_count
        for t in self.taxicabs:
            counts[t.location] += 1
        return tuple(counts)


@dataclass(frozen=True)
class Assignment:
    """Who serves whom, plus the movement it induces: assigned taxicabs drive
    to their passenger's vertex, unassigned ones stay put."""

    serves: Tuple[Tuple[Hashable, Hashable], ...]  # (taxicab id, passenger id)
    induced_flow: Tuple[Tuple[int, ...], ...]
    new_supply: Tuple[int, ...]

    def __post_init__(self) -> None:
        tids = [t for t, _ in self.serves]
        pids = [p for _, p in self.serves]
        if len(set(tids)) != len(tids) or len(set(pids)) != len(pids):
            raise InputError("assignment: serves must be injective both ways")
        k = len(self.new_supply)
        if len(self.induced_flow) != k or any(len(r) != k for r in self.induced_flow):
            raise InputError("assignment: induced_flow must be k x k")
        for j in range(k):
            if sum(self.induced_flow[i][j] for i in range(k)) != self.new_supply[j]:
                raise InputError("assignment: new_supply must be the column sums")

    def passenger_of(self, tid: Hashable) -> Optional[Hashable]:
        for t, p in self.serves:
            if t == tid:
                return p
        return None

    def taxicab_of(self, pid: Hashable) -> Optional[Hashable]:
        for t, p in self.serves:
            if p == pid:
                return t
        return None


@dataclass(frozen=True)
class DiscreteSurgeVector:
    """Per-vertex surge price; None marks a vertex no taxicab can reach
    (empty fleet), i.e. an infinite price."""

    price: Tuple[Optional[Fraction], ...]

    def __post_init__(self) -> None:
        for v, p in enumerate(self.price):
            if p is not None and p < 0:
                raise InputError(f"surge: negative price at vertex {v}")

    def __len__(self) -> int:
        return len(self.price)

    def __getitem__(self, v: int) -> Optional[Fraction]:
        return self.price[v]


@dataclass(frozen=True)
class DiscreteCheck:
    ok: bool
    issues: Tuple[str, ...]


def build_discrete_market(inst: DiscreteInstance) -> UnitDemandMarket:
    """Buyers are passengers, items are taxicabs; a passenger values a taxicab
    at her ride value minus the pickup distance (possibly negative)."""
    dist = inst.metric.distances
    valuation = tuple(
        tuple(p.value - dist[p.location][t.location] for t in inst.taxicabs)
        for p in inst.passengers
    )
    return UnitDemandMarket(
        bidders=tuple(p.id for p in inst.passengers),
        items=tuple(t.id for t in inst.taxicabs),
        valuation=valuation,
    )


def surge_from_taxi_prices(
    inst: DiscreteInstance, p: ClearingPrices
) -> DiscreteSurgeVector:
    """r_v = min over taxicabs of (distance(taxicab, v) + taxicab price)."""
    dist = inst.metric.distances
    k = inst.metric.vertex_count
    prices: List[Optional[Fraction]] = []
    for v in range(k):
        candidates = [dist[t.location][v] + p.price_of(t.id) for t in inst.taxicabs]
        prices.append(min(candidates) if candidates else None)
    return DiscreteSurgeVector(price=tuple(prices))


def _induced_flow(inst: DiscreteInstance, serves: Dict[Hashable, Hashable]):
    k = inst.metric.vertex_count
    flow = [[0] * k for _ in range(k)]
    for t in inst.taxicabs:
        u = t.location
        pid = serves.get(t.id)
        v = u if pid is None else inst.passenger_by_id(pid).location
        flow[u][v] += 1
    new_supply = tuple(sum(flow[i][j] for i in range(k)) for j in range(k))
    return tuple(tuple(row) for row in flow), new_supply


def _counts_flow_cost(inst: DiscreteInstance, flow_counts) -> Fraction:
    dist = inst.metric.distances
    k = inst.metric.vertex_count
    return sum(
        (flow_counts[i][j] * dist[i][j] for i in range(k) for j in range(k)), ZERO
    )


def solve_discrete(
    inst: DiscreteInstance,
) -> Tuple[Assignment, ClearingPrices, DiscreteSurgeVector]:
    """Welfare-maximizing service assignment, minimal Walrasian taxicab
    prices, and the per-vertex surge prices they induce.

    Also certifies two consequences before returning: the induced movement is
    a min-cost flow from the old to the new taxicab distribution, and every
    served pair attains the surge minimum (pickup distance + taxicab price
    equals the surge price at the passenger's vertex).
    """
    mkt = build_discrete_market(inst)
    g = max_weight_matching(mkt)
    p = minimal_walrasian_prices(mkt, g)
    serves: Dict[Hashable, Hashable] = {tid: pid for pid, tid in g.assignment}
    flow_counts, new_supply = _induced_flow(inst, serves)
    a = Assignment(
        serves=tuple((t.id, serves[t.id]) for t in inst.taxicabs if t.id in serves),
        induced_flow=flow_counts,
        new_supply=new_supply,
    )
    r = surge_from_taxi_prices(inst, p)
    n = len(inst.taxicabs)
    if n > 0:
        old = MassVector.of([Fraction(c, n) for c in inst.supply_counts()])
        new = MassVector.of([Fraction(c, n) for c in new_supply])
        opt, duals = min_cost_flow(old, new, inst.metric)
        induced_cost = _counts_flow_cost(inst, flow_counts)
        if induced_cost != opt.cost * n:
            raise VerificationError(
                "induced taxicab movement is not a min-cost flow "
                f"({induced_cost} vs optimal {opt.cost * n})"
            )
        scaled = Flow.from_entries(
            [[Fraction(x, n) for x in row] for row in flow_counts], inst.metric
        )
        check = verify_min_cost(scaled, duals, inst.metric)
        if not check.ok:
            raise VerificationError(
                "induced flow failed optimality certification: "
                + "; ".join(check.issues)
            )
    dist = inst.metric.distances
    for tid, pid in a.serves:
        t = inst.taxicab_by_id(tid)
        b = inst.passenger_by_id(pid)
        lhs = dist[b.location][t.location] + p.price_of(tid)
        if lhs != r[b.location]:
            raise VerificationError(
                f"served pair ({pid!r}, {tid!r}) does not attain the surge "
                f"minimum at vertex {b.location}: {lhs} != {r[b.location]}"
            )
    return a, p, r


def social_welfare_discrete(inst: DiscreteInstance, a: Assignment) -> Fraction:
    """Total value of served passengers minus the cost of a min-cost flow
    from the instance's taxicab distribution to the assignment's new one."""
    served_value = ZERO
    for _tid, pid in a.serves:
        served_value += inst.passenger_by_id(pid).value
    n = len(inst.taxicabs)
    if n == 0:
        return served_value
    old = MassVector.of([Fraction(c, n) for c in inst.supply_counts()])
    new = MassVector.of([Fraction(c, n) for c in a.new_supply])
    move_cost = min_cost_flow(old, new, inst.metric)[0].cost * n
    return served_value - move_cost


def verify_envy_free(
    inst: DiscreteInstance, a: Assignment, r: DiscreteSurgeVector
) -> DiscreteCheck:
    """Passengers self-select: the served ones can afford the surge price at
    their vertex, the unserved ones would not want to pay it (ties allowed)."""
    issues: List[str] = []
    served = {pid for _t, pid in a.serves}
    for b in inst.passengers:
        rv = r[b.location]
        if b.id in served:
            if rv is None or b.value < rv:
                issues.append(
                    f"served passenger {b.id!r} values the ride at {b.value}, "
                    f"below the surge price {rv} at vertex {b.location}"
                )
        else:
            if rv is not None and b.value > rv:
                issues.append(
                    f"unserved passenger {b.id!r} values the ride at {b.value}, "
                    f"above the surge price {rv} at vertex {b.location}"
                )
    return DiscreteCheck(ok=not issues, issues=tuple(issues))


def verify_taxi_best_response(
    inst: DiscreteInstance,
    a: Assignment,
    p: ClearingPrices,
    r: DiscreteSurgeVector,
) -> DiscreteCheck:
    """No taxicab can beat its realized profit by driving to any vertex and
    serving at the surge price there."""
    issues: List[str] = []
    dist = inst.metric.distances
    k = inst.metric.vertex_count
    assigned = {t for t, _p in a.serves}
    for t in inst.taxicabs:
        profit = p.price_of(t.id) if t.id in assigned else ZERO
        for w in range(k):
            rw = r[w]
            if rw is None:
                continue
            alternative = rw - dist[t.location][w]
            if alternative > profit:
                issues.append(
                    f"taxicab {t.id!r} would earn {alternative} at vertex {w}, "
                    f"beating its profit {profit}"
                )
    return DiscreteCheck(ok=not issues, issues=tuple(issues))


def verify_truthful(
    inst: DiscreteInstance, misreport_grid: Sequence
) -> DiscreteCheck:
    """Enumerate misreports for every passenger and confirm none improves her
    quasi-linear utility (true value minus surge price if served, else 0)."""
    if not misreport_grid:
        raise InputError("verify_truthful: misreport grid is empty")
    if len(inst.passengers) > 5:
        raise InputError("verify_truthful: enumeration limited to 5 passengers")
    grid = [as_fraction(x, "misreport") for x in misreport_grid]
    issues: List[str] = []
    a, _p, r = solve_discrete(inst)

    def utility(b: Passenger, assignment: Assignment, surge: DiscreteSurgeVector) -> Fraction:
        if assignment.taxicab_of(b.id) is None:
            return ZERO
        rv = surge[b.location]
        assert rv is not None  # served implies a taxicab exists
        return b.value - rv

    for idx, b in enumerate(inst.passengers):
        truthful = utility(b, a, r)
        for x in grid:
            if x < 0 or x == b.value:
                continue
            reported = list(inst.passengers)
            reported[idx] = Passenger(id=b.id, location=b.location, value=x)
            alt_inst = DiscreteInstance(
                metric=inst.metric,
                passengers=tuple(reported),
                taxicabs=inst.taxicabs,
            )
            alt_a, _alt_p, alt_r = solve_discrete(alt_inst)
            gained = utility(b, alt_a, alt_r)
            if gained > truthful:
                issues.append(
                    f"passenger {b.id!r} gains {gained - truthful} by "
                    f"reporting {x} instead of {b.value}"
                )
    return DiscreteCheck(ok=not issues, issues=tuple(issues))
