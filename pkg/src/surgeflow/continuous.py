"""Per-vertex surge prices for continuous (divisible) supply and demand.

Pipeline: solve the min-cost transport problem from supply to demand, turn the
flow's support into a unit-demand market (one bidder and one item per support
edge, valuations C - distance(origin, destination)), clear it at minimal
Walrasian prices, and read the surge price of each demanded vertex off its
items' common price.  The resulting prices make every flow edge a best
response for the taxicabs that move along it, which the verifier here checks
directly over the union of all optimal flows' supports.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from surgeflow.market import (
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
    usable_optimal_edges,
)

ZERO = Fraction(0)
ONE = Fraction(1)


class ZeroDemandConvention(enum.Enum):
    """How vertices without demand are priced.  Cosmetic for equilibrium
    checking: the serving probability at such vertices is 0, so movement
    utility is -distance regardless of the price."""

    Zero = "zero"
    One = "one"
    CMinusZero = "c-minus-zero"


@dataclass(frozen=True)
class SurgeVector:
    """Per-vertex nonnegative surge prices plus the zero-demand convention
    they were produced under."""

    price: Tuple[Fraction, ...]
    zero_demand_convention: ZeroDemandConvention = ZeroDemandConvention.Zero

    def __post_init__(self) -> None:
        for v, p in enumerate(self.price):
            if p < 0:
                raise InputError(f"surge: negative price at vertex {v}")

    @classmethod
    def of(
        cls,
        values: Sequence,
        convention: ZeroDemandConvention = ZeroDemandConvention.Zero,
    ) -> "SurgeVector":
        return cls(
            price=tuple(as_fraction(x, f"surge[{v}]") for v, x in enumerate(values)),
            zero_demand_convention=convention,
        )

    def __len__(self) -> int:
        return len(self.price)

    def __getitem__(self, v: int) -> Fraction:
        return self.price[v]


@dataclass(frozen=True)
class EquilibriumReport:
    """Outcome of equilibrium verification.  ``violations`` holds tuples
    (origin u, flowed-to v, better w, utility gap)."""

    ok: bool
    violations: Tuple[Tuple[int, int, int, Fraction], ...]
    checked_edge_set: str

    def __post_init__(self) -> None:
        if self.ok != (not self.violations):
            raise InputError("report: ok flag contradicts the violation list")


def taxicab_utility(
    u: int,
    v: int,
    s_prime: MassVector,
    r: SurgeVector,
    d: MassVector,
    m: MetricSpace,
) -> Fraction:
    """Expected earnings of a taxicab moving from u to v when the whole fleet
    redistributes to s': the surge price at v scaled by the probability of
    picking up a passenger there, minus the distance travelled.  The serving
    probability min(s'_v, d_v)/s'_v is taken to be 0 when s'_v = 0."""
    k = m.vertex_count
    if not (0 <= u < k and 0 <= v < k):
        raise InputError("taxicab_utility: vertex out of range")
    if len(s_prime) != k or len(d) != k or len(r) != k:
        raise InputError("taxicab_utility: dimension mismatch")
    if s_prime[v] == 0:
        probability = ZERO
    else:
        probability = min(s_prime[v], d[v]) / s_prime[v]
    return r[v] * probability - m.distances[u][v]


def _deviation_utility(
    u: int, w: int, s_prime: MassVector, r: SurgeVector, d: MassVector, m: MetricSpace
) -> Fraction:
    """Utility of a single taxicab deviating to w.  Differs from
    taxicab_utility in one point: a lone arrival at an *empty* vertex with
    waiting demand serves it for sure (the s' -> 0+ limit), rather than
    inheriting the 0/0 = 0 convention of the aggregate formula."""
    if s_prime[w] == 0 and d[w] > 0:
        return r[w] - m.distances[u][w]
    return taxicab_utility(u, w, s_prime, r, d, m)


def build_market_from_flow(f: Flow, m: MetricSpace) -> UnitDemandMarket:
    """One bidder and one item per support edge of the flow; bidder (w, z)
    values item (x, y) at C - distance(w, y) with C = max distance + 1."""
    support = sorted(f.support)
    if not support:
        raise InputError("build_market_from_flow: flow has empty support")
    k = m.vertex_count
    c = max(m.distances[i][j] for i in range(k) for j in range(k)) + 1
    valuation = tuple(
        tuple(c - m.distances[w][y] for (_x, y) in support) for (w, _z) in support
    )
    return UnitDemandMarket(
        bidders=tuple(support), items=tuple(support), valuation=valuation
    )


def value_scale(m: MetricSpace) -> Fraction:
    """The constant C used in market valuations: max distance + 1."""
    k = m.vertex_count
    return max(m.distances[i][j] for i in range(k) for j in range(k)) + 1


def continuous_surge_prices(
    s: MassVector,
    d: MassVector,
    m: MetricSpace,
    convention: ZeroDemandConvention = ZeroDemandConvention.Zero,
) -> Tuple[SurgeVector, Flow]:
    """Surge prices making some (equivalently, every) min-cost flow from s to
    d a best-response redistribution when the fleet ends up at d.

    Every item in the induced market whose destination is y gets the same
    minimal Walrasian price p_y (asserted); the surge price of y is C - p_y.
    Vertices without demand are priced by ``convention``.  The output is
    re-verified before returning.
    """
    f, _duals = min_cost_flow(s, d, m)
    mkt = build_market_from_flow(f, m)
    g = max_weight_matching(mkt)
    p = minimal_walrasian_prices(mkt, g)
    c = value_scale(m)
    by_destination: Dict[int, Fraction] = {}
    for item in mkt.items:
        _x, y = item
        price = p.price_of(item)
        if y in by_destination:
            if by_destination[y] != price:
                raise VerificationError(
                    f"items with destination {y} received different prices "
                    f"({by_destination[y]} vs {price})"
                )
        else:
            by_destination[y] = price
    k = m.vertex_count
    surge: List[Fraction] = []
    for v in range(k):
        if d[v] > 0:
            surge.append(c - by_destination[v])
        elif convention is ZeroDemandConvention.Zero:
            surge.append(ZERO)
        elif convention is ZeroDemandConvention.One:
            surge.append(ONE)
        else:
            surge.append(c)
    r = SurgeVector(price=tuple(surge), zero_demand_convention=convention)
    report = verify_equilibrium_continuous(s, d, r, d, m)
    if not report.ok:
        raise VerificationError(
            "computed surge prices failed equilibrium verification: "
            f"{report.violations[:3]}"
        )
    return r, f


def verify_equilibrium_continuous(
    s: MassVector,
    s_prime: MassVector,
    r: SurgeVector,
    d: MassVector,
    m: MetricSpace,
) -> EquilibriumReport:
    """Check that moving along every optimal flow edge is a taxicab best
    response.

    The check covers the union of the supports of *all* min-cost flows from s
    to s' (tight edges carrying flow in some alternative optimum), so a pass
    certifies the equilibrium condition for every optimal redistribution, not
    just the one the solver happened to return.
    """
    f, duals = min_cost_flow(s, s_prime, m)
    usable = usable_optimal_edges(f, duals, m)
    k = m.vertex_count
    violations: List[Tuple[int, int, int, Fraction]] = []
    for (u, v) in sorted(usable):
        got = taxicab_utility(u, v, s_prime, r, d, m)
        best_w = u
        best = _deviation_utility(u, u, s_prime, r, d, m)
        for w in range(k):
            cand = _deviation_utility(u, w, s_prime, r, d, m)
            if cand > best:
                best, best_w = cand, w
        if got < best:
            violations.append((u, v, best_w, best - got))
    tight_total = k * k
    description = (
        f"union of all optimal-flow supports: {len(usable)} edges "
        f"(of {tight_total} vertex pairs) for the transport from s to s'"
    )
    return EquilibriumReport(
        ok=not violations,
        violations=tuple(violations),
        checked_edge_set=description,
    )


def verify_unique_induction(
    s: MassVector,
    d: MassVector,
    r: SurgeVector,
    m: MetricSpace,
    candidates: Sequence[MassVector],
) -> bool:
    """True iff the intended redistribution s' = d passes equilibrium
    verification and every candidate alternative supply fails it (some
    taxicab on some optimal-flow edge strictly prefers a deviation)."""
    for idx, cand in enumerate(candidates):
        if cand.masses == d.masses:
            raise InputError(
                f"verify_unique_induction: candidate {idx} equals d; "
                "candidates must be alternative supplies"
            )
    intended = verify_equilibrium_continuous(s, d, r, d, m)
    if not intended.ok:
        return False
    for cand in candidates:
        report = verify_equilibrium_continuous(s, cand, r, d, m)
        if report.ok:
            return False
    return True


def target_supply_surge(
    s: MassVector,
    d: MassVector,
    alpha: MassVector,
    m: MetricSpace,
    convention: ZeroDemandConvention = ZeroDemandConvention.Zero,
) -> SurgeVector:
    """Surge prices steering the fleet to an arbitrary target supply alpha.

    Starting from the demand-matching prices r, each vertex is scaled by
    max(1, alpha_i / d_i): oversupplying a vertex dilutes every taxicab's
    serving probability there, so its price rises to compensate.  Requires
    alpha_i > 0 only where d_i > 0.  The result is validated by the
    equilibrium verifier with s' = alpha before being returned.
    """
    k = m.vertex_count
    if len(alpha) != k or len(d) != k:
        raise InputError("target_supply_surge: dimension mismatch")
    for i in range(k):
        if alpha[i] > 0 and d[i] == 0:
            raise InputError(
                f"target_supply_surge: alpha[{i}] > 0 but d[{i}] = 0; "
                "the target may only occupy demanded vertices"
            )
    r, _f = continuous_surge_prices(s, d, m, convention)
    scaled: List[Fraction] = []
    for i in range(k):
        if d[i] > 0:
            scaled.append(max(ONE, alpha[i] / d[i]) * r[i])
        else:
            scaled.append(r[i])
    r_bar = SurgeVector(price=tuple(scaled), zero_demand_convention=convention)
    report = verify_equilibrium_continuous(s, alpha, r_bar, d, m)
    if not report.ok:
        raise VerificationError(
            "target-supply surge prices failed equilibrium verification: "
            f"{report.violations[:3]}"
        )
    return r_bar
