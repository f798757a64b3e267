"""Unit-demand markets: maximum-weight matchings and minimal Walrasian prices.

Bidders want at most one item each and have quasi-linear utility v - p.  The
matching optimizer runs a shortest-augmenting-path assignment solve over
pair-valued costs (welfare first, a positional tie-break key second), so a
single solve returns the welfare maximum with the lexicographically smallest
assignment vector.  Minimal Walrasian prices are computed by the VCG payment
identity and double-checked against the clearing conditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Hashable, List, Optional, Sequence, Set, Tuple

from surgeflow.transport import (
    ContractViolation,
    InputError,
    VerificationError,
    as_fraction,
)

ZERO = Fraction(0)


@dataclass(frozen=True)
class UnitDemandMarket:
    """Bidders x items valuation matrix; values may be negative (such pairs
    are never assigned)."""

    bidders: Tuple[Hashable, ...]
    items: Tuple[Hashable, ...]
    valuation: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        if len(set(self.bidders)) != len(self.bidders):
            raise InputError("market: duplicate bidder ids")
        if len(set(self.items)) != len(self.items):
            raise InputError("market: duplicate item ids")
        if len(self.valuation) != len(self.bidders):
            raise InputError("market: one valuation row per bidder required")
        for row in self.valuation:
            if len(row) != len(self.items):
                raise InputError("market: one valuation column per item required")

    @classmethod
    def of(
        cls,
        valuation: Sequence[Sequence],
        bidders: Optional[Sequence[Hashable]] = None,
        items: Optional[Sequence[Hashable]] = None,
    ) -> "UnitDemandMarket":
        rows = tuple(
            tuple(as_fraction(x, f"valuation[{i}][{j}]") for j, x in enumerate(row))
            for i, row in enumerate(valuation)
        )
        n = len(rows)
        m = len(rows[0]) if rows else 0
        b = tuple(bidders) if bidders is not None else tuple(range(n))
        it = tuple(items) if items is not None else tuple(range(m))
        return cls(bidders=b, items=it, valuation=rows)

    @property
    def bidder_count(self) -> int:
        return len(self.bidders)

    @property
    def item_count(self) -> int:
        return len(self.items)

    def bidder_index(self, bidder: Hashable) -> int:
        try:
            return self.bidders.index(bidder)
        except ValueError:
            raise InputError(f"market: unknown bidder {bidder!r}") from None

    def item_index(self, item: Hashable) -> int:
        try:
            return self.items.index(item)
        except ValueError:
            raise InputError(f"market: unknown item {item!r}") from None


@dataclass(frozen=True)
class Matching:
    """Partial injective map bidder -> item, with its total matched value."""

    assignment: Tuple[Tuple[Hashable, Hashable], ...]
    welfare: Fraction

    def __post_init__(self) -> None:
        bs = [b for b, _ in self.assignment]
        its = [j for _, j in self.assignment]
        if len(set(bs)) != len(bs):
            raise InputError("matching: a bidder appears twice")
        if len(set(its)) != len(its):
            raise InputError("matching: an item is assigned twice")

    def item_of(self, bidder: Hashable) -> Optional[Hashable]:
        for b, j in self.assignment:
            if b == bidder:
                return j
        return None

    def bidder_of(self, item: Hashable) -> Optional[Hashable]:
        for b, j in self.assignment:
            if j == item:
                return b
        return None


@dataclass(frozen=True)
class ClearingPrices:
    """Nonnegative per-item prices."""

    entries: Tuple[Tuple[Hashable, Fraction], ...]

    def __post_init__(self) -> None:
        seen: Set[Hashable] = set()
        for item, p in self.entries:
            if item in seen:
                raise InputError(f"prices: duplicate item {item!r}")
            seen.add(item)
            if p < 0:
                raise InputError(f"prices: negative price for item {item!r}")

    def price_of(self, item: Hashable) -> Fraction:
        for it, p in self.entries:
            if it == item:
                return p
        raise InputError(f"prices: no price for item {item!r}")

    def as_dict(self) -> Dict[Hashable, Fraction]:
        return dict(self.entries)


@dataclass(frozen=True)
class ClearingCheck:
    ok: bool
    issues: Tuple[str, ...]


# ---------------------------------------------------------------------------
# Assignment solver over (welfare, tie-break) pair costs
# ---------------------------------------------------------------------------


def _cadd(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _csub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _solve_assignment(cost: List[List[tuple]], n: int, ncols: int) -> List[int]:
    """Min-cost perfect assignment of n rows into ncols >= n columns.

    Costs are (Fraction, int) pairs added componentwise and compared
    lexicographically; the Hungarian recurrences only ever add, subtract, and
    compare costs, so they go through unchanged over this ordered group.
    """
    CZERO = (ZERO, 0)
    u = [CZERO] * (n + 1)
    v = [CZERO] * (ncols + 1)
    p = [0] * (ncols + 1)  # p[j] = 1-based row matched to column j, 0 = free
    way = [0] * (ncols + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: List[Optional[tuple]] = [None] * (ncols + 1)
        used = [False] * (ncols + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = None
            j1 = 0
            for j in range(1, ncols + 1):
                if used[j]:
                    continue
                cur = _csub(_csub(cost[i0 - 1][j - 1], u[i0]), v[j])
                if minv[j] is None or cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if delta is None or minv[j] < delta:  # type: ignore[operator]
                    delta = minv[j]
                    j1 = j
            if delta is None:
                raise VerificationError("assignment: no augmenting path")
            for j in range(ncols + 1):
                if used[j]:
                    u[p[j]] = _cadd(u[p[j]], delta)
                    v[j] = _csub(v[j], delta)
                elif minv[j] is not None:
                    minv[j] = _csub(minv[j], delta)
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = [-1] * n
    for j in range(1, ncols + 1):
        if p[j] != 0:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col


def _best_assignment(
    mkt: UnitDemandMarket,
    rows: Sequence[int],
    lexicographic: bool,
) -> Tuple[Fraction, List[Optional[int]]]:
    """Welfare-maximizing partial assignment of the given bidder rows.

    Returns (welfare, item index or None per row).  With ``lexicographic``
    set, ties resolve to the smallest assignment vector (unmatched sorts after
    every item).
    """
    n = len(rows)
    m = mkt.item_count
    if n == 0:
        return ZERO, []
    big = Fraction(1) + sum(
        (max(max(row, default=ZERO), ZERO) for row in mkt.valuation), ZERO
    )
    ncols = m + n  # one private opt-out column per row
    cost: List[List[tuple]] = []
    for pos, i in enumerate(rows):
        weight = (m + 1) ** (n - 1 - pos) if lexicographic else 0
        row: List[tuple] = []
        for j in range(m):
            val = mkt.valuation[i][j]
            if val < 0:
                row.append((big, 0))
            else:
                row.append((-val, j * weight))
        for other in range(n):
            if other == pos:
                row.append((ZERO, m * weight))
            else:
                row.append((big, 0))
        cost.append(row)
    row_to_col = _solve_assignment(cost, n, ncols)
    welfare = ZERO
    out: List[Optional[int]] = []
    for pos in range(n):
        j = row_to_col[pos]
        if j < m:
            if mkt.valuation[rows[pos]][j] < 0:
                raise VerificationError("assignment: negative-value pair selected")
            welfare += mkt.valuation[rows[pos]][j]
            out.append(j)
        else:
            if j != m + pos:
                raise VerificationError("assignment: foreign opt-out column selected")
            out.append(None)
    return welfare, out


def max_weight_matching(mkt: UnitDemandMarket) -> Matching:
    """Welfare-maximizing matching; among ties, the lexicographically smallest
    assignment vector (bidders in market order, unmatched sorting last)."""
    welfare, cols = _best_assignment(mkt, range(mkt.bidder_count), lexicographic=True)
    pairs = tuple(
        (mkt.bidders[i], mkt.items[j]) for i, j in enumerate(cols) if j is not None
    )
    return Matching(assignment=pairs, welfare=welfare)


def _matching_welfare(mkt: UnitDemandMarket, g: Matching) -> Fraction:
    total = ZERO
    for bidder, item in g.assignment:
        total += mkt.valuation[mkt.bidder_index(bidder)][mkt.item_index(item)]
    return total


def minimal_walrasian_prices(mkt: UnitDemandMarket, g: Matching) -> ClearingPrices:
    """Pointwise-minimal Walrasian prices via the VCG payment identity:

        p(item of bidder i) = SW(others) - (SW(all) - v_i(item)),

    unallocated items priced 0.  Requires g to be welfare-maximizing.
    """
    sw_all, _ = _best_assignment(mkt, range(mkt.bidder_count), lexicographic=False)
    if _matching_welfare(mkt, g) != sw_all:
        raise ContractViolation(
            "minimal_walrasian_prices: matching is not welfare-maximizing"
        )
    prices: Dict[Hashable, Fraction] = {item: ZERO for item in mkt.items}
    for bidder, item in g.assignment:
        i = mkt.bidder_index(bidder)
        j = mkt.item_index(item)
        others = [x for x in range(mkt.bidder_count) if x != i]
        sw_minus, _ = _best_assignment(mkt, others, lexicographic=False)
        p = sw_minus - (sw_all - mkt.valuation[i][j])
        if p < 0:
            raise VerificationError(
                f"VCG price for item {item!r} came out negative ({p})"
            )
        prices[item] = p
    out = ClearingPrices(entries=tuple((item, prices[item]) for item in mkt.items))
    check = verify_clearing(mkt, g, out)
    if not check.ok:
        raise VerificationError(
            "VCG prices failed the clearing conditions: " + "; ".join(check.issues)
        )
    return out


def verify_clearing(
    mkt: UnitDemandMarket, g: Matching, p: ClearingPrices
) -> ClearingCheck:
    """Check the competitive-equilibrium conditions.

    (a) every matched bidder gets a utility-maximizing item with utility >= 0,
    (b) every unmatched bidder would not gain from any item,
    (c) unallocated items are priced 0.
    """
    issues: List[str] = []
    price = [p.price_of(item) for item in mkt.items]
    assigned_items = {item for _, item in g.assignment}
    item_of: Dict[Hashable, Hashable] = dict(g.assignment)
    for i, bidder in enumerate(mkt.bidders):
        utilities = [mkt.valuation[i][j] - price[j] for j in range(mkt.item_count)]
        best = max(utilities, default=ZERO)
        if bidder in item_of:
            j = mkt.item_index(item_of[bidder])
            got = utilities[j]
            if got < 0:
                issues.append(f"bidder {bidder!r} has negative utility {got}")
            if got < best:
                issues.append(
                    f"bidder {bidder!r} prefers another item (utility {best} > {got})"
                )
        else:
            if best > 0:
                issues.append(
                    f"unmatched bidder {bidder!r} has positive available utility {best}"
                )
    for j, item in enumerate(mkt.items):
        if item not in assigned_items and price[j] != 0:
            issues.append(f"unallocated item {item!r} has nonzero price {price[j]}")
    return ClearingCheck(ok=not issues, issues=tuple(issues))


# ---------------------------------------------------------------------------
# Exhaustive oracle
# ---------------------------------------------------------------------------


def _enumerate_best(
    mkt: UnitDemandMarket, rows: Sequence[int]
) -> Tuple[Fraction, List[Optional[int]]]:
    """Depth-first search over all individually-rational partial assignments,
    trying items in index order and opting out last, so the first maximum hit
    is the lexicographically smallest one."""
    m = mkt.item_count
    best_welfare = [ZERO - 1]
    best_assign: List[List[Optional[int]]] = [[]]
    used = [False] * m
    acc: List[Optional[int]] = []

    def rec(pos: int, welfare: Fraction) -> None:
        if pos == len(rows):
            if welfare > best_welfare[0]:
                best_welfare[0] = welfare
                best_assign[0] = list(acc)
            return
        i = rows[pos]
        for j in range(m):
            if used[j] or mkt.valuation[i][j] < 0:
                continue
            used[j] = True
            acc.append(j)
            rec(pos + 1, welfare + mkt.valuation[i][j])
            acc.pop()
            used[j] = False
        acc.append(None)
        rec(pos + 1, welfare)
        acc.pop()

    rec(0, ZERO)
    return best_welfare[0], best_assign[0]


def brute_force_oracle(mkt: UnitDemandMarket) -> Tuple[Matching, ClearingPrices]:
    """Reference implementation by full enumeration (at most 7 bidders/items)."""
    if mkt.bidder_count > 7 or mkt.item_count > 7:
        raise InputError("brute_force_oracle: instance too large (limit is 7x7)")
    sw_all, assign = _enumerate_best(mkt, range(mkt.bidder_count))
    pairs = tuple(
        (mkt.bidders[i], mkt.items[j]) for i, j in enumerate(assign) if j is not None
    )
    g = Matching(assignment=pairs, welfare=sw_all)
    prices: Dict[Hashable, Fraction] = {item: ZERO for item in mkt.items}
    for i, j in enumerate(assign):
        if j is None:
            continue
        others = [x for x in range(mkt.bidder_count) if x != i]
        sw_minus, _ = _enumerate_best(mkt, others)
        prices[mkt.items[j]] = sw_minus - (sw_all - mkt.valuation[i][j])
    return g, ClearingPrices(entries=tuple((it, prices[it]) for it in mkt.items))
