"""Shared fixtures: the six-vertex reference instance and exhaustive oracles.

The oracles here are deliberately naive (full enumeration on scaled-integer
problems) so the solvers can be checked against something that cannot share
their bugs.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Dict, List, Set, Tuple

import pytest
from hypothesis import strategies as st

from surgeflow.transport import Flow, MassVector, MetricSpace, metric_closure

F = Fraction

# Six locations on a 2x3 grid (unit horizontal/vertical steps, L1 distances):
#   0 1 2
#   3 4 5
REF_METRIC_ROWS = [
    [0, 1, 2, 1, 2, 3],
    [1, 0, 1, 2, 1, 2],
    [2, 1, 0, 3, 2, 1],
    [1, 2, 3, 0, 1, 2],
    [2, 1, 2, 1, 0, 1],
    [3, 2, 1, 2, 1, 0],
]

REF_SUPPLY = ["1/3", "1/3", "1/3", "0", "0", "0"]
REF_DEMAND = ["0", "0", "1/8", "3/8", "3/8", "1/8"]

# Two distinct optimal transport plans for the reference instance (cost 1 each).
REF_FLOW_A = {
    (0, 3): F(1, 3),
    (1, 3): F(1, 24),
    (1, 4): F(7, 24),
    (2, 2): F(1, 8),
    (2, 4): F(1, 12),
    (2, 5): F(1, 8),
}
REF_FLOW_B = {
    (0, 3): F(1, 3),
    (1, 4): F(1, 3),
    (2, 2): F(1, 8),
    (2, 3): F(1, 24),
    (2, 4): F(1, 24),
    (2, 5): F(1, 8),
}


@pytest.fixture
def ref_metric() -> MetricSpace:
    return MetricSpace.from_rows(REF_METRIC_ROWS)


@pytest.fixture
def ref_s() -> MassVector:
    return MassVector.of(REF_SUPPLY)


@pytest.fixture
def ref_d() -> MassVector:
    return MassVector.of(REF_DEMAND)


def flow_from_dict(entries: Dict[Tuple[int, int], Fraction], m: MetricSpace) -> Flow:
    k = m.vertex_count
    mat = [[F(0)] * k for _ in range(k)]
    for (i, j), x in entries.items():
        mat[i][j] = x
    return Flow.from_entries(mat, m)


@pytest.fixture
def ref_flow_a(ref_metric) -> Flow:
    return flow_from_dict(REF_FLOW_A, ref_metric)


@pytest.fixture
def ref_flow_b(ref_metric) -> Flow:
    return flow_from_dict(REF_FLOW_B, ref_metric)


# Market induced by REF_FLOW_A with value scale C = 4: one bidder per support
# edge (keyed by its (origin, flow-target)), one item per support edge, bidder
# (w, z) values item (x, y) at C - distance(w, y).
REF_MARKET_BIDDERS = [(0, 3), (1, 3), (1, 4), (2, 2), (2, 4), (2, 5)]
REF_MARKET_ITEMS = [(0, 3), (1, 3), (1, 4), (2, 2), (2, 4), (2, 5)]
REF_MARKET_VALUATIONS = [
    [3, 3, 2, 2, 2, 1],
    [2, 2, 3, 3, 3, 2],
    [2, 2, 3, 3, 3, 2],
    [1, 1, 2, 4, 2, 3],
    [1, 1, 2, 4, 2, 3],
    [1, 1, 2, 4, 2, 3],
]
REF_MARKET_WELFARE = 17
REF_MARKET_PRICES = [0, 0, 1, 3, 1, 2]  # minimal clearing prices, item order


# ---------------------------------------------------------------------------
# Exhaustive transport oracle
# ---------------------------------------------------------------------------


def _integral_plans(rows: List[int], cols: List[int]):
    """All nonnegative integer matrices with the given row/column sums."""
    k = len(cols)

    def row_fills(total: int, caps: List[int]):
        if len(caps) == 1:
            if total <= caps[0]:
                yield (total,)
            return
        for x in range(min(total, caps[0]) + 1):
            for rest in row_fills(total - x, caps[1:]):
                yield (x,) + rest

    def rec(i: int, remaining: List[int], acc: List[Tuple[int, ...]]):
        if i == len(rows):
            if all(r == 0 for r in remaining):
                yield list(acc)
            return
        for fill in row_fills(rows[i], remaining):
            nxt = [remaining[j] - fill[j] for j in range(k)]
            acc.append(fill)
            yield from rec(i + 1, nxt, acc)
            acc.pop()

    yield from rec(0, list(cols), [])


def enumerate_optimal_plans(s: MassVector, d: MassVector, m: MetricSpace):
    """(min cost, list of all optimal integral plans of the scaled problem).

    Every vertex of the optimal face is integral after scaling, so the union
    of these plans' supports equals the union over *all* optimal flows.
    """
    k = m.vertex_count
    D = lcm(*(x.denominator for x in s), *(x.denominator for x in d))
    rows = [int(x * D) for x in s]
    cols = [int(x * D) for x in d]
    best_cost = None
    best_plans: List[List[Tuple[int, ...]]] = []
    for plan in _integral_plans(rows, cols):
        c = sum(
            plan[i][j] * m.distances[i][j] for i in range(k) for j in range(k)
        )
        if best_cost is None or c < best_cost:
            best_cost, best_plans = c, [plan]
        elif c == best_cost:
            best_plans.append(plan)
    assert best_cost is not None, "scaled problem has no feasible plan"
    return F(best_cost, D), best_plans, D


def brute_force_emd(s: MassVector, d: MassVector, m: MetricSpace) -> Fraction:
    cost, _, _ = enumerate_optimal_plans(s, d, m)
    return cost


def brute_force_usable_edges(s: MassVector, d: MassVector, m: MetricSpace) -> Set[Tuple[int, int]]:
    _, plans, _ = enumerate_optimal_plans(s, d, m)
    k = m.vertex_count
    return {
        (i, j)
        for plan in plans
        for i in range(k)
        for j in range(k)
        if plan[i][j] > 0
    }


# ---------------------------------------------------------------------------
# Hypothesis strategies
# ---------------------------------------------------------------------------


@st.composite
def mass_vectors(draw, k: int, max_denominator: int = 6) -> MassVector:
    d = draw(st.integers(min_value=1, max_value=max_denominator))
    cuts = sorted(draw(st.lists(st.integers(0, d), min_size=k - 1, max_size=k - 1)))
    parts = []
    prev = 0
    for c in cuts:
        parts.append(c - prev)
        prev = c
    parts.append(d - prev)
    return MassVector.of([F(p, d) for p in parts])


@st.composite
def small_metrics(draw, k: int) -> MetricSpace:
    if draw(st.booleans()):
        return MetricSpace.uniform(k, draw(st.integers(1, 3)))
    raw = [[0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            w = draw(st.integers(1, 9))
            raw[i][j] = raw[j][i] = w
    return metric_closure(raw, k)


@st.composite
def transport_instances(draw, max_k: int = 3, max_denominator: int = 5):
    k = draw(st.integers(min_value=1, max_value=max_k))
    m = draw(small_metrics(k))
    s = draw(mass_vectors(k, max_denominator))
    d = draw(mass_vectors(k, max_denominator))
    return s, d, m
