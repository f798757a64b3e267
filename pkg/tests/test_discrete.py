from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_metrics
from surgeflow.discrete import (
    DiscreteInstance,
    DiscreteSurgeVector,
    build_discrete_market,
    social_welfare_discrete,
    solve_discrete,
    surge_from_taxi_prices,
    verify_envy_free,
    verify_taxi_best_response,
    verify_truthful,
)
from surgeflow.transport import InputError, MetricSpace

F = Fraction


def exhaustive_best_welfare(inst: DiscreteInstance) -> Fraction:
    """Maximum over all injective passenger->taxicab maps of the total value
    minus pickup distances, counting only nonnegative-surplus pairs."""
    dist = inst.metric.distances
    m = len(inst.passengers)
    n = len(inst.taxicabs)
    best = F(0)
    slots = list(range(n)) + [None] * m
    for perm in set(permutations(slots, m)):
        welfare = F(0)
        for i, j in enumerate(perm):
            if j is None:
                continue
            b = inst.passengers[i]
            t = inst.taxicabs[j]
            surplus = b.value - dist[b.location][t.location]
            if surplus > 0:
                welfare += surplus
        best = max(best, welfare)
    return best


def line_metric(k: int) -> MetricSpace:
    return MetricSpace.from_rows(
        [[abs(i - j) for j in range(k)] for i in range(k)]
    )


@st.composite
def discrete_instances(draw, max_k: int = 4, max_each: int = 4):
    k = draw(st.integers(2, max_k))
    m = draw(small_metrics(k))
    n_pass = draw(st.integers(0, max_each))
    n_taxi = draw(st.integers(0, max_each))
    passengers = [
        (i, draw(st.integers(0, k - 1)), draw(st.integers(0, 10)))
        for i in range(n_pass)
    ]
    taxicabs = [(j, draw(st.integers(0, k - 1))) for j in range(n_taxi)]
    return DiscreteInstance.of(m, passengers, taxicabs)


class TestMarketConstruction:
    def test_basic_substitution(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 5)], [(0, 0)])
        mkt = build_discrete_market(inst)
        assert mkt.valuation == ((F(3),),)

    def test_collocated(self):
        m = line_metric(2)
        inst = DiscreteInstance.of(m, [(0, 1, 7)], [(0, 1)])
        mkt = build_discrete_market(inst)
        assert mkt.valuation == ((F(7),),)

    def test_shared_location_pair(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 5), (1, 2, 3)], [(0, 0)])
        mkt = build_discrete_market(inst)
        assert mkt.valuation == ((F(3),), (F(1),))


class TestSolve:
    def test_two_passengers_one_taxi(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [("hi", 2, 5), ("lo", 2, 3)], [("t", 0)])
        a, p, r = solve_discrete(inst)
        assert a.serves == (("t", "hi"),)
        assert p.price_of("t") == 1
        assert r[2] == 3
        assert verify_envy_free(inst, a, r).ok
        assert verify_taxi_best_response(inst, a, p, r).ok

    def test_negative_surplus_goes_unserved(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 1)], [(0, 0)])
        a, p, r = solve_discrete(inst)
        assert a.serves == ()
        assert p.price_of(0) == 0
        assert r[2] == 2
        assert social_welfare_discrete(inst, a) == 0

    def test_excess_supply_prices_at_zero(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 5)], [("a", 0), ("b", 0)])
        a, p, r = solve_discrete(inst)
        assert len(a.serves) == 1
        assert p.price_of("a") == 0 and p.price_of("b") == 0
        assert r[2] == 2

    def test_induced_flow_shapes(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 5)], [("a", 0), ("b", 0)])
        a, _, _ = solve_discrete(inst)
        assert a.induced_flow[0][2] == 1  # serving taxi drives over
        assert a.induced_flow[0][0] == 1  # idle taxi stays
        assert a.new_supply == (1, 0, 1)

    def test_empty_instance(self):
        m = line_metric(2)
        inst = DiscreteInstance.of(m, [], [])
        a, p, r = solve_discrete(inst)
        assert a.serves == ()
        assert r.price == (None, None)
        assert social_welfare_discrete(inst, a) == 0
        assert verify_envy_free(inst, a, r).ok
        assert verify_taxi_best_response(inst, a, p, r).ok
        assert verify_truthful(inst, [0, 1]).ok

    def test_tie_broken_by_passenger_order(self):
        m = line_metric(2)
        inst = DiscreteInstance.of(m, [(0, 1, 4), (1, 1, 4)], [(0, 0)])
        a, _, _ = solve_discrete(inst)
        assert a.serves == ((0, 0),)  # taxicab 0 serves passenger 0


class TestWelfare:
    def test_single_pair(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 5)], [(0, 0)])
        a, _, _ = solve_discrete(inst)
        assert social_welfare_discrete(inst, a) == 3

    def test_two_passenger_example(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 5), (1, 2, 3)], [(0, 0)])
        a, _, _ = solve_discrete(inst)
        assert social_welfare_discrete(inst, a) == 3


class TestVerifiers:
    def test_lowered_surge_breaks_envy_freeness(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 5), (1, 2, 3)], [(0, 0)])
        a, _p, _r = solve_discrete(inst)
        lowered = DiscreteSurgeVector(price=(F(1, 2), F(1, 2), F(1, 2)))
        report = verify_envy_free(inst, a, lowered)
        assert not report.ok
        assert any("unserved passenger 1" in msg for msg in report.issues)

    def test_truthful_on_small_example(self):
        m = line_metric(3)
        inst = DiscreteInstance.of(m, [(0, 2, 5), (1, 2, 3)], [(0, 0)])
        grid = list(range(0, 13)) + [F(9, 2), F(11, 2), F(5, 2), F(7, 2)]
        assert verify_truthful(inst, grid).ok

    def test_empty_grid_rejected(self):
        m = line_metric(2)
        inst = DiscreteInstance.of(m, [(0, 0, 1)], [(0, 0)])
        with pytest.raises(InputError):
            verify_truthful(inst, [])

    def test_too_many_passengers_rejected(self):
        m = line_metric(2)
        inst = DiscreteInstance.of(m, [(i, 0, 1) for i in range(6)], [(0, 0)])
        with pytest.raises(InputError):
            verify_truthful(inst, [0])


class TestValidation:
    def test_duplicate_passenger_ids(self):
        m = line_metric(2)
        with pytest.raises(InputError):
            DiscreteInstance.of(m, [(0, 0, 1), (0, 1, 2)], [])

    def test_negative_value(self):
        m = line_metric(2)
        with pytest.raises(InputError):
            DiscreteInstance.of(m, [(0, 0, -1)], [])

    def test_location_out_of_range(self):
        m = line_metric(2)
        with pytest.raises(InputError):
            DiscreteInstance.of(m, [], [(0, 5)])


@settings(max_examples=150, deadline=None)
@given(discrete_instances())
def test_welfare_matches_exhaustive_oracle(inst):
    a, _p, _r = solve_discrete(inst)
    assert social_welfare_discrete(inst, a) == exhaustive_best_welfare(inst)


@settings(max_examples=150, deadline=None)
@given(discrete_instances())
def test_equilibrium_verifiers_pass(inst):
    a, p, r = solve_discrete(inst)
    assert verify_envy_free(inst, a, r).ok
    assert verify_taxi_best_response(inst, a, p, r).ok


@settings(max_examples=100, deadline=None)
@given(discrete_instances())
def test_higher_value_priority_at_shared_location(inst):
    a, _p, _r = solve_discrete(inst)
    served = {pid for _t, pid in a.serves}
    for b in inst.passengers:
        for other in inst.passengers:
            if (
                b.location == other.location
                and b.id in served
                and other.id not in served
            ):
                assert b.value >= other.value


@settings(max_examples=30, deadline=None)
@given(discrete_instances(max_k=3, max_each=3))
def test_no_profitable_misreports(inst):
    grid = [0, 1, 2, 5, 10, F(1, 2), F(19, 2)]
    assert verify_truthful(inst, grid).ok
