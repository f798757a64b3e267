from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    REF_MARKET_BIDDERS,
    REF_MARKET_ITEMS,
    REF_MARKET_PRICES,
    REF_MARKET_VALUATIONS,
    REF_MARKET_WELFARE,
)
from surgeflow.market import (
    ClearingPrices,
    Matching,
    UnitDemandMarket,
    brute_force_oracle,
    max_weight_matching,
    minimal_walrasian_prices,
    verify_clearing,
)
from surgeflow.transport import ContractViolation, InputError

F = Fraction


@pytest.fixture
def ref_market() -> UnitDemandMarket:
    return UnitDemandMarket.of(
        REF_MARKET_VALUATIONS,
        bidders=[tuple(b) for b in REF_MARKET_BIDDERS],
        items=[tuple(i) for i in REF_MARKET_ITEMS],
    )


small_markets = st.builds(
    UnitDemandMarket.of,
    st.lists(
        st.lists(st.integers(-3, 10), min_size=1, max_size=5),
        min_size=1,
        max_size=5,
    ).filter(lambda rows: len({len(r) for r in rows}) == 1),
)


class TestMatching:
    def test_reference_market_diagonal(self, ref_market):
        g = max_weight_matching(ref_market)
        assert g.welfare == REF_MARKET_WELFARE
        assert g.assignment == tuple((b, b) for b in ref_market.bidders)

    def test_single_pair(self):
        mkt = UnitDemandMarket.of([[5]])
        g = max_weight_matching(mkt)
        assert g.welfare == 5
        assert g.assignment == ((0, 0),)

    def test_two_bidders_one_item(self):
        mkt = UnitDemandMarket.of([[5], [3]])
        g = max_weight_matching(mkt)
        assert g.welfare == 5
        assert g.assignment == ((0, 0),)

    def test_negative_values_stay_unmatched(self):
        mkt = UnitDemandMarket.of([[-1, -2]])
        g = max_weight_matching(mkt)
        assert g.welfare == 0
        assert g.assignment == ()

    def test_lexicographic_tie_break(self):
        # Both items give the same welfare; bidder 0 must take the lower index.
        mkt = UnitDemandMarket.of([[1, 1], [1, 1]])
        g = max_weight_matching(mkt)
        assert g.assignment == ((0, 0), (1, 1))

    def test_unmatched_sorts_after_items(self):
        # Welfare 1 either way: bidder 0 takes the item, or bidder 1 does.
        mkt = UnitDemandMarket.of([[1], [1]])
        g = max_weight_matching(mkt)
        assert g.assignment == ((0, 0),)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(InputError):
            UnitDemandMarket.of([[1], [2]], bidders=["a", "a"])

    def test_injectivity_enforced(self):
        with pytest.raises(InputError):
            Matching(assignment=((0, 0), (1, 0)), welfare=F(2))


class TestPrices:
    def test_reference_market_prices(self, ref_market):
        g = max_weight_matching(ref_market)
        p = minimal_walrasian_prices(ref_market, g)
        assert [p.price_of(it) for it in ref_market.items] == REF_MARKET_PRICES

    def test_monopoly_is_free(self):
        mkt = UnitDemandMarket.of([[5]])
        p = minimal_walrasian_prices(mkt, max_weight_matching(mkt))
        assert p.price_of(0) == 0

    def test_second_price_logic(self):
        mkt = UnitDemandMarket.of([[5], [3]])
        p = minimal_walrasian_prices(mkt, max_weight_matching(mkt))
        assert p.price_of(0) == 3

    def test_rejects_suboptimal_matching(self):
        mkt = UnitDemandMarket.of([[5], [3]])
        worse = Matching(assignment=((1, 0),), welfare=F(3))
        with pytest.raises(ContractViolation):
            minimal_walrasian_prices(mkt, worse)

    def test_negative_price_rejected_at_construction(self):
        with pytest.raises(InputError):
            ClearingPrices(entries=((0, F(-1)),))


class TestVerifyClearing:
    def test_reference_clears(self, ref_market):
        g = max_weight_matching(ref_market)
        p = minimal_walrasian_prices(ref_market, g)
        assert verify_clearing(ref_market, g, p).ok

    def test_overpriced_item_breaks_clearing(self, ref_market):
        g = max_weight_matching(ref_market)
        p = minimal_walrasian_prices(ref_market, g)
        entries = tuple(
            (it, F(5) if it == (2, 2) else p.price_of(it)) for it in ref_market.items
        )
        report = verify_clearing(ref_market, g, ClearingPrices(entries=entries))
        assert not report.ok
        assert any("prefers another item" in msg for msg in report.issues)

    def test_empty_market(self):
        mkt = UnitDemandMarket.of([], bidders=[], items=[])
        g = Matching(assignment=(), welfare=F(0))
        p = ClearingPrices(entries=())
        assert verify_clearing(mkt, g, p).ok

    def test_unallocated_item_must_be_free(self):
        mkt = UnitDemandMarket.of([[5, 0]])
        g = max_weight_matching(mkt)
        p = ClearingPrices(entries=((0, F(0)), (1, F(1))))
        report = verify_clearing(mkt, g, p)
        assert not report.ok
        assert any("unallocated" in msg for msg in report.issues)


class TestOracleAgreement:
    def test_reference_market(self, ref_market):
        g, p = brute_force_oracle(ref_market)
        assert g.welfare == REF_MARKET_WELFARE
        assert g.assignment == tuple((b, b) for b in ref_market.bidders)
        assert [p.price_of(it) for it in ref_market.items] == REF_MARKET_PRICES

    def test_size_guard(self):
        mkt = UnitDemandMarket.of([[1] * 8])
        with pytest.raises(InputError):
            brute_force_oracle(mkt)

    @settings(max_examples=200, deadline=None)
    @given(small_markets)
    def test_fast_path_equals_oracle(self, mkt):
        slow_g, slow_p = brute_force_oracle(mkt)
        fast_g = max_weight_matching(mkt)
        assert fast_g.welfare == slow_g.welfare
        assert fast_g.assignment == slow_g.assignment
        fast_p = minimal_walrasian_prices(mkt, fast_g)
        assert fast_p.entries == slow_p.entries


@settings(max_examples=100, deadline=None)
@given(small_markets)
def test_prices_are_minimal(mkt):
    """Lowering any positive price must break clearing."""
    g = max_weight_matching(mkt)
    p = minimal_walrasian_prices(mkt, g)
    eps = F(1, 1000)
    for idx, item in enumerate(mkt.items):
        if p.price_of(item) == 0:
            continue
        entries = tuple(
            (it, q - eps if it == item else q) for it, q in p.entries
        )
        lowered = ClearingPrices(entries=entries)
        assert not verify_clearing(mkt, g, lowered).ok


@settings(max_examples=200, deadline=None)
@given(
    small_markets,
    st.lists(st.integers(0, 5), min_size=1, max_size=5),
    st.lists(st.integers(0, 6), min_size=1, max_size=5),
)
def test_any_clearing_pair_is_welfare_maximal(mkt, perm_seed, price_seed):
    """First Welfare Theorem: whatever clears the market maximizes welfare."""
    n, m = mkt.bidder_count, mkt.item_count
    used = set()
    pairs = []
    welfare = F(0)
    for i in range(n):
        j = perm_seed[i % len(perm_seed)] % (m + 1)
        if j < m and j not in used and mkt.valuation[i][j] >= 0:
            used.add(j)
            pairs.append((mkt.bidders[i], mkt.items[j]))
            welfare += mkt.valuation[i][j]
    g = Matching(assignment=tuple(pairs), welfare=welfare)
    entries = tuple(
        (it, F(price_seed[j % len(price_seed)]) if it in {x for _, x in pairs} else F(0))
        for j, it in enumerate(mkt.items)
    )
    p = ClearingPrices(entries=entries)
    if verify_clearing(mkt, g, p).ok:
        assert welfare == max_weight_matching(mkt).welfare
