"""Release gate: nine end-to-end checks, one summary line each.

Run with ``-s`` to see the per-criterion PASS/FAIL lines as they complete:

    python3 -m pytest tests/test_acceptance.py -v -s

Each check prints exactly one line (also on failure) and enforces its stated
runtime cap where one applies.  Monte-Carlo checks use fixed seeds, so the
whole gate is deterministic.
"""

import itertools
import math
import random
import statistics
import time
from fractions import Fraction

from conftest import (
    REF_MARKET_PRICES,
    REF_MARKET_VALUATIONS,
)
from test_continuous import perturbation_candidates
from test_discrete import exhaustive_best_welfare

from surgeflow.continuous import (
    ZeroDemandConvention,
    build_market_from_flow,
    continuous_surge_prices,
    value_scale,
    verify_equilibrium_continuous,
    verify_unique_induction,
)
from surgeflow.discrete import (
    DiscreteInstance,
    social_welfare_discrete,
    solve_discrete,
    verify_envy_free,
    verify_taxi_best_response,
    verify_truthful,
)
from surgeflow.experiments import competitive_experiment, run_trial
from surgeflow.market import max_weight_matching, minimal_walrasian_prices
from surgeflow.online import (
    DemandSequence,
    demand_served,
    gen_drift,
    gen_geometric,
    gen_single_vertex,
    gen_subset,
    is_lazy,
    lazify,
    lazy_diagnostics,
    offline_opt,
)
from surgeflow.transport import (
    MassVector,
    MetricSpace,
    metric_closure,
    min_cost_flow,
    verify_min_cost,
)

F = Fraction
ZERO = F(0)


class _Gate:
    """Prints one `criterion N: PASS/FAIL` line when the block exits."""

    def __init__(self, n: int, title: str):
        self.n = n
        self.title = title
        self.detail = ""

    def __enter__(self):
        self.t0 = time.monotonic()
        return self

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.t0

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        tail = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}"
        print(
            f"criterion {self.n}: {status} — {self.title}: "
            f"{tail} ({self.elapsed:.1f}s)"
        )
        return False


# ---------------------------------------------------------------------------
# Shared random generators (plain `random`, fixed seeds)
# ---------------------------------------------------------------------------


def _random_metric(rng: random.Random, k: int) -> MetricSpace:
    style = rng.randrange(3)
    if style == 0:
        return MetricSpace.uniform(k, rng.randint(1, 3))
    if style == 1:
        pos = [0]
        for _ in range(k - 1):
            pos.append(pos[-1] + rng.randint(1, 4))
        return MetricSpace.from_rows([[abs(a - b) for b in pos] for a in pos])
    rows = [[0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            rows[i][j] = rows[j][i] = rng.randint(1, 6)
    return metric_closure(rows)


def _random_mass(rng: random.Random, k: int, max_denominator: int = 12) -> MassVector:
    den = rng.randint(1, max_denominator)
    cuts = sorted(rng.randint(0, den) for _ in range(k - 1))
    bounds = [0] + cuts + [den]
    return MassVector.of([F(b - a, den) for a, b in zip(bounds, bounds[1:])])


# ---------------------------------------------------------------------------
# 1. Reference network: flow cost and certificates
# ---------------------------------------------------------------------------


def test_criterion_1_reference_flow_cost(
    ref_metric, ref_s, ref_d, ref_flow_a, ref_flow_b
):
    with _Gate(1, "reference flow costs exactly 1") as gate:
        f, duals = min_cost_flow(ref_s, ref_d, ref_metric)
        assert f.cost == 1
        checks = [
            verify_min_cost(ref_flow_a, duals, ref_metric),
            verify_min_cost(ref_flow_b, duals, ref_metric),
        ]
        assert all(c.ok for c in checks)
        assert gate.elapsed < 1.0
        gate.detail = "cost=1, both reference flow matrices certified, <1s"


# ---------------------------------------------------------------------------
# 2. Reference market: valuation table, prices, surge vector
# ---------------------------------------------------------------------------


def test_criterion_2_reference_prices(ref_metric, ref_s, ref_d):
    with _Gate(2, "reference market and prices") as gate:
        f, _ = min_cost_flow(ref_s, ref_d, ref_metric)
        mkt = build_market_from_flow(f, ref_metric)
        assert value_scale(ref_metric) == 4
        assert [list(row) for row in mkt.valuation] == REF_MARKET_VALUATIONS
        g = max_weight_matching(mkt)
        p = minimal_walrasian_prices(mkt, g)
        assert [p.price_of(it) for it in mkt.items] == REF_MARKET_PRICES
        r, _ = continuous_surge_prices(
            ref_s, ref_d, ref_metric, ZeroDemandConvention.One
        )
        assert list(r.price) == [F(1), F(1), F(1), F(4), F(3), F(2)]
        gate.detail = (
            "valuation table entry-for-entry at C=4, "
            "prices (0,0,1,3,1,2), one-convention surge (1,1,1,4,3,2)"
        )


# ---------------------------------------------------------------------------
# 3. Equilibrium soundness on random continuous instances
# ---------------------------------------------------------------------------


def test_criterion_3_equilibrium_soundness():
    with _Gate(3, "equilibrium soundness, 200 random instances") as gate:
        rng = random.Random(20260301)
        instances = rejections = 0
        while instances < 200:
            k = rng.randint(2, 6)
            m = _random_metric(rng, k)
            s = _random_mass(rng, k)
            d = _random_mass(rng, k)
            r, f = continuous_surge_prices(s, d, m)
            assert verify_equilibrium_continuous(s, d, r, d, m).ok

            mkt = build_market_from_flow(f, m)
            prices = minimal_walrasian_prices(mkt, max_weight_matching(mkt))
            by_destination = {}
            for item in mkt.items:
                _x, y = item
                by_destination.setdefault(y, set()).add(prices.price_of(item))
            assert all(len(ps) == 1 for ps in by_destination.values())

            candidates = perturbation_candidates(d, count=20, seed=instances)
            assert verify_unique_induction(s, d, r, m, candidates)
            rejections += len(candidates)
            instances += 1
        assert gate.elapsed < 120.0
        gate.detail = (
            f"{instances} instances verified, destination-wise price equality "
            f"exact, {rejections} perturbed supplies rejected"
        )


# ---------------------------------------------------------------------------
# 4. Discrete solver vs. exhaustive oracle + truthfulness
# ---------------------------------------------------------------------------


def test_criterion_4_discrete_oracle_and_truthfulness():
    with _Gate(4, "discrete oracle equivalence, 500 random instances") as gate:
        rng = random.Random(20260402)
        grid = [F(x) for x in range(11)] + [F(1, 2), F(21, 2)]
        for i in range(500):
            k = rng.randint(2, 4)
            if rng.random() < 0.5:
                m = MetricSpace.uniform(k, rng.randint(1, 2))
            else:
                pos = [0]
                for _ in range(k - 1):
                    pos.append(pos[-1] + rng.randint(1, 3))
                m = MetricSpace.from_rows(
                    [[abs(a - b) for b in pos] for a in pos]
                )
            inst = DiscreteInstance.of(
                m,
                [
                    (p, rng.randrange(k), rng.randint(0, 10))
                    for p in range(rng.randint(0, 4))
                ],
                [(t, rng.randrange(k)) for t in range(rng.randint(0, 4))],
            )
            # solve_discrete certifies internally that the induced movement
            # is a min-cost flow and every served pair attains the surge
            # minimum; reaching the assertions below means both held.
            a, p, r = solve_discrete(inst)
            assert social_welfare_discrete(inst, a) == exhaustive_best_welfare(inst)
            assert verify_envy_free(inst, a, r).ok
            assert verify_taxi_best_response(inst, a, p, r).ok
            assert verify_truthful(inst, grid).ok
        assert gate.elapsed < 300.0
        gate.detail = (
            "500 instances: welfare equals brute force exactly, all "
            "equilibrium checks pass, zero profitable misreports on the "
            f"{len(grid)}-point grid"
        )


# ---------------------------------------------------------------------------
# 5. Offline oracle vs. quarter-grid brute force
# ---------------------------------------------------------------------------

_QUARTERS = [MassVector.of([F(j, 4), F(4 - j, 4)]) for j in range(5)]


def _grid_best(d: DemandSequence) -> Fraction:
    """Max welfare over supply paths restricted to the quarter grid (k=2)."""
    ell = d.metric.distances[0][1]
    best = None
    for combo in itertools.product(range(5), repeat=len(d)):
        sw = ZERO
        for t, j in enumerate(combo):
            sw += demand_served(_QUARTERS[j], d.steps[t])
            if t > 0:
                sw -= abs(F(j - combo[t - 1], 4)) * ell
        best = sw if best is None else max(best, sw)
    return best


def test_criterion_5_offline_oracle_grid():
    with _Gate(5, "offline oracle vs. quarter-grid brute force") as gate:
        count = 0
        for ell in (1, 2):
            m = MetricSpace.uniform(2, ell)
            for T in (1, 2, 3):
                for steps in itertools.product(_QUARTERS, repeat=T):
                    d = DemandSequence(steps=steps, metric=m)
                    opt = offline_opt(d).total_sw
                    grid = _grid_best(d)
                    assert opt >= grid
                    assert opt == grid  # exact on these integral instances
                    count += 1
        constant_cases = [
            DemandSequence(
                steps=(MassVector.of(["1/2", "1/2"]),) * 4,
                metric=MetricSpace.uniform(2),
            ),
            DemandSequence(
                steps=(MassVector.of([1, 0]),) * 3, metric=MetricSpace.uniform(2, 2)
            ),
            DemandSequence(
                steps=(MassVector.uniform(3),) * 5, metric=MetricSpace.uniform(3)
            ),
            DemandSequence(
                steps=(MassVector.of(["1/2", "1/4", "1/4"]),) * 4,
                metric=MetricSpace.from_rows([[0, 1, 2], [1, 0, 1], [2, 1, 0]]),
            ),
        ]
        for d in constant_cases:
            assert offline_opt(d).total_sw == len(d)
        gate.detail = (
            f"oracle equals the grid optimum on all {count} sequences "
            "(both spacings); constant demand yields SW = T exactly"
        )


# ---------------------------------------------------------------------------
# 6. Lazy-sequence structure on lazified oracle outputs
# ---------------------------------------------------------------------------


def test_criterion_6_lazy_structure():
    with _Gate(6, "lazified oracle outputs") as gate:
        unit_sequences = []
        for seed in range(6):
            unit_sequences.append(gen_subset(2, 4, 8, seed))
            unit_sequences.append(gen_single_vertex(3, 8, seed))
            unit_sequences.append(gen_drift(F(1, 5), 8, seed))
        rng = random.Random(606)
        for _ in range(10):
            k = rng.randint(2, 3)
            steps = tuple(
                _random_mass(rng, k, max_denominator=8)
                for _ in range(rng.randint(2, 6))
            )
            unit_sequences.append(
                DemandSequence(steps=steps, metric=MetricSpace.uniform(k))
            )
        stretched = [gen_geometric(F(1, 4), 3, 6, seed) for seed in range(3)]

        windows_checked = 0
        for d in unit_sequences + stretched:
            opt = offline_opt(d)
            lazy = lazify(opt, d)
            assert lazy.total_sw == opt.total_sw
            assert is_lazy(lazy, d)
        for d in unit_sequences:  # identity and window bound need distance 1
            lazy = lazify(offline_opt(d), d)
            T = len(d)
            for n in (1, 2, 4, 8):
                diag = lazy_diagnostics(lazy, d, n)
                if n == 1:
                    assert lazy.total_sw == sum(sum(row) for row in diag.h)
                for t in range(1, T + n + 1):
                    window = range(max(1, t - n), min(t - 1, T) + 1)
                    assert sum(sum(diag.z[tau - 1]) for tau in window) <= 1
                    windows_checked += 1
        gate.detail = (
            f"{len(unit_sequences) + len(stretched)} sequences: lazify "
            "preserves oracle SW; SW equals the held-supply sum exactly; "
            f"all {windows_checked} window sums stay at most 1"
        )


# ---------------------------------------------------------------------------
# 7. Drift regime at T=2000
# ---------------------------------------------------------------------------


def test_criterion_7_drift_bounds():
    with _Gate(7, "drift bounds, T=2000, 100 seeds per delta") as gate:
        details = []
        for delta_txt in ("1/20", "1/10", "1/5"):
            generator = f"drift:delta={delta_txt},T=2000"
            records = [
                run_trial(generator, "match", seed=701, trial=i) for i in range(100)
            ]
            for r in records:
                assert r.sw_alg >= (1 - r.delta) * r.T
            opt_norm = [float(r.sw_opt / r.T) for r in records]
            mean_opt = statistics.fmean(opt_norm)
            se = statistics.stdev(opt_norm) / math.sqrt(len(opt_norm))
            mean_delta = statistics.fmean(float(r.delta) for r in records)
            floor = 1 - 0.75 * mean_delta - 3 * se
            assert mean_opt >= floor
            details.append(f"delta={delta_txt}: OPT/T {mean_opt:.4f} >= {floor:.4f}")
        gate.detail = (
            "matching meets (1 - realized drift)*T on every seed; "
            + "; ".join(details)
        )


# ---------------------------------------------------------------------------
# 8. sqrt(rho/k) regime at T=5000
# ---------------------------------------------------------------------------


def test_criterion_8_sqrt_regime():
    with _Gate(8, "sqrt(rho/k) regime, 200 paired trials per config") as gate:
        configs = [
            ("single_vertex:k=25,T=5000", 25, 1),
            ("single_vertex:k=100,T=5000", 100, 1),
            ("subset:rho=4,k=100,T=5000", 100, 4),
        ]
        details = []
        for generator, k, rho in configs:
            root = F(math.isqrt(rho), math.isqrt(k))
            assert root * root == F(rho, k)
            algorithms = ("stay", "match", f"rand:p={root}", f"comp:p={root}")
            summaries = {
                a: competitive_experiment(generator, a, trials=200, seed=801)
                for a in algorithms
            }
            comp = summaries[f"comp:p={root}"]
            # paired: every algorithm saw the same sequences, hence the
            # same oracle values
            assert all(
                s.records[0].sw_opt == comp.records[0].sw_opt
                for s in summaries.values()
            )
            floor = float(root) / (2 * math.e)
            assert comp.mean_ratio >= floor
            cap = 5 * float(root)
            for s in summaries.values():
                assert s.mean_sw_alg <= cap * s.mean_sw_opt
            details.append(f"(k={k},rho={rho}): comp {comp.mean_ratio:.3f}>={floor:.3f}")
        assert gate.elapsed < 600.0
        gate.detail = (
            "; ".join(details)
            + "; every algorithm's mean SW within 5*sqrt(rho/k) of the oracle"
        )


# ---------------------------------------------------------------------------
# 9. Stretched uniform metric (1+epsilon) at T=5000
# ---------------------------------------------------------------------------


def test_criterion_9_geometric_regime():
    with _Gate(9, "1+epsilon metric regime, k=20, 200 trials") as gate:
        T, k = 5000, 20
        details = []
        for eps_txt, eps in (("1/4", F(1, 4)), ("1/2", F(1, 2))):
            generator = f"geometric:epsilon={eps_txt},k={k},T={T}"
            records = None
            for algorithm in ("stay", "match", "rand:p=1/2"):
                s = competitive_experiment(generator, algorithm, trials=200, seed=901)
                xs = [float(r.sw_alg) for r in s.records]
                se = statistics.stdev(xs) / math.sqrt(len(xs))
                # upper-bound direction: no online policy beats ~T/k here
                assert statistics.fmean(xs) <= T / k + 3 * se
                records = s.records
            opt_norm = [float(r.sw_opt) / T for r in records]
            mean_opt = statistics.fmean(opt_norm)
            se_opt = statistics.stdev(opt_norm) / math.sqrt(len(opt_norm))
            floor = float(eps / (1 + eps) ** 2) - 3 * se_opt
            assert mean_opt >= floor
            details.append(f"eps={eps_txt}: OPT/T {mean_opt:.4f} >= {floor:.4f}")
        gate.detail = (
            "stay/match/rand means all within 3 sigma of T/k from below; "
            + "; ".join(details)
        )
