"""Online supply policies, the exact offline optimum, and lazy-sequence theory.

A policy sees demand vectors one step at a time and decides where the fleet
should sit; welfare is demand served minus movement cost, both exact.  The
offline optimum solves a time-expanded min-cost flow over the whole sequence.
``lazify`` post-processes any trajectory into one that never ships supply
into an oversupplied vertex nor out of an under-demanded one, without losing
welfare.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Dict, List, Optional, Sequence, Tuple

from surgeflow.continuous import (
    SurgeVector,
    ZeroDemandConvention,
    continuous_surge_prices,
    verify_equilibrium_continuous,
)
from surgeflow.transport import (
    Flow,
    InputError,
    MassVector,
    MetricSpace,
    VerificationError,
    as_fraction,
    identity_flow,
    min_cost_flow,
    remove_through_flow,
)

ZERO = Fraction(0)
ONE = Fraction(1)


def _param_fraction(value, what: str) -> Fraction:
    """Exact value of a generator parameter.  Floats are read as the decimal
    literal they print as (0.05 -> 1/20), keeping downstream denominators
    small; everything else goes through the strict converter."""
    if isinstance(value, float):
        return Fraction(str(value))
    return as_fraction(value, what)


@dataclass(frozen=True)
class DemandSequence:
    steps: Tuple[MassVector, ...]
    metric: MetricSpace

    def __post_init__(self) -> None:
        if not self.steps:
            raise InputError("demand sequence must have at least one step")
        k = self.metric.vertex_count
        for t, d in enumerate(self.steps):
            if len(d) != k:
                raise InputError(f"demand step {t + 1} has wrong dimension")

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class SupplyTrajectory:
    """Per-step supply vectors s^1..s^T, the movement flows between
    consecutive steps, demand served per step, and total social welfare."""

    steps: Tuple[MassVector, ...]
    flows: Tuple[Flow, ...]
    per_step_served: Tuple[Fraction, ...]
    total_sw: Fraction

    def __post_init__(self) -> None:
        T = len(self.steps)
        if len(self.flows) != T - 1:
            raise InputError("trajectory: expected one flow per transition")
        if len(self.per_step_served) != T:
            raise InputError("trajectory: expected one served value per step")
        recomputed = sum(self.per_step_served, ZERO) - sum(
            (f.cost for f in self.flows), ZERO
        )
        if recomputed != self.total_sw:
            raise InputError(
                "trajectory: total_sw does not match served minus movement"
            )


@dataclass(frozen=True)
class SequenceStats:
    rho: Fraction
    delta: Fraction

    def __post_init__(self) -> None:
        if self.rho < 1:
            raise InputError("stats: rho must be at least 1")
        if not 0 <= self.delta <= 1:
            raise InputError("stats: delta must lie in [0, 1]")


@dataclass(frozen=True)
class LazyDiagnostics:
    """The h/g/z matrices of the lazy-sequence analysis (T x k each)."""

    h: Tuple[Tuple[Fraction, ...], ...]
    g: Tuple[Tuple[Fraction, ...], ...]
    z: Tuple[Tuple[Fraction, ...], ...]
    window: int


def demand_served(s: MassVector, d: MassVector) -> Fraction:
    return sum((min(s[i], d[i]) for i in range(len(s))), ZERO)


def trajectory_from_supplies(
    supplies: Sequence[MassVector], d: DemandSequence
) -> SupplyTrajectory:
    """Assemble a trajectory: min-cost movement flows between consecutive
    supplies, served mass per step, and the social welfare total."""
    if len(supplies) != len(d):
        raise InputError("trajectory: supply and demand lengths differ")
    m = d.metric
    flows = tuple(
        min_cost_flow(supplies[t], supplies[t + 1], m)[0]
        for t in range(len(supplies) - 1)
    )
    served = tuple(demand_served(supplies[t], d.steps[t]) for t in range(len(supplies)))
    total = sum(served, ZERO) - sum((f.cost for f in flows), ZERO)
    return SupplyTrajectory(
        steps=tuple(supplies), flows=flows, per_step_served=served, total_sw=total
    )


# ---------------------------------------------------------------------------
# Online policies
# ---------------------------------------------------------------------------


def run_stay(d: DemandSequence) -> SupplyTrajectory:
    """Spread the fleet uniformly and never move."""
    k = d.metric.vertex_count
    uniform = MassVector.uniform(k)
    supplies = [uniform] * len(d)
    flows = tuple(identity_flow(uniform, d.metric) for _ in range(len(d) - 1))
    served = tuple(demand_served(uniform, dt) for dt in d.steps)
    total = sum(served, ZERO)
    return SupplyTrajectory(
        steps=tuple(supplies), flows=flows, per_step_served=served, total_sw=total
    )


def run_match(d: DemandSequence) -> SupplyTrajectory:
    """Track demand exactly: s^t = d^t."""
    return trajectory_from_supplies(list(d.steps), d)


def _rand_supplies(d: DemandSequence, p: float, rng: random.Random) -> List[MassVector]:
    supplies = [d.steps[0]]
    for t in range(1, len(d)):
        if rng.random() < p:
            supplies.append(d.steps[t])
        else:
            supplies.append(supplies[-1])
    return supplies


def run_rand(d: DemandSequence, p, seed: int) -> SupplyTrajectory:
    """Start matched; at each later step, match the new demand with
    probability p, otherwise hold position."""
    p = float(p)
    if not 0 <= p <= 1:
        raise InputError("run_rand: p must be a probability")
    rng = random.Random(seed)
    return trajectory_from_supplies(_rand_supplies(d, p, rng), d)


def run_comp(d: DemandSequence, p, seed: int) -> SupplyTrajectory:
    """Toss one fair coin (before reading any demand): heads plays the
    uniform-stay policy, tails plays the p-matching policy."""
    p = float(p)
    if not 0 <= p <= 1:
        raise InputError("run_comp: p must be a probability")
    rng = random.Random(seed)
    heads = rng.random() < 0.5
    if heads:
        return run_stay(d)
    return trajectory_from_supplies(_rand_supplies(d, p, rng), d)


def surge_prices_for_step(
    policy_target: MassVector,
    s_prev: MassVector,
    d_t: MassVector,
    m: MetricSpace,
) -> SurgeVector:
    """Prices a policy posts for one step.

    A match step (target = current demand) prices via the full continuous
    pipeline.  A hold step (target = previous supply) posts 1 everywhere,
    which on metrics with all distances >= 1 makes staying a best response;
    this is asserted, not assumed.
    """
    if policy_target.masses == d_t.masses:
        r, _f = continuous_surge_prices(s_prev, d_t, m)
        return r
    if policy_target.masses == s_prev.masses:
        if not m.unit_min:
            raise InputError(
                "hold-step pricing needs every distance >= 1; "
                "this metric has a shorter edge"
            )
        r = SurgeVector.of([1] * m.vertex_count)
        report = verify_equilibrium_continuous(s_prev, s_prev, r, d_t, m)
        if not report.ok:
            raise VerificationError(
                f"hold-step prices failed equilibrium check: {report.violations[:3]}"
            )
        return r
    raise InputError(
        "policy_target must be either the step demand (match) or the "
        "previous supply (hold)"
    )


# ---------------------------------------------------------------------------
# Offline optimum: time-expanded min-cost flow
# ---------------------------------------------------------------------------

OFFLINE_SIZE_CAP = 10_000


class _MinCostGraph:
    """Integer min-cost max-flow via successive shortest paths with Johnson
    potentials; the first potential pass exploits the time-expanded DAG."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.head: List[List[int]] = [[] for _ in range(n)]
        self.to: List[int] = []
        self.cap: List[int] = []
        self.cost: List[int] = []

    def add(self, u: int, v: int, cap: int, cost: int) -> None:
        self.head[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.head[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0)
        self.cost.append(-cost)

    def solve(self, src: int, dst: int, amount: int) -> int:
        INF = float("inf")
        # Potentials by relaxation in arc-insertion order, valid because the
        # network is layered by time (every arc points weakly forward).
        pot: List[float] = [INF] * self.n
        pot[src] = 0
        for _ in range(2):
            changed = False
            for e in range(0, len(self.to), 2):
                u = self.to[e ^ 1]
                if self.cap[e] > 0 and pot[u] + self.cost[e] < pot[self.to[e]]:
                    pot[self.to[e]] = pot[u] + self.cost[e]
                    changed = True
            if not changed:
                break
        pot = [0 if x is INF else int(x) for x in pot]
        total_cost = 0
        remaining = amount
        while remaining > 0:
            dist: List[float] = [INF] * self.n
            parent_edge: List[int] = [-1] * self.n
            dist[src] = 0
            heap: List[Tuple[int, int]] = [(0, src)]
            while heap:
                du, u = heapq.heappop(heap)
                if du > dist[u]:
                    continue
                for e in self.head[u]:
                    if self.cap[e] <= 0:
                        continue
                    v = self.to[e]
                    nd = du + self.cost[e] + pot[u] - pot[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        parent_edge[v] = e
                        heapq.heappush(heap, (nd, v))
            if dist[dst] is INF:
                raise VerificationError("offline optimum: sink unreachable")
            for v in range(self.n):
                if dist[v] is not INF:
                    pot[v] += int(dist[v])
            push = remaining
            v = dst
            while v != src:
                e = parent_edge[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = dst
            while v != src:
                e = parent_edge[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                total_cost += push * self.cost[e]
                v = self.to[e ^ 1]
            remaining -= push
        return total_cost

    def flow_on(self, e: int) -> int:
        return self.cap[e ^ 1]


def offline_opt(d: DemandSequence) -> SupplyTrajectory:
    """Exact clairvoyant optimum.

    Builds the time-expanded network — one node pair per (step, vertex) with a
    capacity-d^t_i reward arc (cost -1) in parallel with a free arc, movement
    arcs between consecutive steps at metric cost, free fleet placement at the
    first step — scales it to integers, and solves min-cost flow exactly.
    Social welfare equals minus the optimal cost; the recovered trajectory is
    rebuilt step by step and must reproduce it.
    """
    T = len(d)
    m = d.metric
    k = m.vertex_count
    if T * k > OFFLINE_SIZE_CAP:
        raise InputError(
            f"offline_opt: T*k = {T * k} exceeds the size cap {OFFLINE_SIZE_CAP}"
        )
    mass_scale = lcm(
        1, *(x.denominator for dt in d.steps for x in dt)
    )
    cost_scale = lcm(
        1, *(m.distances[i][j].denominator for i in range(k) for j in range(k))
    )

    def a_node(t: int, i: int) -> int:  # arrival side of (t, i)
        return 1 + 2 * (t * k + i)

    def b_node(t: int, i: int) -> int:  # departure side of (t, i)
        return 2 + 2 * (t * k + i)

    src = 0
    dst = 1 + 2 * T * k
    g = _MinCostGraph(dst + 1)
    big = mass_scale + 1
    reward_edges: List[List[int]] = [[0] * k for _ in range(T)]
    free_edges: List[List[int]] = [[0] * k for _ in range(T)]
    move_edges: List[List[List[int]]] = [
        [[0] * k for _ in range(k)] for _ in range(T - 1)
    ]
    for i in range(k):
        g.add(src, a_node(0, i), big, 0)
    for t in range(T):
        for i in range(k):
            cap = int(d.steps[t][i] * mass_scale)
            reward_edges[t][i] = len(g.to)
            g.add(a_node(t, i), b_node(t, i), cap, -cost_scale)
            free_edges[t][i] = len(g.to)
            g.add(a_node(t, i), b_node(t, i), big, 0)
        if t + 1 < T:
            for i in range(k):
                for j in range(k):
                    move_edges[t][i][j] = len(g.to)
                    g.add(
                        b_node(t, i),
                        a_node(t + 1, j),
                        big,
                        int(m.distances[i][j] * cost_scale),
                    )
    for i in range(k):
        g.add(b_node(T - 1, i), dst, big, 0)
    total_cost = g.solve(src, dst, mass_scale)
    sw = Fraction(-total_cost, mass_scale * cost_scale)
    supplies: List[MassVector] = []
    for t in range(T):
        masses = tuple(
            Fraction(
                g.flow_on(reward_edges[t][i]) + g.flow_on(free_edges[t][i]),
                mass_scale,
            )
            for i in range(k)
        )
        supplies.append(MassVector(masses))
    traj = trajectory_from_supplies(supplies, d)
    if traj.total_sw != sw:
        raise VerificationError(
            f"offline optimum accounting mismatch: network says {sw}, "
            f"trajectory recomputes {traj.total_sw}"
        )
    return traj


def offline_opt_value(d: DemandSequence) -> Fraction:
    """Just the optimal social welfare (skips trajectory reconstruction)."""
    return offline_opt(d).total_sw


# ---------------------------------------------------------------------------
# Lazy sequences
# ---------------------------------------------------------------------------


def is_lazy(traj: SupplyTrajectory, d: DemandSequence) -> bool:
    """A trajectory is lazy when every cross-vertex shipment lands at a vertex
    that stays within its demand and leaves a vertex holding more than its
    demand."""
    for j, f in enumerate(traj.flows):
        s_prev = traj.steps[j]
        s_cur = traj.steps[j + 1]
        d_cur = d.steps[j + 1]
        k = len(s_cur)
        for u in range(k):
            for v in range(k):
                if u == v or f.entries[u][v] == 0:
                    continue
                if s_cur[v] > d_cur[v] or s_prev[u] <= d_cur[u]:
                    return False
    return True


def _canonical_flows(supplies: Sequence[MassVector], m: MetricSpace) -> List[Flow]:
    """Min-cost flows between consecutive supplies with through-traffic
    rerouted away (no vertex both sends and receives), which the repair
    arguments below rely on."""
    return [
        remove_through_flow(min_cost_flow(supplies[t], supplies[t + 1], m)[0], m)
        for t in range(len(supplies) - 1)
    ]


def lazify(traj: SupplyTrajectory, d: DemandSequence) -> SupplyTrajectory:
    """Rewrite a trajectory into a lazy one without losing social welfare.

    Scans transitions from the latest violating step backwards (largest pair
    first) and applies one of two local repairs, each of which keeps a sliver
    of mass at its sender instead of shipping it:

    * receiver overshoot — the target vertex ends above its demand, so the
      sliver served nobody and only cost movement;
    * under-demanded sender — the sender is at or below the next step's
      demand, so the sliver is worth as much at home as at the target.

    Both repairs weakly increase welfare (asserted).  Flows are recomputed
    after each repair; the loop runs until a full scan finds no violation.
    """
    if is_lazy(traj, d):
        return traj
    m = d.metric
    T = len(d)
    supplies = list(traj.steps)
    flows = _canonical_flows(supplies, m)
    sw = trajectory_from_supplies(supplies, d).total_sw
    max_rounds = 1000 * T + 1000
    for _round in range(max_rounds):
        violation = None
        for j in range(T - 2, -1, -1):  # latest transition first
            f = flows[j]
            s_prev, s_cur, d_cur = supplies[j], supplies[j + 1], d.steps[j + 1]
            k = len(s_cur)
            pairs = [
                (u, v)
                for u in range(k)
                for v in range(k)
                if u != v
                and f.entries[u][v] > 0
                and (s_cur[v] > d_cur[v] or s_prev[u] <= d_cur[u])
            ]
            if pairs:
                violation = (j, max(pairs))
                break
        if violation is None:
            break
        j, (u, v) = violation
        f = flows[j]
        s_prev, s_cur, d_cur = supplies[j], supplies[j + 1], d.steps[j + 1]
        if s_cur[v] > d_cur[v]:
            eps = min(s_cur[v] - d_cur[v], f.entries[u][v])
        else:
            # Sender at or below demand: through-free flows guarantee the
            # sender's own retained mass sits strictly below demand.
            eps = min(f.entries[u][v], d_cur[u] - s_cur[u])
        if eps <= 0:
            raise VerificationError("lazify: repair produced a zero step")
        masses = list(s_cur)
        masses[u] += eps
        masses[v] -= eps
        supplies[j + 1] = MassVector(tuple(masses))
        flows[j] = remove_through_flow(
            min_cost_flow(supplies[j], supplies[j + 1], m)[0], m
        )
        if j + 1 < T - 1:
            flows[j + 1] = remove_through_flow(
                min_cost_flow(supplies[j + 1], supplies[j + 2], m)[0], m
            )
        new_sw = trajectory_from_supplies(supplies, d).total_sw
        if new_sw < sw:
            raise VerificationError(
                f"lazify: repair decreased welfare ({sw} -> {new_sw})"
            )
        sw = new_sw
    else:
        raise VerificationError("lazify: did not converge")
    served = tuple(demand_served(supplies[t], d.steps[t]) for t in range(T))
    total = sum(served, ZERO) - sum((f.cost for f in flows), ZERO)
    out = SupplyTrajectory(
        steps=tuple(supplies),
        flows=tuple(flows),
        per_step_served=served,
        total_sw=total,
    )
    if not is_lazy(out, d):
        raise VerificationError("lazify: output still has a violation")
    if out.total_sw < traj.total_sw:
        raise VerificationError("lazify: welfare decreased overall")
    return out


def lazy_diagnostics(
    traj: SupplyTrajectory, d: DemandSequence, n: int
) -> LazyDiagnostics:
    """The analysis matrices: h (served-if-held supply), g (recent demand
    peak over an n-step lookback), z = max(0, h − g).  Conventions: s^0 = s^1
    and d^t = 0 for t < 1."""
    if n <= 0:
        raise InputError("lazy_diagnostics: window must be positive")
    T = len(d)
    k = d.metric.vertex_count
    h: List[Tuple[Fraction, ...]] = []
    g: List[Tuple[Fraction, ...]] = []
    z: List[Tuple[Fraction, ...]] = []
    for t in range(1, T + 1):
        s_prev = traj.steps[max(t - 2, 0)]  # s^{t-1}, with s^0 = s^1
        d_cur = d.steps[t - 1]
        h_row = tuple(min(s_prev[i], d_cur[i]) for i in range(k))
        lo = max(1, t - n)
        g_row = tuple(
            max((d.steps[tau - 1][i] for tau in range(lo, t)), default=ZERO)
            for i in range(k)
        )
        z_row = tuple(max(ZERO, h_row[i] - g_row[i]) for i in range(k))
        h.append(h_row)
        g.append(g_row)
        z.append(z_row)
    return LazyDiagnostics(h=tuple(h), g=tuple(g), z=tuple(z), window=n)


# ---------------------------------------------------------------------------
# Demand-sequence generators and statistics
# ---------------------------------------------------------------------------


def gen_single_vertex(k: int, T: int, seed: int) -> DemandSequence:
    """Each step, all demand sits on one uniformly random vertex; distances
    are 1 everywhere."""
    if k < 1 or T < 1:
        raise InputError("gen_single_vertex: k and T must be positive")
    rng = random.Random(seed)
    m = MetricSpace.uniform(k)
    steps = tuple(MassVector.point(k, rng.randrange(k)) for _ in range(T))
    return DemandSequence(steps=steps, metric=m)


def gen_subset(rho, k: int, T: int, seed: int) -> DemandSequence:
    """Each step, demand spreads uniformly (1/M each) over one random block of
    M = ceil(rho) vertices from a fixed partition into floor(k/M) blocks."""
    rho = _param_fraction(rho, "rho")
    if rho < 1 or rho > k:
        raise InputError("gen_subset: need 1 <= rho <= k")
    if T < 1:
        raise InputError("gen_subset: T must be positive")
    M = math.ceil(rho)
    blocks = k // M
    rng = random.Random(seed)
    m = MetricSpace.uniform(k)
    share = Fraction(1, M)
    steps = []
    for _ in range(T):
        b = rng.randrange(blocks)
        masses = [ZERO] * k
        for i in range(b * M, (b + 1) * M):
            masses[i] = share
        steps.append(MassVector(tuple(masses)))
    return DemandSequence(steps=tuple(steps), metric=m)


def gen_geometric(epsilon, k: int, T: int, seed: int) -> DemandSequence:
    """Point-mass demand that stays put with probability epsilon/(1+epsilon)
    each step (geometric sojourn of mean 1+epsilon, never repositioning to the
    same vertex); distances are 1+epsilon everywhere."""
    eps = _param_fraction(epsilon, "epsilon")
    if not 0 < eps < 1:
        raise InputError("gen_geometric: epsilon must lie strictly between 0 and 1")
    if k < 2 or T < 1:
        raise InputError("gen_geometric: need k >= 2 and T >= 1")
    rng = random.Random(seed)
    m = MetricSpace.uniform(k, 1 + eps)
    move_probability = float(1 / (1 + eps))
    cur = rng.randrange(k)
    steps = [MassVector.point(k, cur)]
    for _ in range(1, T):
        if rng.random() < move_probability:
            hop = rng.randrange(k - 1)
            cur = hop if hop < cur else hop + 1
        steps.append(MassVector.point(k, cur))
    return DemandSequence(steps=tuple(steps), metric=m)


def gen_drift(delta, T: int, seed: int) -> DemandSequence:
    """Two-vertex unit metric; each step is (1, 0) or (1-2*delta, 2*delta)
    with equal probability, giving expected drift delta."""
    dl = _param_fraction(delta, "delta")
    if not 0 <= dl <= Fraction(1, 2):
        raise InputError("gen_drift: delta must lie in [0, 1/2]")
    if T < 1:
        raise InputError("gen_drift: T must be positive")
    rng = random.Random(seed)
    m = MetricSpace.uniform(2)
    heavy = MassVector.of([1, 0])
    shifted = MassVector.of([1 - 2 * dl, 2 * dl])
    steps = tuple(
        heavy if rng.random() < 0.5 else shifted for _ in range(T)
    )
    return DemandSequence(steps=steps, metric=m)


def sequence_stats(d: DemandSequence) -> SequenceStats:
    """rho = inverse of the largest single-vertex demand; delta = average
    total-variation distance between consecutive steps (the first step
    contributes zero drift)."""
    peak = max(x for dt in d.steps for x in dt)
    total_drift = ZERO
    for t in range(1, len(d)):
        l1 = sum(
            (abs(d.steps[t][i] - d.steps[t - 1][i]) for i in range(len(d.steps[t]))),
            ZERO,
        )
        total_drift += l1 / 2
    return SequenceStats(rho=1 / peak, delta=total_drift / len(d))
