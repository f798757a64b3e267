"""Finite metric spaces, mass vectors, and exact min-cost transportation flows.

Everything in this module is computed over exact rationals (``fractions.Fraction``)
so optimality certificates are equalities, not tolerance checks.  All public types
are immutable after construction and all operations are pure functions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, List, Optional, Sequence, Set, Tuple

Edge = Tuple[int, int]

ZERO = Fraction(0)
ONE = Fraction(1)


class InputError(ValueError):
    """Raised for malformed or out-of-contract inputs (CLI exit code 2)."""


class ContractViolation(InputError):
    """Raised when a caller passes an object that breaks a documented precondition."""


class VerificationError(RuntimeError):
    """Raised when an internal certainty (a proved equality) fails to hold."""


def as_fraction(value, what: str = "value") -> Fraction:
    """Coerce ints, Fractions, and 'p/q' strings to Fraction.  Floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"{what}: cannot parse {value!r} as a rational") from exc
    if isinstance(value, float):
        raise InputError(
            f"{what}: floats are not exact; pass an int, Fraction, or 'p/q' string"
        )
    raise InputError(f"{what}: unsupported rational type {type(value).__name__}")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSpace:
    """A finite metric: symmetric nonnegative distances with zero diagonal and
    the triangle inequality.  ``unit_min`` records whether every off-diagonal
    distance is >= 1 (needed by the hold-step pricing argument)."""

    vertex_count: int
    distances: Tuple[Tuple[Fraction, ...], ...]
    unit_min: bool

    def __post_init__(self) -> None:
        k = self.vertex_count
        if k <= 0:
            raise InputError("metric: vertex_count must be positive")
        d = self.distances
        if len(d) != k or any(len(row) != k for row in d):
            raise InputError("metric: distance matrix must be k x k")
        for i in range(k):
            if d[i][i] != 0:
                raise InputError(f"metric: distances[{i}][{i}] must be 0")
            for j in range(k):
                if d[i][j] < 0:
                    raise InputError(f"metric: distances[{i}][{j}] is negative")
                if d[i][j] != d[j][i]:
                    raise InputError(f"metric: asymmetric at ({i},{j})")
        for i in range(k):
            for j in range(k):
                for via in range(k):
                    if d[i][j] > d[i][via] + d[via][j]:
                        raise InputError(
                            f"metric: triangle inequality fails at ({i},{j}) via {via}"
                        )
        recomputed = all(d[i][j] >= 1 for i in range(k) for j in range(k) if i != j)
        if self.unit_min != recomputed:
            raise InputError("metric: unit_min flag does not match the distances")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "MetricSpace":
        dist = tuple(
            tuple(as_fraction(x, f"distances[{i}][{j}]") for j, x in enumerate(row))
            for i, row in enumerate(rows)
        )
        k = len(dist)
        unit_min = all(
            dist[i][j] >= 1 for i in range(k) for j in range(k) if i != j
        )
        return cls(vertex_count=k, distances=dist, unit_min=unit_min)

    def distance(self, u: int, v: int) -> Fraction:
        return self.distances[u][v]

    @classmethod
    def uniform(cls, k: int, spacing=1) -> "MetricSpace":
        """All off-diagonal distances equal to ``spacing``."""
        c = as_fraction(spacing, "spacing")
        rows = [[ZERO if i == j else c for j in range(k)] for i in range(k)]
        return cls.from_rows(rows)


def metric_closure(rows: Sequence[Sequence], vertex_count: Optional[int] = None) -> MetricSpace:
    """Build a MetricSpace from raw symmetric edge weights via shortest paths.

    ``rows`` is a k x k matrix whose entries may violate the triangle
    inequality; ``None`` marks a missing direct edge.  The all-pairs shortest
    path closure is returned.  A disconnected input is rejected.
    """
    k = vertex_count if vertex_count is not None else len(rows)
    if len(rows) != k or any(len(r) != k for r in rows):
        raise InputError("closure: matrix must be k x k")
    INF = None
    d: List[List[Optional[Fraction]]] = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            x = rows[i][j]
            if x is None:
                continue
            w = as_fraction(x, f"weights[{i}][{j}]")
            if w < 0:
                raise InputError(f"closure: negative weight at ({i},{j})")
            d[i][j] = w
    for i in range(k):
        d[i][i] = ZERO
    for via in range(k):
        for i in range(k):
            if d[i][via] is INF:
                continue
            for j in range(k):
                if d[via][j] is INF:
                    continue
                cand = d[i][via] + d[via][j]
                if d[i][j] is INF or cand < d[i][j]:
                    d[i][j] = cand
    for i in range(k):
        for j in range(k):
            if d[i][j] is INF:
                raise InputError("closure: graph is disconnected")
            if d[i][j] != d[j][i]:
                raise InputError(f"closure: asymmetric weights at ({i},{j})")
    return MetricSpace.from_rows([[x for x in row] for row in d])


def metric_from_edges(vertex_count: int, edges: Iterable[Sequence]) -> MetricSpace:
    """Closure helper for edge-list input: edges are (u, v, weight) triples."""
    rows: List[List[Optional[Fraction]]] = [
        [None] * vertex_count for _ in range(vertex_count)
    ]
    for idx, e in enumerate(edges):
        if len(e) != 3:
            raise InputError(f"edges[{idx}]: expected [u, v, weight]")
        u, v, w = e
        if not (isinstance(u, int) and isinstance(v, int)):
            raise InputError(f"edges[{idx}]: endpoints must be integers")
        if not (0 <= u < vertex_count and 0 <= v < vertex_count):
            raise InputError(f"edges[{idx}]: endpoint out of range")
        wf = as_fraction(w, f"edges[{idx}].weight")
        if rows[u][v] is None or wf < rows[u][v]:
            rows[u][v] = wf
            rows[v][u] = wf
    return metric_closure(rows, vertex_count)


@dataclass(frozen=True)
class MassVector:
    """Nonnegative per-vertex masses summing to exactly one."""

    masses: Tuple[Fraction, ...]

    def __post_init__(self) -> None:
        total = ZERO
        for i, x in enumerate(self.masses):
            if not isinstance(x, Fraction):
                raise InputError(f"masses[{i}]: expected Fraction, use MassVector.of()")
            if x < 0:
                raise InputError(f"masses[{i}] is negative")
            total += x
        if total != 1:
            raise InputError(f"masses sum to {total}, expected 1")

    @classmethod
    def of(cls, values: Sequence) -> "MassVector":
        return cls(tuple(as_fraction(x, f"masses[{i}]") for i, x in enumerate(values)))

    @classmethod
    def uniform(cls, k: int) -> "MassVector":
        return cls(tuple(Fraction(1, k) for _ in range(k)))

    @classmethod
    def point(cls, k: int, vertex: int) -> "MassVector":
        if not 0 <= vertex < k:
            raise InputError("point mass vertex out of range")
        return cls(tuple(ONE if i == vertex else ZERO for i in range(k)))

    def __len__(self) -> int:
        return len(self.masses)

    def __getitem__(self, i: int) -> Fraction:
        return self.masses[i]

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.masses)


@dataclass(frozen=True)
class Flow:
    """A transport plan between two mass vectors with its distance-weighted cost."""

    entries: Tuple[Tuple[Fraction, ...], ...]
    source: MassVector
    target: MassVector
    cost: Fraction

    def __post_init__(self) -> None:
        k = len(self.source)
        if len(self.target) != k or len(self.entries) != k:
            raise InputError("flow: dimension mismatch")
        for i, row in enumerate(self.entries):
            if len(row) != k:
                raise InputError("flow: entries must be k x k")
            for j, x in enumerate(row):
                if x < 0:
                    raise InputError(f"flow: entry ({i},{j}) is negative")
        for i in range(k):
            if sum(self.entries[i], ZERO) != self.source[i]:
                raise InputError(f"flow: row {i} sum differs from source mass")
        for j in range(k):
            if sum((self.entries[i][j] for i in range(k)), ZERO) != self.target[j]:
                raise InputError(f"flow: column {j} sum differs from target mass")

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence], metric: MetricSpace) -> "Flow":
        k = metric.vertex_count
        if len(entries) != k or any(len(r) != k for r in entries):
            raise InputError("flow: entries must match the metric's vertex count")
        ent = tuple(
            tuple(as_fraction(x, f"flow[{i}][{j}]") for j, x in enumerate(row))
            for i, row in enumerate(entries)
        )
        src = MassVector(tuple(sum(row, ZERO) for row in ent))
        tgt = MassVector(tuple(sum((ent[i][j] for i in range(k)), ZERO) for j in range(k)))
        cost = sum(
            (ent[i][j] * metric.distances[i][j] for i in range(k) for j in range(k)),
            ZERO,
        )
        return cls(entries=ent, source=src, target=tgt, cost=cost)

    @property
    def support(self) -> List[Edge]:
        return [
            (i, j)
            for i, row in enumerate(self.entries)
            for j, x in enumerate(row)
            if x > 0
        ]

    def value(self, u: int, v: int) -> Fraction:
        return self.entries[u][v]


@dataclass(frozen=True)
class DualPotentials:
    """LP dual certificate for a min-cost transportation flow."""

    source_potentials: Tuple[Fraction, ...]
    target_potentials: Tuple[Fraction, ...]


@dataclass(frozen=True)
class FlowCheck:
    """Outcome of verify_min_cost: ok plus the list of failed conditions."""

    ok: bool
    issues: Tuple[str, ...]


# ---------------------------------------------------------------------------
# Solver: transportation simplex with Bland's rule
# ---------------------------------------------------------------------------


def _northwest_corner(supply: List[Fraction], demand: List[Fraction]):
    """Initial basic feasible solution; exactly 2k-1 basic cells."""
    k = len(supply)
    rs = list(supply)
    cd = list(demand)
    alloc = {}
    i = j = 0
    while True:
        a = min(rs[i], cd[j])
        alloc[(i, j)] = a
        rs[i] -= a
        cd[j] -= a
        if i == k - 1 and j == k - 1:
            break
        if rs[i] == 0 and i < k - 1:
            i += 1
        else:
            j += 1
    return alloc


def _basis_potentials(k: int, basis: Set[Edge], cost) -> Tuple[List[Fraction], List[Fraction]]:
    """Solve u_i + v_j = cost[i][j] on the basis tree, anchored at u_0 = 0."""
    rows_adj: List[List[int]] = [[] for _ in range(k)]
    cols_adj: List[List[int]] = [[] for _ in range(k)]
    for (i, j) in basis:
        rows_adj[i].append(j)
        cols_adj[j].append(i)
    u: List[Optional[Fraction]] = [None] * k
    v: List[Optional[Fraction]] = [None] * k
    u[0] = ZERO
    stack: List[Tuple[str, int]] = [("r", 0)]
    while stack:
        side, idx = stack.pop()
        if side == "r":
            for j in rows_adj[idx]:
                if v[j] is None:
                    v[j] = cost[idx][j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in cols_adj[idx]:
                if u[i] is None:
                    u[i] = cost[i][idx] - v[idx]
                    stack.append(("r", i))
    if any(x is None for x in u) or any(x is None for x in v):
        raise VerificationError("transport simplex: basis is not a spanning tree")
    return u, v  # type: ignore[return-value]


def _basis_cycle(k: int, basis: Set[Edge], entering: Edge) -> List[Edge]:
    """Cells of the unique cycle created by adding ``entering`` to the basis
    tree, ordered so that cells at odd positions receive -theta."""
    ei, ej = entering
    adj = {}
    for (i, j) in basis:
        adj.setdefault(("r", i), []).append((("c", j), (i, j)))
        adj.setdefault(("c", j), []).append((("r", i), (i, j)))
    start = ("c", ej)
    goal = ("r", ei)
    prev = {start: (None, None)}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt, cell in adj.get(node, []):
            if nxt not in prev:
                prev[nxt] = (node, cell)
                queue.append(nxt)
    if goal not in prev:
        raise VerificationError("transport simplex: basis tree is disconnected")
    path_cells: List[Edge] = []
    node = goal
    while node != start:
        node, cell = prev[node]
        path_cells.append(cell)  # from row_ei back toward col_ej
    path_cells.reverse()  # now ordered from col_ej side to row_ei side
    return [entering] + path_cells


def _transport_simplex(supply: List[Fraction], demand: List[Fraction], cost):
    """Exact transportation simplex.  Deterministic: northwest-corner start,
    lexicographically first entering cell with negative reduced cost, and the
    lexicographically first leaving cell among the minimum-ratio candidates
    (Bland's rule, so no cycling)."""
    k = len(supply)
    alloc = _northwest_corner(supply, demand)
    basis: Set[Edge] = set(alloc.keys())
    while True:
        u, v = _basis_potentials(k, basis, cost)
        entering = None
        for i in range(k):
            ui = u[i]
            for j in range(k):
                if (i, j) in basis:
                    continue
                if cost[i][j] - ui - v[j] < 0:
                    entering = (i, j)
                    break
            if entering is not None:
                break
        if entering is None:
            return alloc, basis, u, v
        cycle = _basis_cycle(k, basis, entering)
        minus = cycle[1::2]
        theta = min(alloc[c] for c in minus)
        leaving = min(c for c in minus if alloc[c] == theta)
        alloc[entering] = ZERO
        for pos, cell in enumerate(cycle):
            if pos % 2 == 0:
                alloc[cell] += theta
            else:
                alloc[cell] -= theta
        basis.add(entering)
        basis.remove(leaving)
        del alloc[leaving]


def _check_dims(s: MassVector, d: MassVector, m: MetricSpace) -> None:
    if len(s) != m.vertex_count or len(d) != m.vertex_count:
        raise InputError(
            f"dimension mismatch: metric has {m.vertex_count} vertices, "
            f"vectors have {len(s)} and {len(d)}"
        )


def identity_flow(s: MassVector, m: MetricSpace) -> Flow:
    """The no-movement flow from s to s (cost 0)."""
    _check_dims(s, s, m)
    k = m.vertex_count
    entries = tuple(
        tuple(s[i] if i == j else ZERO for j in range(k)) for i in range(k)
    )
    return Flow(entries=entries, source=s, target=s, cost=ZERO)


def min_cost_flow(s: MassVector, d: MassVector, m: MetricSpace) -> Tuple[Flow, DualPotentials]:
    """Minimum-cost transport plan from s to d with an optimality certificate.

    Returns a basic optimal solution (support size <= 2k-1) together with dual
    potentials satisfying feasibility and complementary slackness.  When s == d
    the identity flow with zero potentials is returned directly.
    """
    _check_dims(s, d, m)
    k = m.vertex_count
    if s.masses == d.masses:
        zeros = tuple(ZERO for _ in range(k))
        return identity_flow(s, m), DualPotentials(zeros, zeros)
    alloc, basis, u, v = _transport_simplex(list(s), list(d), m.distances)
    entries = [[ZERO] * k for _ in range(k)]
    for (i, j), a in alloc.items():
        entries[i][j] = a
    ent = tuple(tuple(row) for row in entries)
    cost = sum((alloc[c] * m.distances[c[0]][c[1]] for c in alloc), ZERO)
    flow = Flow(entries=ent, source=s, target=d, cost=cost)
    duals = DualPotentials(
        source_potentials=tuple(-x for x in u),
        target_potentials=tuple(v),
    )
    return flow, duals


def flow_cost(f: Flow, m: MetricSpace) -> Fraction:
    """Distance-weighted total movement of a flow."""
    k = m.vertex_count
    if len(f.source) != k:
        raise InputError("flow_cost: flow and metric dimensions differ")
    return sum(
        (f.entries[i][j] * m.distances[i][j] for i in range(k) for j in range(k)),
        ZERO,
    )


def earthmover_distance(s: MassVector, d: MassVector, m: MetricSpace) -> Fraction:
    """Cost of the cheapest transport plan from s to d."""
    return min_cost_flow(s, d, m)[0].cost


def duals_feasible(duals: DualPotentials, m: MetricSpace) -> bool:
    k = m.vertex_count
    sp = duals.source_potentials
    tp = duals.target_potentials
    if len(sp) != k or len(tp) != k:
        raise InputError("duals: dimension mismatch with metric")
    return all(
        tp[j] - sp[i] <= m.distances[i][j] for i in range(k) for j in range(k)
    )


def verify_min_cost(f: Flow, duals: DualPotentials, m: MetricSpace) -> FlowCheck:
    """Certify optimality of a flow via LP duality.

    Raises InputError when the flow itself is malformed (wrong shape or stored
    cost); a well-formed but suboptimal flow yields ok=False with the failed
    conditions listed.
    """
    k = m.vertex_count
    if len(f.source) != k:
        raise InputError("verify_min_cost: flow and metric dimensions differ")
    if f.cost != flow_cost(f, m):
        raise InputError("verify_min_cost: stored cost differs from recomputed cost")
    issues: List[str] = []
    sp = duals.source_potentials
    tp = duals.target_potentials
    if len(sp) != k or len(tp) != k:
        raise InputError("verify_min_cost: duals dimension mismatch")
    for i in range(k):
        for j in range(k):
            slack = m.distances[i][j] - (tp[j] - sp[i])
            if slack < 0:
                issues.append(f"dual infeasible at ({i},{j})")
            elif f.entries[i][j] > 0 and slack != 0:
                issues.append(f"slack edge ({i},{j}) carries flow")
    return FlowCheck(ok=not issues, issues=tuple(issues))


def zero_reduced_cost_edges(duals: DualPotentials, m: MetricSpace) -> Set[Edge]:
    """Edges that are tight under the duals.  Every min-cost flow's support is
    contained in this set."""
    if not duals_feasible(duals, m):
        raise InputError("zero_reduced_cost_edges: duals are infeasible")
    k = m.vertex_count
    sp = duals.source_potentials
    tp = duals.target_potentials
    return {
        (i, j)
        for i in range(k)
        for j in range(k)
        if tp[j] - sp[i] == m.distances[i][j]
    }


def usable_optimal_edges(f: Flow, duals: DualPotentials, m: MetricSpace) -> Set[Edge]:
    """The exact union of the supports of *all* min-cost flows.

    An edge (u,v) belongs to some optimal flow iff it is tight and either
    carries flow in f or lies on an alternating residual cycle: column v must
    reach row u through arcs {row->col on tight edges} and {col->row on edges
    carrying flow}.  f must itself be optimal under ``duals``.
    """
    check = verify_min_cost(f, duals, m)
    if not check.ok:
        raise ContractViolation(
            "usable_optimal_edges: flow is not certified optimal: "
            + "; ".join(check.issues)
        )
    k = m.vertex_count
    tight = zero_reduced_cost_edges(duals, m)
    rows_from_col: List[Set[int]] = [set() for _ in range(k)]
    cols_from_row: List[Set[int]] = [set() for _ in range(k)]
    for (i, j) in tight:
        cols_from_row[i].add(j)
    for i in range(k):
        for j in range(k):
            if f.entries[i][j] > 0:
                rows_from_col[j].add(i)
    usable: Set[Edge] = set()
    for j0 in range(k):
        # BFS from column j0 over the residual digraph.
        seen_rows: Set[int] = set()
        seen_cols = {j0}
        queue = deque([("c", j0)])
        while queue:
            side, idx = queue.popleft()
            if side == "c":
                for r in rows_from_col[idx]:
                    if r not in seen_rows:
                        seen_rows.add(r)
                        queue.append(("r", r))
            else:
                for c in cols_from_row[idx]:
                    if c not in seen_cols:
                        seen_cols.add(c)
                        queue.append(("c", c))
        for i in seen_rows:
            if (i, j0) in tight:
                usable.add((i, j0))
    for e in f.support:
        usable.add(e)
    return usable


def alternative_min_cost_flows(
    f: Flow, duals: DualPotentials, m: MetricSpace, limit: int = 10
) -> List[Flow]:
    """Distinct optimal flows reachable from f by one alternating-cycle push on
    a tight zero-flow edge.  Used to exhibit alternative optima; every result
    has exactly f's cost."""
    k = m.vertex_count
    usable = usable_optimal_edges(f, duals, m)
    out: List[Flow] = []
    for (u0, v0) in sorted(usable):
        if f.entries[u0][v0] > 0 or len(out) >= limit:
            continue
        cycle = _residual_cycle(f, duals, m, (u0, v0))
        if cycle is None:
            continue
        eps = min(f.entries[i][j] for (i, j) in cycle[1::2])
        entries = [list(row) for row in f.entries]
        for pos, (i, j) in enumerate(cycle):
            if pos % 2 == 0:
                entries[i][j] += eps
            else:
                entries[i][j] -= eps
        out.append(Flow.from_entries(entries, m))
    return out


def _residual_cycle(f: Flow, duals: DualPotentials, m: MetricSpace, edge: Edge):
    """Alternating cycle (forward tight cells at even positions, flow-carrying
    cells at odd positions) that routes mass onto ``edge``; None if impossible."""
    k = m.vertex_count
    tight = zero_reduced_cost_edges(duals, m)
    u0, v0 = edge
    prev = {("c", v0): (None, None)}
    queue = deque([("c", v0)])
    goal = ("r", u0)
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        side, idx = node
        if side == "c":
            for i in range(k):
                if f.entries[i][idx] > 0 and ("r", i) not in prev:
                    prev[("r", i)] = (node, (i, idx))
                    queue.append(("r", i))
        else:
            for j in range(k):
                if (idx, j) in tight and ("c", j) not in prev:
                    prev[("c", j)] = (node, (idx, j))
                    queue.append(("c", j))
    if goal not in prev:
        return None
    cells: List[Edge] = []
    node = goal
    while node != ("c", v0):
        node, cell = prev[node]
        cells.append(cell)
    cells.reverse()
    return [edge] + cells


def remove_through_flow(f: Flow, m: MetricSpace) -> Flow:
    """Reroute chains u->x->v to u->v (+ a self-loop at x).  Never increases
    cost on a metric, so an optimal input stays optimal; the result has no
    vertex that both sends and receives off-diagonal mass."""
    k = m.vertex_count
    entries = [list(row) for row in f.entries]
    changed = True
    while changed:
        changed = False
        for x in range(k):
            senders = [w for w in range(k) if w != x and entries[w][x] > 0]
            receivers = [v for v in range(k) if v != x and entries[x][v] > 0]
            if not senders or not receivers:
                continue
            w, v = senders[0], receivers[0]
            eps = min(entries[w][x], entries[x][v])
            entries[w][x] -= eps
            entries[x][v] -= eps
            entries[w][v] += eps
            entries[x][x] += eps
            changed = True
    return Flow.from_entries(entries, m)
