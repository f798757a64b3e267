"""Competitive-ratio experiments: paired online-vs-optimal trials at scale.

The four demand generators all produce highly structured sequences (point
masses, block-uniform masses, or a two-vector drift), which lets both the
online policies and the clairvoyant optimum be evaluated exactly from a
compact token stream instead of full mass vectors and transport solves.  The
compact evaluators replay the generators' RNG draw-for-draw and are
cross-validated against the reference implementations in the test suite; the
time-expanded solver stays available for arbitrary sequences at small sizes.

Seed discipline: trial i uses trial_seed = seed * 1_000_003 + i; the
generator stream is seeded with 2 * trial_seed and the algorithm stream with
2 * trial_seed + 1.  Trials are independent, so results are byte-identical
regardless of execution order.
"""

from __future__ import annotations

import csv
import heapq
import json
import math
import random
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from surgeflow.online import (
    DemandSequence,
    gen_drift,
    gen_geometric,
    gen_single_vertex,
    gen_subset,
    offline_opt,
    run_comp,
    run_match,
    run_rand,
    run_stay,
)
from surgeflow.transport import InputError, VerificationError

ZERO = Fraction(0)
ONE = Fraction(1)

GENERATOR_NAMES = ("single_vertex", "subset", "geometric", "drift")
ALGORITHM_NAMES = ("stay", "match", "rand", "comp")


@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    params: Tuple[Tuple[str, Fraction], ...]

    def param(self, key: str) -> Fraction:
        for k, v in self.params:
            if k == key:
                return v
        raise InputError(f"generator spec is missing parameter {key!r}")


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    p: Optional[Fraction] = None


_GENERATOR_KEYS = {
    "single_vertex": ("k", "T"),
    "subset": ("rho", "k", "T"),
    "geometric": ("epsilon", "k", "T"),
    "drift": ("delta", "T"),
}


def _parse_params(text: str, what: str) -> Dict[str, Fraction]:
    params: Dict[str, Fraction] = {}
    if not text:
        return params
    for piece in text.split(","):
        if "=" not in piece:
            raise InputError(f"{what}: expected key=value, got {piece!r}")
        key, _, raw = piece.partition("=")
        key = key.strip()
        try:
            params[key.strip()] = Fraction(raw.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"{what}: bad value for {key!r}: {raw!r}") from exc
    return params


def parse_generator_spec(text) -> GeneratorSpec:
    if isinstance(text, GeneratorSpec):
        return text
    name, _, rest = text.partition(":")
    name = name.strip()
    if name not in _GENERATOR_KEYS:
        raise InputError(
            f"unknown generator {name!r}; expected one of {GENERATOR_NAMES}"
        )
    params = _parse_params(rest, f"generator {name}")
    expected = _GENERATOR_KEYS[name]
    missing = [k for k in expected if k not in params]
    extra = [k for k in params if k not in expected]
    if missing or extra:
        raise InputError(
            f"generator {name} takes parameters {expected}; "
            f"missing {missing}, unexpected {extra}"
        )
    for key in ("k", "T"):
        if key in params and (params[key].denominator != 1 or params[key] < 1):
            raise InputError(f"generator {name}: {key} must be a positive integer")
    return GeneratorSpec(name=name, params=tuple((k, params[k]) for k in expected))


def parse_algorithm_spec(text) -> AlgorithmSpec:
    if isinstance(text, AlgorithmSpec):
        return text
    name, _, rest = text.partition(":")
    name = name.strip()
    if name not in ALGORITHM_NAMES:
        raise InputError(
            f"unknown algorithm {name!r}; expected one of {ALGORITHM_NAMES}"
        )
    params = _parse_params(rest, f"algorithm {name}")
    if name in ("stay", "match"):
        if params:
            raise InputError(f"algorithm {name} takes no parameters")
        return AlgorithmSpec(name=name)
    if set(params) != {"p"}:
        raise InputError(f"algorithm {name} needs exactly the parameter p")
    p = params["p"]
    if not 0 <= p <= 1:
        raise InputError(f"algorithm {name}: p must be a probability")
    return AlgorithmSpec(name=name, p=p)


def build_sequence(spec, seed: int) -> DemandSequence:
    """Materialize a generator spec into a full demand sequence (reference
    path; the experiment loop itself works on compact tokens)."""
    g = parse_generator_spec(spec)
    if g.name == "single_vertex":
        return gen_single_vertex(int(g.param("k")), int(g.param("T")), seed)
    if g.name == "subset":
        return gen_subset(g.param("rho"), int(g.param("k")), int(g.param("T")), seed)
    if g.name == "geometric":
        return gen_geometric(
            g.param("epsilon"), int(g.param("k")), int(g.param("T")), seed
        )
    return gen_drift(g.param("delta"), int(g.param("T")), seed)


# ---------------------------------------------------------------------------
# Compact trial evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Family:
    """Everything needed to score a structured sequence from its tokens.

    kind "point": one token per step naming the demanded point/block; serving
    is all-or-nothing and moving between distinct tokens costs move_cost.
    kind "drift": tokens are True for (1,0) and False for (1-2d, 2d).
    """

    kind: str
    k: int
    T: int
    move_cost: Fraction
    alphabet: int
    stay_served: Tuple[Fraction, ...]  # indexed by token class (see below)
    cross_served: Fraction
    drift_step: Fraction  # total-variation distance between distinct tokens


def _family_for(g: GeneratorSpec) -> _Family:
    T = int(g.param("T"))
    if g.name == "single_vertex":
        k = int(g.param("k"))
        if k < 1 or T < 1:
            raise InputError("single_vertex: k and T must be positive")
        return _Family(
            kind="point",
            k=k,
            T=T,
            move_cost=ONE,
            alphabet=k,
            stay_served=(Fraction(1, k),),
            cross_served=ZERO,
            drift_step=ONE,
        )
    if g.name == "subset":
        k = int(g.param("k"))
        rho = g.param("rho")
        if rho < 1 or rho > k:
            raise InputError("subset: need 1 <= rho <= k")
        M = math.ceil(rho)
        blocks = k // M
        return _Family(
            kind="point",
            k=k,
            T=T,
            move_cost=ONE,
            alphabet=blocks,
            stay_served=(Fraction(M, k),),
            cross_served=ZERO,
            drift_step=ONE,
        )
    if g.name == "geometric":
        k = int(g.param("k"))
        eps = g.param("epsilon")
        if not 0 < eps < 1:
            raise InputError("geometric: epsilon must lie strictly between 0 and 1")
        if k < 2:
            raise InputError("geometric: need k >= 2")
        return _Family(
            kind="point",
            k=k,
            T=T,
            move_cost=1 + eps,
            alphabet=k,
            stay_served=(Fraction(1, k),),
            cross_served=ZERO,
            drift_step=ONE,
        )
    dl = g.param("delta")
    if not 0 <= dl <= Fraction(1, 2):
        raise InputError("drift: delta must lie in [0, 1/2]")
    half = Fraction(1, 2)
    return _Family(
        kind="drift",
        k=2,
        T=T,
        move_cost=2 * dl,
        alphabet=2,
        # token True = (1, 0), token False = (1-2d, 2d)
        stay_served=(min(half, 1 - 2 * dl) + min(half, 2 * dl), half),
        cross_served=1 - 2 * dl,
        drift_step=2 * dl,
    )


def _tokens_for(g: GeneratorSpec, fam: _Family, rng: random.Random) -> List:
    """Replays the corresponding generator's RNG stream draw-for-draw."""
    T = fam.T
    if g.name in ("single_vertex", "subset"):
        return [rng.randrange(fam.alphabet) for _ in range(T)]
    if g.name == "geometric":
        eps = g.param("epsilon")
        move_probability = float(1 / (1 + eps))
        cur = rng.randrange(fam.k)
        tokens = [cur]
        for _ in range(1, T):
            if rng.random() < move_probability:
                hop = rng.randrange(fam.k - 1)
                cur = hop if hop < cur else hop + 1
            tokens.append(cur)
        return tokens
    return [rng.random() < 0.5 for _ in range(T)]


def _token_stay_served(fam: _Family, token) -> Fraction:
    if fam.kind == "drift":
        return fam.stay_served[1] if token else fam.stay_served[0]
    return fam.stay_served[0]


def _pair_served(fam: _Family, held, demand) -> Fraction:
    return ONE if held == demand else fam.cross_served


def _token_stats(fam: _Family, tokens, g: GeneratorSpec) -> Tuple[Fraction, Fraction]:
    """(rho, delta) of the materialized sequence, computed exactly."""
    switches = sum(1 for a, b in zip(tokens, tokens[1:]) if a != b)
    delta = Fraction(switches) * fam.drift_step / fam.T
    if fam.kind == "drift":
        dl = g.param("delta")
        if any(tokens):
            rho = ONE
        else:
            rho = 1 / max(1 - 2 * dl, 2 * dl) if dl > 0 else ONE
    elif g.name == "subset":
        rho = Fraction(math.ceil(g.param("rho")))
    else:
        rho = ONE
    return rho, delta


def _stay_sw(fam: _Family, tokens) -> Fraction:
    return sum((_token_stay_served(fam, tok) for tok in tokens), ZERO)


def _rand_sw(fam: _Family, tokens, p: float, rng: random.Random) -> Fraction:
    held = tokens[0]
    sw = ONE
    for tok in tokens[1:]:
        if rng.random() < p:
            sw += ONE
            if tok != held:
                sw -= fam.move_cost
                held = tok
        else:
            sw += _pair_served(fam, held, tok)
    return sw


def _match_sw(fam: _Family, tokens) -> Fraction:
    moves = sum(1 for a, b in zip(tokens, tokens[1:]) if a != b)
    return fam.T - Fraction(moves) * fam.move_cost


def _algorithm_sw(
    fam: _Family, tokens, a: AlgorithmSpec, rng: random.Random
) -> Fraction:
    if a.name == "stay":
        return _stay_sw(fam, tokens)
    if a.name == "match":
        return _match_sw(fam, tokens)
    if a.name == "rand":
        return _rand_sw(fam, tokens, float(a.p), rng)
    heads = rng.random() < 0.5
    if heads:
        return _stay_sw(fam, tokens)
    return _rand_sw(fam, tokens, float(a.p), rng)


def _algorithm_series(
    fam: _Family, tokens, a: AlgorithmSpec, rng: random.Random
) -> Tuple[List[Fraction], List[Fraction]]:
    """Per-step (served, movement-cost) series for plot emission; mirrors
    _algorithm_sw exactly, including RNG consumption."""
    T = fam.T
    if a.name == "comp":
        heads = rng.random() < 0.5
        inner = AlgorithmSpec(name="stay" if heads else "rand", p=a.p)
        return _algorithm_series(fam, tokens, inner, rng)
    if a.name == "stay":
        return [_token_stay_served(fam, tok) for tok in tokens], [ZERO] * (T - 1)
    if a.name == "match":
        served = [ONE] * T
        moved = [
            fam.move_cost if a_ != b_ else ZERO
            for a_, b_ in zip(tokens, tokens[1:])
        ]
        return served, moved
    held = tokens[0]
    served = [ONE]
    moved = []
    p = float(a.p)
    for tok in tokens[1:]:
        if rng.random() < p:
            served.append(ONE)
            moved.append(fam.move_cost if tok != held else ZERO)
            held = tok
        else:
            served.append(_pair_served(fam, held, tok))
            moved.append(ZERO)
    return served, moved


# ---------------------------------------------------------------------------
# Exact structured optima
# ---------------------------------------------------------------------------


def _point_mass_opt(tokens: Sequence[int], move_cost: Fraction) -> Fraction:
    """Optimal welfare when each step demands a single token and relocation
    between distinct tokens costs move_cost.

    An integral optimum exists (the scaled time-expanded network has unit
    data), so supply can be assumed to sit on one token per step, giving the
    recurrence V_t(i) = max(V_{t-1}(i), M_{t-1} - move_cost) + [i = c_t].
    All vertices except a shrinking exception set share the floor value
    max(F, M - move_cost); two lazy-deletion heaps keep each step O(log T).
    """
    floor = ZERO
    values: Dict[int, Fraction] = {tokens[0]: ONE}
    top: List[Tuple[Fraction, int]] = [(-ONE, tokens[0])]
    bottom: List[Tuple[Fraction, int]] = [(ONE, tokens[0])]
    for c in tokens[1:]:
        while top and values.get(top[0][1]) != -top[0][0]:
            heapq.heappop(top)
        best = -top[0][0] if top else floor
        if best < floor:
            best = floor
        reachable = best - move_cost
        if reachable > floor:
            floor = reachable
        while bottom and bottom[0][0] <= floor:
            v, i = heapq.heappop(bottom)
            if values.get(i) == v:
                del values[i]
        val = values.get(c, floor) + 1
        values[c] = val
        heapq.heappush(top, (-val, c))
        heapq.heappush(bottom, (val, c))
    while top and values.get(top[0][1]) != -top[0][0]:
        heapq.heappop(top)
    best = -top[0][0] if top else floor
    return max(best, floor)


def _drift_opt(tokens: Sequence[bool], delta: Fraction) -> Fraction:
    """Optimal welfare for two-vertex drift sequences by a lattice DP.

    Supply can be assumed on the lattice of the demands' denominator
    (integrality of the scaled network); the movement transform
    max_y V(y) - |x - y| is two linear sweeps.  All arithmetic is on
    integers scaled by the lattice size q.
    """
    two_delta = 2 * delta
    q = two_delta.denominator
    w = int(two_delta * q)  # demand split point on the lattice

    def served(j: int, heavy: bool) -> int:
        target = 0 if heavy else w
        return q - abs(j - target)

    values = [served(j, tokens[0]) for j in range(q + 1)]
    for tok in tokens[1:]:
        for j in range(1, q + 1):
            if values[j - 1] - 1 > values[j]:
                values[j] = values[j - 1] - 1
        for j in range(q - 1, -1, -1):
            if values[j + 1] - 1 > values[j]:
                values[j] = values[j + 1] - 1
        for j in range(q + 1):
            values[j] += served(j, tok)
    return Fraction(max(values), q)


def _opt_sw(fam: _Family, tokens) -> Fraction:
    if fam.kind == "point":
        return _point_mass_opt(tokens, fam.move_cost)
    if fam.move_cost == 0:  # delta = 0: constant demand, serve everything
        return Fraction(fam.T)
    return _drift_opt(tokens, fam.move_cost / 2)


# ---------------------------------------------------------------------------
# The experiment harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    T: int
    k: int
    rho: Fraction
    delta: Fraction
    sw_alg: Fraction
    sw_opt: Fraction
    ratio: Fraction


@dataclass(frozen=True)
class ExperimentSummary:
    generator: str
    algorithm: str
    trials: int
    seed: int
    records: Tuple[TrialRecord, ...]
    mean_sw_alg: float
    mean_sw_opt: float
    ratio_of_means: float
    mean_ratio: float
    std_ratio: float
    stderr_ratio: float
    ci95: Tuple[float, float]


def _spec_text(spec) -> str:
    if isinstance(spec, GeneratorSpec):
        return spec.name + ":" + ",".join(f"{k}={v}" for k, v in spec.params)
    if isinstance(spec, AlgorithmSpec):
        return spec.name if spec.p is None else f"{spec.name}:p={spec.p}"
    return str(spec)


def trial_seed(seed: int, trial: int) -> int:
    return seed * 1_000_003 + trial


def run_trial(
    generator, algorithm, seed: int, trial: int
) -> TrialRecord:
    """One paired trial on the compact fast path."""
    g = parse_generator_spec(generator)
    a = parse_algorithm_spec(algorithm)
    fam = _family_for(g)
    ts = trial_seed(seed, trial)
    tokens = _tokens_for(g, fam, random.Random(2 * ts))
    sw_alg = _algorithm_sw(fam, tokens, a, random.Random(2 * ts + 1))
    sw_opt = _opt_sw(fam, tokens)
    if sw_opt <= 0:
        raise VerificationError("optimal welfare should be positive")
    rho, delta = _token_stats(fam, tokens, g)
    return TrialRecord(
        trial=trial,
        T=fam.T,
        k=fam.k,
        rho=rho,
        delta=delta,
        sw_alg=sw_alg,
        sw_opt=sw_opt,
        ratio=sw_alg / sw_opt,
    )


def reference_trial(generator, algorithm, seed: int, trial: int) -> TrialRecord:
    """The same paired trial via full mass vectors, transport solves, and the
    time-expanded oracle.  Slow; exists to cross-validate run_trial."""
    g = parse_generator_spec(generator)
    a = parse_algorithm_spec(algorithm)
    ts = trial_seed(seed, trial)
    d = build_sequence(g, 2 * ts)
    if a.name == "stay":
        traj = run_stay(d)
    elif a.name == "match":
        traj = run_match(d)
    elif a.name == "rand":
        traj = run_rand(d, a.p, 2 * ts + 1)
    else:
        traj = run_comp(d, a.p, 2 * ts + 1)
    opt = offline_opt(d)
    from surgeflow.online import sequence_stats

    stats = sequence_stats(d)
    return TrialRecord(
        trial=trial,
        T=len(d),
        k=d.metric.vertex_count,
        rho=stats.rho,
        delta=stats.delta,
        sw_alg=traj.total_sw,
        sw_opt=opt.total_sw,
        ratio=traj.total_sw / opt.total_sw,
    )


def competitive_experiment(
    generator, algorithm, trials: int = 200, seed: int = 0
) -> ExperimentSummary:
    """Paired trials (same sequence for the policy and the oracle) with a
    normal-approximation 95% interval on the per-trial ratio."""
    if trials < 1:
        raise InputError("competitive_experiment: trials must be positive")
    g = parse_generator_spec(generator)
    a = parse_algorithm_spec(algorithm)
    records = tuple(run_trial(g, a, seed, i) for i in range(trials))
    ratios = [float(r.ratio) for r in records]
    mean_ratio = statistics.fmean(ratios)
    std_ratio = statistics.stdev(ratios) if trials > 1 else 0.0
    stderr = std_ratio / math.sqrt(trials)
    mean_alg = statistics.fmean(float(r.sw_alg) for r in records)
    mean_opt = statistics.fmean(float(r.sw_opt) for r in records)
    return ExperimentSummary(
        generator=_spec_text(g),
        algorithm=_spec_text(a),
        trials=trials,
        seed=seed,
        records=records,
        mean_sw_alg=mean_alg,
        mean_sw_opt=mean_opt,
        ratio_of_means=mean_alg / mean_opt,
        mean_ratio=mean_ratio,
        std_ratio=std_ratio,
        stderr_ratio=stderr,
        ci95=(mean_ratio - 1.96 * stderr, mean_ratio + 1.96 * stderr),
    )


CSV_COLUMNS = ("trial", "T", "k", "rho", "delta", "sw_alg", "sw_opt", "ratio")


def write_csv(summary: ExperimentSummary, path: str) -> None:
    """One row per trial; rationals are written exactly as p/q strings."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in summary.records:
            writer.writerow(
                [r.trial, r.T, r.k, r.rho, r.delta, r.sw_alg, r.sw_opt, r.ratio]
            )


def plot_data(generator, algorithm, seed: int, trial: int = 0) -> dict:
    """Per-step served/moved series of one trial's policy run, as plain
    floats for external plotting."""
    g = parse_generator_spec(generator)
    a = parse_algorithm_spec(algorithm)
    fam = _family_for(g)
    ts = trial_seed(seed, trial)
    tokens = _tokens_for(g, fam, random.Random(2 * ts))
    served, moved = _algorithm_series(fam, tokens, a, random.Random(2 * ts + 1))
    return {
        "generator": _spec_text(g),
        "algorithm": _spec_text(a),
        "seed": seed,
        "trial": trial,
        "served": [float(x) for x in served],
        "moved": [float(x) for x in moved],
    }


def write_plot_data(generator, algorithm, seed: int, path: str, trial: int = 0) -> None:
    with open(path, "w") as fh:
        json.dump(plot_data(generator, algorithm, seed, trial), fh, indent=2)
        fh.write("\n")
