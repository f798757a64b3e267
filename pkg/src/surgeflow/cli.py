"""Command-line front end.

Subcommands: ``surge continuous``, ``surge discrete``, ``simulate``,
``verify``, ``report``.  Exit codes: 0 success, 1 verification failure,
2 input error (argparse errors also exit 2).  The ``--seed`` flags fall back
to the SURGEFLOW_SEED environment variable, then 0.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from typing import List, Optional

from surgeflow.continuous import (
    ZeroDemandConvention,
    continuous_surge_prices,
    verify_equilibrium_continuous,
)
from surgeflow.discrete import (
    build_discrete_market,
    social_welfare_discrete,
    solve_discrete,
    verify_envy_free,
    verify_taxi_best_response,
)
from surgeflow.experiments import (
    competitive_experiment,
    write_csv,
    write_plot_data,
)
from surgeflow.market import Matching, verify_clearing
from surgeflow.serialize import parse_instance
from surgeflow.transport import InputError, VerificationError


def _emit(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _frac(x) -> str:
    return str(x)


def _default_seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("SURGEFLOW_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise InputError(f"SURGEFLOW_SEED must be an integer, got {env!r}") from exc


def _cmd_surge_continuous(args) -> int:
    inst = parse_instance(args.input)
    if inst.kind != "continuous":
        raise InputError(
            f"{args.input}: surge continuous needs a supply/demand instance"
        )
    convention = ZeroDemandConvention(args.zero_demand_price)
    r, flow = continuous_surge_prices(
        inst.supply, inst.demand, inst.metric, convention
    )
    payload = {
        "kind": "continuous-surge",
        "zero_demand_price": convention.value,
        "surge_prices": [_frac(x) for x in r.price],
        "flow": {
            "cost": _frac(flow.cost),
            "entries": [[_frac(x) for x in row] for row in flow.entries],
        },
    }
    _emit(payload, args.out)
    return 0


def _cmd_surge_discrete(args) -> int:
    inst_file = parse_instance(args.input)
    if inst_file.kind != "discrete":
        raise InputError(
            f"{args.input}: surge discrete needs a passengers/taxicabs instance"
        )
    inst = inst_file.discrete_instance()
    assignment, prices, surge = solve_discrete(inst)
    envy = verify_envy_free(inst, assignment, surge)
    best = verify_taxi_best_response(inst, assignment, prices, surge)
    market = build_discrete_market(inst)
    dist = inst.metric.distances
    welfare = sum(
        (
            inst.passenger_by_id(pid).value
            - dist[inst.taxicab_by_id(tid).location][
                inst.passenger_by_id(pid).location
            ]
            for tid, pid in assignment.serves
        ),
        Fraction(0),
    )
    matching = Matching(
        assignment=tuple((pid, tid) for tid, pid in assignment.serves),
        welfare=welfare,
    )
    clearing = verify_clearing(market, matching, prices)
    payload = {
        "kind": "discrete-surge",
        "serves": [[str(t), str(p)] for t, p in assignment.serves],
        "taxi_prices": {str(t.id): _frac(prices.price_of(t.id)) for t in inst.taxicabs},
        "surge_prices": [
            None if x is None else _frac(x) for x in surge.price
        ],
        "social_welfare": _frac(social_welfare_discrete(inst, assignment)),
        "checks": {
            "envy_free": {"ok": envy.ok, "issues": list(envy.issues)},
            "taxi_best_response": {"ok": best.ok, "issues": list(best.issues)},
            "market_clearing": {"ok": clearing.ok, "issues": list(clearing.issues)},
        },
    }
    _emit(payload, args.out)
    if not (envy.ok and best.ok and clearing.ok):
        return 1
    return 0


def _cmd_verify(args) -> int:
    inst = parse_instance(args.input)
    if inst.kind != "continuous":
        raise InputError(
            f"{args.input}: verify handles continuous instances; discrete "
            "checks are part of `surge discrete` output"
        )
    if inst.surge_prices is None:
        raise InputError(f"{args.input}: verify needs a surge_prices field")
    new_supply = inst.new_supply if inst.new_supply is not None else inst.demand
    report = verify_equilibrium_continuous(
        inst.supply, new_supply, inst.surge_prices, inst.demand, inst.metric
    )
    payload = {
        "kind": "equilibrium-report",
        "ok": report.ok,
        "checked_edge_set": report.checked_edge_set,
        "violations": [
            {
                "origin": u,
                "intended": v,
                "better": w,
                "gap": _frac(gap),
            }
            for (u, v, w, gap) in report.violations
        ],
    }
    _emit(payload, args.out)
    return 0 if report.ok else 1


def _cmd_simulate(args) -> int:
    if args.trials < 1:
        raise InputError("simulate: --trials must be positive")
    seed = _default_seed(args.seed)
    summary = competitive_experiment(
        args.generator, args.algorithm, trials=args.trials, seed=seed
    )
    write_csv(summary, args.out)
    if args.emit_plot_data:
        write_plot_data(args.generator, args.algorithm, seed, args.emit_plot_data)
    sys.stdout.write(
        "generator={g} algorithm={a} trials={t} seed={s} "
        "mean_ratio={mr:.6f} ratio_of_means={rm:.6f} "
        "ci95=[{lo:.6f},{hi:.6f}] csv={out}\n".format(
            g=summary.generator,
            a=summary.algorithm,
            t=summary.trials,
            s=seed,
            mr=summary.mean_ratio,
            rm=summary.ratio_of_means,
            lo=summary.ci95[0],
            hi=summary.ci95[1],
            out=args.out,
        )
    )
    return 0


def _cmd_report(args) -> int:
    from surgeflow import figures

    try:
        with open(args.results) as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError as exc:
        raise InputError(f"results file not found: {args.results}") from exc
    if not rows:
        raise InputError(f"{args.results}: no trial rows")
    try:
        ratios = [float(Fraction(r["ratio"])) for r in rows]
        sw_alg = [float(Fraction(r["sw_alg"])) for r in rows]
        sw_opt = [float(Fraction(r["sw_opt"])) for r in rows]
    except (KeyError, ValueError, ZeroDivisionError, TypeError) as exc:
        raise InputError(
            f"{args.results}: expected simulate CSV columns "
            "(trial,T,k,rho,delta,sw_alg,sw_opt,ratio)"
        ) from exc
    os.makedirs(args.out_dir, exist_ok=True)
    summary_path = os.path.join(args.out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trials", "mean_sw_alg", "mean_sw_opt", "mean_ratio", "ratio_of_means"]
        )
        n = len(rows)
        mean_alg = sum(sw_alg) / n
        mean_opt = sum(sw_opt) / n
        writer.writerow(
            [
                n,
                f"{mean_alg:.9g}",
                f"{mean_opt:.9g}",
                f"{sum(ratios) / n:.9g}",
                f"{mean_alg / mean_opt:.9g}",
            ]
        )
    hist_path = figures.render_ratio_histogram(
        ratios, os.path.join(args.out_dir, "ratio_hist.png")
    )
    scatter_path = figures.render_welfare_scatter(
        sw_alg, sw_opt, os.path.join(args.out_dir, "welfare_scatter.png")
    )
    sys.stdout.write(
        f"wrote {summary_path}, {hist_path}, {scatter_path}\n"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surgeflow",
        description="Exact surge-pricing solvers and online-policy experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    surge = sub.add_parser("surge", help="price a single market instance")
    surge_sub = surge.add_subparsers(dest="mode", required=True)

    cont = surge_sub.add_parser("continuous", help="fluid supply/demand pricing")
    cont.add_argument("--input", required=True, help="instance JSON file")
    cont.add_argument(
        "--zero-demand-price",
        choices=[c.value for c in ZeroDemandConvention],
        default=ZeroDemandConvention.Zero.value,
        help="price reported at vertices with no demand",
    )
    cont.add_argument("--out", help="also write the JSON result here")
    cont.set_defaults(func=_cmd_surge_continuous)

    disc = surge_sub.add_parser("discrete", help="atomic passenger/taxicab pricing")
    disc.add_argument("--input", required=True, help="instance JSON file")
    disc.add_argument("--out", help="also write the JSON result here")
    disc.set_defaults(func=_cmd_surge_discrete)

    sim = sub.add_parser("simulate", help="paired online-vs-optimal trials")
    sim.add_argument("--generator", required=True, help="e.g. drift:delta=0.1,T=1000")
    sim.add_argument("--algorithm", required=True, help="stay|match|rand:p=..|comp:p=..")
    sim.add_argument("--trials", type=int, default=200)
    sim.add_argument(
        "--seed", type=int, default=None, help="defaults to SURGEFLOW_SEED, then 0"
    )
    sim.add_argument("--out", default="results.csv", help="per-trial CSV path")
    sim.add_argument(
        "--emit-plot-data",
        metavar="PATH",
        help="write trial 0's per-step served/moved series as JSON",
    )
    sim.set_defaults(func=_cmd_simulate)

    ver = sub.add_parser("verify", help="check posted surge prices for equilibrium")
    ver.add_argument("--input", required=True, help="instance JSON with surge_prices")
    ver.add_argument("--out", help="also write the JSON report here")
    ver.set_defaults(func=_cmd_verify)

    rep = sub.add_parser("report", help="render figures from a simulate CSV")
    rep.add_argument("--results", required=True, help="CSV written by simulate")
    rep.add_argument("--out-dir", required=True, help="directory for figures + summary")
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 2
    except VerificationError as exc:
        sys.stderr.write(f"verification failure: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
