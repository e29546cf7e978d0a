"""Command-line driver.

Subcommands: run, gen-city, compare, bench-tracing, validate, session.
Exit codes: 0 success, 1 scenario/validation error, 2 runtime failure.
The default output directory comes from EPIMOB_OUT_DIR (falling back to
./out); figures are rendered only with --plot.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__, report
from .engine import benchmark_tracing, compare_strategies
from .mobility import dump_templates
from .scenario import (ScenarioError, generate_synthetic_city, load_scenario,
                       save_city_file)
from .session import serve

__all__ = ["main", "build_parser"]


def _default_out() -> str:
    return os.environ.get("EPIMOB_OUT_DIR", "out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epimob",
        description="Agent-based mobility and epidemic simulation with fast contact tracing")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write curve/intervention CSVs")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--mode", choices=("stochastic", "expected"), default="stochastic")
    p_run.add_argument("--tracer", choices=("fast", "slow"), default="fast")
    p_run.add_argument("--plot", action="store_true", help="also render curve.png")
    p_run.add_argument("--dump-trajectories", default=None, metavar="FILE",
                       help="write override lines t,person,location plus a template table")

    p_gen = sub.add_parser("gen-city", help="generate a synthetic city JSON file")
    p_gen.add_argument("--population", type=int, required=True)
    p_gen.add_argument("--locations", type=int, required=True)
    p_gen.add_argument("--tract-size", type=int, default=4)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--shops-per-person", type=int, default=2)
    p_gen.add_argument("--regions", type=int, default=1)
    p_gen.add_argument("--out", required=True, help="city JSON path")

    p_cmp = sub.add_parser("compare", help="run a strategy ensemble over seeds")
    p_cmp.add_argument("scenario")
    p_cmp.add_argument("--strategies", default="free,hybrid",
                       help="comma-separated strategy names")
    p_cmp.add_argument("--seeds", type=int, default=5, help="number of seeds (0..N-1)")
    p_cmp.add_argument("--threads", type=int, default=1)
    p_cmp.add_argument("--out", default=None)
    p_cmp.add_argument("--mode", choices=("stochastic", "expected"), default="stochastic")
    p_cmp.add_argument("--plot", action="store_true", help="also render compare.png")

    p_bench = sub.add_parser("bench-tracing",
                             help="time fast vs basic tracing on full runs")
    p_bench.add_argument("scenario")
    p_bench.add_argument("--orders", default="1,2")
    p_bench.add_argument("--variants", default="fast,slow")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--mode", choices=("stochastic", "expected"), default="stochastic")
    p_bench.add_argument("--out", default=None)
    p_bench.add_argument("--plot", action="store_true", help="also render bench.png")

    p_val = sub.add_parser("validate", help="check a scenario file; never writes")
    p_val.add_argument("scenario")

    sub.add_parser("session", help="serve the line-delimited JSON session protocol on stdio")
    return parser


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    out = Path(args.out if args.out is not None else _default_out())
    out.mkdir(parents=True, exist_ok=True)

    dump_handle = None
    if args.dump_trajectories:
        dump_path = Path(args.dump_trajectories)
        dump_path.parent.mkdir(parents=True, exist_ok=True)
        dump_handle = open(dump_path, "w")
    try:
        from .engine import SimulationRun

        sim = SimulationRun(scenario, args.seed, mode=args.mode, tracer=args.tracer,
                            dump_file=dump_handle)
        if dump_handle is not None:
            dump_templates(sim.templates,
                           Path(args.dump_trajectories).with_suffix(".templates.csv"))
        result = sim.run()
    finally:
        if dump_handle is not None:
            dump_handle.close()

    report.write_run_outputs(out, result)
    if args.plot:
        report.render_run_figures(out, result)
    print(f"{scenario.name}: {len(result.curves)} days, "
          f"final cumulative infected {result.cumulative_infected}, "
          f"total {result.timings['total']:.2f}s -> {out}")
    return 0


def _cmd_gen_city(args) -> int:
    city = generate_synthetic_city(args.population, args.locations, args.tract_size,
                                   args.seed, args.shops_per_person, args.regions)
    save_city_file(city, args.out)
    print(f"wrote {args.out}: {city.num_people} people, {city.num_locations} locations, "
          f"{city.num_tracts} tracts, {city.num_regions} region(s), "
          f"density q={city.density_q:.2f}")
    return 0


def _cmd_compare(args) -> int:
    from .intervention import resolve_strategy

    scenario = load_scenario(args.scenario)
    strategies = [name.strip() for name in args.strategies.split(",") if name.strip()]
    if not strategies:
        raise ScenarioError("no strategies given")
    for name in strategies:
        try:
            resolve_strategy(name)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    seeds = list(range(args.seeds))
    ensembles = compare_strategies(scenario, strategies, seeds,
                                   mode=args.mode, threads=args.threads)
    out = Path(args.out if args.out is not None else _default_out())
    report.write_comparison_outputs(out, ensembles)
    if args.plot:
        report.render_comparison_figure(out, ensembles)
    width = max(len(e.strategy) for e in ensembles)
    print(f"{'strategy':<{width}}  seeds  final mean  (min..max)  se")
    for ensemble in ensembles:
        finals = ensemble.final_cumulative
        print(f"{ensemble.strategy:<{width}}  {len(seeds):>5}  "
              f"{finals.mean():>10.1f}  ({int(finals.min())}..{int(finals.max())})  "
              f"{ensemble.stderr_final:.2f}")
    return 0


def _cmd_bench(args) -> int:
    scenario = load_scenario(args.scenario)
    orders = tuple(int(x) for x in args.orders.split(",") if x.strip())
    variants = tuple(x.strip() for x in args.variants.split(",") if x.strip())
    for variant in variants:
        if variant not in ("fast", "slow"):
            raise ScenarioError(f"unknown tracing variant {variant!r} (use fast, slow)")
    rows = benchmark_tracing(scenario, orders=orders, variants=variants, seed=args.seed,
                             mode=args.mode)
    with_speedup = len(variants) > 1
    header = "order  variant  intervention_s     total_s"
    if with_speedup:
        header += "  speedup"
    print(header)
    for row in rows:
        line = (f"{row.order:>5}  {row.variant:<7}  {row.intervention_seconds:>14.4f}  "
                f"{row.total_seconds:>10.2f}")
        if with_speedup:
            line += f"  {'' if row.speedup is None else format(row.speedup, '.2f'):>7}"
        print(line)
    out = Path(args.out if args.out is not None else _default_out())
    out.mkdir(parents=True, exist_ok=True)
    report.write_bench_csv(out / "bench.csv", rows)
    if args.plot:
        report.render_bench_figure(out, rows)
    return 0


def _cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    print(f"{args.scenario}: ok ({scenario.city.num_people} people, "
          f"{scenario.city.num_locations} locations, {scenario.params.days} days)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "gen-city": _cmd_gen_city,
        "compare": _cmd_compare,
        "bench-tracing": _cmd_bench,
        "validate": _cmd_validate,
        "session": lambda _args: serve(),
    }
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure, distinct from bad input
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
