"""Run outputs: delimited files, timing report, optional figures.

CSV layouts are fixed and byte-stable for a fixed seed:

    curve.csv          day,new_infections,cumulative_infected,susceptible,
                       pre_symptomatic,symptomatic,recovered,interventions_applied
    interventions.csv  day,hospitalized,isolated,confined,traced_order1,
                       traced_order2,location_visits_fast,location_visits_basic
    strategy_<name>.csv / summary.csv   for strategy comparisons
    bench.csv          order,variant,intervention_seconds,total_seconds,speedup

timing.json carries wall-clock seconds per module and is therefore the one
output that varies between runs.  Figures (PNG, matplotlib) are rendered
next to the CSVs only when requested.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .engine import (CURVE_FIELDS, INTERVENTION_FIELDS, BenchRow, RunResult,
                     StrategyEnsemble)

__all__ = [
    "write_curve_csv",
    "write_interventions_csv",
    "write_timing_json",
    "write_run_outputs",
    "write_comparison_outputs",
    "write_bench_csv",
    "render_run_figures",
    "render_comparison_figure",
    "render_bench_figure",
]


def _write_rows(path: Path, header: tuple[str, ...], rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def write_curve_csv(path: str | Path, result: RunResult) -> None:
    _write_rows(Path(path), CURVE_FIELDS, (rec.row() for rec in result.curves))


def write_interventions_csv(path: str | Path, result: RunResult) -> None:
    _write_rows(Path(path), INTERVENTION_FIELDS,
                (rec.row() for rec in result.interventions))


def write_timing_json(path: str | Path, result: RunResult) -> None:
    payload = {name: round(result.timings[name], 6)
               for name in ("mobility", "epidemic", "intervention", "total")}
    payload["days"] = len(result.curves)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def write_run_outputs(out_dir: str | Path, result: RunResult) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(out / "curve.csv", result)
    write_interventions_csv(out / "interventions.csv", result)
    write_timing_json(out / "timing.json", result)
    return [out / "curve.csv", out / "interventions.csv", out / "timing.json"]


def write_comparison_outputs(out_dir: str | Path,
                             ensembles: list[StrategyEnsemble]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for ensemble in ensembles:
        matrix = ensemble.cumulative_matrix()
        new_matrix = np.asarray([[rec.new_infections for rec in r.curves]
                                 for r in ensemble.runs], dtype=float)
        rows = []
        for day in range(matrix.shape[1]):
            rows.append((day,
                         f"{matrix[:, day].mean():.6g}",
                         int(matrix[:, day].min()),
                         int(matrix[:, day].max()),
                         f"{new_matrix[:, day].mean():.6g}"))
        path = out / f"strategy_{ensemble.strategy}.csv"
        _write_rows(path, ("day", "cumulative_mean", "cumulative_min",
                           "cumulative_max", "new_infections_mean"), rows)
        written.append(path)

    summary_rows = []
    for ensemble in ensembles:
        finals = ensemble.final_cumulative
        summary_rows.append((ensemble.strategy, len(ensemble.seeds),
                             f"{finals.mean():.6g}", int(finals.min()),
                             int(finals.max()), f"{ensemble.stderr_final:.6g}"))
    summary = out / "summary.csv"
    _write_rows(summary, ("strategy", "seeds", "final_cumulative_mean",
                          "final_cumulative_min", "final_cumulative_max",
                          "final_cumulative_se"), summary_rows)
    written.append(summary)
    return written


def write_bench_csv(path: str | Path, rows: list[BenchRow]) -> None:
    csv_rows = [(r.order, r.variant, f"{r.intervention_seconds:.6f}",
                 f"{r.total_seconds:.6f}",
                 "" if r.speedup is None else f"{r.speedup:.3f}") for r in rows]
    _write_rows(Path(path), ("order", "variant", "intervention_seconds",
                             "total_seconds", "speedup"), csv_rows)


# -- figures ------------------------------------------------------------------


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_run_figures(out_dir: str | Path, result: RunResult) -> list[Path]:
    """Render the epidemic curve (linear and log cumulative) to curve.png."""
    plt = _pyplot()
    out = Path(out_dir)
    days = [rec.day for rec in result.curves]
    cumulative = [rec.cumulative_infected for rec in result.curves]
    new = [rec.new_infections for rec in result.curves]

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(days, cumulative, label="cumulative infected")
    axes[0].plot(days, new, label="new infections")
    axes[0].set_xlabel("day")
    axes[0].set_ylabel("persons")
    axes[0].legend()
    axes[1].semilogy(days, np.maximum(cumulative, 1))
    axes[1].set_xlabel("day")
    axes[1].set_ylabel("cumulative infected (log)")
    fig.tight_layout()
    target = out / "curve.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return [target]


def render_comparison_figure(out_dir: str | Path,
                             ensembles: list[StrategyEnsemble]) -> list[Path]:
    """Mean cumulative curve per strategy, log scale, with min/max band."""
    plt = _pyplot()
    out = Path(out_dir)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for ensemble in ensembles:
        matrix = ensemble.cumulative_matrix()
        days = np.arange(matrix.shape[1])
        ax.plot(days, matrix.mean(axis=0), label=ensemble.strategy)
        ax.fill_between(days, matrix.min(axis=0), matrix.max(axis=0), alpha=0.15)
    ax.set_yscale("log")
    ax.set_xlabel("day")
    ax.set_ylabel("cumulative infected")
    ax.legend()
    fig.tight_layout()
    target = out / "compare.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return [target]


def render_bench_figure(out_dir: str | Path, rows: list[BenchRow]) -> list[Path]:
    plt = _pyplot()
    out = Path(out_dir)
    fig, ax = plt.subplots(figsize=(6, 4))
    orders = sorted({r.order for r in rows})
    width = 0.35
    for i, variant in enumerate(sorted({r.variant for r in rows})):
        times = [next(r.intervention_seconds for r in rows
                      if r.order == o and r.variant == variant) for o in orders]
        ax.bar([o + (i - 0.5) * width for o in orders], times, width, label=variant)
    ax.set_xticks(orders)
    ax.set_xlabel("tracing order")
    ax.set_ylabel("intervention wall time (s)")
    ax.legend()
    fig.tight_layout()
    target = out / "bench.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return [target]
