"""Simulation pipeline: hourly mobility and epidemic, daily intervention.

One run advances D days of H steps each.  Every step first materializes
mobility under the day's restriction plan, then runs the epidemic over
the resulting visitor sets.  At each day boundary the intervention
strategy turns the day's newly confirmed cases into the next day's plan.
Runs are pure functions of (scenario, seed); thread count never changes
results.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import epidemic as epi
from .intervention import (InterventionPlan, InterventionStats, RestrictionLevel,
                           apply_strategy, resolve_strategy)
from .mobility import (MobilityModel, RegionState, TrajectoryStore,
                       build_templates, step_travel)
from .rng import stream
from .scenario import Scenario, ScenarioError

__all__ = [
    "CurveRecord",
    "InterventionRecord",
    "RunResult",
    "SimulationRun",
    "run",
    "StrategyEnsemble",
    "compare_strategies",
    "BenchRow",
    "benchmark_tracing",
]

CURVE_FIELDS = ("day", "new_infections", "cumulative_infected", "susceptible",
                "pre_symptomatic", "symptomatic", "recovered", "interventions_applied")
INTERVENTION_FIELDS = ("day", "hospitalized", "isolated", "confined", "traced_order1",
                       "traced_order2", "location_visits_fast", "location_visits_basic")


@dataclass(frozen=True)
class CurveRecord:
    """Daily epidemic summary."""

    day: int
    new_infections: int
    cumulative_infected: int
    susceptible: int
    pre_symptomatic: int
    symptomatic: int
    recovered: int
    interventions_applied: int

    def row(self) -> tuple:
        return tuple(getattr(self, name) for name in CURVE_FIELDS)


@dataclass(frozen=True)
class InterventionRecord:
    """Daily intervention summary."""

    day: int
    hospitalized: int
    isolated: int
    confined: int
    traced_order1: int
    traced_order2: int
    location_visits_fast: int
    location_visits_basic: int

    def row(self) -> tuple:
        return tuple(getattr(self, name) for name in INTERVENTION_FIELDS)


@dataclass
class RunResult:
    curves: list[CurveRecord]
    interventions: list[InterventionRecord]
    timings: dict[str, float]
    final_counts: tuple[int, int, int, int]
    cumulative_infected: int
    traced_hashes: list[str] = field(default_factory=list)

    @property
    def final_cumulative(self) -> int:
        return self.cumulative_infected


class ConservationError(AssertionError):
    """Health-state conservation was violated (engine invariant)."""


class SimulationRun:
    """A stateful run that can be advanced one day at a time."""

    def __init__(self, scenario: Scenario, seed: int, mode: str = "stochastic",
                 tracer: str = "fast", retention: int | str | None = "auto",
                 collect_traced: bool = False, dump_file=None):
        if mode not in ("stochastic", "expected"):
            raise ScenarioError(f"unknown mode {mode!r}; use stochastic or expected")
        self.scenario = scenario
        self.city = scenario.city
        self.params = scenario.params
        self.strategy = scenario.strategy
        self.seed = seed
        self.mode = mode
        self.tracer = tracer
        self.collect_traced = collect_traced

        params = self.params
        if retention == "auto":
            retention = self.strategy.tau + params.hours + 1
        self.templates = build_templates(self.city, params.hours, seed)
        self.store = TrajectoryStore(self.city, self.templates, retention=retention,
                                     dump_file=dump_file)
        self.regions = RegionState(self.city, params.travel_alpha) \
            if params.multi_region else None
        self.mobility = MobilityModel(self.city, params, seed, self.store,
                                      regions=self.regions)
        self.ledger = epi.HealthLedger(self.city.num_people)
        if params.initial_infected:
            initial = stream(seed, "initial-infected").choice(
                self.city.num_people, size=params.initial_infected, replace=False)
            self.ledger.seed_initial_infections(np.sort(initial), params.incubation_steps)
        self.plan = InterventionPlan(self.city.num_people)
        self.day = 0
        self.last_confirmed = np.empty(0, dtype=np.int64)
        self.last_step = -1
        self.timings = {"mobility": 0.0, "epidemic": 0.0, "intervention": 0.0, "total": 0.0}
        self.curves: list[CurveRecord] = []
        self.interventions: list[InterventionRecord] = []
        self.traced_hashes: list[str] = []

    # -- helpers -----------------------------------------------------------

    def _check_conservation(self) -> None:
        counts = self.ledger.counts()
        if sum(counts) != self.city.num_people:
            raise ConservationError(
                f"state counts {counts} do not sum to population {self.city.num_people}")

    def _parse_user_plan(self, user_plan: dict) -> dict[RestrictionLevel, list[int]]:
        """Validate a session-supplied plan without touching any state."""
        entries: dict[RestrictionLevel, list[int]] = {}
        for person, level in user_plan.items():
            try:
                person = int(person)
            except (TypeError, ValueError):
                raise ScenarioError(f"plan references malformed person id {person!r}") from None
            if not 0 <= person < self.city.num_people:
                raise ScenarioError(f"plan references unknown person id {person}")
            if not isinstance(level, RestrictionLevel):
                try:
                    level = RestrictionLevel.parse(str(level))
                except ValueError as exc:
                    raise ScenarioError(str(exc)) from None
            entries.setdefault(level, []).append(person)
        return entries

    def _apply_user_plan(self, entries: dict[RestrictionLevel, list[int]],
                         day: int) -> InterventionStats:
        """Install a session-supplied plan in place of the built-in strategy.

        Hospitalize entries run a cure clock; other levels hold for one day.
        """
        params = self.params
        stats = InterventionStats()
        for level, persons in sorted(entries.items()):
            if level == RestrictionLevel.FREE:
                continue
            ids = np.asarray(sorted(persons), dtype=np.int64)
            duration = params.cure_days if level == RestrictionLevel.HOSPITALIZE else 1
            until = day + 1 + duration
            changed = self.plan.assign(ids, level, until)
            if level == RestrictionLevel.HOSPITALIZE and changed.size:
                self.ledger.admit_to_hospital(changed, until * params.hours)
            if level == RestrictionLevel.HOSPITALIZE:
                stats.hospitalized += changed.size
            elif level == RestrictionLevel.ISOLATE:
                stats.isolated += changed.size
            elif level == RestrictionLevel.CONFINE:
                stats.confined += changed.size
            stats.applied += changed.size
        return stats

    # -- stepping ----------------------------------------------------------

    def run_day(self, user_plan: dict | None = None) -> CurveRecord:
        """Advance H steps plus the day-boundary intervention.

        A user-supplied plan replaces the built-in strategy for this
        boundary; entries take effect from the next day, like the
        strategy's own output.
        """
        params = self.params
        day = self.day
        parsed_plan = self._parse_user_plan(user_plan) if user_plan is not None else None
        start_total = time.perf_counter()

        self.ledger.discharge(day * params.hours)
        self.plan.begin_day(day)
        if self.regions is not None:
            step_travel(self.regions, day, self.seed,
                        params.travel_prob, params.return_prob)
        levels = self.plan.levels()

        t = day * params.hours
        for hour in range(params.hours):
            t = day * params.hours + hour
            tick = time.perf_counter()
            locations = self.mobility.step(t, levels)
            self.timings["mobility"] += time.perf_counter() - tick

            tick = time.perf_counter()
            epi.step_epidemic(locations, self.ledger, t, params.infection_rate,
                              params.incubation_steps, self.seed, mode=self.mode,
                              pre_weight=params.pre_symptomatic_weight,
                              num_locations=self.city.num_locations)
            self.timings["epidemic"] += time.perf_counter() - tick
            self._check_conservation()

        new_infections, confirmed = self.ledger.pop_day_accumulators()
        self.last_confirmed = confirmed
        self.last_step = t

        tick = time.perf_counter()
        if parsed_plan is not None:
            stats = self._apply_user_plan(parsed_plan, day)
        else:
            stats = apply_strategy(confirmed, self.store, self.ledger, self.plan,
                                   self.city, t, day, self.strategy,
                                   params.cure_days, params.isolate_days,
                                   tracer=self.tracer)
        self.timings["intervention"] += time.perf_counter() - tick

        if self.collect_traced:
            digest = hashlib.blake2b(digest_size=16)
            for traced in stats.traced_sets:
                digest.update(np.ascontiguousarray(traced, dtype=np.int64).tobytes())
                digest.update(b"|")
            self.traced_hashes.append(digest.hexdigest())

        susceptible, pre, sym, recovered = self.ledger.counts()
        record = CurveRecord(day, new_infections, self.ledger.cumulative_infected,
                             susceptible, pre, sym, recovered, stats.applied)
        self.curves.append(record)
        self.interventions.append(InterventionRecord(
            day, stats.hospitalized, stats.isolated, stats.confined,
            stats.traced_order1, stats.traced_order2,
            stats.location_visits_fast, stats.location_visits_basic))
        self.day += 1
        self.timings["total"] += time.perf_counter() - start_total
        return record

    def run(self) -> RunResult:
        while self.day < self.params.days:
            self.run_day()
        return self.result()

    def result(self) -> RunResult:
        return RunResult(list(self.curves), list(self.interventions), dict(self.timings),
                         self.ledger.counts(), self.ledger.cumulative_infected,
                         list(self.traced_hashes))


def run(scenario: Scenario, seed: int, mode: str = "stochastic", threads: int = 1,
        tracer: str = "fast", collect_traced: bool = False) -> RunResult:
    """Execute a full scenario run.

    `threads` is accepted for interface parity with ensemble drivers; a
    single run executes on vectorized kernels whose results are
    independent of any thread count by construction.
    """
    del threads
    return SimulationRun(scenario, seed, mode=mode, tracer=tracer,
                         collect_traced=collect_traced).run()


# -- strategy comparison -------------------------------------------------------


@dataclass
class StrategyEnsemble:
    """Aligned curves of one strategy across seeds."""

    strategy: str
    seeds: list[int]
    runs: list[RunResult]

    @property
    def final_cumulative(self) -> np.ndarray:
        return np.asarray([r.cumulative_infected for r in self.runs], dtype=float)

    @property
    def mean_final(self) -> float:
        return float(self.final_cumulative.mean())

    @property
    def stderr_final(self) -> float:
        finals = self.final_cumulative
        if finals.size < 2:
            return 0.0
        return float(finals.std(ddof=1) / np.sqrt(finals.size))

    def cumulative_matrix(self) -> np.ndarray:
        """(seeds x days) cumulative-infected curves."""
        return np.asarray([[rec.cumulative_infected for rec in r.curves]
                           for r in self.runs], dtype=float)


def _run_one(scenario: Scenario, name: str, seed: int, mode: str) -> RunResult:
    strategy = resolve_strategy(name, scenario.strategy)
    variant = replace(scenario, strategy=strategy)
    return run(variant, seed, mode=mode)


def compare_strategies(scenario: Scenario, strategies: list[str], seeds: list[int],
                       mode: str = "stochastic", threads: int = 1) -> list[StrategyEnsemble]:
    """Run each (strategy, seed) pair on the shared city and parameters.

    With threads > 1 the independent runs are distributed over worker
    processes; outputs are identical to the serial order by construction.
    """
    tasks = [(name, seed) for name in strategies for seed in seeds]
    if threads > 1 and len(tasks) > 1:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(processes=min(threads, len(tasks))) as pool:
            results = pool.starmap(
                _run_one, [(scenario, name, seed, mode) for name, seed in tasks])
    else:
        results = [_run_one(scenario, name, seed, mode) for name, seed in tasks]

    ensembles = []
    for i, name in enumerate(strategies):
        chunk = results[i * len(seeds):(i + 1) * len(seeds)]
        ensembles.append(StrategyEnsemble(name, list(seeds), chunk))
    return ensembles


# -- tracing benchmark ---------------------------------------------------------


@dataclass
class BenchRow:
    order: int
    variant: str
    intervention_seconds: float
    total_seconds: float
    speedup: float | None = None


class TracingMismatchError(AssertionError):
    """Fast and basic tracing disagreed during a benchmark run."""


def benchmark_tracing(scenario: Scenario, orders=(1, 2), variants=("fast", "slow"),
                      seed: int = 0, mode: str = "stochastic") -> list[BenchRow]:
    """Time the intervention phase per tracing variant at each order.

    For every order, each variant executes the same full simulation with a
    shared seed; the per-day traced sets must be identical across
    variants (asserted via hashes), so the runs only differ in how the
    tracing work is carried out.  Speedup = slow time / fast time.
    """
    rows: list[BenchRow] = []
    for order in orders:
        strategy = replace(scenario.strategy, max_order=order)
        variant_results: dict[str, RunResult] = {}
        for variant in variants:
            sim = SimulationRun(replace(scenario, strategy=strategy), seed,
                                mode=mode, tracer=variant, collect_traced=True)
            variant_results[variant] = sim.run()
        if "fast" in variant_results and "slow" in variant_results:
            fast, slow = variant_results["fast"], variant_results["slow"]
            if fast.traced_hashes != slow.traced_hashes:
                raise TracingMismatchError(
                    f"fast and slow tracing disagree at order {order}")
            if [c.row() for c in fast.curves] != [c.row() for c in slow.curves]:
                raise TracingMismatchError(
                    f"curves diverged between tracing variants at order {order}")
            speedup = slow.timings["intervention"] / max(fast.timings["intervention"], 1e-9)
        else:
            speedup = None
        for variant in variants:
            result = variant_results[variant]
            rows.append(BenchRow(order, variant, result.timings["intervention"],
                                 result.timings["total"],
                                 speedup if variant == "fast" else None))
    return rows
