import numpy as np
import pytest

from epimob.engine import SimulationRun, benchmark_tracing, compare_strategies, run
from epimob.scenario import ScenarioError

from conftest import make_scenario


class TestRun:
    def test_no_transmission_flat_curve(self):
        scenario = make_scenario(population=500, locations=15, days=30,
                                 infection_rate=0.0, initial_infected=10)
        result = run(scenario, seed=1)
        assert len(result.curves) == 30
        assert all(rec.cumulative_infected == 10 for rec in result.curves)
        assert all(rec.new_infections == 0 for rec in result.curves)

    def test_deterministic_repeat(self):
        scenario = make_scenario(population=800, locations=24, days=8,
                                 deviation_prob=0.5)
        a = run(scenario, seed=7)
        b = run(scenario, seed=7)
        assert [rec.row() for rec in a.curves] == [rec.row() for rec in b.curves]
        assert [rec.row() for rec in a.interventions] == [rec.row() for rec in b.interventions]

    def test_seed_changes_outcome(self):
        scenario = make_scenario(population=800, locations=24, days=8)
        a = run(scenario, seed=1)
        b = run(scenario, seed=2)
        assert [rec.row() for rec in a.curves] != [rec.row() for rec in b.curves]

    def test_default_protocol_shape(self):
        scenario = make_scenario(population=1000, locations=30, days=5)
        result = run(scenario, seed=0)
        assert result.curves[0].cumulative_infected >= 10
        assert len(result.curves) == 5
        for rec in result.curves:
            total = (rec.susceptible + rec.pre_symptomatic + rec.symptomatic
                     + rec.recovered)
            assert total == 1000
        # ever-infected identity: initial seed plus all daily new infections
        assert result.cumulative_infected \
            == 10 + sum(rec.new_infections for rec in result.curves)
        for prev, rec in zip(result.curves, result.curves[1:]):
            assert rec.cumulative_infected \
                == prev.cumulative_infected + rec.new_infections

    def test_conservation_and_monotonicity(self):
        scenario = make_scenario(population=1000, locations=30, days=12,
                                 strategy="hybrid")
        result = run(scenario, seed=3)
        cumulative = [rec.cumulative_infected for rec in result.curves]
        assert all(b >= a for a, b in zip(cumulative, cumulative[1:]))
        recovered = [rec.recovered for rec in result.curves]
        assert all(b >= a for a, b in zip(recovered, recovered[1:]))

    def test_free_run_exponential_early_shape(self):
        scenario = make_scenario(population=10_000, locations=100, tract_size=4,
                                 days=16, strategy="free", infection_rate=0.05,
                                 deviation_prob=0.5, incubation_steps=56)
        result = run(scenario, seed=5)
        cumulative = np.array([rec.cumulative_infected for rec in result.curves],
                              dtype=float)
        log_diffs = np.diff(np.log(cumulative))[5:15]
        assert (log_diffs > 0).all()
        assert log_diffs.std() < log_diffs.mean()

    def test_timing_buckets_present(self):
        scenario = make_scenario(population=300, locations=9, days=3)
        result = run(scenario, seed=1)
        assert set(result.timings) == {"mobility", "epidemic", "intervention", "total"}
        assert result.timings["total"] > 0

    def test_expected_mode_runs(self):
        scenario = make_scenario(population=500, locations=15, days=6)
        result = run(scenario, seed=2, mode="expected")
        assert result.curves[-1].cumulative_infected >= 10

    def test_unknown_mode_rejected(self):
        scenario = make_scenario(population=100, locations=9, days=2)
        with pytest.raises(ScenarioError, match="mode"):
            SimulationRun(scenario, 0, mode="oracular")


class TestUserPlans:
    def test_plan_takes_effect_next_day(self):
        scenario = make_scenario(population=2000, locations=30, days=6,
                                 infection_rate=0.3, strategy="free",
                                 incubation_steps=4)
        sim = SimulationRun(scenario, seed=9)
        first = sim.run_day()
        assert first.new_infections > 0
        everyone = {i: "isolate" for i in range(scenario.city.num_people)}
        sim.run_day(user_plan=everyone)
        third = sim.run_day()
        assert third.new_infections == 0

    def test_invalid_person_rejected_without_side_effects(self):
        scenario = make_scenario(population=100, locations=9, days=4)
        sim = SimulationRun(scenario, seed=1)
        with pytest.raises(ScenarioError, match="unknown person"):
            sim.run_day(user_plan={10_000: "isolate"})
        assert sim.day == 0
        with pytest.raises(ScenarioError, match="restriction level"):
            sim.run_day(user_plan={0: "banish"})
        assert sim.day == 0

    def test_plan_replaces_strategy_for_that_day(self):
        scenario = make_scenario(population=500, locations=15, days=3,
                                 strategy="hybrid", infection_rate=0.2,
                                 incubation_steps=4)
        sim = SimulationRun(scenario, seed=4)
        record = sim.run_day(user_plan={})
        # empty plan: nobody restricted by the built-in strategy
        assert record.interventions_applied == 0


class TestCompare:
    def test_single_strategy_matches_run(self):
        scenario = make_scenario(population=600, locations=18, days=6)
        ensembles = compare_strategies(scenario, ["hybrid"], seeds=[3])
        direct = run(scenario, seed=3)
        assert [rec.row() for rec in ensembles[0].runs[0].curves] \
            == [rec.row() for rec in direct.curves]

    def test_parallel_equals_serial(self):
        scenario = make_scenario(population=400, locations=12, days=5)
        serial = compare_strategies(scenario, ["free", "hybrid"], seeds=[0, 1],
                                    threads=1)
        parallel = compare_strategies(scenario, ["free", "hybrid"], seeds=[0, 1],
                                      threads=4)
        for a, b in zip(serial, parallel):
            assert a.strategy == b.strategy
            for run_a, run_b in zip(a.runs, b.runs):
                assert [r.row() for r in run_a.curves] == [r.row() for r in run_b.curves]

    def test_ensemble_stats(self):
        scenario = make_scenario(population=400, locations=12, days=5)
        ensembles = compare_strategies(scenario, ["free"], seeds=[0, 1, 2])
        ensemble = ensembles[0]
        assert ensemble.final_cumulative.shape == (3,)
        assert ensemble.cumulative_matrix().shape == (3, 5)
        assert ensemble.stderr_final >= 0


class TestBenchmark:
    def test_toy_instance_identical_traced_sets(self):
        scenario = make_scenario(population=200, locations=9, days=4,
                                 strategy="hybrid", infection_rate=0.2,
                                 incubation_steps=8)
        rows = benchmark_tracing(scenario, orders=(1,), variants=("fast", "slow"),
                                 seed=2)
        assert len(rows) == 2
        fast_row = next(r for r in rows if r.variant == "fast")
        assert fast_row.speedup is not None

    def test_two_orders_four_rows(self):
        scenario = make_scenario(population=150, locations=9, days=3,
                                 strategy="hybrid", infection_rate=0.2,
                                 incubation_steps=8)
        rows = benchmark_tracing(scenario, orders=(1, 2), variants=("fast", "slow"),
                                 seed=1)
        assert len(rows) == 4
        assert {(r.order, r.variant) for r in rows} \
            == {(1, "fast"), (1, "slow"), (2, "fast"), (2, "slow")}

    def test_single_variant_no_speedup(self):
        scenario = make_scenario(population=150, locations=9, days=3,
                                 strategy="hybrid")
        rows = benchmark_tracing(scenario, orders=(1,), variants=("fast",), seed=1)
        assert len(rows) == 1
        assert rows[0].speedup is None

    def test_ten_person_toy(self):
        # correctness only; timings are whatever they are at this size
        scenario = make_scenario(population=10, locations=9, days=3,
                                 strategy="hybrid", infection_rate=0.5,
                                 incubation_steps=4, initial_infected=3)
        rows = benchmark_tracing(scenario, orders=(1,), variants=("fast", "slow"),
                                 seed=0)
        assert len(rows) == 2
