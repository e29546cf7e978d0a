import numpy as np
import pytest

from epimob.mobility import (LEVEL_CONFINE, LEVEL_HOSPITALIZE,
                             LEVEL_ISOLATE, OUT_OF_CIRCULATION, MobilityModel,
                             RegionState, StepAlreadySealedError,
                             StepNotAvailableError, TrajectoryStore,
                             build_templates, step_travel)
from epimob.scenario import ScenarioParams, generate_synthetic_city


def make_model(city, seed=3, retention=None, **params):
    scenario_params = ScenarioParams(**params)
    templates = build_templates(city, scenario_params.hours, seed)
    store = TrajectoryStore(city, templates, retention=retention)
    return MobilityModel(city, scenario_params, seed, store)


def free_levels(city):
    return np.zeros(city.num_people, dtype=np.int8)


class TestTemplates:
    def test_segment_structure(self, small_city):
        templates = build_templates(small_city, 14, seed=1)
        for person in (0, 17, 999):
            day = templates.day_of(person)
            home = small_city.home[person]
            work = small_city.work[person]
            shop = small_city.shops[person, 0]
            t1, t2, t3 = (int(templates.leave_home[person]),
                          int(templates.to_shop[person]), int(templates.go_home[person]))
            assert 0 < t1 < t2 < t3 <= 14
            assert all(day[h] == home for h in range(t1))
            assert all(day[h] == work for h in range(t1, t2))
            assert all(day[h] == shop for h in range(t2, t3))
            assert all(day[h] == home for h in range(t3, 14))

    def test_deterministic(self, small_city):
        a = build_templates(small_city, 14, seed=9)
        b = build_templates(small_city, 14, seed=9)
        for field in ("home", "work", "shop", "leave_home", "to_shop", "go_home"):
            assert np.array_equal(getattr(a, field), getattr(b, field))

    def test_templates_only_use_routine_locations(self):
        city = generate_synthetic_city(10_000, 100, 4, seed=4)
        templates = build_templates(city, 14, seed=4)
        routine = {}
        for h in range(14):
            locs = templates.locations_at(h)
            ok = (locs == city.home) | (locs == city.work) | (locs == city.shops[:, 0])
            assert ok.all()

    def test_short_days(self):
        city = generate_synthetic_city(50, 9, 3, seed=2)
        templates = build_templates(city, 3, seed=2)
        day = templates.day_of(0)
        assert day[0] == city.home[0]
        templates1 = build_templates(city, 1, seed=2)
        assert templates1.day_of(0)[0] == city.home[0]


class TestStepMobility:
    def test_r_zero_no_overrides(self, small_city):
        model = make_model(small_city, deviation_prob=0.0, days=2)
        for t in range(2 * 14):
            loc = model.step(t, free_levels(small_city))
            tpl = model.store.templates.locations_at(t % 14)
            assert np.array_equal(loc, tpl)
        assert model.store.override_entries == 0

    def test_deviation_fraction_binomial(self, small_city):
        r = 0.3
        model = make_model(small_city, deviation_prob=r, days=10)
        steps = 10 * 14
        for t in range(steps):
            model.step(t, free_levels(small_city))
        total = small_city.num_people * steps
        sigma = np.sqrt(total * r * (1 - r))
        assert abs(model.deviation_steps - total * r) < 3 * sigma

    def test_confined_forced_home(self, small_city):
        model = make_model(small_city, deviation_prob=0.5)
        levels = free_levels(small_city)
        confined = np.arange(0, 100)
        levels[confined] = LEVEL_CONFINE
        for t in range(14):
            loc = model.step(t, levels)
            assert np.array_equal(loc[confined], small_city.home[confined])

    def test_isolated_out_of_circulation(self, small_city):
        model = make_model(small_city, deviation_prob=0.2)
        levels = free_levels(small_city)
        levels[:50] = LEVEL_ISOLATE
        levels[50:60] = LEVEL_HOSPITALIZE
        loc = model.step(0, levels)
        assert np.all(loc[:60] == OUT_OF_CIRCULATION)
        for person in range(60):
            assert model.store.trajectory(person, 0) == OUT_OF_CIRCULATION
        for location in range(small_city.num_locations):
            visitors = model.store.visitors(location, 0)
            assert not np.isin(np.arange(60), visitors).any()

    def test_seal_out_of_order_rejected(self, small_city):
        model = make_model(small_city)
        loc = model.step(0, free_levels(small_city))
        with pytest.raises(StepAlreadySealedError):
            model.store.seal_step(0, loc)
        with pytest.raises(StepAlreadySealedError):
            model.store.seal_step(5, loc)

    def test_sparsity_binomial_bound(self, small_city):
        r = 0.25
        model = make_model(small_city, deviation_prob=r)
        steps = 4 * 14
        for t in range(steps):
            model.step(t, free_levels(small_city))
        # deviations to the template location itself store nothing, so the
        # stored count sits slightly below the deviation count
        total = small_city.num_people * steps
        sigma = np.sqrt(total * r * (1 - r))
        assert model.store.override_entries <= model.deviation_steps
        assert abs(model.deviation_steps - total * r) < 3 * sigma


class TestQueries:
    def test_override_precedence_and_fallback(self, tiny_city):
        model = make_model(tiny_city, deviation_prob=0.4)
        model.step(0, free_levels(tiny_city))
        persons, dests = model.store.overrides_at(0)
        tpl = model.store.templates.locations_at(0)
        for person, dest in zip(persons[:20], dests[:20]):
            assert model.store.trajectory(int(person), 0) == dest
        untouched = np.setdiff1d(np.arange(tiny_city.num_people), persons)[:20]
        for person in untouched:
            assert model.store.trajectory(int(person), 0) == tpl[person]

    def test_unmaterialized_step_errors(self, tiny_city):
        model = make_model(tiny_city)
        model.step(0, free_levels(tiny_city))
        with pytest.raises(StepNotAvailableError):
            model.store.trajectory(0, 1)
        with pytest.raises(StepNotAvailableError):
            model.store.visitors(0, 1)

    def test_retention_evicts(self, tiny_city):
        model = make_model(tiny_city, retention=3)
        for t in range(6):
            model.step(t, free_levels(tiny_city))
        with pytest.raises(StepNotAvailableError):
            model.store.visitors(0, 2)
        model.store.visitors(0, 3)

    def test_forward_reverse_consistency_brute_force(self, rng):
        city = generate_synthetic_city(1000, 40, 4, seed=8)
        model = make_model(city, deviation_prob=0.5, days=3)
        levels = free_levels(city)
        levels[rng.choice(city.num_people, 30, replace=False)] = LEVEL_ISOLATE
        levels[rng.choice(city.num_people, 30, replace=False)] = LEVEL_CONFINE
        steps = 3 * 14
        locations = {}
        for t in range(steps):
            locations[t] = model.step(t, levels)
        for _ in range(100):
            t = int(rng.integers(0, steps))
            location = int(rng.integers(0, city.num_locations))
            expected = np.nonzero(locations[t] == location)[0]
            assert np.array_equal(model.store.visitors(location, t), expected)

    def test_visitorless_location_empty(self):
        # a commercial location nobody routinely visits and nobody deviates to
        city = generate_synthetic_city(10, 30, 3, seed=6)
        model = make_model(city, deviation_prob=0.0)
        model.step(0, free_levels(city))
        tpl = model.store.templates.locations_at(0)
        unused = np.setdiff1d(np.arange(city.num_locations), tpl)
        assert unused.size > 0
        assert model.store.visitors(int(unused[0]), 0).size == 0


def test_top3_concentration_under_light_deviation():
    # with r=0.1, at least half the agents spend >= 90% of their steps at
    # their top-3 locations over a 30-day run
    city = generate_synthetic_city(2000, 100, 4, seed=21)
    model = make_model(city, deviation_prob=0.1, days=30, retention=2)
    levels = free_levels(city)
    steps = 30 * 14
    top3 = np.stack([city.home, city.work, city.shops[:, 0]], axis=1)
    at_top3 = np.zeros(city.num_people, dtype=np.int64)
    for t in range(steps):
        loc = model.step(t, levels)
        at_top3 += (loc[:, None] == top3).any(axis=1)
    fraction_of_agents = np.mean(at_top3 / steps >= 0.9)
    assert fraction_of_agents >= 0.5


class TestTravel:
    def test_no_travel_probability_no_departures(self):
        city = generate_synthetic_city(500, 30, 3, seed=1, regions=3)
        state = RegionState(city)
        for day in range(10):
            step_travel(state, day, seed=2, p_travel=0.0, p_return=0.25)
        assert not state.away.any()

    def test_single_region_noop(self, small_city):
        state = RegionState(small_city)
        step_travel(state, 0, seed=2, p_travel=0.5, p_return=0.25)
        assert not state.away.any()

    def test_steady_state_away_fraction(self):
        # Two-state Markov chain: stationary away fraction is
        # p_travel / (p_travel + p_return) = 0.12 / 0.37 ~= 0.3243.
        city = generate_synthetic_city(10_000, 60, 3, seed=3, regions=5)
        state = RegionState(city)
        fractions = []
        for day in range(200):
            step_travel(state, day, seed=7, p_travel=0.12, p_return=0.25)
            if day >= 50:
                fractions.append(state.away.mean())
        assert np.mean(fractions) == pytest.approx(0.12 / 0.37, abs=0.02)

    def test_away_persons_roam_visited_region(self):
        city = generate_synthetic_city(2000, 60, 3, seed=4, regions=4)
        state = RegionState(city)
        params = ScenarioParams(deviation_prob=0.2, multi_region=True,
                                travel_prob=0.3, return_prob=0.1)
        templates = build_templates(city, params.hours, seed=4)
        store = TrajectoryStore(city, templates)
        model = MobilityModel(city, params, 4, store, regions=state)
        step_travel(state, 0, seed=4, p_travel=0.3, p_return=0.1)
        assert state.away.any()
        loc = model.step(0, free_levels(city))
        away_ids = np.nonzero(state.away)[0]
        region_of_location = city.location_region
        assert np.array_equal(region_of_location[loc[away_ids]],
                              state.current_region[away_ids])
