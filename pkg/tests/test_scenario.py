from pathlib import Path

import numpy as np
import pytest

from epimob.intervention import RestrictionLevel
from epimob.scenario import (COMMERCIAL, RESIDENTIAL, WORK, CityModel,
                             ScenarioParams, ScenarioParseError,
                             ScenarioValidationError, TimeStep,
                             generate_synthetic_city, load_city_file, load_scenario,
                             loads_scenario, save_city_file, save_scenario)

MINIMAL = """
[city]
generator = { population = 10, locations = 3, tract_size = 3, seed = 1 }

[params]
days = 5
hours = 14
"""


def test_minimal_scenario_counts(tmp_path):
    path = tmp_path / "mini.toml"
    path.write_text(MINIMAL)
    scenario = load_scenario(path)
    assert scenario.city.num_people == 10
    assert scenario.city.num_locations == 3
    assert scenario.city.density_q == pytest.approx(10 / 3, abs=0.01)


def test_probability_out_of_range_names_field(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(MINIMAL + "infection_rate = 1.5\n")
    with pytest.raises(ScenarioValidationError, match="infection_rate"):
        load_scenario(path)


def test_missing_file_names_path():
    with pytest.raises(ScenarioParseError, match="nowhere.toml"):
        load_scenario("nowhere.toml")


def test_unknown_params_key_rejected():
    with pytest.raises(ScenarioValidationError, match="infection_rate_typo"):
        loads_scenario(MINIMAL + "infection_rate_typo = 0.5\n")


def test_malformed_line_is_parse_error():
    with pytest.raises(ScenarioParseError, match="line"):
        loads_scenario("[params]\ndays 30\n")


def test_roundtrip_serialization(tmp_path):
    scenario = loads_scenario(MINIMAL + "[intervention]\nstrategy = \"isolate\"\nquota = 50\n")
    out = tmp_path / "copy.toml"
    save_scenario(scenario, out)
    again = load_scenario(out)
    assert again.city == scenario.city
    assert again.params == scenario.params
    assert again.strategy == scenario.strategy


def test_roundtrip_with_explicit_city_file(tmp_path):
    city = generate_synthetic_city(50, 9, 3, seed=2)
    save_city_file(city, tmp_path / "city.json")
    scenario = loads_scenario('[city]\nfile = "city.json"\n', base_dir=tmp_path)
    assert scenario.city == city
    out = tmp_path / "again.toml"
    save_scenario(scenario, out)
    assert load_scenario(out).city == city


def test_city_file_roundtrip(tmp_path):
    city = generate_synthetic_city(40, 12, 4, seed=9, regions=2)
    save_city_file(city, tmp_path / "c.json")
    assert load_city_file(tmp_path / "c.json") == city


class TestSyntheticCity:
    def test_determinism(self):
        a = generate_synthetic_city(10, 3, 3, seed=1)
        b = generate_synthetic_city(10, 3, 3, seed=1)
        assert a == b

    def test_homes_are_residential(self):
        city = generate_synthetic_city(100, 9, 3, seed=7)
        assert np.all(city.location_kind[city.home] == RESIDENTIAL)
        assert np.all(city.location_kind[city.work] == WORK)
        assert np.all(city.location_kind[city.shops.reshape(-1)] == COMMERCIAL)

    def test_kind_constraints_across_seeds(self):
        for seed in range(10):
            city = generate_synthetic_city(200, 25, 4, seed=seed)
            city.validate()
            assert np.all(city.location_kind[city.home] == RESIDENTIAL)

    def test_small_city_preset_shape(self):
        # 10K people over 100 locations in tracts of 4 -> 25 tracts.
        city = generate_synthetic_city(10_000, 100, 4, seed=0)
        assert city.num_people == 10_000
        assert city.num_tracts == 25
        assert city.density_q == pytest.approx(100.0)

    def test_too_few_locations(self):
        with pytest.raises(ScenarioValidationError, match="locations"):
            generate_synthetic_city(10, 2, 3, seed=0)

    def test_regions_partition_tracts(self):
        city = generate_synthetic_city(500, 60, 3, seed=3, regions=5)
        assert city.num_regions == 5
        # work stays within the home region
        region_of_location = city.location_region
        assert np.array_equal(region_of_location[city.home],
                              region_of_location[city.work])


class TestCityValidation:
    def test_dangling_home(self):
        with pytest.raises(ScenarioValidationError, match="home"):
            CityModel([5], [1], [[2]], [0, 1, 2], [0, 0, 0])

    def test_wrong_kind_home(self):
        with pytest.raises(ScenarioValidationError, match="home"):
            CityModel([1], [1], [[2]], [0, 1, 2], [0, 0, 0])

    def test_valid_minimal(self):
        city = CityModel([0], [1], [[2]], [0, 1, 2], [0, 0, 0])
        assert city.person(0).home == 0
        assert city.location(2).kind == "commercial"


class TestTimeStep:
    def test_flat_bijection(self):
        hours = 14
        seen = set()
        for day in range(30):
            for hour in range(hours):
                ts = TimeStep(day, hour, hours)
                assert TimeStep.from_flat(ts.flat, hours) == ts
                seen.add(ts.flat)
        assert seen == set(range(30 * hours))

    def test_total_order(self):
        assert TimeStep(0, 13, 14) < TimeStep(1, 0, 14)
        assert TimeStep(2, 3, 14) <= TimeStep(2, 3, 14)

    def test_hour_range_checked(self):
        with pytest.raises(ValueError):
            TimeStep(0, 14, 14)


def test_shipped_case_study_values():
    scenarios = Path(__file__).resolve().parent.parent / "scenarios"
    scenario = load_scenario(scenarios / "case_study.toml")
    assert scenario.params.infection_rate == pytest.approx(0.0085)
    assert scenario.params.travel_prob == pytest.approx(0.12)
    assert scenario.params.return_prob == pytest.approx(0.25)
    assert scenario.params.cure_days == 7
    assert scenario.params.isolate_days == 3
    assert scenario.params.multi_region is True
    # hospitalize confirmed cases, isolate their contacts
    assert scenario.strategy.confirmed_level == RestrictionLevel.HOSPITALIZE
    assert scenario.strategy.beta == RestrictionLevel.ISOLATE


def test_default_protocol_values():
    params = ScenarioParams()
    assert params.days == 30
    assert params.hours == 14
    assert params.initial_infected == 10
    assert params.incubation_steps == 56


def test_params_validation_minimums():
    with pytest.raises(ScenarioValidationError, match="days"):
        ScenarioParams(days=0).validate()
    with pytest.raises(ScenarioValidationError, match="initial_infected"):
        ScenarioParams(initial_infected=11).validate(num_people=10)
    ScenarioParams().validate(num_people=100)


def test_strategy_section_defaults():
    scenario = loads_scenario(MINIMAL)
    assert scenario.strategy.strategy == "contact_tracing"
    assert scenario.strategy.confirmed_level == RestrictionLevel.HOSPITALIZE
    assert scenario.strategy.beta == RestrictionLevel.ISOLATE
    # tracking window defaults to two days
    assert scenario.strategy.tau == 28
