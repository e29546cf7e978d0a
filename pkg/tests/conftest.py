import numpy as np
import pytest

from epimob.intervention import StrategyConfig, resolve_strategy
from epimob.scenario import Scenario, ScenarioParams, generate_synthetic_city


@pytest.fixture
def small_city():
    return generate_synthetic_city(1000, 30, 3, seed=11)


@pytest.fixture
def tiny_city():
    return generate_synthetic_city(100, 9, 3, seed=5)


def make_scenario(population=1000, locations=30, tract_size=3, city_seed=11,
                  strategy="hybrid", **param_overrides) -> Scenario:
    city = generate_synthetic_city(population, locations, tract_size, seed=city_seed)
    params = ScenarioParams(**param_overrides)
    base = StrategyConfig(tau=params.tracking_steps, max_order=params.max_order)
    return Scenario(city, params, resolve_strategy(strategy, base))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
