import numpy as np
import pytest

from sslpos.channel_sim import (
    ScenarioConfig,
    SimulatorParams,
    build_scenario,
    default_simulator_params,
    generate_dataset,
)


@pytest.fixture(scope="session")
def tiny_config() -> ScenarioConfig:
    # 2x2 grid of BSs, short CIR window: enough structure, fast to generate
    return ScenarioConfig(
        hall_width=40.0, hall_length=40.0, bs_spacing=20.0,
        n_bs=4, n_port=4, n_delay=16,
    )


@pytest.fixture(scope="session")
def tiny_params(tiny_config) -> SimulatorParams:
    return default_simulator_params(tiny_config)


@pytest.fixture(scope="session")
def tiny_scenario(tiny_config):
    return build_scenario(tiny_config)


@pytest.fixture(scope="session")
def tiny_labeled(tiny_scenario, tiny_params):
    return generate_dataset(tiny_scenario, tiny_params, 24, True, seed=7)


@pytest.fixture(scope="session")
def tiny_unlabeled(tiny_scenario, tiny_params):
    return generate_dataset(tiny_scenario, tiny_params, 16, False, seed=8)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
