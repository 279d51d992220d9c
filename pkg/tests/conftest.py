import numpy as np
import pytest

from config import load_run_config
from twpa_model import line_spec_from_config, bloch_dispersion


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def trial_rngs():
    """Ein unabhängiger Zufallsstrom pro Monte-Carlo-Durchlauf."""
    def make(n, seed=7):
        return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
    return make


@pytest.fixture(scope="session")
def default_gain_config():
    return load_run_config("gain")


@pytest.fixture(scope="session")
def default_line(default_gain_config):
    spec = line_spec_from_config(default_gain_config)
    grid = np.linspace(default_gain_config["grid_lo"], default_gain_config["grid_hi"],
                       default_gain_config["grid_points"])
    return spec, bloch_dispersion(spec, grid)
