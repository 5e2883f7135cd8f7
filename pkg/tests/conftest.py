import numpy as np
import pytest

from kaonoqs.params import from_raw, pdg_defaults


@pytest.fixture(scope="session")
def pdg():
    return pdg_defaults()


@pytest.fixture(scope="session")
def cp_params():
    return pdg_defaults().cp_preserved()


@pytest.fixture(scope="session")
def phased():
    return from_raw(0.08954, 51.16, 5.293, 0.00332, phase_pq=0.7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
