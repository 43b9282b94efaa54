import numpy as np
import pytest

from qdyn import prisoners_dilemma
from qdyn.stochastic import AgentParams


@pytest.fixture
def pd():
    return prisoners_dilemma()


@pytest.fixture
def params():
    return AgentParams(alpha=0.01, gamma=0.8, temperature=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
