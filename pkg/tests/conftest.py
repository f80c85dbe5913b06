import numpy as np
import pytest

from levy.levy_model import LevyModel, HyperExpJumps, Phase
from levy.reward import RewardFunction
from levy.scale_functions import ScaleFunctions
from solve.multibarrier import solve
from solve.one_barrier import find_bstar

from helpers import reference


@pytest.fixture(scope='session')
def model_mu23():
    return LevyModel.from_file(reference('model_mu23.json'))


@pytest.fixture(scope='session')
def model_mu24():
    return LevyModel.from_file(reference('model_mu24.json'))


@pytest.fixture(scope='session')
def jump_model():
    return LevyModel(1.5, 1.0, 0.1, HyperExpJumps(1.0, (Phase(0.6, 2.0), Phase(0.4, 5.0))))


@pytest.fixture(scope='session')
def sf23(model_mu23):
    return ScaleFunctions(model_mu23)


@pytest.fixture(scope='session')
def sf24(model_mu24):
    return ScaleFunctions(model_mu24)


@pytest.fixture(scope='session')
def sf_jump(jump_model):
    return ScaleFunctions(jump_model)


@pytest.fixture(scope='session')
def rational():
    return RewardFunction.from_file(reference('reward_rational.json'))


@pytest.fixture(scope='session')
def power2():
    return RewardFunction('power', {'alpha': 2})


@pytest.fixture(scope='session')
def one23(sf23, rational):
    return find_bstar(sf23, rational)


@pytest.fixture(scope='session')
def one24(sf24, rational):
    return find_bstar(sf24, rational)


@pytest.fixture(scope='session')
def solution24(sf24, rational):
    return solve(sf24, rational)


@pytest.fixture
def rng():
    return np.random.default_rng(20241225)
