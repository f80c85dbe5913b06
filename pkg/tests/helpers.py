import os

import numpy as np

from levy.levy_model import LevyModel, HyperExpJumps, Phase


REFERENCE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'reference_cases')


def reference(name):
    return os.path.join(REFERENCE_DIR, name)


def random_jump_model(rng, sigma=None):
    m = int(rng.integers(1, 4))
    alphas = 0.5 + np.cumsum(rng.uniform(0.5, 3.0, m))
    weights = rng.dirichlet(np.ones(m))
    weights[-1] = 1.0 - weights[:-1].sum()
    phases = tuple(Phase(float(p), float(a)) for p, a in zip(weights, alphas))
    sigma = float(rng.uniform(0.3, 2.0)) if sigma is None else sigma
    mu = float(rng.uniform(0.2, 3.0)) if sigma == 0 else float(rng.uniform(-1.0, 3.0))
    return LevyModel(mu, sigma, float(rng.uniform(0.05, 1.0)), HyperExpJumps(float(rng.uniform(0.2, 3.0)), phases))


def random_brownian_model(rng):
    return LevyModel(float(rng.uniform(-1.0, 3.0)), float(rng.uniform(0.3, 2.5)), float(rng.uniform(0.05, 1.0)))
