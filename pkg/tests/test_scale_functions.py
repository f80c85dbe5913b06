import math

import numpy as np
import pytest
from scipy.integrate import quad

from levy.levy_model import LevyModel, laplace_exponent
from levy.scale_functions import ScaleFunctions, a_star, exit_probabilities, scale_table
from utils.errors import InvalidInterval, NumericalFailure
from utils.numerics import golden_section_max

from helpers import random_jump_model, random_brownian_model


def _brownian_w(model, x):
    delta = math.sqrt(model.mu ** 2 + 2 * model.q * model.sigma2)
    phi = (delta - model.mu) / model.sigma2
    zeta = (delta + model.mu) / model.sigma2
    return (math.exp(phi * x) - math.exp(-zeta * x)) / delta


def test_values_at_zero(sf24):
    assert sf24.w(0.0) == 0.0
    assert sf24.z(0.0) == pytest.approx(1.0, abs=1e-15)
    assert sf24.w1(0.0) == pytest.approx(2.0 / sf24.model.sigma2, rel=1e-12)
    assert sf24.w(-1.0) == 0.0
    assert sf24.z(-1.0) == 1.0


def test_brownian_closed_form(sf24, model_mu24):
    assert sf24.w(1.0) == pytest.approx(_brownian_w(model_mu24, 1.0), rel=1e-12)
    assert sf24.w(1.0) == pytest.approx(0.29594, abs=1e-4)
    for x in (0.1, 2.0, 7.5):
        assert sf24.w(x) == pytest.approx(_brownian_w(model_mu24, x), rel=1e-12)


def test_vector_and_scalar_shapes(sf24):
    assert isinstance(sf24.w(1.0), float)
    out = sf24.w1(np.array([0.0, 1.0, 2.0]))
    assert out.shape == (3,)


def test_a_star_brownian(sf24, sf23):
    assert sf24.a_star() == pytest.approx(4.119, abs=1e-3)
    assert sf24.w2(sf24.a_star()) == pytest.approx(0.0, abs=1e-12)
    searched = golden_section_max(lambda x: -sf24.w1(x), 0.0, 20.0, tol=1e-9)
    assert searched == pytest.approx(sf24.a_star(), abs=1e-6)
    assert sf23.w2(a_star(sf23)) == pytest.approx(0.0, abs=1e-12)


def test_a_star_is_zero_without_positive_drift():
    sf = ScaleFunctions(LevyModel(-0.5, 1.0, 0.1))
    assert sf.a_star() == 0.0


def test_a_star_jump_model(sf_jump):
    a = sf_jump.a_star()
    assert a > 0
    assert sf_jump.w2(a) == pytest.approx(0.0, abs=1e-10)
    assert sf_jump.w1(a) <= sf_jump.w1(np.linspace(0.0, 10.0, 1001)).min() + 1e-12


BROWNIAN_SEEDS = range(100)
JUMP_SEEDS = range(50)


def _random_brownian(seed):
    model = random_brownian_model(np.random.default_rng(1000 + seed))
    return model, ScaleFunctions(model)


def _random_jump(seed):
    model = random_jump_model(np.random.default_rng(2000 + seed))
    return model, ScaleFunctions(model)


@pytest.mark.parametrize('seed', BROWNIAN_SEEDS)
def test_brownian_harmonic(seed):
    model, sf = _random_brownian(seed)
    x = np.random.default_rng(seed).uniform(0.01, 5.0, 100)
    terms_w = np.array([0.5 * model.sigma2 * sf.w2(x), model.mu * sf.w1(x), -model.q * sf.w(x)])
    assert np.all(np.abs(terms_w.sum(axis=0)) <= 1e-10 * np.abs(terms_w).sum(axis=0))
    # Z' = qW, Z'' = qW'
    terms_z = np.array([0.5 * model.sigma2 * model.q * sf.w1(x), model.mu * model.q * sf.w(x), -model.q * sf.z(x)])
    assert np.all(np.abs(terms_z.sum(axis=0)) <= 1e-10 * np.abs(terms_z).sum(axis=0))


@pytest.mark.parametrize('seed', BROWNIAN_SEEDS)
def test_brownian_boundary_behaviour(seed):
    model, sf = _random_brownian(seed)
    assert sf.w1(0.0) == pytest.approx(2.0 / model.sigma2, rel=1e-12)
    assert sf.w2(0.0) / sf.w1(0.0) == pytest.approx(-2.0 * model.mu / model.sigma2, rel=1e-10, abs=1e-12)
    u = 50.0 / sf.phi
    assert sf.w2(u) / sf.w1(u) == pytest.approx(sf.phi, rel=1e-6)


def test_derivative_ratios(sf24, model_mu24):
    ratio = sf24.w2(0.0) / sf24.w1(0.0)
    assert ratio == pytest.approx(-2.0 * model_mu24.mu / model_mu24.sigma2, rel=1e-10)
    u = 50.0 / sf24.phi
    assert sf24.w2(u) / sf24.w1(u) == pytest.approx(sf24.phi, rel=1e-6)


def _close_to(lhs, rhs, terms, rel):
    return abs(lhs - rhs) <= rel * sum(abs(t) for t in terms)


@pytest.mark.parametrize('seed', BROWNIAN_SEEDS)
def test_brownian_wronskian_identities(seed):
    model, sf = _random_brownian(seed)
    rng = np.random.default_rng(seed)
    s4 = model.sigma2 ** 2
    gap = sf.phi - sf.zeta1
    q = model.q
    for _ in range(20):
        v = rng.uniform(0.0, 2.0)
        terms = (sf.w1(v) ** 2, sf.w(v) * sf.w2(v))
        assert _close_to(terms[0] - terms[1], 4.0 / s4 * math.exp(gap * v), terms, 1e-9)

        b = rng.uniform(0.0, 1.0)
        v = b + rng.uniform(0.1, 1.0)
        z = v + rng.uniform(0.1, 2.0)
        terms = (sf.w2(z - b) * sf.w1(z - v), sf.w1(z - b) * sf.w2(z - v))
        rhs = 4.0 * q / s4 * math.exp(gap * (z - v)) * sf.w(v - b)
        assert _close_to(terms[0] - terms[1], rhs, terms, 1e-9)
        terms = (sf.w1(z - b) * sf.w1(z - v), sf.w2(z - v) * sf.w(z - b))
        rhs = 4.0 / s4 * math.exp(gap * (z - v)) * sf.z(v - b)
        assert _close_to(terms[0] - terms[1], rhs, terms, 1e-9)


def test_reference_wronskian(sf24, model_mu24):
    v = 1.3
    lhs = sf24.w1(v) ** 2 - sf24.w(v) * sf24.w2(v)
    expected = 4.0 / model_mu24.sigma2 ** 2 * math.exp((sf24.phi - sf24.zeta1) * v)
    assert lhs == pytest.approx(expected, rel=1e-9)


def _laplace_check(sf, model, offsets):
    for d in offsets:
        theta = sf.phi + d
        c = abs(sf.coefficients).sum() + abs(sf.w_at_zero)
        upper = math.log(c / (d * 1e-13)) / d
        value, _ = quad(lambda x: math.exp(-theta * x) * sf.w(x), 0.0, upper, limit=400,
                        epsabs=1e-13, epsrel=1e-11)
        assert value == pytest.approx(1.0 / (laplace_exponent(model, theta) - model.q), rel=1e-7)


def test_laplace_transform_reference(sf24, model_mu24):
    _laplace_check(sf24, model_mu24, (0.1, 0.5, 2.0))


@pytest.mark.parametrize('seed', BROWNIAN_SEEDS)
def test_laplace_transform_brownian(seed):
    model, sf = _random_brownian(seed)
    # offsets proportional to 1 + Phi keep Phi * upper well inside the exponent range
    _laplace_check(sf, model, tuple(k * (1.0 + sf.phi) for k in (0.1, 0.5, 2.0)))


@pytest.mark.parametrize('seed', JUMP_SEEDS)
def test_laplace_transform_jump_models(seed):
    model, sf = _random_jump(seed)
    _laplace_check(sf, model, tuple(k * (1.0 + sf.phi) for k in (0.5, 3.0)))


def test_bounded_variation_w_at_zero(rng):
    model = random_jump_model(rng, sigma=0.0)
    sf = ScaleFunctions(model)
    assert sf.w(0.0) == pytest.approx(1.0 / model.mu, rel=1e-10)
    _laplace_check(sf, model, (0.5, 3.0))


@pytest.mark.parametrize('seed', JUMP_SEEDS)
def test_jump_w1_log_convex(seed):
    _, sf = _random_jump(seed)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        x, y = np.sort(rng.uniform(0.0, 6.0, 2))
        lw = np.log(sf.w1(np.array([x, 0.5 * (x + y), y])))
        assert lw[1] <= 0.5 * (lw[0] + lw[2]) + 1e-12 * (1.0 + abs(lw[1]))


def test_factored_evaluation(sf24, model_mu24):
    # both sides of the switch from the expm1 sum to the factored sum
    for x in (0.999 / sf24.phi, 1.001 / sf24.phi, 100.0 / sf24.phi):
        assert sf24.w(x) == pytest.approx(_brownian_w(model_mu24, x), rel=1e-12)
    big = 650.0 / sf24.phi
    assert np.isfinite(sf24.w1(big))
    assert sf24.w2(big) / sf24.w1(big) == pytest.approx(sf24.phi, rel=1e-12)
    with pytest.raises(NumericalFailure):
        sf24.w(701.0 / sf24.phi)
    with pytest.raises(NumericalFailure):
        sf24.z(np.array([1.0, 800.0 / sf24.phi]))


def test_exit_probabilities(sf24):
    up, down = exit_probabilities(sf24, 1.0, 2.0, 0.0)
    assert up == pytest.approx(sf24.w(1.0) / sf24.w(2.0), rel=1e-14)
    assert down == pytest.approx(sf24.z(1.0) - sf24.z(2.0) * up, rel=1e-12)
    assert 0.0 <= up <= 1.0 and 0.0 <= down <= 1.0
    assert exit_probabilities(sf24, 2.0, 2.0, 0.0)[0] == 1.0
    assert exit_probabilities(sf24, 0.5, 2.0, 0.5) == (0.0, pytest.approx(1.0))


@pytest.mark.parametrize('x, a, b', [(3.0, 2.0, 0.0), (1.0, 1.0, 1.0), (0.5, 2.0, 1.0)])
def test_exit_probabilities_invalid(sf24, x, a, b):
    with pytest.raises(InvalidInterval):
        exit_probabilities(sf24, x, a, b)


def test_scale_table(sf24):
    table = scale_table(sf24, np.linspace(0.0, 2.0, 21))
    assert list(table.columns) == ['x', 'W', 'W1', 'W2', 'Z']
    assert len(table) == 21
    assert np.all(np.diff(table['W']) > 0)
