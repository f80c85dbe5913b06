import warnings

import numpy as np
import pytest

from solve.barrier_set import BarrierSet, ValueFunction
from solve.one_barrier import find_bstar
from verify.hjb import HjbGridSpec, apply_generator, check_hjb, default_grid, pasting_gaps
from utils.errors import QuadratureWarning, UnsupportedModel


def _scale_triple(sf, x):
    return sf.w(x), sf.w1(x), sf.w2(x)


def test_scale_functions_are_harmonic_brownian(sf24, model_mu24):
    x = np.linspace(0.1, 5.0, 50)
    gen = apply_generator(model_mu24, _scale_triple(sf24, x), x)
    assert np.all(np.abs(gen) <= 1e-10)


def test_scale_functions_are_harmonic_with_jumps(sf_jump, jump_model):
    x = np.linspace(0.5, 3.0, 11)
    gen_w = apply_generator(jump_model, _scale_triple(sf_jump, x), x, value=sf_jump.w)
    assert np.all(np.abs(gen_w) <= 1e-8 * (1.0 + np.abs(sf_jump.w(x))))
    q = jump_model.q
    z_triple = (sf_jump.z(x), q * sf_jump.w(x), q * sf_jump.w1(x))
    gen_z = apply_generator(jump_model, z_triple, x, value=sf_jump.z, below_zero=1.0)
    assert np.all(np.abs(gen_z) <= 1e-8 * (1.0 + np.abs(sf_jump.z(x))))


def test_jump_generator_needs_the_value(sf_jump, jump_model):
    with pytest.raises(UnsupportedModel):
        apply_generator(jump_model, _scale_triple(sf_jump, 1.0), 1.0)


def test_single_barrier_passes_for_mu23(model_mu23, sf23, rational, one23):
    value = ValueFunction(sf23, rational, BarrierSet((one23.bstar,)))
    report = check_hjb(model_mu23, value, search_upper=one23.search_upper)
    assert report.passed
    assert report.max_violation_grad <= report.tol
    assert report.pasting['ok'].all()


def test_single_barrier_fails_for_mu24(model_mu24, sf24, rational, one24):
    value = ValueFunction(sf24, rational, BarrierSet((one24.bstar,)))
    report = check_hjb(model_mu24, value)
    assert not report.passed
    assert report.max_violation_gen > report.tol
    assert report.argmax_gen > one24.bstar
    assert report.to_dict()['verdict'] == 'fail'


def test_multibarrier_solution_passes(model_mu24, solution24):
    report = check_hjb(model_mu24, solution24.value, search_upper=solution24.search_upper)
    assert report.passed
    assert list(report.pasting['kind']) == ['odd', 'even', 'odd']


def test_perturbed_even_barrier_breaks_pasting(model_mu24, sf24, rational, solution24):
    b1, b2, b3 = solution24.barriers.levels
    value = ValueFunction(sf24, rational, BarrierSet((b1, b2 + 0.05, b3)))
    report = check_hjb(model_mu24, value)
    assert not report.passed
    even = report.pasting[report.pasting['kind'] == 'even'].iloc[0]
    assert not even['ok']
    assert even['gap_V1'] > report.tol
    assert even['gap_V'] <= report.tol


def test_gradient_branch_matches_ratio_maximum(model_mu24, sf24, rational, one24):
    x = np.linspace(1e-3, 3.0, 3000)
    F = rational.g(x) / sf24.w1(x)
    for b in (0.3, 0.6, one24.bstar, 1.5, 2.5):
        value = ValueFunction(sf24, rational, BarrierSet((b,)))
        report = check_hjb(model_mu24, value, grid=x)
        below = x < b
        ratio_ok = bool(np.all(F[below] <= rational.g(b) / sf24.w1(b) + 1e-12))
        assert (report.max_violation_grad <= report.tol) == ratio_ok


def test_report_is_deterministic(model_mu24, solution24):
    spec = HjbGridSpec(n_points=500, dense_points=500)
    first = check_hjb(model_mu24, solution24.value, spec)
    second = check_hjb(model_mu24, solution24.value, spec)
    assert np.array_equal(first.residual_gen, second.residual_gen, equal_nan=True)
    assert first.to_dict() == second.to_dict()
    frame = first.to_frame()
    assert list(frame.columns) == ['x', 'genV', 'g_minus_Vprime']
    assert frame['x'].min() > 0


def test_default_grid(sf24, rational):
    value = ValueFunction(sf24, rational, BarrierSet((1.0, 2.0, 3.0)))
    grid = default_grid(value, HjbGridSpec(n_points=100, dense_points=50), search_upper=10.0)
    assert grid.max() == pytest.approx(20.0)
    assert grid.min() > 0
    assert np.all(np.diff(grid) > 0)


def test_pasting_table(sf24, rational):
    table = pasting_gaps(ValueFunction(sf24, rational, BarrierSet((1.0, 2.0, 3.0))))
    assert list(table.columns) == ['barrier', 'index', 'kind', 'gap_V', 'gap_V1', 'gap_V2']
    assert np.all(table['gap_V'] <= 1e-12)


def test_jump_model_one_barrier(jump_model, sf_jump, power2):
    one = find_bstar(sf_jump, power2)
    b = one.bstar
    value = ValueFunction(sf_jump, power2, BarrierSet((b,)))
    grid = np.linspace(0.1 * b, 3.0 * b, 40)
    report = check_hjb(jump_model, value, grid=grid)
    V = value(grid)
    wait = grid < b - 1e-3
    assert np.all(np.abs(report.residual_gen[wait]) <= 1e-7 * (1.0 + np.abs(V).max()))
    assert report.max_violation_grad <= report.tol


def test_jump_integral_is_resolved_far_from_zero(jump_model, sf_jump, power2):
    one = find_bstar(sf_jump, power2)
    value = ValueFunction(sf_jump, power2, BarrierSet((one.bstar,)))
    spec = HjbGridSpec(n_points=300, dense_points=100)
    with warnings.catch_warnings():
        warnings.simplefilter('error', QuadratureWarning)
        report = check_hjb(jump_model, value, spec, search_upper=one.search_upper)
    assert report.grid.max() >= 2.0 * one.search_upper - 1e-9
    assert report.max_violation_gen <= report.tol
