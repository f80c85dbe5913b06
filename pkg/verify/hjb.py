"""
# Description: Numerical check of the HJB variational inequality
#
#                  max{ (L - q) V(x), g(x) - V'(x) } <= 0,   x > 0
#
#              and of the smooth-pasting class of a barrier value function:
#              C^1 at every barrier, C^2 at the odd barriers b_1, b_3, ...
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from barropt_logging.logger_config import logger
from levy.levy_model import LevyModel
from solve.barrier_set import ValueFunction
from utils.errors import QuadratureWarning, UnsupportedModel
from utils.numerics import integrate_pieces


logger = logging.getLogger('verify.hjb')


@dataclass(frozen=True)
class HjbGridSpec:
    n_points: int = 10000
    dense_points: int = 10000
    upper: Optional[float] = None
    tol_rel: float = 1e-7
    pasting_eps: float = 1e-6
    quad_nodes: int = 64
    quad_check_nodes: int = 128
    quad_rel_tol: float = 1e-7


@dataclass
class HjbReport:
    grid: np.ndarray = field(repr=False)
    residual_gen: np.ndarray = field(repr=False)
    residual_grad: np.ndarray = field(repr=False)
    max_violation_gen: float
    max_violation_grad: float
    argmax_gen: float
    pasting: pd.DataFrame = field(repr=False)
    tol: float
    verdict: bool

    @property
    def passed(self):
        return self.verdict

    def to_frame(self):
        return pd.DataFrame({'x': self.grid, 'genV': self.residual_gen, 'g_minus_Vprime': self.residual_grad})

    def to_dict(self):
        return {
            'verdict': 'pass' if self.verdict else 'fail',
            'tol': self.tol,
            'max_violation_gen': self.max_violation_gen,
            'argmax_gen': self.argmax_gen,
            'max_violation_grad': self.max_violation_grad,
            'pasting': self.pasting.to_dict(orient='records'),
        }


# panels of the jump integral: length 4/alpha_max, cut off where the lightest tail is e^{-40}
JUMP_PANEL_DECAY = 4.0
JUMP_CUTOFF_DECAY = 40.0


def _jump_breakpoints(model, value, x):
    rates = model.jumps.rates
    cut = min(x, JUMP_CUTOFF_DECAY / rates.min())
    n_panels = max(1, int(np.ceil(cut * rates.max() / JUMP_PANEL_DECAY)))
    panels = np.linspace(0.0, cut, n_panels + 1)
    kinks = [x - b for b in getattr(value, 'pasting_points', ()) if 0.0 < x - b < cut]
    return np.unique(np.concatenate([panels, kinks]))


def _jump_integral(model, value, x, below_zero, n_nodes):
    """
    sum_j p_j int_0^inf V(x - z) alpha_j exp(-alpha_j z) dz for one x > 0.
    The integrand is split into short panels and at the kinks x - b_i, and
    dropped beyond the cutoff where the jump mass left is below e^{-40};
    beyond x, V is the constant below_zero.
    """
    rates = model.jumps.rates
    weights = model.jumps.weights

    def integrand(z):
        density = np.exp(-np.outer(z, rates)) @ (weights * rates)
        return np.asarray(value(x - z), dtype=float) * density

    tail = below_zero * float(np.sum(weights * np.exp(-rates * x)))
    return integrate_pieces(integrand, _jump_breakpoints(model, value, x), n_nodes) + tail


def apply_generator(model: LevyModel, triple, x, value=None, below_zero=0.0, spec: HjbGridSpec = HjbGridSpec()):
    """
    (L - q) V at x from the triple (V, V', V'').

    Brownian part: sigma^2 V''/2 + mu V' - q V. With jumps the term
    lam * (int V(x - z) nu_1(dz) - V(x)) is added, which needs `value` (a
    callable V) and the constant value of V below 0.
    """
    V, V1, V2 = (np.asarray(t, dtype=float) for t in triple)
    out = 0.5 * model.sigma2 * V2 + model.mu * V1 - model.q * V
    if model.jumps is None:
        return float(out) if out.ndim == 0 else out
    if value is None:
        raise UnsupportedModel("the jump part of the generator needs the value function itself")

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    Vs = np.atleast_1d(V)
    jump = np.empty_like(xs)
    for i, xi in enumerate(xs):
        fine = _jump_integral(model, value, xi, below_zero, spec.quad_nodes)
        check = _jump_integral(model, value, xi, below_zero, spec.quad_check_nodes)
        if abs(fine - check) > spec.quad_rel_tol * max(1.0, abs(check)):
            msg = f"jump integral at x={xi:.6g}: {spec.quad_nodes} and {spec.quad_check_nodes} nodes disagree " \
                  f"({fine!r} vs {check!r})"
            logger.warning(msg)
            warnings.warn(msg, QuadratureWarning)
        jump[i] = model.jumps.lam * (check - Vs[i])
    out = out + jump.reshape(np.shape(out))
    return float(out) if out.ndim == 0 else out


def default_grid(value: ValueFunction, spec: HjbGridSpec, search_upper=None):
    last = value.bset.last
    upper = spec.upper or max(3.0 * last, 2.0 * (search_upper or 0.0), 1.0)
    coarse = np.linspace(0.0, upper, spec.n_points)
    dense = np.linspace(0.0, max(3.0 * last, 1e-3), spec.dense_points)
    grid = np.unique(np.concatenate([coarse, dense]))
    return grid[grid > 0]


def pasting_gaps(value: ValueFunction):
    rows = []
    for i, b in enumerate(value.pasting_points):
        left = value.evaluate(b, side='left')
        right = value.evaluate(b, side='right')
        rows.append(dict(barrier=b, index=i + 1, kind='odd' if i % 2 == 0 else 'even',
                         gap_V=abs(left[0] - right[0]), gap_V1=abs(left[1] - right[1]),
                         gap_V2=abs(left[2] - right[2])))
    return pd.DataFrame(rows, columns=['barrier', 'index', 'kind', 'gap_V', 'gap_V1', 'gap_V2'])


def check_hjb(model: LevyModel, value: ValueFunction, spec: HjbGridSpec = HjbGridSpec(), grid=None,
              search_upper=None):
    """
    Evaluate both HJB branches on the grid and the pasting gaps at every
    barrier. Failures are report content; nothing is raised.
    """
    grid = default_grid(value, spec, search_upper) if grid is None else np.asarray(grid, dtype=float)
    V, V1, V2, _ = value.evaluate(grid)
    gen = apply_generator(model, (V, V1, V2), grid, value=value, spec=spec)

    # V'' jumps at even barriers
    even = np.array(value.pasting_points[1::2])
    mask = np.ones(grid.shape, dtype=bool)
    for b in even:
        mask &= np.abs(grid - b) > spec.pasting_eps
    gen = np.where(mask, gen, np.nan)

    grad = value.reward.g(grid) - V1
    tol = spec.tol_rel * (1.0 + float(np.nanmax(np.abs(V))))

    max_gen = float(np.nanmax(gen))
    arg_gen = float(grid[np.nanargmax(gen)])
    max_grad = float(np.nanmax(grad))

    pasting = pasting_gaps(value)
    pasting['ok'] = (pasting['gap_V'] <= tol) & (pasting['gap_V1'] <= tol) & \
                    ((pasting['kind'] == 'even') | (pasting['gap_V2'] <= tol))
    verdict = bool(max_gen <= tol and max_grad <= tol and pasting['ok'].all())

    logger.info(f"   HJB check on {grid.size} points: max (L-q)V = {max_gen:.3e} at x = {arg_gen:.6g}, "
                f"max g - V' = {max_grad:.3e}, tol = {tol:.3e} -> {'pass' if verdict else 'fail'}")
    if not pasting['ok'].all():
        logger.info(f"   pasting fails at {pasting.loc[~pasting['ok'], 'barrier'].tolist()}")
    return HjbReport(grid, gen, grad, max_gen, max_grad, arg_gen, pasting, tol, verdict)
