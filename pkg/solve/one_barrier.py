"""
# Description: The one-barrier problem. The candidate threshold b* is the
#              largest global maximizer of F(u) = g(u) / W'(u) on [0, U]; the
#              barrier strategy at b* is optimal when F' <= 0 beyond b*.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from barropt_logging.logger_config import logger
from levy.reward import RewardFunction, check_growth
from levy.scale_functions import ScaleFunctions
from solve.barrier_set import BarrierSet, ValueFunction
from utils.errors import UnboundedSearch
from utils.numerics import grid_local_maxima, pick_largest_argmax, refine_max


logger = logging.getLogger('solve.one_barrier')


@dataclass(frozen=True)
class SearchOptions:
    upper: Optional[float] = None
    grid_points: int = 4001          # one-barrier grid on [0, U]
    max_doublings: int = 2
    rising_fraction: float = 0.99    # F(U) above this share of the max triggers a doubling
    tie_rel_tol: float = 1e-9
    refine_tol: float = 1e-10
    decr_slack: float = 1e-9
    c_points: int = 4001             # sign scan for c_{2k-1}
    z_points: int = 2001             # z-grid of the auxiliary surface
    scan_points: int = 2001          # v-grid of the D-set scan
    refine_points: int = 201         # each local refinement level
    z_gap_tol: float = 1e-7
    boundary_tol: float = 1e-9
    matching_rel_tol: float = 1e-6
    max_barriers: Optional[int] = None


@dataclass
class OneBarrierSolution:
    bstar: float
    Fmax: float
    decrF1_holds: bool
    search_upper: float
    diagnostics: pd.DataFrame = field(repr=False)
    zero_barrier_optimal: Optional[bool] = None

    def to_dict(self):
        return {
            'bstar': self.bstar,
            'Fmax': self.Fmax,
            'decrF1_holds': self.decrF1_holds,
            'search_upper': self.search_upper,
            'zero_barrier_optimal': self.zero_barrier_optimal,
        }


def default_upper(sf: ScaleFunctions):
    """Search bound max(10 a*, 20 / Phi(q))."""
    return max(10.0 * sf.a_star(), 20.0 / sf.phi)


def f_ratio(sf: ScaleFunctions, r: RewardFunction, u):
    """F(u) = g(u)/W'(u) and F'(u) = (g'W' - gW'')/W'^2."""
    g, g1, _ = r.evaluate(u)
    w1 = sf.w1(u)
    w2 = sf.w2(u)
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        F = g / w1
        Fp = (g1 * w1 - g * w2) / (w1 * w1)
    return F, Fp


def _candidates(sf, r, u, F, Fp, opts):
    """Refined local maxima of F from the grid."""
    def f(x):
        return f_ratio(sf, r, x)[0]

    def df(x):
        return f_ratio(sf, r, x)[1]

    points, values = [], []
    last = u.size - 1
    for i in grid_local_maxima(F):
        if i == 0:
            x = u[0]
            if last > 0 and Fp[0] > 0 and Fp[1] < 0:
                x = refine_max(f, df, u[0], u[1], opts.refine_tol)
        elif i == last:
            x = u[last]
        else:
            x = refine_max(f, df, u[i - 1], u[i + 1], opts.refine_tol)
        fx = f(x)
        # the refined point must not lose to its own grid point
        if fx < F[i] - 1e-12 * abs(F[i]):
            x, fx = u[i], F[i]
        points.append(x)
        values.append(fx)
    return np.array(points), np.array(values)


def find_bstar(sf: ScaleFunctions, r: RewardFunction, opts: SearchOptions = SearchOptions()):
    """
    Largest global maximizer of F on [0, U].

    U defaults to max(10 a*, 20/Phi(q)) and is doubled up to
    `opts.max_doublings` times while F is still rising near U.
    """
    if opts.upper is None:
        check_growth(r, sf.phi)
        upper = default_upper(sf)
    else:
        upper = float(opts.upper)

    for attempt in range(opts.max_doublings + 1):
        u = np.linspace(0.0, upper, opts.grid_points)
        F, Fp = f_ratio(sf, r, u)
        best = np.nanmax(F)
        rising = F[-1] >= opts.rising_fraction * best and Fp[-1] > 0
        if not rising:
            break
        if attempt == opts.max_doublings:
            raise UnboundedSearch(f"F = g/W' is still rising at U={upper:.6g} after "
                                  f"{opts.max_doublings} doublings")
        logger.info(f"   F still rising at U={upper:.6g}; doubling the search bound")
        upper *= 2.0

    points, values = _candidates(sf, r, u, F, Fp, opts)
    bstar, fmax = pick_largest_argmax(points, values, opts.tie_rel_tol)

    beyond = u >= bstar
    slack = opts.decr_slack * (1.0 + np.abs(F[beyond]))
    decr = bool(np.all(Fp[beyond][np.isfinite(Fp[beyond])] <= slack[np.isfinite(Fp[beyond])]))

    zero_opt = zero_barrier_condition(sf, r, upper) if sf.model.is_brownian else None
    logger.info(f"   b* = {bstar:.10g}, F(b*) = {fmax:.10g}, F' <= 0 beyond b*: {decr} (U = {upper:.6g})")

    diagnostics = pd.DataFrame({'u': u, 'F': F, 'Fprime': Fp})
    return OneBarrierSolution(bstar, fmax, decr, upper, diagnostics, zero_opt)


def value_one_barrier(sf: ScaleFunctions, r: RewardFunction, b, x, side='right'):
    """(V, V', V'') of the barrier strategy at level b."""
    V, V1, V2, _ = ValueFunction(sf, r, BarrierSet((b,))).evaluate(x, side)
    return V, V1, V2


def zero_barrier_condition(sf: ScaleFunctions, r: RewardFunction, upper, n_points=4001):
    """
    sigma^2 g'/2 + mu g - q G <= 0 on (0, U]: paying everything out at once
    (b = 0) is optimal for a Brownian model.
    """
    model = sf.model
    x = np.linspace(0.0, upper, n_points)[1:]
    g, g1, _ = r.evaluate(x)
    drift = 0.5 * model.sigma2 * g1 + model.mu * g - model.q * r.antiderivative(x)
    return bool(np.all(drift <= 0))
