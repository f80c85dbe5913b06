"""
# Description: Multibarrier strategies for Brownian models. Starting from the
#              one-barrier threshold b_1, each round locates the crossing point
#              c of (L-q)H, the infimum b_{2k} of the set of levels v whose
#              auxiliary surface z -> F(v, z) has a global maximum strictly
#              beyond v, and b_{2k+1} = z(b_{2k}). The loop stops when (L-q)H
#              stays non-positive beyond the last barrier.
#
#              F(v, z) = (g(z) - q H(v) W(z - v)) / W'(z - v),   z > v
#              F(v, v+) = sigma^2 g(v) / 2
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from barropt_logging.logger_config import logger
from levy.reward import RewardFunction, generator_of_reward
from levy.scale_functions import ScaleFunctions
from solve.barrier_set import BarrierSet, ValueFunction
from solve.one_barrier import SearchOptions, default_upper, find_bstar
from utils.errors import (ConfigError, EmptyD, InvalidPair, MatchingFailure, NoSignChange, OutOfRegime,
                          UnboundedSearch, UnsupportedModel)
from utils.numerics import geometric_offsets, grid_local_maxima, pick_largest_argmax, refine_max


logger = logging.getLogger('solve.multibarrier')

TRACE_COLUMNS = ['stage', 'k', 'v', 'z', 'F', 'genH']


@dataclass
class MultibarrierSolution:
    barriers: BarrierSet
    c_points: List[float]
    stopped_reason: str
    value: ValueFunction = field(repr=False)
    search_upper: float = np.nan
    partial: bool = False
    diagnostics: dict = field(default_factory=dict)
    trace: Optional[pd.DataFrame] = field(default=None, repr=False)

    @property
    def n(self):
        return self.barriers.n

    def to_dict(self):
        return {
            'barriers': list(self.barriers.levels),
            'c_points': list(self.c_points),
            'n': self.n,
            'stopped_reason': self.stopped_reason,
            'partial': self.partial,
            'search_upper': self.search_upper,
            'diagnostics': self.diagnostics,
        }


def _value(sf, r, bset):
    if isinstance(bset, ValueFunction):
        return bset
    return ValueFunction(sf, r, bset)


def _require_brownian(sf):
    if not sf.model.is_brownian:
        raise UnsupportedModel("multibarrier strategies are solved for Brownian models only")


def h_eval(sf: ScaleFunctions, r: RewardFunction, bset, x):
    """H(x; b_1..b_{2k+1}) for x at or above the last barrier."""
    vf = _value(sf, r, bset)
    return vf.h(x)


def phi_eval(sf: ScaleFunctions, r: RewardFunction, bset, x):
    """phi(x) on the top wait region (b_{2k}, b_{2k+1})."""
    vf = _value(sf, r, bset)
    if vf.n < 1:
        raise OutOfRegime("phi needs at least one (b_2k, b_2k+1) pair")
    lo, hi = vf.bset.even(vf.n), vf.bset.odd(vf.n)
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= lo) or np.any(xa >= hi):
        raise OutOfRegime(f"phi is defined on ({lo}, {hi}), got x={x}")
    return vf.phi(x)[0]


def f_surface(sf: ScaleFunctions, r: RewardFunction, bset, v, z):
    """(F(v, z), dF/dz(v, z)); z may be an array."""
    vf = _value(sf, r, bset)
    z = np.asarray(z, dtype=float)
    if np.any(z <= v):
        raise InvalidPair(f"the auxiliary surface needs z > v, got v={v}")
    hv = vf.h(v)
    d = z - v
    g, g1, _ = r.evaluate(z)
    w, w1, w2 = sf.w(d), sf.w1(d), sf.w2(d)
    with np.errstate(over='ignore', invalid='ignore'):
        F = (g - sf.q * hv * w) / w1
        dF = (g1 - sf.q * hv * w1 - w2 * F) / w1
    if np.ndim(F) == 0:
        return float(F), float(dF)
    return F, dF


def boundary_value(sf, r, v):
    """F(v, v+) = sigma^2 g(v) / 2."""
    return 0.5 * sf.model.sigma2 * r.g(v)


def gen_H(sf: ScaleFunctions, r: RewardFunction, bset, v):
    """(L - q) H(v) = sigma^2 g'(v)/2 + mu g(v) - q H(v)."""
    _require_brownian(sf)
    vf = _value(sf, r, bset)
    g, g1, _ = r.evaluate(v)
    return 0.5 * sf.model.sigma2 * g1 + sf.model.mu * g - sf.q * vf.h(v)


def find_c(sf: ScaleFunctions, r: RewardFunction, bset, opts: SearchOptions = SearchOptions(), upper=None,
           trace=None):
    """
    First v beyond the last barrier where (L-q)H crosses from <= 0 to > 0.
    Raises NoSignChange when (L-q)H stays non-positive up to U.
    """
    vf = _value(sf, r, bset)
    b = vf.bset.last
    upper = max(upper or default_upper(sf), 2.0 * b + 1.0)
    v = b + geometric_offsets(1e-6 * (1.0 + b), upper - b, opts.c_points)
    values = gen_H(sf, r, vf, v)
    if trace is not None:
        trace.extend(dict(stage='c_scan', k=vf.n + 1, v=vi, z=np.nan, F=np.nan, genH=gi)
                     for vi, gi in zip(v, values))

    positive = values > 0
    if not np.any(positive):
        raise NoSignChange(f"(L-q)H <= 0 on ({b:.6g}, {upper:.6g}]")
    i = int(np.argmax(positive))
    if i == 0:
        logger.warning(f"   (L-q)H is already positive just beyond b={b:.10g}")
        return float(v[0])

    def gh(x):
        return gen_H(sf, r, vf, x)

    c = brentq(gh, v[i - 1], v[i], xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
    logger.info(f"   c_{2 * vf.n + 1} = {c:.10g}")
    return float(c)


def _interior_max(sf, r, vf, v, upper, opts):
    """
    Largest global maximizer of z -> F(v, z) over (v, U] among interior local
    maxima, with its value; (nan, -inf) when there is none.
    """
    z = v + geometric_offsets(opts.z_gap_tol * (1.0 + v), upper - v, opts.z_points)
    F, dF = f_surface(sf, r, vf, v, z)

    def f(x):
        return f_surface(sf, r, vf, v, x)[0]

    def df(x):
        return f_surface(sf, r, vf, v, x)[1]

    points, values = [], []
    last = z.size - 1
    for i in grid_local_maxima(F):
        if i == 0:
            continue
        if i == last:
            if dF[last] > 0:
                points.append(z[last])
                values.append(F[last])
            continue
        x = refine_max(f, df, z[i - 1], z[i + 1], opts.refine_tol)
        fx = f(x)
        if fx < F[i] - 1e-12 * abs(F[i]):
            x, fx = z[i], F[i]
        points.append(x)
        values.append(fx)
    if not points:
        return np.nan, -np.inf
    zm, fm = pick_largest_argmax(points, values, opts.tie_rel_tol)
    if zm >= z[last] and dF[last] > 0 and fm >= boundary_value(sf, r, v):
        raise UnboundedSearch(f"F(v={v:.6g}, z) is still rising at U={upper:.6g}")
    return zm, fm


def _gap(sf, r, vf, v, upper, opts):
    zm, fm = _interior_max(sf, r, vf, v, upper, opts)
    return zm, fm, fm - boundary_value(sf, r, v)


def _in_d(sf, r, v, zm, gap, opts):
    scale = 1.0 + abs(boundary_value(sf, r, v))
    return bool(np.isfinite(zm) and zm - v > opts.z_gap_tol * (1.0 + v) and gap >= -opts.boundary_tol * scale)


def z_of_v(sf: ScaleFunctions, r: RewardFunction, bset, v, opts: SearchOptions = SearchOptions(), upper=None):
    """
    Largest global maximizer of z -> F(v, z) on (v, U], or v itself when the
    boundary value sigma^2 g(v)/2 is the supremum.
    """
    vf = _value(sf, r, bset)
    upper = max(upper or default_upper(sf), 2.0 * v + 1.0)
    zm, fm, gap = _gap(sf, r, vf, v, upper, opts)
    return float(zm) if _in_d(sf, r, v, zm, gap, opts) else float(v)


def next_pair(sf: ScaleFunctions, r: RewardFunction, bset, opts: SearchOptions = SearchOptions(), upper=None,
              c=None, trace=None):
    """
    (b_{2k}, b_{2k+1}): b_{2k} is the infimum over [b_{2k-1}, c] of the levels
    whose auxiliary surface peaks strictly beyond v at or above the boundary
    value; b_{2k+1} is that peak.
    """
    _require_brownian(sf)
    vf = _value(sf, r, bset)
    b = vf.bset.last
    k = vf.n + 1
    if c is None:
        c = find_c(sf, r, vf, opts, upper, trace)
    upper = max(upper or default_upper(sf), 2.0 * c + 1.0)

    def scan(grid):
        """Index of the first grid level in D, or None."""
        for i, v in enumerate(grid):
            zm, fm, gap = _gap(sf, r, vf, v, upper, opts)
            if trace is not None:
                trace.append(dict(stage='d_scan', k=k, v=v, z=zm, F=fm, genH=gen_H(sf, r, vf, v)))
            if _in_d(sf, r, v, zm, gap, opts):
                return i
        return None

    grid = np.linspace(b, c, opts.scan_points)
    i = scan(grid)
    if i is None:
        raise EmptyD(f"no level in [{b:.6g}, {c:.6g}] has its auxiliary maximum beyond itself",
                     diagnostics={'k': k, 'b_last': b, 'c': c, 'scan_points': opts.scan_points})
    if i == 0:
        logger.warning(f"   the D-set already contains b_{2 * k - 1} = {b:.10g}")
        lo = hi = grid[0]
    else:
        lo, hi = grid[i - 1], grid[i]
        for _ in range(2):
            sub = np.linspace(lo, hi, opts.refine_points)
            j = scan(sub[1:])
            # hi is known to be in D, so j is found at the latest on the last point
            j = sub.size - 2 if j is None else j
            lo, hi = sub[j], sub[j + 1]

    v_star = hi
    if hi > lo:
        def gap(x):
            value = _gap(sf, r, vf, x, upper, opts)[2]
            # no interior maximum at all counts as a plain negative gap
            return value if np.isfinite(value) else -(1.0 + abs(boundary_value(sf, r, x)))
        g_lo, g_hi = gap(lo), gap(hi)
        if g_lo < 0 < g_hi:
            v_star = brentq(gap, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
        else:
            logger.debug(f"   no clean sign change of the boundary gap on [{lo:.12g}, {hi:.12g}]; "
                         f"using the finest grid level")

    z_star, f_star, gap_star = _gap(sf, r, vf, v_star, upper, opts)
    if not np.isfinite(z_star) or z_star <= v_star:
        raise MatchingFailure(f"no interior maximum of F(v, .) at v={v_star:.10g}")
    scale = 1.0 + abs(boundary_value(sf, r, v_star))
    if abs(gap_star) > opts.matching_rel_tol * scale:
        raise MatchingFailure(f"F(v,v+) = {boundary_value(sf, r, v_star):.10g} and F(v, z(v)) = {f_star:.10g} "
                              f"differ at v = {v_star:.10g}")
    if trace is not None:
        trace.append(dict(stage='pair', k=k, v=v_star, z=z_star, F=f_star, genH=gen_H(sf, r, vf, v_star)))
    logger.info(f"   b_{2 * k} = {v_star:.10g}, b_{2 * k + 1} = {z_star:.10g}, F = {f_star:.10g}")
    return float(v_star), float(z_star)


def _wait_gen_right_of(sf, r, vf, v, n=20, width=1e-3):
    """(L-q)H just right of the new even barrier, on a small mesh."""
    x = v + np.geomspace(1e-6, width, n)
    return gen_H(sf, r, vf, x)


def _reward_generator_degenerate(sf, r, upper, n_points=4001, run=10):
    """True when (L-q)g vanishes on a run of consecutive grid points."""
    x = np.linspace(0.0, upper, n_points)[1:]
    gg = generator_of_reward(sf.model, r, x)
    scale = 1.0 + np.nanmax(np.abs(gg))
    small = np.abs(gg) <= 1e-12 * scale
    count = 0
    for s in small:
        count = count + 1 if s else 0
        if count >= run:
            return True
    return False


def _non_increasing_beyond(sf, r, vf_prev, v_even, z_odd, upper, opts):
    """z -> F(b_2k, z) non-increasing on the grid beyond b_{2k+1}."""
    z = z_odd + geometric_offsets(opts.z_gap_tol * (1.0 + z_odd), max(upper - z_odd, 1e-6), opts.z_points)
    _, dF = f_surface(sf, r, vf_prev, v_even, z)
    scale = 1.0 + abs(boundary_value(sf, r, v_even))
    return bool(np.all(dF[np.isfinite(dF)] <= opts.decr_slack * scale))


def solve(sf: ScaleFunctions, r: RewardFunction, opts: SearchOptions = SearchOptions()):
    """
    Run the barrier construction to termination. Returns a MultibarrierSolution
    whose stopped_reason is condition_ineq1 (no pair added), condition_ineq2
    (stopped after a pair) or max_barriers (partial solution).
    """
    _require_brownian(sf)
    if opts.max_barriers is not None and opts.max_barriers < 1:
        raise ConfigError(f"max_barriers must be at least 1, got {opts.max_barriers}")

    logger.info('=' * 80)
    logger.info('Multibarrier solve')
    upper = opts.upper or default_upper(sf)
    one = find_bstar(sf, r, opts)
    upper = max(upper, one.search_upper)
    bset = BarrierSet((one.bstar,))
    c_points, trace = [], []
    diagnostics = {'cond3': [], 'stop_test': None}

    if _reward_generator_degenerate(sf, r, upper):
        logger.warning("   (L-q)g vanishes on an interval; the construction may not be well defined there")
        diagnostics['degenerate_reward'] = True
    else:
        diagnostics['degenerate_reward'] = False

    partial = False
    while True:
        if opts.max_barriers is not None and len(bset) + 2 > opts.max_barriers:
            stopped, partial = 'max_barriers', True
            logger.info(f"   reached max_barriers = {opts.max_barriers}")
            break

        vf = ValueFunction(sf, r, bset)
        search_upper = max(upper, 2.0 * bset.last + 1.0)
        try:
            c = find_c(sf, r, vf, opts, search_upper, trace)
        except NoSignChange:
            stopped = 'condition_ineq1' if bset.n == 0 else 'condition_ineq2'
            diagnostics['stop_test'] = 'generator_non_positive'
            logger.info(f"   (L-q)H <= 0 beyond b_{len(bset)} = {bset.last:.10g}: stop ({stopped})")
            break

        c_points.append(c)
        even, odd = next_pair(sf, r, vf, opts, search_upper, c, trace)
        right = _wait_gen_right_of(sf, r, vf, even)
        cond3 = bool(np.all(right < 0))
        diagnostics['cond3'].append(cond3)
        if not cond3:
            logger.warning(f"   (L-q)H is not negative just right of b_{2 * bset.n + 2} = {even:.10g}")

        bset = bset.extended(even, odd)
        if _non_increasing_beyond(sf, r, vf, even, odd, search_upper, opts):
            stopped = 'condition_ineq2'
            diagnostics['stop_test'] = 'auxiliary_non_increasing'
            logger.info(f"   F(b_{len(bset) - 1}, z) is non-increasing beyond b_{len(bset)}: stop")
            break

    value = ValueFunction(sf, r, bset)
    logger.info(f"   barriers: {[round(b, 10) for b in bset.levels]} ({stopped})")
    return MultibarrierSolution(bset, c_points, stopped, value, upper, partial, diagnostics,
                                pd.DataFrame(trace, columns=TRACE_COLUMNS))


def value_multibarrier(sf: ScaleFunctions, r: RewardFunction, bset, x, side='right'):
    """(V, V', V'', regime tag) of the strategy for bset."""
    return _value(sf, r, bset).evaluate(x, side)


def sweep(sf: ScaleFunctions, r: RewardFunction, bset, v_range, z_range, opts: SearchOptions = SearchOptions(),
          upper=None):
    """
    Evaluate F(v, z) on the (v, z) rectangle (pairs with z > v only) and the
    z(v) curve along the v-axis. v_range and z_range are (start, stop, count).
    """
    _require_brownian(sf)
    vf = _value(sf, r, bset)
    vs = np.linspace(*v_range[:2], int(v_range[2]))
    zs = np.linspace(*z_range[:2], int(z_range[2]))
    if vs[-1] < vf.bset.last:
        raise InvalidPair(f"sweep levels end at {vs[-1]} below the last barrier {vf.bset.last}")
    if vs[0] < vf.bset.last:
        logger.warning(f"   sweep levels below the last barrier {vf.bset.last:.10g} are dropped")
        vs = vs[vs >= vf.bset.last]
    upper = max(upper or default_upper(sf), 2.0 * vs[-1] + 1.0)

    rows, curve = [], []
    for v in vs:
        mask = zs > v
        if np.any(mask):
            F, dF = f_surface(sf, r, vf, v, zs[mask])
            rows.append(pd.DataFrame({'v': v, 'z': zs[mask], 'F': F, 'dFdz': dF}))
        zm, fm, gap = _gap(sf, r, vf, v, upper, opts)
        z = zm if _in_d(sf, r, v, zm, gap, opts) else v
        curve.append(dict(v=v, z=z, Fmax=max(fm, boundary_value(sf, r, v)),
                          boundary=boundary_value(sf, r, v), genH=gen_H(sf, r, vf, v)))
    surface = pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(columns=['v', 'z', 'F', 'dFdz'])
    return surface, pd.DataFrame(curve)
