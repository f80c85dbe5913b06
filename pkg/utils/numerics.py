"""
Scalar search helpers shared by the solvers: sign-based bisection,
golden-section maximization, analytic-derivative polishing of grid maxima
and composite Gauss-Legendre quadrature.
"""

import math
import logging
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from barropt_logging.logger_config import logger
from utils.errors import ConvergenceFailure


logger = logging.getLogger('utils.numerics')

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2


def bisect_sign(f, lo, hi, sign_lo, width=1e-14, max_iter=400):
    """
    Bisection that only uses the sign of f inside (lo, hi).

    The endpoints are never evaluated, so they may sit on poles of f as
    long as the sign of f just right of `lo` is known (`sign_lo` = +1/-1).
    """
    if not hi > lo:
        raise ConvergenceFailure(f"empty bracket ({lo}, {hi})")
    for _ in range(max_iter):
        if hi - lo <= width * max(1.0, abs(lo), abs(hi)):
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        value = f(mid)
        if value == 0.0:
            return mid
        if np.sign(value) == sign_lo:
            lo = mid
        else:
            hi = mid
    raise ConvergenceFailure(f"bisection did not reach width {width} in ({lo}, {hi})")


def newton_polish(f, df, x, lo=-np.inf, hi=np.inf):
    """One Newton step, kept only if it stays in (lo, hi) and reduces |f|."""
    fx = f(x)
    dfx = df(x)
    if dfx == 0.0 or not np.isfinite(dfx):
        return x
    candidate = x - fx / dfx
    if lo < candidate < hi and abs(f(candidate)) < abs(fx):
        return candidate
    return x


def golden_section_max(f, a, b, tol=1e-10):
    """
    Golden-section search for the maximum of a unimodal f on [a, b].

    Returns the abscissa of the best point of the final bracket.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)

    # Required steps to achieve tolerance
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for _ in range(n - 1):
        if yc > yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    return c if yc > yd else d


def refine_max(f, df, a, b, tol=1e-10):
    """
    Locate a local maximum of f inside [a, b].

    When the analytic derivative changes sign from + to - on the bracket
    the root of df is polished with brentq (full double precision);
    otherwise golden-section search is used.
    """
    da = df(a)
    db = df(b)
    if da > 0 and db < 0:
        return brentq(df, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return golden_section_max(f, a, b, tol)


def grid_local_maxima(values):
    """Indices of grid points not smaller than their neighbours (endpoints included)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 1:
        return np.array([0])
    left = np.empty(n, dtype=bool)
    right = np.empty(n, dtype=bool)
    left[0] = True
    left[1:] = values[1:] >= values[:-1]
    right[-1] = True
    right[:-1] = values[:-1] >= values[1:]
    idx = np.flatnonzero(left & right & np.isfinite(values))
    return idx


def pick_largest_argmax(points, values, rel_tol=1e-9):
    """
    Among candidate maxima return (x, f) with the largest abscissa whose
    value lies within rel_tol of the best one.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    best = np.nanmax(values)
    slack = rel_tol * max(1.0, abs(best))
    ties = np.flatnonzero(values >= best - slack)
    pick = ties[np.argmax(points[ties])]
    return float(points[pick]), float(values[pick])


def geometric_offsets(first, length, n):
    """n offsets from `first` to `length`, geometrically spaced."""
    first = max(first, 1e-12)
    if length <= first:
        return np.array([length])
    return np.geomspace(first, length, n)


@lru_cache(maxsize=8)
def gauss_legendre(n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def integrate_pieces(f, breakpoints, n_nodes=64):
    """
    Composite Gauss-Legendre integral of a vectorized f over consecutive
    [breakpoints[i], breakpoints[i+1]] pieces.
    """
    breakpoints = np.asarray(breakpoints, dtype=float)
    nodes, weights = gauss_legendre(n_nodes)
    lo = breakpoints[:-1]
    hi = breakpoints[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return 0.0
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * nodes[None, :]
    values = f(x.ravel()).reshape(x.shape)
    return float(np.sum(half * (values @ weights)))
