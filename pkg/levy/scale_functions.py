"""
# Description: q-scale functions W, Z and the derivatives W', W'' for every
#              supported model. Both model families have a rational
#              1/(psi - q), so W is a finite exponential mixture
#              W(x) = sum_i exp(theta_i x) / psi'(theta_i) over the real roots
#              theta_i of psi = q, and every derivative is analytic.
"""

import logging
import math

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from barropt_logging.logger_config import logger
from levy.levy_model import LevyModel, psi_roots, phi_q, laplace_exponent_prime
from utils.errors import InvalidInterval, NumericalFailure


logger = logging.getLogger('levy.scale_functions')

OVERFLOW_EXPONENT = 700.0


def _as_output(value, scalar):
    return float(value) if scalar else value


class ScaleFunctions:

    def __init__(self, model: LevyModel):
        self.model = model
        self.q = model.q
        self.thetas = psi_roots(model)
        self.coefficients = 1.0 / laplace_exponent_prime(model, self.thetas)
        self.phi = phi_q(model)
        self.zeta1 = -float(self.thetas[0]) if model.is_brownian else None
        # W(0) is 0 with a Gaussian part and 1/mu for bounded variation
        self.w_at_zero = 0.0 if model.sigma > 0 else float(self.coefficients.sum())
        self._astar = None
        logger.debug(f"scale functions: roots={self.thetas.tolist()} phi={self.phi}")

    def _mixture(self, x, weights, minus_one=False):
        """
        sum_i weights_i e^{theta_i x} for x >= 0 (or with e^{theta_i x} - 1),
        as e^{Phi x} sum_i weights_i e^{(theta_i - Phi) x}. Phi is the largest
        root, so only the leading factor can overflow.
        """
        xp = np.maximum(x, 0.0)
        lead = self.phi * xp
        if np.any(lead > OVERFLOW_EXPONENT):
            raise NumericalFailure(f"scale functions overflow at x = {float(np.max(xp)):.6g} "
                                   f"(Phi x = {float(np.max(lead)):.1f} > {OVERFLOW_EXPONENT:g})")
        y = xp[..., None]
        factored = np.exp(lead) * (weights * np.exp((self.thetas - self.phi) * y)).sum(axis=-1)
        if not minus_one:
            return factored
        # expm1 keeps the opposite-signed terms from cancelling near 0
        near = (weights * np.expm1(self.thetas * y)).sum(axis=-1)
        return np.where(lead <= 1.0, near, factored - weights.sum())

    def w(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        value = self.w_at_zero + self._mixture(x, self.coefficients, minus_one=True)
        return _as_output(np.where(x < 0, 0.0, value), scalar)

    def w1(self, x):
        """W', right derivative at 0."""
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        value = self._mixture(x, self.coefficients * self.thetas)
        return _as_output(np.where(x < 0, 0.0, value), scalar)

    def w2(self, x):
        """W'', right derivative at 0."""
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        value = self._mixture(x, self.coefficients * self.thetas ** 2)
        return _as_output(np.where(x < 0, 0.0, value), scalar)

    def z(self, x):
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        value = 1.0 + self.q * self._mixture(x, self.coefficients / self.thetas, minus_one=True)
        return _as_output(np.where(x < 0, 1.0, value), scalar)

    def a_star(self):
        if self._astar is None:
            self._astar = a_star(self)
        return self._astar


def a_star(sf: ScaleFunctions):
    """
    Minimizer of W' on [0, inf). Zero when W''(0+) >= 0; for the Brownian
    case with positive drift it is 2 ln(zeta_1/Phi) / (Phi + zeta_1).
    """
    if sf.w2(0.0) >= 0:
        return 0.0
    if sf.model.is_brownian:
        return 2.0 * math.log(sf.zeta1 / sf.phi) / (sf.phi + sf.zeta1)
    hi = 1.0
    while sf.w2(hi) <= 0:
        hi *= 2.0
    return brentq(sf.w2, 0.0, hi, xtol=1e-14, maxiter=200)


def exit_probabilities(sf: ScaleFunctions, x, a, b):
    """
    Two-sided exit from [b, a] started at x:
        up   = E_x[e^{-q tau_a^+}; tau_a^+ < tau_b^-] = W(x-b)/W(a-b)
        down = E_x[e^{-q tau_b^-}; tau_b^- < tau_a^+] = Z(x-b) - Z(a-b) W(x-b)/W(a-b)
    """
    if not (a > b and b <= x <= a):
        raise InvalidInterval(f"need b <= x <= a with a > b, got b={b}, x={x}, a={a}")
    ratio = sf.w(x - b) / sf.w(a - b)
    up = min(max(ratio, 0.0), 1.0)
    down = sf.z(x - b) - sf.z(a - b) * ratio
    return up, min(max(down, 0.0), 1.0)


def scale_table(sf: ScaleFunctions, grid):
    """Scale-function values on a grid as a DataFrame with columns x, W, W1, W2, Z."""
    grid = np.asarray(grid, dtype=float)
    return pd.DataFrame({
        'x': grid,
        'W': sf.w(grid),
        'W1': sf.w1(grid),
        'W2': sf.w2(grid),
        'Z': sf.z(grid),
    })
