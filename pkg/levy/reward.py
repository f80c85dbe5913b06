"""
# Description: The instantaneous marginal yield g of the control, its first
#              two derivatives and its antiderivative G(x) = int_0^x g.
#
#              Supported kinds (JSON "kind"):
#                power     g = x^alpha
#                exp       g = exp(-beta x)
#                constant  g = c
#                rational  g = N(x) / D(x), coefficients in ascending degree
#                table     natural cubic spline through (x, g) samples
#              Every kind takes an optional positive "scale" multiplier.
"""

import logging

import numpy as np
import yaml
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from barropt_logging.logger_config import logger
from utils.errors import DomainError, InvalidPush, ConfigError, UnsupportedModel
from utils.numerics import gauss_legendre


logger = logging.getLogger('levy.reward')

KINDS = ('power', 'exp', 'constant', 'rational', 'table')

# composite Gauss-Legendre for G of a rational g
G_PANEL_WIDTH = 0.25
G_PANEL_NODES = 16
DENOMINATOR_EPS = 1e-14


class RewardFunction:

    def __init__(self, kind, params=None, scale=1.0):
        if kind not in KINDS:
            raise ConfigError(f"unknown reward kind '{kind}', expected one of {KINDS}")
        if not (np.isfinite(scale) and scale > 0):
            raise ConfigError(f"reward scale must be positive, got {scale}")
        self.kind = kind
        self.params = dict(params or {})
        self.scale = float(scale)
        self._panels = np.zeros(1)  # G at multiples of G_PANEL_WIDTH, grown on demand

        if kind == 'power':
            self.alpha = float(self._require('alpha'))
            if self.alpha < 0:
                raise ConfigError(f"power reward needs alpha >= 0, got {self.alpha}")
        elif kind == 'exp':
            self.beta = float(self._require('beta'))
        elif kind == 'constant':
            self.c = float(self.params.get('c', 1.0))
            if self.c <= 0:
                raise ConfigError(f"constant reward needs c > 0, got {self.c}")
        elif kind == 'rational':
            self.num = Polynomial(np.asarray(self._require('num'), dtype=float))
            self.den = Polynomial(np.asarray(self._require('den'), dtype=float))
            self._dnum = [self.num.deriv(1), self.num.deriv(2)]
            self._dden = [self.den.deriv(1), self.den.deriv(2)]
        elif kind == 'table':
            xs = np.asarray(self._require('x'), dtype=float)
            gs = np.asarray(self._require('g'), dtype=float)
            if xs.size < 4 or xs.size != gs.size or np.any(np.diff(xs) <= 0):
                raise ConfigError("table reward needs >= 4 strictly increasing x samples with matching g")
            self.spline = CubicSpline(xs, gs, bc_type='natural')
            self._antiderivative = self.spline.antiderivative()
            logger.debug("table reward: derivatives carry O(h^2) interpolation error")

    def _require(self, key):
        if key not in self.params:
            raise ConfigError(f"{self.kind} reward is missing '{key}'")
        return self.params[key]

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict) or 'kind' not in data:
            raise ConfigError(f"malformed reward description: {data!r}")
        params = {k: v for k, v in data.items() if k not in ('kind', 'scale')}
        return cls(data['kind'], params, float(data.get('scale', 1.0)))

    @classmethod
    def from_file(cls, path):
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
        logger.debug(f"loaded reward from {path}: {data}")
        return cls.from_dict(data)

    def to_dict(self):
        out = {'kind': self.kind}
        out.update(self.params)
        if self.scale != 1.0:
            out['scale'] = self.scale
        return out

    def scaled(self, factor):
        """Same reward multiplied by factor > 0."""
        return RewardFunction(self.kind, self.params, self.scale * factor)

    # --- evaluation -------------------------------------------------------

    def _rational(self, x):
        d = self.den(x)
        if np.any(np.abs(d) < DENOMINATOR_EPS):
            bad = np.atleast_1d(x)[np.abs(np.atleast_1d(d)) < DENOMINATOR_EPS]
            raise DomainError(f"denominator of the rational reward vanishes at x={bad[:3].tolist()}")
        n = self.num(x)
        n1, n2 = self._dnum[0](x), self._dnum[1](x)
        d1, d2 = self._dden[0](x), self._dden[1](x)
        g = n / d
        top = n1 * d - n * d1
        g1 = top / d ** 2
        g2 = ((n2 * d - n * d2) * d - 2.0 * d1 * top) / d ** 3
        return g, g1, g2

    def evaluate(self, x):
        """(g, g', g'') at x (scalar or array)."""
        scalar = np.ndim(x) == 0
        x = np.asarray(x, dtype=float)
        if self.kind == 'power':
            a = self.alpha
            with np.errstate(divide='ignore', invalid='ignore'):
                g = np.power(x, a)
                g1 = a * np.power(x, a - 1.0) if a != 0 else np.zeros_like(x)
                g2 = a * (a - 1.0) * np.power(x, a - 2.0) if a not in (0.0, 1.0) else np.zeros_like(x)
        elif self.kind == 'exp':
            b = self.beta
            g = np.exp(-b * x)
            g1 = -b * g
            g2 = b * b * g
        elif self.kind == 'constant':
            g = np.full_like(x, self.c)
            g1 = np.zeros_like(x)
            g2 = np.zeros_like(x)
        elif self.kind == 'rational':
            g, g1, g2 = self._rational(x)
        else:
            g, g1, g2 = self.spline(x), self.spline(x, 1), self.spline(x, 2)
        g, g1, g2 = (self.scale * np.asarray(v, dtype=float) for v in (g, g1, g2))
        if scalar:
            return float(g), float(g1), float(g2)
        return g, g1, g2

    def g(self, x):
        return self.evaluate(x)[0]

    def g1(self, x):
        return self.evaluate(x)[1]

    def g2(self, x):
        return self.evaluate(x)[2]

    def _rational_g(self, x):
        return self._rational(x)[0]

    def _grow_panels(self, k_max):
        """Extend the cumulative panel integrals so that index k_max exists."""
        have = self._panels.size - 1
        if k_max <= have:
            return
        nodes, weights = gauss_legendre(G_PANEL_NODES)
        h = G_PANEL_WIDTH
        lo = h * np.arange(have, k_max)
        x = (lo + 0.5 * h)[:, None] + 0.5 * h * nodes[None, :]
        pieces = 0.5 * h * (self._rational_g(x) @ weights)
        self._panels = np.concatenate([self._panels, self._panels[-1] + np.cumsum(pieces)])

    def _rational_G(self, x):
        h = G_PANEL_WIDTH
        k = np.floor(x / h).astype(int)
        self._grow_panels(int(k.max()) if k.size else 0)
        nodes, weights = gauss_legendre(G_PANEL_NODES)
        lo = k * h
        half = 0.5 * (x - lo)
        pts = (lo + half)[..., None] + half[..., None] * nodes
        return self._panels[k] + half * (self._rational_g(pts) @ weights)

    def antiderivative(self, x):
        """G(x) = int_0^x g(y) dy for x >= 0."""
        scalar = np.ndim(x) == 0
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.kind == 'power':
            G = np.power(x, self.alpha + 1.0) / (self.alpha + 1.0)
        elif self.kind == 'exp':
            G = x if self.beta == 0 else -np.expm1(-self.beta * x) / self.beta
        elif self.kind == 'constant':
            G = self.c * x
        elif self.kind == 'rational':
            G = self._rational_G(x)
        else:
            G = self._antiderivative(x) - self._antiderivative(0.0)
        G = self.scale * np.asarray(G, dtype=float)
        return float(G) if scalar else G

    def __repr__(self):
        return f"RewardFunction({self.to_dict()})"


def g_eval(r: RewardFunction, x):
    return r.evaluate(x)


def G_eval(r: RewardFunction, x):
    return r.antiderivative(x)


def lump_reward(r: RewardFunction, start, target):
    """Reward G(start) - G(target) of an instantaneous push from start down to target."""
    if start < target:
        raise InvalidPush(f"a push goes downwards: from={start} < to={target}")
    if start == target:
        return 0.0
    return r.antiderivative(start) - r.antiderivative(target)


def check_growth(r: RewardFunction, phi):
    """
    Heuristic for g(z) = o(exp(Phi(q) z)): g(z) exp(-Phi z) must decrease
    along z = k * 10 / Phi, k = 1..5. Logs a warning and returns False if not.
    """
    z = 10.0 * np.arange(1, 6) / phi
    with np.errstate(over='ignore', invalid='ignore'):
        damped = r.g(z) * np.exp(-phi * z)
    ok = bool(np.all(np.isfinite(damped)) and np.all(np.diff(damped) < 0))
    if not ok:
        logger.warning(f"   reward {r.kind} may grow faster than exp(Phi(q) z) with Phi(q)={phi:.6g}; "
                       f"g(z)exp(-Phi z) at z={z.round(3).tolist()}: {damped.tolist()}")
    return ok


def generator_of_reward(model, r: RewardFunction, x):
    """(L - q) g = sigma^2 g''/2 + mu g' - q g, Brownian models only."""
    if not model.is_brownian:
        raise UnsupportedModel("(L - q)g is only formed for Brownian models")
    g, g1, g2 = r.evaluate(x)
    return 0.5 * model.sigma2 * g2 + model.mu * g1 - model.q * g
