"""
# Description: The uncontrolled spectrally negative Levy process. A model is a
#              Brownian motion with drift, optionally plus a compound Poisson
#              part with hyperexponential (completely monotone) downward jumps,
#              together with the discount rate q.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import yaml

from barropt_logging.logger_config import logger
from utils.errors import ModelError, DegenerateModel
from utils.numerics import bisect_sign, newton_polish


logger = logging.getLogger('levy.levy_model')

ALPHA_SEPARATION = 1e-9
ROOT_WIDTH = 1e-14


@dataclass(frozen=True)
class Phase:
    p: float
    alpha: float


@dataclass(frozen=True)
class HyperExpJumps:
    lam: float
    phases: Tuple[Phase, ...]

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ModelError(f"jump intensity must be positive, got {self.lam}")
        if len(self.phases) == 0:
            raise ModelError("hyperexponential jumps need at least one phase")
        weights = np.array([ph.p for ph in self.phases], dtype=float)
        rates = np.array([ph.alpha for ph in self.phases], dtype=float)
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise ModelError(f"phase weights must be positive, got {weights.tolist()}")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ModelError(f"phase weights must sum to 1, got {weights.sum()!r}")
        if np.any(~np.isfinite(rates)) or np.any(rates <= 0):
            raise ModelError(f"phase rates must be positive, got {rates.tolist()}")
        ordered = np.sort(rates)
        gaps = np.diff(ordered)
        if np.any(gaps <= ALPHA_SEPARATION * ordered[1:]):
            raise DegenerateModel(
                f"phase rates {rates.tolist()} are not pairwise distinct; merge the coincident phases")

    @property
    def weights(self):
        return np.array([ph.p for ph in self.phases], dtype=float)

    @property
    def rates(self):
        return np.array([ph.alpha for ph in self.phases], dtype=float)

    def density(self, z):
        """Levy density nu(z) = lam * sum p_j alpha_j exp(-alpha_j z) for z > 0."""
        z = np.asarray(z, dtype=float)
        terms = self.weights * self.rates * np.exp(-np.multiply.outer(z, self.rates))
        return np.where(z > 0, self.lam * terms.sum(axis=-1), 0.0)

    def sample_sizes(self, rng, n):
        """Draw n jump sizes from the phase mixture."""
        phase = rng.choice(len(self.phases), size=n, p=self.weights)
        return rng.exponential(1.0, size=n) / self.rates[phase]


@dataclass(frozen=True)
class LevyModel:
    mu: float
    sigma: float
    q: float
    jumps: Optional[HyperExpJumps] = None

    def __post_init__(self):
        for name in ('mu', 'sigma', 'q'):
            if not np.isfinite(getattr(self, name)):
                raise ModelError(f"{name} must be finite")
        if self.q <= 0:
            raise ModelError(f"discount rate q must be positive, got {self.q}")
        if self.sigma < 0:
            raise ModelError(f"volatility must be non-negative, got {self.sigma}")
        if self.jumps is None and self.sigma == 0:
            raise ModelError("a model without jumps needs sigma > 0")
        if self.sigma == 0 and self.mu <= 0:
            raise ModelError("with sigma = 0 the drift must be positive (non-monotone paths)")

    @property
    def is_brownian(self):
        return self.jumps is None

    @property
    def sigma2(self):
        return self.sigma * self.sigma

    @classmethod
    def from_dict(cls, data):
        try:
            jumps = None
            if data.get('jumps') is not None:
                raw = data['jumps']
                phases = tuple(Phase(float(ph['p']), float(ph['alpha'])) for ph in raw['phases'])
                jumps = HyperExpJumps(float(raw['lambda']), phases)
            return cls(float(data['mu']), float(data['sigma']), float(data['q']), jumps)
        except (KeyError, TypeError) as e:
            raise ModelError(f"malformed model description: {e}") from e

    @classmethod
    def from_file(cls, path):
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
        logger.debug(f"loaded model from {path}: {data}")
        return cls.from_dict(data)

    def to_dict(self):
        out = {'mu': self.mu, 'sigma': self.sigma, 'q': self.q}
        if self.jumps is not None:
            out['jumps'] = {'lambda': self.jumps.lam,
                            'phases': [{'p': ph.p, 'alpha': ph.alpha} for ph in self.jumps.phases]}
        return out

    def to_json(self):
        return json.dumps(self.to_dict())


def laplace_exponent(model: LevyModel, theta):
    """
    psi(theta) = mu*theta + sigma^2 theta^2 / 2 + lam (sum p_j alpha_j / (alpha_j + theta) - 1).

    Defined for theta >= 0; the rational continuation to theta > -min(alpha_j)
    (and between the poles) is what the root finder works with.
    """
    theta = np.asarray(theta, dtype=float)
    value = model.mu * theta + 0.5 * model.sigma2 * theta * theta
    if model.jumps is not None:
        a = model.jumps.rates
        p = model.jumps.weights
        ratio = (p * a / (a + theta[..., None])).sum(axis=-1)
        value = value + model.jumps.lam * (ratio - 1.0)
    return value if value.ndim else float(value)


def laplace_exponent_prime(model: LevyModel, theta):
    theta = np.asarray(theta, dtype=float)
    value = model.mu + model.sigma2 * theta
    if model.jumps is not None:
        a = model.jumps.rates
        p = model.jumps.weights
        value = value - model.jumps.lam * (p * a / (a + theta[..., None]) ** 2).sum(axis=-1)
    return value if value.ndim else float(value)


def _brownian_roots(model):
    """(-zeta_1, Phi(q)) in cancellation-free form."""
    delta = math.sqrt(model.mu ** 2 + 2.0 * model.q * model.sigma2)
    if model.mu >= 0:
        phi = 2.0 * model.q / (delta + model.mu)
        zeta = (delta + model.mu) / model.sigma2
    else:
        phi = (delta - model.mu) / model.sigma2
        zeta = 2.0 * model.q / (delta - model.mu)
    return -zeta, phi


def phi_q(model: LevyModel):
    """Phi(q), the largest root of psi(theta) = q."""
    if model.is_brownian:
        return _brownian_roots(model)[1]

    def f(theta):
        return laplace_exponent(model, theta) - model.q

    def df(theta):
        return laplace_exponent_prime(model, theta)

    hi = 1.0
    while f(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise ModelError("Laplace exponent does not reach q; model is not spectrally negative")
    root = bisect_sign(f, 0.0, hi, -1, width=ROOT_WIDTH)
    return newton_polish(f, df, root, 0.0, hi)


def psi_roots(model: LevyModel):
    """
    All real roots of psi(theta) = q, sorted ascending.

    Brownian case: (-zeta_1, Phi(q)). Hyperexponential case: one root in
    each gap between consecutive poles -alpha_j, one in (-alpha_1, 0), one
    positive root, and (sigma > 0 only) one below the most negative pole.
    """
    if model.is_brownian:
        return np.array(_brownian_roots(model))

    def f(theta):
        return laplace_exponent(model, theta) - model.q

    def df(theta):
        return laplace_exponent_prime(model, theta)

    rates = np.sort(model.jumps.rates)
    roots = [phi_q(model)]

    # just right of each pole psi -> +inf, just left of it psi -> -inf
    brackets = [(-rates[0], 0.0)]
    for j in range(rates.size - 1):
        brackets.append((-rates[j + 1], -rates[j]))
    for lo, hi in brackets:
        if hi - lo <= ALPHA_SEPARATION * max(1.0, abs(lo)):
            raise DegenerateModel(f"root bracket ({lo}, {hi}) collapsed")
        root = bisect_sign(f, lo, hi, +1, width=ROOT_WIDTH)
        roots.append(newton_polish(f, df, root, lo, hi))

    if model.sigma > 0:
        hi = -rates[-1]
        step = 1.0
        lo = hi - step
        while f(lo) <= 0:
            step *= 2.0
            lo = hi - step
            if step > 1e12:
                raise DegenerateModel("no root below the smallest pole")
        root = bisect_sign(f, lo, hi, +1, width=ROOT_WIDTH)
        roots.append(newton_polish(f, df, root, lo, hi))

    return np.sort(np.array(roots, dtype=float))
