"""
# Description: Barrier sets b_1 < b_2 < ... < b_{2n+1} and the piecewise
#              closed-form value function of the corresponding strategy:
#
#                [0, b_1]                 g(b_1) W(x) / W'(b_1)
#                [b_{2k+1}, b_{2k+2}]     push:  G(x) - G(b_{2k+1}) + K_k
#                (b_{2k}, b_{2k+1})       wait:  H_k Z(x - b_{2k}) + W(x - b_{2k}) F_k
#
#              with the constants
#                K_0 = g(b_1) W(b_1) / W'(b_1)
#                H_k = G(b_{2k}) - G(b_{2k-1}) + K_{k-1}
#                F_k = (g(b_{2k+1}) - q H_k W(d_k)) / W'(d_k),   d_k = b_{2k+1} - b_{2k}
#                K_k = H_k Z(d_k) + W(d_k) F_k
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from barropt_logging.logger_config import logger
from utils.errors import ConfigError, OutOfRegime, UnsupportedModel


logger = logging.getLogger('solve.barrier_set')


@dataclass(frozen=True)
class BarrierSet:
    levels: Tuple[float, ...]

    def __post_init__(self):
        levels = tuple(float(b) for b in self.levels)
        object.__setattr__(self, 'levels', levels)
        if len(levels) % 2 != 1:
            raise ConfigError(f"a barrier set has an odd number of levels, got {len(levels)}")
        if levels[0] < 0 or not all(np.isfinite(levels)):
            raise ConfigError(f"barriers must be finite and non-negative, got {list(levels)}")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigError(f"barriers must be strictly increasing, got {list(levels)}")

    @classmethod
    def parse(cls, text):
        """'0.9165,1.1496,2.1925' -> BarrierSet."""
        try:
            return cls(tuple(float(s) for s in str(text).split(',') if s.strip()))
        except ValueError as e:
            raise ConfigError(f"cannot parse barriers '{text}': {e}") from e

    @property
    def n(self):
        """Number of (even, odd) pairs above b_1."""
        return (len(self.levels) - 1) // 2

    @property
    def last(self):
        return self.levels[-1]

    def odd(self, k):
        """b_{2k+1}, k = 0..n."""
        return self.levels[2 * k]

    def even(self, k):
        """b_{2k}, k = 1..n."""
        return self.levels[2 * k - 1]

    def truncated(self, k):
        """The prefix b_1, ..., b_{2k+1}."""
        if not 0 <= k <= self.n:
            raise ConfigError(f"cannot truncate {self.n}-pair barrier set to {k} pairs")
        return BarrierSet(self.levels[:2 * k + 1])

    def extended(self, even, odd):
        return BarrierSet(self.levels + (even, odd))

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


class ValueFunction:
    """Expected reward of the barrier strategy for `bset`, with V', V'' and regime tags."""

    def __init__(self, sf, reward, bset: BarrierSet):
        # the wait-region formula above b_2 holds for Brownian motion only
        if bset.n >= 1 and not sf.model.is_brownian:
            raise UnsupportedModel(f"barrier sets with more than one level need a Brownian model, "
                                   f"got {len(bset)} levels on a model with jumps")
        self.sf = sf
        self.reward = reward
        self.bset = bset
        q = sf.q

        b1 = bset.odd(0)
        g1 = reward.g(b1)
        self.slope0 = g1 / sf.w1(b1)  # V = slope0 * W on [0, b_1]
        K = [self.slope0 * sf.w(b1)]
        H, F = [np.nan], [np.nan]
        for k in range(1, bset.n + 1):
            lo, hi = bset.even(k), bset.odd(k)
            h_k = reward.antiderivative(lo) - reward.antiderivative(bset.odd(k - 1)) + K[k - 1]
            d = hi - lo
            f_k = (reward.g(hi) - q * h_k * sf.w(d)) / sf.w1(d)
            H.append(h_k)
            F.append(f_k)
            K.append(h_k * sf.z(d) + sf.w(d) * f_k)
        self.H = np.array(H)
        self.F = np.array(F)
        self.K = np.array(K)
        logger.debug(f"value function constants for {list(bset.levels)}: H={self.H[1:].tolist()} "
                     f"F={self.F[1:].tolist()} K={self.K.tolist()}")

    @property
    def n(self):
        return self.bset.n

    @property
    def pasting_points(self):
        return self.bset.levels

    def h(self, x, k=None):
        """H(x; b_{2k+1}) = G(x) - G(b_{2k+1}) + K_k; defaults to the top level."""
        k = self.n if k is None else k
        return self.reward.antiderivative(x) - self.reward.antiderivative(self.bset.odd(k)) + self.K[k]

    def phi(self, x, k=None):
        """(phi, phi', phi'') on the wait region (b_{2k}, b_{2k+1})."""
        k = self.n if k is None else k
        if k < 1:
            raise OutOfRegime("there is no wait region above b_1 in a one-barrier set")
        sf, q = self.sf, self.sf.q
        y = np.asarray(x, dtype=float) - self.bset.even(k)
        h_k, f_k = self.H[k], self.F[k]
        w, w1, w2 = sf.w(y), sf.w1(y), sf.w2(y)
        value = h_k * sf.z(y) + w * f_k
        d1 = q * h_k * w + w1 * f_k
        d2 = q * h_k * w1 + w2 * f_k
        return value, d1, d2

    def regime_index(self, x, side='right'):
        """
        Number of barriers at or below x (side='right') or strictly below x
        (side='left'). 0 is the region under b_1, odd values are push regions,
        even values >= 2 are wait regions.
        """
        return np.searchsorted(np.asarray(self.bset.levels), x, side='right' if side == 'right' else 'left')

    def evaluate(self, x, side='right'):
        """
        V, V', V'' at x. At a barrier `side` selects which piece supplies the
        one-sided derivatives. Returns (V, V1, V2, tags).
        """
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        sf, r = self.sf, self.reward
        V = np.zeros_like(x)
        V1 = np.zeros_like(x)
        V2 = np.zeros_like(x)
        tags = np.empty(x.shape, dtype=object)

        idx = self.regime_index(x, side)
        below = (idx == 0)
        tags[:] = 'ruin'
        pos = below & (x >= 0)
        if np.any(pos):
            xs = x[pos]
            V[pos] = self.slope0 * sf.w(xs)
            V1[pos] = self.slope0 * sf.w1(xs)
            V2[pos] = self.slope0 * sf.w2(xs)
            tags[pos] = 'wait0'

        for k in range(self.n + 1):
            push = idx == 2 * k + 1
            if np.any(push):
                xs = x[push]
                g, g1, _ = r.evaluate(xs)
                V[push] = self.h(xs, k)
                V1[push] = g
                V2[push] = g1
                tags[push] = f'push{k}'
            if k >= 1:
                wait = idx == 2 * k
                if np.any(wait):
                    V[wait], V1[wait], V2[wait] = self.phi(x[wait], k)
                    tags[wait] = f'wait{k}'

        if scalar:
            return float(V[0]), float(V1[0]), float(V2[0]), tags[0]
        return V, V1, V2, tags

    def __call__(self, x):
        return self.evaluate(x)[0]
