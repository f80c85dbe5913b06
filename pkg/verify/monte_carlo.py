"""
# Description: Monte Carlo oracle for the expected reward of a barrier
#              strategy, independent of the scale-function formulas.
#
#              Per path: an initial lump G(x0) - G(b_{2k+1}) when x0 starts in a
#              push region, reflection at the active odd barrier with reward
#              e^{-q t} g(b) dL, a lump G(b_{2k}) - G(b_{2k-1}) and a regime step
#              down each time the path reaches the even barrier b_{2k}, ruin
#              below 0. Gaussian increments are exact. Without the bridge
#              correction the reflection and the barrier checks only look at
#              the grid points, a bias of order sqrt(dt). With it, the
#              reflection follows the sampled maximum of each Brownian step and
#              the downward checks use the bridge crossing probability.
#
#              Paths are simulated in fixed-size blocks, each with its own
#              Philox stream spawned from SeedSequence(seed), so the estimate
#              does not depend on the number of workers.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd

from barropt_logging.logger_config import logger
from levy.levy_model import LevyModel
from levy.reward import RewardFunction
from solve.barrier_set import BarrierSet
from utils.errors import ConfigError, UnsupportedModel


logger = logging.getLogger('verify.monte_carlo')


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 10000
    dt: float = 1e-4
    horizon: float = 200.0
    seed: int = 42
    x0: float = 0.0
    antithetic: bool = False
    bridge_correction: bool = False
    block_size: int = 2000
    threads: int = 1

    def validate(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.dt >= self.horizon:
            raise ConfigError(f"dt={self.dt} must be smaller than the horizon {self.horizon}")
        if self.n_paths < 2:
            raise ConfigError(f"need at least 2 paths, got {self.n_paths}")
        if self.block_size < 2 or (self.antithetic and self.block_size % 2):
            raise ConfigError(f"block_size must be >= 2 (and even with antithetic pairs), got {self.block_size}")
        if self.x0 < 0:
            raise ConfigError(f"x0 must be non-negative, got {self.x0}")
        return self

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return SimConfig(**data)


@dataclass
class SimEstimate:
    mean: float
    stderr: float
    n_paths: int
    n_ruined: int
    truncation_bound: float

    def ci(self, z=1.96):
        return self.mean - z * self.stderr, self.mean + z * self.stderr

    def to_dict(self):
        out = asdict(self)
        out['ci95'] = list(self.ci())
        return out


class _Strategy:
    """Everything a block needs, precomputed once in the parent process."""

    def __init__(self, model: LevyModel, reward: RewardFunction, bset: BarrierSet, cfg: SimConfig):
        self.model = model
        self.cfg = cfg
        levels = np.asarray(bset.levels)
        self.odd = levels[0::2]                       # b_1, b_3, ...
        self.even = np.concatenate([[-np.inf], levels[1::2]])  # even[k] = b_{2k}, k >= 1
        self.g_odd = np.asarray(reward.g(self.odd), dtype=float)
        G_odd = np.asarray(reward.antiderivative(self.odd), dtype=float)
        G_even = np.asarray(reward.antiderivative(levels[1::2]), dtype=float)
        # lump paid when regime k falls through b_{2k}: G(b_{2k}) - G(b_{2k-1})
        self.switch_lump = np.concatenate([[0.0], G_even - G_odd[:-1]])
        self.drop = np.concatenate([[0.0], levels[1::2] - levels[0:-1:2]])

        x0 = cfg.x0
        idx = int(np.searchsorted(levels, x0, side='right'))
        if idx == 0:
            self.k0, self.start, self.lump0 = 0, x0, 0.0
        elif idx % 2 == 1:
            k = (idx - 1) // 2
            self.k0, self.start = k, self.odd[k]
            self.lump0 = float(reward.antiderivative(x0) - G_odd[k])
        else:
            self.k0, self.start, self.lump0 = idx // 2, x0, 0.0


def init_worker(strategy):
    """Initialize worker process with the shared strategy"""
    global shared_strategy
    shared_strategy = strategy


def _gaussian(rng, n, antithetic):
    if not antithetic:
        return rng.standard_normal(n)
    half = rng.standard_normal(n // 2)
    return np.concatenate([half, -half])


def _bridge_max(rng, x, y, sd):
    """Sample the maximum of a Brownian bridge from x to y with variance sd^2 over the step."""
    u = 1.0 - rng.random(x.size)
    return 0.5 * (x + y + np.sqrt((y - x) ** 2 - 2.0 * sd * sd * np.log(u)))


def _crossed_below(rng, x, y, level, sd, bridge):
    """Whether the step from x to y went below level, with the bridge crossing probability if asked."""
    crossed = y <= level
    if bridge and sd > 0:
        near = np.flatnonzero(~crossed)
        p = np.exp(-2.0 * (x[near] - level[near]) * (y[near] - level[near]) / (sd * sd))
        crossed[near[rng.random(near.size) < p]] = True
    return crossed


def _run_block(index, seed_seq, n, trace=False):
    """Simulate one block of paths; returns per-path totals and ruin flags (and the trace)."""
    st = shared_strategy
    model, cfg = st.model, st.cfg
    rng = np.random.Generator(np.random.Philox(seed_seq))
    dt = cfg.dt
    sd = model.sigma * math.sqrt(dt)
    exact = cfg.bridge_correction and sd > 0
    steps = int(math.ceil(cfg.horizon / dt))

    X = np.full(n, st.start, dtype=float)
    k = np.full(n, st.k0, dtype=int)
    total = np.full(n, st.lump0, dtype=float)
    L = np.zeros(n)
    alive = X > 0 if model.sigma > 0 else X >= 0
    rows = []

    for i in range(steps):
        live = np.flatnonzero(alive)
        if not live.size:
            break
        disc = math.exp(-model.q * (i + 0.5) * dt)
        x, kk = X[live], k[live]
        tot, ll = total[live], L[live]
        top = st.odd[kk]

        y = x + model.mu * dt
        if sd > 0:
            # antithetic partners stay paired through the full-block draw
            z = _gaussian(rng, n, True)[live] if cfg.antithetic else rng.standard_normal(live.size)
            y = y + sd * z
        if exact:
            # reflection at the top barrier through the running maximum of the step
            dl = np.maximum(_bridge_max(rng, x, y, sd) - top, 0.0)
            tot += disc * st.g_odd[kk] * dl
            ll += dl
            y = y - dl
        cont = y.copy()
        if model.jumps is not None:
            counts = rng.poisson(model.jumps.lam * dt, live.size)
            hit = np.flatnonzero(counts)
            if hit.size:
                sizes = model.jumps.sample_sizes(rng, int(counts[hit].sum()))
                y = y - np.bincount(np.repeat(hit, counts[hit]), weights=sizes, minlength=live.size)

        # regime step down at b_{2k}, possibly several in one step
        for _ in range(st.even.size - 1):
            down = kk > 0
            if not down.any():
                break
            level = st.even[kk]
            crossed = down & (_crossed_below(rng, x, cont, level, sd, cfg.bridge_correction) | (y <= level))
            if not crossed.any():
                break
            drop = st.drop[kk[crossed]]
            tot[crossed] += disc * st.switch_lump[kk[crossed]]
            ll[crossed] += drop
            y[crossed] -= drop
            cont[crossed] -= drop
            x = np.where(crossed, st.odd[np.maximum(kk - 1, 0)], x)
            kk[crossed] -= 1

        ruined = y <= 0 if model.sigma > 0 else y < 0
        if cfg.bridge_correction and sd > 0:
            ruined |= _crossed_below(rng, x, cont, np.zeros(live.size), sd, True)

        top = st.odd[kk]
        dl = np.where(ruined, 0.0, np.maximum(y - top, 0.0))
        tot += disc * st.g_odd[kk] * dl
        ll += dl
        X[live] = np.where(ruined, np.minimum(y, 0.0), np.minimum(y, top))
        k[live] = kk
        total[live] = tot
        L[live] = ll
        alive[live[ruined]] = False

        if trace:
            rows.append(pd.DataFrame({'path': np.arange(n), 't': (i + 1) * dt, 'X': X.copy(), 'L': L.copy(),
                                      'regime': k.copy(), 'reward': total.copy(), 'alive': alive.copy()}))

    if trace:
        return pd.concat(rows, ignore_index=True) if rows else pd.DataFrame()
    return index, total, ~alive


def _blocks(cfg):
    sizes = [cfg.block_size] * (cfg.n_paths // cfg.block_size)
    rest = cfg.n_paths - sum(sizes)
    if rest:
        rest += rest % 2 if cfg.antithetic else 0
        sizes.append(rest)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    return list(zip(range(len(sizes)), seeds, sizes))


def _check_supported(model, bset):
    if model.jumps is not None and len(bset) > 1:
        raise UnsupportedModel("jump models are simulated under one-barrier strategies only")


def simulate_value(model: LevyModel, reward: RewardFunction, bset: BarrierSet, cfg: SimConfig = SimConfig()):
    """Estimate the expected discounted reward of the strategy for bset started at cfg.x0."""
    cfg.validate()
    _check_supported(model, bset)
    strategy = _Strategy(model, reward, bset, cfg)
    blocks = _blocks(cfg)
    logger.info(f"   simulating {cfg.n_paths} paths in {len(blocks)} blocks "
                f"(dt={cfg.dt:g}, horizon={cfg.horizon:g}, workers={cfg.threads})")

    results = []
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads, initializer=init_worker, initargs=(strategy,)) as executor:
            futures = [executor.submit(_run_block, i, ss, n) for i, ss, n in blocks]
            for future in futures:
                results.append(future.result())
    else:
        init_worker(strategy)
        for i, ss, n in blocks:
            results.append(_run_block(i, ss, n))

    results.sort(key=lambda item: item[0])
    totals = np.concatenate([t for _, t, _ in results])
    ruined = int(sum(int(rz.sum()) for _, _, rz in results))
    samples = totals
    if cfg.antithetic:
        # pairs sit in the two halves of every block
        pairs = []
        for _, t, _ in results:
            half = t.size // 2
            pairs.append(0.5 * (t[:half] + t[half:2 * half]))
        samples = np.concatenate(pairs)
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(samples.size))
    bound = math.exp(-model.q * cfg.horizon) * float(np.max(totals)) if totals.size else 0.0
    logger.info(f"   estimate {mean:.8g} +/- {stderr:.2g} ({ruined} paths ruined before T)")
    return SimEstimate(mean, stderr, int(totals.size), ruined, bound)


def simulate_paths(model: LevyModel, reward: RewardFunction, bset: BarrierSet, cfg: SimConfig = SimConfig(),
                   n_trace=10, every=1):
    """Step-by-step trace (path, t, X, L, regime, reward, alive) of n_trace paths."""
    cfg.validate()
    _check_supported(model, bset)
    if n_trace > cfg.n_paths:
        raise ConfigError(f"cannot trace {n_trace} of {cfg.n_paths} paths")
    init_worker(_Strategy(model, reward, bset, cfg))
    seed = np.random.SeedSequence(cfg.seed).spawn(1)[0]
    n = n_trace + (n_trace % 2 if cfg.antithetic else 0)
    table = _run_block(0, seed, n, trace=True)
    if table.empty:
        return table
    table = table[table['path'] < n_trace]
    steps = np.rint(table['t'] / cfg.dt).astype(int)
    return table[steps % every == 0].reset_index(drop=True)


def first_passage_up(model: LevyModel, x, a, b, cfg: SimConfig = SimConfig()):
    """
    Monte Carlo estimates of E_x[e^{-q tau_a+}; tau_a+ < tau_b-] and
    E_x[e^{-q tau_b-}; tau_b- < tau_a+] for the uncontrolled process.
    """
    cfg.validate()
    if not (a > b and b <= x <= a):
        raise ConfigError(f"need b <= x <= a with a > b, got b={b}, x={x}, a={a}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    n = cfg.n_paths
    sd = model.sigma * math.sqrt(cfg.dt)
    X = np.full(n, float(x))
    up = np.zeros(n)
    down = np.zeros(n)
    active = np.ones(n, dtype=bool)
    if x >= a:
        up[:] = 1.0
        active[:] = False
    elif x <= b and model.sigma > 0:
        down[:] = 1.0
        active[:] = False
    steps = int(math.ceil(cfg.horizon / cfg.dt))
    for i in range(steps):
        if not active.any():
            break
        t = (i + 1) * cfg.dt
        cont = X + model.mu * cfg.dt + (sd * rng.standard_normal(n) if sd > 0 else 0.0)
        x_new = cont
        if model.jumps is not None:
            counts = rng.poisson(model.jumps.lam * cfg.dt, n)
            hit = np.flatnonzero(counts)
            if hit.size:
                sizes = model.jumps.sample_sizes(rng, int(counts[hit].sum()))
                x_new = cont - np.bincount(np.repeat(hit, counts[hit]), weights=sizes, minlength=n)
        # jumps land at the end of the step, after the continuous part
        above = active & (cont >= a)
        if cfg.bridge_correction and sd > 0:
            near = np.flatnonzero(active & ~above)
            p = np.exp(-2.0 * (a - X[near]) * (a - cont[near]) / (sd * sd))
            above[near[rng.random(near.size) < p]] = True
        below = active & ~above & (x_new <= b)
        if cfg.bridge_correction and sd > 0:
            near = np.flatnonzero(active & ~above & ~below)
            p = np.exp(-2.0 * (X[near] - b) * (cont[near] - b) / (sd * sd))
            below[near[rng.random(near.size) < p]] = True
        disc = math.exp(-model.q * t)
        up[above] = disc
        down[below] = disc
        active &= ~(above | below)
        X = x_new
    return {
        'up': float(up.mean()), 'up_stderr': float(up.std(ddof=1) / math.sqrt(n)),
        'down': float(down.mean()), 'down_stderr': float(down.std(ddof=1) / math.sqrt(n)),
    }
