"""Stock path simulation and the state variables used by the hedging solvers.

Paths follow a geometric Brownian motion simulated under the physical
measure with an exact log-normal step, which keeps every price strictly
positive. Three state representations are supported: the raw price, the
log price, and a drift-adjusted log price whose increments are a pure
martingale.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class StateKind(Enum):
    """Which transformation of the simulated price feeds the solvers.

    LOG_RETURN is the per-step change of the log price (zero at time 0),
    a nearly memoryless state; LOG_PRICE is the cumulative log price.
    """

    PRICE = "price"
    LOG_PRICE = "log-price"
    LOG_RETURN = "log-return"
    DRIFT_ADJUSTED = "drift-adjusted"

    @classmethod
    def parse(cls, name: str) -> "StateKind":
        for kind in cls:
            if kind.value == name or kind.name.lower() == name.lower():
                return kind
        raise ValueError(f"unknown state kind {name!r}")


# The trio the benchmark studies sweep over.
BENCHMARK_STATE_KINDS = (StateKind.DRIFT_ADJUSTED, StateKind.PRICE,
                         StateKind.LOG_RETURN)


@dataclass(frozen=True)
class MarketParams:
    """GBM dynamics and contract discretization.

    Rates are annualized: ``mu`` and ``r`` per year, ``sigma`` per
    sqrt-year, ``maturity`` in years.
    """

    s0: float
    mu: float
    sigma: float
    r: float
    maturity: float
    n_steps: int
    n_paths: int
    seed: int = 0

    def __post_init__(self):
        for name in ("s0", "mu", "sigma", "r", "maturity"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.s0 <= 0:
            raise ValueError("s0 must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")

    @property
    def dt(self) -> float:
        return self.maturity / self.n_steps

    @property
    def discount(self) -> float:
        """Per-step discount factor exp(-r * dt)."""
        return math.exp(-self.r * self.dt)


def _freeze(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PathSet:
    """Simulated (or loaded) price paths, one row per path.

    ``prices`` has shape (n_paths, n_steps + 1); column 0 is the common
    spot price.
    """

    prices: np.ndarray
    dt: float
    params: MarketParams

    def __post_init__(self):
        prices = _freeze(self.prices)
        object.__setattr__(self, "prices", prices)
        if prices.ndim != 2 or prices.shape[1] < 2:
            raise ValueError("prices must be a 2-D matrix with at least one step")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise ValueError("prices must be finite and strictly positive")
        if not np.allclose(prices[:, 0], prices[0, 0]):
            raise ValueError("all paths must start from the same spot")
        if not np.isclose(prices[0, 0], self.params.s0):
            raise ValueError("paths must start at the declared spot price")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]

    @property
    def n_steps(self) -> int:
        return self.prices.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class StateSeries:
    """Per-path state values, same layout as PathSet.prices."""

    values: np.ndarray
    kind: StateKind

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))


@dataclass(frozen=True)
class Increments:
    """Forward price increments net of risk-free growth.

    ``delta_s[k, t] = S[k, t+1] - exp(r*dt) * S[k, t]`` and
    ``delta_s_hat`` is the same matrix demeaned within each time column.
    """

    delta_s: np.ndarray
    delta_s_hat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta_s", _freeze(self.delta_s))
        object.__setattr__(self, "delta_s_hat", _freeze(self.delta_s_hat))


def simulate_gbm(params: MarketParams) -> PathSet:
    """Simulate GBM paths with the exact log-normal step.

    log S advances by (mu - sigma^2/2) dt + sigma sqrt(dt) eps per step.
    Each path draws from its own substream (``SeedSequence(seed)`` spawned
    once per path), so serial and path-parallel generation produce the
    same matrix for a given seed.
    """
    n_paths, n_steps = params.n_paths, params.n_steps
    dt = params.dt
    children = np.random.SeedSequence(params.seed).spawn(n_paths)
    shocks = np.empty((n_paths, n_steps))
    for k, child in enumerate(children):
        shocks[k] = np.random.Generator(np.random.PCG64(child)).standard_normal(n_steps)

    drift = (params.mu - 0.5 * params.sigma**2) * dt
    log_increments = drift + params.sigma * math.sqrt(dt) * shocks
    log_paths = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(log_increments, axis=1)], axis=1
    )
    prices = params.s0 * np.exp(log_paths)
    return PathSet(prices=prices, dt=dt, params=params)


def compute_states(paths: PathSet, kind: StateKind) -> StateSeries:
    """Derive the chosen state variable from a path set.

    PRICE returns the prices unchanged, LOG_PRICE their logarithm, and
    DRIFT_ADJUSTED subtracts (mu - sigma^2/2) t from the log price so the
    per-step increments have zero mean.
    """
    if kind is StateKind.PRICE:
        values = paths.prices
    elif kind is StateKind.LOG_PRICE:
        values = np.log(paths.prices)
    elif kind is StateKind.LOG_RETURN:
        log_prices = np.log(paths.prices)
        values = np.concatenate(
            [np.zeros((paths.n_paths, 1)), np.diff(log_prices, axis=1)], axis=1
        )
    elif kind is StateKind.DRIFT_ADJUSTED:
        p = paths.params
        trend = (p.mu - 0.5 * p.sigma**2) * paths.times
        values = np.log(paths.prices) - trend[np.newaxis, :]
    else:
        raise ValueError(f"unsupported state kind {kind!r}")
    return StateSeries(values=values, kind=kind)


def price_increments(paths: PathSet, r: float) -> Increments:
    """Compute delta_s and its cross-sectionally demeaned counterpart."""
    growth = math.exp(r * paths.dt)
    delta_s = paths.prices[:, 1:] - growth * paths.prices[:, :-1]
    delta_s_hat = delta_s - delta_s.mean(axis=0, keepdims=True)
    return Increments(delta_s=delta_s, delta_s_hat=delta_s_hat)


def save_paths(paths: PathSet, dest) -> None:
    """Write a path set as CSV: header row of observation times, one path per row."""
    with open(dest, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([repr(float(t)) for t in paths.times])
        for row in paths.prices:
            writer.writerow([repr(float(v)) for v in row])


def load_paths(source, params: MarketParams | None = None) -> PathSet:
    """Load a CSV path set written by :func:`save_paths`.

    The header row carries the observation times, from which dt is
    inferred (the grid must be uniform). When no MarketParams are given a
    placeholder with zero drift/volatility/rate is attached; pass the true
    parameters whenever drift-adjusted states will be needed.
    """
    with open(source, newline="") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if len(rows) < 2:
        raise ValueError(f"{source}: expected a header row and at least one path")
    times = np.array([float(v) for v in rows[0]])
    if times.size < 2:
        raise ValueError(f"{source}: need at least two observation times (one step)")
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise ValueError(f"{source}: observation times must be uniformly spaced")

    width = len(rows[0])
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ValueError(f"{source}: row {i} has {len(row)} values, expected {width}")
        data.append([float(v) for v in row])
    prices = np.array(data)
    if np.any(prices <= 0):
        raise ValueError(f"{source}: prices must be strictly positive")

    if params is None:
        params = MarketParams(
            s0=float(prices[0, 0]),
            mu=0.0,
            sigma=0.0,
            r=0.0,
            maturity=dt * (times.size - 1),
            n_steps=times.size - 1,
            n_paths=prices.shape[0],
            seed=0,
        )
    return PathSet(prices=prices, dt=dt, params=params)


def table_to_pathset(prices: Sequence[Sequence[float]], dt: float,
                     params: MarketParams | None = None) -> PathSet:
    """Wrap an in-memory table of prices as a PathSet (fixture helper)."""
    prices = np.asarray(prices, dtype=float)
    if params is None:
        params = MarketParams(
            s0=float(prices[0, 0]),
            mu=0.0,
            sigma=0.0,
            r=0.0,
            maturity=dt * (prices.shape[1] - 1),
            n_steps=prices.shape[1] - 1,
            n_paths=prices.shape[0],
            seed=0,
        )
    return PathSet(prices=prices, dt=dt, params=params)
