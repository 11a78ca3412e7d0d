"""Posted-price benchmark: a constant rebate that loads best-respond to."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dispatch import solve_profiles, type_counts
from .engine import load_costs
from .model import CostModel, DayStream, ExperimentConfig, LoadType, TypeSpace, sample_days


@dataclass(frozen=True)
class PostedPriceResult:
    p: float
    per_day: np.ndarray
    average: float


@dataclass(frozen=True)
class SweepResult:
    results: list[PostedPriceResult]
    optimal_per_day: np.ndarray
    optimal_average: float

    @property
    def grid(self) -> np.ndarray:
        return np.array([r.p for r in self.results])

    @property
    def posted(self) -> np.ndarray:
        return np.array([r.average for r in self.results])


def best_response(p: float, load_type: LoadType, costs: CostModel) -> float:
    """Curtailment maximising ``p*x - c(x, type)``."""
    if p < 0:
        raise ValueError("rebate must be nonnegative")
    if costs.load.family == "quadratic":
        return p / load_type.kappa
    grid = np.asarray(costs.load.grid, dtype=float)
    # first maximiser, so ties resolve to the smaller curtailment
    return float(grid[np.argmax(p * grid - costs.load.row(load_type.id))])


def run_posted_day(p: float, z: float, types: Sequence[LoadType], costs: CostModel) -> float:
    """Realised social cost when every load best-responds to ``p``."""
    x = np.array([best_response(p, t, costs) for t in types])
    own = sum(costs.load(xi, t) for xi, t in zip(x, types))
    return float(costs.reserve(z - x.sum()) + own)


def _type_response(p: float, type_space: TypeSpace, costs: CostModel) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([best_response(p, t, costs) for t in type_space.types])
    c = np.array([costs.load(xi, t) for xi, t in zip(x, type_space.types)], dtype=float)
    return x, c


def analytic_rebate(config: ExperimentConfig) -> float:
    """Expected-cost-minimising constant rebate for quadratic costs.

    With ``S = sum 1/kappa_i`` the posted cost is ``a (z - pS)^2 + p^2 S / 2``;
    setting the derivative of its expectation to zero (z independent of S)
    gives ``p = 2a E[S] E[z] / (2a E[S^2] + E[S])``.
    """
    if config.costs.load.family != "quadratic" or config.costs.reserve.kind != "quadratic":
        raise ValueError("analytic rebate needs quadratic load and reserve costs")
    a = config.costs.reserve.a
    inv = 1.0 / config.type_space.kappas
    mean_s = var_s = 0.0
    for g in config.loads:
        p = g.distribution.array
        m1 = float(p @ inv)
        m2 = float(p @ inv**2)
        mean_s += g.count * m1
        var_s += g.count * (m2 - m1 * m1)
    es2 = var_s + mean_s**2
    return 2 * a * mean_s * config.net_demand.mean() / (2 * a * es2 + mean_s)


def default_grid(config: ExperimentConfig, points: int = 50) -> np.ndarray:
    return np.linspace(0.0, 4.0 * analytic_rebate(config), points)


def sweep(p_grid: Sequence[float], config: ExperimentConfig, seed: int | None = None,
          chunk_days: int | None = None) -> SweepResult:
    """Posted-price averages over a grid on one shared (z, types) path, plus the optimum."""
    p_grid = [float(p) for p in p_grid]
    if not p_grid:
        raise ValueError("rebate grid is empty")
    if config.mode != "net-demand":
        raise ValueError("the posted-price comparison needs a net-demand-mode config")
    if config.costs.generator.kind != "disabled":
        raise ValueError("the posted-price comparison has no generator stage; disable it")
    seed = config.seed if seed is None else seed
    ts, costs = config.type_space, config.costs
    k, n, L = len(ts), config.n, config.days
    if chunk_days is None:
        chunk_days = max(1, (1 << 21) // max(n, 1))

    stream = DayStream.from_seed(seed, len(config.loads))
    responses = [_type_response(p, ts, costs) for p in p_grid]
    posted = np.empty((len(p_grid), L))
    optimal = np.empty(L)
    for start in range(0, L, chunk_days):
        B = min(chunk_days, L - start)
        z, types = sample_days(config, stream, B)
        counts = type_counts(types, k)
        for j, (xk, ck) in enumerate(responses):
            posted[j, start:start + B] = costs.reserve(z - counts @ xk) + counts @ ck
        x, g_r = solve_profiles(z, 0.0, types, ts, costs, config.box)
        optimal[start:start + B] = costs.reserve(g_r) + load_costs(costs, ts, x, types).sum(axis=1)
    results = [PostedPriceResult(p, posted[j], float(posted[j].mean())) for j, p in enumerate(p_grid)]
    return SweepResult(results, optimal, float(optimal.mean()))
