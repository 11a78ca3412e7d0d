"""Brute-force references for the dispatch solver, the day-ahead expectation
and the incentive properties.

Nothing here calls into the dispatch solvers: the real-time reference is an
exhaustive grid search, the expectation reference enumerates every
per-load profile and solves each scenario by bisection on the shadow price.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dispatch import RealTimeSolution
from .engine import run, summarize
from .agents import make_strategy
from .model import (
    CostModel,
    ExperimentConfig,
    JointTypeModel,
    LoadType,
    NetDemandModel,
    StrategySpec,
    TypeSpace,
)

GRID_LIMIT = 10**8
PROFILE_LIMIT = 10**5
MIN_HORIZON = 1000


# ---------------------------------------------------------------------------
# real time
# ---------------------------------------------------------------------------


def _load_grid(t: LoadType, costs: CostModel, box: bool, lo: float, hi: float, step: float) -> np.ndarray:
    if costs.load.family == "tabulated":
        grid = np.asarray(costs.load.grid, dtype=float)
        return grid[(grid >= 0) & (grid <= t.baseline)] if box else grid
    if box:
        lo, hi = 0.0, float(t.baseline)
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def brute_force_real_time(
    z: float,
    g: float,
    types: Sequence[LoadType],
    costs: CostModel,
    box: bool = False,
    grid_step: float = 0.01,
    lo: float | None = None,
    hi: float | None = None,
    d_max: int | None = None,
) -> RealTimeSolution:
    """Exhaustive minimum of reserve plus load costs over a curtailment grid.

    The default range is ``[-R, 2R]`` per load with ``R = max(d_max, |m|)``;
    the unconstrained optimum never curtails more than ``|m|`` in magnitude.
    """
    types = list(types)
    n = len(types)
    if n == 0 or n > 4:
        raise ValueError("brute force supports 1 to 4 loads")
    if grid_step <= 0:
        raise ValueError("grid step must be positive")
    m = z - g + sum(t.baseline for t in types)
    d_max = max(t.baseline for t in types) if d_max is None else d_max
    R = max(float(d_max), abs(m))
    lo = -R if lo is None else lo
    hi = 2 * R if hi is None else hi
    grids = [_load_grid(t, costs, box, lo, hi, grid_step) for t in types]
    total = math.prod(len(gr) for gr in grids)
    if total > GRID_LIMIT:
        raise ValueError(f"grid has {total} points (> {GRID_LIMIT})")
    own = [np.asarray(costs.load(gr, t), dtype=float) for gr, t in zip(grids, types)]

    # partial sums over all but the last load, then sweep the last load in chunks
    sx = np.zeros(1)
    sc = np.zeros(1)
    for gr, c in zip(grids[:-1], own[:-1]):
        sx = (sx[:, None] + gr[None, :]).ravel()
        sc = (sc[:, None] + c[None, :]).ravel()
    last_x, last_c = grids[-1], own[-1]
    best = (math.inf, 0, 0)
    step = max(1, (1 << 22) // len(last_x))
    for s in range(0, len(sx), step):
        tot = sc[s:s + step, None] + last_c[None, :] + costs.reserve(m - sx[s:s + step, None] - last_x[None, :])
        j = int(np.argmin(tot))
        if tot.flat[j] < best[0]:
            best = (float(tot.flat[j]), s + j // len(last_x), j % len(last_x))
    _, a, b = best
    idx = []
    for gr in reversed(grids[:-1]):
        idx.append(a % len(gr))
        a //= len(gr)
    idx = idx[::-1] + [b]
    x = np.array([gr[i] for gr, i in zip(grids, idx)])
    load_costs = np.array([c[i] for c, i in zip(own, idx)])
    g_r = m - x.sum()
    gen = float(costs.generator(g))
    res = float(costs.reserve(g_r))
    return RealTimeSolution(x, g_r, gen, res, load_costs, gen + res + float(load_costs.sum()))


def _bisect_scenario(m: float, kappas: np.ndarray, uppers: np.ndarray | None, a: float) -> np.ndarray:
    """Curtailments at the shadow price solving ``lam = 2a (m - sum x(lam))``."""

    def x_of(lam):
        x = lam / kappas
        return np.clip(x, 0.0, uppers) if uppers is not None else x

    def phi(lam):
        return lam - 2 * a * (m - x_of(lam).sum())

    span = 2 * a * abs(m) + 1.0
    lo, hi = -span, span
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    return x_of(0.5 * (lo + hi))


def scenario_cost(z: float, g: float, types: Sequence[LoadType], costs: CostModel, box: bool = False,
                  grid_step: float = 0.01) -> float:
    """Optimal social cost of one (z, profile) scenario, solved independently."""
    if costs.load.family == "tabulated":
        return brute_force_real_time(z, g, types, costs, box, grid_step).social_cost
    if costs.reserve.kind != "quadratic":
        raise ValueError("independent quadratic solve needs a quadratic reserve")
    kap = np.array([t.kappa for t in types], dtype=float)
    up = np.array([t.baseline for t in types], dtype=float) if box else None
    m = z - g + sum(t.baseline for t in types)
    x = _bisect_scenario(m, kap, up, costs.reserve.a)
    return float(costs.generator(g) + costs.reserve(m - x.sum()) + (0.5 * kap * x * x).sum())


def exact_expectation(
    g: float,
    model: JointTypeModel,
    z_model: NetDemandModel,
    type_space: TypeSpace,
    costs: CostModel,
    box: bool = False,
) -> float:
    """Probability-weighted optimal cost over every (z, per-load profile) pair."""
    if z_model.kind != "discrete":
        raise ValueError("exact expectation needs a discrete net-demand model")
    k, n = len(type_space), model.n
    if k**n > PROFILE_LIMIT:
        raise ValueError(f"{k}^{n} profiles exceed {PROFILE_LIMIT}")
    probs = [d.array for d in model.per_load]
    total = 0.0
    for profile in itertools.product(range(k), repeat=n):
        w = math.prod(float(p[t]) for p, t in zip(probs, profile))
        if w == 0.0:
            continue
        types = [type_space.types[t] for t in profile]
        for z, pz in zip(z_model.values, z_model.probs):
            if pz == 0.0:
                continue
            total += w * pz * scenario_cost(z, g, types, costs, box)
    return total


def exact_optimum(
    model: JointTypeModel,
    z_model: NetDemandModel,
    type_space: TypeSpace,
    costs: CostModel,
    box: bool = False,
    tol: float = 1e-9,
) -> tuple[float, float]:
    """``(g*, W*)`` by ternary search over the exact expectation."""
    f = lambda g: exact_expectation(g, model, z_model, type_space, costs, box)
    if costs.generator.kind == "disabled":
        return 0.0, f(0.0)
    lo, hi = 0.0, max(z_model.values) + model.n * type_space.d_max
    while hi - lo > tol:
        a, b = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if f(a) <= f(b):
            hi = b
        else:
            lo = a
    g = 0.5 * (lo + hi)
    return g, f(g)


# ---------------------------------------------------------------------------
# deviations
# ---------------------------------------------------------------------------


@dataclass
class CandidateOutcome:
    spec: StrategySpec
    mean_utility: np.ndarray  # per seed
    tail_min_utility: np.ndarray
    std_error: np.ndarray
    penalty_fraction: np.ndarray
    gap: np.ndarray = field(default_factory=lambda: np.zeros(0))  # truthful minus candidate

    @property
    def name(self) -> str:
        return self.spec.name


@dataclass
class DeviationReport:
    deviator_group: int
    horizon: int
    seeds: list[int]
    outcomes: list[CandidateOutcome]
    opponents: str = "truthful"

    @property
    def truthful(self) -> CandidateOutcome:
        return next(o for o in self.outcomes if o.spec.kind == "truthful")

    def outcome(self, name: str) -> CandidateOutcome:
        return next(o for o in self.outcomes if o.name == name)

    def rows(self) -> list[dict]:
        out = []
        for o in self.outcomes:
            for j, s in enumerate(self.seeds):
                out.append({
                    "strategy": o.name,
                    "seed": s,
                    "mean_utility": float(o.mean_utility[j]),
                    "tail_min_utility": float(o.tail_min_utility[j]),
                    "std_error": float(o.std_error[j]),
                    "penalty_fraction": float(o.penalty_fraction[j]),
                    "gap_to_truthful": float(o.gap[j]),
                })
        return out

    def write_csv(self, path: str | Path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    def to_json(self) -> dict:
        return {
            "deviator_group": self.deviator_group,
            "horizon": self.horizon,
            "seeds": list(self.seeds),
            "opponents": self.opponents,
            "candidates": [
                {
                    "strategy": o.name,
                    "mean_utility": float(o.mean_utility.mean()),
                    "min_gap_to_truthful": float(o.gap.min()),
                    "mean_gap_to_truthful": float(o.gap.mean()),
                    "penalty_fraction": float(o.penalty_fraction.mean()),
                }
                for o in self.outcomes
            ],
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def enumerate_deviations(
    config: ExperimentConfig,
    candidates: Iterable[StrategySpec],
    horizon: int = 20000,
    seeds: Sequence[int] = tuple(range(20)),
    deviator_group: int = 0,
    tail_fraction: float = 0.5,
) -> DeviationReport:
    """Run every candidate for one load against truthful opponents on shared paths."""
    if config.n > 3 or len(config.type_space) > 3:
        raise ValueError("deviation enumeration is limited to n <= 3 and |types| <= 3")
    if horizon < MIN_HORIZON:
        raise ValueError(f"horizon {horizon} is too short to stabilise penalties (< {MIN_HORIZON})")
    if config.loads[deviator_group].count != 1:
        raise ValueError("the deviating load must form its own group")
    candidates = list(candidates)
    if not any(c.kind == "truthful" for c in candidates):
        candidates.insert(0, StrategySpec())
    if sum(c.kind == "truthful" for c in candidates) != 1:
        raise ValueError("the truthful anchor must appear exactly once")
    load = sum(g.count for g in config.loads[:deviator_group])
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise ValueError("candidate names must be distinct")

    cfg = config.replace(days=horizon)
    ts = cfg.type_space
    base = [make_strategy(StrategySpec(), ts) for _ in cfg.loads]
    outcomes = []
    for spec in candidates:
        strategies = list(base)
        strategies[deviator_group] = make_strategy(spec, ts)
        stats = np.empty((4, len(seeds)))
        for j, s in enumerate(seeds):
            summary = summarize(run(cfg, strategies, seed=s), tail_fraction)
            stats[:, j] = (
                summary["mean_utility"][load],
                summary["tail_min_utility"][load],
                summary["utility_std_error"][load],
                summary["penalty_fraction"][load],
            )
        outcomes.append(CandidateOutcome(spec, *stats))
    anchor = next(o for o in outcomes if o.spec.kind == "truthful")
    for o in outcomes:
        o.gap = anchor.mean_utility - o.mean_utility
    return DeviationReport(deviator_group, horizon, list(seeds), outcomes)
