"""Repeated two-stage market: one day-ahead clearing, then the daily loop.

Days are processed in blocks. Within a block, sampling, reporting,
dispatch and payments are vectorised; the deviation tracker is still a
sequential fold over days, so every penalty decision uses exactly the
reports up to and including its own day.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .agents import History, Strategy, make_strategy
from .dispatch import DayAheadDecision, DayAheadSolver, solve_profiles
from .mechanism import DeviationTracker, first_stage_payment, long_run_average
from .model import (
    CostModel,
    DayStream,
    ExperimentConfig,
    JointTypeModel,
    LoadGroup,
    TypeDistribution,
    TypeSpace,
    nearest_index,
    sample_days,
)

log = logging.getLogger(__name__)

LEDGER_COLUMNS = (
    "day", "z", "load_id", "true_type", "reported_type", "curtailment",
    "consumption", "p1", "p2", "penalty", "utility", "social_cost",
)


def load_costs(costs: CostModel, type_space: TypeSpace, x: np.ndarray, types: np.ndarray) -> np.ndarray:
    """Elementwise ``c(x, type)`` for arrays of curtailments and type indices."""
    if costs.load.family == "quadratic":
        return 0.5 * type_space.kappas[types] * x * x
    grid = np.asarray(costs.load.grid, dtype=float)
    table = np.stack([costs.load.row(t.id) for t in type_space.types])
    idx = nearest_index(grid, x)
    if np.any(np.abs(grid[idx] - x) > 1e-9 * np.maximum(1.0, np.abs(x))):
        raise ValueError("curtailment off the tabulated grid")
    return table[types, idx]


@dataclass(frozen=True)
class DayRecord:
    day: int
    z: float
    true_types: np.ndarray
    reported_types: np.ndarray
    reported_baselines: np.ndarray
    curtailments: np.ndarray
    reserve: float
    consumption: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    penalties: np.ndarray
    utilities: np.ndarray
    social_cost: float


def audit_compliance(record: DayRecord) -> bool:
    """Consumption must equal reported baseline minus commanded curtailment."""
    return bool(np.array_equal(record.consumption, record.reported_baselines - record.curtailments))


@dataclass
class SimulationResult:
    config: ExperimentConfig
    strategies: list[Strategy]
    decision: DayAheadDecision
    w_minus: np.ndarray  # per load
    p1: np.ndarray  # per load
    theta_hat: np.ndarray  # (n, k) reported distributions
    z: np.ndarray
    reserve: np.ndarray
    true_types: np.ndarray
    reports: np.ndarray
    curtailments: np.ndarray
    reported_cost: np.ndarray
    true_cost: np.ndarray
    p2: np.ndarray
    penalties: np.ndarray
    utilities: np.ndarray
    social_cost: np.ndarray
    tracker: DeviationTracker

    @property
    def days(self) -> int:
        return len(self.z)

    @property
    def payments(self) -> np.ndarray:
        return self.p1[None, :] + self.p2

    def running_utility(self) -> np.ndarray:
        return np.cumsum(self.utilities, axis=0) / np.arange(1, self.days + 1)[:, None]

    def running_social_cost(self) -> np.ndarray:
        return np.cumsum(self.social_cost) / np.arange(1, self.days + 1)

    def day_record(self, l: int) -> DayRecord:
        """Ledger row set for day ``l`` (1-indexed)."""
        b = l - 1
        base = self.config.type_space.baselines
        d_hat = base[self.reports[b]]
        x = self.curtailments[b]
        return DayRecord(
            day=l,
            z=float(self.z[b]),
            true_types=self.true_types[b].copy(),
            reported_types=self.reports[b].copy(),
            reported_baselines=d_hat,
            curtailments=x.copy(),
            reserve=float(self.reserve[b]),
            consumption=d_hat - x,
            p1=self.p1.copy(),
            p2=self.p2[b].copy(),
            penalties=self.penalties[b].copy(),
            utilities=self.utilities[b].copy(),
            social_cost=float(self.social_cost[b]),
        )


def day_ahead_reports(config: ExperimentConfig, strategies: Sequence[Strategy]) -> JointTypeModel:
    groups = []
    for g, s in zip(config.loads, strategies):
        groups.append(LoadGroup(g.count, TypeDistribution(tuple(float(p) for p in s.day_ahead(g.distribution.array)))))
    return JointTypeModel(tuple(groups))


def clear_day_ahead(config: ExperimentConfig, reported: JointTypeModel):
    """Solve the day-ahead program and the per-group exclusions.

    Returns ``(decision, w_minus, p1)`` with per-load arrays.
    """
    solver = DayAheadSolver(
        reported, config.net_demand, config.type_space, config.costs,
        config.expectation, config.box, seed=config.seed,
    )
    decision = solver.solve()
    w_minus = np.empty(config.n)
    start = 0
    for gi, g in enumerate(reported.groups):
        w_minus[start:start + g.count] = solver.excluding(start).w_star
        start += g.count
    p1 = np.array([
        first_stage_payment(wm, decision.w_star, ec) for wm, ec in zip(w_minus, decision.expected_load_cost)
    ])
    return decision, w_minus, p1


class LedgerWriter:
    """Appends per-(day, load) rows to a CSV file."""

    def __init__(self, path: Path, type_space: TypeSpace):
        self.path = Path(path)
        self.ids = np.array([t.id for t in type_space.types], dtype=object)
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(LEDGER_COLUMNS)

    def write_block(self, days, z, true_types, reports, x, y, p1, p2, pen, util, social):
        B, n = x.shape
        load_id = np.tile(np.arange(n), B)
        rows = zip(
            np.repeat(days, n).tolist(),
            np.repeat(z, n).tolist(),
            load_id.tolist(),
            self.ids[true_types.ravel()].tolist(),
            self.ids[reports.ravel()].tolist(),
            x.ravel().tolist(),
            y.ravel().tolist(),
            np.tile(p1, B).tolist(),
            p2.ravel().tolist(),
            pen.ravel().astype(int).tolist(),
            util.ravel().tolist(),
            np.repeat(social, n).tolist(),
        )
        self._w.writerows(rows)

    def close(self):
        self._fh.close()


def run(
    config: ExperimentConfig,
    strategies: Sequence[Strategy] | None = None,
    ledger_path: str | Path | None = None,
    seed: int | None = None,
    block_days: int | None = None,
) -> SimulationResult:
    """Simulate ``config.days`` days of the two-stage mechanism.

    ``strategies`` holds one strategy per load group (default: the ones in
    the config). ``seed`` overrides the config seed for the day path.
    """
    if config.days < 1:
        raise ValueError("horizon must be at least one day")
    if strategies is None:
        strategies = [make_strategy(g.strategy, config.type_space) for g in config.loads]
    if len(strategies) != len(config.loads):
        raise ValueError("need one strategy per load group")
    seed = config.seed if seed is None else seed
    ts = config.type_space
    n, k, L = config.n, len(ts), config.days
    base = ts.baselines

    reported = day_ahead_reports(config, strategies)
    decision, w_minus, p1 = clear_day_ahead(config, reported)
    g_star = decision.g_star
    expected_cost = decision.expected_load_cost
    gen_cost = float(config.costs.generator(g_star))
    theta_hat = np.concatenate([np.tile(g.distribution.array, (g.count, 1)) for g in reported.groups])
    tracker = DeviationTracker(theta_hat)
    cols = np.cumsum([0] + [g.count for g in config.loads])

    stream = DayStream.from_seed(seed, len(config.loads))
    if block_days is None:
        block_days = max(1, min(4096, (1 << 21) // max(n, 1)))
    if any(s.history_dependent for s in strategies):
        block_days = 1

    itype = np.int16 if k < 2**15 else np.int32
    out = dict(
        z=np.empty(L), reserve=np.empty(L), social_cost=np.empty(L),
        true_types=np.empty((L, n), dtype=itype), reports=np.empty((L, n), dtype=itype),
        curtailments=np.empty((L, n)), reported_cost=np.empty((L, n)), true_cost=np.empty((L, n)),
        p2=np.empty((L, n)), penalties=np.empty((L, n), dtype=bool), utilities=np.empty((L, n)),
    )
    writer = LedgerWriter(Path(ledger_path), ts) if ledger_path is not None else None
    literal = config.utility_convention == "literal"
    try:
        for start in range(0, L, block_days):
            B = min(block_days, L - start)
            days = np.arange(start + 1, start + B + 1)
            z, true_t = sample_days(config, stream, B)
            rep = np.empty_like(true_t)
            for gi, s in enumerate(strategies):
                sl = slice(cols[gi], cols[gi + 1])
                hist = None
                if s.history_dependent:
                    hist = History(g_star, out["curtailments"][:start, sl])
                rep[:, sl] = s.report(days, true_t[:, sl], stream.strategy_rng, hist)

            x, g_r = solve_profiles(z, g_star, rep, ts, config.costs, config.box)
            r_cost = load_costs(config.costs, ts, x, rep)
            sup_f, sup_h = tracker.update_block(rep)
            r = config.penalty.threshold(days)[:, None]
            events = (sup_f >= r) | (sup_h >= r)
            J = config.penalty.penalty(days)[:, None]
            p2 = r_cost - expected_cost[None, :] - J * events
            total = p1[None, :] + p2
            d_hat, d_true = base[rep], base[true_t]
            reduction = x if literal else x - (d_hat - d_true)
            t_cost = load_costs(config.costs, ts, reduction, true_t)
            util = total - t_cost
            social = gen_cost + config.costs.reserve(g_r) + t_cost.sum(axis=1)

            sl = slice(start, start + B)
            out["z"][sl] = z
            out["reserve"][sl] = g_r
            out["social_cost"][sl] = social
            out["true_types"][sl] = true_t
            out["reports"][sl] = rep
            out["curtailments"][sl] = x
            out["reported_cost"][sl] = r_cost
            out["true_cost"][sl] = t_cost
            out["p2"][sl] = p2
            out["penalties"][sl] = events
            out["utilities"][sl] = util
            if writer is not None:
                writer.write_block(days, z, true_t, rep, x, d_hat - x, p1, p2, events, util, social)
    finally:
        if writer is not None:
            writer.close()

    return SimulationResult(
        config=config, strategies=list(strategies), decision=decision, w_minus=w_minus, p1=p1,
        theta_hat=theta_hat, tracker=tracker, **out,
    )


def summarize(result: SimulationResult, tail_fraction: float = 0.5) -> dict:
    """Horizon and tail statistics of a finished run."""
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    L = result.days
    mean_u, tail_u = long_run_average(result.utilities, tail_fraction)
    start = min(int(np.floor(L * (1 - tail_fraction))), L - 1)
    se_u = result.utilities.std(axis=0, ddof=1) / math.sqrt(L) if L > 1 else np.zeros(result.config.n)
    sc = result.social_cost
    first_pen = [int(np.argmax(col)) + 1 if col.any() else None for col in result.penalties.T]
    return {
        "days": L,
        "g_star": result.decision.g_star,
        "w_star": result.decision.w_star,
        "w_minus": result.w_minus.tolist(),
        "rationality_margin": (result.w_minus - result.decision.w_star).tolist(),
        "p1": result.p1.tolist(),
        "mean_utility": np.asarray(mean_u).tolist(),
        "tail_min_utility": np.asarray(tail_u).tolist(),
        "utility_std_error": np.asarray(se_u).tolist(),
        "mean_social_cost": float(sc.mean()),
        "social_cost_std_error": float(sc.std(ddof=1) / math.sqrt(L)) if L > 1 else 0.0,
        "penalty_fraction": result.penalties.mean(axis=0).tolist(),
        "tail_penalty_fraction": result.penalties[start:].mean(axis=0).tolist(),
        "first_penalty_day": first_pen,
        "strategies": [s.spec.name for s in result.strategies],
    }


def write_summary(summary: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
