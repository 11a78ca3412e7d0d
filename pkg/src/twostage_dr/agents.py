"""Bidding strategies: a day-ahead distribution report and a real-time type report.

Every library strategy is a fixed pair of maps chosen before the load
sees its true distribution. Real-time reports are produced for a whole
block of days at once; a strategy that wants to react to past dispatch
outcomes sets ``history_dependent`` and the engine then feeds it one day
at a time.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import PROB_TOL, ExperimentConfig, StrategySpec, TypeSpace

log = logging.getLogger(__name__)

MAP_KINDS = ("type-misreport", "baseline-inflate", "cost-exaggerate")


@dataclass
class History:
    """What a load has observed before reporting on a given day."""

    g_star: float
    past_curtailments: np.ndarray = field(default_factory=lambda: np.zeros((0,)))


@dataclass
class Strategy:
    spec: StrategySpec
    type_map: np.ndarray  # real-time report for each true type index
    fixed_report: np.ndarray | None = None  # day-ahead report ignoring the truth
    coherent: bool = False
    period: int | None = None  # misreport only on days divisible by this
    history_dependent: bool = False

    def day_ahead(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.fixed_report is not None:
            return self.fixed_report.copy()
        if self.coherent:
            out = np.zeros_like(theta)
            np.add.at(out, self.type_map, theta)
            return out
        return theta.copy()

    def report(self, days: np.ndarray, true_types: np.ndarray, rng: np.random.Generator | None = None,
               history: History | None = None) -> np.ndarray:
        """Reported type indices for ``true_types`` of shape ``(B, members)``."""
        mapped = self.type_map[true_types]
        if self.period is None:
            return mapped
        active = (np.asarray(days) % self.period == 0)[:, None]
        return np.where(active, mapped, true_types)


def _type_where(ts: TypeSpace, baseline: int, kappa: float) -> int | None:
    for k, t in enumerate(ts.types):
        if t.baseline == baseline and abs(t.kappa - kappa) <= 1e-9 * max(1.0, abs(kappa)):
            return k
    return None


def _map_for(spec: StrategySpec, ts: TypeSpace) -> np.ndarray:
    k = len(ts)
    mapping = np.arange(k)
    if spec.kind == "type-misreport":
        for a, b in spec.type_map:
            try:
                mapping[ts.index(a)] = ts.index(b)
            except KeyError as exc:
                raise ValueError(f"type map entry {a!r}->{b!r}: {exc.args[0]}") from None
    elif spec.kind == "baseline-inflate":
        for src, t in enumerate(ts.types):
            target = _type_where(ts, min(t.baseline + spec.delta, ts.d_max), t.kappa)
            if target is None:
                raise ValueError(
                    f"inflated type (baseline={min(t.baseline + spec.delta, ts.d_max)}, kappa={t.kappa:g}) "
                    f"for {t.id!r} is absent from the type space"
                )
            mapping[src] = target
    elif spec.kind == "cost-exaggerate":
        kmap = dict(spec.kappa_map)
        for src, t in enumerate(ts.types):
            new = next((v for key, v in kmap.items() if abs(key - t.kappa) <= 1e-9 * max(1.0, key)), None)
            if new is None:
                continue
            target = _type_where(ts, t.baseline, new)
            if target is None:
                raise ValueError(f"exaggerated type (baseline={t.baseline}, kappa={new:g}) for {t.id!r} is absent")
            mapping[src] = target
    return mapping


def make_strategy(spec: StrategySpec, type_space: TypeSpace) -> Strategy:
    k = len(type_space)
    if spec.kind == "truthful":
        return Strategy(spec, np.arange(k))
    if spec.kind == "dist-misreport":
        p = np.asarray(spec.distribution, dtype=float)
        if p.shape != (k,):
            raise ValueError(f"reported distribution has {p.size} entries, type space has {k}")
        if np.any(p < 0) or abs(p.sum() - 1) > PROB_TOL:
            raise ValueError(f"reported distribution is not a probability vector (sums to {p.sum():.12g})")
        return Strategy(spec, np.arange(k), fixed_report=p)
    if spec.kind in MAP_KINDS:
        return Strategy(spec, _map_for(spec, type_space), coherent=spec.coherent)
    if spec.kind == "intermittent":
        if spec.inner is None or spec.inner.kind not in MAP_KINDS:
            raise ValueError("intermittent strategies wrap a type-, baseline- or cost-misreport")
        if not spec.period or spec.period < 1:
            raise ValueError("intermittent period must be >= 1")
        return Strategy(spec, _map_for(spec.inner, type_space), period=spec.period)
    raise ValueError(f"unknown strategy kind {spec.kind!r}")


def validate_strategy(spec: StrategySpec, config: ExperimentConfig) -> None:
    make_strategy(spec, config.type_space)


def is_truthful(spec: StrategySpec) -> bool:
    """Exact truthfulness, decided by kind alone."""
    if spec.kind == "truthful":
        return True
    behaviourally_truthful = (
        (spec.kind == "cost-exaggerate" and all(abs(a - b) <= 1e-12 for a, b in spec.kappa_map))
        or (spec.kind == "type-misreport" and all(a == b for a, b in spec.type_map))
    )
    if behaviourally_truthful:
        warnings.warn(f"{spec.name} is an identity map and behaves truthfully", stacklevel=2)
    return False
