"""Built-in configuration documents used by the verification suites,
the experiment scripts and the test suite.

Each function returns a raw document; pass it through ``validate_config``.
"""

from __future__ import annotations

import copy

from .model import StrategySpec

KAPPA_TYPES = [{"id": "a", "kappa": 1.0}, {"id": "b", "kappa": 2.0}, {"id": "c", "kappa": 4.0}]


def deterministic(box: bool = False, generator: float | None = None, days: int = 10) -> dict:
    """Two loads with fixed types (d=3, kappa=1) and (d=3, kappa=2), z = 10."""
    doc = {
        "seed": 0,
        "days": days,
        "mode": "explicit-baseline",
        "curtailment_bounds": "box" if box else "unconstrained",
        "type_space": {"types": [{"id": "a", "baseline": 3, "kappa": 1.0},
                                 {"id": "b", "baseline": 3, "kappa": 2.0}], "d_max": 3},
        "loads": [{"count": 1, "distribution": [1.0, 0.0]}, {"count": 1, "distribution": [0.0, 1.0]}],
        "net_demand": {"kind": "discrete", "values": [10.0], "probs": [1.0]},
        "costs": {"reserve": {"kind": "quadratic", "a": 5.0}},
    }
    if generator is not None:
        doc["costs"]["generator"] = {"kind": "quadratic", "a": generator}
    return doc


def small_stochastic(days: int = 20000, generator: float | None = 1.0) -> dict:
    """Two loads, two cost types, three net-demand atoms."""
    doc = {
        "seed": 0,
        "days": days,
        "mode": "net-demand",
        "type_space": {"types": [{"id": "lo", "kappa": 1.0}, {"id": "hi", "kappa": 3.0}]},
        "loads": [{"count": 1, "distribution": [0.6, 0.4]}, {"count": 1, "distribution": [0.3, 0.7]}],
        "net_demand": {"kind": "discrete", "values": [4.0, 8.0, 12.0], "probs": [0.5, 0.3, 0.2]},
        "costs": {"reserve": {"kind": "quadratic", "a": 5.0}},
    }
    if generator is not None:
        doc["costs"]["generator"] = {"kind": "quadratic", "a": generator}
    return doc


def net_demand_game(days: int = 20000, threshold_multiplier: float = 2.0) -> dict:
    """Two loads over three cost types; the deviator is load 0."""
    return {
        "seed": 0,
        "days": days,
        "mode": "net-demand",
        "type_space": {"types": copy.deepcopy(KAPPA_TYPES)},
        "loads": [{"count": 1, "distribution": [0.5, 0.3, 0.2]}, {"count": 1, "distribution": [0.2, 0.3, 0.5]}],
        "net_demand": {"kind": "uniform", "lo": 0.0, "hi": 10.0},
        "costs": {"reserve": {"kind": "quadratic", "a": 5.0}},
        "penalty": {"threshold_multiplier": threshold_multiplier},
    }


def baseline_game(days: int = 20000) -> dict:
    """Two loads whose types carry baselines, so baselines can be inflated."""
    return {
        "seed": 0,
        "days": days,
        "mode": "explicit-baseline",
        "type_space": {"types": [{"id": "d1", "baseline": 1, "kappa": 1.0},
                                 {"id": "d2", "baseline": 2, "kappa": 1.0},
                                 {"id": "d2s", "baseline": 2, "kappa": 3.0}], "d_max": 2},
        "loads": [{"count": 1, "distribution": [0.6, 0.2, 0.2]}, {"count": 1, "distribution": [0.3, 0.3, 0.4]}],
        "net_demand": {"kind": "uniform", "lo": 0.0, "hi": 10.0},
        "costs": {"reserve": {"kind": "quadratic", "a": 5.0}},
    }


def penalty_game(days: int = 100000, threshold_multiplier: float = 2.0) -> dict:
    """Net-demand game with a concentrated first load, for penalty timing."""
    doc = net_demand_game(days, threshold_multiplier)
    doc["loads"][0]["distribution"] = [0.8, 0.1, 0.1]
    return doc


def fig2(days: int = 1000, loads: int = 10000, samples: int = 20000) -> dict:
    """Large population with uniform cost types 1..10 and z uniform on [0, 100]."""
    return {
        "seed": 0,
        "days": days,
        "mode": "net-demand",
        "type_space": {"types": [{"id": f"k{i}", "kappa": float(i)} for i in range(1, 11)]},
        "loads": [{"count": loads, "distribution": [0.1] * 10}],
        "net_demand": {"kind": "uniform", "lo": 0.0, "hi": 100.0},
        "costs": {"reserve": {"kind": "quadratic", "a": 5.0}},
        "expectation": {"method": "monte-carlo", "samples": samples},
    }


S = StrategySpec
SWAP = (("a", "b"), ("b", "a"))
EXAGGERATE = ((1.0, 2.0), (2.0, 4.0))


def net_demand_candidates() -> list[StrategySpec]:
    """Adversarial specs for load 0 of :func:`net_demand_game`."""
    return [
        S("dist-misreport", distribution=(0.4, 0.3, 0.3)),  # TV 0.1
        S("dist-misreport", distribution=(0.3, 0.3, 0.4)),  # TV 0.2
        S("dist-misreport", distribution=(0.1, 0.3, 0.6)),  # TV 0.4
        S("type-misreport", type_map=SWAP),
        S("type-misreport", type_map=SWAP, coherent=True),
        S("type-misreport", type_map=(("a", "c"),), coherent=True),
        S("cost-exaggerate", kappa_map=EXAGGERATE),
        S("cost-exaggerate", kappa_map=EXAGGERATE, coherent=True),
        S("intermittent", inner=S("cost-exaggerate", kappa_map=((1.0, 2.0),)), period=5),
        S("intermittent", inner=S("type-misreport", type_map=(("c", "a"),)), period=3),
    ]


def baseline_candidates() -> list[StrategySpec]:
    """Adversarial specs for load 0 of :func:`baseline_game`."""
    return [
        S("baseline-inflate", delta=1),
        S("baseline-inflate", delta=1, coherent=True),
        S("intermittent", inner=S("baseline-inflate", delta=1), period=4),
        S("type-misreport", type_map=(("d2", "d2s"),), coherent=True),
    ]
