"""Domain types, cost families, penalty schedules and experiment configuration.

Everything here is immutable once built. Configuration documents are plain
JSON-compatible dicts; :func:`validate_config` turns one into an
:class:`ExperimentConfig` and :func:`config_to_dict` goes back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12
ENUMERATION_LIMIT = 10**6

MODES = ("explicit-baseline", "net-demand")
BOUNDS = ("unconstrained", "box")
STRATEGY_KINDS = (
    "truthful",
    "dist-misreport",
    "type-misreport",
    "baseline-inflate",
    "cost-exaggerate",
    "intermittent",
)


class ConfigError(ValueError):
    """Raised with one diagnostic per violated invariant."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------------------
# types and distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadType:
    id: str
    baseline: int
    kappa: float


@dataclass(frozen=True)
class TypeSpace:
    types: tuple[LoadType, ...]
    d_max: int

    def __post_init__(self):
        if not self.types:
            raise ValueError("type space must be nonempty")
        ids = [t.id for t in self.types]
        if len(set(ids)) != len(ids):
            raise ValueError("type identifiers must be unique")
        for t in self.types:
            if not 0 <= t.baseline <= self.d_max:
                raise ValueError(f"type {t.id!r}: baseline {t.baseline} outside [0, {self.d_max}]")

    def __len__(self):
        return len(self.types)

    def index(self, type_id: str) -> int:
        for k, t in enumerate(self.types):
            if t.id == type_id:
                return k
        raise KeyError(f"type {type_id!r} not in type space")

    @property
    def kappas(self) -> np.ndarray:
        return np.array([t.kappa for t in self.types], dtype=float)

    @property
    def baselines(self) -> np.ndarray:
        return np.array([t.baseline for t in self.types], dtype=float)


@dataclass(frozen=True)
class TypeDistribution:
    probs: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {_fmt(p.sum())}")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True)
class LoadGroup:
    """``count`` loads sharing one type distribution."""

    count: int
    distribution: TypeDistribution


@dataclass(frozen=True)
class JointTypeModel:
    """Product distribution over loads, stored as identical-load groups."""

    groups: tuple[LoadGroup, ...]

    @property
    def n(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def per_load(self) -> list[TypeDistribution]:
        return [g.distribution for g in self.groups for _ in range(g.count)]

    def group_of(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"load index {i} out of range for {self.n} loads")
        acc = 0
        for gi, g in enumerate(self.groups):
            acc += g.count
            if i < acc:
                return gi
        raise AssertionError("unreachable")

    def without_group_member(self, gi: int) -> "JointTypeModel":
        groups = list(self.groups)
        g = groups[gi]
        if g.count == 1:
            del groups[gi]
        else:
            groups[gi] = LoadGroup(g.count - 1, g.distribution)
        return JointTypeModel(tuple(groups))

    @classmethod
    def from_per_load(cls, dists: Sequence[TypeDistribution]) -> "JointTypeModel":
        return cls(tuple(LoadGroup(1, d) for d in dists))


@dataclass(frozen=True)
class NetDemandModel:
    kind: str  # "uniform" | "discrete"
    lo: float = 0.0
    hi: float = 0.0
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.lo < self.hi:
                raise ValueError(f"uniform net demand needs lo < hi, got [{self.lo}, {self.hi}]")
        elif self.kind == "discrete":
            if len(self.values) != len(self.probs) or not self.values:
                raise ValueError("discrete net demand needs matching nonempty values/probs")
            p = np.asarray(self.probs, dtype=float)
            if np.any(p < 0):
                raise ValueError("net demand probabilities must be nonnegative")
            if abs(p.sum() - 1.0) > PROB_TOL:
                raise ValueError(f"net demand probabilities sum to {_fmt(p.sum())}")
        else:
            raise ValueError(f"unknown net demand kind {self.kind!r}")

    def nodes(self, z_nodes: int) -> tuple[np.ndarray, np.ndarray]:
        """Integration nodes and weights: composite midpoint or exact atoms."""
        if self.kind == "uniform":
            h = (self.hi - self.lo) / z_nodes
            x = self.lo + h * (np.arange(z_nodes) + 0.5)
            return x, np.full(z_nodes, 1.0 / z_nodes)
        p = np.asarray(self.probs, dtype=float)
        keep = p > 0
        return np.asarray(self.values, dtype=float)[keep], p[keep]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * u
        cdf = np.cumsum(self.probs)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(self.values) - 1)
        return np.asarray(self.values, dtype=float)[idx]

    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.lo + self.hi)
        return float(np.dot(self.values, self.probs))

    def max_value(self) -> float:
        return self.hi if self.kind == "uniform" else float(max(self.values))


# ---------------------------------------------------------------------------
# cost functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarCost:
    """Generator or reserve cost: disabled, ``a*x**2``, or piecewise-linear table.

    Tables interpolate linearly between points and extrapolate with the end
    slopes, so they are defined on all reals.
    """

    kind: str  # "disabled" | "quadratic" | "tabulated"
    a: float = 0.0
    x: tuple[float, ...] = ()
    cost: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "quadratic":
            if self.a < 0:
                raise ValueError("quadratic coefficient must be nonnegative")
        elif self.kind == "tabulated":
            if len(self.x) < 2 or len(self.x) != len(self.cost):
                raise ValueError("tabulated cost needs >= 2 matching points")
            if np.any(np.diff(self.x) <= 0):
                raise ValueError("tabulated cost points must be strictly increasing")
        elif self.kind != "disabled":
            raise ValueError(f"unknown cost kind {self.kind!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "disabled":
            return np.zeros_like(x) if x.ndim else 0.0
        if self.kind == "quadratic":
            out = self.a * x * x
        else:
            xs = np.asarray(self.x, dtype=float)
            cs = np.asarray(self.cost, dtype=float)
            out = np.interp(x, xs, cs)
            lo_slope = (cs[1] - cs[0]) / (xs[1] - xs[0])
            hi_slope = (cs[-1] - cs[-2]) / (xs[-1] - xs[-2])
            out = np.where(x < xs[0], cs[0] + lo_slope * (x - xs[0]), out)
            out = np.where(x > xs[-1], cs[-1] + hi_slope * (x - xs[-1]), out)
        return out if out.ndim else float(out)


def nearest_index(grid: np.ndarray, x) -> np.ndarray:
    """Index of the grid point closest to each ``x``."""
    hi = np.clip(np.searchsorted(grid, x), 0, len(grid) - 1)
    lo = np.clip(hi - 1, 0, len(grid) - 1)
    return np.where(np.abs(grid[lo] - x) < np.abs(grid[hi] - x), lo, hi)


@dataclass(frozen=True)
class LoadCostFamily:
    """Load curtailment cost ``c(x, type)``.

    ``quadratic`` is ``kappa/2 * x**2`` for every real ``x``; ``tabulated``
    holds one cost row per type id on a shared curtailment grid.
    """

    family: str = "quadratic"
    grid: tuple[float, ...] = ()
    table: tuple[tuple[str, tuple[float, ...]], ...] = ()

    def __post_init__(self):
        if self.family == "tabulated":
            if not self.grid:
                raise ValueError("tabulated load cost needs a grid")
            if np.any(np.diff(self.grid) <= 0):
                raise ValueError("tabulated load grid must be strictly increasing")
            for tid, row in self.table:
                if len(row) != len(self.grid):
                    raise ValueError(f"tabulated row for {tid!r} has wrong length")
        elif self.family != "quadratic":
            raise ValueError(f"unknown load cost family {self.family!r}")

    @property
    def convex(self) -> bool:
        return self.family == "quadratic"

    def row(self, type_id: str) -> np.ndarray:
        for tid, r in self.table:
            if tid == type_id:
                return np.asarray(r, dtype=float)
        raise KeyError(f"no tabulated cost for type {type_id!r}")

    def __call__(self, x, load_type: LoadType):
        if self.family == "quadratic":
            x = np.asarray(x, dtype=float)
            out = 0.5 * load_type.kappa * x * x
            return out if out.ndim else float(out)
        grid = np.asarray(self.grid, dtype=float)
        x = np.asarray(x, dtype=float)
        idx = nearest_index(grid, x)
        if np.any(np.abs(grid[idx] - x) > 1e-9 * np.maximum(1.0, np.abs(x))):
            raise ValueError(f"curtailment {x} is off the tabulated grid")
        out = self.row(load_type.id)[idx]
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class CostModel:
    generator: ScalarCost = ScalarCost("disabled")
    reserve: ScalarCost = ScalarCost("quadratic", a=5.0)
    load: LoadCostFamily = LoadCostFamily()

    def __post_init__(self):
        if self.reserve.kind == "disabled":
            raise ValueError("reserve cost must be defined on all reals")


def eval_cost(model: CostModel, entity: str, x, load_type: LoadType | None = None):
    """Cost of ``x`` units for ``entity`` in {"generator", "reserve", "load"}."""
    if entity == "generator":
        return model.generator(x)
    if entity == "reserve":
        return model.reserve(x)
    if entity == "load":
        if load_type is None:
            raise ValueError("load cost needs a load type")
        return model.load(x, load_type)
    raise ValueError(f"unknown entity {entity!r}")


# ---------------------------------------------------------------------------
# penalty schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PenaltySchedule:
    """Threshold ``r(l)`` on deviation statistics and penalty ``J_p(l)``."""

    gamma: float = 1.0
    threshold_multiplier: float = 2.0
    penalty_exponent: float = 1.5

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.threshold_multiplier >= 1:
            raise ValueError("threshold_multiplier must be >= 1")
        if not self.penalty_exponent > 1:
            raise ValueError("penalty_exponent must be > 1")

    def minimal_threshold(self, l):
        l = np.asarray(l, dtype=float)
        return np.sqrt((math.log(2.0) + (1.0 + self.gamma) * np.log(l)) / (2.0 * l))

    def threshold(self, l):
        return self.threshold_multiplier * self.minimal_threshold(l)

    def penalty(self, l):
        return np.asarray(l, dtype=float) ** self.penalty_exponent


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrategySpec:
    kind: str = "truthful"
    distribution: tuple[float, ...] | None = None  # dist-misreport
    type_map: tuple[tuple[str, str], ...] | None = None  # type-misreport
    delta: int | None = None  # baseline-inflate
    kappa_map: tuple[tuple[float, float], ...] | None = None  # cost-exaggerate
    coherent: bool = False  # day-ahead report is the push-forward of the real-time map
    inner: "StrategySpec | None" = None  # intermittent
    period: int | None = None  # intermittent
    label: str | None = None

    @property
    def name(self) -> str:
        return self.label or describe_strategy(self)


def describe_strategy(spec: StrategySpec) -> str:
    if spec.kind == "truthful":
        return "truthful"
    if spec.kind == "dist-misreport":
        return "dist-misreport(" + ",".join(f"{p:g}" for p in spec.distribution) + ")"
    tag = "+coherent" if spec.coherent else ""
    if spec.kind == "type-misreport":
        return "type-misreport(" + ",".join(f"{a}>{b}" for a, b in spec.type_map) + ")" + tag
    if spec.kind == "baseline-inflate":
        return f"baseline-inflate({spec.delta})" + tag
    if spec.kind == "cost-exaggerate":
        return "cost-exaggerate(" + ",".join(f"{a:g}>{b:g}" for a, b in spec.kappa_map) + ")" + tag
    return f"intermittent({describe_strategy(spec.inner)},{spec.period})"


@dataclass(frozen=True)
class LoadGroupSpec:
    count: int
    distribution: TypeDistribution
    strategy: StrategySpec = StrategySpec()


@dataclass(frozen=True)
class ExpectationSpec:
    method: str = "enumerate"  # "enumerate" | "monte-carlo"
    samples: int = 20000
    z_nodes: int = 256


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    days: int
    mode: str
    curtailment_bounds: str
    type_space: TypeSpace
    loads: tuple[LoadGroupSpec, ...]
    net_demand: NetDemandModel
    costs: CostModel = CostModel()
    penalty: PenaltySchedule = PenaltySchedule()
    expectation: ExpectationSpec = ExpectationSpec()
    utility_convention: str = "physical"  # "physical" | "literal"

    @property
    def n(self) -> int:
        return sum(g.count for g in self.loads)

    @property
    def true_model(self) -> JointTypeModel:
        return JointTypeModel(tuple(LoadGroup(g.count, g.distribution) for g in self.loads))

    @property
    def box(self) -> bool:
        return self.curtailment_bounds == "box"

    def group_index(self) -> np.ndarray:
        """Group id of every load, in load order."""
        return np.repeat(np.arange(len(self.loads)), [g.count for g in self.loads])

    def replace(self, **changes) -> "ExperimentConfig":
        from dataclasses import replace

        return replace(self, **changes)


def composition_count(m: int, k: int) -> int:
    """Number of ways ``m`` identical loads can populate ``k`` types."""
    return math.comb(m + k - 1, k - 1)


def enumeration_size(model: JointTypeModel, k: int) -> int:
    """Scenario count after collapsing identical-load groups to type counts."""
    total = 1
    for g in model.groups:
        support = int(np.count_nonzero(g.distribution.array))
        total *= composition_count(g.count, max(support, 1))
        if total > 10**18:
            break
    return total


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _require(cond: bool, problems: list, msg: str):
    if not cond:
        problems.append(msg)


def _parse_scalar_cost(raw: Mapping, where: str, problems: list) -> ScalarCost | None:
    try:
        kind = raw.get("kind", "disabled")
        return ScalarCost(
            kind,
            a=float(raw.get("a", 0.0)),
            x=tuple(float(v) for v in raw.get("x", ())),
            cost=tuple(float(v) for v in raw.get("cost", ())),
        )
    except (ValueError, TypeError, AttributeError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _parse_strategy(raw: Mapping | None, where: str, problems: list) -> StrategySpec:
    if raw is None:
        return StrategySpec()
    if not isinstance(raw, Mapping):
        problems.append(f"{where}: strategy must be an object")
        return StrategySpec()
    kind = raw.get("kind", "truthful")
    if kind not in STRATEGY_KINDS:
        problems.append(f"{where}.kind: unknown strategy kind {kind!r}")
        return StrategySpec()
    spec = dict(kind=kind, coherent=bool(raw.get("coherent", False)), label=raw.get("label"))
    if kind == "dist-misreport":
        if "distribution" not in raw:
            problems.append(f"{where}.distribution: required for dist-misreport")
        else:
            spec["distribution"] = tuple(float(p) for p in raw["distribution"])
    elif kind == "type-misreport":
        tm = raw.get("type_map")
        if not isinstance(tm, Mapping):
            problems.append(f"{where}.type_map: required mapping for type-misreport")
        else:
            spec["type_map"] = tuple((str(a), str(b)) for a, b in tm.items())
    elif kind == "baseline-inflate":
        spec["delta"] = int(raw.get("delta", 1))
        if spec["delta"] < 1:
            problems.append(f"{where}.delta: must be >= 1")
    elif kind == "cost-exaggerate":
        km = raw.get("kappa_map")
        if not isinstance(km, Mapping):
            problems.append(f"{where}.kappa_map: required mapping for cost-exaggerate")
        else:
            spec["kappa_map"] = tuple((float(a), float(b)) for a, b in km.items())
    elif kind == "intermittent":
        spec["inner"] = _parse_strategy(raw.get("inner"), f"{where}.inner", problems)
        if spec["inner"].kind in ("truthful", "intermittent"):
            problems.append(f"{where}.inner: must be a non-truthful, non-intermittent strategy")
        spec["period"] = int(raw.get("period", 0))
        if spec["period"] < 1:
            problems.append(f"{where}.period: must be >= 1")
    return StrategySpec(**spec)


def validate_config(raw: Mapping[str, Any]) -> ExperimentConfig:
    """Check a configuration document and fill defaults.

    Raises :class:`ConfigError` listing every violated invariant, each
    prefixed by the offending field path.
    """
    problems: list[str] = []
    if not isinstance(raw, Mapping):
        raise ConfigError(["config: document must be a JSON object"])

    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and 0 <= seed < 2**64, problems, "seed: must be a 64-bit unsigned integer")
    days = raw.get("days")
    _require(isinstance(days, int) and days >= 1, problems, "days: must be a positive integer")
    mode = raw.get("mode", "explicit-baseline")
    _require(mode in MODES, problems, f"mode: must be one of {MODES}")
    bounds = raw.get("curtailment_bounds", "unconstrained")
    _require(bounds in BOUNDS, problems, f"curtailment_bounds: must be one of {BOUNDS}")
    convention = raw.get("utility_convention", "physical")
    _require(convention in ("physical", "literal"), problems, "utility_convention: must be 'physical' or 'literal'")

    # type space
    ts_raw = raw.get("type_space") or {}
    type_space = None
    try:
        types = tuple(
            LoadType(str(t["id"]), int(t.get("baseline", 0)), float(t.get("kappa", 1.0)))
            for t in ts_raw.get("types", ())
        )
        d_max = int(ts_raw.get("d_max", max((t.baseline for t in types), default=0)))
        type_space = TypeSpace(types, d_max)
    except (ValueError, TypeError, KeyError, AttributeError) as exc:
        problems.append(f"type_space: {exc}")
    k = len(type_space) if type_space else 0

    # costs
    c_raw = raw.get("costs") or {}
    gen = _parse_scalar_cost(c_raw.get("generator", {"kind": "disabled"}), "costs.generator", problems)
    res = _parse_scalar_cost(c_raw.get("reserve", {"kind": "quadratic", "a": 5.0}), "costs.reserve", problems)
    if res is not None and res.kind == "disabled":
        problems.append("costs.reserve: must be defined on all reals (quadratic or tabulated)")
        res = None
    load_family = None
    try:
        l_raw = c_raw.get("load", {"family": "quadratic"})
        table = l_raw.get("table", {})
        load_family = LoadCostFamily(
            l_raw.get("family", "quadratic"),
            grid=tuple(float(v) for v in l_raw.get("grid", ())),
            table=tuple((str(tid), tuple(float(v) for v in row)) for tid, row in table.items()),
        )
    except (ValueError, TypeError, AttributeError) as exc:
        problems.append(f"costs.load: {exc}")
    if type_space is not None and load_family is not None:
        if load_family.family == "quadratic":
            for t in type_space.types:
                _require(t.kappa > 0, problems, f"type_space.types[{t.id}].kappa: must be > 0 for the quadratic family")
        else:
            have = {tid for tid, _ in load_family.table}
            for t in type_space.types:
                _require(t.id in have, problems, f"costs.load.table: missing row for type {t.id!r}")
    if load_family is not None and load_family.family == "quadratic" and res is not None:
        _require(res.kind == "quadratic", problems,
                 "costs.reserve: the quadratic load family needs a quadratic reserve cost")

    # loads
    loads: list[LoadGroupSpec] = []
    for gi, g in enumerate(raw.get("loads") or ()):
        where = f"loads[{gi}]"
        try:
            count = int(g.get("count", 1))
        except (TypeError, ValueError):
            problems.append(f"{where}.count: must be an integer")
            continue
        _require(count >= 1, problems, f"{where}.count: must be >= 1")
        probs = tuple(float(p) for p in g.get("distribution", ()))
        if k and len(probs) != k:
            problems.append(f"{where}.distribution: has {len(probs)} entries, type space has {k}")
            continue
        try:
            dist = TypeDistribution(probs)
        except ValueError as exc:
            problems.append(f"{where}.distribution: {exc}")
            continue
        strategy = _parse_strategy(g.get("strategy"), f"{where}.strategy", problems)
        loads.append(LoadGroupSpec(count, dist, strategy))
    if not loads and not any(p.startswith("loads[") for p in problems):
        problems.append("loads: at least one load group is required")

    # net demand
    nd_raw = raw.get("net_demand") or {}
    net_demand = None
    try:
        net_demand = NetDemandModel(
            nd_raw.get("kind", "uniform"),
            lo=float(nd_raw.get("lo", 0.0)),
            hi=float(nd_raw.get("hi", 0.0)),
            values=tuple(float(v) for v in nd_raw.get("values", ())),
            probs=tuple(float(p) for p in nd_raw.get("probs", ())),
        )
    except (ValueError, TypeError) as exc:
        problems.append(f"net_demand: {exc}")

    # penalty
    p_raw = raw.get("penalty") or {}
    penalty = None
    try:
        penalty = PenaltySchedule(
            float(p_raw.get("gamma", 1.0)),
            float(p_raw.get("threshold_multiplier", 2.0)),
            float(p_raw.get("penalty_exponent", 1.5)),
        )
    except (ValueError, TypeError) as exc:
        problems.append(f"penalty: {exc}")

    e_raw = raw.get("expectation") or {}
    expectation = ExpectationSpec(
        e_raw.get("method", "enumerate"), int(e_raw.get("samples", 20000)), int(e_raw.get("z_nodes", 256))
    )
    _require(expectation.method in ("enumerate", "monte-carlo"), problems,
             "expectation.method: must be 'enumerate' or 'monte-carlo'")
    _require(expectation.samples >= 1, problems, "expectation.samples: must be >= 1")
    _require(expectation.z_nodes >= 1, problems, "expectation.z_nodes: must be >= 1")

    if mode == "net-demand" and type_space is not None:
        if any(t.baseline != 0 for t in type_space.types):
            problems.append("type_space: baselines must be 0 in net-demand mode")
        if bounds != "unconstrained":
            problems.append("curtailment_bounds: must be 'unconstrained' in net-demand mode")

    if problems:
        raise ConfigError(problems)

    cfg = ExperimentConfig(
        seed=seed,
        days=days,
        mode=mode,
        curtailment_bounds=bounds,
        type_space=type_space,
        loads=tuple(loads),
        net_demand=net_demand,
        costs=CostModel(gen, res, load_family),
        penalty=penalty,
        expectation=expectation,
        utility_convention=convention,
    )

    # checks needing the assembled config
    from .agents import validate_strategy  # local import: agents depends on this module

    for gi, g in enumerate(cfg.loads):
        try:
            validate_strategy(g.strategy, cfg)
        except ValueError as exc:
            problems.append(f"loads[{gi}].strategy: {exc}")
    if expectation.method == "enumerate":
        size = enumeration_size(cfg.true_model, k)
        if size > ENUMERATION_LIMIT:
            problems.append(
                f"expectation.method: enumeration needs {size} type scenarios (> {ENUMERATION_LIMIT}); use monte-carlo"
            )
    if load_family is not None and load_family.family == "tabulated" and cfg.n > 4:
        problems.append("costs.load: tabulated family is limited to n <= 4 loads (exhaustive search)")
    if problems:
        raise ConfigError(problems)
    return cfg


def _strategy_to_dict(spec: StrategySpec) -> dict:
    out: dict[str, Any] = {"kind": spec.kind}
    if spec.label:
        out["label"] = spec.label
    if spec.kind == "dist-misreport":
        out["distribution"] = list(spec.distribution)
    elif spec.kind == "type-misreport":
        out["type_map"] = dict(spec.type_map)
    elif spec.kind == "baseline-inflate":
        out["delta"] = spec.delta
    elif spec.kind == "cost-exaggerate":
        out["kappa_map"] = {repr(a): b for a, b in spec.kappa_map}
    elif spec.kind == "intermittent":
        out["inner"] = _strategy_to_dict(spec.inner)
        out["period"] = spec.period
    if spec.kind in ("type-misreport", "baseline-inflate", "cost-exaggerate"):
        out["coherent"] = spec.coherent
    return out


def _scalar_cost_to_dict(c: ScalarCost) -> dict:
    if c.kind == "quadratic":
        return {"kind": "quadratic", "a": c.a}
    if c.kind == "tabulated":
        return {"kind": "tabulated", "x": list(c.x), "cost": list(c.cost)}
    return {"kind": "disabled"}


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Inverse of :func:`validate_config` (all defaults made explicit)."""
    nd = cfg.net_demand
    if nd.kind == "uniform":
        nd_dict = {"kind": "uniform", "lo": nd.lo, "hi": nd.hi}
    else:
        nd_dict = {"kind": "discrete", "values": list(nd.values), "probs": list(nd.probs)}
    load = {"family": cfg.costs.load.family}
    if cfg.costs.load.family == "tabulated":
        load["grid"] = list(cfg.costs.load.grid)
        load["table"] = {tid: list(row) for tid, row in cfg.costs.load.table}
    return {
        "seed": cfg.seed,
        "days": cfg.days,
        "mode": cfg.mode,
        "curtailment_bounds": cfg.curtailment_bounds,
        "utility_convention": cfg.utility_convention,
        "type_space": {
            "d_max": cfg.type_space.d_max,
            "types": [{"id": t.id, "baseline": t.baseline, "kappa": t.kappa} for t in cfg.type_space.types],
        },
        "loads": [
            {"count": g.count, "distribution": list(g.distribution.probs), "strategy": _strategy_to_dict(g.strategy)}
            for g in cfg.loads
        ],
        "net_demand": nd_dict,
        "costs": {
            "generator": _scalar_cost_to_dict(cfg.costs.generator),
            "reserve": _scalar_cost_to_dict(cfg.costs.reserve),
            "load": load,
        },
        "penalty": {
            "gamma": cfg.penalty.gamma,
            "threshold_multiplier": cfg.penalty.threshold_multiplier,
            "penalty_exponent": cfg.penalty.penalty_exponent,
        },
        "expectation": {
            "method": cfg.expectation.method,
            "samples": cfg.expectation.samples,
            "z_nodes": cfg.expectation.z_nodes,
        },
    }


CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ExperimentConfig",
    "type": "object",
    "required": ["days", "type_space", "loads", "net_demand"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1, "default": 0},
        "days": {"type": "integer", "minimum": 1},
        "mode": {"enum": list(MODES), "default": "explicit-baseline"},
        "curtailment_bounds": {"enum": list(BOUNDS), "default": "unconstrained"},
        "utility_convention": {"enum": ["physical", "literal"], "default": "physical"},
        "type_space": {
            "type": "object",
            "properties": {
                "d_max": {"type": "integer", "minimum": 0},
                "types": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id"],
                        "properties": {
                            "id": {"type": "string"},
                            "baseline": {"type": "integer", "minimum": 0, "default": 0},
                            "kappa": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
                        },
                    },
                },
            },
        },
        "loads": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["distribution"],
                "properties": {
                    "count": {"type": "integer", "minimum": 1, "default": 1},
                    "distribution": {"type": "array", "items": {"type": "number", "minimum": 0}},
                    "strategy": {
                        "type": "object",
                        "properties": {
                            "kind": {"enum": list(STRATEGY_KINDS), "default": "truthful"},
                            "distribution": {"type": "array", "items": {"type": "number"}},
                            "type_map": {"type": "object", "additionalProperties": {"type": "string"}},
                            "delta": {"type": "integer", "minimum": 1, "default": 1},
                            "kappa_map": {"type": "object", "additionalProperties": {"type": "number"}},
                            "coherent": {"type": "boolean", "default": False},
                            "inner": {"type": "object"},
                            "period": {"type": "integer", "minimum": 1},
                            "label": {"type": "string"},
                        },
                    },
                },
            },
        },
        "net_demand": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["uniform", "discrete"], "default": "uniform"},
                "lo": {"type": "number"},
                "hi": {"type": "number"},
                "values": {"type": "array", "items": {"type": "number"}},
                "probs": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
        },
        "costs": {
            "type": "object",
            "properties": {
                "generator": {"type": "object", "default": {"kind": "disabled"}},
                "reserve": {"type": "object", "default": {"kind": "quadratic", "a": 5.0}},
                "load": {"type": "object", "default": {"family": "quadratic"}},
            },
        },
        "penalty": {
            "type": "object",
            "properties": {
                "gamma": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
                "threshold_multiplier": {"type": "number", "minimum": 1, "default": 2.0},
                "penalty_exponent": {"type": "number", "exclusiveMinimum": 1, "default": 1.5},
            },
        },
        "expectation": {
            "type": "object",
            "properties": {
                "method": {"enum": ["enumerate", "monte-carlo"], "default": "enumerate"},
                "samples": {"type": "integer", "minimum": 1, "default": 20000},
                "z_nodes": {"type": "integer", "minimum": 1, "default": 256},
            },
        },
    },
}


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass
class DayStream:
    """Seeded random streams for net demand, true types and strategy noise.

    The three streams are independent children of one seed, so swapping a
    strategy never perturbs the (z, type) sample path.
    """

    z_rng: np.random.Generator
    type_rngs: list[np.random.Generator]
    strategy_rng: np.random.Generator
    day: int = 0

    @classmethod
    def from_seed(cls, seed: int, n_groups: int) -> "DayStream":
        ss = np.random.SeedSequence(seed)
        z_ss, t_ss, s_ss = ss.spawn(3)
        return cls(
            np.random.Generator(np.random.PCG64(z_ss)),
            [np.random.Generator(np.random.PCG64(c)) for c in t_ss.spawn(n_groups)],
            np.random.Generator(np.random.PCG64(s_ss)),
        )


def sample_days(config: ExperimentConfig, stream: DayStream, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` IID days: net demand ``(count,)`` and type indices ``(count, n)``."""
    z = config.net_demand.sample(stream.z_rng, count)
    cols = []
    for g, rng in zip(config.loads, stream.type_rngs):
        cdf = np.cumsum(g.distribution.array)
        u = rng.random((count, g.count))
        cols.append(np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))
    stream.day += count
    return z, np.concatenate(cols, axis=1).astype(np.int64)


def sample_day(config: ExperimentConfig, stream: DayStream) -> tuple[float, np.ndarray]:
    z, types = sample_days(config, stream, 1)
    return float(z[0]), types[0]
