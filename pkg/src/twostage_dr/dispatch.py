"""Real-time curtailment dispatch and the day-ahead stochastic program.

The day-ahead argmin over (generator dispatch, curtailment policy) splits
into a 1-D search over the dispatch and a pointwise real-time solve for
every (net demand, reported profile) scenario, so the policy is never
tabulated: it *is* :func:`solve_real_time` evaluated with the chosen dispatch.

Quadratic loads with a quadratic reserve go through an exact KKT solve
(shadow price of the balance constraint, piecewise-linear under box bounds).
Tabulated load costs are solved by exhaustive search over their grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    ENUMERATION_LIMIT,
    CostModel,
    ExpectationSpec,
    JointTypeModel,
    LoadType,
    NetDemandModel,
    TypeSpace,
    enumeration_size,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RealTimeSolution:
    curtailments: np.ndarray
    reserve: float
    generator_cost: float
    reserve_cost: float
    load_costs: np.ndarray
    social_cost: float


@dataclass(frozen=True)
class DayAheadDecision:
    g_star: float
    reported_model: JointTypeModel
    w_star: float
    expected_load_cost: np.ndarray  # per load
    group_load_cost: np.ndarray  # per group, per member
    std_error: float = 0.0


# ---------------------------------------------------------------------------
# real-time solve
# ---------------------------------------------------------------------------


def _kkt_quadratic(m, kappa, mult, upper, a_r):
    """Batched minimiser of ``a_r*g_r**2 + sum mult*kappa/2*x**2``.

    ``g_r = m - sum(mult * x)``. ``m`` is ``(B,)``; ``kappa``, ``mult`` and
    ``upper`` broadcast to ``(B, s)``. ``upper=None`` means unconstrained,
    otherwise ``0 <= x <= upper``. Returns ``(x, g_r)``.
    """
    m = np.asarray(m, dtype=float)
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), mult.shape)
    if a_r == 0:
        x = np.zeros(mult.shape)
        return x, m - (mult * x).sum(axis=1)
    if upper is None:
        lam = 2.0 * a_r * m / (1.0 + 2.0 * a_r * (mult / kappa).sum(axis=1))
        x = lam[:, None] / kappa
    else:
        upper = np.broadcast_to(np.asarray(upper, dtype=float), mult.shape)
        brk = np.sort(kappa * upper, axis=1)
        pts = np.concatenate([np.zeros((len(m), 1)), brk], axis=1)
        # balance residual F(lam) = lam/(2 a_r) + sum mult*clip(lam/kappa, 0, upper) at each breakpoint
        sat = np.minimum(pts[:, :, None] / kappa[:, None, :], upper[:, None, :])
        fp = pts / (2.0 * a_r) + (mult[:, None, :] * sat).sum(axis=2)
        s = brk.shape[1]
        idx = (fp < m[:, None]).sum(axis=1)
        rows = np.arange(len(m))
        inner = np.clip(idx, 1, s)
        p0, p1 = pts[rows, inner - 1], pts[rows, inner]
        f0, f1 = fp[rows, inner - 1], fp[rows, inner]
        with np.errstate(divide="ignore", invalid="ignore"):
            lam_mid = p0 + (m - f0) * np.where(f1 > f0, (p1 - p0) / (f1 - f0), 0.0)
        lam_top = pts[:, -1] + (m - fp[:, -1]) * 2.0 * a_r
        lam = np.where(m <= 0, 2.0 * a_r * m, np.where(idx > s, lam_top, lam_mid))
        x = np.clip(lam[:, None] / kappa, 0.0, upper)
    g_r = m - (mult * x).sum(axis=1)
    return x, g_r


def _brute_tabulated(m: float, reported: Sequence[LoadType], costs: CostModel, box: bool):
    grid = np.asarray(costs.load.grid, dtype=float)
    axes, rows = [], []
    for t in reported:
        keep = (grid >= 0) & (grid <= t.baseline) if box else np.ones(len(grid), bool)
        if not keep.any():
            raise ValueError(f"empty curtailment grid for type {t.id!r} under box bounds")
        axes.append(grid[keep])
        rows.append(costs.load.row(t.id)[keep])
    mesh = np.meshgrid(*axes, indexing="ij")
    cmesh = np.meshgrid(*rows, indexing="ij")
    total_x = sum(mesh)
    obj = costs.reserve(m - total_x) + sum(cmesh)
    flat = int(np.argmin(obj))
    pos = np.unravel_index(flat, obj.shape)
    x = np.array([ax[p] for ax, p in zip(axes, pos)])
    return x, m - x.sum()


def solve_real_time(
    z: float,
    g: float,
    reported: Sequence[LoadType],
    costs: CostModel,
    box: bool = False,
) -> RealTimeSolution:
    """Minimise reserve plus curtailment cost for one realised day.

    ``reported`` are the reported types; their baselines enter the
    mismatch ``z - g + sum(d_hat - x)`` that the reserve must cover.
    """
    reported = list(reported)
    m = z - g + sum(t.baseline for t in reported)
    if costs.load.family == "tabulated":
        x, g_r = _brute_tabulated(m, reported, costs, box)
    else:
        if costs.reserve.kind != "quadratic":
            raise ValueError("closed-form path needs a quadratic reserve cost")
        if not reported:
            x, g_r = np.zeros(0), m
        else:
            kappa = np.array([[t.kappa for t in reported]])
            upper = np.array([[t.baseline for t in reported]], dtype=float) if box else None
            xb, grb = _kkt_quadratic(np.array([m]), kappa, np.ones_like(kappa), upper, costs.reserve.a)
            x, g_r = xb[0], float(grb[0])
    load_costs = np.array([costs.load(xi, t) for xi, t in zip(x, reported)], dtype=float)
    gen = float(costs.generator(g))
    res = float(costs.reserve(g_r))
    return RealTimeSolution(
        curtailments=np.asarray(x, dtype=float),
        reserve=float(g_r),
        generator_cost=gen,
        reserve_cost=res,
        load_costs=load_costs,
        social_cost=gen + res + float(load_costs.sum()),
    )


def solve_profiles(
    z: np.ndarray,
    g: float,
    profiles: np.ndarray,
    type_space: TypeSpace,
    costs: CostModel,
    box: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched real-time solve over days.

    ``profiles`` holds reported type indices, shape ``(B, n)``. Returns
    per-load curtailments ``(B, n)`` and reserve purchases ``(B,)``. Loads
    reporting the same type receive the same curtailment, so the quadratic
    solve runs on per-type counts.
    """
    profiles = np.asarray(profiles)
    B, n = profiles.shape
    base = type_space.baselines
    m = np.asarray(z, dtype=float) - g + base[profiles].sum(axis=1)
    if costs.load.family == "tabulated":
        x = np.empty((B, n))
        g_r = np.empty(B)
        for b in range(B):
            reported = [type_space.types[t] for t in profiles[b]]
            x[b], g_r[b] = _brute_tabulated(m[b], reported, costs, box)
        return x, g_r
    if costs.reserve.kind != "quadratic":
        raise ValueError("closed-form path needs a quadratic reserve cost")
    k = len(type_space)
    counts = type_counts(profiles, k)
    xt, g_r = _kkt_quadratic(m, type_space.kappas[None, :], counts, base[None, :] if box else None,
                             costs.reserve.a)
    x = np.take_along_axis(xt, profiles, axis=1)
    # reserve follows from the per-load curtailments so the balance identity is exact
    g_r = m - x.sum(axis=1)
    return x, g_r


def type_counts(profiles: np.ndarray, k: int) -> np.ndarray:
    B, n = profiles.shape
    flat = (np.arange(B)[:, None] * k + profiles).ravel()
    return np.bincount(flat, minlength=B * k).reshape(B, k).astype(float)


# ---------------------------------------------------------------------------
# scenario sets and expectations
# ---------------------------------------------------------------------------


def _compositions(m: int, k: int):
    """All nonnegative integer vectors of length ``k`` summing to ``m``."""
    for bars in itertools.combinations(range(m + k - 1), k - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(m + k - 1 - prev - 1)
        yield out


def _group_configs(count: int, probs: np.ndarray):
    """Type-count vectors of one load group with their multinomial probabilities."""
    support = np.flatnonzero(probs > 0)
    k = len(probs)
    logp = np.log(probs[support])
    comps, weights = [], []
    for c in _compositions(count, len(support)):
        c = np.asarray(c)
        full = np.zeros(k)
        full[support] = c
        lw = math.lgamma(count + 1) - sum(math.lgamma(v + 1) for v in c) + float(np.dot(c, logp))
        comps.append(full)
        weights.append(math.exp(lw))
    return np.array(comps), np.array(weights)


@dataclass
class ScenarioSet:
    """Weighted (net demand, per-group type counts) scenarios.

    ``counts`` has shape ``(C, G, k)``. For enumerated sets every count row
    is crossed with every net-demand node; Monte Carlo sets pair row ``c``
    with ``z[c]``. Monte Carlo sets also keep, per group, the counts of all
    members but one plus the last member's draw, so dropping one member
    reuses the very same draws.
    """

    counts: np.ndarray
    weights: np.ndarray
    z: np.ndarray
    z_weights: np.ndarray
    paired: bool
    extra: np.ndarray | None = None  # (C, G) type index of each group's last member

    def drop_member(self, gi: int) -> "ScenarioSet":
        if self.extra is None:
            raise ValueError("only Monte Carlo sets support dropping a member in place")
        counts = self.counts.copy()
        rows = np.arange(len(counts))
        counts[rows, gi, self.extra[:, gi]] -= 1
        return ScenarioSet(counts, self.weights, self.z, self.z_weights, True, None)


def enumerate_scenarios(model: JointTypeModel, z_model: NetDemandModel, k: int, z_nodes: int) -> ScenarioSet:
    size = enumeration_size(model, k)
    if size > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration bound exceeded: {size} type scenarios > {ENUMERATION_LIMIT}")
    per_group = [_group_configs(g.count, g.distribution.array) for g in model.groups]
    if not per_group:
        counts = np.zeros((1, 0, k))
        weights = np.ones(1)
    else:
        idx = np.array(list(itertools.product(*[range(len(w)) for _, w in per_group])))
        counts = np.stack([per_group[gi][0][idx[:, gi]] for gi in range(len(per_group))], axis=1)
        weights = np.prod([per_group[gi][1][idx[:, gi]] for gi in range(len(per_group))], axis=0)
    z, zw = z_model.nodes(z_nodes)
    return ScenarioSet(counts, weights, z, zw, paired=False)


def sample_scenarios(model: JointTypeModel, z_model: NetDemandModel, k: int, samples: int, seed: int) -> ScenarioSet:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5CE7])))
    z = z_model.sample(rng, samples)
    counts = np.zeros((samples, len(model.groups), k))
    extra = np.zeros((samples, len(model.groups)), dtype=np.int64)
    for gi, g in enumerate(model.groups):
        p = g.distribution.array
        counts[:, gi, :] = rng.multinomial(g.count - 1, p, size=samples)
        cdf = np.cumsum(p)
        e = np.minimum(np.searchsorted(cdf, rng.random(samples), side="right"), k - 1)
        extra[:, gi] = e
        counts[np.arange(samples), gi, e] += 1
    return ScenarioSet(counts, np.full(samples, 1.0 / samples), z, np.full(samples, 1.0 / samples), True, extra)


@dataclass(frozen=True)
class Expectation:
    value: float  # generator cost + expected inner optimum
    group_load_cost: np.ndarray  # expected curtailment cost per member of each group
    std_error: float


def evaluate(
    g: float,
    scen: ScenarioSet,
    type_space: TypeSpace,
    costs: CostModel,
    box: bool = False,
    chunk: int = 1 << 18,
) -> Expectation:
    """Expected social cost at generator dispatch ``g`` over a scenario set."""
    kappa = type_space.kappas
    base = type_space.baselines
    C, G, _ = scen.counts.shape
    total_counts = scen.counts.sum(axis=1)  # (C, k)
    group_sizes = scen.counts[0].sum(axis=1) if C else np.zeros(G)
    acc_inner = 0.0
    acc_sq = 0.0
    acc_group = np.zeros(G)
    Z = len(scen.z)
    zc = max(1, chunk // max(Z, 1)) if not scen.paired else chunk
    for start in range(0, C, zc):
        sl = slice(start, min(C, start + zc))
        tc = total_counts[sl]
        gc = scen.counts[sl]
        w = scen.weights[sl]
        if scen.paired:
            zz = scen.z[sl]
            ww = w
            tcb, gcb = tc, gc
        else:
            zz = np.tile(scen.z, tc.shape[0])
            ww = (w[:, None] * scen.z_weights[None, :]).ravel()
            tcb = np.repeat(tc, Z, axis=0)
            gcb = np.repeat(gc, Z, axis=0)
        m = zz - g + tcb @ base
        if costs.load.family == "tabulated":
            xt_cost, g_r = _tabulated_expectation_rows(m, tcb, gcb, type_space, costs, box)
            per_group = xt_cost
        else:
            if costs.reserve.kind != "quadratic":
                raise ValueError("closed-form path needs a quadratic reserve cost")
            x, g_r = _kkt_quadratic(m, kappa[None, :], tcb, base[None, :] if box else None, costs.reserve.a)
            unit = 0.5 * kappa[None, :] * x * x  # cost per load of each type
            per_group = (gcb * unit[:, None, :]).sum(axis=2)  # (rows, G)
        inner = costs.reserve(g_r) + per_group.sum(axis=1)
        acc_inner += float(np.dot(ww, inner))
        acc_sq += float(np.dot(ww, inner * inner))
        acc_group += ww @ per_group
    mean = acc_inner
    se = 0.0
    if scen.paired and C > 1:
        var = max(acc_sq - mean * mean, 0.0) * C / (C - 1)
        se = math.sqrt(var / C)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_member = np.where(group_sizes > 0, acc_group / np.maximum(group_sizes, 1), 0.0)
    return Expectation(float(costs.generator(g)) + mean, per_member, se)


def _tabulated_expectation_rows(m, tcb, gcb, type_space, costs, box):
    rows, G, k = gcb.shape
    per_group = np.zeros((rows, G))
    g_r = np.zeros(rows)
    for r in range(rows):
        owners, reported = [], []
        for gi in range(G):
            for t in range(k):
                c = int(round(gcb[r, gi, t]))
                owners += [gi] * c
                reported += [type_space.types[t]] * c
        x, g_r[r] = _brute_tabulated(m[r], reported, costs, box)
        for xi, t, gi in zip(x, reported, owners):
            per_group[r, gi] += costs.load(xi, t)
    return per_group, g_r


def golden_section(f, lo: float, hi: float, tol: float = 1e-8, max_iter: int = 500):
    """Minimise a unimodal ``f`` on ``[lo, hi]``; endpoints are also checked."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > tol and it < max_iter:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        it += 1
    best_x, best_f = (x1, f1) if f1 <= f2 else (x2, f2)
    for x in (lo, hi):
        fx = f(x)
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def build_scenarios(
    model: JointTypeModel,
    z_model: NetDemandModel,
    k: int,
    method: ExpectationSpec,
    seed: int = 0,
) -> ScenarioSet:
    if method.method == "enumerate":
        return enumerate_scenarios(model, z_model, k, method.z_nodes)
    return sample_scenarios(model, z_model, k, method.samples, seed)


def expected_social_cost(
    g: float,
    model: JointTypeModel,
    z_model: NetDemandModel,
    type_space: TypeSpace,
    costs: CostModel,
    method: ExpectationSpec = ExpectationSpec(),
    box: bool = False,
    seed: int = 0,
) -> Expectation:
    scen = build_scenarios(model, z_model, len(type_space), method, seed)
    return evaluate(g, scen, type_space, costs, box)


class DayAheadSolver:
    """Day-ahead program for one reported model, with cached exclusions.

    Exclusion results are cached per load group, since removing any member
    of a group of identical loads gives the same reduced system.
    """

    def __init__(
        self,
        model: JointTypeModel,
        z_model: NetDemandModel,
        type_space: TypeSpace,
        costs: CostModel,
        method: ExpectationSpec = ExpectationSpec(),
        box: bool = False,
        seed: int = 0,
        tol: float = 1e-8,
    ):
        self.model = model
        self.z_model = z_model
        self.type_space = type_space
        self.costs = costs
        self.method = method
        self.box = box
        self.seed = seed
        self.tol = tol
        self._scen = build_scenarios(model, z_model, len(type_space), method, seed)
        self._decision: DayAheadDecision | None = None
        self._excluded: dict[int, DayAheadDecision] = {}

    def _solve(self, model: JointTypeModel, scen: ScenarioSet) -> DayAheadDecision:
        def W(g):
            return evaluate(g, scen, self.type_space, self.costs, self.box).value

        if self.costs.generator.kind == "disabled":
            g_star = 0.0
        else:
            d_total = model.n * self.type_space.d_max
            hi = float(np.max(scen.z)) + d_total if len(scen.z) else d_total
            hi = max(hi, 0.0)
            g_star, _ = golden_section(W, 0.0, hi, tol=self.tol) if hi > 0 else (0.0, None)
        ex = evaluate(g_star, scen, self.type_space, self.costs, self.box)
        per_load = np.repeat(ex.group_load_cost, [g.count for g in model.groups])
        return DayAheadDecision(g_star, model, ex.value, per_load, ex.group_load_cost, ex.std_error)

    def solve(self) -> DayAheadDecision:
        if self._decision is None:
            self._decision = self._solve(self.model, self._scen)
        return self._decision

    def excluding(self, i: int) -> DayAheadDecision:
        gi = self.model.group_of(i)
        if gi not in self._excluded:
            reduced = self.model.without_group_member(gi)
            if self._scen.paired:
                scen = self._scen.drop_member(gi)
                if self.model.groups[gi].count == 1:
                    scen.counts = np.delete(scen.counts, gi, axis=1)
            else:
                scen = enumerate_scenarios(reduced, self.z_model, len(self.type_space), self.method.z_nodes)
            self._excluded[gi] = self._solve(reduced, scen)
        return self._excluded[gi]


def solve_day_ahead(model, z_model, type_space, costs, method=ExpectationSpec(), box=False, seed=0) -> DayAheadDecision:
    return DayAheadSolver(model, z_model, type_space, costs, method, box, seed).solve()


def solve_day_ahead_excluding(model, i, z_model, type_space, costs, method=ExpectationSpec(), box=False, seed=0):
    return DayAheadSolver(model, z_model, type_space, costs, method, box, seed).excluding(i)
