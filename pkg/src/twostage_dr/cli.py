"""Command-line front end.

Exit codes: 0 success, 1 runtime failure (including a failed verification
check), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import instances
from .benchmark import default_grid, sweep
from .dispatch import DayAheadSolver, solve_real_time
from .engine import audit_compliance, run, summarize, write_summary
from .mechanism import DeviationTracker, recount
from .model import (
    CONFIG_SCHEMA,
    ConfigError,
    CostModel,
    LoadType,
    ScalarCost,
    config_to_dict,
    validate_config,
)
from .oracle import brute_force_real_time, enumerate_deviations

log = logging.getLogger("twostage_dr")

SWEEP_HEADER = ("p", "posted_avg_cost", "optimal_avg_cost")


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def load_config(path: str):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON ({exc})"]) from None
    return validate_config(raw)


def prepare_out(out: str, names: list[str], force: bool) -> Path:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    clash = [n for n in names if (d / n).exists()]
    if clash and not force:
        raise UsageError(f"refusing to overwrite {', '.join(clash)} in {d} (pass --force)")
    return d


def parse_grid(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        grid = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse rebate grid {text!r}") from None
    if not grid:
        raise UsageError("rebate grid is empty")
    return grid


def write_sweep_csv(path: Path, result) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in result.results:
            w.writerow([repr(r.p), repr(r.average), repr(result.optimal_average)])


def read_sweep_csv(path: Path) -> list[tuple[float, float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != SWEEP_HEADER:
        raise ValueError("unexpected sweep header")
    return [tuple(float(v) for v in r) for r in rows[1:]]


def dump_json(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    out = prepare_out(args.out, ["ledger.csv", "summary.json", "config.json"], args.force)
    t0 = time.perf_counter()
    result = run(cfg, ledger_path=out / "ledger.csv")
    log.info("simulated %d days x %d loads in %.1fs", cfg.days, cfg.n, time.perf_counter() - t0)
    write_summary(summarize(result, args.tail_fraction), out / "summary.json")
    dump_json(config_to_dict(cfg), out / "config.json")
    return 0


def _sweep(args, names):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if cfg.mode != "net-demand":
        raise UsageError("posted-price comparison needs a net-demand-mode config")
    grid = parse_grid(args.grid)
    if grid is None:
        grid = default_grid(cfg, args.points).tolist()
    out = prepare_out(args.out, names, args.force)
    return cfg, grid, out, sweep(grid, cfg)


def cmd_sweep(args) -> int:
    _, _, out, result = _sweep(args, ["sweep.csv"])
    write_sweep_csv(out / "sweep.csv", result)
    return 0


def cmd_compare(args) -> int:
    cfg, grid, out, result = _sweep(args, ["fig2.csv", "fig2_summary.json"])
    write_sweep_csv(out / "fig2.csv", result)
    posted = result.posted
    j = int(np.argmin(posted))
    summary = {
        "days": cfg.days,
        "loads": cfg.n,
        "grid_points": len(grid),
        "posted_min_avg_cost": float(posted[j]),
        "posted_argmin_p": float(grid[j]),
        "interior_minimum": bool(0 < j < len(grid) - 1),
        "optimal_avg_cost": result.optimal_average,
        "ratio": float(posted[j] / result.optimal_average) if result.optimal_average > 0 else None,
        "dominance_every_day": bool(np.all(np.stack([r.per_day for r in result.results]) >= result.optimal_per_day)),
    }
    dump_json(summary, out / "fig2_summary.json")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_schema(args) -> int:
    print(json.dumps(CONFIG_SCHEMA, indent=2))
    return 0


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------


class Report:
    def __init__(self):
        self.checks: list[dict] = []

    def check(self, name: str, ok: bool, measured: float, tolerance: float) -> None:
        self.checks.append({"check": name, "ok": bool(ok), "measured": float(measured), "tolerance": float(tolerance)})
        if not ok:
            raise CheckFailed(f"{name}: measured {measured:.6g}, tolerance {tolerance:.6g}")


def verify_dispatch(rep: Report, seed: int = 0, instances_count: int = 200) -> None:
    rng = np.random.default_rng(seed)
    costs = CostModel()
    det = [LoadType("a", 3, 1.0), LoadType("b", 3, 2.0)]
    sol = solve_real_time(10.0, 0.0, det, costs)
    rep.check("deterministic cost", abs(sol.social_cost - 80) <= 1e-6, abs(sol.social_cost - 80), 1e-6)
    sol = solve_real_time(10.0, 0.0, det, costs, box=True)
    rep.check("deterministic box cost", abs(sol.social_cost - 513.5) <= 1e-6, abs(sol.social_cost - 513.5), 1e-6)
    cfg = validate_config(instances.deterministic(generator=1.0))
    dec = DayAheadSolver(cfg.true_model, cfg.net_demand, cfg.type_space, cfg.costs, cfg.expectation).solve()
    rep.check("g* = 80/21", abs(dec.g_star - 80 / 21) <= 1e-6, abs(dec.g_star - 80 / 21), 1e-6)
    rep.check("W* = 1280/21", abs(dec.w_star - 1280 / 21) <= 1e-6, abs(dec.w_star - 1280 / 21), 1e-6)
    worst = 0.0
    for _ in range(instances_count):
        n = int(rng.integers(1, 3))
        a = float(rng.uniform(0.5, 5))
        c = CostModel(reserve=ScalarCost("quadratic", a=a))
        types = [LoadType(f"t{i}", int(rng.integers(0, 3)), float(rng.uniform(0.5, 4))) for i in range(n)]
        box = bool(rng.integers(0, 2))
        z = float(rng.uniform(-2, 6))
        step = 0.01
        fast = solve_real_time(z, 0.0, types, c, box).social_cost
        slow = brute_force_real_time(z, 0.0, types, c, box, step).social_cost
        # the nearest grid point is within half a step per coordinate
        curv = 2 * a * n + max(t.kappa for t in types)
        bound = max(1e-6, 0.5 * curv * n * (step / 2) ** 2)
        worst = max(worst, (slow - fast) / bound)
        if not (fast <= slow + 1e-9 and slow - fast <= bound):
            rep.check(f"random instance z={z:.3f}", False, slow - fast, bound)
    rep.check(f"{instances_count} random instances vs brute force", True, worst, 1.0)


def verify_mechanism(rep: Report, seed: int = 0) -> None:
    cfg = validate_config(instances.deterministic())
    res = run(cfg)
    exp = np.array([665 / 6, 240 / 11])
    err = float(np.abs(res.p1 - exp).max())
    rep.check("first-stage payments", err <= 1e-6, err, 1e-6)
    u = res.utilities[0]
    err = float(np.abs(u - np.array([365 / 6, -35 / 11])).max())
    rep.check("deterministic utilities", err <= 1e-6, err, 1e-6)
    rep.check("deterministic social cost", float(np.abs(res.social_cost - 80).max()) <= 1e-9,
              float(np.abs(res.social_cost - 80).max()), 1e-9)
    cfg = validate_config(instances.net_demand_game(days=3000))
    res = run(cfg)
    lhs = res.payments
    rhs = (res.w_minus - res.decision.w_star)[None, :] + res.reported_cost \
        - cfg.penalty.penalty(np.arange(1, cfg.days + 1))[:, None] * res.penalties
    err = float(np.abs(lhs - rhs).max())
    rep.check("payment identity", err <= 1e-9, err, 1e-9)
    ok = all(audit_compliance(res.day_record(l)) for l in range(1, cfg.days + 1, 97))
    rep.check("compliance audit", ok, 0.0, 0.0)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n, k in ((1, 3), (2, 3), (3, 2), (4, 3)):
        theta = rng.dirichlet(np.ones(k), size=n)
        reports = rng.integers(0, k, size=(300, n))
        tr = DeviationTracker(theta)
        tr.update_block(reports)
        f_ref, h_ref = recount(reports, theta)
        for i in range(n):
            worst = max(worst, float(np.abs(tr.f_values(i) - f_ref[i]).max()))
            for key, v in h_ref[i].items():
                worst = max(worst, abs(tr.h_values(i).get(key, 0.0) - v))
    rep.check("tracker vs brute-force recount", worst <= 1e-12, worst, 1e-12)


def verify_incentives(rep: Report, seeds: int = 5, horizon: int = 20000) -> dict:
    out = {}
    for label, doc, cands in (
        ("net-demand", instances.net_demand_game(horizon), instances.net_demand_candidates()),
        ("baseline", instances.baseline_game(horizon), instances.baseline_candidates()),
    ):
        report = enumerate_deviations(validate_config(doc), cands, horizon, range(seeds))
        out[label] = report.to_json()
        for o in report.outcomes:
            if o.spec.kind == "truthful":
                continue
            if o.spec.kind == "intermittent":
                slack = 2 * np.sqrt(o.std_error**2 + report.truthful.std_error**2)
                margin = float((o.gap + slack).min())
            else:
                margin = float(o.gap.min())
            rep.check(f"{label}: truthful beats {o.name}", margin >= 0, margin, 0.0)
    return out


SUITES: dict[str, Callable] = {
    "dispatch": verify_dispatch,
    "mechanism": verify_mechanism,
    "incentives": verify_incentives,
}


def cmd_verify(args) -> int:
    out = prepare_out(args.out, [f"verify_{args.suite}.json"], args.force)
    rep = Report()
    extra = None
    status = 0
    try:
        extra = SUITES[args.suite](rep)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        status = 1
    doc = {"suite": args.suite, "passed": status == 0, "checks": rep.checks}
    if extra:
        doc["deviations"] = extra
    dump_json(doc, out / f"verify_{args.suite}.json")
    for c in rep.checks:
        print(f"{'PASS' if c['ok'] else 'FAIL'}  {c['check']}  (measured {c['measured']:.3g}, tol {c['tolerance']:.3g})")
    return status


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twostage-dr", description="Two-stage demand-response market simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="experiment configuration (JSON)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    sp = sub.add_parser("simulate", help="run the repeated market and write a ledger")
    common(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--tail-fraction", type=float, default=0.5)
    sp.set_defaults(func=cmd_simulate)

    for name, func, helptext in (("sweep", cmd_sweep, "posted-price rebate sweep"),
                                 ("compare", cmd_compare, "posted price versus the optimal mechanism")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--grid", default=None, help="comma-separated rebates (default: analytic grid)")
        sp.add_argument("--points", type=int, default=50)
        sp.add_argument("--seed", type=int, default=None)
        sp.set_defaults(func=func)

    sp = sub.add_parser("verify", help="run a verification suite")
    sp.add_argument("suite", choices=sorted(SUITES))
    common(sp, config=False)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("print-config-schema", help="print the configuration schema")
    sp.set_defaults(func=cmd_schema)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
