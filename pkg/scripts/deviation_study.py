"""Enumerate unilateral deviations for load 0 on both small games."""

import argparse
from pathlib import Path

from twostage_dr import instances
from twostage_dr.model import validate_config
from twostage_dr.oracle import enumerate_deviations

GAMES = {
    "net_demand": (instances.net_demand_game, instances.net_demand_candidates),
    "baseline": (instances.baseline_game, instances.baseline_candidates),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/deviations")
    ap.add_argument("--horizon", type=int, default=20000)
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (game, candidates) in GAMES.items():
        rep = enumerate_deviations(validate_config(game()), candidates(),
                                   horizon=args.horizon, seeds=range(args.seeds))
        rep.write_csv(out / f"{name}.csv")
        rep.write_json(out / f"{name}.json")
        print(f"== {name}")
        print(f"{'strategy':60s} {'mean utility':>14s} {'min gap':>12s} {'penalised':>10s}")
        for o in rep.outcomes:
            print(f"{o.name:60s} {o.mean_utility.mean():14.4f} {o.gap.min():12.4f} "
                  f"{o.penalty_fraction.mean():10.3f}")


if __name__ == "__main__":
    main()
