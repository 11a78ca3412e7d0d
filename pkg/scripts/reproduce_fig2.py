"""Posted-price sweep against the two-stage optimum on the large population.

Writes fig2.csv (p, posted average, optimal average) and prints the headline
numbers. Pass --plot to also save fig2.png if matplotlib is available.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from twostage_dr import instances
from twostage_dr.benchmark import analytic_rebate, default_grid, sweep
from twostage_dr.cli import write_sweep_csv
from twostage_dr.model import validate_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/fig2")
    ap.add_argument("--days", type=int, default=1000)
    ap.add_argument("--loads", type=int, default=10000)
    ap.add_argument("--points", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    cfg = validate_config(instances.fig2(days=args.days, loads=args.loads))
    t0 = time.perf_counter()
    res = sweep(default_grid(cfg, args.points), cfg, seed=args.seed)
    elapsed = time.perf_counter() - t0

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / "fig2.csv", res)
    j = int(np.argmin(res.posted))
    print(f"analytic rebate      {analytic_rebate(cfg):.6g}")
    print(f"best posted rebate   {res.grid[j]:.6g} (index {j} of {len(res.grid)})")
    print(f"best posted cost     {res.posted[j]:.6g}")
    print(f"optimal cost         {res.optimal_average:.6g}")
    print(f"ratio                {res.posted[j] / res.optimal_average:.1f}")
    print(f"elapsed              {elapsed:.1f}s")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(res.grid, res.posted, label="posted price")
        ax.axhline(res.optimal_average, color="k", ls="--", label="two-stage optimum")
        ax.set_xlabel("rebate p")
        ax.set_ylabel("average social cost")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "fig2.png", dpi=150)


if __name__ == "__main__":
    main()
