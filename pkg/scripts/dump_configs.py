"""Write the built-in instances as JSON config files for the CLI."""

import argparse
import json
from pathlib import Path

from twostage_dr import instances

DOCS = {
    "deterministic": instances.deterministic(),
    "deterministic_box": instances.deterministic(box=True),
    "small_stochastic": instances.small_stochastic(),
    "net_demand_game": instances.net_demand_game(),
    "baseline_game": instances.baseline_game(),
    "penalty_game": instances.penalty_game(),
    "fig2": instances.fig2(),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="configs")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, doc in DOCS.items():
        (out / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
        print(out / f"{name}.json")


if __name__ == "__main__":
    main()
