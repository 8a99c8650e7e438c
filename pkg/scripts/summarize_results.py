"""
summarize_results.py

────────────────────────────────────────────────────────────────────────────
🏁 Read the Design Optima Off the Preset Tables
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
---------------
1. fig6 → best pilot percentage μ for each (combiner, V_max), and the first
   V_max where that choice leaves the one made for static users
2. fig7 → best users-per-subcarrier N_U for each (combiner, μ) at the
   highest V_max in the table
3. fig8 → best frame data length N_D for each (combiner, V_max, N_U)

Ties go to the row that comes first in the preset table (smaller μ, N_U
or N_D).

📥 Input:
--------
- `--fig6`  CSV from `preset fig6` (required)
- `--fig7`  CSV from `preset fig7`
- `--fig8`  CSV from `preset fig8`

📤 Output:
---------
- `best_pilot_percentage.csv`, `pilot_switch.csv`, `best_users.csv`,
  `best_frame_length.csv` in `--output-dir`

────────────────────────────────────────────────────────────────────────────
"""

import argparse
import sys
from pathlib import Path

import pandas as pd

# -------------------------------
# Optima
# -------------------------------


def _argmax(df, keys, value="sum_rate_bps"):
    best = df.loc[df.groupby(keys, sort=True)[value].idxmax()]
    return best.sort_values(keys, kind="stable").reset_index(drop=True)


def best_pilot_percentage(fig6):
    return _argmax(fig6, ["combiner", "v_max_mps"])[["combiner", "v_max_mps", "mu_pct", "sum_rate_bps"]]


def pilot_switch_speeds(best):
    """First V_max at which the best μ differs from the best μ at the lowest V_max."""
    rows = []
    for combiner, group in best.groupby("combiner", sort=True):
        group = group.sort_values("v_max_mps")
        start = group["mu_pct"].iloc[0]
        moved = group[group["mu_pct"] != start]
        rows.append(
            {
                "combiner": combiner,
                "from_mu_pct": start,
                "to_mu_pct": moved["mu_pct"].iloc[0] if not moved.empty else None,
                "switch_v_max_mps": moved["v_max_mps"].iloc[0] if not moved.empty else None,
            }
        )
    return pd.DataFrame(rows)


def best_users(fig7):
    fastest = fig7[fig7["v_max_mps"] == fig7["v_max_mps"].max()]
    return _argmax(fastest, ["combiner", "mu_pct"])[["combiner", "v_max_mps", "mu_pct", "n_users", "sum_rate_bps"]]


def best_frame_length(fig8):
    keys = ["combiner", "v_max_mps", "n_users"]
    return _argmax(fig8, keys)[keys + ["n_data", "sum_rate_bps"]]


# -------------------------------
# Entry Point
# -------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(description="Derive design optima from preset CSVs")
    parser.add_argument("--fig6", required=True, type=Path)
    parser.add_argument("--fig7", type=Path)
    parser.add_argument("--fig8", type=Path)
    parser.add_argument("--output-dir", type=Path, default=Path("results/summary"))
    args = parser.parse_args(argv)

    try:
        tables = {}
        best = best_pilot_percentage(pd.read_csv(args.fig6))
        tables["best_pilot_percentage"] = best
        tables["pilot_switch"] = pilot_switch_speeds(best)
        if args.fig7:
            tables["best_users"] = best_users(pd.read_csv(args.fig7))
        if args.fig8:
            tables["best_frame_length"] = best_frame_length(pd.read_csv(args.fig8))
    except OSError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return 3
    except KeyError as exc:
        print(f"❌ missing column {exc} - is this the right preset?", file=sys.stderr)
        return 2

    args.output_dir.mkdir(parents=True, exist_ok=True)
    for name, table in tables.items():
        path = args.output_dir / f"{name}.csv"
        table.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        print(f"\n📊 {name}")
        print(table.to_string(index=False))
        print(f"✅ saved to '{path}'")
    return 0


if __name__ == "__main__":
    sys.exit(main())
