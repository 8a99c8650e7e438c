"""
combine_results.py

────────────────────────────────────────────────────────────────────────────
📊 Combine Sweep Results Into One Table
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
---------------
1. Reads every CSV in a results directory (one per preset or mc run).
2. Tags each row with a `source` column holding the file stem.
3. Concatenates them, in file-name order, into a single CSV.

Columns missing from a file are left empty, so presets with different
headers can share one long table.

📥 Input:
--------
- `--input-dir`  directory of CSVs written by `python -m mimo_uplink`

📤 Output:
---------
- `--output`     the combined CSV

────────────────────────────────────────────────────────────────────────────
"""

import argparse
import sys
from pathlib import Path

import pandas as pd

# -------------------------------
# Helper: Combine CSVs in a Folder
# -------------------------------


def combine_csvs_from_directory(input_dir, exclude=None):
    """
    Combines all .csv files in the given directory into a single DataFrame.
    """
    frames = []
    for path in sorted(Path(input_dir).glob("*.csv")):
        if exclude is not None and path.resolve() == Path(exclude).resolve():
            continue
        df = pd.read_csv(path, low_memory=False)
        df.insert(0, "source", path.stem)
        frames.append(df)
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


# -------------------------------
# Entry Point
# -------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(description="Merge every CSV of a results directory")
    parser.add_argument("--input-dir", required=True, type=Path)
    parser.add_argument("--output", required=True, type=Path)
    args = parser.parse_args(argv)

    if not args.input_dir.is_dir():
        print(f"❌ '{args.input_dir}' is not a directory", file=sys.stderr)
        return 3

    combined = combine_csvs_from_directory(args.input_dir, exclude=args.output)
    if combined.empty:
        print(f"⚠️ No CSV files found in '{args.input_dir}'", file=sys.stderr)
        return 1

    args.output.parent.mkdir(parents=True, exist_ok=True)
    combined.to_csv(args.output, index=False, float_format="%.17g", lineterminator="\n")
    print(f"✅ {combined['source'].nunique()} files combined and saved to '{args.output}'")
    return 0


if __name__ == "__main__":
    sys.exit(main())
