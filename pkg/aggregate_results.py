import sys
import pandas as pd
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / "src"))
from value_ledger import ValueAmount  # noqa: E402

# --------------------------
# CONFIG
# --------------------------
repo_root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(".")  # root holding run directories
flow_columns = ["va", "ve", "vl", "vg"]


# --------------------------
# HELPER FUNCTION TO COLLECT CYCLE CSVS
# --------------------------
def collect_cycle_csvs(root):
    csv_files = sorted(root.rglob("cycle_*.csv"))
    print(f"Found {len(csv_files)} cycle files under {root}")

    dfs = []
    for f in csv_files:
        try:
            df = pd.read_csv(f, dtype=str)
            if list(df.columns) != ["tick", "time"] + flow_columns:
                print(f"Skipping {f}: unexpected columns {list(df.columns)}")
                continue
            df["run"] = str(f.parent.relative_to(root))
            df["cycle"] = f.stem[len("cycle_"):]
            dfs.append(df)
            print(f"Loaded {f} with {len(df)} rows")
        except Exception as e:
            print(f"Failed to read {f}: {e}")

    if not dfs:
        return pd.DataFrame()  # empty
    return pd.concat(dfs, ignore_index=True)


def to_micro(text):
    """Fixed-point text to integer micro-units, so sums stay exact"""
    return ValueAmount.parse(text).micro


def fixed(micro):
    return ValueAmount(int(micro)).display()


# --------------------------
# SUM FLOWS PER RUN AND CYCLE
# --------------------------
flows = collect_cycle_csvs(repo_root)

if not flows.empty:
    for col in flow_columns:
        flows[col] = flows[col].map(to_micro)

    totals = flows.groupby(["run", "cycle"], sort=True).agg(
        ticks=("tick", "size"), **{col: (col, "sum") for col in flow_columns}
    ).reset_index()
    totals["residual"] = totals["va"] + totals["ve"] - totals["vl"] - totals["vg"]

    per_run = totals.groupby("run")["residual"].sum()
    for run, residual in per_run.items():
        status = "✓" if residual == 0 else "⚠"
        print(f"{status} {run}: residual {fixed(residual)}")

    for col in flow_columns + ["residual"]:
        totals[col] = totals[col].map(fixed)

    totals_path = repo_root / "cycle_totals.csv"
    totals.to_csv(totals_path, index=False)
    print(f"Saved cycle_totals.csv with {len(totals)} rows")
else:
    print("No cycle files to aggregate.")
