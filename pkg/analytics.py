import sys

import pandas as pd
from tabulate import tabulate

from check_logger import get_check_history_df

PASS_MARGIN = -3.0


def summarize_checks(target_check=None, path=None, echo=True):
    """
    Per-check report over the ledger: runs, pass rate (margin ≥ −3 SE),
    worst and median margin.

    Returns:
        DataFrame with one row per check name (empty when nothing is logged)
    """
    df = get_check_history_df(path)

    if df.empty:
        if echo:
            print("No check history found yet.")
        return pd.DataFrame()

    if target_check:
        df = df[df["check"] == target_check]
        if df.empty:
            if echo:
                print(f"No runs found for check: {target_check}")
            return pd.DataFrame()

    df = df.dropna(subset=["margin"])
    df["passed"] = df["margin"] >= PASS_MARGIN

    summary = (
        df.groupby("check")
        .agg(runs=("margin", "size"), pass_rate=("passed", "mean"),
             min_margin=("margin", "min"), median_margin=("margin", "median"))
        .reset_index()
    )
    summary["pass_rate"] = summary["pass_rate"] * 100.0

    if echo:
        total = len(df)
        passed = int(df["passed"].sum())
        print("\n" + "=" * 50)
        print(f"CHECK LEDGER REPORT ({target_check if target_check else 'ALL'})")
        print("=" * 50)
        print(f"Total Runs             : {total}")
        print(f"Passed (margin >= {PASS_MARGIN:g})  : {passed} ({passed / total * 100:.1f}%)")
        print(f"Worst Margin           : {df['margin'].min():+.2f} SE")
        print("=" * 50)
        print("\nBreakdown by Check:")
        print(tabulate(summary, headers=["CHECK", "RUNS", "PASS%", "MIN", "MEDIAN"],
                       tablefmt="simple", floatfmt=".2f", showindex=False))

        failing = df[~df["passed"]]
        if not failing.empty:
            print("\nRuns outside the tolerance:")
            cols = ["timestamp", "check", "cone_C", "cone_D", "f", "margin"]
            print(tabulate(failing[cols], headers="keys", tablefmt="simple", floatfmt=".2f", showindex=False))
        print("=" * 50 + "\n")

    return summary


if __name__ == "__main__":
    check_arg = sys.argv[1] if len(sys.argv) > 1 else None
    summarize_checks(check_arg)
