import os
import csv
import threading
from datetime import datetime

import pandas as pd

from config import DATA_DIR
from utils_conic import logger

LOG_FILE = os.path.join(DATA_DIR, "check_history.csv")

COLUMNS = [
    "timestamp", "check", "cone_C", "cone_D", "f", "trials", "seed",
    "lhs_mean", "lhs_se", "rhs_mean", "rhs_se", "direction", "margin",
]
NUMERIC_COLUMNS = ["trials", "seed", "lhs_mean", "lhs_se", "rhs_mean", "rhs_se", "margin"]

_lock = threading.Lock()


def log_check(check, cone_c="", cone_d="", f_label=None, trials=None, seed=None, path=None):
    """
    Append one InequalityCheck to the CSV ledger. Ledger problems are logged
    and swallowed; a broken ledger never fails an experiment.
    """
    path = path or LOG_FILE
    meta = getattr(check, "meta", {}) or {}
    row = [
        datetime.now().isoformat(),
        check.name,
        cone_c or meta.get("C", ""),
        cone_d or meta.get("D", ""),
        f_label or meta.get("f", ""),
        trials if trials is not None else meta.get("trials", ""),
        seed if seed is not None else meta.get("seed", ""),
        f"{check.lhs_mean:.8e}", f"{check.lhs_se:.8e}",
        f"{check.rhs_mean:.8e}", f"{check.rhs_se:.8e}",
        check.direction,
        f"{check.satisfied_within:.4f}",
    ]

    try:
        with _lock:
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            file_exists = os.path.isfile(path)
            with open(path, mode="a", newline="") as f:
                writer = csv.writer(f)
                if not file_exists:
                    writer.writerow(COLUMNS)
                writer.writerow(row)
        return True
    except Exception as e:
        logger.error(f"Error writing to check ledger {path}: {e}")
        return False


def get_check_history_df(path=None):
    path = path or LOG_FILE
    if not os.path.exists(path):
        return pd.DataFrame(columns=COLUMNS)

    try:
        df = pd.read_csv(path)
    except Exception as e:
        logger.error(f"Error reading check ledger {path}: {e}")
        return pd.DataFrame(columns=COLUMNS)

    for col in NUMERIC_COLUMNS:
        if col in df.columns:
            df[col] = pd.to_numeric(df[col], errors="coerce")
    if "timestamp" in df.columns:
        df["timestamp"] = pd.to_datetime(df["timestamp"], errors="coerce")
    return df
