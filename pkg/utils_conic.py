import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import pandas as pd

from config import LOG_LEVEL, WORKERS, FLOAT_FMT

# Logging Setup
logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=getattr(logging, LOG_LEVEL, logging.INFO)
)
logger = logging.getLogger("ConicBench")

T = TypeVar("T")
R = TypeVar("R")


# --- Errors ---

class ConicError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(ConicError, ValueError):
    pass


class DimensionMismatch(ConicError, ValueError):
    pass


class NotInCone(ConicError, ValueError):
    pass


class ZeroConeError(ConicError, ValueError):
    """Restricted operators are undefined on the zero cone (empty sphere section)."""


class UnsupportedProjection(ConicError):
    pass


class QuadratureError(ConicError, ArithmeticError):
    def __init__(self, message: str, achieved_error: float = float("nan")):
        super().__init__(f"{message} (achieved error estimate {achieved_error:.3e})")
        self.achieved_error = achieved_error


class SolverError(ConicError, RuntimeError):
    pass


class HypothesisViolation(ConicError, ValueError):
    pass


class AlreadyFeasible(ConicError, ValueError):
    pass


class ConeParseError(ConicError, ValueError):
    pass


# --- Parallel helpers ---

def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """
    Map func over items on a thread pool.

    Results come back in input order, so any reduction over them is
    independent of the number of threads.
    """
    items = list(items)
    workers = WORKERS if workers is None else int(workers)
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# --- Matrix files: header "# n m", then n whitespace-separated rows ---

def read_matrix(path: str) -> np.ndarray:
    try:
        with open(path, "r") as f:
            header = f.readline().strip()
    except OSError as e:
        raise ConeParseError(f"cannot read matrix file {path}: {e}")

    parts = header.lstrip("#").split()
    if not header.startswith("#") or len(parts) != 2:
        raise ConeParseError(f"{path}: expected header '# n m', got '{header}'")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConeParseError(f"{path}: non-integer dimensions in header '{header}'")

    try:
        df = pd.read_csv(path, sep=r"\s+", header=None, comment="#", dtype=float)
    except pd.errors.EmptyDataError:
        df = pd.DataFrame()
    except ValueError as e:
        raise ConeParseError(f"{path}: non-numeric entry ({e})")

    A = df.to_numpy(dtype=float)
    if A.shape != (n, m):
        raise ConeParseError(f"{path}: header says {n}x{m} but body is {A.shape[0]}x{A.shape[1] if A.ndim == 2 else 0}")
    return A


def write_matrix(path: str, A: np.ndarray) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, m = A.shape
    with open(path, "w") as f:
        f.write(f"# {n} {m}\n")
        pd.DataFrame(A).to_csv(f, sep=" ", header=False, index=False, float_format=FLOAT_FMT)


# --- Two-column curve tables: "lambda value" per line ---

def write_table(path: str, grid: Sequence[float], values: Sequence[float]) -> str:
    out_dir = os.path.dirname(path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    df = pd.DataFrame({"x": np.asarray(grid, dtype=float), "y": np.asarray(values, dtype=float)})
    df.to_csv(path, sep=" ", header=False, index=False, float_format=FLOAT_FMT, lineterminator="\n")
    return path


def read_table(path: str) -> Tuple[np.ndarray, np.ndarray]:
    df = pd.read_csv(path, sep=r"\s+", header=None, comment="#", dtype=float)
    return df[0].to_numpy(), df[1].to_numpy()
