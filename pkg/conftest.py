import numpy as np
import pytest

from cones import Circular, Full, Orthant, Subspace
from restricted import SolverConfig
from utils_conic import write_matrix


@pytest.fixture
def solver():
    return SolverConfig(multistarts=16, max_iters=2000, seed=7)


@pytest.fixture
def small_cones():
    return {
        "full3": Full(3),
        "orthant3": Orthant(3),
        "plane3": Subspace.coordinate(3, 2),
        "circ3": Circular(3, 1.0),
    }


@pytest.fixture
def matrix_file(tmp_path):
    """Write a matrix to tmp_path and return its path."""
    def write(name, A):
        path = tmp_path / name
        write_matrix(str(path), np.asarray(A, dtype=float))
        return str(path)
    return write


@pytest.fixture
def ledger(tmp_path, monkeypatch):
    """Point the check ledger at a fresh CSV file."""
    import check_logger
    path = str(tmp_path / "check_history.csv")
    monkeypatch.setattr(check_logger, "LOG_FILE", path)
    return path
