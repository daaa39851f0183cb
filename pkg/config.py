import os
import sys
from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("CONIC_LOG_LEVEL", "INFO").upper()

# Parallelism (never changes results, reductions are index ordered)
WORKERS = int(os.getenv("CONIC_WORKERS", "4"))

# Locations
DATA_DIR = os.getenv("CONIC_DATA_DIR", "/app/data" if os.path.exists("/app/data") else ".")
OUT_DIR = os.getenv("CONIC_OUT_DIR", "tables")

# Restricted-operator solvers
MULTISTARTS = int(os.getenv("MULTISTARTS", "64"))
MAX_ITERS = int(os.getenv("MAX_ITERS", "2000"))
STEP_TOL = float(os.getenv("STEP_TOL", "1e-12"))
VALUE_TOL = float(os.getenv("VALUE_TOL", "1e-8"))
ORACLE_GRID = int(os.getenv("ORACLE_GRID", "181"))

# Quadrature
QUAD_ABS_TOL = float(os.getenv("QUAD_ABS_TOL", "1e-10"))
QUAD_MAX_SUBDIVISIONS = int(os.getenv("QUAD_MAX_SUBDIVISIONS", "200"))
CHI_TAIL_MASS = float(os.getenv("CHI_TAIL_MASS", "1e-14"))

# Feasibility
FEAS_TOL = float(os.getenv("FEAS_TOL", "1e-6"))
RENEGAR_CAP = float(os.getenv("RENEGAR_CAP", "1e12"))

# Experiments
MIN_TRIALS = int(os.getenv("MIN_TRIALS", "100"))
FLOAT_FMT = os.getenv("FLOAT_FMT", "%.8e")  # 9 significant digits

# Validate numeric settings
_problems = []
if WORKERS < 1:
    _problems.append(f"CONIC_WORKERS={WORKERS} (must be >= 1)")
if MULTISTARTS < 1:
    _problems.append(f"MULTISTARTS={MULTISTARTS} (must be >= 1)")
if MAX_ITERS < 1:
    _problems.append(f"MAX_ITERS={MAX_ITERS} (must be >= 1)")
for _name, _value in [("STEP_TOL", STEP_TOL), ("VALUE_TOL", VALUE_TOL),
                      ("QUAD_ABS_TOL", QUAD_ABS_TOL), ("CHI_TAIL_MASS", CHI_TAIL_MASS),
                      ("FEAS_TOL", FEAS_TOL)]:
    if not _value > 0:
        _problems.append(f"{_name}={_value} (must be > 0)")
if QUAD_MAX_SUBDIVISIONS < 1:
    _problems.append(f"QUAD_MAX_SUBDIVISIONS={QUAD_MAX_SUBDIVISIONS} (must be >= 1)")
if ORACLE_GRID < 3:
    _problems.append(f"ORACLE_GRID={ORACLE_GRID} (must be >= 3)")

if _problems:
    print("=" * 60)
    print("❌ CONFIGURATION ERROR - INVALID ENVIRONMENT VARIABLES")
    print("=" * 60)
    for p in _problems:
        print(f"  {p}")
    print("")
    print("How to fix:")
    print("1. Edit your .env file (see .env.example)")
    print("2. Or unset the variable to use the built-in default")
    print("=" * 60)
    sys.exit(1)
