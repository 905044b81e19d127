import os

# -----------------------------
# Material defaults (mm, s, mPa)
# -----------------------------
KAPPA = 1.57e-2          # mm^2 mPa^-1 s^-1
YOUNG_MODULUS = 1.5e6    # mPa
BIOT_MODULUS = 3.9e7     # mPa
BIOT_COEFFICIENT = 1.0
POISSON_RATIO = 0.2
FLUID_DENSITY = 1.0
GRAVITY = (0.0, 0.0, 0.0)  # mm s^-2
DIMENSION = 3

# -----------------------------
# Solver defaults
# -----------------------------
TIME_STEP = 0.1
FINAL_TIME = 1.0
EPS_ABSOLUTE = 1e-6
EPS_RELATIVE = 1e-6
MAX_FIXED_STRESS_ITERS = 100
MATRIX_QUAD_DEGREE = 2
LOAD_QUAD_DEGREE = 5
LINEAR_TOL = 1e-10

# -----------------------------
# Line source of the manufactured case
# -----------------------------
SEGMENT_A = (0.5, 0.8, 0.5)
SEGMENT_B = (0.5, 0.2, 0.5)
MESH_SIZE = 8
CONVERGENCE_LEVELS = (8, 16, 32)

# -----------------------------
# Numerical guards
# -----------------------------
MAX_MESH_DIVISIONS = 256
ON_SEGMENT_TOL = 1e-15     # mm
COLLISION_NUDGE = 1e-12    # fraction of h
LINE_SOURCE_POINTS = 64

# -----------------------------
# Runner
# -----------------------------
LOG_DIR = os.environ.get("BIOT_LOG_DIR", "logs")
LOG_FILE = "biot_runner.log"
LOG_MAX_BYTES = 1_000_000
LOG_BACKUP_COUNT = 5
MAX_PARALLEL_LEVELS = 3
REPORT_FILE = "convergence_report.json"
