from dotenv import load_dotenv
from pathlib import Path
import os

# Load environment variables from .env in project root
PROJECT_ROOT = Path(__file__).parent.parent
load_dotenv(dotenv_path=PROJECT_ROOT / ".env")

# Level for the mechsqueeze.* loggers (the CLI --verbose flag overrides it)
LOG_LEVEL: str = os.getenv("MECHSQUEEZE_LOG_LEVEL", "WARNING")

# Phase samples per drive period for periodic steady states
PHASE_SAMPLES: int = int(os.getenv("MECHSQUEEZE_PHASE_SAMPLES", "64"))
# Relative Frobenius tolerance on the stroboscopic fixed point
PERIODIC_TOL: float = float(os.getenv("MECHSQUEEZE_PERIODIC_TOL", "1e-10"))
# Give up when the covariance has not settled after this many drive periods
MAX_PERIODS: int = int(os.getenv("MECHSQUEEZE_MAX_PERIODS", str(2**40)))

# One-period propagator integration
ODE_RTOL: float = float(os.getenv("MECHSQUEEZE_ODE_RTOL", "1e-10"))
ODE_ATOL: float = float(os.getenv("MECHSQUEEZE_ODE_ATOL", "1e-12"))
MAX_STEP_FRACTION: float = float(os.getenv("MECHSQUEEZE_MAX_STEP_FRACTION", "0.02"))

# "White" squeezing in the exact solver: b_x = factor * omega_m0
WHITE_BANDWIDTH_FACTOR: float = float(os.getenv("MECHSQUEEZE_WHITE_BANDWIDTH_FACTOR", "20"))

# Worker processes for sweeps
JOBS: int = int(os.getenv("MECHSQUEEZE_JOBS", "1"))
