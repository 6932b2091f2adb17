"""
Configuration for the PTS toolkit: defaults and environment overrides.

Values can be overridden from the environment or from a local .env file.
"""
import logging
import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

# Estimator defaults
DEFAULT_CUTOFF = 2.0
DEFAULT_ALPHA_GREED = 0.5
DEFAULT_MAX_ITER = 100
DEFAULT_SEED = 0
DEFAULT_EPSILON_FLOOR = 1e-12
DEFAULT_T_REINCLUDE = 2.0
DEFAULT_LTS_STARTS = 500
DEFAULT_MCD_STARTS = 500

# Concentration steps: a few steps on every start, then the best starts to convergence
CSTEP_INITIAL = 2
CSTEP_KEEP_BEST = 10
CSTEP_MAX = 100

LOCAL_SEARCH_MAX_ITER = 100
START_ATTEMPTS = 100

# Construction carries (X_T'X_T)^-1 by rank-one updates and refactorizes this often
CONSTRUCT_REFACTOR_EVERY = 32

# Enumeration budgets for the exact oracles
LTS_ENUMERATION_BUDGET = 2_000_000
PTS_ENUMERATION_BUDGET = 2 ** 22

# Smallest pivot / largest pivot below which a design is rank deficient
RANK_TOL = 1e-10

# Weight cut-off of the reweighting step
REWEIGHT_CUTOFF = 2.5

REPORT_SCHEMA_VERSION = "1.0"

# RNG stream tags, mixed into the seed together with the task index
STREAM_LTS = 1
STREAM_MCD = 2
STREAM_PTS = 3
STREAM_SIMULATION = 4

PTS_THREADS = os.getenv('PTS_THREADS', '0')
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')


def resolve_log_level() -> int:
    """Resolve log level from environment with safe fallback."""
    level_name = os.getenv('LOG_LEVEL', LOG_LEVEL).upper()
    if hasattr(logging, level_name) and isinstance(getattr(logging, level_name), int):
        return getattr(logging, level_name)
    logging.warning("Invalid LOG_LEVEL '%s'; defaulting to INFO", level_name)
    return logging.INFO


def resolve_threads(value: Optional[int] = None) -> int:
    """Number of worker threads; 0 or unset means one per CPU.

    Args:
        value: Explicit thread count. When None, PTS_THREADS is read.

    Returns:
        A positive thread count.
    """
    if value is None:
        raw = os.getenv('PTS_THREADS', PTS_THREADS)
        try:
            value = int(raw)
        except ValueError:
            logging.warning("Invalid PTS_THREADS '%s'; using automatic thread count", raw)
            value = 0
    if value <= 0:
        return os.cpu_count() or 1
    return value
