"""Configuration management for the auditor."""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
# Try the current directory first, then the project root
config_file = Path(__file__).resolve()
project_root = config_file.parent.parent
worktree_root = Path.cwd()

env_paths = [
    worktree_root / '.env',  # Current working directory (most common)
    project_root / '.env',   # Project root
]

for env_path in env_paths:
    if env_path.exists():
        load_dotenv(env_path, override=False)  # Don't override if already loaded
        break
else:
    # Fallback: default behavior (searches upward from current dir)
    load_dotenv()


def _get_bool(name: str, default: str) -> bool:
    """Read a boolean flag from the environment.

    Args:
        name: Environment variable name
        default: Value used when the variable is unset

    Returns:
        True for "true", "1" or "yes" (case-insensitive)
    """
    return os.getenv(name, default).lower() in ("true", "1", "yes")


class Config:
    """Application configuration."""

    # Directory receiving report JSON, scores CSV and run manifests
    AUDIT_OUTPUT_DIR = os.getenv("AUDIT_OUTPUT_DIR", "results")

    # Default number of worker processes for model fitting
    # The CLI --workers flag overrides this
    AUDIT_WORKERS = int(os.getenv("AUDIT_WORKERS", "1"))

    # Audit store configuration
    # Path to DuckDB database file holding persisted score sets
    AUDIT_DATABASE_PATH = os.getenv("AUDIT_DATABASE_PATH", "data/audits.duckdb")

    # Enable the audit store (feature flag)
    USE_DATABASE = _get_bool("USE_DATABASE", "false")

    # Logging level for command-line entry points
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

    # Largest GAN noise multiplier accepted before a budget is declared unsatisfiable
    GAN_SIGMA_CAP = float(os.getenv("GAN_SIGMA_CAP", "1000.0"))

    # Constant every random stream is re-seeded with under the PRNG-reuse bug
    PRNG_REUSE_SEED = int(os.getenv("PRNG_REUSE_SEED", "0"))
