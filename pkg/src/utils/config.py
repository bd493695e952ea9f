"""
Configuration management for the loop soup toolkit.
Handles environment variables and simulation defaults.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

from .exceptions import ValidationError

# Load environment variables from .env file
env_path = Path(__file__).parent.parent.parent / '.env'
load_dotenv(dotenv_path=env_path)


class Config:
    """Centralized configuration management."""

    # Reproducibility
    DEFAULT_SEED: int = int(os.getenv('LOOPSOUP_SEED', '7'))
    THREADS: int = int(os.getenv('LOOPSOUP_THREADS', '1'))

    # Numerics
    EXACT_LIMIT: int = int(os.getenv('LOOPSOUP_EXACT_LIMIT', '200'))
    LAMBDA_MAX: float = float(os.getenv('LOOPSOUP_LAMBDA_MAX', '10.0'))
    LEAF_REFINE: int = int(os.getenv('LOOPSOUP_LEAF_REFINE', '0'))

    # Output Settings
    OUTPUT_DIRECTORY: Path = Path(os.getenv('LOOPSOUP_OUTPUT_DIRECTORY', './output'))
    LOG_LEVEL: str = os.getenv('LOOPSOUP_LOG_LEVEL', 'WARNING').upper()

    SCHEMA_VERSION: int = 1

    @classmethod
    def validate_seed(cls, seed: int) -> int:
        """Seeds must be non-negative integers (SeedSequence entropy)."""
        if seed is None or int(seed) < 0:
            raise ValidationError('seed', f'must be a non-negative integer, got {seed!r}')
        return int(seed)

    @classmethod
    def validate_threads(cls, threads: int) -> int:
        """Validate a worker thread count."""
        if int(threads) < 1:
            raise ValidationError('threads', f'must be >= 1, got {threads!r}')
        return int(threads)

    @classmethod
    def ensure_output_directory(cls, directory: Path = None) -> Path:
        """Create output directory if it doesn't exist."""
        target = Path(directory) if directory is not None else cls.OUTPUT_DIRECTORY
        target.mkdir(parents=True, exist_ok=True)
        return target
