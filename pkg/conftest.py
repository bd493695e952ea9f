"""Shared pytest fixtures; also puts the repository root on sys.path for ``import src``."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture
def rng():
    """Seeded generator so every test draws the same numbers on every run."""
    return np.random.default_rng(20240611)
