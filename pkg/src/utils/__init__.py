"""Utility modules for the loop soup toolkit."""

from .config import Config
from .exceptions import (
    LoopSoupError,
    ValidationError,
    LoopValidationError,
    FieldRangeError,
    SchemaError,
    ExportError,
    SuiteFailure
)
from .rng import keyed_generator

__all__ = [
    'Config',
    'LoopSoupError',
    'ValidationError',
    'LoopValidationError',
    'FieldRangeError',
    'SchemaError',
    'ExportError',
    'SuiteFailure',
    'keyed_generator'
]
