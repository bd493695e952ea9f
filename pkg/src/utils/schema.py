"""
JSON documents for soup realizations and coupling reports.

Reading always validates; pydantic errors surface as SchemaError with a
dotted location such as ``loops.3.points``.
"""

import math
from typing import List, Literal, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from .config import Config
from .exceptions import SchemaError

Document = TypeVar('Document', bound=BaseModel)


class LoopRecord(BaseModel):
    model_config = ConfigDict(extra='forbid')

    n: int = Field(ge=0)
    z: Tuple[int, int]
    m: int = Field(ge=1)
    duration: float = Field(gt=0)
    points: List[Tuple[float, float, float]] = Field(min_length=2)
    coupled: bool = True

    @field_validator('points')
    @classmethod
    def times_increase(cls, points):
        times = [p[0] for p in points]
        if times[0] != 0.0:
            raise ValueError('first sample time must be 0')
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError('sample times must increase strictly')
        first, last = points[0], points[-1]
        if not (math.isclose(first[1], last[1], abs_tol=1e-9) and math.isclose(first[2], last[2], abs_tol=1e-9)):
            raise ValueError('loop is not closed')
        return points

    @model_validator(mode='after')
    def duration_matches(self):
        if not math.isclose(self.points[-1][0], self.duration, rel_tol=1e-12):
            raise ValueError('last sample time must equal the duration')
        return self


class SoupDocument(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    schema_version: Literal[1] = Config.SCHEMA_VERSION
    kind: Literal['walk', 'brownian']
    lam: float = Field(alias='lambda', ge=0)
    scaleN: int = Field(ge=1)
    seed: int = Field(ge=0)
    window: Tuple[int, int, int, int]
    n_max: int = Field(ge=1)
    lambda_max: float = Field(gt=0)
    t_min: Optional[float] = Field(default=None, gt=0)
    loops: List[LoopRecord] = Field(default_factory=list)


class MatchedRecord(BaseModel):
    n: int
    z: Tuple[int, int]
    m: int
    duration_gap: float
    sup_distance: float


class UnmatchedRecord(BaseModel):
    side: Literal['walk', 'brownian']
    n: int
    z: Tuple[int, int]
    m: int
    reason: str


class ReportDocument(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    schema_version: Literal[1] = Config.SCHEMA_VERSION
    lam: float = Field(alias='lambda', ge=0)
    scaleN: int = Field(ge=1)
    r: float
    theta: float
    seed: int
    n_max: int
    bijective: bool
    failure_causes: List[str]
    walk_selected: int
    brownian_selected: int
    max_duration_gap: float
    max_sup_distance: float
    excluded_cells: int
    truncated_expected: float
    mismatch_bound: float
    matched: List[MatchedRecord]
    unmatched: List[UnmatchedRecord]


def _location(error: dict) -> str:
    return '.'.join(str(part) for part in error.get('loc', ())) or '<root>'


def load_document(text: str, model: Type[Document]) -> Document:
    """
    Parse and validate a JSON document.

    Raises:
        SchemaError: On malformed JSON or any schema violation
    """
    try:
        return model.model_validate_json(text)
    except PydanticValidationError as e:
        first = e.errors()[0]
        raise SchemaError(_location(first), first.get('msg', 'invalid value'))


def dump_document(document: BaseModel) -> str:
    """Serialize with field aliases; output is a pure function of the model."""
    return document.model_dump_json(by_alias=True, indent=1) + '\n'
