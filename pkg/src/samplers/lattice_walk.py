"""
Exact lattice loop and walk bridge combinatorics.

Counts and measures of rooted nearest-neighbour loops on Z^2, exact samplers
for one- and two-dimensional walk bridges, and the conditioned midpoint law
that serves as the brute-force oracle for the local central limit theorem.
"""

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple, Optional

import numpy as np
from scipy.special import gammaln

from ..utils.config import Config
from ..utils.exceptions import LoopValidationError, ValidationError

logger = logging.getLogger(__name__)

# Unit moves +1, -1, +i, -i as integer pairs.
UNIT_STEPS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=np.int64)


class ExactValue(NamedTuple):
    """A quantity known exactly (when within the exact limit) and as a float."""
    exact: Optional[Fraction]
    value: float


@dataclass(frozen=True)
class LatticeLoop:
    """A rooted nearest-neighbour loop on Z^2 given by its unit steps."""

    root: tuple
    steps: np.ndarray = field(repr=False)

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64).reshape(-1, 2)
        if len(steps) < 2 or len(steps) % 2:
            raise LoopValidationError(f"length must be even and >= 2, got {len(steps)}")
        if not np.all(np.abs(steps).sum(axis=1) == 1):
            raise LoopValidationError("every increment must have unit modulus")
        if np.any(steps.sum(axis=0) != 0):
            raise LoopValidationError("steps do not sum to zero, loop is not closed")
        steps.setflags(write=False)
        object.__setattr__(self, 'steps', steps)
        object.__setattr__(self, 'root', (int(self.root[0]), int(self.root[1])))

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def n(self) -> int:
        return len(self.steps) // 2

    @property
    def positions(self) -> np.ndarray:
        """Integer positions omega_0..omega_2n, shape (2n+1, 2)."""
        walk = np.vstack([np.zeros((1, 2), dtype=np.int64), np.cumsum(self.steps, axis=0)])
        return walk + np.array(self.root, dtype=np.int64)

    @classmethod
    def from_positions(cls, positions: np.ndarray) -> 'LatticeLoop':
        positions = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
        return cls(root=tuple(positions[0]), steps=np.diff(positions, axis=0))


@dataclass(frozen=True)
class WalkBridge1D:
    """Simple random walk of ``length`` steps conditioned to end at ``endpoint``."""

    length: int
    endpoint: int
    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.int64)
        if len(positions) != self.length + 1:
            raise ValidationError('positions', f"expected {self.length + 1} values, got {len(positions)}")
        if positions[0] != 0 or positions[-1] != self.endpoint:
            raise ValidationError('positions', "bridge must start at 0 and end at its endpoint")
        if self.length and not np.all(np.abs(np.diff(positions)) == 1):
            raise ValidationError('positions', "increments must be +1 or -1")
        positions.setflags(write=False)
        object.__setattr__(self, 'positions', positions)

    def at(self, t) -> np.ndarray:
        """Linear interpolation S_t for real t in [0, length]."""
        return interpolate_walk(self.positions, t)


@dataclass(frozen=True)
class WalkBridge2D:
    """Two-dimensional walk bridge, positions as integer pairs."""

    length: int
    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.int64).reshape(-1, 2)
        if len(positions) != self.length + 1:
            raise ValidationError('positions', f"expected {self.length + 1} points, got {len(positions)}")
        if self.length and not np.all(np.abs(np.diff(positions, axis=0)).sum(axis=1) == 1):
            raise ValidationError('positions', "increments must have unit modulus")
        positions.setflags(write=False)
        object.__setattr__(self, 'positions', positions)

    @property
    def closed(self) -> bool:
        return bool(np.all(self.positions[0] == self.positions[-1]))

    @property
    def as_complex(self) -> np.ndarray:
        return self.positions[:, 0] + 1j * self.positions[:, 1]

    def to_loop(self, root=(0, 0)) -> LatticeLoop:
        return LatticeLoop(root=root, steps=np.diff(self.positions, axis=0))


@dataclass(frozen=True)
class DiscretePmf:
    """Finite pmf on increasing integer support."""

    support: np.ndarray
    probs: np.ndarray

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def prob(self, value: int) -> float:
        idx = np.searchsorted(self.support, value)
        if idx < len(self.support) and self.support[idx] == value:
            return float(self.probs[idx])
        return 0.0

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))


class LocalCltComparison(NamedTuple):
    exact: float
    approx: float
    log_ratio: float


class StirlingCheck(NamedTuple):
    approx: float
    exact: int
    relative_error: float


def _require_positive(n: int, name: str = 'n') -> int:
    if int(n) != n or n < 1:
        raise ValidationError(name, f"must be a positive integer, got {n!r}")
    return int(n)


def check_endpoint(steps: int, z: int) -> None:
    """Raise unless z is a reachable endpoint of a ``steps``-step walk."""
    if steps < 0 or abs(z) > steps or (steps + z) % 2:
        raise ValidationError('endpoint', f"z={z} is not admissible for {steps} steps")


def interpolate_walk(positions: np.ndarray, t) -> np.ndarray:
    """Piecewise-linear extension of an integer-time path to real times."""
    times = np.arange(len(positions), dtype=float)
    positions = np.asarray(positions)
    if np.iscomplexobj(positions):
        return np.interp(t, times, positions.real) + 1j * np.interp(t, times, positions.imag)
    return np.interp(t, times, positions.astype(float))


# ---------------------------------------------------------------------------
# Loop counts and measures
# ---------------------------------------------------------------------------

def loop_count(n: int) -> int:
    """Number of closed 2n-step loops at the origin, C(2n, n)^2."""
    n = _require_positive(n)
    return math.comb(2 * n, n) ** 2


def loop_count_measure(n: int, exact_limit: int = None) -> ExactValue:
    """
    nu(L^0_n) = [2^(-2n) C(2n, n)]^2, the return probability of 2D SRW at time 2n.

    Args:
        n: Half-length of the loops
        exact_limit: Largest n computed with exact rationals (default Config.EXACT_LIMIT)

    Returns:
        ExactValue with the Fraction (None beyond the limit) and its float
    """
    n = _require_positive(n)
    limit = Config.EXACT_LIMIT if exact_limit is None else exact_limit
    if n <= limit:
        exact = Fraction(loop_count(n), 4 ** (2 * n))
        return ExactValue(exact, float(exact))
    log_value = 2.0 * (gammaln(2 * n + 1) - 2.0 * gammaln(n + 1) - 2 * n * math.log(2.0))
    return ExactValue(None, math.exp(log_value))


def loop_count_asymptotic(n: int) -> float:
    return 1.0 / (math.pi * n) - 1.0 / (4.0 * math.pi * n * n)


def qtilde(n: int, exact_limit: int = None) -> ExactValue:
    """Poisson rate of 2n-step walk loops per root: (2n)^-1 nu(L^z_n)."""
    measure = loop_count_measure(n, exact_limit)
    exact = measure.exact / (2 * n) if measure.exact is not None else None
    return ExactValue(exact, float(exact) if exact is not None else measure.value / (2 * n))


def qtilde_asymptotic(n: int) -> float:
    return 1.0 / (2.0 * math.pi * n ** 2) - 1.0 / (8.0 * math.pi * n ** 3)


def qtilde_array(n_max: int) -> np.ndarray:
    """q~_1..q~_{n_max} as floats (index 0 is n=1)."""
    n = np.arange(1, _require_positive(n_max, 'n_max') + 1, dtype=float)
    log_measure = 2.0 * (gammaln(2 * n + 1) - 2.0 * gammaln(n + 1) - 2 * n * math.log(2.0))
    return np.exp(log_measure) / (2 * n)


def rooted_loop_weight(loop: LatticeLoop) -> float:
    """mu^rw mass of one rooted loop: (2n)^-1 4^-2n."""
    if not isinstance(loop, LatticeLoop):
        loop = LatticeLoop.from_positions(loop)
    return float(Fraction(1, loop.length * 4 ** loop.length))


def enumerate_loops(n: int) -> Iterator[LatticeLoop]:
    """
    Yield every loop in L^0_n (depth-first, pruned by distance to the origin).

    Only practical for small n; |L^0_n| = C(2n, n)^2.
    """
    n = _require_positive(n)
    length = 2 * n
    path = []

    def extend(x: int, y: int):
        remaining = length - len(path)
        if remaining == 0:
            if x == 0 and y == 0:
                yield LatticeLoop(root=(0, 0), steps=np.array(path))
            return
        for dx, dy in UNIT_STEPS:
            nx, ny = x + int(dx), y + int(dy)
            if abs(nx) + abs(ny) <= remaining - 1:
                path.append((int(dx), int(dy)))
                yield from extend(nx, ny)
                path.pop()

    yield from extend(0, 0)


def count_loops_by_enumeration(n: int) -> int:
    """
    Count L^0_n by enumerating all 4^n half-walks and pairing endpoints.

    A loop is a first half ending at x followed by a half with displacement -x.
    """
    n = _require_positive(n)
    endpoints = Counter()
    for moves in itertools.product(range(4), repeat=n):
        x, y = UNIT_STEPS[list(moves)].sum(axis=0)
        endpoints[(int(x), int(y))] += 1
    return sum(count * endpoints.get((-x, -y), 0) for (x, y), count in endpoints.items())


# ---------------------------------------------------------------------------
# Bridge samplers
# ---------------------------------------------------------------------------

def sample_bridge_1d(steps: int, z: int, rng: np.random.Generator) -> WalkBridge1D:
    """
    Uniform sample among all ``steps``-step +-1 paths from 0 to z.

    Shuffles the multiset of (steps+z)/2 up-steps and (steps-z)/2 down-steps.
    """
    check_endpoint(steps, z)
    ups = (steps + z) // 2
    increments = np.concatenate([np.ones(ups, dtype=np.int64), -np.ones(steps - ups, dtype=np.int64)])
    increments = rng.permutation(increments)
    positions = np.concatenate([[0], np.cumsum(increments)])
    return WalkBridge1D(length=steps, endpoint=z, positions=positions)


def transform_2d(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """
    (S1 + i S2)/(1 + i) on integer data: (x, y) -> ((x+y)/2, (y-x)/2).

    Both inputs must have the parity of their time index, so the halves are exact.
    """
    first = np.asarray(first, dtype=np.int64)
    second = np.asarray(second, dtype=np.int64)
    total = first + second
    if np.any(total % 2):
        raise ValidationError('paths', "coordinates must share the parity of time")
    return np.stack([total // 2, (second - first) // 2], axis=1)


def sample_bridge_2d(n: int, rng: np.random.Generator) -> WalkBridge2D:
    """Uniform element of L^0_n from two independent 1D bridges of 2n steps."""
    n = _require_positive(n)
    first = sample_bridge_1d(2 * n, 0, rng)
    second = sample_bridge_1d(2 * n, 0, rng)
    return WalkBridge2D(length=2 * n, positions=transform_2d(first.positions, second.positions))


# ---------------------------------------------------------------------------
# Conditioned midpoint law
# ---------------------------------------------------------------------------

def _log_comb(n: np.ndarray, k: np.ndarray) -> np.ndarray:
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@lru_cache(maxsize=65536)
def _conditioned_law(total: int, z: int, m: int, exact_limit: int) -> DiscretePmf:
    rest = total - m
    w = np.arange(-m, m + 1, 2, dtype=np.int64)
    w = w[np.abs(z - w) <= rest]
    if total <= exact_limit:
        denominator = math.comb(total, (total + z) // 2)
        probs = np.array([
            float(Fraction(math.comb(m, (m + int(v)) // 2) * math.comb(rest, (rest + z - int(v)) // 2),
                           denominator))
            for v in w
        ])
    else:
        log_p = (_log_comb(m, (m + w) // 2) + _log_comb(rest, (rest + z - w) // 2)
                 - _log_comb(total, (total + z) // 2))
        probs = np.exp(log_p)
        probs /= probs.sum()
    w.setflags(write=False)
    probs.setflags(write=False)
    return DiscretePmf(support=w, probs=probs)


def conditioned_law(total: int, z: int, m: int, exact_limit: int = None) -> DiscretePmf:
    """Law of S_m given S_total = z for any 0 <= m <= total."""
    check_endpoint(total, z)
    if not 0 <= m <= total:
        raise ValidationError('m', f"must lie in [0, {total}], got {m}")
    limit = Config.EXACT_LIMIT if exact_limit is None else exact_limit
    return _conditioned_law(int(total), int(z), int(m), int(limit))


def conditioned_midpoint_pmf(total_steps: int, z: int, m: int, exact_limit: int = None) -> DiscretePmf:
    """
    Exact pmf of S_m given S_total = z, for m a midpoint (|2m - total| <= 1).

    Binomial ratios are exact rationals up to the exact limit and log-space
    beyond it.
    """
    if abs(2 * m - total_steps) > 1:
        raise ValidationError('m', f"{m} is not a midpoint of {total_steps} steps")
    return conditioned_law(total_steps, z, m, exact_limit)


def midpoint_envelope(total: int, z: int, b2: float) -> float:
    """
    Smallest c2 with P{S_m = w | S_n = z} <= c2 n^-1/2 exp(-b2 (w - mz/n)^2 / n).
    """
    m = total // 2
    law = conditioned_midpoint_pmf(total, z, m)
    centre = m * z / total
    ratios = law.probs * math.sqrt(total) * np.exp(b2 * (law.support - centre) ** 2 / total)
    return float(ratios.max())


def local_clt_compare(m: int, l: int, j: int) -> LocalCltComparison:
    """
    Exact P{S_2m = 2j + 2l | S_4m = 4l} against its Gaussian approximation.

    Requires |l| <= m/2 and |j| <= m/8.
    """
    m = _require_positive(m, 'm')
    if abs(l) > m / 2:
        raise ValidationError('l', f"|l| must be <= m/2, got l={l}, m={m}")
    if abs(j) > m / 8:
        raise ValidationError('j', f"|j| must be <= m/8, got j={j}, m={m}")
    law = conditioned_midpoint_pmf(4 * m, 4 * l, 2 * m)
    exact = law.prob(2 * j + 2 * l)
    variance = m * (1.0 - (l / m) ** 2)
    approx = 2.0 * math.sqrt(1.0 / (2.0 * math.pi * variance)) * math.exp(-(2 * j) ** 2 / (2.0 * variance))
    return LocalCltComparison(exact, approx, math.log(exact / approx))


def stirling_approx(n: int) -> StirlingCheck:
    """Stirling's formula with the 1/(12n) correction against exact n!."""
    n = _require_positive(n)
    exact = math.factorial(n)
    log_approx = (0.5 * math.log(2 * math.pi) + (n + 0.5) * math.log(n) - n
                  + math.log1p(1.0 / (12 * n)))
    try:
        approx = math.exp(log_approx)
    except OverflowError:
        approx = math.inf
    relative_error = math.expm1(log_approx - math.log(exact))
    return StirlingCheck(approx, exact, relative_error)
