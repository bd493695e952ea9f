"""
Brownian bridges, loops and the Brownian-side intensity quantities.

Bridges live on dyadic grids and are built by midpoint refinement. Loops
are bridges rescaled in time by their duration and in space by its square
root, then translated to their root.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..utils.exceptions import ValidationError

logger = logging.getLogger(__name__)

# Coupled Brownian loops of index n have durations in [n - 3/8, n + 5/8].
DURATION_LOW = 3.0 / 8.0
DURATION_HIGH = 5.0 / 8.0


def _interp(times: np.ndarray, values: np.ndarray, t) -> np.ndarray:
    if np.iscomplexobj(values):
        return np.interp(t, times, values.real) + 1j * np.interp(t, times, values.imag)
    return np.interp(t, times, values)


@dataclass(frozen=True)
class BridgePath:
    """
    A path sampled at increasing times starting from 0.

    A standard bridge runs over [0, 1] and is pinned to 0 at both ends.
    Values are real (1D) or complex (2D).
    """

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    depth: Optional[int] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values)
        if not np.iscomplexobj(values):
            values = values.astype(float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValidationError('bridge', "times and values must be 1-d arrays of equal length")
        if len(times) < 2 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValidationError('bridge', "times must start at 0 and increase strictly")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    @property
    def span(self) -> float:
        return float(self.times[-1])

    @property
    def dims(self) -> int:
        return 2 if np.iscomplexobj(self.values) else 1

    @property
    def is_standard(self) -> bool:
        return self.span == 1.0 and self.values[0] == 0 and self.values[-1] == 0

    def at(self, t) -> np.ndarray:
        """Linear interpolation between grid samples."""
        return _interp(self.times, self.values, t)


@dataclass(frozen=True)
class ContinuousLoop:
    """A closed curve of positive duration, rooted at ``points[0]``."""

    root: complex
    duration: float
    times: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        points = np.asarray(self.points, dtype=complex)
        if not self.duration > 0:
            raise ValidationError('duration', f"must be positive, got {self.duration}")
        if times.shape != points.shape or len(times) < 2:
            raise ValidationError('loop', "times and points must have equal length >= 2")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValidationError('loop', "sample times must increase strictly from 0")
        if not math.isclose(times[-1], self.duration, rel_tol=1e-12):
            raise ValidationError('loop', "last sample time must equal the duration")
        scale = max(1.0, abs(self.root))
        if abs(points[0] - self.root) > 1e-9 * scale or abs(points[-1] - self.root) > 1e-9 * scale:
            raise ValidationError('loop', "loop must start and end at its root")
        times = times.copy()
        times[-1] = self.duration
        points = points.copy()
        points[0] = points[-1] = self.root
        times.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, 'root', complex(self.root))
        object.__setattr__(self, 'duration', float(self.duration))
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'points', points)

    @classmethod
    def from_lattice(cls, positions: np.ndarray) -> 'ContinuousLoop':
        """Interpolated lattice loop: integer pairs at integer times 0..2n."""
        positions = np.asarray(positions).reshape(-1, 2)
        points = positions[:, 0] + 1j * positions[:, 1]
        return cls(root=points[0], duration=float(len(points) - 1),
                   times=np.arange(len(points), dtype=float), points=points)

    def at(self, t) -> np.ndarray:
        return _interp(self.times, self.points, t)

    def at_fraction(self, s) -> np.ndarray:
        """gamma(s * t_gamma) for s in [0, 1]."""
        return self.at(np.asarray(s, dtype=float) * self.duration)


# ---------------------------------------------------------------------------
# Bridge sampling
# ---------------------------------------------------------------------------

def dyadic_grid(depth: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, 2 ** depth + 1)


def sample_bridges(depth: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Batch of standard 1D bridges on the dyadic grid of the given depth.

    Args:
        depth: Grid resolution 2^-depth
        size: Number of independent bridges
        rng: Random generator

    Returns:
        Array of shape (size, 2**depth + 1)
    """
    if depth < 0:
        raise ValidationError('depth', f"must be >= 0, got {depth}")
    values = np.zeros((size, 2))
    width = 1.0
    for _ in range(depth):
        # midpoint of an interval of length h given its ends: mean of ends, variance h/4
        means = 0.5 * (values[:, :-1] + values[:, 1:])
        mids = means + 0.5 * math.sqrt(width) * rng.standard_normal(means.shape)
        refined = np.empty((size, 2 * values.shape[1] - 1))
        refined[:, 0::2] = values
        refined[:, 1::2] = mids
        values = refined
        width /= 2.0
    return values


def sample_bridge(depth: int, dims: int, rng: np.random.Generator) -> BridgePath:
    """Standard Brownian bridge on [0, 1], real for dims=1 and complex for dims=2."""
    if dims not in (1, 2):
        raise ValidationError('dims', f"must be 1 or 2, got {dims}")
    paths = sample_bridges(depth, dims, rng)
    values = paths[0] if dims == 1 else paths[0] + 1j * paths[1]
    return BridgePath(times=dyadic_grid(depth), values=values, depth=depth)


def surgery_compose(first: BridgePath, second: BridgePath, normal: float, s: float) -> BridgePath:
    """
    Join two standard bridges into one, pinning the value at time s.

    X_s = sqrt(s(1-s)) N; on [0, s] X is sqrt(s) first(t/s) + (t/s) X_s and on
    [s, 1] it is sqrt(1-s) second((t-s)/(1-s)) + ((1-t)/(1-s)) X_s. If both
    inputs are standard bridges independent of N, so is X.
    """
    if not 0.0 < s < 1.0:
        raise ValidationError('s', f"must lie in (0, 1), got {s}")
    if not (first.is_standard and second.is_standard):
        raise ValidationError('bridge', "surgery needs standard bridges on [0, 1]")
    pinned = math.sqrt(s * (1.0 - s)) * normal
    left_t = s * first.times
    left = math.sqrt(s) * first.values + first.times * pinned
    right_u = second.times[1:]
    right_t = s + (1.0 - s) * right_u
    right = math.sqrt(1.0 - s) * second.values[1:] + (1.0 - right_u) * pinned
    times = np.concatenate([left_t, right_t])
    times[-1] = 1.0
    values = np.concatenate([left, right])
    values[0] = values[-1] = 0.0
    return BridgePath(times=times, values=values)


def bridge_with_endpoints(bridge: BridgePath, n: float, z1=0.0, z2=0.0) -> BridgePath:
    """Y_t = sqrt(n) B_{t/n} + ((n - t)/n) z1 + (t/n) z2 on [0, n]."""
    if not n > 0:
        raise ValidationError('n', f"must be positive, got {n}")
    u = bridge.times
    values = math.sqrt(n) * bridge.values + (1.0 - u) * z1 + u * z2
    return BridgePath(times=n * u, values=values, depth=bridge.depth)


def loop_from_bridge(bridge: BridgePath, duration: float, root: complex) -> ContinuousLoop:
    """Brownian scaling of a standard 2D bridge to a loop of the given duration."""
    if not duration > 0:
        raise ValidationError('duration', f"must be positive, got {duration}")
    if not bridge.is_standard:
        raise ValidationError('bridge', "loops are built from standard bridges")
    points = root + math.sqrt(duration) * bridge.values.astype(complex)
    return ContinuousLoop(root=root, duration=duration, times=duration * bridge.times, points=points)


# ---------------------------------------------------------------------------
# Scaling maps
# ---------------------------------------------------------------------------

def _require_scale(scale: int) -> int:
    if int(scale) != scale or scale < 1:
        raise ValidationError('N', f"scale must be a positive integer, got {scale!r}")
    return int(scale)


def scale_brownian(loop: ContinuousLoop, scale: int) -> ContinuousLoop:
    """Phi_N: time divided by N^2, space by N."""
    scale = _require_scale(scale)
    factor = float(scale * scale)
    return ContinuousLoop(root=loop.root / scale, duration=loop.duration / factor,
                          times=loop.times / factor, points=loop.points / scale)


def scale_walk(loop: ContinuousLoop, scale: int) -> ContinuousLoop:
    """Phi~_N: a 2n-step interpolated walk loop gets duration n/N^2 and spacing 1/N."""
    scale = _require_scale(scale)
    steps = loop.duration
    if steps != round(steps) or round(steps) % 2:
        raise ValidationError('loop', f"walk loops have an even integer duration, got {steps}")
    factor = 2.0 * scale * scale
    return ContinuousLoop(root=loop.root / scale, duration=steps / factor,
                          times=loop.times / factor, points=loop.points / scale)


def sup_distance_rescaled(first: ContinuousLoop, second: ContinuousLoop, grid: int = None) -> float:
    """
    sup over s in [0, 1] of |first(s t_first) - second(s t_second)|.

    The sup is taken on a uniform grid, by default four times the larger
    sample count.
    """
    if grid is None:
        grid = 4 * max(len(first.times), len(second.times))
    s = np.linspace(0.0, 1.0, max(int(grid), 2))
    return float(np.max(np.abs(first.at_fraction(s) - second.at_fraction(s))))


# ---------------------------------------------------------------------------
# Durations and intensities
# ---------------------------------------------------------------------------

def _require_index(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValidationError('n', f"must be a positive integer, got {n!r}")
    return int(n)


def q_n(n) -> float:
    """Brownian loop mass per root with duration in [n - 3/8, n + 5/8]."""
    if np.ndim(n):
        n = np.asarray(n, dtype=float)
        if np.any(n < 1):
            raise ValidationError('n', "indices must be >= 1")
        return 1.0 / (2.0 * np.pi * (n + DURATION_HIGH) * (n - DURATION_LOW))
    n = _require_index(n)
    return 1.0 / (2.0 * math.pi * (n + DURATION_HIGH) * (n - DURATION_LOW))


def q_tail(n: int) -> float:
    """sum_{k >= n} q_k, which telescopes to 1/(2 pi (n - 3/8))."""
    n = _require_index(n)
    return 1.0 / (2.0 * math.pi * (n - DURATION_LOW))


def intensity_integral(t0: float, t1: float = math.inf) -> float:
    """Integral of dt/(2 pi t^2) over [t0, t1]."""
    if not 0 < t0 <= t1:
        raise ValidationError('t0', f"need 0 < t0 <= t1, got t0={t0}, t1={t1}")
    upper = 0.0 if math.isinf(t1) else 1.0 / t1
    return (1.0 / t0 - upper) / (2.0 * math.pi)


def duration_quantile(n: int, u):
    """Inverse CDF of the density (n+5/8)(n-3/8)/s^2 on [n-3/8, n+5/8]."""
    n = _require_index(n)
    high = n + DURATION_HIGH
    return high * (n - DURATION_LOW) / (high - np.asarray(u, dtype=float))


def duration_cdf(n: int, s):
    n = _require_index(n)
    s = np.clip(np.asarray(s, dtype=float), n - DURATION_LOW, n + DURATION_HIGH)
    return (n + DURATION_HIGH) * (n - DURATION_LOW) * (1.0 / (n - DURATION_LOW) - 1.0 / s)


def sample_duration(n: int, rng: np.random.Generator, size: int = None):
    """Duration of a coupled Brownian loop of index n, by inverse CDF."""
    value = duration_quantile(n, rng.random(size))
    return float(value) if size is None else value


# ---------------------------------------------------------------------------
# Exponential moment of the bridge supremum
# ---------------------------------------------------------------------------

class SupMoment(NamedTuple):
    a: float
    mean: float
    stderr: float


def bridge_sup_moment(a: float, depth: int, samples: int, rng: np.random.Generator,
                      chunk: int = 20000) -> SupMoment:
    """Empirical E[exp(a M)] with M the grid sup of |B| for a standard 1D bridge."""
    total = 0.0
    total_sq = 0.0
    remaining = samples
    while remaining > 0:
        size = min(chunk, remaining)
        sup = np.max(np.abs(sample_bridges(depth, size, rng)), axis=1)
        weights = np.exp(a * sup)
        total += weights.sum()
        total_sq += np.square(weights).sum()
        remaining -= size
    mean = total / samples
    variance = max(total_sq / samples - mean * mean, 0.0)
    return SupMoment(a, mean, math.sqrt(variance / samples))


def fit_sup_moment(moments: Sequence[SupMoment]) -> Tuple[float, float]:
    """
    Fit (c~, u) with E[exp(a M)] <= c~ exp(u a^2) at every measured a.

    u is the least-squares slope of log E against a^2; c~ is then the
    smallest constant that dominates every point.
    """
    a_sq = np.array([m.a ** 2 for m in moments])
    log_mean = np.log([m.mean for m in moments])
    if len(moments) < 2:
        raise ValidationError('moments', "need at least two values of a")
    slope, _ = np.polyfit(a_sq, log_mean, 1)
    u = max(float(slope), 0.0)
    c_tilde = float(np.exp(np.max(log_mean - u * a_sq)))
    return c_tilde, u
