"""
Bounded domains, soup restriction and the boundary Monte Carlo studies.

Domains are a disk or a simple polygon inside the closed unit disk and
containing the origin. The studies estimate the Brownian loop mass of the
boundary layer, the Beurling avoidance probability and the gambler's-ruin
probability.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from matplotlib.path import Path
from scipy.special import erf

from ..coupling.soup import SoupRealization
from ..samplers.brownian import intensity_integral, sample_bridges
from ..utils.exceptions import ValidationError

logger = logging.getLogger(__name__)

DISK = 'disk'
POLYGON = 'polygon'


def _segment_distance(points: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Distance from each complex point to the nearest of the segments, vectorised."""
    p = points[..., None]
    d = ends - starts
    length_sq = np.abs(d) ** 2
    u = np.clip(((p - starts) * np.conj(d)).real / length_sq, 0.0, 1.0)
    return np.min(np.abs(p - (starts + u * d)), axis=-1)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a.real * b.imag - a.imag * b.real


def _segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Pairwise closed-segment intersection of segments p (rows) and q (columns)."""
    p1, p2 = p1[:, None], p2[:, None]
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    return (d1 * d2 <= 0) & (d3 * d4 <= 0)


@dataclass(frozen=True)
class Domain:
    """A disk or simple polygon in the closed unit disk that contains the origin."""

    kind: str
    center: complex = 0j
    radius: float = 1.0
    vertices: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == DISK:
            if not self.radius > 0:
                raise ValidationError('domain', f"radius must be positive, got {self.radius}")
            if abs(self.center) >= self.radius:
                raise ValidationError('domain', "disk must contain the origin")
            if abs(self.center) + self.radius > 1.0 + 1e-12:
                raise ValidationError('domain', "disk must lie in the closed unit disk")
        elif self.kind == POLYGON:
            vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
            if len(vertices) < 3:
                raise ValidationError('domain', "a polygon needs at least 3 vertices")
            if np.any(np.hypot(vertices[:, 0], vertices[:, 1]) > 1.0 + 1e-12):
                raise ValidationError('domain', "polygon must lie in the closed unit disk")
            vertices.setflags(write=False)
            object.__setattr__(self, 'vertices', vertices)
            if not self.path.contains_point((0.0, 0.0)):
                raise ValidationError('domain', "polygon must contain the origin")
        else:
            raise ValidationError('domain', f"unknown shape {self.kind!r}")

    @classmethod
    def disk(cls, center: complex = 0j, radius: float = 1.0) -> 'Domain':
        return cls(DISK, center=complex(center), radius=float(radius))

    @classmethod
    def polygon(cls, vertices) -> 'Domain':
        return cls(POLYGON, vertices=vertices)

    @property
    def is_disk(self) -> bool:
        return self.kind == DISK

    @property
    def path(self) -> Path:
        return Path(self.vertices, closed=False)

    @property
    def edges(self):
        corners = self.vertices[:, 0] + 1j * self.vertices[:, 1]
        return corners, np.roll(corners, -1)

    @property
    def area(self) -> float:
        if self.is_disk:
            return math.pi * self.radius ** 2
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def contains(self, points) -> np.ndarray:
        """Open-domain membership of complex points (any shape)."""
        points = np.asarray(points, dtype=complex)
        if self.is_disk:
            return np.abs(points - self.center) < self.radius
        flat = points.ravel()
        inside = self.path.contains_points(np.column_stack([flat.real, flat.imag]))
        inside &= self.boundary_distance(flat) > 0
        return inside.reshape(points.shape)

    def boundary_distance(self, points) -> np.ndarray:
        """Distance to the boundary (unsigned)."""
        points = np.asarray(points, dtype=complex)
        if self.is_disk:
            return np.abs(self.radius - np.abs(points - self.center))
        starts, ends = self.edges
        return _segment_distance(points, starts, ends)

    def contains_polyline(self, points: np.ndarray) -> bool:
        """Whether every sample and every interpolating segment lies in the domain."""
        points = np.asarray(points, dtype=complex)
        if not np.all(self.contains(points)):
            return False
        if self.is_disk or len(points) < 2:
            return True
        starts, ends = self.edges
        return not np.any(_segments_intersect(points[:-1], points[1:], starts, ends))


def slit_disk(sides: int = 96, slit_depth: float = 0.7, slit_width: float = 0.02) -> Domain:
    """
    Regular polygon approximating the unit disk with a thin radial slit cut
    in along the positive real axis, leaving its tip at 1 - slit_depth.
    """
    if not 0 < slit_depth < 1:
        raise ValidationError('slit_depth', f"must lie in (0, 1), got {slit_depth}")
    half = slit_width / 2.0
    opening = math.asin(half)
    angles = np.linspace(opening, 2.0 * math.pi - opening, sides)
    tip = 1.0 - slit_depth
    arc = np.column_stack([np.cos(angles), np.sin(angles)])
    vertices = np.vstack([[tip, half], arc, [tip, -half]])
    return Domain.polygon(vertices)


def restrict_soup(realization: SoupRealization, domain: Domain) -> SoupRealization:
    """Keep exactly the loops that lie in the domain."""
    kept = [item for item in realization.loops if domain.contains_polyline(item.loop.points)]
    logger.debug("restriction kept %d of %d loops", len(kept), len(realization.loops))
    return dataclasses.replace(realization, loops=kept)


# ---------------------------------------------------------------------------
# Boundary layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerEstimate:
    """Monte Carlo mass of loops that stay in D but come within eps of its boundary."""

    eps: float
    t0: float
    t_max: float
    samples: int
    estimate: float
    stderr: float
    shape: float
    neglected_mass: float
    depth: int = 8

    @property
    def ratio(self) -> float:
        return self.estimate / self.shape if self.shape > 0 else 0.0

    def bound(self, c: float) -> float:
        return c * self.shape


def layer_shape(domain: Domain, eps: float, t0: float) -> float:
    """eps t0^-3/2 for a disk, eps^1/2 t0^-5/4 otherwise."""
    if domain.is_disk:
        return eps * t0 ** -1.5
    return math.sqrt(eps) * t0 ** -1.25


def uniform_points(domain: Domain, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points of the domain by rejection from the square [-1, 1]^2."""
    found = np.empty(0, dtype=complex)
    while len(found) < size:
        batch = rng.uniform(-1.0, 1.0, size=(2, 2 * (size - len(found)) + 16))
        candidates = batch[0] + 1j * batch[1]
        found = np.concatenate([found, candidates[domain.contains(candidates)]])
    return found[:size]


def boundary_layer_measure(domain: Domain, eps: float, t0: float, t_max: float, samples: int,
                           rng: np.random.Generator, depth: int = 8) -> LayerEstimate:
    """
    Importance-sampled mu-mass of loops with duration in [t0, t_max] that
    stay in D and leave D_eps.

    Roots are uniform in D, durations follow the density proportional to
    t^-2 and shapes are standard bridges on a grid of the given depth. The
    indicator is checked at grid points, which can only miss layer visits.
    """
    if eps < 0:
        raise ValidationError('eps', f"must be >= 0, got {eps}")
    if not 0 < t0 < t_max:
        raise ValidationError('t0', f"need 0 < t0 < t_max, got t0={t0}, t_max={t_max}")
    limit = t0 ** 1.5 if domain.is_disk else t0 ** 1.25
    if eps > limit:
        raise ValidationError('eps', f"must be <= {limit:.6g} for t0={t0}")
    total_mass = domain.area * intensity_integral(t0, t_max)
    neglected = domain.area * intensity_integral(t_max)
    shape = layer_shape(domain, eps, t0)
    if eps == 0:
        return LayerEstimate(eps, t0, t_max, samples, 0.0, 0.0, shape, neglected, depth)

    points_per_loop = 2 ** depth + 1
    edges = 1 if domain.is_disk else len(domain.vertices)
    chunk = max(1, min(20000, 1_000_000 // (points_per_loop * edges)))
    hits = 0
    remaining = samples
    while remaining > 0:
        size = min(chunk, remaining)
        roots = uniform_points(domain, size, rng)
        u = rng.random(size)
        durations = 1.0 / (1.0 / t0 - u * (1.0 / t0 - 1.0 / t_max))
        shapes = sample_bridges(depth, 2 * size, rng)
        loops = roots[:, None] + np.sqrt(durations)[:, None] * (shapes[:size] + 1j * shapes[size:])
        inside = np.all(domain.contains(loops), axis=1)
        near = np.min(domain.boundary_distance(loops), axis=1) <= eps
        hits += int(np.count_nonzero(inside & near))
        remaining -= size
    fraction = hits / samples
    stderr = math.sqrt(fraction * (1.0 - fraction) / samples) * total_mass
    return LayerEstimate(eps, t0, t_max, samples, fraction * total_mass, stderr, shape, neglected, depth)


def fit_layer_constant(estimates: Sequence[LayerEstimate]) -> float:
    """Smallest c with estimate <= c * shape for every estimate."""
    return max((e.ratio for e in estimates), default=0.0)


class LogLogFit(NamedTuple):
    slope: float
    intercept: float


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """Least-squares line through (log x, log y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValidationError('data', "need at least two strictly positive points")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return LogLogFit(float(slope), float(intercept))


# ---------------------------------------------------------------------------
# Beurling and gambler's ruin
# ---------------------------------------------------------------------------

class ProbabilityEstimate(NamedTuple):
    estimate: float
    stderr: float
    samples: int


def _ray_hits(start: np.ndarray, end: np.ndarray, r: float, dt: float,
              rng: np.random.Generator) -> np.ndarray:
    """
    Whether the path between consecutive samples meets the ray [r, inf) on the real axis.

    Same-side steps with both ends at x >= r add the bridge excursion
    probability; this is an approximation that sharpens as dt shrinks.
    """
    y0, y1 = start.imag, end.imag
    x0, x1 = start.real, end.real
    opposite = y0 * y1 <= 0
    with np.errstate(divide='ignore', invalid='ignore'):
        crossing_x = np.where(y0 != y1, x0 - y0 * (x1 - x0) / (y1 - y0), x0)
    hits = opposite & (crossing_x >= r)
    # same side, both endpoints over the ray: Brownian bridge excursion to the axis
    over = ~opposite & (x0 >= r) & (x1 >= r)
    excursion = np.exp(-2.0 * np.abs(y0) * np.abs(y1) / dt)
    hits |= over & (rng.random(start.shape) < excursion)
    return hits


def beurling_mc(z: complex, r: float, t: float, samples: int, rng: np.random.Generator,
                steps: int = 1024, obstacle: bool = True, chunk: int = 20000) -> ProbabilityEstimate:
    """
    Probability that planar Brownian motion from z avoids the ray [r, inf)
    up to time t.

    Paths use exact Gaussian increments on a uniform grid; each step is
    tested for a chord crossing of the ray, plus the bridge excursion
    probability exp(-2 y0 y1 / dt) when both ends sit above the ray.
    """
    if not r > 0 or not t > 0:
        raise ValidationError('r', f"need r > 0 and t > 0, got r={r}, t={t}")
    if abs(z) > r:
        raise ValidationError('z', f"|z| must be <= r, got |z|={abs(z)}, r={r}")
    if not obstacle:
        return ProbabilityEstimate(1.0, 0.0, samples)
    dt = t / steps
    avoided = 0
    remaining = samples
    while remaining > 0:
        size = min(chunk, remaining)
        position = np.full(size, complex(z))
        alive = np.ones(size, dtype=bool)
        for _ in range(steps):
            step = math.sqrt(dt) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
            following = position + step
            alive &= ~_ray_hits(position, following, r, dt, rng)
            position = following
        avoided += int(np.count_nonzero(alive))
        remaining -= size
    p = avoided / samples
    return ProbabilityEstimate(p, math.sqrt(p * (1.0 - p) / samples), samples)


class RuinCheck(NamedTuple):
    estimate: float
    exact: float
    stderr: float


def gambler_ruin_check(eps: float, t: float, samples: int, rng: np.random.Generator) -> RuinCheck:
    """
    P{BM from eps stays positive on [0, t]} by exact minimum sampling.

    Given B_t = x, the minimum of the path from eps is
    (eps + x - sqrt((x - eps)^2 + 2 t E)) / 2 with E ~ Exp(1). The closed
    form erf(eps / sqrt(2t)) is returned as the oracle.
    """
    if not eps > 0 or not t > 0:
        raise ValidationError('eps', f"need eps > 0 and t > 0, got eps={eps}, t={t}")
    end = eps + math.sqrt(t) * rng.standard_normal(samples)
    minimum = 0.5 * (eps + end - np.sqrt((end - eps) ** 2 + 2.0 * t * rng.exponential(size=samples)))
    p = float(np.mean(minimum > 0))
    return RuinCheck(p, float(erf(eps / math.sqrt(2.0 * t))), math.sqrt(p * (1.0 - p) / samples))
