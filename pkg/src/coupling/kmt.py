"""
Quantile coupling and the recursive dyadic coupling of walk bridges to a
Brownian bridge.

A ``DyadicCoupling`` of size n stores one standard normal per internal node
and some base randomness per leaf. From it we realize a single standard
Brownian bridge and, for every admissible endpoint z, a walk bridge
S^(n,z) whose law is exactly the conditioned walk law.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from ..samplers.brownian import (
    BridgePath,
    bridge_with_endpoints,
    sample_bridge,
    surgery_compose,
)
from ..samplers.lattice_walk import (
    DiscretePmf,
    WalkBridge1D,
    WalkBridge2D,
    check_endpoint,
    conditioned_midpoint_pmf,
    interpolate_walk,
    transform_2d,
)
from ..utils.config import Config
from ..utils.exceptions import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuantileSpec:
    """
    A continuous CDF F paired with a discrete law G on increasing support.

    ``sf`` is the survival function of F; when given it is used on the
    upper half so that levels close to 1 keep full precision.
    """

    cdf: Callable[[float], float]
    support: np.ndarray
    masses: np.ndarray
    sf: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        if support.ndim != 1 or support.shape != masses.shape or len(support) == 0:
            raise ValidationError('spec', "support and masses must be non-empty 1-d arrays of equal length")
        if np.any(np.diff(support) <= 0):
            raise ValidationError('spec', "support must be strictly increasing")
        if np.any(masses < 0) or not math.isclose(masses.sum(), 1.0, abs_tol=1e-9):
            raise ValidationError('spec', "masses must be non-negative and sum to 1")
        grid = np.linspace(support[0] - 1.0, support[-1] + 1.0, 33)
        levels = np.array([self.cdf(x) for x in grid])
        if np.any(levels < 0) or np.any(levels > 1) or np.any(np.diff(levels) < 0):
            raise ValidationError('spec', "continuous CDF must be nondecreasing with values in [0, 1]")
        object.__setattr__(self, 'support', support)
        object.__setattr__(self, 'masses', masses)

    @classmethod
    def normal(cls, mean: float, variance: float, law: DiscretePmf) -> 'QuantileSpec':
        """F = N(mean, variance) against an integer pmf."""
        sd = math.sqrt(variance)
        return cls(cdf=lambda x: float(ndtr((x - mean) / sd)),
                   support=law.support, masses=law.probs,
                   sf=lambda x: float(ndtr((mean - x) / sd)))


def _select_level(masses: np.ndarray, lower: float, upper: float) -> int:
    """
    Index j with G(a_j-) < F(x) <= G(a_j), given lower = F(x), upper = 1 - F(x).
    """
    if lower <= 0.5:
        cdf = np.cumsum(masses)
        j = int(np.searchsorted(cdf, lower, side='left'))
    else:
        # P(W > a_j) <= 1 - F(x), counted from the top
        sf = np.cumsum(masses[::-1])[::-1]
        sf = np.append(sf[1:], 0.0)
        j = int(np.searchsorted(-sf, -upper, side='left'))
    return min(j, len(masses) - 1)


def quantile_couple(z_draw: float, spec: QuantileSpec) -> float:
    """
    Map a draw of F to the support point whose G-interval contains F(z_draw).

    When z_draw ~ F the output has law G exactly, and the map is
    nondecreasing in z_draw.
    """
    lower = spec.cdf(z_draw)
    upper = spec.sf(z_draw) if spec.sf is not None else 1.0 - lower
    return spec.support[_select_level(spec.masses, lower, upper)]


class NormalParams(NamedTuple):
    mean: float
    variance: float


def midpoint_normal_params(n: int, m: int, z: int) -> NormalParams:
    """Mean (m/n) z and variance m (1 - m/n) of the Brownian value at the split."""
    check_endpoint(n, z)
    if abs(2 * m - n) > 1:
        raise ValidationError('m', f"{m} is not a midpoint of {n}")
    return NormalParams(m * z / n, m * (1.0 - m / n))


# ---------------------------------------------------------------------------
# Coupling tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingNode:
    """Internal nodes carry a normal and two children; leaves (size <= 2) carry base randomness."""

    size: int
    normal: Optional[float] = None
    left: Optional['CouplingNode'] = None
    right: Optional['CouplingNode'] = None
    uniform: Optional[float] = None
    piece: Optional[BridgePath] = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def split(self) -> int:
        return self.size // 2


def _build_node(size: int, rng: np.random.Generator, leaf_refine: int) -> CouplingNode:
    if size <= 2:
        # size-2 leaves need the grid point at their midpoint
        depth = leaf_refine + (1 if size == 2 else 0)
        return CouplingNode(size=size, uniform=float(rng.random()),
                            piece=sample_bridge(depth, 1, rng))
    normal = float(rng.standard_normal())
    k = size // 2
    left = _build_node(k, rng, leaf_refine)
    right = _build_node(size - k, rng, leaf_refine)
    return CouplingNode(size=size, normal=normal, left=left, right=right)


def _walk_from_node(node: CouplingNode, z: int) -> np.ndarray:
    if node.is_leaf:
        if node.size == 1:
            return np.array([0, z], dtype=np.int64)
        if z != 0:
            return np.array([0, z // 2, z], dtype=np.int64)
        return np.array([0, -1 if node.uniform < 0.5 else 1, 0], dtype=np.int64)
    k = node.split
    law = conditioned_midpoint_pmf(node.size, z, k)
    w = int(law.support[_select_level(law.probs, float(ndtr(node.normal)), float(ndtr(-node.normal)))])
    left = _walk_from_node(node.left, w)
    right = _walk_from_node(node.right, z - w)
    return np.concatenate([left, w + right[1:]])


def _bridge_from_node(node: CouplingNode) -> BridgePath:
    if node.is_leaf:
        return node.piece
    return surgery_compose(_bridge_from_node(node.left), _bridge_from_node(node.right),
                           node.normal, node.split / node.size)


def _leaves(node: CouplingNode) -> Iterator[CouplingNode]:
    if node.is_leaf:
        yield node
    else:
        yield from _leaves(node.left)
        yield from _leaves(node.right)


@dataclass(frozen=True)
class DyadicCoupling:
    """
    An n-coupling: a tree of node normals and leaf randomness.

    The realized bridge is cached; walks are derived on demand for any
    admissible endpoint.
    """

    n: int
    root: CouplingNode = field(repr=False)

    @property
    def left(self) -> Optional['DyadicCoupling']:
        if self.root.is_leaf:
            return None
        return DyadicCoupling(self.root.left.size, self.root.left)

    @property
    def right(self) -> Optional['DyadicCoupling']:
        if self.root.is_leaf:
            return None
        return DyadicCoupling(self.root.right.size, self.root.right)

    @property
    def depth(self) -> int:
        depth, node = 0, self.root
        while not node.is_leaf:
            node = node.left if node.left.size >= node.right.size else node.right
            depth += 1
        return depth

    def leaf_sizes(self) -> List[int]:
        return [leaf.size for leaf in _leaves(self.root)]

    @cached_property
    def bridge(self) -> BridgePath:
        return _bridge_from_node(self.root)


@dataclass(frozen=True)
class CouplingSample:
    bridge: BridgePath
    walk: WalkBridge1D
    delta: float


def build_coupling(n: int, rng: np.random.Generator, leaf_refine: int = None) -> DyadicCoupling:
    """
    Draw every node normal and leaf piece of an n-coupling from one stream.

    Sizes split as k = floor(n/2) on the left and n - k on the right, down
    to leaves of size 1 or 2.

    Args:
        n: Number of walk steps
        rng: Random generator; the tree is a deterministic function of its stream
        leaf_refine: Extra dyadic levels inside each leaf piece (default Config.LEAF_REFINE)

    Returns:
        The coupling tree
    """
    if int(n) != n or n < 1:
        raise ValidationError('n', f"must be a positive integer, got {n!r}")
    if leaf_refine is None:
        leaf_refine = Config.LEAF_REFINE
    if leaf_refine < 0:
        raise ValidationError('leaf_refine', f"must be >= 0, got {leaf_refine}")
    coupling = DyadicCoupling(int(n), _build_node(int(n), rng, leaf_refine))
    logger.debug("built %d-coupling with %d leaves", n, len(coupling.leaf_sizes()))
    return coupling


def realize_bridge(coupling: DyadicCoupling) -> BridgePath:
    """Standard Brownian bridge assembled by surgery at every split point."""
    return coupling.bridge


def realize_walk(coupling: DyadicCoupling, z: int) -> WalkBridge1D:
    """The walk bridge S^(n,z) carried by the coupling."""
    check_endpoint(coupling.n, z)
    positions = _walk_from_node(coupling.root, int(z))
    return WalkBridge1D(length=coupling.n, endpoint=int(z), positions=positions)


def delta(coupling: DyadicCoupling, z: int, refine: int = 1) -> float:
    """
    Delta(n, z) = sup_t |Y_t - S_t| with Y = bridge_with_endpoints(B, n, 0, z).

    The sup runs over the bridge grid (all split points and integer times)
    together with a uniform grid of ``refine * n`` intervals.
    """
    walk = realize_walk(coupling, z)
    path = bridge_with_endpoints(coupling.bridge, coupling.n, 0.0, float(z))
    times = np.union1d(path.times, np.linspace(0.0, coupling.n, max(int(refine), 1) * coupling.n + 1))
    gap = path.at(times) - interpolate_walk(walk.positions, times)
    return float(np.max(np.abs(gap)))


def coupling_sample(coupling: DyadicCoupling, z: int, refine: int = 1) -> CouplingSample:
    return CouplingSample(coupling.bridge, realize_walk(coupling, z), delta(coupling, z, refine))


class DeltaDecomposition(NamedTuple):
    pinned: float
    midpoint: int
    delta: float
    left_delta: float
    right_delta: float

    @property
    def bound(self) -> float:
        return abs(self.pinned - self.midpoint) + max(self.left_delta, self.right_delta)


def delta_decomposition(coupling: DyadicCoupling, z: int) -> DeltaDecomposition:
    """
    Root split of Delta(n, z): the Brownian value Z at the split, the walk
    value W coupled to it and the children's own discrepancies Delta(k, W)
    and Delta(n - k, z - W). Delta(n, z) never exceeds ``bound``.
    """
    if coupling.root.is_leaf:
        raise ValidationError('coupling', "a leaf has no split point")
    check_endpoint(coupling.n, z)
    k = coupling.root.split
    mean, variance = midpoint_normal_params(coupling.n, k, z)
    pinned = mean + math.sqrt(variance) * coupling.root.normal
    midpoint = int(realize_walk(coupling, z).positions[k])
    return DeltaDecomposition(
        pinned=pinned,
        midpoint=midpoint,
        delta=delta(coupling, z),
        left_delta=delta(coupling.left, midpoint),
        right_delta=delta(coupling.right, z - midpoint),
    )


# ---------------------------------------------------------------------------
# Two dimensions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coupled2D:
    """A 2D standard bridge and the closed walk loop coupled to it."""

    bridge: BridgePath
    walk: WalkBridge2D
    first: DyadicCoupling = field(repr=False)
    second: DyadicCoupling = field(repr=False)

    def __iter__(self):
        return iter((self.bridge, self.walk))

    @property
    def half_length(self) -> int:
        return self.walk.length // 2

    def discrepancy(self) -> float:
        """sup_s |n^-1/2 S_{2ns} - B_s| over the bridge grid and the walk's integer times."""
        steps = self.walk.length
        s = np.union1d(self.bridge.times, np.linspace(0.0, 1.0, steps + 1))
        walk = interpolate_walk(self.walk.as_complex, steps * s)
        return float(np.max(np.abs(walk / math.sqrt(self.half_length) - self.bridge.at(s))))


def couple_2d(n: int, rng: np.random.Generator, leaf_refine: int = None) -> Coupled2D:
    """
    Couple a uniform loop of L^0_n with a 2D standard bridge.

    Two independent 2n-couplings at endpoint 0 give the coordinates; the walk
    is their complex transform and the bridge is (B1 + i B2)(1 - i)/sqrt(2).
    """
    if int(n) != n or n < 1:
        raise ValidationError('n', f"must be a positive integer, got {n!r}")
    first = build_coupling(2 * n, rng, leaf_refine)
    second = build_coupling(2 * n, rng, leaf_refine)
    walk = WalkBridge2D(
        length=2 * n,
        positions=transform_2d(realize_walk(first, 0).positions, realize_walk(second, 0).positions),
    )
    # both trees have the same shape, hence the same grid
    values = (first.bridge.values + 1j * second.bridge.values) * (1 - 1j) / math.sqrt(2.0)
    bridge = BridgePath(times=first.bridge.times, values=values)
    return Coupled2D(bridge=bridge, walk=walk, first=first, second=second)


# ---------------------------------------------------------------------------
# CDF sandwich
# ---------------------------------------------------------------------------

@dataclass
class SandwichReport:
    total: int
    z: int
    c1: float
    fitted_c1: float
    holds: bool
    rows: List[dict] = field(default_factory=list)
    saturated: List[int] = field(default_factory=list)


def cdf_sandwich_check(total: int, z: int, c1: float, x_range: Sequence[int]) -> SandwichReport:
    """
    Check F(x - c1[1 + x^2/n]) <= G(x - 1) <= G(x + 1) <= F(x + c1[1 + x^2/n]).

    G is the midpoint law centred at its mean (m/n) z, F is the centred
    normal CDF with variance (n/4)(1 - (z/n)^2). The smallest c1 that makes
    every inequality hold is reported; offsets where G(x - 1) = 0 or
    G(x + 1) = 1 cannot be sandwiched by any finite c1 and are listed as
    saturated instead.
    """
    m = total // 2
    law = conditioned_midpoint_pmf(total, z, m)
    mean = m * z / total
    sigma = math.sqrt(total / 4.0 * (1.0 - (z / total) ** 2))
    if sigma == 0.0:
        raise ValidationError('z', "the midpoint law is degenerate at |z| = n")
    cdf = np.cumsum(law.probs)
    sf = np.cumsum(law.probs[::-1])[::-1]

    def g_below(y):
        # (G(y), 1 - G(y)) with G(y) = P(W - mean <= y)
        idx = int(np.searchsorted(law.support, mean + y + 1e-9, side='right'))
        below = float(cdf[idx - 1]) if idx > 0 else 0.0
        above = float(sf[idx]) if idx < len(sf) else 0.0
        return below, above

    fitted = 0.0
    rows = []
    saturated = []
    for x in x_range:
        width = 1.0 + x * x / total
        low, _ = g_below(x - 1)
        high, high_above = g_below(x + 1)
        if low <= 0.0 or high_above <= 0.0:
            saturated.append(int(x))
        need_low = (x - sigma * float(ndtri(low))) / width if low > 0.0 else math.nan
        need_high = (sigma * -float(ndtri(high_above)) - x) / width if high_above > 0.0 else math.nan
        for need in (need_low, need_high):
            if not math.isnan(need):
                fitted = max(fitted, need)
        rows.append({'x': int(x), 'G(x-1)': low, 'G(x+1)': high,
                     'c1_lower': need_low, 'c1_upper': need_high})
    return SandwichReport(total=total, z=z, c1=c1, fitted_c1=fitted,
                          holds=fitted <= c1, rows=rows, saturated=saturated)
