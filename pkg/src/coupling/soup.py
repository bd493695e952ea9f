"""
Coupled random walk and Brownian loop soups.

Both soups are driven by one field of unit-rate Poisson processes, one per
(n, z). A walk loop of index (n, z, m) exists at intensity lambda when the
m-th arrival is below q~_n lambda, its Brownian partner when it is below
q_n lambda. Partners share the coupled bridge pair of module kmt, keyed by
(seed, n, z, m), so neither soup stores anything the other needs.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from ..samplers.brownian import (
    ContinuousLoop,
    loop_from_bridge,
    q_n,
    q_tail,
    intensity_integral,
    sample_bridge,
    sample_duration,
    scale_brownian,
    scale_walk,
    sup_distance_rescaled,
)
from ..samplers.lattice_walk import qtilde_array
from ..utils import rng as streams
from ..utils.config import Config
from ..utils.exceptions import FieldRangeError, ValidationError
from ..utils.schema import LoopRecord, MatchedRecord, ReportDocument, SoupDocument, UnmatchedRecord
from .kmt import Coupled2D, couple_2d

logger = logging.getLogger(__name__)

WALK = 'walk'
BROWNIAN = 'brownian'

# Grid depth of the uncoupled small-loop bridges.
SMALL_LOOP_DEPTH = 6


class Window(NamedTuple):
    """Inclusive integer box of roots."""
    x_min: int
    x_max: int
    y_min: int
    y_max: int

    @classmethod
    def square(cls, low: int, high: int) -> 'Window':
        return cls(low, high, low, high)

    def cells(self) -> Iterable[Tuple[int, int]]:
        for x in range(self.x_min, self.x_max + 1):
            for y in range(self.y_min, self.y_max + 1):
                yield x, y

    def __contains__(self, cell) -> bool:
        x, y = cell
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    @property
    def size(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)


class CellArrivals(NamedTuple):
    index: np.ndarray
    times: np.ndarray


@dataclass(frozen=True)
class LoopPair:
    """Everything attached to index (n, z, m): the coupled bridge pair, root offset and duration."""

    n: int
    cell: Tuple[int, int]
    m: int
    offset: complex
    duration: float
    coupled: Optional[Coupled2D] = field(default=None, repr=False)

    @property
    def root(self) -> complex:
        return complex(self.cell[0], self.cell[1]) + self.offset

    def walk_loop(self) -> ContinuousLoop:
        positions = np.asarray(self.coupled.walk.positions) + np.array(self.cell)
        return ContinuousLoop.from_lattice(positions)

    def brownian_loop(self) -> ContinuousLoop:
        return loop_from_bridge(self.coupled.bridge, self.duration, self.root)


class PoissonField:
    """
    Unit-rate arrival times for every (n, z) with z in the window and n <= n_max.

    Arrivals of cell z on [0, lambda_max * max(q_n, q~_n)] are generated on
    first use from the keyed stream of that cell, as one Poisson batch spread
    over the indices in proportion to their horizons.
    """

    def __init__(self, window: Window, n_max: int, lambda_max: float = None, seed: int = None):
        if window.x_min > window.x_max or window.y_min > window.y_max:
            raise ValidationError('window', f"empty window {tuple(window)}")
        if int(n_max) != n_max or n_max < 1:
            raise ValidationError('n_max', f"must be a positive integer, got {n_max!r}")
        self.window = Window(*map(int, window))
        self.n_max = int(n_max)
        self.lambda_max = Config.LAMBDA_MAX if lambda_max is None else float(lambda_max)
        if not self.lambda_max > 0:
            raise ValidationError('lambda_max', f"must be positive, got {lambda_max}")
        self.seed = Config.validate_seed(Config.DEFAULT_SEED if seed is None else seed)

        index = np.arange(1, self.n_max + 1)
        self.q = q_n(index)
        self.q_tilde = qtilde_array(self.n_max)
        self.horizons = self.lambda_max * np.maximum(self.q, self.q_tilde)
        self._cells: Dict[Tuple[int, int], CellArrivals] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return (f"PoissonField(window={tuple(self.window)}, n_max={self.n_max}, "
                f"lambda_max={self.lambda_max}, seed={self.seed})")

    def arrivals(self, cell: Tuple[int, int]) -> CellArrivals:
        """Arrivals of a cell, sorted by index n and then by time."""
        cell = (int(cell[0]), int(cell[1]))
        if cell not in self.window:
            raise ValidationError('cell', f"{cell} lies outside the window {tuple(self.window)}")
        cached = self._cells.get(cell)
        if cached is not None:
            return cached
        generator = streams.keyed_generator(self.seed, streams.FIELD_CELL, *cell)
        total = self.horizons.sum()
        count = int(generator.poisson(total))
        labels = generator.choice(self.n_max, size=count, p=self.horizons / total) + 1
        times = generator.random(count) * self.horizons[labels - 1]
        order = np.lexsort((times, labels))
        found = CellArrivals(labels[order], times[order])
        found.index.setflags(write=False)
        found.times.setflags(write=False)
        with self._lock:
            self._cells.setdefault(cell, found)
        return self._cells[cell]

    def times(self, n: int, cell: Tuple[int, int]) -> np.ndarray:
        """Sorted arrival times of the process N^(n, z)."""
        self._check_index(n)
        found = self.arrivals(cell)
        lo, hi = np.searchsorted(found.index, [n, n + 1], side='left')
        return found.times[lo:hi]

    def _check_lambda(self, lam: float) -> None:
        if lam < 0:
            raise ValidationError('lambda', f"must be >= 0, got {lam}")
        if lam > self.lambda_max:
            raise FieldRangeError(lam, self.lambda_max)

    def _check_index(self, n: int) -> None:
        if not 1 <= n <= self.n_max:
            raise ValidationError('n', f"must lie in [1, {self.n_max}], got {n}")

    def count(self, n: int, cell: Tuple[int, int], lam: float) -> int:
        """N(n, z; lambda): Brownian loops of index (n, z) at intensity lambda."""
        self._check_lambda(lam)
        return int(np.searchsorted(self.times(n, cell), self.q[n - 1] * lam, side='right'))

    def walk_count(self, n: int, cell: Tuple[int, int], lam: float) -> int:
        """N~(n, z; lambda): walk loops of index (n, z) at intensity lambda."""
        self._check_lambda(lam)
        return int(np.searchsorted(self.times(n, cell), self.q_tilde[n - 1] * lam, side='right'))

    def cell_counts(self, cell: Tuple[int, int], lam: float) -> List[Tuple[int, int, int]]:
        """(n, N, N~) for every index of the cell with at least one arrival."""
        self._check_lambda(lam)
        found = self.arrivals(cell)
        n_values, starts = np.unique(found.index, return_index=True)
        ends = np.append(starts[1:], len(found.index))
        counts = []
        for n, lo, hi in zip(n_values.tolist(), starts, ends):
            times = found.times[lo:hi]
            counts.append((n,
                           int(np.searchsorted(times, self.q[n - 1] * lam, side='right')),
                           int(np.searchsorted(times, self.q_tilde[n - 1] * lam, side='right'))))
        return counts

    def count_table(self, n: int, lam: float) -> Tuple[np.ndarray, np.ndarray]:
        """(N, N~) for index n over every cell of the window, in window order."""
        counts = np.array([(self.count(n, cell, lam), self.walk_count(n, cell, lam))
                           for cell in self.window.cells()], dtype=np.int64).reshape(-1, 2)
        return counts[:, 0], counts[:, 1]

    def pair(self, n: int, cell: Tuple[int, int], m: int, with_paths: bool = True) -> LoopPair:
        """
        The loop pair of index (n, z, m), drawn from its own keyed stream.

        Offset and duration are drawn first, so they are available without
        building the coupling. Pairs are not cached: the same index always
        rebuilds the same pair.
        """
        key = (int(n), int(cell[0]), int(cell[1]), int(m))
        generator = streams.keyed_generator(self.seed, streams.LOOP_PAIR, *key)
        dx, dy = generator.uniform(-0.5, 0.5, size=2)
        duration = sample_duration(key[0], generator)
        coupled = couple_2d(key[0], generator) if with_paths else None
        return LoopPair(n=key[0], cell=key[1:3], m=key[3], offset=complex(dx, dy),
                        duration=duration, coupled=coupled)

    def mismatch_bound(self, lam: float, r: float, scale: int, theta: float) -> float:
        """
        Expected number of selected indices where N and N~ disagree:
        sum over |z| < rN and N^theta < n <= n_max of lambda |q_n - q~_n|.
        """
        self._check_lambda(lam)
        threshold = scale ** theta
        n = np.arange(1, self.n_max + 1)
        gaps = np.abs(self.q - self.q_tilde)[n > threshold].sum()
        return float(lam * gaps * len(lattice_disk(r * scale)))


def lattice_disk(radius: float) -> List[Tuple[int, int]]:
    """Lattice points z with |z| < radius."""
    bound = int(math.ceil(radius))
    return [(x, y) for x in range(-bound, bound + 1) for y in range(-bound, bound + 1)
            if x * x + y * y < radius * radius]


def build_field(window: Window, n_max: int, lambda_max: float = None, seed: int = None) -> PoissonField:
    return PoissonField(window, n_max, lambda_max, seed)


# ---------------------------------------------------------------------------
# Realizations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SoupLoop:
    """A loop of a realization with its index; small loops have n = 0."""

    n: int
    cell: Tuple[int, int]
    m: int
    loop: ContinuousLoop = field(repr=False)
    coupled: bool = True

    @property
    def index(self) -> Tuple[int, int, int, int]:
        return self.n, self.cell[0], self.cell[1], self.m


@dataclass
class SoupRealization:
    kind: str
    lam: float
    scale: int
    loops: List[SoupLoop]
    window: Window
    n_max: int
    lambda_max: float
    seed: int
    t_min: Optional[float] = None

    def indices(self, coupled_only: bool = True) -> set:
        return {loop.index for loop in self.loops if loop.coupled or not coupled_only}

    def __len__(self) -> int:
        return len(self.loops)


def _indices(field_: PoissonField, lam: float, kind: str) -> List[Tuple[int, Tuple[int, int], int]]:
    found = []
    for cell in field_.window.cells():
        for n, brownian_count, walk_count in field_.cell_counts(cell, lam):
            count = brownian_count if kind == BROWNIAN else walk_count
            found.extend((n, cell, m) for m in range(1, count + 1))
    return sorted(found)


def _map(function, items: list, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(function, items))


def rw_soup(field_: PoissonField, lam: float, scale: int, threads: int = None) -> SoupRealization:
    """
    Scaled random walk loop soup at intensity lambda.

    Index (n, z, m) is present for m <= N~(n, z; lambda); its loop is the
    walk half of the coupled pair, rooted at z, under Phi~_N.
    """
    field_._check_lambda(lam)
    threads = Config.validate_threads(Config.THREADS if threads is None else threads)

    def build(index):
        n, cell, m = index
        pair = field_.pair(n, cell, m)
        return SoupLoop(n, cell, m, scale_walk(pair.walk_loop(), scale))

    loops = _map(build, _indices(field_, lam, WALK), threads)
    logger.info("walk soup: %d loops at lambda=%s, N=%s", len(loops), lam, scale)
    return SoupRealization(kind=WALK, lam=float(lam), scale=int(scale), loops=loops,
                           window=field_.window, n_max=field_.n_max,
                           lambda_max=field_.lambda_max, seed=field_.seed)


def small_loops(field_: PoissonField, lam: float, t_min: float) -> List[SoupLoop]:
    """
    Uncoupled loops with duration in [t_min, 5/8), one unit-rate arrival
    stream per cell thinned at lambda times the cell's mass.
    """
    upper = 5.0 / 8.0
    if not 0 < t_min < upper:
        raise ValidationError('t_min', f"must lie in (0, 5/8), got {t_min}")
    mass = small_loop_mass(t_min, upper, 1.0)
    loops = []
    for cell in field_.window.cells():
        generator = streams.keyed_generator(field_.seed, streams.SMALL_LOOPS, *cell)
        horizon = field_.lambda_max * mass
        count = int(generator.poisson(horizon))
        arrivals = np.sort(generator.random(count) * horizon)
        for m, arrival in enumerate(arrivals, start=1):
            # fixed draws per arrival: the kept prefix does not depend on lam
            dx, dy = generator.uniform(-0.5, 0.5, size=2)
            u = generator.random()
            bridge = sample_bridge(SMALL_LOOP_DEPTH, 2, generator)
            if arrival > lam * mass:
                break
            duration = 1.0 / (1.0 / t_min - u * (1.0 / t_min - 1.0 / upper))
            root = complex(cell[0] + dx, cell[1] + dy)
            loops.append(SoupLoop(0, cell, m, loop_from_bridge(bridge, duration, root), coupled=False))
    return loops


def brownian_soup(field_: PoissonField, lam: float, scale: int, include_small: bool = False,
                  t_min: float = None, threads: int = None) -> SoupRealization:
    """
    Scaled Brownian loop soup at intensity lambda.

    Index (n, z, m) is present for m <= N(n, z; lambda); its loop is the
    bridge half of the coupled pair with duration T in [n - 3/8, n + 5/8],
    rooted at z + Y, under Phi_N. With ``include_small`` an independent,
    uncoupled layer of loops with duration in [t_min, 5/8) is added.
    """
    field_._check_lambda(lam)
    threads = Config.validate_threads(Config.THREADS if threads is None else threads)
    if include_small and (t_min is None or t_min <= 0):
        raise ValidationError('t_min', "a positive t_min is required with small loops")

    def build(index):
        n, cell, m = index
        pair = field_.pair(n, cell, m)
        return SoupLoop(n, cell, m, scale_brownian(pair.brownian_loop(), scale))

    loops = _map(build, _indices(field_, lam, BROWNIAN), threads)
    if include_small:
        small = [SoupLoop(s.n, s.cell, s.m, scale_brownian(s.loop, scale), coupled=False)
                 for s in small_loops(field_, lam, t_min)]
        loops = small + loops
    logger.info("brownian soup: %d loops at lambda=%s, N=%s", len(loops), lam, scale)
    return SoupRealization(kind=BROWNIAN, lam=float(lam), scale=int(scale), loops=loops,
                           window=field_.window, n_max=field_.n_max,
                           lambda_max=field_.lambda_max, seed=field_.seed,
                           t_min=t_min if include_small else None)


# ---------------------------------------------------------------------------
# Auxiliary functions and masses
# ---------------------------------------------------------------------------

def phi_N(t: float, scale: int) -> float:
    """Duration bucket k/N^2 with k/N^2 - 3/(8N^2) <= t < k/N^2 + 5/(8N^2)."""
    squared = scale * scale
    if t < 5.0 / (8.0 * squared):
        raise ValidationError('t', f"must be >= 5/(8N^2) = {5.0 / (8.0 * squared)}, got {t}")
    return math.floor(t * squared + 3.0 / 8.0) / squared


def _round_half_toward_zero(value: float) -> int:
    return int(math.copysign(math.ceil(abs(value) - 0.5), value))


def psi_N(z: complex, scale: int) -> complex:
    """Nearest point of Z^2 to N z, divided by N; ties round toward zero."""
    w = complex(z) * scale
    return complex(_round_half_toward_zero(w.real), _round_half_toward_zero(w.imag)) / scale


def small_loop_mass(t_min: float, t_max: float = math.inf, area: float = 1.0) -> float:
    """mu-mass of loops rooted in a region of the given area with duration in [t_min, t_max]."""
    if not 0 < t_min <= t_max:
        raise ValidationError('t_min', f"need 0 < t_min <= t_max, got {t_min}, {t_max}")
    return area * intensity_integral(t_min, t_max)


def truncated_mass(n_max: int) -> float:
    """Per-cell intensity of coupled Brownian loops with index above n_max."""
    return q_tail(n_max + 1)


# ---------------------------------------------------------------------------
# Correspondence report
# ---------------------------------------------------------------------------

COUNT_MISMATCH = 'count mismatch'
ROOT_SNAP = 'root snapping'
WINDOW_EXCLUSION = 'window exclusion'
NMAX_TRUNCATION = 'n_max truncation'


@dataclass(frozen=True)
class MatchedPair:
    n: int
    cell: Tuple[int, int]
    m: int
    duration_gap: float
    sup_distance: float


@dataclass(frozen=True)
class Unmatched:
    side: str
    n: int
    cell: Tuple[int, int]
    m: int
    reason: str


@dataclass
class CouplingReport:
    lam: float
    scale: int
    r: float
    theta: float
    seed: int
    walk_selected: int
    brownian_selected: int
    matched: List[MatchedPair]
    unmatched: List[Unmatched]
    excluded_cells: int
    truncated_expected: float
    mismatch_bound: float
    n_max: int = 0

    @property
    def bijective(self) -> bool:
        return not self.unmatched

    @property
    def max_duration_gap(self) -> float:
        return max((p.duration_gap for p in self.matched), default=0.0)

    @property
    def max_sup_distance(self) -> float:
        return max((p.sup_distance for p in self.matched), default=0.0)

    @property
    def median_sup_distance(self) -> float:
        if not self.matched:
            return math.nan
        return float(np.median([p.sup_distance for p in self.matched]))

    @property
    def failure_causes(self) -> List[str]:
        causes = sorted({u.reason for u in self.unmatched})
        if self.excluded_cells:
            causes.append(WINDOW_EXCLUSION)
        if self.n_max <= self.scale ** self.theta:
            # no simulated index reaches the selected durations
            causes.append(NMAX_TRUNCATION)
        return causes

    def summary(self) -> dict:
        return {
            'seed': self.seed,
            'lambda': self.lam,
            'scale': self.scale,
            'r': self.r,
            'theta': self.theta,
            'walk_selected': self.walk_selected,
            'brownian_selected': self.brownian_selected,
            'matched': len(self.matched),
            'bijective': self.bijective,
            'max_duration_gap': self.max_duration_gap,
            'max_sup_distance': self.max_sup_distance,
            'median_sup_distance': self.median_sup_distance,
            'excluded_cells': self.excluded_cells,
            'n_max': self.n_max,
            'truncated_expected': self.truncated_expected,
            'mismatch_bound': self.mismatch_bound,
            'failure_causes': ';'.join(self.failure_causes),
        }


def theorem1_report(field_: PoissonField, lam: float, scale: int, r: float, theta: float,
                    threads: int = None) -> CouplingReport:
    """
    Pair the scaled soups by index and check the correspondence.

    Walk loops are selected when t > N^(theta-2) and |root| < r, Brownian
    loops when phi_N(t) > N^(theta-2) and |psi_N(root)| < r. Paths are only
    built for indices selected on both sides.

    Args:
        field_: Shared Poisson field
        lam: Intensity, at most the field's lambda_max
        scale: N
        r: Root radius, at least 1
        theta: Duration exponent in (2/3, 2)
        threads: Worker threads for the path computations

    Returns:
        CouplingReport with matched pairs, unmatched loops and the truncation bookkeeping
    """
    if not 2.0 / 3.0 < theta < 2.0:
        raise ValidationError('theta', f"must lie in (2/3, 2), got {theta}")
    if r < 1:
        raise ValidationError('r', f"must be >= 1, got {r}")
    if int(scale) != scale or scale < 1:
        raise ValidationError('N', f"scale must be a positive integer, got {scale!r}")
    field_._check_lambda(lam)
    threads = Config.validate_threads(Config.THREADS if threads is None else threads)
    threshold = scale ** (theta - 2.0)

    # roots snap back to z/N unless Y sits on the cell boundary, so one extra ring suffices
    candidates = [c for c in lattice_disk(r * scale + 1) if c in field_.window]
    excluded = sum(1 for c in lattice_disk(r * scale) if c not in field_.window)

    walk_side = set()
    brownian_side = set()
    for cell in candidates:
        walk_root = abs(complex(*cell)) / scale < r
        for n, brownian_count, walk_count in field_.cell_counts(cell, lam):
            if walk_root and n / scale ** 2 > threshold:
                walk_side.update((n, cell, m) for m in range(1, walk_count + 1))
            if (n + 1) / scale ** 2 <= threshold:
                continue
            for m in range(1, brownian_count + 1):
                pair = field_.pair(n, cell, m, with_paths=False)
                t = pair.duration / scale ** 2
                if phi_N(t, scale) > threshold and abs(psi_N(pair.root / scale, scale)) < r:
                    brownian_side.add((n, cell, m))

    unmatched = []
    for side, own, other in ((WALK, walk_side, brownian_side), (BROWNIAN, brownian_side, walk_side)):
        for n, cell, m in sorted(own - other):
            counts_agree = field_.walk_count(n, cell, lam) == field_.count(n, cell, lam)
            unmatched.append(Unmatched(side, n, cell, m, ROOT_SNAP if counts_agree else COUNT_MISMATCH))

    def measure(index):
        n, cell, m = index
        pair = field_.pair(n, cell, m)
        walk = scale_walk(pair.walk_loop(), scale)
        brownian = scale_brownian(pair.brownian_loop(), scale)
        return MatchedPair(n, cell, m, abs(brownian.duration - walk.duration),
                           sup_distance_rescaled(brownian, walk))

    matched = _map(measure, sorted(walk_side & brownian_side), threads)
    # neglected indices n > n_max over the selection disk
    truncated = lam * len(lattice_disk(r * scale)) * truncated_mass(field_.n_max)
    report = CouplingReport(
        lam=float(lam), scale=int(scale), r=float(r), theta=float(theta), seed=field_.seed,
        walk_selected=len(walk_side), brownian_selected=len(brownian_side),
        matched=matched, unmatched=unmatched, excluded_cells=excluded,
        truncated_expected=truncated,
        mismatch_bound=field_.mismatch_bound(lam, r, scale, theta),
        n_max=field_.n_max,
    )
    if not report.bijective:
        logger.info("seed %d, N=%d: %d unmatched loops (%s)", field_.seed, scale,
                    len(unmatched), ', '.join(report.failure_causes))
    return report


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

def soup_to_document(realization: SoupRealization) -> SoupDocument:
    """Schema view of a realization, loops in index order."""
    records = []
    for item in realization.loops:
        loop = item.loop
        points = np.column_stack([loop.times, loop.points.real, loop.points.imag])
        records.append(LoopRecord(n=item.n, z=item.cell, m=item.m, duration=loop.duration,
                                  points=[tuple(row) for row in points.tolist()],
                                  coupled=item.coupled))
    return SoupDocument(kind=realization.kind, lam=realization.lam, scaleN=realization.scale,
                        seed=realization.seed, window=tuple(realization.window),
                        n_max=realization.n_max, lambda_max=realization.lambda_max,
                        t_min=realization.t_min, loops=records)


def document_to_soup(document: SoupDocument) -> SoupRealization:
    loops = []
    for record in document.loops:
        points = np.asarray(record.points, dtype=float)
        curve = points[:, 1] + 1j * points[:, 2]
        loop = ContinuousLoop(root=curve[0], duration=record.duration, times=points[:, 0], points=curve)
        loops.append(SoupLoop(record.n, tuple(record.z), record.m, loop, record.coupled))
    return SoupRealization(kind=document.kind, lam=document.lam, scale=document.scaleN, loops=loops,
                           window=Window(*document.window), n_max=document.n_max,
                           lambda_max=document.lambda_max, seed=document.seed, t_min=document.t_min)


def report_to_document(report: CouplingReport) -> ReportDocument:
    return ReportDocument(
        lam=report.lam, scaleN=report.scale, r=report.r, theta=report.theta, seed=report.seed,
        n_max=report.n_max, bijective=report.bijective, failure_causes=report.failure_causes,
        walk_selected=report.walk_selected, brownian_selected=report.brownian_selected,
        max_duration_gap=report.max_duration_gap, max_sup_distance=report.max_sup_distance,
        excluded_cells=report.excluded_cells, truncated_expected=report.truncated_expected,
        mismatch_bound=report.mismatch_bound,
        matched=[MatchedRecord(n=p.n, z=p.cell, m=p.m, duration_gap=p.duration_gap,
                               sup_distance=p.sup_distance) for p in report.matched],
        unmatched=[UnmatchedRecord(side=u.side, n=u.n, z=u.cell, m=u.m, reason=u.reason)
                   for u in report.unmatched],
    )
