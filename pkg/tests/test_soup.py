"""
Unit tests for the shared Poisson field, the coupled soups and the
correspondence report.
"""

import math

import numpy as np
import pytest

from src.coupling.soup import (
    BROWNIAN,
    COUNT_MISMATCH,
    NMAX_TRUNCATION,
    WALK,
    WINDOW_EXCLUSION,
    PoissonField,
    Window,
    brownian_soup,
    build_field,
    document_to_soup,
    phi_N,
    psi_N,
    report_to_document,
    rw_soup,
    small_loop_mass,
    soup_to_document,
    theorem1_report,
    truncated_mass,
)
from src.samplers.brownian import q_n, q_tail
from src.utils.exceptions import FieldRangeError, ValidationError
from src.utils.schema import SoupDocument, dump_document, load_document


@pytest.fixture
def field():
    """Small field with enough intensity headroom to see loops."""
    return build_field(Window.square(-3, 3), n_max=12, lambda_max=20.0, seed=11)


class TestWindow:

    def test_cells(self):
        window = Window(0, 2, -1, 0)
        assert window.size == 6
        assert len(list(window.cells())) == 6
        assert (2, -1) in window
        assert (3, 0) not in window

    def test_empty_window_rejected(self):
        with pytest.raises(ValidationError):
            PoissonField(Window(1, 0, 0, 0), n_max=4)


class TestPoissonField:

    def test_deterministic(self):
        first = build_field(Window.square(-2, 2), 8, 5.0, seed=3)
        second = build_field(Window.square(-2, 2), 8, 5.0, seed=3)
        for cell in first.window.cells():
            assert np.array_equal(first.arrivals(cell).times, second.arrivals(cell).times)
            assert np.array_equal(first.arrivals(cell).index, second.arrivals(cell).index)

    def test_pairs_are_rebuilt_identically(self, field):
        first = field.pair(6, (1, -2), 1)
        second = field.pair(6, (1, -2), 1)
        assert first is not second
        assert np.array_equal(first.walk_loop().points, second.walk_loop().points)
        assert np.array_equal(first.brownian_loop().points, second.brownian_loop().points)
        light = field.pair(6, (1, -2), 1, with_paths=False)
        assert light.coupled is None
        assert (light.offset, light.duration) == (first.offset, first.duration)
        held = {k: len(v) for k, v in vars(field).items() if isinstance(v, dict)}
        for m in range(1, 40):
            field.pair(3, (0, 0), m)
        assert {k: len(v) for k, v in vars(field).items() if isinstance(v, dict)} == held

    def test_generation_order_is_irrelevant(self):
        first = build_field(Window.square(-2, 2), 8, 5.0, seed=3)
        second = build_field(Window.square(-2, 2), 8, 5.0, seed=3)
        cells = list(first.window.cells())
        forward = [first.times(4, c).tolist() for c in cells]
        backward = [second.times(4, c).tolist() for c in reversed(cells)][::-1]
        assert forward == backward

    def test_times_strictly_increase(self, field):
        for cell in field.window.cells():
            for n in range(1, field.n_max + 1):
                assert np.all(np.diff(field.times(n, cell)) > 0)

    def test_zero_intensity(self, field):
        assert all(field.count(n, (0, 0), 0.0) == 0 for n in range(1, 13))
        assert len(rw_soup(field, 0.0, 4)) == 0
        assert len(brownian_soup(field, 0.0, 4)) == 0

    def test_counts_nondecreasing(self, field):
        for cell in field.window.cells():
            for n in (1, 2, 5):
                counts = [field.count(n, cell, lam) for lam in (1.0, 5.0, 10.0, 20.0)]
                assert counts == sorted(counts)

    def test_counts_differ_only_between_thresholds(self, field):
        lam = 20.0
        for cell in field.window.cells():
            for n, count, walk_count in field.cell_counts(cell, lam):
                if count != walk_count:
                    low, high = sorted((field.q[n - 1] * lam, field.q_tilde[n - 1] * lam))
                    times = field.times(n, cell)
                    assert np.any((times > low) & (times <= high))

    def test_beyond_horizon(self, field):
        with pytest.raises(FieldRangeError):
            field.count(1, (0, 0), 21.0)
        with pytest.raises(ValidationError):
            field.count(1, (10, 10), 1.0)

    def test_mean_count(self):
        field_ = build_field(Window(0, 199, 0, 199), n_max=1, lambda_max=10.0, seed=5)
        counts, _ = field_.count_table(1, 10.0)
        assert counts.mean() == pytest.approx(10 * q_n(1), rel=0.02)

    def test_mismatch_bound_counts_selected_indices(self, field):
        assert field.mismatch_bound(0.0, 1.0, 4, 1.0) == 0.0
        assert field.mismatch_bound(5.0, 1.0, 4, 1.0) > 0.0


class TestSoups:

    def test_monotone_in_intensity(self, field):
        for build in (rw_soup, brownian_soup):
            small = build(field, 2.0, 4).indices()
            large = build(field, 15.0, 4).indices()
            assert small <= large

    def test_walk_loops(self, field):
        scale = 4
        soup = rw_soup(field, 15.0, scale)
        assert soup.kind == WALK
        assert len(soup) > 0
        for item in soup.loops:
            assert item.loop.duration == pytest.approx(item.n / scale ** 2)
            root = item.loop.root * scale
            assert root == pytest.approx(complex(*item.cell))

    def test_multiplicity_equals_count(self, field):
        lam = 15.0
        soup = brownian_soup(field, lam, 2)
        for cell in field.window.cells():
            for n, count, _ in field.cell_counts(cell, lam):
                present = [i for i in soup.loops if i.cell == cell and i.n == n]
                assert len(present) == count

    def test_brownian_loops(self, field):
        scale = 4
        soup = brownian_soup(field, 15.0, scale)
        assert soup.kind == BROWNIAN
        for item in soup.loops:
            assert item.coupled
            t = item.loop.duration * scale ** 2
            assert item.n - 3 / 8 <= t <= item.n + 5 / 8
            assert psi_N(item.loop.root, scale) == pytest.approx(complex(*item.cell) / scale)

    def test_partners_share_the_pair(self, field):
        walk = {i.index: i for i in rw_soup(field, 15.0, 1).loops}
        brownian = {i.index: i for i in brownian_soup(field, 15.0, 1).loops}
        shared = set(walk) & set(brownian)
        assert shared
        for index in shared:
            gap = abs(walk[index].loop.duration - brownian[index].loop.duration)
            assert gap <= 5 / 8 + 1e-12

    def test_small_loops(self, field):
        soup = brownian_soup(field, 5.0, 2, include_small=True, t_min=0.05)
        small = [i for i in soup.loops if not i.coupled]
        assert small
        for item in small:
            assert item.n == 0
            assert 0.05 / 4 <= item.loop.duration < (5 / 8) / 4
        assert soup.t_min == 0.05

    def test_small_loops_need_t_min(self, field):
        with pytest.raises(ValidationError):
            brownian_soup(field, 1.0, 2, include_small=True)

    def test_threads_do_not_change_output(self, field):
        serial = dump_document(soup_to_document(rw_soup(field, 10.0, 2, threads=1)))
        other = build_field(field.window, field.n_max, field.lambda_max, field.seed)
        threaded = dump_document(soup_to_document(rw_soup(other, 10.0, 2, threads=4)))
        assert serial == threaded

    def test_document_reload(self, field):
        soup = brownian_soup(field, 5.0, 2)
        text = dump_document(soup_to_document(soup))
        restored = document_to_soup(load_document(text, SoupDocument))
        assert restored.indices() == soup.indices()
        assert '"lambda": 5.0' in text
        assert '"scaleN": 2' in text


class TestSoupIntensity:
    """Mean loop counts of both soups against their Poisson intensities."""

    lam = 5.0
    scale = 2

    @pytest.fixture
    def fields(self):
        return [build_field(Window.square(-10, 10), n_max=4, lambda_max=self.lam, seed=s) for s in (1, 2, 3)]

    @staticmethod
    def assert_poisson_mean(counts, expected):
        # pooled Poisson counts, four standard errors
        assert abs(np.mean(counts) - expected) <= 4.0 * math.sqrt(expected / len(counts))

    def test_total_brownian_mass(self):
        assert q_n(np.arange(1, 200_001)).sum() == pytest.approx(4 / (5 * math.pi), rel=0.02)
        assert q_tail(1) == pytest.approx(4 / (5 * math.pi))

    def test_walk_soup_mean_count(self, fields):
        expected = self.lam * fields[0].window.size * fields[0].q_tilde.sum()
        counts = [len(rw_soup(f, self.lam, self.scale).loops) for f in fields]
        self.assert_poisson_mean(counts, expected)

    def test_brownian_soup_mean_count(self, fields):
        n_max = fields[0].n_max
        area = fields[0].window.size
        expected = self.lam * area * fields[0].q.sum()
        assert expected == pytest.approx(self.lam * small_loop_mass(5 / 8, n_max + 5 / 8, area))
        counts = [len(brownian_soup(f, self.lam, self.scale).loops) for f in fields]
        self.assert_poisson_mean(counts, expected)

    def test_scaling_preserves_intensity(self, fields):
        squared = self.scale ** 2
        n_max = fields[0].n_max
        area = fields[0].window.size
        before = small_loop_mass(5 / 8, n_max + 5 / 8, area)
        assert small_loop_mass(5 / 8 / squared, (n_max + 5 / 8) / squared, area / squared) == pytest.approx(before)

        soup = brownian_soup(fields[0], self.lam, self.scale)
        assert soup.loops
        for item in soup.loops:
            assert (item.n - 3 / 8) / squared <= item.loop.duration <= (item.n + 5 / 8) / squared
            offset = item.loop.root * self.scale - complex(*item.cell)
            assert abs(offset.real) <= 0.5 and abs(offset.imag) <= 0.5


class TestAuxiliary:

    @pytest.mark.parametrize('t, scale, expected', [
        (1.0, 1, 1.0),
        (0.25, 2, 0.25),
        (0.40, 2, 0.25),
        (0.41, 2, 0.5),
    ])
    def test_phi(self, t, scale, expected):
        assert phi_N(t, scale) == pytest.approx(expected)

    def test_phi_domain(self):
        with pytest.raises(ValidationError):
            phi_N(0.1, 1)

    def test_psi(self):
        assert psi_N(0.3 + 0.2j, 1) == 0
        assert psi_N(0.3 + 0.2j, 2) == pytest.approx(0.5 + 0j)
        assert psi_N(complex(3, -2) / 5, 5) == pytest.approx(complex(3, -2) / 5)

    def test_psi_ties_round_toward_zero(self):
        assert psi_N(0.5 - 1.5j, 1) == complex(0, -1)
        assert psi_N(-0.5 + 2.5j, 1) == complex(0, 2)

    def test_small_loop_mass(self):
        assert small_loop_mass(5 / 8) == pytest.approx(4 / (5 * math.pi))
        assert small_loop_mass(0.3, 0.3) == 0.0
        split = small_loop_mass(0.1, 0.4, 2.0) + small_loop_mass(0.4, 2.5, 2.0)
        assert split == pytest.approx(small_loop_mass(0.1, 2.5, 2.0), abs=1e-12)

    def test_truncated_mass(self):
        assert truncated_mass(100) == pytest.approx(1 / (2 * math.pi * (100 + 5 / 8)))


class TestCorrespondence:

    @pytest.fixture
    def report_field(self):
        return build_field(Window.square(-9, 9), n_max=48, lambda_max=5.0, seed=2)

    def test_zero_intensity(self, report_field):
        report = theorem1_report(report_field, 0.0, 8, 1.0, 1.0)
        assert report.bijective
        assert report.walk_selected == report.brownian_selected == 0
        assert report.max_duration_gap == 0.0

    def test_duration_gap_bound(self):
        scale = 4
        for seed in range(4):
            field_ = build_field(Window.square(-5, 5), n_max=24, lambda_max=5.0, seed=seed)
            report = theorem1_report(field_, 5.0, scale, 1.0, 1.0)
            for pair in report.matched:
                assert pair.duration_gap <= 5 / (8 * scale ** 2) + 1e-15
                assert pair.sup_distance >= 0.0
            for miss in report.unmatched:
                assert miss.side in (WALK, BROWNIAN)

    def test_unmatched_reasons(self):
        scale = 4
        found = set()
        for seed in range(6):
            field_ = build_field(Window.square(-5, 5), n_max=24, lambda_max=5.0, seed=seed)
            found |= {u.reason for u in theorem1_report(field_, 5.0, scale, 1.0, 1.0).unmatched}
        assert found <= {COUNT_MISMATCH, 'root snapping'}

    def test_window_exclusion(self):
        field_ = build_field(Window.square(-2, 2), n_max=24, lambda_max=5.0, seed=1)
        report = theorem1_report(field_, 1.0, 4, 1.0, 1.0)
        assert report.excluded_cells > 0
        assert WINDOW_EXCLUSION in report.failure_causes

    def test_index_truncation(self, report_field):
        report = theorem1_report(report_field, 1.0, 8, 1.0, 1.9)
        assert NMAX_TRUNCATION in report.failure_causes
        assert report.truncated_expected > 0

    @pytest.mark.parametrize('theta, r', [(0.5, 1.0), (2.0, 1.0), (1.0, 0.5)])
    def test_parameter_ranges(self, report_field, theta, r):
        with pytest.raises(ValidationError):
            theorem1_report(report_field, 1.0, 8, r, theta)

    def test_report_document(self, report_field):
        document = report_to_document(theorem1_report(report_field, 1.0, 8, 1.0, 1.0))
        text = dump_document(document)
        assert '"bijective"' in text
        assert document.scaleN == 8
