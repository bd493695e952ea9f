"""
Unit tests for domains, soup restriction and the boundary Monte Carlo studies.
"""

import math

import numpy as np
import pytest

from src.analyzers.domain import (
    Domain,
    LayerEstimate,
    beurling_mc,
    boundary_layer_measure,
    fit_layer_constant,
    fit_loglog_slope,
    gambler_ruin_check,
    restrict_soup,
    slit_disk,
    uniform_points,
)
from src.coupling.soup import BROWNIAN, SoupLoop, SoupRealization, Window
from src.samplers.brownian import ContinuousLoop
from src.utils.exceptions import ValidationError


def circle_loop(center: complex, radius: float, samples: int = 33) -> ContinuousLoop:
    times = np.linspace(0.0, 1.0, samples)
    points = center + radius * np.exp(2j * np.pi * times)
    return ContinuousLoop(root=points[0], duration=1.0, times=times, points=points)


def realization(*loops: ContinuousLoop) -> SoupRealization:
    items = [SoupLoop(1, (0, 0), m, loop) for m, loop in enumerate(loops, start=1)]
    return SoupRealization(kind=BROWNIAN, lam=1.0, scale=1, loops=items,
                           window=Window.square(0, 0), n_max=1, lambda_max=1.0, seed=0)


class TestDomain:

    def test_disk(self):
        disk = Domain.disk()
        assert disk.contains([0.5, 0.99j]).tolist() == [True, True]
        assert not disk.contains(1.0)
        assert disk.area == pytest.approx(math.pi)
        assert disk.boundary_distance(0.25) == pytest.approx(0.75)

    @pytest.mark.parametrize('center, radius', [(0.9, 0.5), (0j, 1.5), (0j, 0.0)])
    def test_invalid_disks(self, center, radius):
        with pytest.raises(ValidationError):
            Domain.disk(center, radius)

    def test_polygon_must_contain_origin(self):
        with pytest.raises(ValidationError):
            Domain.polygon([[0.1, 0.1], [0.5, 0.1], [0.5, 0.5]])

    def test_square(self):
        square = Domain.polygon([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
        assert square.area == pytest.approx(1.0)
        assert square.contains(0.2 + 0.2j)
        assert not square.contains(0.6)
        assert square.boundary_distance(0j) == pytest.approx(0.5)

    def test_slit_disk(self):
        slit = slit_disk()
        assert slit.contains(0j)
        assert not slit.contains(0.8 + 0j)
        assert slit.contains(0.8 + 0.1j) and slit.contains(0.8 - 0.1j)
        assert not slit.contains_polyline(np.array([0.8 + 0.1j, 0.8 - 0.1j]))
        assert slit.contains_polyline(np.array([0.1 + 0.1j, 0.1 - 0.1j]))

    def test_uniform_points(self, rng):
        points = uniform_points(slit_disk(), 500, rng)
        assert len(points) == 500
        assert np.all(slit_disk().contains(points))


class TestRestriction:

    def test_loop_outside_removed(self):
        soup = realization(circle_loop(0j, 0.3), circle_loop(5 + 0j, 0.3))
        kept = restrict_soup(soup, Domain.disk())
        assert len(kept) == 1
        assert kept.loops[0].m == 1

    def test_empty(self):
        assert len(restrict_soup(realization(), Domain.disk())) == 0

    def test_every_sample_inside(self, rng):
        loops = [circle_loop(complex(*rng.uniform(-0.8, 0.8, 2)), rng.uniform(0.05, 0.5)) for _ in range(40)]
        disk = Domain.disk()
        for item in restrict_soup(realization(*loops), disk).loops:
            assert np.all(disk.contains(item.loop.points))

    def test_idempotent_and_monotone(self, rng):
        loops = [circle_loop(complex(*rng.uniform(-0.8, 0.8, 2)), rng.uniform(0.05, 0.5)) for _ in range(40)]
        soup = realization(*loops)
        outer, inner = Domain.disk(), Domain.disk(radius=0.5)
        once = restrict_soup(soup, outer)
        assert restrict_soup(once, outer).indices() == once.indices()
        assert restrict_soup(once, inner).indices() == restrict_soup(soup, inner).indices()
        assert restrict_soup(soup, inner).indices() <= once.indices()


class TestBoundaryLayer:

    def test_zero_width(self, rng):
        estimate = boundary_layer_measure(Domain.disk(), 0.0, 1.0, 16.0, 1000, rng)
        assert estimate.estimate == 0.0

    def test_rejects_wide_layer(self, rng):
        with pytest.raises(ValidationError):
            boundary_layer_measure(Domain.disk(), 0.5, 0.25, 16.0, 100, rng)

    def test_wider_layer_has_more_mass(self, rng):
        thin = boundary_layer_measure(Domain.disk(), 0.02, 1.0, 16.0, 40000, rng, depth=6)
        wide = boundary_layer_measure(Domain.disk(), 0.08, 1.0, 16.0, 40000, rng, depth=6)
        assert 0 < thin.estimate < wide.estimate
        assert thin.neglected_mass == pytest.approx(math.pi / (2 * math.pi * 16.0))

    def test_fitted_constant_dominates(self):
        estimates = [LayerEstimate(eps, 1.0, 16.0, 100, value, 0.0, eps, 0.0)
                     for eps, value in ((0.02, 0.01), (0.04, 0.03), (0.08, 0.05))]
        c = fit_layer_constant(estimates)
        assert c == pytest.approx(0.75)
        assert all(e.estimate <= e.bound(c) + 1e-15 for e in estimates)

    def test_loglog_slope(self):
        fit = fit_loglog_slope([1.0, 2.0, 4.0], [3.0, 12.0, 48.0])
        assert fit.slope == pytest.approx(2.0)
        assert math.exp(fit.intercept) == pytest.approx(3.0)


class TestBeurling:

    def test_no_obstacle(self, rng):
        assert beurling_mc(-0.1, 0.1, 1.0, 100, rng, obstacle=False).estimate == 1.0

    def test_short_time(self, rng):
        assert beurling_mc(-0.1, 0.1, 1e-4, 1000, rng, steps=16).estimate == 1.0

    def test_decays_in_time(self, rng):
        early = beurling_mc(-0.1, 0.1, 1.0, 4000, rng, steps=256)
        late = beurling_mc(-0.1, 0.1, 4.0, 4000, rng, steps=256)
        assert 0 < late.estimate < 1
        assert late.estimate <= early.estimate + 3 * math.hypot(early.stderr, late.stderr)

    def test_start_outside_radius(self, rng):
        with pytest.raises(ValidationError):
            beurling_mc(-0.5, 0.1, 1.0, 10, rng)


class TestGamblerRuin:

    def test_closed_form(self, rng):
        check = gambler_ruin_check(0.1, 1.0, 100000, rng)
        assert check.exact == pytest.approx(0.07966, abs=1e-5)
        assert abs(check.estimate - check.exact) <= 4 * check.stderr

    def test_far_start(self, rng):
        check = gambler_ruin_check(10.0, 1.0, 1000, rng)
        assert check.estimate == 1.0
        assert check.exact == pytest.approx(1.0)

    @pytest.mark.parametrize('eps, t', [(0.05, 1.0), (0.1, 0.5), (0.2, 1.0)])
    def test_leading_order_bound(self, eps, t):
        check = gambler_ruin_check(eps, t, 10, np.random.default_rng(0))
        assert check.exact <= 0.8 * eps / math.sqrt(t)
