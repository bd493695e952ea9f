"""
Unit tests for the quantile coupling and the dyadic walk/bridge coupling.
"""

import math

import numpy as np
import pytest
from scipy import stats

from src.coupling.kmt import (
    CouplingNode,
    DyadicCoupling,
    QuantileSpec,
    build_coupling,
    cdf_sandwich_check,
    couple_2d,
    delta,
    delta_decomposition,
    midpoint_normal_params,
    quantile_couple,
    realize_bridge,
    realize_walk,
)
from src.samplers.brownian import BridgePath, bridge_with_endpoints
from src.samplers.lattice_walk import conditioned_midpoint_pmf
from src.utils.exceptions import ValidationError


@pytest.fixture
def rademacher():
    return QuantileSpec(cdf=lambda x: float(stats.norm.cdf(x)), support=[-1, 1], masses=[0.5, 0.5])


@pytest.fixture
def flat_coupling():
    """4-coupling with zero normal and zero leaf pieces."""
    piece = BridgePath(times=[0.0, 0.5, 1.0], values=[0.0, 0.0, 0.0])
    leaf = CouplingNode(size=2, uniform=0.3, piece=piece)
    return DyadicCoupling(4, CouplingNode(size=4, normal=0.0, left=leaf, right=leaf))


class TestQuantileCoupling:

    def test_median_split(self, rademacher):
        assert quantile_couple(-0.3, rademacher) == -1
        assert quantile_couple(0.1, rademacher) == 1

    def test_midpoint_law(self):
        spec = QuantileSpec.normal(0.0, 1.0, conditioned_midpoint_pmf(4, 0, 2))
        assert quantile_couple(-1.2, spec) == -2
        assert quantile_couple(0.0, spec) == 0
        assert quantile_couple(1.2, spec) == 2

    def test_monotone(self, rademacher, rng):
        spec = QuantileSpec.normal(0.0, 4.0, conditioned_midpoint_pmf(16, 2, 8))
        draws = np.sort(rng.normal(0.0, 3.0, 500))
        for s in (rademacher, spec):
            mapped = [quantile_couple(x, s) for x in draws]
            assert np.all(np.diff(mapped) >= 0)

    def test_extreme_levels(self):
        spec = QuantileSpec.normal(0.0, 1.0, conditioned_midpoint_pmf(4, 0, 2))
        assert quantile_couple(40.0, spec) == 2
        assert quantile_couple(-40.0, spec) == -2

    def test_rejects_bad_masses(self):
        with pytest.raises(ValidationError):
            QuantileSpec(cdf=lambda x: 0.5, support=[0, 1], masses=[0.2, 0.2])

    def test_rejects_decreasing_cdf(self):
        with pytest.raises(ValidationError):
            QuantileSpec(cdf=lambda x: float(stats.norm.sf(x)), support=[0, 1], masses=[0.5, 0.5])


class TestNormalParams:

    @pytest.mark.parametrize('n, m, z, expected', [
        (4, 2, 0, (0.0, 1.0)),
        (4, 2, 4, (2.0, 1.0)),
        (5, 2, 1, (0.4, 1.2)),
    ])
    def test_values(self, n, m, z, expected):
        assert tuple(midpoint_normal_params(n, m, z)) == pytest.approx(expected)

    def test_rejects_non_midpoint(self):
        with pytest.raises(ValidationError):
            midpoint_normal_params(8, 2, 0)


class TestCouplingTree:

    def test_single_leaf(self, rng):
        coupling = build_coupling(1, rng)
        assert coupling.root.is_leaf
        assert coupling.left is None
        assert coupling.depth == 0

    def test_power_of_two(self, rng):
        coupling = build_coupling(8, rng)
        assert coupling.depth == 2
        assert coupling.leaf_sizes() == [2, 2, 2, 2]

    def test_odd_split(self, rng):
        coupling = build_coupling(6, rng)
        assert (coupling.left.n, coupling.right.n) == (3, 3)
        assert coupling.leaf_sizes() == [1, 2, 1, 2]

    def test_deterministic_given_stream(self):
        first = build_coupling(32, np.random.default_rng(5))
        second = build_coupling(32, np.random.default_rng(5))
        assert np.array_equal(first.bridge.values, second.bridge.values)
        assert np.array_equal(realize_walk(first, 4).positions, realize_walk(second, 4).positions)

    def test_rejects_size_zero(self, rng):
        with pytest.raises(ValidationError):
            build_coupling(0, rng)


class TestRealizations:

    def test_flat_tree(self, flat_coupling):
        bridge = realize_bridge(flat_coupling)
        assert bridge.times.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert np.all(bridge.values == 0)
        assert realize_walk(flat_coupling, 0).positions.tolist() == [0, -1, 0, -1, 0]
        assert delta(flat_coupling, 0) == pytest.approx(1.0)

    def test_deterministic_walk(self, rng):
        assert realize_walk(build_coupling(2, rng), 2).positions.tolist() == [0, 1, 2]

    def test_bridge_is_standard(self, rng):
        for n in (1, 2, 7, 16):
            assert realize_bridge(build_coupling(n, rng)).is_standard

    def test_bridge_does_not_depend_on_endpoint(self, rng):
        coupling = build_coupling(16, rng)
        before = realize_bridge(coupling).values.copy()
        for z in (-4, 0, 6):
            realize_walk(coupling, z)
        assert np.array_equal(realize_bridge(coupling).values, before)

    def test_leaf_bridge_variance(self, rng):
        values = np.array([build_coupling(2, rng).bridge.at(0.5) for _ in range(20000)])
        assert np.var(values) == pytest.approx(0.25, abs=0.015)

    def test_walk_midpoint_frequency(self, rng):
        samples = 20000
        zeros = sum(realize_walk(build_coupling(4, rng), 0).positions[2] == 0 for _ in range(samples))
        assert zeros / samples == pytest.approx(2 / 3, abs=0.015)

    def test_dyadic_bridge_covariance(self, rng):
        paths = np.array([build_coupling(16, rng).bridge.at([0.25, 0.5]) for _ in range(20000)])
        assert np.mean(paths[:, 0] * paths[:, 1]) == pytest.approx(1 / 8, abs=0.01)

    def test_midpoint_monotone_in_endpoint(self, rng):
        for _ in range(20):
            coupling = build_coupling(32, rng)
            midpoints = [realize_walk(coupling, z).positions[16] for z in range(-32, 33, 2)]
            assert np.all(np.diff(midpoints) >= 0)

    def test_rejects_inadmissible_endpoint(self, rng):
        with pytest.raises(ValidationError):
            realize_walk(build_coupling(4, rng), 1)


class TestDelta:

    @pytest.mark.parametrize('z', [-1, 1])
    def test_single_step(self, rng, z):
        coupling = build_coupling(1, rng)
        path = bridge_with_endpoints(coupling.bridge, 1, 0.0, float(z))
        assert path.values[0] == 0.0
        assert path.values[-1] == pytest.approx(z)
        assert 0.0 <= delta(coupling, z) < math.inf

    def test_root_split(self, rng):
        for _ in range(25):
            coupling = build_coupling(64, rng)
            for z in (0, 8, -20):
                parts = delta_decomposition(coupling, z)
                assert parts.delta >= abs(parts.pinned - parts.midpoint) - 1e-9
                assert parts.delta <= parts.bound + 1e-9

    def test_refinement_only_grows(self, rng):
        coupling = build_coupling(16, rng)
        assert delta(coupling, 2, refine=4) >= delta(coupling, 2) - 1e-12


class TestCouple2D:

    def test_loop_is_closed(self, rng):
        for n in (1, 3, 8):
            bridge, walk = couple_2d(n, rng)
            assert walk.closed
            assert walk.positions[0].tolist() == [0, 0]
            assert bridge.is_standard

    def test_coordinate_variance(self, rng):
        values = np.array([couple_2d(4, rng).bridge.at(0.5) for _ in range(4000)])
        assert np.var(values.real) == pytest.approx(0.25, abs=0.03)
        assert np.var(values.imag) == pytest.approx(0.25, abs=0.03)

    def test_discrepancy_bounded_by_coordinates(self, rng):
        for _ in range(10):
            pair = couple_2d(8, rng)
            steps = pair.walk.length
            worst = max(delta(pair.first, 0), delta(pair.second, 0)) / math.sqrt(steps)
            assert pair.discrepancy() <= math.sqrt(2) * worst + 1e-9


class TestSandwich:

    def test_four_steps(self):
        report = cdf_sandwich_check(4, 0, 2.0, range(-2, 3))
        assert report.holds
        assert report.fitted_c1 <= 2.0
        assert report.saturated

    def test_symmetric_centre(self):
        for total in (4, 16, 64):
            row = next(r for r in cdf_sandwich_check(total, 0, 2.0, [0]).rows if r['x'] == 0)
            assert row['G(x-1)'] <= 0.5 <= row['G(x+1)']

    def test_fitted_constant_stable(self):
        small = cdf_sandwich_check(256, 0, 2.0, range(-16, 17)).fitted_c1
        large = cdf_sandwich_check(1024, 0, 2.0, range(-32, 33)).fitted_c1
        assert 0.5 <= large / small <= 2.0

    def test_degenerate_law(self):
        with pytest.raises(ValidationError):
            cdf_sandwich_check(4, 4, 2.0, [0])
