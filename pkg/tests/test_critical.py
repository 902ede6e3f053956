"""Critical-value scans, box dimension, porosity, and component clustering."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import regvar as rv
from regvar.critical import (
    box_counting_dimension,
    component_constancy,
    porosity_scan,
    scan_critical_values,
)
from regvar.errors import InputError, UndersampledError
from regvar.regularity import jacobian_rate
from regvar.semialg import PolyMap, Polynomial


class TestScan:
    def test_flagged_points_are_below_threshold(self):
        spec = rv.get("square1d")
        res = scan_critical_values(spec, tau=0.05, budget=2000, seed=0)
        assert res.total_sampled == 2000
        assert len(res.flagged) > 0
        for gp, rate in res.flagged:
            assert rate < res.threshold
            # flags on the polymap route are exact Jacobian rates
            assert rate == jacobian_rate(spec.polymap, gp.x)

    def test_result_bookkeeping(self):
        res = scan_critical_values(rv.get("square1d"), tau=0.05, budget=1500, seed=3)
        assert len(res.values) == len(res.flagged)
        assert len(res.strict_flags) == len(res.flagged)
        assert all(len(v) == rv.get("square1d").m for v in res.values)
        assert res.threshold == 0.05

    def test_regular_map_yields_no_flags(self):
        res = scan_critical_values(rv.get("identity1d"), tau=0.05, budget=300, seed=1)
        assert res.flagged == ()

    def test_pure_polymap_needs_box(self):
        pm = rv.get("square1d").polymap
        with pytest.raises(InputError):
            scan_critical_values(pm, tau=0.05, budget=100, seed=0)


class TestBoxDimension:
    def test_segment_dimension_near_one(self):
        pts = [(x, 0.0) for x in np.linspace(0.0, 1.0, 600)]
        fit = box_counting_dimension(pts, (0.25, 0.125, 0.0625, 0.03125))
        assert 0.8 <= fit.dimension <= 1.2
        assert fit.r2 >= 0.99

    def test_filled_square_dimension_near_two(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(0.0, 1.0, size=(4000, 2))
        fit = box_counting_dimension(pts, (0.5, 0.25, 0.125, 0.0625))
        assert 1.7 <= fit.dimension <= 2.1

    def test_single_cell_cloud_has_dimension_zero(self):
        fit = box_counting_dimension([(0.0, 0.0), (1e-6, 0.0)], (0.5, 0.25))
        assert fit.counts == (1, 1)
        assert fit.dimension == 0.0
        assert fit.r2 == 1.0

    def test_saturated_counts_raise(self):
        # every point its own box at every scale: no slope information
        with pytest.raises(UndersampledError):
            box_counting_dimension([(0.0,), (1.0,), (2.0,)], (0.5, 0.25))

    def test_constant_intermediate_counts_give_zero_slope(self):
        pts = [(0.0,), (0.01,), (1.0,), (1.01,)]
        fit = box_counting_dimension(pts, (0.5, 0.4))
        assert fit.counts == (2, 2)
        assert fit.dimension == 0.0
        assert fit.r2 == 1.0

    def test_scale_validation(self):
        with pytest.raises(InputError):
            box_counting_dimension([(0.0,)], (0.25, 0.5))
        with pytest.raises(InputError):
            box_counting_dimension([(0.0,)], (0.5,))
        with pytest.raises(InputError):
            box_counting_dimension([], (0.5, 0.25))

    @given(
        n=st.integers(50, 200),
        seed=st.integers(0, 100),
    )
    @settings(max_examples=20, deadline=None)
    def test_dimension_is_nonnegative(self, n, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-1.0, 1.0, size=(n, 2))
        fit = box_counting_dimension(pts, (0.5, 0.25, 0.125))
        assert fit.dimension >= 0.0


class TestPorosity:
    def test_segment_is_porous_in_the_plane(self):
        pts = [(x, 0.0) for x in np.linspace(-1.0, 1.0, 201)]
        rep = porosity_scan(pts, (0.25,), 0.02)
        assert rep.lambda_max >= 0.4
        assert rep.witness_failures == ()
        assert rep.tested_radii == (0.25,)

    def test_filled_square_is_not_porous(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1.0, 1.0, size=(10000, 2))
        rep = porosity_scan(pts, (0.3,), 0.02)
        assert rep.lambda_max <= 0.1

    def test_singleton_hole_certificate(self):
        # the best hole around an isolated point sits at distance r/2
        rep = porosity_scan([(0.0, 0.0)], (0.25,), 0.02)
        assert rep.lambda_max == pytest.approx(0.5, abs=0.08)


class TestComponents:
    def test_cubic_has_two_constant_components(self):
        rep = component_constancy(
            rv.get("cubic1d").polymap,
            0.05,
            [(-2.0, 2.0)],
            linking_eps=0.1,
            budget=20000,
            seed=2,
        )
        assert len(rep.components) == 2
        assert sorted(rep.values) == pytest.approx([-2.0, 2.0], abs=1e-6)
        assert max(rep.spreads) < 1e-3

    def test_components_partition_flagged_points(self):
        rep = component_constancy(
            rv.get("circlesq").polymap,
            0.05,
            [(-2.0, 2.0), (-2.0, 2.0)],
            linking_eps=0.5,
            budget=40000,
            seed=2,
        )
        seen = set()
        total = 0
        for comp in rep.components:
            assert len(comp) > 0
            total += len(comp)
            for p in comp:
                assert p not in seen
                seen.add(p)
        assert len(seen) == total

    def test_spreads_shrink_with_threshold(self):
        kw = dict(linking_eps=0.1, budget=20000, seed=2)
        loose = component_constancy(
            rv.get("cubic1d").polymap, 0.05, [(-2.0, 2.0)], **kw
        )
        tight = component_constancy(
            rv.get("cubic1d").polymap, 0.025, [(-2.0, 2.0)], **kw
        )
        assert len(loose.components) == len(tight.components)
        for s_tight, s_loose in zip(sorted(tight.spreads), sorted(loose.spreads)):
            assert s_tight <= s_loose + 1e-9

    def test_default_linking_radius_is_data_driven(self):
        rep = component_constancy(
            rv.get("cubic1d").polymap, 0.05, [(-2.0, 2.0)], budget=20000, seed=2
        )
        assert rep.linking_radius > 0.0

    def test_no_critical_points_gives_empty_report(self):
        lin = PolyMap(1, (2.0 * Polynomial.variable(1, 0),))
        rep = component_constancy(lin, 0.05, [(-1.0, 1.0)], budget=5000, seed=0)
        assert rep.components == ()
        assert rep.spreads == ()
        assert rep.values == ()
