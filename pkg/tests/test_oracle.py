"""Brute-force reference implementations and their agreement contracts."""

import numpy as np
import pytest

import regvar as rv
from regvar.errors import CostGuardError, InputError
from regvar.oracle import (
    RasterGrid,
    dense_min_singular,
    dense_modulus,
    dense_slope,
    rasterize,
)
from regvar.regularity import (
    ModulusQuery,
    function_slope,
    linear_surjection_rate,
    modulus_of_surjection,
)

MODULUS_CASES = [
    ("identity1d", (0.0,), (0.0,), 0.1, 0.002),
    ("identity1d", (0.5,), (0.5,), 0.2, 0.002),
    ("interval_gap", (0.5,), (0.25,), 0.1, 5e-4),
    ("double1d", (0.0,), (0.0,), 0.1, 0.002),
    ("square1d", (1.0,), (1.0,), 0.1, 0.002),
    ("circlesq", (1.0, 0.0), (0.0,), 0.1, 0.002),
]


class TestRasterize:
    def test_occupancy_matches_predicate_at_centers(self):
        grid = rasterize(lambda V: V[:, 0] >= 0.0, [(-1.0, 1.0)], 0.5)
        centers = grid.centers()
        occ = grid.occupancy().ravel()
        assert centers.shape == (5, 1)
        assert list(occ) == [c[0] >= 0.0 for c in centers]

    def test_bit_exact_reproducibility(self):
        def pred(V):
            return (V[:, 0] ** 2 + V[:, 1] ** 2) <= 1.0

        a = rasterize(pred, [(-1.5, 1.5), (-1.5, 1.5)], 0.1)
        b = rasterize(pred, [(-1.5, 1.5), (-1.5, 1.5)], 0.1)
        assert a.dims == b.dims
        assert a.origin == b.origin
        assert np.array_equal(a.bits, b.bits)

    def test_grid_fields(self):
        grid = rasterize(lambda V: np.ones(len(V), dtype=bool), [(0.0, 1.0)], 0.25)
        assert isinstance(grid, RasterGrid)
        assert grid.pitch == 0.25
        assert grid.occupancy().all()


class TestDenseModulus:
    def test_identity_quarter_ball(self):
        val = dense_modulus(
            rv.get("identity1d"), ModulusQuery((0.0,), (0.0,), 0.25), 1e-3
        )
        assert val == pytest.approx(0.25, abs=2e-3)

    def test_doubling_map(self):
        val = dense_modulus(
            rv.get("double1d"), ModulusQuery((0.0,), (0.0,), 0.1), 1e-3
        )
        assert val == pytest.approx(0.2, abs=2e-3)

    def test_half_open_interval_map(self):
        val = dense_modulus(
            rv.get("interval_gap"), ModulusQuery((0.5,), (0.25,), 0.1), 5e-4
        )
        assert val == pytest.approx(0.25, abs=2e-3)

    def test_pitch_validation(self):
        with pytest.raises(InputError):
            dense_modulus(
                rv.get("identity1d"), ModulusQuery((0.0,), (0.0,), 0.1), 0.0
            )

    def test_dimension_guard(self):
        with pytest.raises(CostGuardError):
            dense_modulus(
                rv.get("ridge3d"), ModulusQuery((0.0, 0.0, 0.0), (0.0,), 0.1), 0.01
            )

    def test_lattice_size_guard(self):
        with pytest.raises(CostGuardError):
            dense_modulus(
                rv.get("circlesq"), ModulusQuery((1.0, 0.0), (0.0,), 0.1), 1e-5
            )

    @pytest.mark.parametrize("name,x,y,lam,pitch", MODULUS_CASES)
    def test_agreement_with_estimator(self, name, x, y, lam, pitch):
        spec = rv.get(name)
        q = ModulusQuery(x, y, lam)
        dense = dense_modulus(spec, q, pitch)
        br = modulus_of_surjection(spec, q, pitch)
        mid = 0.5 * (br.r_lo + br.r_hi)
        assert abs(dense - mid) <= 3.0 * max(pitch, br.resolution)


class TestDenseMinSingular:
    def test_diagonal(self):
        assert dense_min_singular([[2.0, 0.0], [0.0, 3.0]]) == pytest.approx(
            2.0, abs=1e-4
        )

    def test_rotation_like(self):
        val = dense_min_singular([[1.0, 1.0], [1.0, -1.0]])
        assert val == pytest.approx(np.sqrt(2.0), abs=1e-4)

    def test_agreement_with_svd_path(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            m = int(rng.integers(1, 4))
            n = int(rng.integers(1, 4))
            A = rng.normal(size=(m, n))
            assert abs(
                dense_min_singular(A, seed=seed) - linear_surjection_rate(A)
            ) <= 1e-4

    def test_row_guard(self):
        with pytest.raises(CostGuardError):
            dense_min_singular(np.eye(4))


class TestDenseSlope:
    def test_negative_absolute_value(self):
        val = dense_slope(lambda u: -abs(u[0]), (0.0,), 0.25, 0.25 / 256)
        assert val == pytest.approx(1.0, abs=3 * 0.25 / 256)

    def test_parabola_at_bottom(self):
        # no descent direction at the minimum: slope exactly 0
        assert dense_slope(lambda u: u[0] ** 2, (0.0,), 0.25, 0.25 / 256) == 0.0

    def test_plane_in_two_variables(self):
        val = dense_slope(lambda u: -3.0 * u[0], (0.0, 0.0), 0.25, 0.25 / 64)
        assert val == pytest.approx(3.0, abs=3 * 0.25 / 64)

    def test_dimension_guard(self):
        with pytest.raises(CostGuardError):
            dense_slope(lambda u: 0.0, (0.0, 0.0, 0.0), 0.1, 0.01)

    @pytest.mark.parametrize(
        "name,x", [("square1d", 1.0), ("square1d", 0.5), ("cubic1d", 0.5)]
    )
    def test_agreement_with_estimator(self, name, x):
        pm = rv.get(name).polymap

        def neg(u):
            return -float(pm(u)[0])

        r = 0.0125
        pitch = r / 64.0
        dense = dense_slope(neg, (x,), r, pitch)
        est = function_slope(neg, (x,), radii=(r,), seed=0).slope
        assert abs(dense - est) <= 3.0 * pitch
