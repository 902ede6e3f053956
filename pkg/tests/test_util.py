"""Lattice constructions, seeded streams, and the parallel map helper."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regvar.util import (
    UnionFind,
    _ball_slop,
    lattice,
    parallel_map,
    ring_lattice,
    scaled_norm,
    stream,
    window_lattice,
    worker_count,
)


def brute_ring(center, r_in, r_out, pitch):
    """Reference annulus: full bounding-box lattice filtered by distance,
    with the same boundary tolerance ring_lattice documents."""
    center = np.asarray(center, dtype=float)
    pts = lattice(center, r_out, pitch)
    d2 = np.einsum("ij,ij->i", pts - center, pts - center)
    out2 = (r_out + _ball_slop(center, r_out)) ** 2
    in2 = (r_in + _ball_slop(center, r_in)) ** 2 if r_in >= 0.0 else -1.0
    return pts[(d2 <= out2) & (d2 > in2)]


def as_set(pts):
    return {tuple(row) for row in np.round(pts, 12)}


class TestLattice:
    def test_lattice_contains_center_cell(self):
        pts = lattice(np.array([0.3, -0.2]), 0.5, 0.1)
        d = np.linalg.norm(pts - [0.3, -0.2], axis=1)
        assert (d <= 0.5 + 1e-12).all()
        assert pts.shape[0] > 0

    def test_lattice_is_grid_aligned(self):
        pts = lattice(np.array([0.0]), 1.0, 0.25)
        steps = np.diff(np.sort(pts[:, 0]))
        assert np.allclose(steps, 0.25)

    @given(
        cx=st.floats(-2, 2),
        cy=st.floats(-2, 2),
        r_out=st.floats(0.05, 1.5),
        frac=st.floats(0.0, 0.98),
        pitch=st.floats(0.02, 0.3),
    )
    @settings(max_examples=120, deadline=None)
    def test_ring_lattice_matches_brute_filter_2d(self, cx, cy, r_out, frac, pitch):
        center = np.array([cx, cy])
        r_in = r_out * frac
        got = ring_lattice(center, r_in, r_out, pitch)
        want = brute_ring(center, r_in, r_out, pitch)
        assert as_set(got) == as_set(want)

    @given(
        c=st.floats(-2, 2),
        r_out=st.floats(0.05, 1.5),
        frac=st.floats(0.0, 0.98),
    )
    @settings(max_examples=60, deadline=None)
    def test_ring_lattice_matches_brute_filter_1d(self, c, r_out, frac):
        center = np.array([c])
        got = ring_lattice(center, r_out * frac, r_out, 0.05)
        want = brute_ring(center, r_out * frac, r_out, 0.05)
        assert as_set(got) == as_set(want)

    def test_ring_lattice_tangent_interior_radius(self):
        # inner radius exactly on a lattice column: boundary points must obey
        # the strict > r_in filter
        center = np.array([0.0, 0.0])
        got = ring_lattice(center, 0.5, 1.0, 0.25)
        want = brute_ring(center, 0.5, 1.0, 0.25)
        assert as_set(got) == as_set(want)

    def test_ring_lattice_3d_falls_back_to_filter(self):
        center = np.zeros(3)
        got = ring_lattice(center, 0.3, 0.7, 0.2)
        d = np.linalg.norm(got, axis=1)
        assert ((d <= 0.7 + 1e-12) & (d > 0.3 - 1e-12)).all()

    def test_window_lattice_centered(self):
        w = window_lattice(np.array([1.0, 1.0]), 0.2, 0.1)
        assert np.allclose(w.mean(axis=0), [1.0, 1.0])
        assert np.abs(w - [1.0, 1.0]).max() <= 0.2 + 1e-12


class TestStream:
    def test_stream_deterministic(self):
        a = stream(3, 2, 7).random(5)
        b = stream(3, 2, 7).random(5)
        assert np.array_equal(a, b)

    @given(
        st.integers(0, 2**31), st.integers(0, 7), st.integers(0, 2**31)
    )
    @settings(max_examples=40, deadline=None)
    def test_streams_distinct_across_indices(self, seed, tag, idx):
        a = stream(seed, tag, idx).random(4)
        b = stream(seed, tag, idx + 1).random(4)
        assert not np.array_equal(a, b)


class TestParallelMap:
    def test_preserves_order(self):
        xs = list(range(40))
        assert parallel_map(lambda v: v * v, xs) == [v * v for v in xs]

    def test_worker_count_env(self):
        code = (
            "import os; os.environ['REGVAR_THREADS']='5'; "
            "from regvar.util import worker_count; print(worker_count())"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True
        )
        assert out.stdout.strip() == "5"

    def test_worker_count_default(self):
        env = {k: v for k, v in os.environ.items() if k != "REGVAR_THREADS"}
        code = "from regvar.util import worker_count; print(worker_count())"
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env
        )
        assert out.stdout.strip() == "1"

    def test_results_independent_of_worker_count(self):
        xs = [(-1.0) ** k * k for k in range(64)]
        env = dict(os.environ)
        outs = []
        for threads in ("1", "4"):
            env["REGVAR_THREADS"] = threads
            code = (
                "from regvar.util import parallel_map;"
                "print(parallel_map(lambda v: v*v, %r))" % (xs,)
            )
            run = subprocess.run(
                [sys.executable, "-c", code],
                capture_output=True,
                text=True,
                env=env,
            )
            outs.append(run.stdout)
        assert outs[0] == outs[1]


class TestScaledNorm:
    def test_euclidean(self):
        assert scaled_norm(np.array([3.0, 4.0])) == pytest.approx(5.0)


class TestUnionFind:
    @given(
        st.lists(
            st.tuples(st.integers(0, 19), st.integers(0, 19)), max_size=60
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_partition_property(self, edges):
        uf = UnionFind(20)
        for a, b in edges:
            uf.union(a, b)
        roots = [uf.find(i) for i in range(20)]
        # symmetric and transitive closure: linked pairs share a class
        for a, b in edges:
            assert roots[a] == roots[b]
        # every element in exactly one class
        assert all(roots[uf.find(i)] == roots[i] for i in range(20))
