"""Polynomials, formulas, graph sampling, and the JSON map-spec format."""

import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import regvar as rv
from regvar import (
    GraphPoint,
    MapSpec,
    Not,
    PolyMap,
    Polynomial,
    atom_eq,
    atom_le,
    atom_lt,
    conj,
    differentiate_polynomial,
    disj,
    eval_polynomial,
    formula_from_dict,
    formula_to_dict,
    load_mapspec,
    mapspec_to_dict,
    membership,
    membership_many,
    sample_graph,
)
from regvar.errors import (
    DimensionMismatchError,
    InputError,
    SparseGraphError,
)


def polys(nvars, max_terms=4, max_deg=3):
    """Random sparse polynomials with smallish integer-ish coefficients."""

    def build(draw_terms):
        terms = tuple(
            (c, tuple(e))
            for c, e in draw_terms
        )
        return Polynomial.from_terms(nvars, terms)

    term = st.tuples(
        st.floats(-4, 4, allow_nan=False).filter(lambda c: abs(c) > 1e-3),
        st.lists(
            st.integers(0, max_deg), min_size=nvars, max_size=nvars
        ),
    )
    return st.lists(term, min_size=1, max_size=max_terms).map(build)


def eq_free_formulas(nvars, depth=2):
    atom = polys(nvars).flatmap(
        lambda p: st.sampled_from([atom_lt(p), atom_le(p)])
    )
    if depth == 0:
        return atom
    sub = eq_free_formulas(nvars, depth - 1)
    return st.one_of(
        atom,
        st.lists(sub, min_size=2, max_size=3).map(lambda fs: conj(*fs)),
        st.lists(sub, min_size=2, max_size=3).map(lambda fs: disj(*fs)),
    )


class TestPolynomial:
    def test_canonical_term_order(self):
        a = Polynomial.from_terms(2, [(2.0, (0, 1)), (1.0, (1, 0))])
        b = Polynomial.from_terms(2, [(1.0, (1, 0)), (2.0, (0, 1))])
        assert a.terms == b.terms

    def test_evaluate_matches_horner_by_hand(self):
        # p(x, y) = 3x^2 y - y + 0.5
        p = Polynomial.from_terms(2, [(3.0, (2, 1)), (-1.0, (0, 1)), (0.5, (0, 0))])
        assert eval_polynomial(p, (2.0, -1.0)) == pytest.approx(
            3 * 4 * (-1) - (-1) + 0.5
        )

    def test_evaluate_many_agrees_with_scalar(self):
        p = Polynomial.from_terms(3, [(1.5, (1, 2, 0)), (-2.0, (0, 0, 3))])
        pts = np.random.default_rng(0).uniform(-2, 2, size=(40, 3))
        many = p.evaluate_many(pts)
        each = [eval_polynomial(p, row) for row in pts]
        assert np.allclose(many, each, rtol=1e-12, atol=1e-12)

    @given(p=polys(2), x=st.floats(-2, 2), y=st.floats(-2, 2))
    @settings(max_examples=120, deadline=None)
    def test_derivative_matches_central_difference(self, p, x, y):
        h = 1e-4
        for var, pt in ((0, (x, y)), (1, (x, y))):
            d = differentiate_polynomial(p, var)
            lo = list(pt)
            hi = list(pt)
            lo[var] -= h
            hi[var] += h
            fd = (eval_polynomial(p, hi) - eval_polynomial(p, lo)) / (2 * h)
            exact = eval_polynomial(d, pt)
            scale = max(1.0, abs(exact), abs(fd))
            assert abs(exact - fd) <= 1e-6 * scale + 1e-5

    def test_variable_and_constant_helpers(self):
        v = Polynomial.variable(3, 1)
        assert eval_polynomial(v, (5.0, 7.0, 9.0)) == 7.0
        c = Polynomial.constant(2, 4.5)
        assert eval_polynomial(c, (0.0, 0.0)) == 4.5

    def test_gradient_length(self):
        p = Polynomial.from_terms(3, [(1.0, (1, 1, 1))])
        assert len(p.gradient()) == 3


class TestMembership:
    @given(f=eq_free_formulas(2), x=st.floats(-2, 2), y=st.floats(-2, 2))
    @settings(max_examples=120, deadline=None)
    def test_not_complements_eq_free(self, f, x, y):
        assert membership(Not(f), (x, y)) == (not membership(f, (x, y)))

    def test_eq_and_its_negation_overlap_at_tolerance(self):
        p = Polynomial.variable(1, 0)
        f = atom_eq(p)
        assert membership(f, (0.0,), tol_eq=1e-9)
        assert membership(f, (5e-10,), tol_eq=1e-9)
        assert not membership(f, (2e-9,), tol_eq=1e-9)

    def test_strict_vs_nonstrict_on_boundary(self):
        p = Polynomial.variable(1, 0)
        assert membership(atom_le(p), (0.0,))
        assert not membership(atom_lt(p), (0.0,))

    @given(f=eq_free_formulas(2, depth=1))
    @settings(max_examples=60, deadline=None)
    def test_membership_many_agrees_with_scalar(self, f):
        pts = np.random.default_rng(1).uniform(-2, 2, size=(25, 2))
        flags = membership_many(f, pts)
        assert list(flags) == [membership(f, row) for row in pts]


class TestSampleGraph:
    def test_samples_satisfy_membership(self):
        spec = rv.get("interval_gap")
        gps = sample_graph(spec, 80, seed=3)
        assert len(gps) == 80
        for gp in gps:
            assert spec.membership(gp.point, 1e-9)

    def test_polymap_samples_lie_on_graph(self):
        spec = rv.get("square1d")
        for gp in sample_graph(spec, 50, seed=1):
            assert gp.y[0] == pytest.approx(gp.x[0] ** 2, abs=1e-12)

    def test_deterministic_across_worker_count(self):
        code = (
            "import regvar as rv\n"
            "from regvar import sample_graph\n"
            "gps = sample_graph(rv.get('remark'), 60, seed=9)\n"
            "print(repr([(tuple(g.x), tuple(g.y)) for g in gps]))\n"
        )
        outs = []
        for threads in ("1", "6"):
            run = subprocess.run(
                [sys.executable, "-c", code],
                capture_output=True,
                text=True,
                env={"REGVAR_THREADS": threads, "PATH": "/usr/bin:/bin"},
            )
            assert run.returncode == 0, run.stderr
            outs.append(run.stdout)
        assert outs[0] == outs[1]

    def test_prefix_stability(self):
        spec = rv.get("interval_gap")
        short = sample_graph(spec, 20, seed=5)
        long = sample_graph(spec, 60, seed=5)
        assert [tuple(g.point) for g in short] == [
            tuple(g.point) for g in long[:20]
        ]

    def test_unsatisfiable_graph_raises_sparse(self):
        one = Polynomial.constant(2, 1.0)
        spec = MapSpec(
            name="empty",
            n=1,
            m=1,
            graph=atom_eq(one),
            box=((-1, 1), (-1, 1)),
        )
        with pytest.raises(SparseGraphError):
            sample_graph(spec, 10, seed=0)


class TestJsonFormat:
    def test_polymap_spec_round_trip(self):
        spec = rv.get("fold2d")
        data = mapspec_to_dict(spec)
        back = load_mapspec(json.loads(json.dumps(data)))
        assert back.name == spec.name
        assert back.n == spec.n and back.m == spec.m
        assert back.box == spec.box
        pts = np.random.default_rng(2).uniform(-1, 1, size=(20, spec.n))
        for row in pts:
            assert np.allclose(back.polymap(row), spec.polymap(row))

    def test_formula_spec_round_trip(self):
        spec = rv.get("remark")
        back = load_mapspec(mapspec_to_dict(spec))
        pts = np.random.default_rng(3).uniform(-1, 1, size=(50, spec.n + spec.m))
        assert np.array_equal(
            membership_many(back.graph, pts, 1e-9),
            membership_many(spec.graph, pts, 1e-9),
        )

    @given(f=eq_free_formulas(2))
    @settings(max_examples=60, deadline=None)
    def test_formula_dict_round_trip(self, f):
        back = formula_from_dict(formula_to_dict(f))
        pts = np.random.default_rng(4).uniform(-2, 2, size=(10, 2))
        assert np.array_equal(
            membership_many(back, pts), membership_many(f, pts)
        )

    def test_load_rejects_malformed(self):
        with pytest.raises(InputError):
            load_mapspec({"name": "x", "n": 1})


class TestPolyMap:
    def test_dimension_mismatch_raises(self):
        pm = rv.get("fold2d").polymap
        with pytest.raises(DimensionMismatchError):
            pm((1.0,))

    def test_jacobian_matches_difference_quotient(self):
        pm = rv.get("cusp2d").polymap
        x = np.array([0.4, -0.3])
        J = rv.jacobian(pm, x)
        h = 1e-6
        for j in range(pm.n):
            e = np.zeros(pm.n)
            e[j] = h
            fd = (np.asarray(pm(x + e)) - np.asarray(pm(x - e))) / (2 * h)
            assert np.allclose(J[:, j], fd, atol=1e-5)
