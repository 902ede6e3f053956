"""Compactification bookkeeping and the asymptotic criticality scan."""

import numpy as np
import pytest

import regvar as rv
from regvar import GraphPoint
from regvar.asymptotic import (
    asymptotic_scan,
    check_compactified_bound,
    check_prop7_bound,
    compactify_map,
    default_compactification,
    from_unit_ball,
    linear_eta,
    scaled_map,
    to_unit_ball,
)
from regvar.errors import DomainError, InputError
from regvar.semialg import MapSpec, Polynomial, atom_eq

# three dyadic shells where both weight functions stay above the
# estimator's resolution floor
SHELLS = ((2.0, 4.0), (4.0, 8.0), (8.0, 16.0))


def identity_wide():
    v0 = Polynomial.variable(2, 0)
    v1 = Polynomial.variable(2, 1)
    return MapSpec(
        name="identity-wide",
        n=1,
        m=1,
        graph=atom_eq(v1 - v0),
        box=((-8.0, 8.0), (-8.0, 8.0)),
        polymap=None,
    )


class TestCompactification:
    def test_inverse_pair_on_log_grids(self):
        comp = default_compactification()
        for t in np.logspace(-3, 3, 200):
            assert comp.psi(comp.phi(t)) == pytest.approx(t, abs=1e-9, rel=1e-9)
        for s in np.linspace(1e-3, 1.0 - 1e-3, 200):
            assert comp.phi(comp.psi(s)) == pytest.approx(s, abs=1e-9)

    def test_norm_bookkeeping(self):
        comp = default_compactification()
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.uniform(-5.0, 5.0, size=2)
            if np.linalg.norm(x) < 1e-6:
                continue
            u = to_unit_ball(x, comp)
            assert np.linalg.norm(u) < 1.0
            assert np.linalg.norm(x) == pytest.approx(
                comp.psi(np.linalg.norm(u)), abs=1e-9, rel=1e-9
            )
            assert np.linalg.norm(u) == pytest.approx(
                comp.phi(np.linalg.norm(x)), abs=1e-9
            )
            assert from_unit_ball(u, comp) == pytest.approx(x, abs=1e-9)

    def test_round_trip_on_dense_grid(self):
        comp = default_compactification()
        ts = np.logspace(-3, 3, 1000)
        err = max(abs(comp.psi(comp.phi(t)) - t) / max(1.0, t) for t in ts)
        assert err <= 1e-9

    def test_eta_outgrows_linear(self):
        comp = default_compactification()
        assert comp.eta(1e3) / 1e3 > 1e2
        assert linear_eta(7.25) == 7.25

    def test_derivatives_match_finite_differences(self):
        comp = default_compactification()
        h = 1e-6
        for t in (0.1, 1.0, 10.0):
            fd = (comp.phi(t + h) - comp.phi(t - h)) / (2 * h)
            assert comp.dphi(t) == pytest.approx(fd, rel=1e-4)
        for s in (0.1, 0.5, 0.9):
            fd = (comp.psi(s + h) - comp.psi(s - h)) / (2 * h)
            assert comp.dpsi(s) == pytest.approx(fd, rel=1e-4)


class TestCompactifiedMap:
    def test_membership_transfers_along_phi(self):
        comp = default_compactification()
        cm = compactify_map(rv.get("identity1d"), comp)
        x = 0.4
        u = x / (1.0 + x)
        assert cm.membership((u, x), 1e-6)
        assert not cm.membership((u, x + 0.5), 1e-6)

    def test_domain_is_punctured_unit_ball(self):
        comp = default_compactification()
        cm = compactify_map(rv.get("identity1d"), comp)
        with pytest.raises(DomainError):
            cm.membership((1.2, 0.5), 1e-9)
        with pytest.raises(DomainError):
            cm.membership((0.0, 0.5), 1e-9)

    def test_compactified_box_sits_inside_unit_interval(self):
        comp = default_compactification()
        cm = compactify_map(rv.get("identity1d"), comp)
        lo, hi = cm.box[0]
        assert -1.0 < lo < hi < 1.0

    def test_bound_report_rows_and_onset(self):
        comp = default_compactification()
        spec = rv.get("identity1d")
        pts = [
            GraphPoint((0.5,), (0.5,)),
            GraphPoint((1.0,), (1.0,)),
            GraphPoint((1.75,), (1.75,)),
        ]
        rep = check_compactified_bound(spec, comp, pts, tol=0.05)
        assert len(rep.rows) == 3
        assert all(ok for _, _, _, ok in rep.rows)
        assert rep.onset == 0.5
        radii = [r for r, _, _, _ in rep.rows]
        assert radii == sorted(radii)


class TestScan:
    def test_decaying_reciprocal_yields_candidate_near_zero(self):
        res = asymptotic_scan(
            rv.get("recip1d"),
            linear_eta,
            shells=SHELLS,
            per_shell_budget=24,
            threshold=0.25,
            seed=4,
            eta_name="linear",
        )
        assert len(res.candidates) >= 1
        for y, trace in res.candidates:
            assert abs(y[0]) <= 0.05
            assert len(trace) == len(SHELLS)
        minima = res.shell_minima
        assert minima[-1] <= minima[0]

    def test_linear_graph_has_no_candidates(self):
        res = asymptotic_scan(
            rv.get("line1d"),
            linear_eta,
            shells=SHELLS,
            per_shell_budget=24,
            threshold=0.25,
            seed=4,
        )
        assert res.candidates == ()
        assert all(m > 0.25 for m in res.shell_minima)

    def test_candidates_survive_heavier_weight(self):
        # a value whose eta-weighted rate decays under eta(t)=t keeps
        # decaying under (1+t)^2 whenever the rate falls off fast enough;
        # the catalog reciprocal does, so its candidate must persist
        comp = default_compactification()
        kw = dict(shells=SHELLS, per_shell_budget=24, threshold=0.3, seed=4)
        light = asymptotic_scan(rv.get("recip1d"), linear_eta, **kw)
        heavy = asymptotic_scan(rv.get("recip1d"), comp.eta, **kw)
        assert len(light.candidates) >= 1
        for y, _ in light.candidates:
            dist = min(
                abs(y[0] - hy[0]) for hy, _ in heavy.candidates
            )
            assert dist <= 0.05

    def test_growing_polynomial_rate_never_qualifies(self):
        res = asymptotic_scan(
            rv.get("square1d"), linear_eta, per_shell_budget=100, seed=0
        )
        assert res.candidates == ()

    def test_out_of_box_shells_are_skipped(self):
        res = asymptotic_scan(
            rv.get("recip1d"),
            linear_eta,
            shells=((400.0, 800.0),),
            per_shell_budget=8,
            seed=0,
        )
        assert res.skipped == ((400.0, 800.0),)
        assert res.candidates == ()

    def test_shell_validation(self):
        spec = rv.get("recip1d")
        with pytest.raises(InputError):
            asymptotic_scan(spec, linear_eta, shells=((4.0, 2.0),))
        with pytest.raises(InputError):
            asymptotic_scan(spec, linear_eta, shells=((2.0, 8.0), (4.0, 16.0)))
        with pytest.raises(InputError):
            asymptotic_scan(spec, linear_eta, shells=((-1.0, 2.0),))
        with pytest.raises(InputError):
            asymptotic_scan(spec, linear_eta, threshold=0.0)


class TestScaledMap:
    def test_scaled_graph_membership(self):
        rho = Polynomial.from_terms(1, ((1.0, (0,)), (1.0, (2,))))
        sm = scaled_map(rv.get("identity1d"), rho, [(-1.5, 1.5)])
        assert sm.membership((1.0, 2.0), 1e-8)
        assert not sm.membership((1.0, 1.0), 1e-8)

    def test_prop7_bound_equality_case(self):
        # L(x) = (1 + x^2) x has rate 1 + 3x^2 = 4 at x = 1, matching the
        # bound (rho + |grad rho| |x|) sur H = (2 + 2) * 1 exactly
        rho = Polynomial.from_terms(1, ((1.0, (0,)), (1.0, (2,))))
        (chk,) = check_prop7_bound(
            identity_wide(),
            rho,
            [GraphPoint((1.0,), (2.0,))],
            [(-1.5, 1.5)],
            resolution_rule=lambda s, d: d / 1024,
            lambda_factors=(0.25,),
            samples_per_level=0,
            seed=0,
        )
        assert chk.kind == "prop7"
        assert chk.passed
        assert chk.lhs == pytest.approx(chk.rhs, abs=0.05)

    def test_prop7_trivial_weight_is_tight(self):
        one = Polynomial.constant(1, 1.0)
        checks = check_prop7_bound(
            rv.get("identity1d"),
            one,
            [GraphPoint((0.0,), (0.0,)), GraphPoint((1.0,), (1.0,))],
            [(-2.0, 2.0)],
            resolution_rule=lambda s, d: d / 1024,
            lambda_factors=(0.25,),
            samples_per_level=0,
            seed=0,
        )
        assert all(c.passed for c in checks)
        assert all(c.lhs == pytest.approx(c.rhs, abs=1e-9) for c in checks)
