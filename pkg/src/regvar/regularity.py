"""Surjection modulus and regularity-rate estimators, slopes, and calculus checks.

The central quantity is the modulus of surjection of a set-valued map F at
(x, y) with radius lambda: the largest r such that the ball y + rB fits inside
F(x + lambda*B).  It is estimated by grid search at a stated resolution and
returned as a bracket [r_lo, r_hi].  Rates of surjection divide this modulus
by lambda and drive it to zero along a shrinking schedule of neighborhoods;
the rate of metric regularity is the reciprocal.  The exact linear-algebra
formulas (smallest singular value, Jacobian rule) and the sum/chain-rule
inequality checkers round out the module.

Numerical conventions shared by everything here:
  * coverage of a range point v is resolution-limited: v counts as covered
    when a domain lattice point u at pitch h satisfies graph membership with
    equality atoms read as first-order distance conditions
    |p| <= tol * max(1, ||grad p||), tol = h/2; points that fail get one local
    refinement pass (window pitch h/4; Gauss-Newton for single-valued maps)
    before being declared uncovered;
  * rate values use the optimistic bracket end r_hi, so that small reported
    rates mean the estimator truly failed to cover, not that the grid was
    too coarse;
  * all randomness flows through keyed counter streams, making every result
    a pure function of (inputs, seed) independent of worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DimensionMismatchError,
    InputError,
    IsolatedPointError,
    SparseGraphError,
)
from .semialg import (
    And,
    Atom,
    Formula,
    GraphPoint,
    MapSpec,
    Not,
    Or,
    PolyMap,
    Polynomial,
    Relation,
    closure_membership,
    membership,
    nnf,
    sample_graph,
)
from .util import lattice, ring_lattice, scaled_norm, stream, window_lattice

__all__ = [
    "ZERO_TOL",
    "DEFAULT_SCHEDULE",
    "DEFAULT_LAMBDA_FACTORS",
    "ModulusQuery",
    "ModulusBracket",
    "RateRow",
    "RegularityEstimate",
    "SlopeEstimate",
    "CalculusCheck",
    "default_resolution",
    "default_samples_per_level",
    "modulus_of_surjection",
    "surjection_rate",
    "regularity_rate",
    "function_slope",
    "map_slope",
    "linear_surjection_rate",
    "jacobian_rate",
    "frobenius_norm",
    "check_sum_rule",
    "check_chain_rule",
    "shifted_map",
    "composed_map",
]

ZERO_TOL = 1e-6
DEFAULT_SCHEDULE = (0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625)
DEFAULT_LAMBDA_FACTORS = (1.0, 0.5, 0.25)

# Rate estimation caps the modulus search at this multiple of lambda; it must
# exceed the largest Sur/lambda ratio the catalog can produce (about 30 for
# the steepest bundled map), and rejected probes above the true modulus fail
# fast on their outermost ring, so a generous cap costs little.
_RATE_RMAX_FACTOR = 64.0
# Refinement is attempted only while the best grid residual is within this
# multiple of the coverage tolerance; beyond it the point is a clear hole.
_REFINE_REACH = 64.0
_U_CHUNK = 2048
_V_CHUNK = 256


def default_resolution(spec, delta: float) -> float:
    """Default grid pitch for a neighborhood scale delta.

    The divisor balances bias (r_hi inflates by about 2 pitches) against the
    lattice sizes that grow like (delta/pitch)^n.
    """
    n = spec.n
    if n <= 1:
        return delta / 128.0
    if n == 2:
        return delta / 64.0
    return delta / 32.0


def default_samples_per_level(spec) -> int:
    """Default count of nearby graph samples per schedule level."""
    total = spec.n + spec.m
    if total <= 2:
        return 48
    if total <= 4:
        return 6
    return 3


# ---------------------------------------------------------------------------
# result types

@dataclass(frozen=True)
class ModulusQuery:
    """Where to probe: domain center x, range center y, domain radius lam."""

    x: tuple[float, ...]
    y: tuple[float, ...]
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if not self.lam > 0.0:
            raise InputError("lambda must be positive")


@dataclass(frozen=True)
class ModulusBracket:
    """Resolution-limited enclosure of the modulus of surjection.

    r_lo is the largest grid-certified radius minus the coverage tolerance
    (grid certificates can overshoot by up to one tolerance); r_hi adds the
    final bisection gap plus one resolution step.  samples_range and
    samples_domain record how many lattice points were interrogated.
    """

    r_lo: float
    r_hi: float
    resolution: float
    samples_range: int
    samples_domain: int

    def __post_init__(self):
        if not 0.0 <= self.r_lo <= self.r_hi:
            raise InputError("bracket must satisfy 0 <= r_lo <= r_hi")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.r_lo + self.r_hi)


@dataclass(frozen=True)
class RateRow:
    """One modulus evaluation inside a rate estimate (plot-ready record)."""

    delta: float
    lam: float
    x: tuple[float, ...]
    y: tuple[float, ...]
    r_lo: float
    r_hi: float


@dataclass(frozen=True)
class RegularityEstimate:
    """Shrinking-neighborhood estimate of sur F(xbar|ybar) and its reciprocal.

    values[k] is the minimum of r_hi/lambda over the graph points sampled
    within deltas[k] of (xbar, ybar) and the lambda grid at that level;
    sur_estimate is the finest-level value and reg_estimate its reciprocal
    (infinite below ZERO_TOL).  Levels where no graph point was found hold
    math.inf.
    """

    deltas: tuple[float, ...]
    values: tuple[float, ...]
    sur_estimate: float
    reg_estimate: float
    rows: tuple[RateRow, ...]


@dataclass(frozen=True)
class SlopeEstimate:
    """Per-radius slope quotients and the finest-radius limit proxy."""

    radii: tuple[float, ...]
    values: tuple[float, ...]
    slope: float


@dataclass(frozen=True)
class CalculusCheck:
    """One inequality instance, oriented so that passing means lhs <= rhs + tol."""

    kind: str
    point: tuple[float, ...]
    lhs: float
    rhs: float
    tol: float
    passed: bool


# ---------------------------------------------------------------------------
# coverage machinery

class _CoverEvaluator:
    """Vectorized formula test with EQ atoms read as first-order distance.

    Returns (ok, residual) per point: ok is membership under the scaled
    tolerance; residual is a nonnegative violation score whose minimizers
    seed refinement.  Strict and non-strict inequalities are evaluated
    exactly as written.
    """

    def __init__(self, graph: Formula):
        self.root = nnf(graph)
        self._grads: dict[int, list[Polynomial]] = {}
        self._const_norm: dict[int, float | None] = {}

    def _gradient(self, p: Polynomial) -> list[Polynomial]:
        g = self._grads.get(id(p))
        if g is None:
            g = p.gradient()
            self._grads[id(p)] = g
        return g

    def _gradient_norm_const(self, p: Polynomial) -> float | None:
        """||grad p|| when every partial is constant (degree <= 1), else None."""
        if id(p) not in self._const_norm:
            s2 = 0.0
            const = True
            for q in self._gradient(p):
                if not q.terms:
                    continue
                if len(q.terms) == 1 and not any(q.terms[0][1]):
                    s2 += q.terms[0][0] ** 2
                else:
                    const = False
                    break
            self._const_norm[id(p)] = math.sqrt(s2) if const else None
        return self._const_norm[id(p)]

    def _eq_quotient(self, p: Polynomial, pts: np.ndarray) -> np.ndarray:
        v = np.abs(p.evaluate_many(pts))
        gconst = self._gradient_norm_const(p)
        if gconst is not None:
            return v / max(1.0, gconst)
        s2 = np.zeros(pts.shape[0])
        for q in self._gradient(p):
            if q.terms:
                gv = q.evaluate_many(pts)
                s2 += gv * gv
        return v / np.maximum(1.0, np.sqrt(s2))

    def __call__(self, pts: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
        return self._eval(self.root, pts, tol)

    # -- cross-product grid mode ---------------------------------------------
    #
    # Coverage tests ask "does any u in a fixed domain lattice pair with v"
    # for batches of v.  Every monomial c * x^a * y^b splits into a u-part
    # and a v-part, so each polynomial evaluates on the (v, u) grid as one
    # small matrix product with the u-side factors computed once per lattice.

    def bind_domain(self, U: np.ndarray, n: int) -> None:
        self._U = np.asarray(U, dtype=float)
        self._n = int(n)
        self._ufac: dict[int, tuple[np.ndarray, list[tuple[int, ...]]]] = {}

    def _term_rows(self, p: Polynomial) -> np.ndarray:
        N = self._U.shape[0]
        CU = np.empty((len(p.terms), N))
        for t, (c, e) in enumerate(p.terms):
            row = np.full(N, c)
            for j in range(self._n):
                if e[j]:
                    row = row * self._U[:, j] ** e[j]
            CU[t] = row
        return CU

    def _u_factors(self, p: Polynomial):
        ent = self._ufac.get(id(p))
        if ent is None:
            n = self._n
            vexps = [e[n:] for _, e in p.terms]
            if not any(any(e) for e in vexps):
                # u-only polynomial: a single row vector serves every v
                ent = ("u", self._term_rows(p).sum(axis=0), None)
            elif not any(any(e[:n]) for _, e in p.terms):
                ent = ("v", np.array([c for c, _ in p.terms]), vexps)
            else:
                ent = ("m", self._term_rows(p), vexps)
            self._ufac[id(p)] = ent
        return ent

    @staticmethod
    def _v_matrix(vexps, V: np.ndarray) -> np.ndarray:
        MV = np.empty((len(vexps), V.shape[0]))
        for t, e in enumerate(vexps):
            row = np.ones(V.shape[0])
            for j, a in enumerate(e):
                if a:
                    row = row * V[:, j] ** a
            MV[t] = row
        return MV

    def _poly_grid(self, p: Polynomial, V: np.ndarray, sl: slice) -> np.ndarray:
        """Value grid in broadcast-minimal shape: u-only polynomials come
        back as (1, nu), v-only as (nv, 1), mixed as the full (nv, nu)."""
        kind, a, vexps = self._u_factors(p)
        if kind == "u":
            return a[sl][None, :]
        MV = self._v_matrix(vexps, V)
        if kind == "v":
            return (MV.T @ a)[:, None]
        return MV.T @ a[:, sl]

    def _eq_quotient_grid(self, p: Polynomial, V: np.ndarray, sl: slice):
        v = np.abs(self._poly_grid(p, V, sl))
        gconst = self._gradient_norm_const(p)
        if gconst is not None:
            return v / max(1.0, gconst)
        s2 = 0.0
        for q in self._gradient(p):
            if q.terms:
                gv = self._poly_grid(q, V, sl)
                s2 = s2 + gv * gv
        return v / np.maximum(1.0, np.sqrt(s2))

    def grid(self, V: np.ndarray, tol: float, sl: slice = slice(None)):
        """(ok, residual) matrices of shape (len(V), len(U[sl]))."""
        ok, res = self._eval_grid(self.root, V, sl, tol)
        shape = (V.shape[0], self._U[sl].shape[0])
        return np.broadcast_to(ok, shape), np.broadcast_to(res, shape)

    def _eval_grid(self, f: Formula, V: np.ndarray, sl: slice, tol: float):
        if isinstance(f, Atom):
            if f.rel is Relation.EQ:
                q = self._eq_quotient_grid(f.poly, V, sl)
                return q <= tol, np.maximum(q - tol, 0.0)
            v = self._poly_grid(f.poly, V, sl)
            ok = v < 0.0 if f.rel is Relation.LT else v <= 0.0
            return ok, np.maximum(v, 0.0)
        if isinstance(f, Not):
            q = self._eq_quotient_grid(f.arg.poly, V, sl)
            return q > tol, np.maximum(tol - q, 0.0)
        if isinstance(f, And):
            ok = res = None
            for g in f.args:
                o, r = self._eval_grid(g, V, sl, tol)
                ok = o if ok is None else ok & o
                res = r if res is None else res + r
        else:
            ok = res = None
            for g in f.args:
                o, r = self._eval_grid(g, V, sl, tol)
                ok = o if ok is None else ok | o
                res = r if res is None else np.minimum(res, r)
        if ok is None:
            nu = self._U[sl].shape[0]
            full = isinstance(f, And)
            return (
                np.full((V.shape[0], nu), full, dtype=bool),
                np.full((V.shape[0], nu), 0.0 if full else np.inf),
            )
        return ok, res

    def _eval(self, f: Formula, pts: np.ndarray, tol: float):
        if isinstance(f, Atom):
            if f.rel is Relation.EQ:
                q = self._eq_quotient(f.poly, pts)
                return q <= tol, np.maximum(q - tol, 0.0)
            v = f.poly.evaluate_many(pts)
            ok = v < 0.0 if f.rel is Relation.LT else v <= 0.0
            return ok, np.maximum(v, 0.0)
        if isinstance(f, Not):
            q = self._eq_quotient(f.arg.poly, pts)
            return q > tol, np.maximum(tol - q, 0.0)
        if isinstance(f, And):
            ok = np.ones(pts.shape[0], dtype=bool)
            res = np.zeros(pts.shape[0])
            for g in f.args:
                o, r = self._eval(g, pts, tol)
                ok &= o
                res += r
            return ok, res
        ok = np.zeros(pts.shape[0], dtype=bool)
        res = np.full(pts.shape[0], np.inf)
        for g in f.args:
            o, r = self._eval(g, pts, tol)
            ok |= o
            res = np.minimum(res, r)
        return ok, res


class _CoverageOracle:
    """Cached answer to: does v belong to F(B(x, lam) ∩ box) at resolution h?

    Single-valued maps go through image lattice + KD-tree nearest neighbor
    with Gauss-Newton refinement; general graphs go through the vectorized
    formula cover test with a windowed refinement pass.
    """

    def __init__(self, spec, x: np.ndarray, lam: float, resolution: float):
        self.spec = spec
        self.x = np.asarray(x, dtype=float)
        self.lam = float(lam)
        self.h = float(resolution)
        self.tol = 0.5 * self.h
        n = spec.n
        self.xlo = np.array([b[0] for b in spec.box[:n]])
        self.xhi = np.array([b[1] for b in spec.box[:n]])
        U = lattice(self.x, self.lam, self.h)
        if U.size:
            inside = np.all((U >= self.xlo) & (U <= self.xhi), axis=1)
            U = U[inside]
        if U.size == 0:
            # resolution coarser than the ball: probe at least the center
            U = np.clip(self.x, self.xlo, self.xhi).reshape(1, -1)
        self.U = U
        self.pm: PolyMap | None = getattr(spec, "polymap", None)
        self.cover = None
        self.member_many = None
        if self.pm is not None:
            self.FU = self.pm.call_many(U)
            self.tree = cKDTree(self.FU)
        elif getattr(spec, "graph", None) is not None:
            self.cover = _CoverEvaluator(spec.graph)
            self.cover.bind_domain(U, n)
        elif hasattr(spec, "grid_evaluator"):
            self.cover = spec.grid_evaluator(U, n)
        elif hasattr(spec, "cover_many"):
            self.cover = spec.cover_many
        else:
            self.member_many = spec.membership_many
        self.cache: dict[bytes, bool] = {}

    # -- single queries -----------------------------------------------------

    def covered_batch(self, V: np.ndarray) -> np.ndarray:
        out = np.empty(V.shape[0], dtype=bool)
        todo = []
        for i in range(V.shape[0]):
            hit = self.cache.get(V[i].tobytes())
            if hit is None:
                todo.append(i)
            else:
                out[i] = hit
        if todo:
            idx = np.array(todo)
            Vn = V[idx]
            flags = (
                self._polymap_cover(Vn)
                if self.pm is not None
                else self._formula_cover(Vn)
            )
            for j, i in enumerate(todo):
                self.cache[V[i].tobytes()] = bool(flags[j])
                out[i] = flags[j]
        return out

    def ball_covered(self, y: np.ndarray, r: float) -> bool:
        """Are all range-lattice points within distance r of y covered?

        Probes outer rings first so clearly-too-large radii fail after a
        handful of membership tests instead of a full-ball sweep.
        """
        band = 8.0 * self.h
        r_out = r
        while r_out > 0.0:
            r_in = r_out - band if r_out - band > 0.0 else -1.0
            ring = ring_lattice(y, r_in, r_out, self.h)
            # Ramp up the batch size so a mostly-uncovered probe fails after
            # a handful of points rather than a full 1024-point batch.
            s, size = 0, 32
            while s < ring.shape[0]:
                if not self.covered_batch(ring[s : s + size]).all():
                    return False
                s += size
                size = min(2 * size, 1024)
            if r_in < 0.0:
                break
            r_out = r_in
        return True

    # -- single-valued path ---------------------------------------------------

    def _polymap_cover(self, Vn: np.ndarray) -> np.ndarray:
        d, nearest = self.tree.query(Vn, workers=1)
        d = np.atleast_1d(d)
        nearest = np.atleast_1d(nearest)
        flags = d <= self.tol
        idx = np.nonzero(~flags & (d <= _REFINE_REACH * self.tol))[0]
        if idx.size:
            flags[idx] = self._gauss_newton(Vn[idx], self.U[nearest[idx]])
        return flags

    def _project(self, U: np.ndarray) -> np.ndarray:
        U = np.clip(U, self.xlo, self.xhi)
        D = U - self.x
        nd = np.linalg.norm(D, axis=1)
        scale = np.where(nd > self.lam, self.lam / np.maximum(nd, 1e-300), 1.0)
        return self.x + D * scale[:, None]

    def _gauss_newton(self, V: np.ndarray, U0: np.ndarray) -> np.ndarray:
        """Damped Gauss-Newton from lattice seeds, one trajectory per target."""
        pm = self.pm
        rows = pm.jacobian_polys()
        n, m = pm.n, pm.m
        U = self._project(np.array(U0, dtype=float))
        R = pm.call_many(U) - V
        best = np.linalg.norm(R, axis=1)
        mu = np.full(U.shape[0], 1e-10)
        eye = np.eye(n)
        for _ in range(12):
            active = np.nonzero((best > self.tol) & (mu <= 1e8))[0]
            if active.size == 0:
                break
            Ua = U[active]
            J = np.empty((active.size, m, n))
            for i, row in enumerate(rows):
                for j, q in enumerate(row):
                    J[:, i, j] = q.evaluate_many(Ua)
            g = np.einsum("kij,ki->kj", J, R[active])
            H = np.einsum("kia,kib->kab", J, J)
            tr = np.trace(H, axis1=1, axis2=2)
            damp = mu[active] * (tr / n + 1e-12)
            try:
                step = np.linalg.solve(
                    H + damp[:, None, None] * eye, -g[:, :, None]
                )[:, :, 0]
            except np.linalg.LinAlgError:
                step = -g
            cand = self._project(Ua + step)
            Rc = pm.call_many(cand) - V[active]
            nc = np.linalg.norm(Rc, axis=1)
            better = nc < best[active]
            imp = active[better]
            U[imp] = cand[better]
            R[imp] = Rc[better]
            best[imp] = nc[better]
            mu[imp] = np.maximum(mu[imp] / 4.0, 1e-12)
            mu[active[~better]] *= 16.0
        return best <= self.tol

    # -- general graph path ---------------------------------------------------

    def _formula_cover(self, Vn: np.ndarray) -> np.ndarray:
        if self.member_many is not None:
            return self._duck_cover(Vn)
        n = self.spec.n
        m = self.spec.m
        gridded = hasattr(self.cover, "grid")
        B = Vn.shape[0]
        flags = np.zeros(B, dtype=bool)
        best_res = np.full(B, np.inf)
        best_arg = np.zeros(B, dtype=np.int64)
        undecided = np.arange(B)
        U = self.U
        for start in range(0, U.shape[0], _U_CHUNK):
            if undecided.size == 0:
                break
            stop = min(start + _U_CHUNK, U.shape[0])
            Uc = U[start:stop]
            for vs in range(0, undecided.size, _V_CHUNK):
                vidx = undecided[vs : vs + _V_CHUNK]
                if gridded:
                    okm, resm = self.cover.grid(
                        Vn[vidx], self.tol, slice(start, stop)
                    )
                else:
                    pts = np.empty((vidx.size * Uc.shape[0], n + m))
                    pts[:, :n] = np.tile(Uc, (vidx.size, 1))
                    pts[:, n:] = np.repeat(Vn[vidx], Uc.shape[0], axis=0)
                    ok, res = self.cover(pts, self.tol)
                    okm = ok.reshape(vidx.size, Uc.shape[0])
                    resm = res.reshape(vidx.size, Uc.shape[0])
                flags[vidx[okm.any(axis=1)]] = True
                rmin = resm.min(axis=1)
                closer = rmin < best_res[vidx]
                best_res[vidx[closer]] = rmin[closer]
                best_arg[vidx[closer]] = start + resm.argmin(axis=1)[closer]
            undecided = undecided[~flags[undecided]]
        for i in undecided:
            if best_res[i] <= _REFINE_REACH * self.tol:
                flags[i] = self._window_refine(Vn[i], self.U[best_arg[i]])
        return flags

    def _duck_cover(self, Vn: np.ndarray) -> np.ndarray:
        n = self.spec.n
        m = self.spec.m
        U = self.U
        flags = np.zeros(Vn.shape[0], dtype=bool)
        for start in range(0, U.shape[0], _U_CHUNK):
            rest = np.nonzero(~flags)[0]
            if rest.size == 0:
                break
            Uc = U[start : start + _U_CHUNK]
            pts = np.empty((rest.size * Uc.shape[0], n + m))
            pts[:, :n] = np.tile(Uc, (rest.size, 1))
            pts[:, n:] = np.repeat(Vn[rest], Uc.shape[0], axis=0)
            ok = self.member_many(pts, self.tol)
            flags[rest[ok.reshape(rest.size, Uc.shape[0]).any(axis=1)]] = True
        return flags

    def _window_refine(self, v: np.ndarray, u0: np.ndarray) -> bool:
        W = window_lattice(u0, 1.5 * self.h, self.h / 4.0)
        W = W[np.all((W >= self.xlo) & (W <= self.xhi), axis=1)]
        if W.size:
            d2 = np.einsum("ij,ij->i", W - self.x, W - self.x)
            W = W[d2 <= self.lam * self.lam * (1.0 + 1e-12)]
        if W.size == 0:
            return False
        pts = np.empty((W.shape[0], self.spec.n + self.spec.m))
        pts[:, : self.spec.n] = W
        pts[:, self.spec.n :] = v
        ok, _ = self.cover(pts, self.tol)
        return bool(ok.any())


# ---------------------------------------------------------------------------
# modulus and rate

def _range_diameter(spec) -> float:
    return math.sqrt(
        math.fsum((hi - lo) ** 2 for lo, hi in spec.box[spec.n :])
    )


def modulus_of_surjection(
    spec,
    q: ModulusQuery,
    resolution: float,
    r_max: float | None = None,
) -> ModulusBracket:
    """Bracket the largest r with y + rB inside F(x + lam*B), by bisection.

    A radius is accepted when every range-lattice point of pitch `resolution`
    in B(y, r) is covered by some domain-lattice point of the same pitch in
    B(x, lam) intersected with the spec's box (each failure gets one local
    refinement pass first).  The search runs over [0, r_max]; r_max defaults
    to the diameter of the spec's range box.  No positive radius accepted
    yields r_lo = 0, the sup-of-empty-set convention.
    """
    if resolution <= 0.0:
        raise InputError("resolution must be positive")
    if len(q.x) != spec.n or len(q.y) != spec.m:
        raise DimensionMismatchError("query does not match the map's dimensions")
    x = np.array(q.x)
    y = np.array(q.y)
    for val, (lo, hi) in zip(
        list(q.x) + list(q.y), spec.box
    ):
        if val < lo - 1e-9 or val > hi + 1e-9:
            raise InputError("query point lies outside the spec's box")
    if r_max is None:
        r_max = _range_diameter(spec)
    if r_max <= 0.0:
        raise InputError("r_max must be positive")
    nearest = np.round(y / resolution) * resolution
    if float(np.linalg.norm(nearest - y)) > r_max:
        raise InputError(
            "resolution too coarse: no range-lattice point within r_max of y"
        )
    oracle = _CoverageOracle(spec, x, q.lam, resolution)

    lo_acc = 0.0
    if oracle.ball_covered(y, r_max):
        lo_acc, gap = r_max, 0.0
    else:
        hi_rej = r_max
        probe = r_max / 4.0
        while probe >= resolution / 4.0 and not oracle.ball_covered(y, probe):
            hi_rej = probe
            probe /= 4.0
        if probe >= resolution / 4.0:
            lo_acc = probe
        while hi_rej - lo_acc > resolution / 4.0:
            mid = 0.5 * (lo_acc + hi_rej)
            if oracle.ball_covered(y, mid):
                lo_acc = mid
            else:
                hi_rej = mid
        gap = hi_rej - lo_acc
    r_lo = max(0.0, lo_acc - oracle.tol - resolution)
    r_hi = lo_acc + gap + resolution
    return ModulusBracket(
        r_lo=r_lo,
        r_hi=r_hi,
        resolution=resolution,
        samples_range=len(oracle.cache),
        samples_domain=int(oracle.U.shape[0]),
    )


def _near_graph_samples(
    spec, center: np.ndarray, delta: float, count: int, seed: int, level: int,
    sample_tol: float,
) -> list[tuple[tuple[float, ...], tuple[float, ...]]]:
    """Graph points within Euclidean distance delta of `center`, deduplicated."""
    if count <= 0 or getattr(spec, "graph", None) is None:
        return []
    sub_box = []
    for (lo, hi), c in zip(spec.box, center):
        nl, nh = max(lo, c - delta), min(hi, c + delta)
        if not nl < nh:
            return []
        sub_box.append((nl, nh))
    sub_spec = replace(spec, box=tuple(sub_box))
    level_seed = seed * 1_000_003 + 7919 * level + 1
    trials = max(400, 120 * count)
    try:
        gps = sample_graph(
            sub_spec, count, seed=level_seed, tol_eq=sample_tol, max_trials=trials
        )
    except SparseGraphError as err:
        if err.achieved == 0:
            return []
        gps = sample_graph(
            sub_spec, err.achieved, seed=level_seed, tol_eq=sample_tol,
            max_trials=trials,
        )
    out = []
    seen = set()
    for gp in gps:
        p = np.array(gp.x + gp.y)
        if float(np.linalg.norm(p - center)) > delta:
            continue
        key = (gp.x, gp.y)
        if key in seen:
            continue
        seen.add(key)
        out.append((gp.x, gp.y))
    return out


def surjection_rate(
    spec,
    xbar: Sequence[float],
    ybar: Sequence[float],
    schedule: Sequence[float] | None = None,
    resolution_rule: Callable[[object, float], float] | None = None,
    seed: int = 0,
    *,
    samples_per_level: int | None = None,
    lambda_factors: Sequence[float] = DEFAULT_LAMBDA_FACTORS,
    sample_tol: float = 1e-9,
    rmax_factor: float = _RATE_RMAX_FACTOR,
    cumulative_min: bool = False,
    alternate_liminf: bool = False,
) -> RegularityEstimate:
    """Estimate sur F(xbar|ybar): the liminf of Sur/lambda along the graph.

    For each delta in the (strictly decreasing) schedule, graph points within
    delta of (xbar, ybar) are gathered — (xbar, ybar) itself included when it
    lies on the graph — and the modulus is bracketed at lam = f*delta for the
    given lambda factors; the level's value is the minimum r_hi/lam observed.
    The estimate is the finest-level value.  Each modulus search is capped at
    r_max = rmax_factor*lam, so reported ratios saturate there; callers that
    only need to compare against a small threshold can shrink the factor.

    `cumulative_min` additionally clamps each level by its predecessor, which
    makes the sequence non-increasing but lets one coarse-scale outlier pin
    the final answer; it is off by default so that the finest level speaks
    for itself.  `alternate_liminf` probes lam at the finest schedule scale
    on every level (the other ordering of the two limit operations); it is a
    research flag and no particular relation between the two modes is
    asserted.
    """
    sched = tuple(float(d) for d in (schedule if schedule is not None else DEFAULT_SCHEDULE))
    if not sched or any(d <= 0.0 for d in sched):
        raise InputError("schedule must be positive")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise InputError("schedule must be strictly decreasing")
    rule = resolution_rule if resolution_rule is not None else default_resolution
    spl = (
        samples_per_level
        if samples_per_level is not None
        else default_samples_per_level(spec)
    )
    xbar_t = tuple(float(v) for v in xbar)
    ybar_t = tuple(float(v) for v in ybar)
    center = np.array(xbar_t + ybar_t)
    graph = getattr(spec, "graph", None)
    if graph is not None:
        check_tol = max(1e-6, sample_tol)
        if not closure_membership(graph, center, check_tol):
            raise InputError(
                "(xbar, ybar) is not in the closure of the graph at tolerance "
                f"{check_tol}"
            )
        on_graph = membership(graph, center, max(sample_tol, 1e-9))
    else:
        on_graph = True

    rows: list[RateRow] = []
    values: list[float] = []
    for k, delta in enumerate(sched):
        h = rule(spec, delta)
        points: list[tuple[tuple[float, ...], tuple[float, ...]]] = []
        if on_graph:
            points.append((xbar_t, ybar_t))
        points.extend(
            _near_graph_samples(spec, center, delta, spl, seed, k, sample_tol)
        )
        if not points:
            if k == len(sched) - 1:
                raise IsolatedPointError(
                    f"no graph point within {delta} of (xbar, ybar)"
                )
            values.append(math.inf)
            continue
        lam_base = sched[-1] if alternate_liminf else delta
        best = math.inf
        for px, py in points:
            for f in lambda_factors:
                lam = f * lam_base
                br = modulus_of_surjection(
                    spec,
                    ModulusQuery(px, py, lam),
                    h,
                    r_max=rmax_factor * lam,
                )
                rows.append(RateRow(delta, lam, px, py, br.r_lo, br.r_hi))
                best = min(best, br.r_hi / lam)
        if cumulative_min and values:
            best = min(best, values[-1])
        values.append(best)
    sur = values[-1]
    reg = math.inf if sur <= ZERO_TOL else 1.0 / sur
    return RegularityEstimate(
        deltas=sched,
        values=tuple(values),
        sur_estimate=sur,
        reg_estimate=reg,
        rows=tuple(rows),
    )


def regularity_rate(est: RegularityEstimate) -> float:
    """Rate of metric regularity: 1/sur, infinite when sur is (near) zero."""
    if est.sur_estimate <= ZERO_TOL:
        return math.inf
    return 1.0 / est.sur_estimate


# ---------------------------------------------------------------------------
# slopes

def _scalar_and_batch(f) -> tuple[Callable[[np.ndarray], float], Callable[[np.ndarray], np.ndarray]]:
    if isinstance(f, PolyMap):
        if f.m != 1:
            raise InputError("function_slope needs a scalar map (m = 1)")
        return (lambda u: float(f(u)[0])), (lambda U: f.call_many(U)[:, 0])
    batch = getattr(f, "call_batch", None)
    if batch is not None:
        return (lambda u: float(f(u))), batch
    return (lambda u: float(f(u))), (
        lambda U: np.array([float(f(u)) for u in U])
    )


def function_slope(
    f,
    x: Sequence[float],
    radii: Sequence[float],
    samples: int = 256,
    seed: int = 0,
) -> SlopeEstimate:
    """Estimate the slope |grad f|(x): the worst descent quotient near x.

    Per radius r, `samples` points u are drawn strictly inside B(x, r) and
    the maximum of (f(x) - f(u))+ / ||x - u|| is recorded; the slope proxy is
    the value at the smallest radius.  `f` is a scalar PolyMap or a callable
    on points (an optional `call_batch` attribute vectorizes it).
    """
    rads = tuple(float(r) for r in radii)
    if not rads or any(r <= 0.0 for r in rads):
        raise InputError("radii must be positive")
    if any(b >= a for a, b in zip(rads, rads[1:])):
        raise InputError("radii must be strictly decreasing")
    x = np.asarray(x, dtype=float)
    scalar, batch = _scalar_and_batch(f)
    fx = scalar(x)
    values = []
    for k, r in enumerate(rads):
        rng = stream(seed, 3, k)  # TAG_SLOPE
        dirs = rng.normal(size=(samples, x.size))
        norms = np.linalg.norm(dirs, axis=1)
        norms[norms == 0.0] = 1.0
        dirs /= norms[:, None]
        scale = r * (0.5 + 0.5 * rng.random(samples))  # strictly inside r
        U = x + dirs * scale[:, None]
        fu = batch(U)
        dist = np.linalg.norm(U - x, axis=1)
        quot = np.maximum(fx - fu, 0.0) / dist
        values.append(float(np.max(quot)) if quot.size else 0.0)
    return SlopeEstimate(rads, tuple(values), values[-1])


def map_slope(
    F: PolyMap,
    x: Sequence[float],
    range_samples: int = 32,
    radii: Sequence[float] = (0.05, 0.025, 0.0125),
    seed: int = 0,
    offset: float | None = None,
) -> SlopeEstimate:
    """Estimate Sl F(x): the infimum over y != F(x) of the slope of u -> ||y - F(u)||.

    Range points y are drawn on a sphere of radius `offset` (default four
    times the largest slope radius) around F(x); each gives a slope estimate
    of the residual function, and the per-radius minimum over y is reported.
    """
    x = np.asarray(x, dtype=float)
    fx = F(x)
    if offset is None:
        offset = 4.0 * max(radii)
    rng = stream(seed, 3, 10_000)  # TAG_SLOPE, offset block
    dirs = rng.normal(size=(range_samples, F.m))
    norms = np.linalg.norm(dirs, axis=1)
    norms[norms == 0.0] = 1.0
    dirs /= norms[:, None]
    per_y = []
    for j in range(range_samples):
        y = fx + offset * dirs[j]

        def resid(u: np.ndarray, y=y) -> float:
            return float(np.linalg.norm(y - F(u)))

        resid.call_batch = lambda U, y=y: np.linalg.norm(
            y - F.call_many(U), axis=1
        )
        per_y.append(
            function_slope(resid, x, radii, samples=128, seed=seed * 31 + j)
        )
    values = tuple(
        min(est.values[k] for est in per_y) for k in range(len(per_y[0].values))
    )
    return SlopeEstimate(tuple(float(r) for r in radii), values, values[-1])


# ---------------------------------------------------------------------------
# exact linear formulas

def linear_surjection_rate(A: Sequence[Sequence[float]]) -> float:
    """Surjection rate of a linear map: its smallest singular value.

    Equals inf over unit y* of ||A^T y*||, which is zero whenever the map
    cannot be onto (m > n).  Computed by one-sided Jacobi orthogonalization
    of the columns of A^T, which leaves diagonal matrices untouched and so
    returns their diagonal minimum exactly.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InputError("matrix must be two-dimensional")
    m, n = A.shape
    if m == 0 or n == 0:
        raise InputError("matrix must be nonempty")
    if m > n:
        return 0.0
    B = A.T.copy()  # n x m; singular values = column norms after orthogonalization
    for _ in range(60):
        rotated = False
        for p in range(m - 1):
            for q in range(p + 1, m):
                bp = B[:, p]
                bq = B[:, q]
                alpha = float(np.dot(bp, bp))
                beta = float(np.dot(bq, bq))
                gamma = float(np.dot(bp, bq))
                if gamma == 0.0 or abs(gamma) <= 1e-15 * math.sqrt(alpha * beta):
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (
                    abs(zeta) + math.sqrt(1.0 + zeta * zeta)
                )
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * bp - s * bq
                new_q = s * bp + c * bq
                B[:, p] = new_p
                B[:, q] = new_q
                rotated = True
        if not rotated:
            break
    return min(scaled_norm(B[:, j]) for j in range(m))


def jacobian_rate(F: PolyMap, x: Sequence[float]) -> float:
    """Surjection rate of a C1 map at x: the rate of its Jacobian."""
    return linear_surjection_rate(F.jacobian(np.asarray(x, dtype=float)))


def frobenius_norm(A: Sequence[Sequence[float]]) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.sqrt(np.sum(A * A)))


# ---------------------------------------------------------------------------
# synthesized maps for the calculus checkers

def _substitute_formula(f: Formula, exprs: list[Polynomial]) -> Formula:
    if isinstance(f, Atom):
        return Atom(f.poly.substitute(exprs), f.rel)
    if isinstance(f, Not):
        return Not(_substitute_formula(f.arg, exprs))
    if isinstance(f, And):
        return And(tuple(_substitute_formula(g, exprs) for g in f.args))
    if isinstance(f, Or):
        return Or(tuple(_substitute_formula(g, exprs) for g in f.args))
    raise InputError(f"not a formula node: {f!r}")


def shifted_map(H: MapSpec, A: Sequence[Sequence[float]]) -> MapSpec:
    """Graph of x -> H(x) + Ax, synthesized by substituting y - Ax into H.

    The range box is widened by the interval range of Ax over the domain box
    so that shifted graph points remain inside it.
    """
    A = np.asarray(A, dtype=float)
    n, m = H.n, H.m
    if A.shape != (m, n):
        raise DimensionMismatchError(f"matrix must be {m}x{n}, got {A.shape}")
    total = n + m
    exprs = [Polynomial.variable(total, i) for i in range(n)]
    for j in range(m):
        shift = Polynomial.variable(total, n + j)
        for i in range(n):
            if A[j, i] != 0.0:
                shift = shift - A[j, i] * Polynomial.variable(total, i)
        exprs.append(shift)
    graph = _substitute_formula(H.graph, exprs)
    new_box = list(H.box[:n])
    for j in range(m):
        lo_shift = sum(min(A[j, i] * b[0], A[j, i] * b[1]) for i, b in enumerate(H.box[:n]))
        hi_shift = sum(max(A[j, i] * b[0], A[j, i] * b[1]) for i, b in enumerate(H.box[:n]))
        ylo, yhi = H.box[n + j]
        new_box.append((ylo + lo_shift, yhi + hi_shift))
    pm = None
    if H.polymap is not None:
        comps = []
        for j in range(m):
            p = H.polymap.components[j]
            for i in range(n):
                if A[j, i] != 0.0:
                    p = p + A[j, i] * Polynomial.variable(n, i)
            comps.append(p)
        pm = PolyMap(n, tuple(comps))
    return MapSpec(
        name=f"{H.name}+linear",
        n=n,
        m=m,
        graph=graph,
        box=tuple(new_box),
        polymap=pm,
    )


def composed_map(H: MapSpec, G: PolyMap, x_box: Sequence[Sequence[float]]) -> MapSpec:
    """Graph of H∘G over x_box, synthesized by substituting G into H's domain
    variables (polynomial data makes the composition graph always
    representable, so no intermediate-variable sampling is needed)."""
    if G.m != H.n:
        raise DimensionMismatchError("range of G must match domain of H")
    n = G.n
    m = H.m
    total = n + m
    exprs = [G.components[i].lift(total) for i in range(G.m)]
    exprs += [Polynomial.variable(total, n + j) for j in range(m)]
    graph = _substitute_formula(H.graph, exprs)
    pm = None
    if H.polymap is not None:
        pm = PolyMap(
            n,
            tuple(p.substitute(list(G.components)) for p in H.polymap.components),
        )
    box = tuple(tuple(map(float, b)) for b in x_box) + H.box[H.n :]
    return MapSpec(
        name=f"{H.name}∘{G.n}d", n=n, m=m, graph=graph, box=box, polymap=pm
    )


def check_sum_rule(
    H: MapSpec,
    A: Sequence[Sequence[float]],
    points: Sequence[GraphPoint],
    tol: float = 0.1,
    **rate_kwargs,
) -> list[CalculusCheck]:
    """Check sur(H + A) >= sur H - ||A||_F at the given graph points of H.

    Both rates are estimated with surjection_rate; the Frobenius norm is the
    exact perturbation measure.  Rows carry lhs = sur(H + A) and
    rhs = sur H - ||A||_F and pass iff lhs >= rhs - tol.
    """
    A = np.asarray(A, dtype=float)
    F = shifted_map(H, A)
    normA = frobenius_norm(A)
    out = []
    for gp in points:
        x = np.array(gp.x)
        y_shift = tuple(float(v) for v in (np.array(gp.y) + A @ x))
        sur_h = surjection_rate(H, gp.x, gp.y, **rate_kwargs).sur_estimate
        sur_f = surjection_rate(F, gp.x, y_shift, **rate_kwargs).sur_estimate
        rhs = sur_h - normA
        out.append(
            CalculusCheck(
                kind="sum",
                point=gp.x + gp.y,
                lhs=sur_f,
                rhs=rhs,
                tol=tol,
                passed=sur_f >= rhs - tol,
            )
        )
    return out


def check_chain_rule(
    H: MapSpec,
    G: PolyMap,
    points: Sequence[GraphPoint],
    x_box: Sequence[Sequence[float]],
    tol: float = 0.1,
    **rate_kwargs,
) -> list[CalculusCheck]:
    """Check sur G * sur H <= sur(H∘G) <= ||grad G||_F * sur H at graph points
    of the composition (points carry x in G's domain and y in H°G(x)).

    sur G is the exact Jacobian rate (G is single-valued); sur H and the
    composite rate are estimated.  Two rows per point: chain_lower and
    chain_upper, both oriented lhs <= rhs + tol.
    """
    F = composed_map(H, G, x_box)
    out = []
    for gp in points:
        x = np.array(gp.x)
        z = tuple(float(v) for v in G(x))
        sur_h = surjection_rate(H, z, gp.y, **rate_kwargs).sur_estimate
        sur_f = surjection_rate(F, gp.x, gp.y, **rate_kwargs).sur_estimate
        sur_g = jacobian_rate(G, x)
        norm_g = frobenius_norm(G.jacobian(x))
        out.append(
            CalculusCheck(
                kind="chain_lower",
                point=gp.x + gp.y,
                lhs=sur_g * sur_h,
                rhs=sur_f,
                tol=tol,
                passed=sur_g * sur_h <= sur_f + tol,
            )
        )
        out.append(
            CalculusCheck(
                kind="chain_upper",
                point=gp.x + gp.y,
                lhs=sur_f,
                rhs=norm_g * sur_h,
                tol=tol,
                passed=sur_f <= norm_g * sur_h + tol,
            )
        )
    return out
