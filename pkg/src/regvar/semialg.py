"""Polynomials, sign-condition formulas, and graph sampling for set-valued maps.

A set-valued map F: R^n ->> R^m is represented by its graph, the subset of
R^(n+m) cut out by a boolean combination of polynomial sign conditions
(p < 0, p <= 0, p = 0).  Everything downstream (surjection moduli, critical
scans, asymptotic scans) interrogates the map only through membership tests
against this description, so this module is the geometric core of the package.

Conventions:
  * points in graph space are ordered (x_1..x_n, y_1..y_m);
  * equality atoms hold within a tolerance `tol_eq`; strict and non-strict
    inequalities are evaluated exactly as written, with no thickening, since
    holes cut by strict inequalities are meaningful to the regularity theory;
  * all norms are Euclidean unless stated otherwise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, InputError, SparseGraphError
from .util import TAG_GRAPH, stream

__all__ = [
    "Relation",
    "Polynomial",
    "Atom",
    "And",
    "Or",
    "Not",
    "Formula",
    "MapSpec",
    "PolyMap",
    "GraphPoint",
    "membership",
    "membership_many",
    "closure_membership",
    "residual",
    "nnf",
    "has_eq",
    "sample_graph",
    "load_mapspec",
    "mapspec_to_dict",
    "eval_polynomial",
    "differentiate_polynomial",
    "jacobian",
]


class Relation(Enum):
    """Sign condition applied to a polynomial: p < 0, p <= 0 or p = 0."""

    LT = "lt"
    LE = "le"
    EQ = "eq"


# ---------------------------------------------------------------------------
# polynomials

def _canonical_terms(
    num_vars: int, terms: Iterable[tuple[float, Sequence[int]]]
) -> tuple[tuple[float, tuple[int, ...]], ...]:
    bucket: dict[tuple[int, ...], list[float]] = {}
    for coeff, exps in terms:
        e = tuple(int(k) for k in exps)
        if len(e) != num_vars:
            raise DimensionMismatchError(
                f"term exponent vector {e} has length {len(e)}, expected {num_vars}"
            )
        if any(k < 0 for k in e):
            raise InputError("negative exponents are not allowed")
        bucket.setdefault(e, []).append(float(coeff))
    out = []
    for e in sorted(bucket):
        c = math.fsum(bucket[e])
        if c != 0.0:
            out.append((c, e))
    return tuple(out)


@dataclass(frozen=True)
class Polynomial:
    """Sparse multivariate polynomial keyed by exponent vectors.

    Terms are kept merged, zero-free and sorted, so two polynomials built
    from the same mathematical content compare equal and evaluation order
    is deterministic.
    """

    num_vars: int
    terms: tuple[tuple[float, tuple[int, ...]], ...]

    @staticmethod
    def from_terms(
        num_vars: int, terms: Iterable[tuple[float, Sequence[int]]]
    ) -> "Polynomial":
        return Polynomial(num_vars, _canonical_terms(num_vars, terms))

    @staticmethod
    def zero(num_vars: int) -> "Polynomial":
        return Polynomial(num_vars, ())

    @staticmethod
    def constant(num_vars: int, c: float) -> "Polynomial":
        return Polynomial.from_terms(num_vars, [(c, (0,) * num_vars)])

    @staticmethod
    def variable(num_vars: int, index: int) -> "Polynomial":
        if not 0 <= index < num_vars:
            raise DimensionMismatchError(f"variable index {index} out of range")
        e = [0] * num_vars
        e[index] = 1
        return Polynomial.from_terms(num_vars, [(1.0, e)])

    # -- algebra ------------------------------------------------------------

    def __add__(self, other: "Polynomial | float | int") -> "Polynomial":
        other = self._coerce(other)
        return Polynomial.from_terms(self.num_vars, list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.num_vars, tuple((-c, e) for c, e in self.terms))

    def __sub__(self, other: "Polynomial | float | int") -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other: "Polynomial | float | int") -> "Polynomial":
        return self._coerce(other) + (-self)

    def __mul__(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, (int, float)):
            return Polynomial.from_terms(
                self.num_vars, [(c * other, e) for c, e in self.terms]
            )
        other = self._coerce(other)
        prods = []
        for c1, e1 in self.terms:
            for c2, e2 in other.terms:
                prods.append((c1 * c2, tuple(a + b for a, b in zip(e1, e2))))
        return Polynomial.from_terms(self.num_vars, prods)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise InputError("polynomial powers must be nonnegative integers")
        out = Polynomial.constant(self.num_vars, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def _coerce(self, other: "Polynomial | float | int") -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.num_vars != self.num_vars:
                raise DimensionMismatchError("mixing polynomials over different spaces")
            return other
        return Polynomial.constant(self.num_vars, float(other))

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, point: Sequence[float]) -> float:
        """Value at a single point, summed with compensated summation."""
        if len(point) != self.num_vars:
            raise DimensionMismatchError(
                f"point has {len(point)} coordinates, expected {self.num_vars}"
            )
        vals = []
        for c, e in self.terms:
            v = c
            for xi, k in zip(point, e):
                if k:
                    v *= xi**k
            vals.append(v)
        return math.fsum(vals)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized value on an (N, num_vars) array; fixed summation order."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.num_vars:
            raise DimensionMismatchError("points must be (N, num_vars)")
        acc = np.zeros(pts.shape[0])
        for c, e in self.terms:
            term = np.full(pts.shape[0], c)
            for j, k in enumerate(e):
                if k == 1:
                    term = term * pts[:, j]
                elif k > 1:
                    term = term * pts[:, j] ** k
            acc = acc + term
        return acc

    def differentiate(self, var: int) -> "Polynomial":
        if not 0 <= var < self.num_vars:
            raise DimensionMismatchError(f"variable index {var} out of range")
        terms = []
        for c, e in self.terms:
            if e[var] > 0:
                e2 = list(e)
                e2[var] -= 1
                terms.append((c * e[var], tuple(e2)))
        return Polynomial.from_terms(self.num_vars, terms)

    def gradient(self) -> list["Polynomial"]:
        return [self.differentiate(j) for j in range(self.num_vars)]

    def substitute(self, exprs: Sequence["Polynomial"]) -> "Polynomial":
        """Compose: replace variable i by exprs[i] (all over a common space)."""
        if len(exprs) != self.num_vars:
            raise DimensionMismatchError("need one replacement polynomial per variable")
        target_vars = exprs[0].num_vars
        if any(p.num_vars != target_vars for p in exprs):
            raise DimensionMismatchError("replacement polynomials disagree on space")
        out = Polynomial.zero(target_vars)
        for c, e in self.terms:
            term = Polynomial.constant(target_vars, c)
            for j, k in enumerate(e):
                if k:
                    term = term * exprs[j] ** k
            out = out + term
        return out

    def lift(self, total_vars: int, offset: int = 0) -> "Polynomial":
        """Reinterpret over a larger space: variable i becomes variable offset+i."""
        if offset < 0 or offset + self.num_vars > total_vars:
            raise DimensionMismatchError("lift does not fit in the target space")
        terms = []
        for c, e in self.terms:
            e2 = (0,) * offset + e + (0,) * (total_vars - offset - self.num_vars)
            terms.append((c, e2))
        return Polynomial.from_terms(total_vars, terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)


# ---------------------------------------------------------------------------
# formulas

@dataclass(frozen=True)
class Atom:
    poly: Polynomial
    rel: Relation


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Not:
    arg: "Formula"


Formula = Union[Atom, And, Or, Not]


def conj(*args: Formula) -> Formula:
    return And(tuple(args))


def disj(*args: Formula) -> Formula:
    return Or(tuple(args))


def atom_lt(p: Polynomial) -> Atom:
    return Atom(p, Relation.LT)


def atom_le(p: Polynomial) -> Atom:
    return Atom(p, Relation.LE)


def atom_eq(p: Polynomial) -> Atom:
    return Atom(p, Relation.EQ)


def formula_num_vars(f: Formula) -> int:
    for a in atoms_of(f):
        return a.poly.num_vars
    raise InputError("formula has no atoms")


def atoms_of(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from atoms_of(f.arg)
    elif isinstance(f, (And, Or)):
        for g in f.args:
            yield from atoms_of(g)
    else:
        raise InputError(f"not a formula node: {f!r}")


def has_eq(f: Formula) -> bool:
    return any(a.rel is Relation.EQ for a in atoms_of(f))


def eval_polynomial(p: Polynomial, point: Sequence[float]) -> float:
    """Evaluate p at the point (compensated term-by-term summation)."""
    return p.evaluate(point)


def differentiate_polynomial(p: Polynomial, var: int) -> Polynomial:
    """Exact partial derivative of p with respect to variable `var`."""
    return p.differentiate(var)


def jacobian(F: "PolyMap", x: Sequence[float]) -> np.ndarray:
    """Jacobian matrix of a polynomial map at x, entry (i, j) = dF_i/dx_j."""
    return F.jacobian(x)


def membership(f: Formula, point: Sequence[float], tol_eq: float = 0.0) -> bool:
    """Does `point` satisfy the formula, with EQ atoms read as |p| <= tol_eq?"""
    if isinstance(f, Atom):
        v = f.poly.evaluate(point)
        if f.rel is Relation.LT:
            return v < 0.0
        if f.rel is Relation.LE:
            return v <= 0.0
        return abs(v) <= tol_eq
    if isinstance(f, And):
        return all(membership(g, point, tol_eq) for g in f.args)
    if isinstance(f, Or):
        return any(membership(g, point, tol_eq) for g in f.args)
    if isinstance(f, Not):
        return not membership(f.arg, point, tol_eq)
    raise InputError(f"not a formula node: {f!r}")


def membership_many(f: Formula, points: np.ndarray, tol_eq: float = 0.0) -> np.ndarray:
    """Vectorized membership over an (N, d) array of points."""
    pts = np.asarray(points, dtype=float)
    if isinstance(f, Atom):
        v = f.poly.evaluate_many(pts)
        if f.rel is Relation.LT:
            return v < 0.0
        if f.rel is Relation.LE:
            return v <= 0.0
        return np.abs(v) <= tol_eq
    if isinstance(f, And):
        out = np.ones(pts.shape[0], dtype=bool)
        for g in f.args:
            out &= membership_many(g, pts, tol_eq)
        return out
    if isinstance(f, Or):
        out = np.zeros(pts.shape[0], dtype=bool)
        for g in f.args:
            out |= membership_many(g, pts, tol_eq)
        return out
    if isinstance(f, Not):
        return ~membership_many(f.arg, pts, tol_eq)
    raise InputError(f"not a formula node: {f!r}")


def nnf(f: Formula) -> Formula:
    """Negation normal form; negations survive only on EQ atoms."""
    if isinstance(f, Atom):
        return f
    if isinstance(f, And):
        return And(tuple(nnf(g) for g in f.args))
    if isinstance(f, Or):
        return Or(tuple(nnf(g) for g in f.args))
    g = f.arg
    if isinstance(g, Not):
        return nnf(g.arg)
    if isinstance(g, And):
        return Or(tuple(nnf(Not(h)) for h in g.args))
    if isinstance(g, Or):
        return And(tuple(nnf(Not(h)) for h in g.args))
    if isinstance(g, Atom):
        if g.rel is Relation.LT:
            return Atom(-g.poly, Relation.LE)
        if g.rel is Relation.LE:
            return Atom(-g.poly, Relation.LT)
        return Not(g)
    raise InputError(f"not a formula node: {g!r}")


def closure_membership(f: Formula, point: Sequence[float], tol: float) -> bool:
    """Outer test for membership in the closure of the described set.

    Strict inequalities are relaxed to p <= tol, so limit points of the set
    (which may violate strictness exactly on the boundary) are admitted.
    """
    g = nnf(f)

    def rec(h: Formula) -> bool:
        if isinstance(h, Atom):
            v = h.poly.evaluate(point)
            if h.rel is Relation.EQ:
                return abs(v) <= tol
            return v <= tol
        if isinstance(h, Not):  # negated EQ; its closure is everything
            return True
        if isinstance(h, And):
            return all(rec(c) for c in h.args)
        return any(rec(c) for c in h.args)

    return rec(g)


def residual(f: Formula, point: Sequence[float], tol_eq: float) -> float:
    """Nonnegative violation measure; zero iff membership holds up to ties.

    Computed on the negation normal form: AND sums child residuals, OR takes
    the best child, so descent on this value is pulled toward the nearest
    disjunct.
    """
    return _residual_nnf(nnf(f), point, tol_eq)


def _residual_nnf(f: Formula, point: Sequence[float], tol_eq: float) -> float:
    if isinstance(f, Atom):
        v = f.poly.evaluate(point)
        if f.rel is Relation.EQ:
            return max(0.0, abs(v) - tol_eq)
        return max(0.0, v)
    if isinstance(f, Not):
        v = f.arg.poly.evaluate(point)
        return max(0.0, tol_eq - abs(v))
    if isinstance(f, And):
        return math.fsum(_residual_nnf(g, point, tol_eq) for g in f.args)
    if isinstance(f, Or):
        return min(_residual_nnf(g, point, tol_eq) for g in f.args)
    raise InputError(f"not a formula node: {f!r}")


def _branch_leaves(f: Formula, rng: np.random.Generator) -> list[Formula]:
    """Pick one disjunct per OR node (uniformly) and return its atomic leaves."""
    if isinstance(f, (Atom, Not)):
        return [f]
    if isinstance(f, And):
        out: list[Formula] = []
        for g in f.args:
            out.extend(_branch_leaves(g, rng))
        return out
    if isinstance(f, Or):
        pick = int(rng.integers(len(f.args)))
        return _branch_leaves(f.args[pick], rng)
    raise InputError(f"not a formula node: {f!r}")


# ---------------------------------------------------------------------------
# maps and graph points

@dataclass(frozen=True)
class PolyMap:
    """Single-valued polynomial map R^n -> R^m given by component polynomials."""

    n: int
    components: tuple[Polynomial, ...]
    _jac: list | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n <= 0:
            raise InputError("domain dimension must be positive")
        for p in self.components:
            if p.num_vars != self.n:
                raise DimensionMismatchError(
                    "component polynomial over wrong number of variables"
                )

    @property
    def m(self) -> int:
        return len(self.components)

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        return np.array([p.evaluate(x) for p in self.components])

    def call_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.stack([p.evaluate_many(X) for p in self.components], axis=1)

    def jacobian_polys(self) -> list[list[Polynomial]]:
        if self._jac is None:
            rows = [[p.differentiate(j) for j in range(self.n)] for p in self.components]
            object.__setattr__(self, "_jac", rows)
        return self._jac

    def jacobian(self, x: Sequence[float]) -> np.ndarray:
        rows = self.jacobian_polys()
        return np.array([[q.evaluate(x) for q in row] for row in rows])

    def as_mapspec(self, box: Sequence[Sequence[float]], name: str) -> "MapSpec":
        """Graph description y_i - F_i(x) = 0 over the given (n+m)-box."""
        total = self.n + self.m
        atoms = []
        for i, p in enumerate(self.components):
            q = Polynomial.variable(total, self.n + i) - p.lift(total)
            atoms.append(atom_eq(q))
        graph: Formula = atoms[0] if len(atoms) == 1 else And(tuple(atoms))
        return MapSpec(name=name, n=self.n, m=self.m, graph=graph,
                       box=tuple(tuple(map(float, b)) for b in box), polymap=self)


@dataclass(frozen=True)
class MapSpec:
    """A set-valued map presented through a formula for its graph.

    `box` bounds the region of graph space that sampling and scanning may
    explore; the formula itself is global.  When the graph is induced by a
    PolyMap the original map is kept alongside, which lets estimators use
    direct evaluation instead of formula membership where that is equivalent.
    """

    name: str
    n: int
    m: int
    graph: Formula
    box: tuple[tuple[float, float], ...]
    polymap: PolyMap | None = None

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise InputError("dimensions must be positive")
        if len(self.box) != self.n + self.m:
            raise DimensionMismatchError(
                f"box has {len(self.box)} intervals, expected {self.n + self.m}"
            )
        for lo, hi in self.box:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise InputError(f"bad box interval ({lo}, {hi})")
        nv = formula_num_vars(self.graph)
        if nv != self.n + self.m:
            raise DimensionMismatchError(
                f"graph formula over {nv} variables, expected {self.n + self.m}"
            )
        if self.polymap is not None and (
            self.polymap.n != self.n or self.polymap.m != self.m
        ):
            raise DimensionMismatchError("attached polynomial map has wrong shape")

    @property
    def x_box(self) -> tuple[tuple[float, float], ...]:
        return self.box[: self.n]

    @property
    def y_box(self) -> tuple[tuple[float, float], ...]:
        return self.box[self.n :]

    def range_diameter(self) -> float:
        return math.sqrt(math.fsum((hi - lo) ** 2 for lo, hi in self.y_box))

    def membership(self, point: Sequence[float], tol_eq: float = 0.0) -> bool:
        return membership(self.graph, point, tol_eq)

    def membership_many(self, points: np.ndarray, tol_eq: float = 0.0) -> np.ndarray:
        return membership_many(self.graph, points, tol_eq)


@dataclass(frozen=True)
class GraphPoint:
    """A point (x, y) of a graph, stored as plain tuples for hashability."""

    x: tuple[float, ...]
    y: tuple[float, ...]

    @property
    def point(self) -> np.ndarray:
        return np.array(self.x + self.y)

    @staticmethod
    def from_array(arr: Sequence[float], n: int) -> "GraphPoint":
        a = tuple(float(v) for v in arr)
        return GraphPoint(a[:n], a[n:])


# ---------------------------------------------------------------------------
# sampling

def _descend_to_branch(
    leaves: list[Formula],
    start: np.ndarray,
    box: Sequence[tuple[float, float]],
    tol_eq: float,
    budget: int,
) -> np.ndarray | None:
    """Projected coordinate descent driving the branch residual to zero.

    Moves one coordinate at a time with a halving step, clipped to the box.
    Returns the refined point, or None if the budget ran out first.
    """

    def res(z: np.ndarray) -> float:
        return math.fsum(_residual_nnf(leaf, z, tol_eq) for leaf in leaves)

    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    z = np.clip(np.asarray(start, dtype=float).copy(), lo, hi)
    r = res(z)
    step = 0.25 * float(np.max(hi - lo))
    for _ in range(budget):
        if r == 0.0:
            return z
        improved = False
        for j in range(z.size):
            for s in (step, -step):
                zj = min(max(z[j] + s, lo[j]), hi[j])
                if zj == z[j]:
                    continue
                old = z[j]
                z[j] = zj
                r2 = res(z)
                if r2 < r:
                    r = r2
                    improved = True
                    break
                z[j] = old
        if not improved:
            step *= 0.5
            if step < 1e-18:
                break
    return z if r == 0.0 else None


def sample_graph(
    spec: MapSpec,
    count: int,
    seed: int = 0,
    tol_eq: float = 1e-9,
    *,
    max_trials: int | None = None,
    descent_budget: int = 400,
) -> list[GraphPoint]:
    """Deterministic rejection sampling of graph points inside spec.box.

    Candidate i draws its coordinates from an independent stream keyed by
    (seed, i), so the output is a pure function of the inputs no matter how
    the loop is executed.  Graphs with equality atoms are sampled by picking
    one disjunct per OR node at random and running projected coordinate
    descent until every selected equality holds within tol_eq; candidates
    that fail to refine within the budget are discarded.  Descent runs for
    every equality-branch candidate, which is what makes isolated branch
    components (points the continuous part never touches) reachable.  Maps
    carrying a PolyMap are sampled directly through y = F(x).

    Raises SparseGraphError when fewer than `count` points were accepted
    after the trial budget.
    """
    if count < 0:
        raise InputError("count must be nonnegative")
    if count == 0:
        return []
    trials = max_trials if max_trials is not None else max(400, 250 * count)
    lo = np.array([b[0] for b in spec.box])
    hi = np.array([b[1] for b in spec.box])
    n = spec.n
    accepted: list[GraphPoint] = []

    if spec.polymap is not None:
        F = spec.polymap
        ylo, yhi = lo[n:], hi[n:]
        for i in range(trials):
            rng = stream(seed, TAG_GRAPH, i)
            x = lo[:n] + rng.random(n) * (hi[:n] - lo[:n])
            y = F(x)
            if np.all(y >= ylo) and np.all(y <= yhi):
                accepted.append(GraphPoint(tuple(x), tuple(float(v) for v in y)))
                if len(accepted) == count:
                    return accepted
        raise SparseGraphError(len(accepted), count, trials)

    graph_nnf = nnf(spec.graph)
    eq_present = has_eq(spec.graph)

    for i in range(trials):
        rng = stream(seed, TAG_GRAPH, i)
        pt = lo + rng.random(len(spec.box)) * (hi - lo)
        if not eq_present:
            if membership(spec.graph, pt, tol_eq):
                accepted.append(GraphPoint.from_array(pt, n))
        else:
            leaves = _branch_leaves(graph_nnf, rng)
            branch_has_eq = any(
                isinstance(lf, Atom) and lf.rel is Relation.EQ for lf in leaves
            )
            if branch_has_eq:
                refined = _descend_to_branch(
                    leaves, pt, spec.box, tol_eq, descent_budget
                )
                if refined is not None and membership(spec.graph, refined, tol_eq):
                    accepted.append(GraphPoint.from_array(refined, n))
            else:
                if membership(spec.graph, pt, tol_eq):
                    accepted.append(GraphPoint.from_array(pt, n))
        if len(accepted) == count:
            return accepted
    raise SparseGraphError(len(accepted), count, trials)


# ---------------------------------------------------------------------------
# JSON interchange

def polynomial_to_dict(p: Polynomial) -> dict:
    return {
        "vars": p.num_vars,
        "terms": [{"c": c, "e": list(e)} for c, e in p.terms],
    }


def polynomial_from_dict(d: dict) -> Polynomial:
    try:
        nv = int(d["vars"])
        terms = [(float(t["c"]), [int(k) for k in t["e"]]) for t in d["terms"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed polynomial object: {exc}") from exc
    return Polynomial.from_terms(nv, terms)


def formula_to_dict(f: Formula) -> dict:
    if isinstance(f, Atom):
        return {"poly": polynomial_to_dict(f.poly), "rel": f.rel.value}
    if isinstance(f, Not):
        return {"op": "not", "args": [formula_to_dict(f.arg)]}
    op = "and" if isinstance(f, And) else "or"
    return {"op": op, "args": [formula_to_dict(g) for g in f.args]}


def formula_from_dict(d: dict) -> Formula:
    if "poly" in d:
        try:
            rel = Relation(d["rel"])
        except (KeyError, ValueError) as exc:
            raise InputError(f"atom relation must be one of lt/le/eq: {exc}") from exc
        return Atom(polynomial_from_dict(d["poly"]), rel)
    op = d.get("op")
    args = d.get("args", [])
    if op == "not":
        if len(args) != 1:
            raise InputError("'not' takes exactly one argument")
        return Not(formula_from_dict(args[0]))
    if op in ("and", "or"):
        if not args:
            raise InputError(f"'{op}' needs at least one argument")
        children = tuple(formula_from_dict(a) for a in args)
        return And(children) if op == "and" else Or(children)
    raise InputError(f"unknown formula node: {d!r}")


def mapspec_to_dict(spec: MapSpec) -> dict:
    d: dict = {
        "name": spec.name,
        "n": spec.n,
        "m": spec.m,
        "box": [list(b) for b in spec.box],
    }
    if spec.polymap is not None:
        d["components"] = [polynomial_to_dict(p) for p in spec.polymap.components]
    else:
        d["graph"] = formula_to_dict(spec.graph)
    return d


def load_mapspec(source: "str | Path | dict") -> MapSpec:
    """Build a MapSpec from a JSON file path or an already-parsed dict.

    Two layouts are accepted: {"graph": <formula node>} for general maps, and
    {"components": [<polynomial>, ...]} for single-valued polynomial maps,
    whose graph becomes the system y_i - F_i(x) = 0.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise InputError(f"spec file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"spec file is not valid JSON: {exc}") from exc
    else:
        data = source
    if not isinstance(data, dict):
        raise InputError("map spec must be a JSON object")
    try:
        name = str(data["name"])
        n = int(data["n"])
        m = int(data["m"])
        box = tuple(tuple(float(v) for v in b) for b in data["box"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"map spec missing or malformed field: {exc}") from exc
    if "components" in data:
        comps = tuple(polynomial_from_dict(p) for p in data["components"])
        if len(comps) != m:
            raise InputError(f"expected {m} components, found {len(comps)}")
        pm = PolyMap(n, comps)
        return pm.as_mapspec(box, name)
    if "graph" not in data:
        raise InputError("map spec needs either 'graph' or 'components'")
    graph = formula_from_dict(data["graph"])
    return MapSpec(name=name, n=n, m=m, graph=graph, box=box)
