"""Radial compactification and the hunt for asymptotically critical values.

A value y is asymptotically critical for F relative to a weight eta when
eta(||x_v||) * sur F(x_v|y_v) tends to zero along graph points with
||x_v|| -> infinity.  The scan operationalizes the limit over geometric
shells of ||x||; the compactification machinery transplants F to the open
unit ball via x = psi(||u||) u/||u||, where phi (with inverse psi) is a
bounded increasing change of variable and eta(t) = 1/phi'(t) is the weight
it induces.  A composition bound (rate of x -> H(rho(x) x)) and a numeric
check of the compactified-rate inequality round out the module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DimensionMismatchError,
    DomainError,
    InputError,
    SparseGraphError,
)
from .regularity import (
    CalculusCheck,
    _CoverEvaluator,
    _substitute_formula,
    jacobian_rate,
    surjection_rate,
)
from .semialg import GraphPoint, MapSpec, Polynomial, PolyMap, sample_graph
from .util import TAG_SHELL, UnionFind, parallel_map, stream

__all__ = [
    "CompactificationSpec",
    "CompactifiedMap",
    "AsymptoticScanResult",
    "CompactifiedBoundReport",
    "DEFAULT_SHELLS",
    "default_compactification",
    "linear_eta",
    "compactify_map",
    "to_unit_ball",
    "from_unit_ball",
    "asymptotic_scan",
    "scaled_map",
    "check_prop7_bound",
    "check_compactified_bound",
]

DEFAULT_SHELLS = tuple((float(2**k), float(2 ** (k + 1))) for k in range(2, 8))


@dataclass(frozen=True)
class CompactificationSpec:
    """A bounded change of variable phi with inverse psi and weight eta.

    phi: [0, inf) -> [0, 1) strictly increasing with phi(0) = 0; psi is its
    inverse; eta(t) = 1/phi'(t).  All callables accept scalars or numpy
    arrays.  dphi and dpsi are the derivatives, used by checks.
    """

    name: str
    phi: Callable
    psi: Callable
    eta: Callable
    dphi: Callable
    dpsi: Callable


def default_compactification() -> CompactificationSpec:
    """phi(t) = t/(1+t), psi(s) = s/(1-s), eta(t) = (1+t)^2."""
    return CompactificationSpec(
        name="phi-default",
        phi=lambda t: t / (1.0 + t),
        psi=lambda s: s / (1.0 - s),
        eta=lambda t: (1.0 + t) ** 2,
        dphi=lambda t: 1.0 / (1.0 + t) ** 2,
        dpsi=lambda s: 1.0 / (1.0 - s) ** 2,
    )


def linear_eta(t):
    """The weight eta(t) = t of the classical asymptotic criticality test."""
    return t


def to_unit_ball(x: Sequence[float], comp: CompactificationSpec) -> np.ndarray:
    """u = phi(||x||) x / ||x||, with 0 mapped to 0."""
    x = np.asarray(x, dtype=float)
    t = float(np.linalg.norm(x))
    if t == 0.0:
        return np.zeros_like(x)
    return (float(comp.phi(t)) / t) * x


def from_unit_ball(u: Sequence[float], comp: CompactificationSpec) -> np.ndarray:
    """x = psi(||u||) u / ||u||; requires 0 < ||u|| < 1."""
    u = np.asarray(u, dtype=float)
    s = float(np.linalg.norm(u))
    if s == 0.0 or s >= 1.0:
        raise DomainError("u must satisfy 0 < ||u|| < 1")
    return (float(comp.psi(s)) / s) * u


class CompactifiedMap:
    """The transplanted map G(u) = F(psi(||u||) u/||u||) on the unit ball.

    Exposes the same duck interface the coverage oracle consumes (n, m, box,
    cover_many) by delegating every query to the original spec's graph at
    the pulled-back point; rows outside the open punctured ball are simply
    never covered.  Scalar membership raises a domain error there instead,
    matching the pointwise contract.
    """

    def __init__(self, spec: MapSpec, comp: CompactificationSpec):
        if spec.graph is None:
            raise InputError("compactification needs a graph-backed spec")
        self.spec = spec
        self.comp = comp
        self.n = spec.n
        self.m = spec.m
        edge = 1.0 - 1e-9
        self.box = tuple((-edge, edge) for _ in range(spec.n)) + spec.box[spec.n :]
        self.polymap = None
        self.graph = None
        self._cover = _CoverEvaluator(spec.graph)

    def _pull_back(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        norms = np.linalg.norm(U, axis=1)
        valid = (norms > 0.0) & (norms < 1.0)
        safe = np.where(valid, norms, 0.5)
        X = U * (self.comp.psi(safe) / safe)[:, None]
        return X, valid

    def cover_many(self, pts: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(pts, dtype=float)
        X, valid = self._pull_back(pts[:, : self.n])
        mapped = np.empty_like(pts)
        mapped[:, : self.n] = X
        mapped[:, self.n :] = pts[:, self.n :]
        ok, res = self._cover(mapped, tol)
        return ok & valid, np.where(valid, res, np.inf)

    def grid_evaluator(self, U: np.ndarray, n: int) -> "_PulledBackGrid":
        """Fresh cross-product cover bound to the pulled-back domain lattice."""
        X, valid = self._pull_back(np.asarray(U, dtype=float))
        ev = _CoverEvaluator(self.spec.graph)
        ev.bind_domain(X, n)
        return _PulledBackGrid(ev, valid, self.cover_many)

    def membership(self, point: Sequence[float], tol_eq: float = 0.0) -> bool:
        point = np.asarray(point, dtype=float)
        if point.size != self.n + self.m:
            raise DimensionMismatchError(
                f"point has {point.size} coordinates, map needs {self.n + self.m}"
            )
        x = from_unit_ball(point[: self.n], self.comp)
        return self.spec.membership(
            np.concatenate([x, point[self.n :]]), tol_eq
        )


class _PulledBackGrid:
    """Grid-mode cover for a compactified map: rows outside the punctured
    unit ball are masked as never covered with infinite residual."""

    def __init__(self, ev, valid: np.ndarray, row_cover):
        self._ev = ev
        self._valid = valid
        self._row_cover = row_cover

    def grid(self, V: np.ndarray, tol: float, sl: slice = slice(None)):
        ok, res = self._ev.grid(V, tol, sl)
        vm = self._valid[sl][None, :]
        return ok & vm, np.where(vm, res, np.inf)

    def __call__(self, pts: np.ndarray, tol: float):
        return self._row_cover(pts, tol)


def compactify_map(spec: MapSpec, comp: CompactificationSpec) -> CompactifiedMap:
    return CompactifiedMap(spec, comp)


# ---------------------------------------------------------------------------
# asymptotic scan

@dataclass(frozen=True)
class AsymptoticScanResult:
    """Clusters of values whose weighted rates decay across shells.

    Each candidate is (y, decay_trace): y a representative range point and
    decay_trace the per-shell minima of eta(||x||)*rate over the cluster's
    records, one entry per shell (nan where the cluster has no sample); the
    entry at the last populated shell is below the scan threshold.  Shells
    with no graph sample at all are listed in `skipped`, and shell_minima
    holds the global per-shell score minimum over every sampled point.
    """

    candidates: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]
    shells: tuple[tuple[float, float], ...]
    eta_name: str
    threshold: float
    skipped: tuple[tuple[float, float], ...]
    shell_minima: tuple[float, ...] = ()


def _shell_records_polymap(
    F: PolyMap,
    eta: Callable,
    shell: tuple[float, float],
    budget: int,
    seed: int,
    index: int,
) -> list[tuple[np.ndarray, np.ndarray, float]]:
    r_lo, r_hi = shell
    rng = stream(seed, TAG_SHELL, index)
    out: list[tuple[np.ndarray, np.ndarray, float]] = []
    for _ in range(4):
        X = rng.uniform(-r_hi, r_hi, size=(4 * budget, F.n))
        norms = np.linalg.norm(X, axis=1)
        X = X[(norms >= r_lo) & (norms <= r_hi)]
        for x in X[: budget - len(out)]:
            rate = jacobian_rate(F, x)
            out.append((x, F(x), eta(float(np.linalg.norm(x))) * rate))
        if len(out) >= budget:
            break
    return out


def _shell_records_mapspec(
    spec: MapSpec,
    eta: Callable,
    shell: tuple[float, float],
    budget: int,
    threshold: float,
    seed: int,
    index: int,
    rate_kwargs: dict | None,
) -> list[tuple[np.ndarray, np.ndarray, float]] | None:
    r_lo, r_hi = shell
    n = spec.n
    new_box = []
    for lo, hi in spec.box[:n]:
        nl, nh = max(lo, -r_hi), min(hi, r_hi)
        if not nl < nh:
            return None
        new_box.append((nl, nh))
    sub = replace(spec, box=tuple(new_box) + spec.box[n:])
    shell_seed = seed * 1_000_003 + 7919 * index + 13
    want = 2 * budget
    # Equality descent clips to the sampling box, so on a 1-d domain the two
    # shell segments are sampled as separate boxes; a single wide box would
    # let descent drift toward small |x| and starve the annulus filter.
    if n == 1:
        lo0, hi0 = spec.box[0]
        segments = []
        for a, b in ((-r_hi, -r_lo), (r_lo, r_hi)):
            sl, sh = max(lo0, a), min(hi0, b)
            if sl < sh:
                segments.append((sl, sh))
        if not segments:
            return None
        sources = [replace(spec, box=(seg,) + spec.box[n:]) for seg in segments]
    else:
        sources = [sub]
    gps = []
    for j, src in enumerate(sources):
        seg_seed = shell_seed + 104_729 * j
        goal = max(1, want // len(sources))
        try:
            gps.extend(sample_graph(src, goal, seed=seg_seed, tol_eq=1e-9))
        except SparseGraphError as err:
            if err.achieved:
                gps.extend(sample_graph(src, err.achieved, seed=seg_seed, tol_eq=1e-9))
    if not gps:
        return None
    # resolution fine enough that the estimator floor stays below the
    # decay threshold even after the eta(||x||) amplification
    f_res = max(min(0.125, threshold / (4.0 * float(eta(r_hi)))), 1e-6)
    kwargs = dict(
        schedule=(0.5, 0.25),
        samples_per_level=0,
        lambda_factors=(1.0, 0.5),
        seed=shell_seed,
        resolution_rule=lambda s, d, f=f_res: d * f,
    )
    if rate_kwargs:
        kwargs.update(rate_kwargs)
    out = []
    seen = set()
    for gp in gps:
        x = np.array(gp.x)
        t = float(np.linalg.norm(x))
        if not r_lo <= t <= r_hi or (gp.x, gp.y) in seen:
            continue
        seen.add((gp.x, gp.y))
        # the rate is a property of the map, so its neighborhoods use the
        # original domain box; only sampling is confined to the shell
        rate = surjection_rate(spec, gp.x, gp.y, **kwargs).sur_estimate
        out.append((x, np.array(gp.y), float(eta(t)) * rate))
        if len(out) >= budget:
            break
    return out or None


def asymptotic_scan(
    spec,
    eta: Callable,
    shells: Sequence[tuple[float, float]] | None = None,
    per_shell_budget: int = 48,
    threshold: float = 0.02,
    seed: int = 0,
    *,
    eta_name: str = "custom",
    y_cluster_radius: float = 0.05,
    rate_kwargs: dict | None = None,
) -> AsymptoticScanResult:
    """Scan geometric shells of ||x|| for values with decaying weighted rate.

    Per shell [R_lo, R_hi], graph points are sampled in the annulus (the
    spec's domain box is overridden by [-R_hi, R_hi]^n, intersected with the
    original box for graph-backed specs) and each point contributes the
    score eta(||x||) * rate, with the rate exact for polynomial maps and
    estimated otherwise.  Sampled values are clustered at y_cluster_radius;
    a cluster is a candidate when it appears in each of the last three
    populated shells with per-shell minima non-increasing up to an
    estimator-floor slack of threshold/4 and a final minimum below
    `threshold`.  Shells that yield no sample are skipped and reported.
    """
    sh = tuple(
        (float(a), float(b)) for a, b in (shells if shells is not None else DEFAULT_SHELLS)
    )
    if not sh or any(a <= 0.0 or a >= b for a, b in sh):
        raise InputError("shells must be positive with R_lo < R_hi")
    if any(b > a2 for (_, b), (a2, _) in zip(sh, sh[1:])):
        raise InputError("shells must be increasing and non-overlapping")
    if threshold <= 0.0 or per_shell_budget <= 0:
        raise InputError("threshold and per_shell_budget must be positive")
    pm = spec if isinstance(spec, PolyMap) else getattr(spec, "polymap", None)

    def run_shell(k: int):
        if pm is not None:
            recs = _shell_records_polymap(pm, eta, sh[k], per_shell_budget, seed, k)
            return recs or None
        return _shell_records_mapspec(
            spec, eta, sh[k], per_shell_budget, threshold, seed, k, rate_kwargs
        )

    per_shell = parallel_map(run_shell, list(range(len(sh))))
    skipped = tuple(sh[k] for k, recs in enumerate(per_shell) if recs is None)
    populated = [k for k, recs in enumerate(per_shell) if recs is not None]
    shell_minima = tuple(
        min(s for _, _, s in per_shell[k]) if per_shell[k] is not None else math.nan
        for k in range(len(sh))
    )
    records: list[tuple[int, np.ndarray, float]] = []
    for k in populated:
        for x, y, score in per_shell[k]:
            records.append((k, y, score))
    if not records or len(populated) < 3:
        return AsymptoticScanResult(
            (), sh, eta_name, threshold, skipped, shell_minima
        )

    Y = np.array([y for _, y, _ in records])
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    uf = UnionFind(Y.shape[0])
    tree = cKDTree(Y)
    for i, j in tree.query_pairs(y_cluster_radius):
        uf.union(i, j)
    last3 = populated[-3:]
    candidates = []
    for group in uf.groups():
        mins: dict[int, float] = {}
        for i in group:
            k, _, score = records[i]
            mins[k] = min(mins.get(k, math.inf), score)
        if any(k not in mins for k in last3):
            continue
        # Estimated rates bottom out at a floor near threshold/4 by the
        # resolution choice above, so decay below that is unresolvable and
        # the tail comparison carries the floor as slack.
        tail = [mins[k] for k in last3]
        slack = 0.25 * threshold
        if any(b > a + slack for a, b in zip(tail, tail[1:])):
            continue
        if tail[-1] >= threshold:
            continue
        final_members = [
            i for i in group if records[i][0] == populated[-1]
        ]
        rep = min(final_members, key=lambda i: records[i][2])
        trace = tuple(mins.get(k, math.nan) for k in range(len(sh)))
        candidates.append((tuple(float(v) for v in records[rep][1]), trace))
    candidates.sort(key=lambda c: c[0])
    return AsymptoticScanResult(
        tuple(candidates), sh, eta_name, threshold, skipped, shell_minima
    )


# ---------------------------------------------------------------------------
# composition with a scalar field: L(x) = H(rho(x) x)

def scaled_map(H: MapSpec, rho: Polynomial, x_box: Sequence[Sequence[float]]) -> MapSpec:
    """Graph of x -> H(rho(x) x) over x_box, by polynomial substitution."""
    n, m = H.n, H.m
    if rho.num_vars != n:
        raise DimensionMismatchError("rho must be a polynomial in H's domain variables")
    total = n + m
    rho_l = rho.lift(total)
    exprs = [rho_l * Polynomial.variable(total, i) for i in range(n)]
    exprs += [Polynomial.variable(total, n + j) for j in range(m)]
    graph = _substitute_formula(H.graph, exprs)
    pm = None
    if H.polymap is not None:
        inner = [rho * Polynomial.variable(n, i) for i in range(n)]
        pm = PolyMap(n, tuple(p.substitute(inner) for p in H.polymap.components))
    box = tuple(tuple(map(float, b)) for b in x_box) + H.box[n:]
    return MapSpec(name=f"{H.name}-scaled", n=n, m=m, graph=graph, box=box, polymap=pm)


def check_prop7_bound(
    H: MapSpec,
    rho: Polynomial,
    points: Sequence[GraphPoint],
    x_box: Sequence[Sequence[float]],
    tol: float = 0.1,
    **rate_kwargs,
) -> list[CalculusCheck]:
    """Check sur L(x|y) <= (rho(x) + ||grad rho(x)|| ||x||) * sur H(rho(x)x|y)
    for L(x) = H(rho(x) x), at graph points (x, y) of L.

    rho and its gradient are evaluated exactly; the two rates are estimated.
    Rows are oriented lhs <= rhs + tol with lhs = sur L and rhs the bound.
    """
    L = scaled_map(H, rho, x_box)
    grads = rho.gradient()
    out = []
    for gp in points:
        x = np.array(gp.x)
        rho_x = rho.evaluate(x)
        grad_norm = math.sqrt(math.fsum(g.evaluate(x) ** 2 for g in grads))
        z = tuple(float(v) for v in rho_x * x)
        sur_l = surjection_rate(L, gp.x, gp.y, **rate_kwargs).sur_estimate
        sur_h = surjection_rate(H, z, gp.y, **rate_kwargs).sur_estimate
        bound = (rho_x + grad_norm * float(np.linalg.norm(x))) * sur_h
        out.append(
            CalculusCheck(
                kind="prop7",
                point=gp.x + gp.y,
                lhs=sur_l,
                rhs=bound,
                tol=tol,
                passed=sur_l <= bound + tol,
            )
        )
    return out


# ---------------------------------------------------------------------------
# compactified-rate inequality

@dataclass(frozen=True)
class CompactifiedBoundReport:
    """Per-point comparison of sur G(u|y) against 3 eta(||x||) sur F(x|y).

    rows hold (radius ||x||, sur_g, bound, passed) sorted by radius; `onset`
    is the smallest tested radius from which every larger radius passes, or
    None when the largest tested radius fails.  The inequality is asserted
    by theory only for sufficiently large ||x||, so the onset is reported
    rather than a fixed threshold enforced.
    """

    rows: tuple[tuple[float, float, float, bool], ...]
    onset: float | None


def check_compactified_bound(
    spec: MapSpec,
    comp: CompactificationSpec,
    points: Sequence[GraphPoint],
    tol: float = 0.0,
    rate_kwargs: dict | None = None,
) -> CompactifiedBoundReport:
    """Numerically probe sur G(u|y) <= 3 eta(||x||) sur F(x|y) + tol."""
    G = compactify_map(spec, comp)
    kwargs = dict(
        schedule=(0.5, 0.25),
        samples_per_level=0,
        lambda_factors=(1.0, 0.5),
    )
    if rate_kwargs:
        kwargs.update(rate_kwargs)
    rows = []
    for gp in sorted(points, key=lambda g: float(np.linalg.norm(g.x))):
        x = np.array(gp.x)
        radius = float(np.linalg.norm(x))
        if radius == 0.0:
            continue
        u = tuple(float(v) for v in to_unit_ball(x, comp))
        sur_g = surjection_rate(G, u, gp.y, **kwargs).sur_estimate
        sur_f = surjection_rate(spec, gp.x, gp.y, **kwargs).sur_estimate
        bound = 3.0 * float(comp.eta(radius)) * sur_f
        rows.append((radius, sur_g, bound, sur_g <= bound + tol))
    onset = None
    for radius, _, _, ok in reversed(rows):
        if not ok:
            break
        onset = radius
    return CompactifiedBoundReport(tuple(rows), onset)
