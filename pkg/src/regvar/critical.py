"""Critical-value scanning and the analytics applied to the flagged set.

A graph point is flagged as (numerically) critical when its estimated rate
of surjection falls below a threshold tau; exact zero is unattainable under
sampling, so tau is always carried in the result.  The flagged values are
then fed to three independent analytics: box-counting dimension (the flagged
value set of a polynomial map should have dimension at most m - 1), porosity
at sample scale (the value set should be full of holes), and component
constancy for scalar maps (the function should be constant on each connected
component of its critical set).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, UndersampledError
from .regularity import (
    DEFAULT_SCHEDULE,
    jacobian_rate,
    linear_surjection_rate,
    surjection_rate,
)
from .semialg import GraphPoint, PolyMap, membership, sample_graph
from .util import TAG_SCAN, UnionFind, lattice, stream

__all__ = [
    "CriticalScanResult",
    "DimensionFit",
    "PorosityReport",
    "ComponentReport",
    "scan_critical_values",
    "box_counting_dimension",
    "porosity_scan",
    "component_constancy",
]


@dataclass(frozen=True)
class CriticalScanResult:
    """Flagged near-critical graph points and their images.

    values[i] is exactly the y-component of flagged[i]; strict_flags[i]
    records whether the point satisfied graph membership at tol_eq/10, a
    proxy for 'proper' (as opposed to tolerance-artifact) membership that is
    reported without further interpretation.
    """

    flagged: tuple[tuple[GraphPoint, float], ...]
    values: tuple[tuple[float, ...], ...]
    threshold: float
    total_sampled: int
    strict_flags: tuple[bool, ...]

    def __post_init__(self):
        if any(rate >= self.threshold for _, rate in self.flagged):
            raise InputError("flagged rate at or above threshold")


@dataclass(frozen=True)
class DimensionFit:
    """Box-counting fit: counts per scale and the log-log slope."""

    scales: tuple[float, ...]
    counts: tuple[int, ...]
    dimension: float
    r2: float


@dataclass(frozen=True)
class PorosityReport:
    """Largest porosity constant certified at sample scale.

    lambda_max is feasible for every tested (point, radius) pair except the
    recorded witness failures: around each tested point x and radius r, some
    ball of radius lambda_max*r inside B(x, r) avoids the point cloud.
    """

    lambda_max: float
    tested_radii: tuple[float, ...]
    witness_failures: tuple[tuple[tuple[float, ...], float], ...]


@dataclass(frozen=True)
class ComponentReport:
    """Clusters of flagged critical points with per-cluster value data.

    spreads[i] is the raw max-minus-min of f over cluster members; values[i]
    is f at a locally polished (Newton on grad f = 0) representative, the
    best available proxy for the component's constant value.
    """

    components: tuple[tuple[tuple[float, ...], ...], ...]
    spreads: tuple[float, ...]
    values: tuple[float, ...]
    linking_radius: float


# ---------------------------------------------------------------------------
# scanning

def _uniform_box_samples(
    box: Sequence[tuple[float, float]], count: int, seed: int
) -> np.ndarray:
    rng = stream(seed, TAG_SCAN, 0)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + (hi - lo) * rng.random((count, lo.size))


def _sigma_min_many(F: PolyMap, X: np.ndarray) -> np.ndarray:
    """Vectorized smallest singular value of the Jacobian at each row of X.

    Used only as a prefilter; flags are confirmed with the scalar
    linear_surjection_rate so that flag soundness does not depend on this
    code path agreeing to the last ulp.
    """
    n, m = F.n, F.m
    rows = [
        [F.components[i].differentiate(j).evaluate_many(X) for j in range(n)]
        for i in range(m)
    ]
    if m == 1:
        s2 = np.zeros(X.shape[0])
        for g in rows[0]:
            s2 += g * g
        return np.sqrt(s2)
    if m == 2:
        a = np.zeros(X.shape[0])
        b = np.zeros(X.shape[0])
        c = np.zeros(X.shape[0])
        for j in range(n):
            a += rows[0][j] * rows[0][j]
            b += rows[0][j] * rows[1][j]
            c += rows[1][j] * rows[1][j]
        disc = np.sqrt(np.maximum((a - c) ** 2 + 4.0 * b * b, 0.0))
        lam_min = np.maximum(0.5 * ((a + c) - disc), 0.0)
        return np.sqrt(lam_min)
    out = np.empty(X.shape[0])
    J = np.empty((m, n))
    for k in range(X.shape[0]):
        for i in range(m):
            for j in range(n):
                J[i, j] = rows[i][j][k]
        out[k] = linear_surjection_rate(J)
    return out


def scan_critical_values(
    spec,
    tau: float = 0.05,
    budget: int = 20_000,
    seed: int = 0,
    *,
    box: Sequence[tuple[float, float]] | None = None,
    tol_eq: float = 1e-9,
    rate_kwargs: dict | None = None,
) -> CriticalScanResult:
    """Sample the graph and flag points whose surjection rate is below tau.

    PolyMaps (or MapSpecs carrying one) use the exact Jacobian rate: `budget`
    domain points are drawn uniformly in the box, a vectorized smallest-
    singular-value pass prefilters candidates, and each flag is confirmed by
    the scalar rate so that every flagged point satisfies rate < tau exactly.
    Pure PolyMaps need an explicit domain `box`.

    General MapSpecs sample `budget` graph points (sparse-graph errors
    propagate) and estimate the rate of each distinct point with
    surjection_rate on the default schedule, where distinct means separated
    at the estimator's own probe scale; `rate_kwargs` overrides its keyword
    arguments.  The scan default probes only the sampled point itself
    (samples_per_level=0) and caps each modulus search just above tau, both
    of which only sharpen the flag decision.
    """
    if tau <= 0.0:
        raise InputError("tau must be positive")
    if budget <= 0:
        raise InputError("budget must be positive")
    pm: PolyMap | None = None
    graph = None
    if isinstance(spec, PolyMap):
        pm = spec
        if box is None:
            raise InputError("scanning a bare PolyMap needs a domain box")
        x_box = tuple((float(lo), float(hi)) for lo, hi in box)
        y_box = None
    elif getattr(spec, "polymap", None) is not None:
        pm = spec.polymap
        graph = spec.graph
        x_box = spec.box[: spec.n]
        y_box = spec.box[spec.n :]
    else:
        graph = spec.graph

    flagged: list[tuple[GraphPoint, float]] = []
    strict: list[bool] = []
    if pm is not None:
        X = _uniform_box_samples(x_box, budget, seed)
        total = budget
        Y = pm.call_many(X)
        keep = np.ones(budget, dtype=bool)
        if y_box is not None:
            ylo = np.array([b[0] for b in y_box])
            yhi = np.array([b[1] for b in y_box])
            keep = np.all((Y >= ylo) & (Y <= yhi), axis=1)
        sig = _sigma_min_many(pm, X)
        cand = np.nonzero(keep & (sig < tau * (1.0 + 1e-6) + 1e-12))[0]
        for i in cand:
            rate = jacobian_rate(pm, X[i])
            if rate < tau:
                gp = GraphPoint(tuple(X[i]), tuple(Y[i]))
                flagged.append((gp, rate))
                if graph is not None:
                    strict.append(membership(graph, gp.point, tol_eq / 10.0))
                else:
                    resid = float(np.linalg.norm(pm(X[i]) - Y[i]))
                    strict.append(resid <= tol_eq / 10.0)
    else:
        gps = sample_graph(spec, budget, seed=seed, tol_eq=tol_eq)
        total = len(gps)
        # probing only the finest default level with samples_per_level=0
        # reproduces the full-schedule sur_estimate exactly (no per-level
        # state feeds forward) at a fraction of the cost
        kwargs = dict(
            schedule=(DEFAULT_SCHEDULE[-1],),
            samples_per_level=0,
            rmax_factor=max(8.0 * tau, 0.3),
            seed=seed,
        )
        if rate_kwargs:
            kwargs.update(rate_kwargs)
        # the estimate is constant below its own probe scale, so sampled
        # points are deduplicated on a lattice a quarter of the finest
        # probe radius (equality descent otherwise yields clouds of
        # near-identical points around isolated branch components)
        factors = kwargs.get("lambda_factors", (1.0, 0.5, 0.25))
        dedup = 0.25 * min(kwargs["schedule"]) * min(factors)
        seen = set()
        for gp in gps:
            key = tuple(round(v / dedup) for v in gp.point)
            if key in seen:
                continue
            seen.add(key)
            rate = surjection_rate(spec, gp.x, gp.y, **kwargs).sur_estimate
            if rate < tau:
                flagged.append((gp, rate))
                strict.append(membership(graph, gp.point, tol_eq / 10.0))
    return CriticalScanResult(
        flagged=tuple(flagged),
        values=tuple(gp.y for gp, _ in flagged),
        threshold=tau,
        total_sampled=total,
        strict_flags=tuple(strict),
    )


# ---------------------------------------------------------------------------
# box-counting dimension

def box_counting_dimension(
    points: Sequence[Sequence[float]], scales: Sequence[float]
) -> DimensionFit:
    """Least-squares slope of log N(eps) against log 1/eps.

    Boxes are anchored at the data's minimum corner; only scales whose counts
    sit strictly between 1 and the point count enter the fit (saturated
    scales carry no slope information).  A cloud that never splits (all
    counts 1) has dimension 0 by convention; a cloud that is saturated at
    every scale raises an undersampled diagnostic.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.shape[0] == 0:
        raise InputError("points must be non-empty")
    sc = tuple(float(s) for s in scales)
    if len(sc) < 2 or any(s <= 0.0 for s in sc):
        raise InputError("need at least two positive scales")
    if any(b >= a for a, b in zip(sc, sc[1:])):
        raise InputError("scales must be strictly decreasing")
    anchor = P.min(axis=0)
    counts = []
    for eps in sc:
        idx = np.floor((P - anchor) / eps + 1e-12).astype(np.int64)
        counts.append(len({tuple(row) for row in idx}))
    counts_t = tuple(counts)
    npts = P.shape[0]
    usable = [
        k for k in range(len(sc)) if 1 < counts_t[k] < npts
    ]
    if len(usable) < 2:
        if all(c == 1 for c in counts_t):
            return DimensionFit(sc, counts_t, 0.0, 1.0)
        raise UndersampledError(
            "box counts saturated at every scale; add points or adjust scales"
        )
    xs = np.log([1.0 / sc[k] for k in usable])
    ys = np.log([counts_t[k] for k in usable])
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DimensionFit(sc, counts_t, max(0.0, float(slope)), r2)


# ---------------------------------------------------------------------------
# porosity

def porosity_scan(
    points: Sequence[Sequence[float]],
    radii: Sequence[float],
    grid_pitch: float,
    max_points: int = 48,
) -> PorosityReport:
    """Certify hole balls inside B(x, r) around sampled points x.

    For each tested x (an evenly strided subset of `points` capped at
    `max_points`) and each radius r, candidate centers c on a grid of pitch
    `grid_pitch` over B(x, r) score rho(c) = min(r - ||c - x||,
    dist(c, points)); the pair's certificate is max rho over candidates, and
    lambda_max is the minimum certificate-to-radius ratio.  Pairs with no
    positive certificate are recorded as witness failures and excluded.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.shape[0] == 0:
        raise InputError("points must be non-empty")
    rads = tuple(float(r) for r in radii)
    if not rads or any(r <= 0.0 for r in rads):
        raise InputError("radii must be positive")
    if grid_pitch <= 0.0:
        raise InputError("grid_pitch must be positive")
    if max_points <= 0:
        raise InputError("max_points must be positive")
    tree = cKDTree(P)
    stride = max(1, P.shape[0] // max_points)
    tested = P[::stride][:max_points]
    ratios = []
    failures: list[tuple[tuple[float, ...], float]] = []
    for x in tested:
        for r in rads:
            C = lattice(x, r, grid_pitch)
            if C.size == 0:
                C = x.reshape(1, -1)
            room = r - np.linalg.norm(C - x, axis=1)
            dist, _ = tree.query(C, workers=1)
            rho = np.minimum(room, np.atleast_1d(dist))
            best = float(rho.max())
            if best <= 0.0:
                failures.append((tuple(x), r))
            else:
                ratios.append(best / r)
    lambda_max = min(ratios) if ratios else 0.0
    return PorosityReport(
        lambda_max=lambda_max,
        tested_radii=rads,
        witness_failures=tuple(failures),
    )


# ---------------------------------------------------------------------------
# component constancy

def _newton_polish(
    f: PolyMap, x0: np.ndarray, box: Sequence[tuple[float, float]]
) -> np.ndarray:
    """Damped Newton iteration on grad f = 0 from x0, projected to the box.

    The Hessian can be singular on positive-dimensional critical sets, so
    steps use Levenberg damping; the iterate with the smallest gradient norm
    wins.
    """
    n = f.n
    grads = [f.components[0].differentiate(j) for j in range(n)]
    hess = [[g.differentiate(j) for j in range(n)] for g in grads]
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    x = np.clip(np.array(x0, dtype=float), lo, hi)
    g = np.array([p.evaluate(x) for p in grads])
    best_x, best_norm = x.copy(), float(np.linalg.norm(g))
    mu = 1e-12
    for _ in range(40):
        H = np.array([[hess[i][j].evaluate(x) for j in range(n)] for i in range(n)])
        damp = mu * (abs(float(np.trace(H))) / n + 1.0)
        try:
            step = np.linalg.solve(H + damp * np.eye(n), -g)
        except np.linalg.LinAlgError:
            step = -g
        cand = np.clip(x + step, lo, hi)
        gc = np.array([p.evaluate(cand) for p in grads])
        nc = float(np.linalg.norm(gc))
        if nc < best_norm:
            x, g = cand, gc
            best_x, best_norm = cand.copy(), nc
            mu = max(mu / 4.0, 1e-14)
            if best_norm == 0.0:
                break
        else:
            mu *= 16.0
            if mu > 1e10:
                break
    return best_x


def component_constancy(
    f: PolyMap,
    tau: float,
    box: Sequence[tuple[float, float]],
    linking_eps: float | None = None,
    budget: int = 200_000,
    seed: int = 0,
) -> ComponentReport:
    """Cluster near-critical points of a scalar map and report value spreads.

    Points with ||grad f|| < tau (confirmed by the scalar rate) are linked
    whenever two lie within linking_eps of each other (default: three times
    the mean nearest-neighbor distance of the flagged set); each connected
    cluster reports its raw f-spread and the f-value of a Newton-polished
    representative.  No critical points yields an empty (valid) report.
    """
    if f.m != 1:
        raise InputError("component_constancy needs a scalar map (m = 1)")
    if tau <= 0.0 or (linking_eps is not None and linking_eps <= 0.0):
        raise InputError("tau and linking_eps must be positive")
    X = _uniform_box_samples(box, budget, seed)
    sig = _sigma_min_many(f, X)
    cand = np.nonzero(sig < tau * (1.0 + 1e-6) + 1e-12)[0]
    keep = [i for i in cand if jacobian_rate(f, X[i]) < tau]
    if not keep:
        return ComponentReport((), (), (), linking_eps or 0.0)
    pts = X[keep]
    if linking_eps is None:
        if pts.shape[0] > 1:
            tree = cKDTree(pts)
            d, _ = tree.query(pts, k=2, workers=1)
            linking_eps = 3.0 * float(d[:, 1].mean())
        else:
            linking_eps = 1.0
    uf = UnionFind(pts.shape[0])
    tree = cKDTree(pts)
    for i, j in tree.query_pairs(linking_eps):
        uf.union(i, j)
    comps = []
    spreads = []
    vals = []
    for group in uf.groups():
        members = pts[np.array(group)]
        fv = f.call_many(members)[:, 0]
        spreads.append(float(fv.max() - fv.min()))
        rep = members[int(np.argmin(sig[np.array(keep)][np.array(group)]))]
        polished = _newton_polish(f, rep, box)
        vals.append(float(f(polished)[0]))
        comps.append(tuple(tuple(p) for p in members))
    order = np.argsort(vals)[::-1]
    return ComponentReport(
        components=tuple(comps[i] for i in order),
        spreads=tuple(spreads[i] for i in order),
        values=tuple(vals[i] for i in order),
        linking_radius=float(linking_eps),
    )
