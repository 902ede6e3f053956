"""Brute-force reference implementations for cross-validating the estimators.

Everything here trades speed for simplicity: no binary search, no local
refinement, no first-order tolerance scaling.  When an estimator and its
oracle disagree beyond the documented slack, the bug is on the estimator
side by construction.  Cost guards keep the exhaustive enumerations at desk
scale (n + m <= 3 for rasterization, m <= 3 for the sphere search, n <= 2
for the slope grid).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CostGuardError, InputError
from .regularity import ModulusQuery
from .semialg import PolyMap, membership_many
from .util import TAG_SPHERE, lattice, parallel_map, stream

__all__ = [
    "RasterGrid",
    "rasterize",
    "dense_modulus",
    "dense_min_singular",
    "dense_slope",
]


def _axis_indices(lo: float, hi: float, pitch: float) -> np.ndarray:
    """Integer lattice indices k with lo <= k*pitch <= hi (origin-anchored)."""
    k_lo = int(math.ceil(lo / pitch - 1e-9))
    k_hi = int(math.floor(hi / pitch + 1e-9))
    return np.arange(k_lo, k_hi + 1, dtype=np.int64)


@dataclass(frozen=True)
class RasterGrid:
    """Occupancy bitmask over an origin-anchored grid covering a box.

    Cell (i_1, ..., i_d) sits at origin + index*pitch; its bit records the
    predicate value at that cell center, bit-exactly reproducible from the
    inputs.  Bits are packed row-major with numpy's packbits layout.
    """

    dims: tuple[int, ...]
    pitch: float
    origin: tuple[float, ...]
    bits: np.ndarray = field(repr=False)

    def occupancy(self) -> np.ndarray:
        """Unpacked boolean mask shaped `dims`."""
        n = int(np.prod(self.dims))
        return np.unpackbits(self.bits, count=n).astype(bool).reshape(self.dims)

    def centers(self) -> np.ndarray:
        """All cell centers, shape (prod(dims), d), same order as occupancy."""
        axes = [
            np.asarray(self.origin[a]) + np.arange(self.dims[a]) * self.pitch
            for a in range(len(self.dims))
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def rasterize(
    predicate: Callable[[np.ndarray], np.ndarray],
    box: Sequence[tuple[float, float]],
    pitch: float,
) -> RasterGrid:
    """Evaluate a vectorized point predicate at every cell center of the box.

    Slabs along the first axis are evaluated in parallel; results are
    assembled in index order, so the bitmask is independent of worker count.
    """
    if pitch <= 0.0:
        raise InputError("pitch must be positive")
    idx = [_axis_indices(lo, hi, pitch) for lo, hi in box]
    if any(a.size == 0 for a in idx):
        raise InputError("pitch too coarse: an axis of the box has no lattice point")
    dims = tuple(int(a.size) for a in idx)
    origin = tuple(float(a[0]) * pitch for a in idx)
    tail_axes = [a.astype(float) * pitch for a in idx[1:]]
    if tail_axes:
        mesh = np.meshgrid(*tail_axes, indexing="ij")
        tail = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        tail = np.zeros((1, 0))

    def slab(k: np.int64) -> np.ndarray:
        pts = np.empty((tail.shape[0], len(dims)))
        pts[:, 0] = float(k) * pitch
        pts[:, 1:] = tail
        return np.asarray(predicate(pts), dtype=bool)

    rows = parallel_map(slab, list(idx[0]))
    mask = np.concatenate(rows) if rows else np.zeros(0, dtype=bool)
    return RasterGrid(
        dims=dims,
        pitch=float(pitch),
        origin=origin,
        bits=np.packbits(mask),
    )


def dense_modulus(spec, q: ModulusQuery, pitch: float) -> float:
    """Modulus of surjection by direct rasterization, within one pitch.

    The image F(B(x, lam)) is rasterized as the union over domain lattice
    points u of the range points v with (u, v) in the graph (equality atoms
    read with absolute tolerance one pitch).  The formula route runs its
    domain lattice at half pitch and single-valued polynomial maps refine
    theirs by the measured Jacobian bound, both so that consecutive image
    points stay pitch-dense in the range.  The answer is the distance from
    y to the nearest uncovered range cell, minus one pitch; if every range
    cell in the box is covered, the distance to the farthest one.
    """
    if spec.n + spec.m > 3:
        raise CostGuardError(
            f"dense_modulus handles n+m <= 3, got {spec.n + spec.m}"
        )
    if pitch <= 0.0:
        raise InputError("pitch must be positive")
    n, m = spec.n, spec.m
    x = np.array(q.x, dtype=float)
    y = np.array(q.y, dtype=float)
    xlo = np.array([b[0] for b in spec.box[:n]])
    xhi = np.array([b[1] for b in spec.box[:n]])

    def guarded_lattice(step: float) -> np.ndarray:
        per_axis = 2 * int(math.floor(q.lam / step)) + 1
        if per_axis**n > 4_000_000:
            raise CostGuardError(
                "dense_modulus domain lattice exceeds 4e6 points"
            )
        return lattice(x, q.lam, step)

    pm: PolyMap | None = getattr(spec, "polymap", None)
    graph = getattr(spec, "graph", None)
    U = guarded_lattice(pitch if pm is not None else 0.5 * pitch)
    if U.size:
        U = U[np.all((U >= xlo) & (U <= xhi), axis=1)]
    if U.size == 0:
        U = np.clip(x, xlo, xhi).reshape(1, -1)

    if pm is not None and U.shape[0] > 0:
        lip = max(
            (float(np.linalg.norm(pm.jacobian(u))) for u in U), default=0.0
        )
        if lip > 1.0:
            fine = guarded_lattice(pitch / lip)
            if fine.size:
                fine = fine[np.all((fine >= xlo) & (fine <= xhi), axis=1)]
            if fine.size:
                U = fine

    # one pitch, padded one ulp-scale notch so cells exactly one pitch from
    # an image point do not drop out to rounding in the residual
    band = pitch * (1.0 + 1e-12)

    def covered(V: np.ndarray) -> np.ndarray:
        if pm is not None:
            FU = pm.call_many(U)
            flags = np.zeros(V.shape[0], dtype=bool)
            for i in range(V.shape[0]):
                d = np.linalg.norm(FU - V[i], axis=1)
                flags[i] = bool((d <= band).any())
            return flags
        flags = np.zeros(V.shape[0], dtype=bool)
        chunk = max(1, 2_000_000 // max(U.shape[0], 1))
        for s in range(0, V.shape[0], chunk):
            Vc = V[s : s + chunk]
            pts = np.empty((Vc.shape[0] * U.shape[0], n + m))
            pts[:, :n] = np.tile(U, (Vc.shape[0], 1))
            pts[:, n:] = np.repeat(Vc, U.shape[0], axis=0)
            ok = membership_many(graph, pts, band)
            flags[s : s + chunk] = ok.reshape(Vc.shape[0], U.shape[0]).any(axis=1)
        return flags

    grid = rasterize(covered, spec.box[n:], pitch)
    V = grid.centers()
    occ = grid.occupancy().ravel()
    dist = np.linalg.norm(V - y, axis=1)
    if occ.all():
        return float(dist.max())
    return max(0.0, float(dist[~occ].min()) - pitch)


def dense_min_singular(A: Sequence[Sequence[float]], seed: int = 0) -> float:
    """Smallest singular value by seeded unit-sphere search.

    10^5 uniform directions y on the unit sphere of R^m score ||A^T y||; the
    best is refined in three rounds of shrinking spherical caps.  Pure
    sampling, no factorization, accurate to well under 1e-4 at desk scale.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise InputError("matrix must be two-dimensional and nonempty")
    m = A.shape[0]
    if m > 3:
        raise CostGuardError(f"dense_min_singular handles m <= 3, got {m}")

    def score(Y: np.ndarray) -> np.ndarray:
        return np.linalg.norm(Y @ A, axis=1)

    rng = stream(seed, TAG_SPHERE, 0)
    Y = rng.normal(size=(100_000, m))
    norms = np.linalg.norm(Y, axis=1)
    norms[norms == 0.0] = 1.0
    Y /= norms[:, None]
    vals = score(Y)
    best_idx = int(np.argmin(vals))
    best_y = Y[best_idx]
    best = float(vals[best_idx])
    for round_idx, cap in enumerate((0.05, 0.005, 5e-4), start=1):
        rng = stream(seed, TAG_SPHERE, round_idx)
        P = best_y + cap * rng.normal(size=(20_000, m))
        norms = np.linalg.norm(P, axis=1)
        norms[norms == 0.0] = 1.0
        P /= norms[:, None]
        vals = score(P)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            best_y = P[i]
    return best


def dense_slope(
    f,
    x: Sequence[float],
    radius: float,
    pitch: float,
) -> float:
    """Descent slope by exhaustive lattice over the ball B(x, radius).

    Returns max over lattice points u != x of (f(x) - f(u))+ / ||x - u||.
    `f` is a scalar polynomial map or a plain callable on points.
    """
    x = np.asarray(x, dtype=float)
    if x.size > 2:
        raise CostGuardError(f"dense_slope handles n <= 2, got {x.size}")
    if radius <= 0.0 or pitch <= 0.0:
        raise InputError("radius and pitch must be positive")
    if isinstance(f, PolyMap):
        if f.m != 1:
            raise InputError("dense_slope needs a scalar map (m = 1)")
        fx = float(f(x)[0])
        U = lattice(x, radius, pitch)
        fu = f.call_many(U)[:, 0]
    else:
        fx = float(f(x))
        U = lattice(x, radius, pitch)
        fu = np.array([float(f(u)) for u in U])
    dist = np.linalg.norm(U - x, axis=1)
    keep = dist > 0.0
    if not keep.any():
        return 0.0
    quot = np.maximum(fx - fu[keep], 0.0) / dist[keep]
    return float(quot.max())
