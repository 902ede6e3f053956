"""Shared plumbing: counter-based random streams, anchored lattices, worker pool.

Reproducibility contract: every stochastic routine in the package derives its
randomness from `stream(seed, tag, index)`.  Streams are keyed, not stateful,
so results never depend on iteration order or on how work is split across
workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

_MASK64 = (1 << 64) - 1

# Tags partition the key space so that independent subsystems never share a
# stream even when they share a user-facing seed.
TAG_GRAPH = 1       # sample_graph candidate draws
TAG_NEAR = 2        # neighborhood sampling inside rate estimation
TAG_SLOPE = 3       # slope direction draws
TAG_SCAN = 4        # critical-value scan point clouds
TAG_SHELL = 5       # asymptotic shell sampling
TAG_SPHERE = 6      # dense unit-sphere oracle
TAG_DESCENT = 7     # critical-point descent starts

T = TypeVar("T")
U = TypeVar("U")


def stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Generator keyed by (seed, tag, index) via the Philox counter cipher."""
    key = np.array(
        [seed & _MASK64, ((tag << 48) ^ index) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def worker_count() -> int:
    """Worker cap from REGVAR_THREADS (default 1). Never changes results."""
    raw = os.environ.get("REGVAR_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn: Callable[[T], U], items: Sequence[T]) -> list[U]:
    """Map preserving input order; uses a thread pool when REGVAR_THREADS > 1.

    Each call of `fn` must be pure, which makes the output independent of the
    worker count by construction.
    """
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _ball_slop(c: np.ndarray, radius: float) -> float:
    return 1e-12 * max(1.0, radius, float(np.max(np.abs(c))) if c.size else 1.0)


def lattice(center: Sequence[float], radius: float, pitch: float) -> np.ndarray:
    """Origin-anchored lattice points k*pitch within the closed ball B(center, radius).

    Anchoring at the origin (rather than at `center`) matters: coordinate
    hyperplanes like {v = 0} are then represented exactly, so strict
    inequalities that fail only on such measure-zero sets are actually seen
    by grid searches.
    """
    c = np.asarray(center, dtype=float)
    if pitch <= 0.0:
        raise ValueError("pitch must be positive")
    if radius < 0.0:
        raise ValueError("radius must be nonnegative")
    slop = _ball_slop(c, radius)
    lo = np.ceil((c - radius) / pitch - 1e-9).astype(np.int64)
    hi = np.floor((c + radius) / pitch + 1e-9).astype(np.int64)
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    if any(ax.size == 0 for ax in axes):
        return np.empty((0, c.size))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1).astype(float) * pitch
    d2 = np.einsum("ij,ij->i", pts - c, pts - c)
    return pts[d2 <= (radius + slop) ** 2]


def _ragged_arange(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Concatenation of arange(starts[i], starts[i]+counts[i]) without a loop."""
    counts = counts.astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total, dtype=np.int64) - offsets + np.repeat(starts, counts)


def ring_lattice(
    center: Sequence[float], r_in: float, r_out: float, pitch: float
) -> np.ndarray:
    """Origin-anchored lattice points with r_in < dist(p, center) <= r_out.

    Pass r_in < 0 to include the center itself.  Band boundaries use the same
    tolerance formula on both sides, so consecutive rings tile a ball exactly:
    no lattice point is duplicated or skipped.  Only the annulus is
    materialized, which keeps wide-but-thin probes cheap even when the full
    ball would hold millions of lattice points.
    """
    c = np.asarray(center, dtype=float)
    if pitch <= 0.0:
        raise ValueError("pitch must be positive")
    if r_out < 0.0 or (r_in >= 0.0 and r_in >= r_out):
        return np.empty((0, c.size))
    out2 = (r_out + _ball_slop(c, r_out)) ** 2
    in2 = (r_in + _ball_slop(c, r_in)) ** 2 if r_in >= 0.0 else -1.0

    if c.size == 1:
        k0 = int(math.ceil((c[0] - r_out) / pitch - 1e-9))
        k1 = int(math.floor((c[0] + r_out) / pitch + 1e-9))
        vals = np.arange(k0, k1 + 1, dtype=float) * pitch
        d2 = (vals - c[0]) ** 2
        return vals[(d2 <= out2) & (d2 > in2)].reshape(-1, 1)

    if c.size == 2:
        i0 = int(math.ceil((c[0] - r_out) / pitch - 1e-9))
        i1 = int(math.floor((c[0] + r_out) / pitch + 1e-9))
        ivals = np.arange(i0, i1 + 1, dtype=np.int64)
        dx2 = (ivals * pitch - c[0]) ** 2
        rem = out2 - dx2
        keep = rem >= 0.0
        ivals, dx2, rem = ivals[keep], dx2[keep], rem[keep]
        half = np.sqrt(np.maximum(rem, 0.0))
        j_lo = np.ceil((c[1] - half) / pitch - 1e-9).astype(np.int64)
        j_hi = np.floor((c[1] + half) / pitch + 1e-9).astype(np.int64)
        # Columns crossing the inner disk contribute two chord segments, one
        # below and one above the hole; construct only those so a thin band
        # never pays for the full outer disk.  Boundary rounding is generous
        # here and the exact distance filter below makes the final call.
        rem_in = in2 - dx2
        hole = rem_in > 0.0
        half_in = np.sqrt(np.maximum(rem_in, 0.0))
        lo_hi = np.where(
            hole,
            np.minimum(
                np.floor((c[1] - half_in) / pitch + 1e-9).astype(np.int64), j_hi
            ),
            j_hi,
        )
        up_lo = np.where(
            hole,
            np.maximum(
                np.ceil((c[1] + half_in) / pitch - 1e-9).astype(np.int64), j_lo
            ),
            j_hi + 1,
        )
        up_lo = np.maximum(up_lo, lo_hi + 1)
        starts = np.stack([j_lo, up_lo], axis=1).ravel()
        counts = np.maximum(
            np.stack([lo_hi - j_lo, j_hi - up_lo], axis=1).ravel() + 1, 0
        )
        ii = np.repeat(np.repeat(ivals, 2), counts)
        jj = _ragged_arange(starts, counts)
        pts = np.stack([ii.astype(float), jj.astype(float)], axis=1) * pitch
        d2 = np.einsum("ij,ij->i", pts - c, pts - c)
        return pts[(d2 <= out2) & (d2 > in2)]

    # higher range dimensions: slab over the first axis, dense in the rest
    i0 = int(math.ceil((c[0] - r_out) / pitch - 1e-9))
    i1 = int(math.floor((c[0] + r_out) / pitch + 1e-9))
    rest = c[1:]
    chunks = []
    for i in range(i0, i1 + 1):
        x0 = i * pitch
        rem2 = out2 - (x0 - c[0]) ** 2
        if rem2 < 0.0:
            continue
        sub = lattice(rest, math.sqrt(rem2), pitch)
        if sub.size == 0:
            continue
        block = np.empty((sub.shape[0], c.size))
        block[:, 0] = x0
        block[:, 1:] = sub
        d2 = np.einsum("ij,ij->i", block - c, block - c)
        block = block[(d2 <= out2) & (d2 > in2)]
        if block.size:
            chunks.append(block)
    if not chunks:
        return np.empty((0, c.size))
    return np.vstack(chunks)


def window_lattice(center: Sequence[float], halfwidth: float, pitch: float) -> np.ndarray:
    """Small centered lattice used for local refinement passes."""
    c = np.asarray(center, dtype=float)
    k = max(1, int(math.ceil(halfwidth / pitch)))
    offs = np.arange(-k, k + 1, dtype=float) * pitch
    mesh = np.meshgrid(*([offs] * c.size), indexing="ij")
    return c + np.stack([m.ravel() for m in mesh], axis=1)


def scaled_norm(v: np.ndarray) -> float:
    """Euclidean norm computed with pre-scaling.

    Exact (no rounding at all) when the vector has a single nonzero entry,
    which keeps singular values of diagonal matrices exact.
    """
    a = float(np.max(np.abs(v))) if v.size else 0.0
    if a == 0.0:
        return 0.0
    w = v / a
    return a * math.sqrt(float(np.dot(w, w)))


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return list(out.values())
