"""Seeded noise blocks, forward/reverse orbits, and pullback limits.

Composition conventions, fixed once for the whole package:

* forward orbit:  ``Z_{j+1} = f_{b[j]}(Z_j)``, so the last symbol drawn is
  applied outermost;
* reverse orbit:  ``R_j = f_{b[0]} o ... o f_{b[j-1]}(x0)``, so extending the
  block appends maps innermost and the probe images are nested.

The pullback limit deepens the reverse composition on a fixed stream until
the taxicab diameter of a probe-cloud image drops below tolerance.  All
noise comes from labeled counter-based streams (see :mod:`monosync.streams`);
replica ``r`` of any operation owns stream id ``r`` of its label, which makes
results independent of chunking and worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotConvergedError, UsageError
from .families import FiniteNoise, MapFamily, NoiseSpec
from .order import Box
from .streams import stream_generator, uniforms_at

__all__ = [
    "NoiseBlock",
    "OrbitTrace",
    "sample_block",
    "noise_at",
    "forward_orbit",
    "reverse_orbit",
    "pullback_point",
]

DEFAULT_STREAM_LABEL = "noise"


def _map_uniforms(noise: NoiseSpec, u: np.ndarray) -> np.ndarray:
    """Map uniform draws to noise values (symbols or parameter vectors)."""
    if isinstance(noise, FiniteNoise):
        cum = np.cumsum(noise.probs)
        vals = np.searchsorted(cum, u, side="right") + 1
        return np.clip(vals, 1, noise.q).astype(np.int64)
    box = noise.box
    return box.lo + u * (box.hi - box.lo)


def _values_per_draw(noise: NoiseSpec) -> int:
    return 1 if isinstance(noise, FiniteNoise) else noise.dim


@dataclass(frozen=True)
class NoiseBlock:
    """A finite stretch of one noise stream, reproducible from its address.

    ``values`` has shape (n,) of symbols for finite noise or (n, d) of
    parameter vectors for box noise.  Regenerating with the same
    (seed, stream_id, n) is bit-exact.
    """

    values: np.ndarray
    seed: int
    stream_id: int

    def __len__(self) -> int:
        return self.values.shape[0]


def sample_block(
    noise: NoiseSpec,
    seed: int,
    stream_id: int,
    n: int,
    label: str = DEFAULT_STREAM_LABEL,
) -> NoiseBlock:
    """Draw the first ``n`` i.i.d. noise values of the addressed stream."""
    if n < 0:
        raise UsageError("block length must be >= 0")
    gen = stream_generator(seed, label, int(stream_id))
    d = _values_per_draw(noise)
    if isinstance(noise, FiniteNoise):
        u = gen.random(n)
    else:
        u = gen.random((n, d))
    vals = _map_uniforms(noise, u)
    return NoiseBlock(values=vals, seed=int(seed), stream_id=int(stream_id))


def noise_at(
    noise: NoiseSpec,
    seed: int,
    stream_id: int,
    j: int,
    label: str = DEFAULT_STREAM_LABEL,
):
    """Value ``j`` of a stream, addressed directly through the Philox counter."""
    if j < 0:
        raise UsageError("index must be >= 0")
    d = _values_per_draw(noise)
    u = uniforms_at(seed, (label, int(stream_id)), j * d, d)
    if isinstance(noise, FiniteNoise):
        return int(_map_uniforms(noise, u[:1])[0])
    return _map_uniforms(noise, u)


@dataclass
class OrbitTrace:
    """Positions (and optional probe-image boxes) along one noise block."""

    direction: str  # "forward" | "reverse"
    block: NoiseBlock
    positions: np.ndarray  # (n+1, dim)
    boxes: list[Box] | None
    saturated: bool

    def write_csv(self, path, seed: int | None = None) -> None:
        dim = self.positions.shape[1]
        cols = ["step"] + [f"x_{i + 1}" for i in range(dim)]
        if self.boxes is not None:
            cols += [f"box_lo_{i + 1}" for i in range(dim)]
            cols += [f"box_hi_{i + 1}" for i in range(dim)]
        cols.append("saturated")
        lines = []
        if seed is not None:
            lines.append(f"# seed={seed}")
        lines.append(",".join(cols))
        for j in range(self.positions.shape[0]):
            row = [str(j)] + [f"{v:.17g}" for v in self.positions[j]]
            if self.boxes is not None:
                row += [f"{v:.17g}" for v in self.boxes[j].lo]
                row += [f"{v:.17g}" for v in self.boxes[j].hi]
            row.append(str(int(self.saturated)))
            lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _clamp_points(raw: np.ndarray, bound: float) -> tuple[np.ndarray, np.ndarray]:
    """Clamp a point block, returning per-point saturation flags."""
    finite = np.isfinite(raw)
    sat = ~finite.all(axis=-1)
    if sat.any():
        raw = np.nan_to_num(raw, nan=0.0, posinf=bound, neginf=-bound)
    over = np.abs(raw) > bound
    if over.any():
        sat = sat | over.any(axis=-1)
        raw = np.clip(raw, -bound, bound)
    return raw, sat


def forward_orbit(fam: MapFamily, block: NoiseBlock, x0) -> OrbitTrace:
    """Iterate ``Z_{j+1} = f_{b[j]}(Z_j)`` from ``x0`` along the whole block."""
    x = np.asarray(x0, dtype=float).reshape(1, fam.dim)
    n = len(block)
    positions = np.empty((n + 1, fam.dim))
    positions[0] = x[0]
    saturated = False
    for j in range(n):
        raw = fam.raw_batch(block.values[j], x)
        x, sat = _clamp_points(raw, fam.clamp_bound)
        saturated = saturated or bool(sat.any())
        positions[j + 1] = x[0]
    return OrbitTrace("forward", block, positions, None, saturated)


def image_points_at_depths(
    fam: MapFamily,
    blocks: np.ndarray,
    depths: np.ndarray,
    base_pts: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-order composition images, one row per block prefix.

    Row ``i`` maps ``base_pts`` through
    ``f_{blocks[i,0]} o ... o f_{blocks[i, depths[i]-1]}`` (innermost last
    symbol first).  ``blocks`` is (N, L) of symbols or (N, L, d) of
    parameters with ``L >= max(depths)``; ``base_pts`` is (P, dim) shared or
    (N, P, dim) per row.  Returns the image clouds (N, P, dim) and a
    per-row saturation flag.

    All rows advance in lockstep stages, applying each row's next map
    grouped by symbol, so the cost is ``sum(depths) * P`` map evaluations
    regardless of how ragged the depths are.
    """
    depths = np.asarray(depths, dtype=np.int64)
    n_rows = depths.shape[0]
    base = np.asarray(base_pts, dtype=float)
    if base.ndim == 2:
        pts = np.broadcast_to(base, (n_rows,) + base.shape).copy()
    else:
        pts = base.copy()
    n_probe = pts.shape[1]
    sat = np.zeros(n_rows, dtype=bool)
    if n_rows == 0 or depths.max(initial=0) == 0:
        return pts, sat
    finite = isinstance(fam.noise, FiniteNoise)
    max_depth = int(depths.max())
    for stage in range(1, max_depth + 1):
        live = depths >= stage
        if not live.any():
            continue
        idx = np.nonzero(live)[0]
        pos = depths[idx] - stage
        if finite:
            syms = blocks[idx, pos]
            for a in np.unique(syms):
                rows = idx[syms == a]
                flat = pts[rows].reshape(-1, fam.dim)
                raw = fam.raw_batch(int(a), flat)
                out, psat = _clamp_points(raw, fam.clamp_bound)
                pts[rows] = out.reshape(len(rows), n_probe, fam.dim)
                if psat.any():
                    sat[rows] |= psat.reshape(len(rows), n_probe).any(axis=1)
        else:
            params = blocks[idx, pos]
            for t, i in enumerate(idx):
                raw = fam.raw_batch(params[t], pts[i])
                out, psat = _clamp_points(raw, fam.clamp_bound)
                pts[i] = out
                if psat.any():
                    sat[i] = True
    return pts, sat


def reverse_orbit(
    fam: MapFamily,
    block: NoiseBlock,
    x0,
    probe_points: np.ndarray | None = None,
) -> OrbitTrace:
    """All reverse-order iterates of ``x0`` along the block.

    Position ``j`` is the image of ``x0`` under the depth-``j`` prefix
    composition.  When a probe cloud is given, the trace also carries its
    image boxes; these are nested whenever the probe region is mapped into
    itself by every member map (always true for a bounded invariant
    domain, not necessarily for the bounded stand-in probe of an unbounded
    domain).
    """
    n = len(block)
    x = np.asarray(x0, dtype=float).reshape(1, fam.dim)
    blocks = np.broadcast_to(block.values, (n + 1,) + block.values.shape)
    depths = np.arange(n + 1)
    pts, sat = image_points_at_depths(fam, blocks, depths, x)
    positions = pts[:, 0, :]
    boxes = None
    saturated = bool(sat.any())
    if probe_points is not None:
        cloud = np.atleast_2d(np.asarray(probe_points, dtype=float))
        img, psat = image_points_at_depths(fam, blocks, depths, cloud)
        boxes = [Box.hull(img[j]) for j in range(n + 1)]
        saturated = saturated or bool(psat.any())
    return OrbitTrace("reverse", block, positions, boxes, saturated)


class _BlockTable:
    """Per-stream noise blocks that can be deepened without replaying prefixes."""

    def __init__(self, noise: NoiseSpec, seed: int, label: str, stream_ids: Sequence[int]):
        self.noise = noise
        self.finite = isinstance(noise, FiniteNoise)
        self._gens = [stream_generator(seed, label, int(s)) for s in stream_ids]
        n = len(self._gens)
        d = _values_per_draw(noise)
        if self.finite:
            self.values = np.empty((n, 0), dtype=np.int64)
        else:
            self.values = np.empty((n, 0, d), dtype=float)

    def ensure(self, depth: int) -> None:
        have = self.values.shape[1]
        if depth <= have:
            return
        extra = depth - have
        if self.finite:
            cum = np.cumsum(self.noise.probs)
            block = np.empty((len(self._gens), extra), dtype=np.int64)
            for i, g in enumerate(self._gens):
                u = g.random(extra)
                block[i] = np.clip(np.searchsorted(cum, u, side="right") + 1, 1, self.noise.q)
        else:
            box = self.noise.box
            d = box.dim
            block = np.empty((len(self._gens), extra, d), dtype=float)
            for i, g in enumerate(self._gens):
                block[i] = box.lo + g.random((extra, d)) * (box.hi - box.lo)
        self.values = np.concatenate([self.values, block], axis=1)


def _taxicab_diams(pts: np.ndarray) -> np.ndarray:
    """Per-row taxicab diameter of the probe-image clouds (N, P, dim)."""
    return (pts.max(axis=1) - pts.min(axis=1)).sum(axis=1)


@dataclass
class PullbackBatch:
    """Result of a batched pullback: one limit candidate per stream."""

    points: np.ndarray      # (N, dim) image centroids
    n_used: np.ndarray      # (N,) minimal depth reaching tolerance (-1 on failure)
    diam: np.ndarray        # (N,) diameter at the returned depth
    converged: np.ndarray   # (N,) bool
    saturated: np.ndarray   # (N,) bool


def pullback_batch(
    fam: MapFamily,
    seed: int,
    stream_ids: Sequence[int],
    probe_pts: np.ndarray,
    tol: float,
    n_max: int,
    label: str = DEFAULT_STREAM_LABEL,
    depth0: int = 16,
) -> PullbackBatch:
    """Pullback limits for many streams at once.

    Deepens every stream's reverse composition (exponentially, then by
    bisection) until the probe image's taxicab diameter is ``<= tol``, and
    reports the minimal such depth per stream.  Streams that stay above
    tolerance at ``n_max`` are flagged unconverged.
    """
    if tol <= 0:
        raise UsageError("tol must be positive")
    if n_max < 1:
        raise UsageError("n_max must be >= 1")
    probe = np.atleast_2d(np.asarray(probe_pts, dtype=float))
    if probe.shape[0] < 2:
        raise UsageError("probe cloud needs at least 2 points")
    n = len(stream_ids)
    table = _BlockTable(fam.noise, seed, label, stream_ids)

    points = np.zeros((n, fam.dim))
    n_used = np.full(n, -1, dtype=np.int64)
    diam_out = np.full(n, np.inf)
    converged = np.zeros(n, dtype=bool)
    saturated = np.zeros(n, dtype=bool)

    base_diam = float(_taxicab_diams(probe[None])[0])
    if base_diam <= tol:
        points[:] = probe.mean(axis=0)
        n_used[:] = 0
        diam_out[:] = base_diam
        converged[:] = True
        return PullbackBatch(points, n_used, diam_out, converged, saturated)

    # Exponential phase: find per-stream depth windows (lo_known_above, hi_at_or_below].
    lo = np.zeros(n, dtype=np.int64)          # deepest depth known to be above tol
    hi = np.full(n, -1, dtype=np.int64)       # shallowest depth known to be at/below tol
    active = np.ones(n, dtype=bool)
    depth = min(depth0, n_max)
    while active.any():
        table.ensure(depth)
        rows = np.nonzero(active)[0]
        pts, sat = image_points_at_depths(
            fam, table.values[rows], np.full(len(rows), depth), probe
        )
        saturated[rows] |= sat
        dms = _taxicab_diams(pts)
        done = dms <= tol
        hi[rows[done]] = depth
        active[rows[done]] = False
        still = rows[~done]
        lo[still] = depth
        diam_out[still] = dms[~done]
        if depth == n_max:
            break
        depth = min(2 * depth, n_max)

    failed = hi < 0
    refine = ~failed

    # Bisection phase: shrink (lo, hi] to the minimal depth per stream.
    cur_lo = lo.copy()
    cur_hi = hi.copy()
    while True:
        open_rows = np.nonzero(refine & (cur_lo + 1 < cur_hi))[0]
        if open_rows.size == 0:
            break
        mid = (cur_lo[open_rows] + cur_hi[open_rows]) // 2
        pts, sat = image_points_at_depths(fam, table.values[open_rows], mid, probe)
        saturated[open_rows] |= sat
        dms = _taxicab_diams(pts)
        ok = dms <= tol
        cur_hi[open_rows[ok]] = mid[ok]
        cur_lo[open_rows[~ok]] = mid[~ok]

    rows = np.nonzero(refine)[0]
    if rows.size:
        pts, sat = image_points_at_depths(fam, table.values[rows], cur_hi[rows], probe)
        saturated[rows] |= sat
        points[rows] = pts.mean(axis=1)
        diam_out[rows] = _taxicab_diams(pts)
        n_used[rows] = cur_hi[rows]
        converged[rows] = True
    return PullbackBatch(points, n_used, diam_out, converged, saturated)


def pullback_point(
    fam: MapFamily,
    seed: int,
    stream_id: int,
    probe_pts: np.ndarray,
    tol: float,
    n_max: int = 4096,
    label: str = DEFAULT_STREAM_LABEL,
) -> tuple[np.ndarray, int]:
    """Pullback limit along one stream: (image centroid, minimal depth used).

    Raises :class:`NotConvergedError` when the probe image is still wider
    than ``tol`` at depth ``n_max``, which signals either a family without
    verified splitting or a tolerance below the attainable resolution.
    """
    batch = pullback_batch(fam, seed, [stream_id], probe_pts, tol, n_max, label=label)
    if not batch.converged[0]:
        raise NotConvergedError(n_max, float(batch.diam[0]))
    return batch.points[0], int(batch.n_used[0])
