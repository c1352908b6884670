"""Synchronization diagnostics: image-diameter decay and the forward gap.

Diameters are measured on reverse-order compositions, whose probe images
are nested, so every replica's series is monotone and the mean series has
the same law as the forward one.  The decay rate is fitted log-linearly on
the window past the detected burn-in depth, excluding steps already at the
floating-point noise floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import _BlockTable, image_points_at_depths, _clamp_points, sample_block
from .errors import DegenerateSeriesError, NotConvergedError, UsageError
from .families import MapFamily, probe_cloud
from .fitting import loglinear_fit
from .order import Box
from .streams import stream_generator

__all__ = [
    "DiamSeries",
    "RateFit",
    "BoundednessReport",
    "GapSeries",
    "diameter_series",
    "fit_rate",
    "assumption2_check",
    "forward_attractor_gap",
]

# Steps with diameters under this floor carry only rounding noise and are
# excluded from log-linear fits.
DIAM_FIT_FLOOR = 1e3 * np.finfo(float).eps


@dataclass
class DiamSeries:
    """Per-replica taxicab diameters of reverse-composition probe images.

    Each replica's series is non-increasing whenever the probe region is
    forward-invariant under every member map (bounded invariant domains
    qualify; the stand-in probe of an unbounded domain may grow for a few
    steps before the contraction regime is reached).
    """

    diam: np.ndarray      # (replicas, n_max+1)
    box_lo: np.ndarray    # (n_max+1, replicas, dim)
    box_hi: np.ndarray    # (n_max+1, replicas, dim)
    m0: int
    seed: int
    saturated: np.ndarray  # (replicas,) bool

    @property
    def replicas(self) -> int:
        return self.diam.shape[0]

    @property
    def n_max(self) -> int:
        return self.diam.shape[1] - 1

    def mean_diam(self) -> np.ndarray:
        return self.diam.mean(axis=0)

    def write_csv(self, path, fit: "RateFit | None" = None, seed: int | None = None) -> None:
        mean = self.mean_diam()
        q05 = np.quantile(self.diam, 0.05, axis=0)
        q95 = np.quantile(self.diam, 0.95, axis=0)
        lines = []
        if seed is not None:
            lines.append(f"# seed={seed}")
        lines.append("n,mean_diam,q05,q95,bound_c_rn")
        for n in range(self.n_max + 1):
            bound = "" if fit is None else f"{fit.c_hat * fit.r_hat ** n:.17g}"
            lines.append(f"{n},{mean[n]:.17g},{q05[n]:.17g},{q95[n]:.17g},{bound}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class RateFit:
    """Fitted exponential decay ``c * r^n`` with bootstrap uncertainty."""

    r_hat: float
    c_hat: float
    r_ci: tuple[float, float]
    n_range: tuple[int, int]
    r_squared: float
    warning: str | None = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "r_hat": self.r_hat,
            "c_hat": self.c_hat,
            "r_ci": list(self.r_ci),
            "n_range": list(self.n_range),
            "r_squared": self.r_squared,
            "warning": self.warning,
            "degenerate": self.degenerate,
        }


def _detect_m0(box_lo: np.ndarray, box_hi: np.ndarray) -> int:
    """First depth at which all replica boxes fit one common box of modest volume.

    "Modest" means the hull over replicas has volume at most 10x the median
    replica-box volume; depth 1 is the fallback when no step qualifies.
    """
    n_steps = box_lo.shape[0]
    for n in range(1, n_steps):
        spans = box_hi[n] - box_lo[n]
        vols = np.prod(spans, axis=1)
        hull_span = box_hi[n].max(axis=0) - box_lo[n].min(axis=0)
        hull_vol = float(np.prod(hull_span))
        if hull_vol <= 10.0 * float(np.median(vols)):
            return n
    return 1


def diameter_series(
    fam: MapFamily,
    probe_points: np.ndarray | None,
    n_max: int,
    replicas: int,
    seed: int,
    label: str = "sync",
) -> DiamSeries:
    """Reverse-composition probe-image diameters for every replica and depth."""
    if replicas < 1:
        raise UsageError("replicas must be >= 1")
    if n_max < 1:
        raise UsageError("n_max must be >= 1")
    probe = (
        probe_cloud(fam.probe_box())
        if probe_points is None
        else np.atleast_2d(np.asarray(probe_points, dtype=float))
    )
    if probe.shape[0] < 1:
        raise UsageError("probe cloud must be nonempty")
    table = _BlockTable(fam.noise, seed, label, range(replicas))
    table.ensure(n_max)
    diam = np.empty((replicas, n_max + 1))
    box_lo = np.empty((n_max + 1, replicas, fam.dim))
    box_hi = np.empty((n_max + 1, replicas, fam.dim))
    saturated = np.zeros(replicas, dtype=bool)
    for n in range(n_max + 1):
        depths = np.full(replicas, n, dtype=np.int64)
        pts, sat = image_points_at_depths(fam, table.values, depths, probe)
        saturated |= sat
        box_lo[n] = pts.min(axis=1)
        box_hi[n] = pts.max(axis=1)
        diam[:, n] = (box_hi[n] - box_lo[n]).sum(axis=1)
    m0 = _detect_m0(box_lo, box_hi)
    return DiamSeries(diam=diam, box_lo=box_lo, box_hi=box_hi, m0=m0, seed=seed, saturated=saturated)


def fit_rate(series: DiamSeries, n_boot: int = 200) -> RateFit:
    """Log-linear decay fit of the mean diameter past the burn-in depth.

    Replica-mean diameters that hit exact zero early make the series
    degenerate and the rate is reported as 0 by convention.  Otherwise at
    least five usable steps past the burn-in are required.  The confidence
    interval is a replica bootstrap.
    """
    mean = series.mean_diam()
    ns = np.arange(series.n_max + 1)
    window = (ns >= max(series.m0, 1)) & (mean > DIAM_FIT_FLOOR)
    usable = ns[window]
    if (mean[1:] == 0.0).any() and usable.size < 5:
        return RateFit(
            r_hat=0.0,
            c_hat=0.0,
            r_ci=(0.0, 0.0),
            n_range=(int(series.m0), int(series.n_max)),
            r_squared=1.0,
            degenerate=True,
        )
    if usable.size < 5:
        raise DegenerateSeriesError(
            f"only {usable.size} usable steps past m0={series.m0}; need 5"
        )
    fit = loglinear_fit(usable, mean[window])
    r_hat = float(np.exp(fit.slope))
    c_hat = float(np.exp(fit.intercept))

    rng = stream_generator(series.seed, "rate-bootstrap")
    slopes = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, series.replicas, size=series.replicas)
        bmean = series.diam[idx].mean(axis=0)
        bwin = window & (bmean > DIAM_FIT_FLOOR)
        if bwin.sum() < 2:
            slopes[b] = fit.slope
            continue
        slopes[b] = loglinear_fit(ns[bwin], bmean[bwin]).slope
    ci = (float(np.exp(np.quantile(slopes, 0.025))), float(np.exp(np.quantile(slopes, 0.975))))
    warning = None
    if r_hat >= 1.0:
        warning = "no contraction detected (r_hat >= 1); splitting may not hold"
    return RateFit(
        r_hat=r_hat,
        c_hat=c_hat,
        r_ci=ci,
        n_range=(int(usable[0]), int(usable[-1])),
        r_squared=fit.r_squared,
        warning=warning,
    )


@dataclass(frozen=True)
class BoundednessReport:
    """Empirical check that some composition depth maps everything into one bounded set.

    Bounded domains pass trivially.  For unbounded domains the probe box is
    inflated by growing scale factors; boundedness at depth m0 requires the
    image magnitudes to stabilize instead of tracking the probe scale.
    """

    bounded: bool
    m0: int
    bound_box: Box | None
    magnitudes: dict

    def to_dict(self) -> dict:
        return {
            "bounded": self.bounded,
            "m0": self.m0,
            "bound_box": None
            if self.bound_box is None
            else {"lo": self.bound_box.lo.tolist(), "hi": self.bound_box.hi.tolist()},
            "magnitudes": {str(k): v for k, v in self.magnitudes.items()},
        }


def assumption2_check(
    fam: MapFamily,
    seed: int,
    replicas: int = 64,
    m0_max: int = 4,
    scales: tuple[float, ...] = (1.0, 4.0, 16.0),
    growth_tol: float = 1.5,
) -> BoundednessReport:
    """Detect whether depth-m0 images land in a common bounded set.

    Cannot prove boundedness over the true domain; it reports the smallest
    depth at which the max image magnitude stops growing with the probe
    scale across all sampled replicas, or an unbounded verdict.
    """
    if fam.domain is not None:
        return BoundednessReport(True, 1, fam.domain, {})
    table = _BlockTable(fam.noise, seed, "bounded", range(replicas))
    table.ensure(m0_max)
    base = fam.probe_box()
    mags: dict = {}
    for m0 in range(1, m0_max + 1):
        per_scale = []
        sat_any = False
        lo_u = None
        hi_u = None
        for sc in scales:
            probe = probe_cloud(base.scaled(sc))
            depths = np.full(replicas, m0, dtype=np.int64)
            pts, sat = image_points_at_depths(fam, table.values, depths, probe)
            sat_any = sat_any or bool(sat.any())
            per_scale.append(float(np.abs(pts).max()))
            lo_u = pts.min(axis=(0, 1)) if lo_u is None else np.minimum(lo_u, pts.min(axis=(0, 1)))
            hi_u = pts.max(axis=(0, 1)) if hi_u is None else np.maximum(hi_u, pts.max(axis=(0, 1)))
        mags[m0] = per_scale
        small, big = per_scale[0], per_scale[-1]
        ratio = 1.0 if big <= 1e-12 else big / max(small, 1e-12)
        if not sat_any and ratio <= growth_tol:
            return BoundednessReport(True, m0, Box(lo_u, hi_u), mags)
    return BoundednessReport(False, m0_max, None, mags)


@dataclass
class GapSeries:
    """Distance between the forward orbit and the attractor along the same noise."""

    checkpoints: np.ndarray
    gap: np.ndarray
    bound: np.ndarray      # forward probe-image diameter at each checkpoint
    depths: np.ndarray     # backward depth used by each inner pullback
    x0: np.ndarray
    seed: int

    def write_csv(self, path, seed: int | None = None) -> None:
        lines = []
        if seed is not None:
            lines.append(f"# seed={seed}")
        lines.append("n,gap,image_diam_bound,pullback_depth")
        for n, g, b, d in zip(self.checkpoints, self.gap, self.bound, self.depths):
            lines.append(f"{n},{g:.17g},{b:.17g},{d}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def forward_attractor_gap(
    fam: MapFamily,
    seed: int,
    x0,
    n_checkpoints: int,
    tail_tol: float = 1e-10,
    probe_points: np.ndarray | None = None,
    tail_max: int = 4096,
) -> GapSeries:
    """Gap between the forward orbit and the shifted pullback limit.

    At checkpoint n the attractor point reuses the forward noise at indices
    n-1, ..., 0 as the outer composition and extends it backward with fresh
    noise from a checkpoint-specific sub-stream until the probe image is
    ``tail_tol``-small.  Both the orbit point and the attractor point lie in
    the forward image of the probe hull, whose diameter is reported as the
    per-checkpoint bound.
    """
    if n_checkpoints < 1:
        raise UsageError("need at least one checkpoint")
    x = np.asarray(x0, dtype=float).reshape(1, fam.dim)
    probe = (
        probe_cloud(fam.probe_box())
        if probe_points is None
        else np.atleast_2d(np.asarray(probe_points, dtype=float))
    )
    probe = np.unique(np.vstack([probe, x]), axis=0)

    fwd_block = sample_block(fam.noise, seed, 0, n_checkpoints, label="gap-fwd")
    positions = np.empty((n_checkpoints + 1, fam.dim))
    positions[0] = x[0]
    bound = np.empty(n_checkpoints + 1)
    img = probe.copy()
    bound[0] = float((img.max(axis=0) - img.min(axis=0)).sum())
    cur = x.copy()
    for j in range(n_checkpoints):
        a = fwd_block.values[j]
        cur, _ = _clamp_points(fam.raw_batch(a, cur), fam.clamp_bound)
        img, _ = _clamp_points(fam.raw_batch(a, img), fam.clamp_bound)
        positions[j + 1] = cur[0]
        bound[j + 1] = float((img.max(axis=0) - img.min(axis=0)).sum())

    gaps = np.empty(n_checkpoints)
    depths = np.empty(n_checkpoints, dtype=np.int64)
    for cp in range(1, n_checkpoints + 1):
        prefix = fwd_block.values[:cp][::-1]
        tail = _BlockTable(fam.noise, seed, "gap-tail", [cp])
        k = 16
        pi_point = None
        while True:
            tail.ensure(k)
            full = np.concatenate([prefix, tail.values[0]])[None, :]
            pts, _ = image_points_at_depths(
                fam, full, np.array([cp + k], dtype=np.int64), probe
            )
            dm = float((pts[0].max(axis=0) - pts[0].min(axis=0)).sum())
            if dm <= tail_tol:
                pi_point = pts[0].mean(axis=0)
                depths[cp - 1] = k
                break
            if k >= tail_max:
                raise NotConvergedError(tail_max, dm)
            k = min(2 * k, tail_max)
        gaps[cp - 1] = float(np.abs(positions[cp] - pi_point).sum())
    return GapSeries(
        checkpoints=np.arange(1, n_checkpoints + 1),
        gap=gaps,
        bound=bound[1:],
        depths=depths,
        x0=x[0].copy(),
        seed=seed,
    )
