"""Verification of the order-splitting condition and membership-decay estimates.

The splitting condition asks for two positive-mass sets of length-m noise
blocks whose block compositions map the whole domain to strictly ordered
sets.  Verification here is certificate-style: image boxes of a sampled
probe cloud are compared conservatively, so a positive verdict is sound
(for the sampled probe) while a negative one is never a disproof.

``sigma_decay`` estimates, per composition depth, the probability that a
reference value stays inside the projected image of the domain.  Under a
verified splitting with block-set masses at least rho, that probability is
bounded by (1 - rho)^j, which the fitted decay constant can be checked
against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import _BlockTable, image_points_at_depths
from .errors import UsageError
from .families import FiniteNoise, MapFamily, probe_cloud
from .fitting import loglinear_fit
from .order import JOrder
from .streams import stream_generator

__all__ = [
    "SplittingReport",
    "SigmaDecaySeries",
    "exact_splitting_scan",
    "find_splitting_witness",
    "sigma_decay",
]

_EXACT_SCAN_CAP = 10**6
_STORE_BLOCKS_CAP = 1024


@dataclass(frozen=True)
class SplittingReport:
    """Outcome of a splitting search at block length ``m``.

    ``verified`` certifies that every stored A-block image box compares
    strictly below every B-block image box (in the transformed order) on
    the sampled probe.  Masses are exact for the scan and frequency
    estimates (with binomial standard errors) for the Monte Carlo search.
    An unverified report is an absence of witness, never a disproof.
    """

    m: int
    verified: bool
    method: str  # "exact-scan" | "monte-carlo"
    witness_a: np.ndarray | None = None
    witness_b: np.ndarray | None = None
    mass_a: float = 0.0
    mass_b: float = 0.0
    stderr_a: float | None = None
    stderr_b: float | None = None
    n_blocks_a: int = 0
    n_blocks_b: int = 0
    blocks_a: np.ndarray | None = field(default=None, repr=False)
    blocks_b: np.ndarray | None = field(default=None, repr=False)

    @property
    def rho(self) -> float:
        """min of the two block-set masses; 1 - rho bounds the membership decay."""
        return min(self.mass_a, self.mass_b)

    def to_dict(self) -> dict:
        def _blk(v):
            return None if v is None else np.asarray(v).tolist()

        return {
            "m": self.m,
            "verified": self.verified,
            "method": self.method,
            "witness_a": _blk(self.witness_a),
            "witness_b": _blk(self.witness_b),
            "mass_a": self.mass_a,
            "mass_b": self.mass_b,
            "stderr_a": self.stderr_a,
            "stderr_b": self.stderr_b,
            "n_blocks_a": self.n_blocks_a,
            "n_blocks_b": self.n_blocks_b,
        }


def _signed_box_coords(lo: np.ndarray, hi: np.ndarray, order: JOrder):
    """Flip decreasing coordinates so the order becomes componentwise."""
    signs = order.signs
    t_lo = np.where(signs > 0, lo, -hi)
    t_hi = np.where(signs > 0, hi, -lo)
    return t_lo, t_hi


def _block_image_boxes(fam: MapFamily, blocks: np.ndarray, m: int, probe: np.ndarray):
    depths = np.full(blocks.shape[0], m, dtype=np.int64)
    pts, _ = image_points_at_depths(fam, blocks, depths, probe)
    return pts.min(axis=1), pts.max(axis=1)


def _find_ordered_pair(t_lo, t_hi, tol, chunk=512):
    """First (i, j) with box_i strictly below box_j componentwise, or None."""
    n = t_lo.shape[0]
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        # below[i, j] iff t_hi[i] + tol < t_lo[j] in every coordinate
        below = np.all(t_hi[start:stop, None, :] + tol < t_lo[None, :, :], axis=2)
        if below.any():
            i_rel, j = np.unravel_index(np.argmax(below), below.shape)
            return start + int(i_rel), int(j)
    return None


def _default_probe(fam: MapFamily, probe_points):
    if probe_points is None:
        return probe_cloud(fam.probe_box())
    return np.atleast_2d(np.asarray(probe_points, dtype=float))


def exact_splitting_scan(
    fam: MapFamily,
    order: JOrder,
    m: int,
    probe_points: np.ndarray | None = None,
) -> SplittingReport:
    """Enumerate all q^m blocks of a finite-noise family and search for a split.

    After a first ordered pair is found, both sides are grown greedily by
    block mass while every cross-side comparison stays strict, and the
    masses are computed exactly from the probability vector.
    """
    if not isinstance(fam.noise, FiniteNoise):
        raise UsageError("exact scan requires finite noise; use find_splitting_witness")
    q = fam.noise.q
    if m < 1:
        raise UsageError("block length m must be >= 1")
    if q**m > _EXACT_SCAN_CAP:
        raise UsageError(f"q^m = {q ** m} exceeds the exact-scan cap {_EXACT_SCAN_CAP}")
    probe = _default_probe(fam, probe_points)
    blocks = np.array(list(itertools.product(range(1, q + 1), repeat=m)), dtype=np.int64)
    lo, hi = _block_image_boxes(fam, blocks, m, probe)
    t_lo, t_hi = _signed_box_coords(lo, hi, order)
    pair = _find_ordered_pair(t_lo, t_hi, order.strict_tol)
    if pair is None:
        return SplittingReport(m=m, verified=False, method="exact-scan")
    ia, ib = pair

    probs = np.asarray(fam.noise.probs)
    masses = np.prod(probs[blocks - 1], axis=1)
    tol = order.strict_tol

    a_set = [ia]
    b_set = [ib]
    others = [i for i in np.argsort(-masses) if i != ia and i != ib]
    for c in others:
        if np.all(t_hi[c] + tol < t_lo[b_set].min(axis=0)):
            a_set.append(int(c))
        elif np.all(t_hi[a_set].max(axis=0) + tol < t_lo[c]):
            b_set.append(int(c))
    a_idx = np.array(sorted(a_set))
    b_idx = np.array(sorted(b_set))
    return SplittingReport(
        m=m,
        verified=True,
        method="exact-scan",
        witness_a=blocks[ia].copy(),
        witness_b=blocks[ib].copy(),
        mass_a=float(masses[a_idx].sum()),
        mass_b=float(masses[b_idx].sum()),
        n_blocks_a=len(a_idx),
        n_blocks_b=len(b_idx),
        blocks_a=blocks[a_idx] if len(a_idx) <= _STORE_BLOCKS_CAP else None,
        blocks_b=blocks[b_idx] if len(b_idx) <= _STORE_BLOCKS_CAP else None,
    )


def find_splitting_witness(
    fam: MapFamily,
    order: JOrder,
    m_max: int,
    probe_points: np.ndarray | None = None,
    n_blocks: int = 32,
    seed: int = 0,
) -> SplittingReport:
    """Monte Carlo witness search over sampled blocks of increasing length.

    Works for finite and continuous noise alike.  Masses are the sample
    frequencies of blocks ordered against the opposite witness, with
    binomial standard errors.
    """
    if n_blocks < 2:
        raise UsageError("need at least 2 sampled blocks")
    if m_max < 1:
        raise UsageError("m_max must be >= 1")
    probe = _default_probe(fam, probe_points)
    tol = order.strict_tol
    for m in range(1, m_max + 1):
        gen = stream_generator(seed, "witness", m)
        if isinstance(fam.noise, FiniteNoise):
            cum = np.cumsum(fam.noise.probs)
            u = gen.random((n_blocks, m))
            blocks = np.clip(
                np.searchsorted(cum, u, side="right") + 1, 1, fam.noise.q
            ).astype(np.int64)
        else:
            box = fam.noise.box
            u = gen.random((n_blocks, m, box.dim))
            blocks = box.lo + u * (box.hi - box.lo)
        lo, hi = _block_image_boxes(fam, blocks, m, probe)
        t_lo, t_hi = _signed_box_coords(lo, hi, order)
        pair = _find_ordered_pair(t_lo, t_hi, tol)
        if pair is None:
            continue
        ia, ib = pair
        below_b = np.all(t_hi + tol < t_lo[ib], axis=1)
        above_a = np.all(t_hi[ia] + tol < t_lo, axis=1)
        p_a = float(below_b.mean())
        p_b = float(above_a.mean())
        return SplittingReport(
            m=m,
            verified=True,
            method="monte-carlo",
            witness_a=blocks[ia].copy(),
            witness_b=blocks[ib].copy(),
            mass_a=p_a,
            mass_b=p_b,
            stderr_a=math.sqrt(p_a * (1 - p_a) / n_blocks),
            stderr_b=math.sqrt(p_b * (1 - p_b) / n_blocks),
            n_blocks_a=int(below_b.sum()),
            n_blocks_b=int(above_a.sum()),
        )
    return SplittingReport(m=m_max, verified=False, method="monte-carlo")


@dataclass(frozen=True)
class SigmaDecaySeries:
    """Estimated membership probabilities p_j at depths j*m, with a decay fit.

    ``truncated_at`` records the first depth index whose estimate hit zero;
    the series stops there because deeper images are nested inside shallower
    ones and the estimate can only stay zero.
    """

    x: float
    s: int
    m: int
    j: np.ndarray
    p_hat: np.ndarray
    stderr: np.ndarray
    lambda_bound: float
    replicas: int
    truncated_at: int | None = None

    def write_csv(self, path, seed: int | None = None) -> None:
        lines = []
        if seed is not None:
            lines.append(f"# seed={seed}")
        lines.append("j,p_hat,stderr,lambda_pow_j")
        for j, p, se in zip(self.j, self.p_hat, self.stderr):
            lines.append(
                f"{j},{p:.17g},{se:.17g},{self.lambda_bound ** j:.17g}"
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def sigma_decay(
    fam: MapFamily,
    order: JOrder,
    m: int,
    x: float,
    s: int,
    j_max: int,
    replicas: int,
    probe_points: np.ndarray | None = None,
    seed: int = 0,
) -> SigmaDecaySeries:
    """Monte Carlo estimate of P(x lies in the s-projection of the depth j*m image).

    Each replica owns one noise stream; the image of the probe cloud is
    recomputed from scratch at every depth (reverse-order prefixes do not
    extend incrementally).  The decay constant is fitted by weighted least
    squares on the log of the positive estimates.
    """
    if replicas < 100:
        raise UsageError("sigma decay needs at least 100 replicas for usable errors")
    if not (1 <= s <= fam.dim):
        raise UsageError(f"coordinate s={s} outside 1..{fam.dim}")
    if j_max < 1 or m < 1:
        raise UsageError("m and j_max must be >= 1")
    probe = _default_probe(fam, probe_points)
    table = _BlockTable(fam.noise, seed, "sigma", range(replicas))
    table.ensure(j_max * m)
    xval = float(x)

    js, ps, ses = [], [], []
    truncated = None
    for j in range(1, j_max + 1):
        depths = np.full(replicas, j * m, dtype=np.int64)
        pts, _ = image_points_at_depths(fam, table.values, depths, probe)
        coord = pts[:, :, s - 1]
        member = (coord.min(axis=1) <= xval) & (xval <= coord.max(axis=1))
        p = float(member.mean())
        js.append(j)
        ps.append(p)
        ses.append(math.sqrt(p * (1 - p) / replicas))
        if p == 0.0:
            truncated = j
            break

    j_arr = np.array(js, dtype=np.int64)
    p_arr = np.array(ps)
    se_arr = np.array(ses)
    pos = p_arr > 0
    if pos.sum() >= 2:
        w = replicas * p_arr[pos] / np.maximum(1.0 - p_arr[pos], 1.0 / replicas)
        fit = loglinear_fit(j_arr[pos], p_arr[pos], weights=w)
        lam = float(np.exp(fit.slope))
    elif pos.sum() == 1:
        jj = int(j_arr[pos][0])
        lam = float(p_arr[pos][0] ** (1.0 / jj))
    else:
        lam = 0.0
    return SigmaDecaySeries(
        x=xval,
        s=int(s),
        m=int(m),
        j=j_arr,
        p_hat=p_arr,
        stderr=se_arr,
        lambda_bound=lam,
        replicas=int(replicas),
        truncated_at=truncated,
    )
