"""Poisson equation for the transfer operator and functional-CLT diagnostics.

The transfer operator ``P`` averages an observable over one noise step.
Its iterated action on a centered observable decays geometrically once
orbit synchronization holds, so the fluctuation corrector can be built as
the truncated series ``psi = sum_j P^j phi`` (the telescoping identity
gives ``(I - P) psi = phi`` up to the dropped tail).  Two variance
estimators are reported side by side:

* martingale form   ``int psi^2 - int (P psi)^2``  (used for normalization)
* residual form     ``int (psi - P psi)^2``        (equals ``int phi^2`` at
  an exact solution)

and both are cross-checked against the direct simulation ``Var(S_n)/n``.
Partial-sum paths normalized by the martingale variance are tested against
Brownian behavior: normality at t=1, linear variance growth, and
uncorrelated increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.spatial import cKDTree

from .engine import _BlockTable, _clamp_points, pullback_batch
from .errors import (
    NoDecayError,
    NonPositiveSigmaError,
    NotConvergedError,
    UsageError,
)
from .families import FiniteNoise, MapFamily, probe_cloud
from .transport import EmpiricalMeasure, pullback_sample
from .streams import derive_seed, stream_generator

__all__ = [
    "Observable",
    "make_observable",
    "transfer_apply",
    "PoissonSolution",
    "poisson_solve",
    "SigmaEstimates",
    "sigma_estimate",
    "PathEnsemble",
    "partial_sum_paths",
    "FcltStats",
    "fclt_tests",
    "CltReport",
    "run_clt_analysis",
]


@dataclass(frozen=True)
class Observable:
    """Centered scalar observable with a known Lipschitz constant.

    ``center`` is the estimated stationary mean of the raw observable and
    is subtracted on evaluation, so the working observable is mean-zero on
    the sample it was centered against.
    """

    kind: str  # "coordinate" | "affine" | "table"
    lipschitz_const: float
    center: float = 0.0
    coord: int = 1
    coeffs: np.ndarray | None = None
    offset: float = 0.0
    table_points: np.ndarray | None = None
    table_values: np.ndarray | None = None

    def __post_init__(self):
        if self.lipschitz_const <= 0:
            raise UsageError("lipschitz_const must be positive")
        if self.kind == "table":
            if self.table_points is None or self.table_values is None:
                raise UsageError("table observable needs points and values")
            object.__setattr__(self, "_tree", cKDTree(np.atleast_2d(self.table_points)))

    def raw(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "coordinate":
            return pts[:, self.coord - 1]
        if self.kind == "affine":
            return pts @ self.coeffs + self.offset
        if self.kind == "table":
            _, idx = self._tree.query(pts)  # type: ignore[attr-defined]
            return np.asarray(self.table_values)[idx]
        raise UsageError(f"unknown observable kind {self.kind!r}")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.raw(pts) - self.center


def make_observable(spec, mu: EmpiricalMeasure, center: float | None = None) -> Observable:
    """Build an observable from a spec string/dict and center it.

    Accepted specs: ``"coord:s"``, ``{"kind": "coordinate", "s": s}``,
    ``{"kind": "affine", "coeffs": [...], "offset": b}``,
    ``{"kind": "table", "points": ..., "values": ..., "lipschitz": L}``.
    The default centering constant is the weighted mean of the raw
    observable over ``mu``; pass an externally estimated stationary mean
    when higher precision is needed (partial sums amplify a centering bias
    delta into a drift of order delta * sqrt(n)).
    """
    if isinstance(spec, str):
        if not spec.startswith("coord:"):
            raise UsageError(f"unknown observable spec {spec!r}")
        spec = {"kind": "coordinate", "s": int(spec.split(":", 1)[1])}
    kind = spec.get("kind")
    if kind == "coordinate":
        s = int(spec.get("s", 1))
        if not (1 <= s <= mu.dim):
            raise UsageError(f"coordinate {s} outside 1..{mu.dim}")
        obs = Observable(kind="coordinate", lipschitz_const=1.0, coord=s)
    elif kind == "affine":
        coeffs = np.asarray(spec["coeffs"], dtype=float)
        if coeffs.shape != (mu.dim,):
            raise UsageError("affine coefficients must match the dimension")
        lip = float(np.max(np.abs(coeffs)))
        if lip == 0:
            raise UsageError("affine observable must be non-constant")
        obs = Observable(
            kind="affine", lipschitz_const=lip, coeffs=coeffs, offset=float(spec.get("offset", 0.0))
        )
    elif kind == "table":
        obs = Observable(
            kind="table",
            lipschitz_const=float(spec.get("lipschitz", 1.0)),
            table_points=np.atleast_2d(np.asarray(spec["points"], dtype=float)),
            table_values=np.asarray(spec["values"], dtype=float),
        )
    else:
        raise UsageError(f"unknown observable kind {kind!r}")
    if center is None:
        center = float(mu.weights @ obs.raw(mu.points))
    return Observable(
        kind=obs.kind,
        lipschitz_const=obs.lipschitz_const,
        center=float(center),
        coord=obs.coord,
        coeffs=obs.coeffs,
        offset=obs.offset,
        table_points=obs.table_points,
        table_values=obs.table_values,
    )


def _advance_particles(fam: MapFamily, cur: np.ndarray, col: np.ndarray) -> np.ndarray:
    """One chain step for a block of particles, grouped by noise value."""
    if isinstance(fam.noise, FiniteNoise):
        for a in np.unique(col):
            rows = col == a
            out, _ = _clamp_points(fam.raw_batch(int(a), cur[rows]), fam.clamp_bound)
            cur[rows] = out
    else:
        for r in range(cur.shape[0]):
            out, _ = _clamp_points(fam.raw_batch(col[r], cur[r : r + 1]), fam.clamp_bound)
            cur[r] = out[0]
    return cur


def stationary_mean(
    fam: MapFamily,
    obs: Observable,
    seed: int,
    replicas: int = 512,
    steps: int = 40_000,
    pullback_tol: float = 1e-9,
    pullback_n_max: int = 4096,
) -> float:
    """High-precision stationary mean of the raw observable by ergodic averaging.

    Chains start from per-replica pullback limits (stationary, so no
    burn-in bias) and the raw observable is averaged over all replicas and
    steps; the error scales like sqrt(var / (replicas * steps)).
    """
    probe = probe_cloud(fam.probe_box())
    batch = pullback_batch(
        fam, seed, range(replicas), probe, pullback_tol, pullback_n_max, label="ergodic-start"
    )
    if not batch.converged.all():
        raise NotConvergedError(pullback_n_max, float(batch.diam.max()))
    cur = batch.points.copy()
    table = _BlockTable(fam.noise, seed, "ergodic-chain", range(replicas))
    table.ensure(steps)
    total = float(np.sum(obs.raw(cur)))
    count = replicas
    for j in range(steps):
        cur = _advance_particles(fam, cur, table.values[:, j])
        total += float(np.sum(obs.raw(cur)))
        count += replicas
    return total / count


def transfer_apply(
    fam: MapFamily,
    phi,
    grid: np.ndarray,
    n_inner: int = 1000,
    seed: int = 0,
    exact: bool | None = None,
    label: str = "transfer",
) -> np.ndarray:
    """One application of the transfer operator to ``phi`` on the grid.

    Finite noise defaults to exact enumeration over the symbols (zero Monte
    Carlo error); otherwise ``n_inner`` i.i.d. parameter draws are averaged,
    the same draws for every grid point.
    """
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    if exact is None:
        exact = isinstance(fam.noise, FiniteNoise)
    if exact:
        if not isinstance(fam.noise, FiniteNoise):
            raise UsageError("exact transfer enumeration requires finite noise")
        out = np.zeros(pts.shape[0])
        for a, p in enumerate(fam.noise.probs, start=1):
            if p == 0.0:
                continue
            img, _ = _clamp_points(fam.raw_batch(a, pts), fam.clamp_bound)
            out += p * np.asarray(phi(img))
        return out
    if n_inner < 100:
        raise UsageError("need at least 100 inner samples")
    gen = stream_generator(seed, label)
    out = np.zeros(pts.shape[0])
    if isinstance(fam.noise, FiniteNoise):
        cum = np.cumsum(fam.noise.probs)
        syms = np.clip(np.searchsorted(cum, gen.random(n_inner), side="right") + 1, 1, fam.noise.q)
        vals, counts = np.unique(syms, return_counts=True)
        for a, c in zip(vals, counts):
            img, _ = _clamp_points(fam.raw_batch(int(a), pts), fam.clamp_bound)
            out += (c / n_inner) * np.asarray(phi(img))
        return out
    box = fam.noise.box
    draws = box.lo + gen.random((n_inner, box.dim)) * (box.hi - box.lo)
    for alpha in draws:
        img, _ = _clamp_points(fam.raw_batch(alpha, pts), fam.clamp_bound)
        out += np.asarray(phi(img))
    return out / n_inner


def _pj_exact(fam: MapFamily, phi, pts: np.ndarray, j: int) -> np.ndarray:
    """Exact P^j phi by depth-first enumeration of the q^j one-step branches."""
    if j == 0:
        return np.asarray(phi(pts), dtype=float)
    acc = np.zeros(pts.shape[0])
    for a, p in enumerate(fam.noise.probs, start=1):
        if p == 0.0:
            continue
        img, _ = _clamp_points(fam.raw_batch(a, pts), fam.clamp_bound)
        acc += p * _pj_exact(fam, phi, img, j - 1)
    return acc


class _McChains:
    """Common-chain Monte Carlo estimates of P^j phi on a fixed point set."""

    def __init__(self, fam: MapFamily, phi, pts: np.ndarray, n_chains: int, seed: int, label: str):
        self.fam = fam
        self.phi = phi
        self.n_chains = n_chains
        self.states = np.repeat(pts[None, :, :], n_chains, axis=0)
        self.gen = stream_generator(seed, label)
        self.depth = 0
        self._cache: dict[int, np.ndarray] = {0: np.asarray(phi(pts), dtype=float)}

    def _step(self) -> None:
        fam = self.fam
        flatten = self.states.reshape(self.n_chains, -1)
        if isinstance(fam.noise, FiniteNoise):
            cum = np.cumsum(fam.noise.probs)
            syms = np.clip(
                np.searchsorted(cum, self.gen.random(self.n_chains), side="right") + 1,
                1,
                fam.noise.q,
            )
            for a in np.unique(syms):
                rows = syms == a
                block = self.states[rows].reshape(-1, fam.dim)
                out, _ = _clamp_points(fam.raw_batch(int(a), block), fam.clamp_bound)
                self.states[rows] = out.reshape(int(rows.sum()), -1, fam.dim)
        else:
            box = fam.noise.box
            draws = box.lo + self.gen.random((self.n_chains, box.dim)) * (box.hi - box.lo)
            for m in range(self.n_chains):
                out, _ = _clamp_points(fam.raw_batch(draws[m], self.states[m]), fam.clamp_bound)
                self.states[m] = out
        self.depth += 1
        vals = self.phi(self.states.reshape(-1, fam.dim)).reshape(self.n_chains, -1)
        self._cache[self.depth] = vals.mean(axis=0)

    def term(self, j: int) -> np.ndarray:
        while self.depth < j:
            self._step()
        return self._cache[j]


class _TermEvaluator:
    """Evaluates P^j phi anywhere: exactly while q^j stays small, else by chains."""

    def __init__(self, fam: MapFamily, phi, n_chains: int, seed: int, exact_cap: int):
        self.fam = fam
        self.phi = phi
        self.n_chains = n_chains
        self.seed = seed
        if isinstance(fam.noise, FiniteNoise):
            q = fam.noise.q
            j, budget = 0, 1
            while budget * q <= exact_cap:
                budget *= q
                j += 1
            self.exact_j_max = j
        else:
            self.exact_j_max = -1

    def method_for(self, j: int) -> str:
        return "exact" if j <= self.exact_j_max else "monte-carlo"

    def terms_on(self, pts: np.ndarray, j_list, label: str) -> list[np.ndarray]:
        chains = None
        out = []
        for j in j_list:
            if j <= self.exact_j_max:
                out.append(_pj_exact(self.fam, self.phi, pts, j))
            else:
                if chains is None:
                    chains = _McChains(self.fam, self.phi, pts, self.n_chains, self.seed, label)
                out.append(chains.term(j))
        return out

    def psi_on(self, pts: np.ndarray, j_trunc: int, label: str) -> np.ndarray:
        terms = self.terms_on(pts, range(j_trunc + 1), label)
        return np.sum(terms, axis=0)


@dataclass
class PoissonSolution:
    """Truncated-series solution of ``(I - P) psi = phi`` on a sample grid.

    The solution is the mean-zero representative: constants are invariant
    under the operator, the corrector is only defined modulo constants, and
    an empirically centered observable carries a residual constant mode of
    the order of the sampling error.  Every series term is therefore
    centered on the grid (``term_means`` records the removed constants) and
    ``phi_values``, ``psi``, ``p_psi``, and the residual all live in that
    quotient.  Both variance estimators are invariant under the projection.
    """

    grid: np.ndarray
    psi: np.ndarray
    p_psi: np.ndarray
    phi_values: np.ndarray
    truncation_j: int
    term_norms: np.ndarray
    term_means: np.ndarray
    residual: np.ndarray
    residual_norm: float
    method: str
    converged: bool
    tol: float


def poisson_solve(
    fam: MapFamily,
    phi: Observable,
    mu_sample: EmpiricalMeasure,
    grid_size: int = 2048,
    tol: float = 1e-4,
    j_max: int = 60,
    seed: int = 0,
    n_chains: int = 2000,
    exact_cap: int = 4096,
) -> PoissonSolution:
    """Build ``psi = sum_{j<=J} P^j phi`` on a grid of stationary sample points.

    Every term is centered on the grid before use: the iterated operator
    drives any observable toward its stationary mean, and with empirical
    centering that mean is a nonzero constant of the order of the sampling
    error, which constants the operator then preserves forever.  Projecting
    it out keeps the terms decaying, keeps the truncated telescoping exact
    (in enumeration mode the residual is literally the first dropped term),
    and changes nothing that the variance estimators can see.

    Truncates at the first centered term whose sup norm drops to ``tol``;
    raises :class:`NoDecayError` when ten consecutive terms fail to decay
    by a factor 0.95, which signals a family outside the synchronization
    regime.  ``P psi`` is evaluated by one more transfer application with
    the series re-expanded at the queried points (no interpolation).
    """
    if mu_sample.dim != fam.dim:
        raise UsageError("sample dimension does not match family")
    if grid_size < 1 or j_max < 1:
        raise UsageError("grid_size and j_max must be >= 1")
    if mu_sample.n <= grid_size:
        grid = mu_sample.points.copy()
    else:
        idx = stream_generator(seed, "poisson-grid").choice(
            mu_sample.n, size=grid_size, replace=False
        )
        grid = mu_sample.points[np.sort(idx)]

    ev = _TermEvaluator(fam, phi, n_chains, seed, exact_cap)
    terms: list[np.ndarray] = []
    means: list[float] = []
    norms: list[float] = []
    streak = 0
    converged = False
    chains = None
    for j in range(j_max + 1):
        if j <= ev.exact_j_max:
            raw = _pj_exact(fam, phi, grid, j)
        else:
            if chains is None:
                chains = _McChains(fam, phi, grid, n_chains, seed, "poisson-chain")
            raw = chains.term(j)
        m = float(raw.mean())
        t = raw - m
        terms.append(t)
        means.append(m)
        norms.append(float(np.max(np.abs(t))))
        if j >= 1:
            prev = norms[j - 1]
            ratio = np.inf if prev == 0 else norms[j] / prev
            streak = streak + 1 if ratio >= 0.95 else 0
            if streak >= 10:
                raise NoDecayError(
                    f"term sup norms stalled near {norms[j]:.3e} for 10 consecutive steps"
                )
        if norms[j] <= tol:
            converged = True
            break
    truncation_j = len(terms) - 1
    psi = np.sum(terms, axis=0)

    def psi_eval(pts):
        raw_terms = ev.terms_on(pts, range(truncation_j + 1), "poisson-reexp")
        return np.sum([rt - m for rt, m in zip(raw_terms, means)], axis=0)

    p_raw = transfer_apply(
        fam,
        psi_eval,
        grid,
        n_inner=n_chains,
        seed=derive_seed(seed, "poisson-ppsi"),
    )
    p_psi = p_raw - float(p_raw.mean())
    phi_vals = terms[0]
    residual = psi - p_psi - phi_vals
    methods = {ev.method_for(j) for j in range(truncation_j + 1)}
    method = methods.pop() if len(methods) == 1 else "mixed"
    return PoissonSolution(
        grid=grid,
        psi=psi,
        p_psi=p_psi,
        phi_values=phi_vals,
        truncation_j=truncation_j,
        term_norms=np.asarray(norms),
        term_means=np.asarray(means),
        residual=residual,
        residual_norm=float(np.max(np.abs(residual))),
        method=method,
        converged=converged,
        tol=tol,
    )


@dataclass(frozen=True)
class SigmaEstimates:
    sigma2_mg: float
    sigma2_resid: float
    discrepancy: float


def sigma_estimate(sol: PoissonSolution) -> SigmaEstimates:
    """Both variance estimators over the solution grid.

    The martingale form is the primary normalizer; the residual form equals
    ``int phi^2`` whenever the Poisson equation holds exactly and is
    reported alongside for comparison.
    """
    mg = float(np.mean(sol.psi**2) - np.mean(sol.p_psi**2))
    resid = float(np.mean((sol.psi - sol.p_psi) ** 2))
    if mg <= 0:
        raise NonPositiveSigmaError(
            f"martingale variance {mg:.3e} is non-positive; observable too close to constant"
        )
    return SigmaEstimates(sigma2_mg=mg, sigma2_resid=resid, discrepancy=abs(mg - resid))


@dataclass
class PathEnsemble:
    """Normalized partial-sum paths, one row per replica chain."""

    paths: np.ndarray      # (replicas, len(grid_t))
    grid_t: np.ndarray
    n: int
    sigma2: float
    final_sums: np.ndarray  # (replicas,) un-normalized S_n

    def write_csv(self, path, seed: int | None = None) -> None:
        lines = []
        if seed is not None:
            lines.append(f"# seed={seed}")
        lines.append("replica,t,y")
        for r in range(self.paths.shape[0]):
            for t, y in zip(self.grid_t, self.paths[r]):
                lines.append(f"{r},{t:.17g},{y:.17g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def partial_sum_paths(
    fam: MapFamily,
    phi: Observable,
    sigma2: float,
    n: int,
    grid_t: np.ndarray | None,
    replicas: int,
    seed: int,
    start: str | np.ndarray = "stationary",
    pullback_tol: float = 1e-9,
    pullback_n_max: int = 4096,
) -> PathEnsemble:
    """Normalized partial sums ``sum_{j<=nt} phi(Z_j) / (sigma sqrt(n))``.

    Chains start from per-replica pullback limits by default (a stationary
    start); pass a point to exercise an arbitrary initial condition.
    """
    if sigma2 <= 0:
        raise UsageError("sigma2 must be positive")
    if n < 1 or replicas < 1:
        raise UsageError("n and replicas must be >= 1")
    if grid_t is None:
        grid_t = np.linspace(0.0, 1.0, 21)
    grid_t = np.asarray(grid_t, dtype=float)
    if grid_t.ndim != 1 or grid_t.size < 2 or np.any(np.diff(grid_t) <= 0):
        raise UsageError("grid_t must be strictly increasing with >= 2 points")
    if grid_t[0] < 0 or abs(grid_t[-1] - 1.0) > 1e-12:
        raise UsageError("grid_t must live in [0, 1] and end at 1")

    if isinstance(start, str):
        if start != "stationary":
            raise UsageError("start must be 'stationary' or a point")
        probe = probe_cloud(fam.probe_box())
        batch = pullback_batch(
            fam, seed, range(replicas), probe, pullback_tol, pullback_n_max, label="clt-start"
        )
        if not batch.converged.all():
            raise NotConvergedError(pullback_n_max, float(batch.diam.max()))
        cur = batch.points.copy()
    else:
        cur = np.tile(np.asarray(start, dtype=float).reshape(1, fam.dim), (replicas, 1))

    table = _BlockTable(fam.noise, seed, "clt-chain", range(replicas))
    table.ensure(n)
    checkpoints = np.floor(n * grid_t + 1e-9).astype(np.int64)
    paths = np.empty((replicas, grid_t.size))
    sums = np.asarray(phi(cur), dtype=float).copy()
    scale = 1.0 / (math.sqrt(sigma2) * math.sqrt(n))
    for i in np.nonzero(checkpoints == 0)[0]:
        paths[:, i] = sums * scale
    for j in range(1, n + 1):
        cur = _advance_particles(fam, cur, table.values[:, j - 1])
        sums += phi(cur)
        for i in np.nonzero(checkpoints == j)[0]:
            paths[:, i] = sums * scale
    return PathEnsemble(paths=paths, grid_t=grid_t, n=n, sigma2=sigma2, final_sums=sums.copy())


@dataclass(frozen=True)
class FcltStats:
    ks_stat: float
    ks_pvalue: float
    var_slope: float
    increment_corr: float
    sigma2_direct: float


def fclt_tests(ensemble: PathEnsemble, min_replicas: int = 500) -> FcltStats:
    """Brownian-limit diagnostics on a path ensemble.

    Reports the one-sample Kolmogorov-Smirnov test of the endpoint values
    against the standard normal, the regression slope of Var(Y(t)) on t
    (Brownian scaling gives slope 1), and the mean correlation between the
    quarter increments (independent increments give 0).
    """
    paths = ensemble.paths
    if paths.shape[0] < min_replicas:
        raise UsageError(f"need >= {min_replicas} replicas, got {paths.shape[0]}")
    ks_stat, ks_p = sps.kstest(paths[:, -1], "norm")
    var_t = paths.var(axis=0, ddof=1)
    slope = float(np.polyfit(ensemble.grid_t, var_t, 1)[0])
    targets = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    idx = np.unique([int(np.argmin(np.abs(ensemble.grid_t - t))) for t in targets])
    increments = np.diff(paths[:, idx], axis=1)
    corr = np.corrcoef(increments.T)
    iu = np.triu_indices(corr.shape[0], k=1)
    mean_corr = float(corr[iu].mean())
    sigma2_direct = float(ensemble.final_sums.var(ddof=1) / ensemble.n)
    return FcltStats(
        ks_stat=float(ks_stat),
        ks_pvalue=float(ks_p),
        var_slope=slope,
        increment_corr=mean_corr,
        sigma2_direct=sigma2_direct,
    )


@dataclass
class CltReport:
    """End-to-end CLT pipeline summary."""

    sigma2_mg: float
    sigma2_resid: float
    sigma2_direct: float
    ks_stat: float
    ks_pvalue: float
    var_slope: float
    increment_corr: float
    truncation_j: int
    residual_norm: float
    poisson_method: str
    n: int
    replicas: int
    observable: object

    def to_dict(self) -> dict:
        return {
            "sigma2_mg": self.sigma2_mg,
            "sigma2_resid": self.sigma2_resid,
            "sigma2_direct": self.sigma2_direct,
            "ks_stat": self.ks_stat,
            "ks_pvalue": self.ks_pvalue,
            "var_slope": self.var_slope,
            "increment_corr": self.increment_corr,
            "truncation_j": self.truncation_j,
            "residual_norm": self.residual_norm,
            "poisson_method": self.poisson_method,
            "n": self.n,
            "replicas": self.replicas,
            "observable": self.observable if not isinstance(self.observable, np.ndarray) else self.observable.tolist(),
        }


def run_clt_analysis(
    fam: MapFamily,
    observable_spec,
    seed: int,
    n: int = 10_000,
    replicas: int = 1000,
    mu_size: int = 4096,
    grid_size: int = 2048,
    tol: float = 1e-4,
    j_max: int = 60,
    grid_t: np.ndarray | None = None,
    pullback_tol: float = 1e-9,
    threads: int = 1,
    center_replicas: int = 512,
    center_steps: int = 40_000,
) -> tuple[CltReport, PathEnsemble]:
    """Full pipeline: stationary sample, corrector, variance, paths, diagnostics.

    The observable is centered with a dedicated ergodic pass rather than
    the pullback sample alone: a centering bias delta drifts the n-step
    partial sums by delta * sqrt(n) / sigma, so testing normality at
    n = 10^4 needs the stationary mean a couple of orders of magnitude
    tighter than a 4096-point sample provides.
    """
    mu = pullback_sample(fam, seed, mu_size, pullback_tol, threads=threads)
    phi0 = make_observable(observable_spec, mu)
    center = stationary_mean(
        fam,
        phi0,
        derive_seed(seed, "center"),
        replicas=center_replicas,
        steps=center_steps,
        pullback_tol=pullback_tol,
    )
    phi = make_observable(observable_spec, mu, center=center)
    sol = poisson_solve(
        fam, phi, mu, grid_size=grid_size, tol=tol, j_max=j_max, seed=derive_seed(seed, "poisson")
    )
    est = sigma_estimate(sol)
    ensemble = partial_sum_paths(
        fam,
        phi,
        est.sigma2_mg,
        n,
        grid_t,
        replicas,
        derive_seed(seed, "paths"),
        pullback_tol=pullback_tol,
    )
    stats = fclt_tests(ensemble, min_replicas=min(500, replicas))
    report = CltReport(
        sigma2_mg=est.sigma2_mg,
        sigma2_resid=est.sigma2_resid,
        sigma2_direct=stats.sigma2_direct,
        ks_stat=stats.ks_stat,
        ks_pvalue=stats.ks_pvalue,
        var_slope=stats.var_slope,
        increment_corr=stats.increment_corr,
        truncation_j=sol.truncation_j,
        residual_norm=sol.residual_norm,
        poisson_method=sol.method,
        n=n,
        replicas=replicas,
        observable=observable_spec,
    )
    return report, ensemble
