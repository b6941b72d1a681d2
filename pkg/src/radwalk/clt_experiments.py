"""Simulate the radial walks, decompose the centered squared-radius
statistic into its per-step and cross-term parts, predict exact finite-n
covariances, estimate empirical ones, and render pass/fail verdicts.

Let S_n be the walk sum and r2 the law's second-moment matrix.  Per trial

    Xi_n = gram(S_n) - n r2        (the statistic under test)
    A_n  = sum_i gram(X_i) - n r2  (per-step squared radii, centered)
    B_n  = Xi_n - A_n              (cross terms sum_{a != b} X_a' X_b)

hold exactly, and the trial covariances satisfy the exact finite-n identity

    Cov(vec Xi_n) = n Sigma(nu) + (n (n-1) / p) T(nu)

with zero cross-covariance between the parts: every cross term carries a
factor that is odd in some row of one step, so its expectation vanishes.

Trials are split into fixed-size chunks; each chunk owns a counter-based
random stream keyed by (seed, stream tag, chunk index), so results are
bit-identical for a fixed seed regardless of how chunks are scheduled
across workers.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy import stats

from .errors import BadArity, TooFewSamples
from .matrix_core import frobenius_norm
from .radial_measures import (
    RadialLaw,
    _orbit_batch,
    kappa_all_rows_even,
    kappa_weight,
    r2,
    radial_moment_mc,
    sigma_nu,
    t_nu,
    uniform_sphere_cosine,
)

__all__ = [
    "CHUNK_TRIALS",
    "REGIMES",
    "WalkConfig",
    "TrialStatistics",
    "CovarianceEstimate",
    "ExperimentReport",
    "MomentDecayReport",
    "trial_stream",
    "run_walk_trial",
    "fast_walk_trial_q1",
    "predict_covariances",
    "estimate_covariance",
    "verify_clt",
    "moment_decay_experiment",
]

# Fixed work-unit size: chunk k of an experiment always covers trials
# [k*CHUNK_TRIALS, ...), whatever the worker count.
CHUNK_TRIALS = 512

REGIMES = ("CLT_I", "CLT_II", "MIXED")


@dataclass(frozen=True)
class WalkConfig:
    """Parameters of one walk experiment."""

    nu: RadialLaw
    n: int
    p: int
    trials: int
    regime: str
    c: float | None = None
    seed: int = 0
    fast_path: bool = False

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise BadArity(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.p < self.nu.q:
            raise BadArity(f"need p >= q, got p={self.p}, q={self.nu.q}")
        if self.trials < 100:
            raise BadArity(f"need trials >= 100, got {self.trials}")
        if self.fast_path and self.nu.q != 1:
            raise BadArity("fast_path requires q = 1")
        if self.seed < 0:
            raise BadArity("seed must be nonnegative")

    @property
    def scale(self) -> float:
        """Normalization applied to Xi_n: sqrt(p)/n for CLT I, 1/sqrt(n) otherwise."""
        if self.regime == "CLT_I":
            return sqrt(self.p) / self.n
        return 1.0 / sqrt(self.n)

    @property
    def limit_c(self) -> float:
        """Ratio entering the CLT II limit covariance Sigma + c T."""
        if self.c is not None:
            return float(self.c)
        return 0.0 if self.regime == "CLT_II" else self.n / self.p


@dataclass
class TrialStatistics:
    """Per-trial row-stacked vectors of the statistic and its two parts."""

    xi: np.ndarray  # (q*q,)
    a: np.ndarray
    b: np.ndarray
    normalization: float
    b_direct: np.ndarray | None = None


@dataclass
class CovarianceEstimate:
    mean: np.ndarray
    cov: np.ndarray
    stderr: np.ndarray


def trial_stream(seed: int, tag: int, chunk: int) -> np.random.Generator:
    """Counter-based stream for one work unit, independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(tag), int(chunk)))))


def _sym_batch(m: np.ndarray) -> np.ndarray:
    return (m + m.transpose(0, 2, 1)) / 2.0


def _walk_chunk(nu: RadialLaw, n: int, p: int, m: int, rng: np.random.Generator,
                validate: bool = False):
    """m direct-path trials; returns (xi, a, b, b_direct) as (m, q, q) arrays."""
    q = nu.q
    r2m = r2(nu)
    s = np.zeros((m, p, q))
    a = np.zeros((m, q, q))
    b_direct = np.zeros((m, q, q)) if validate else None
    for _ in range(n):
        radii = nu.draw_radii(m, rng)
        x = _orbit_batch(p, radii, rng)
        if validate:
            cross = np.einsum("mpi,mpj->mij", s, x)
            b_direct += cross + cross.transpose(0, 2, 1)
        s += x
        a += np.einsum("mpi,mpj->mij", x, x) - r2m
    xi = _sym_batch(np.einsum("mpi,mpj->mij", s, s) - n * r2m)
    a = _sym_batch(a)
    return xi, a, xi - a, b_direct


def _fast_chunk_q1(nu: RadialLaw, n: int, p: int, m: int, rng: np.random.Generator,
                   validate: bool = False):
    """m fast-path trials (q = 1): only the squared walk norm is tracked.

    Per step with current norm s and fresh radius r, the squared norm
    updates as s^2 + 2 s r u + r^2, where u is the cosine between the walk
    and the new step, distributed as the first coordinate of a uniform
    point on the unit sphere in R^p.
    """
    r2s = float(r2(nu)[0, 0])
    s2 = np.zeros(m)
    a = np.zeros(m)
    b_direct = np.zeros(m) if validate else None
    for _ in range(n):
        radii = nu.draw_radii(m, rng)[:, 0, 0]
        u = uniform_sphere_cosine(p, m, rng)
        cross = 2.0 * np.sqrt(s2) * radii * u
        if validate:
            b_direct += cross
        s2 = s2 + cross + radii * radii
        a += radii * radii - r2s
    xi = s2 - n * r2s
    shape = (m, 1, 1)
    return (xi.reshape(shape), a.reshape(shape), (xi - a).reshape(shape),
            None if b_direct is None else b_direct.reshape(shape))


def run_walk_trial(cfg: WalkConfig, rng: np.random.Generator, validate: bool = False) -> TrialStatistics:
    """One direct-path trial of the configured walk."""
    xi, a, b, b_direct = _walk_chunk(cfg.nu, cfg.n, cfg.p, 1, rng, validate=validate)
    return TrialStatistics(
        xi=xi[0].reshape(-1), a=a[0].reshape(-1), b=b[0].reshape(-1),
        normalization=cfg.scale,
        b_direct=None if b_direct is None else b_direct[0].reshape(-1),
    )


def fast_walk_trial_q1(cfg: WalkConfig, rng: np.random.Generator, validate: bool = False) -> TrialStatistics:
    """One fast-path trial; distributionally equal to the direct path for q = 1."""
    if cfg.nu.q != 1:
        raise BadArity("fast path requires q = 1")
    xi, a, b, b_direct = _fast_chunk_q1(cfg.nu, cfg.n, cfg.p, 1, rng, validate=validate)
    return TrialStatistics(
        xi=xi[0].reshape(-1), a=a[0].reshape(-1), b=b[0].reshape(-1),
        normalization=cfg.scale,
        b_direct=None if b_direct is None else b_direct[0].reshape(-1),
    )


def predict_covariances(nu: RadialLaw, n: int, p: int):
    """Exact finite-n covariances (cov_A, cov_B, cov_Xi) of the unnormalized parts."""
    cov_a = n * sigma_nu(nu)
    cov_b = (n * (n - 1) / p) * t_nu(nu)
    return cov_a, cov_b, cov_a + cov_b


def estimate_covariance(samples) -> CovarianceEstimate:
    """Sample mean, unbiased covariance, and per-entry jackknife standard errors."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (n - 1)
    cov = (cov + cov.T) / 2.0
    if n < 3:
        return CovarianceEstimate(mean=mean, cov=cov, stderr=np.full((d, d), np.inf))
    total = x.T @ x
    mean_loo = (n * mean - x) / (n - 1)
    cov_loo = (
        total - np.einsum("ni,nj->nij", x, x) - (n - 1) * np.einsum("ni,nj->nij", mean_loo, mean_loo)
    ) / (n - 2)
    stderr = np.sqrt((n - 1) / n * np.sum((cov_loo - cov_loo.mean(axis=0)) ** 2, axis=0))
    return CovarianceEstimate(mean=mean, cov=cov, stderr=stderr)


@dataclass
class ExperimentReport:
    """Self-contained record of one verified experiment.

    Re-running with the embedded seed reproduces every numeric field; wall
    time is kept out of :meth:`to_dict` so serialized reports stay
    byte-stable across runs and worker counts.
    """

    config: dict
    normalization: float
    predicted_exact: np.ndarray
    predicted_limit: np.ndarray
    empirical_mean: np.ndarray
    empirical_cov: np.ndarray
    stderr: np.ndarray
    rel_frob_err_exact: float
    rel_frob_err_limit: float
    z_scores_exact: np.ndarray
    ks_stat: float | None
    ks_critical: float | None
    ks_per_projection: list | None
    verdicts: dict
    overall: str
    max_decomposition_err: float | None = None
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        out = {
            "config": self.config,
            "normalization": self.normalization,
            "predicted_exact": self.predicted_exact.tolist(),
            "predicted_limit": self.predicted_limit.tolist(),
            "empirical_mean": self.empirical_mean.tolist(),
            "empirical_cov": self.empirical_cov.tolist(),
            "stderr": self.stderr.tolist(),
            "rel_frob_err_exact": self.rel_frob_err_exact,
            "rel_frob_err_limit": self.rel_frob_err_limit,
            "z_scores_exact": self.z_scores_exact.tolist(),
            "ks_stat": self.ks_stat,
            "ks_critical": self.ks_critical,
            "ks_per_projection": self.ks_per_projection,
            "verdicts": self.verdicts,
            "overall": self.overall,
        }
        if self.max_decomposition_err is not None:
            out["max_decomposition_err"] = self.max_decomposition_err
        return out


def _chunk_task(args):
    """Top-level chunk runner (picklable for process pools)."""
    cfg, tag, chunk_idx, size, validate = args
    rng = trial_stream(cfg.seed, tag, chunk_idx)
    runner = _fast_chunk_q1 if cfg.fast_path else _walk_chunk
    xi, a, b, b_direct = runner(cfg.nu, cfg.n, cfg.p, size, rng, validate=validate)
    m = xi.shape[0]
    max_err = None
    if validate:
        denom = 1.0 + np.sqrt(np.sum(xi.reshape(m, -1) ** 2, axis=1))
        err = np.abs((b_direct - b).reshape(m, -1)).max(axis=1)
        max_err = float((err / denom).max())
    return chunk_idx, xi.reshape(m, -1), max_err


def _run_all_chunks(cfg: WalkConfig, tag: int, workers, validate: bool):
    sizes = []
    left = cfg.trials
    while left > 0:
        sizes.append(min(CHUNK_TRIALS, left))
        left -= CHUNK_TRIALS
    tasks = [(cfg, tag, idx, size, validate) for idx, size in enumerate(sizes)]
    if workers is not None and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            results = list(pool.map(_chunk_task, tasks))
    else:
        results = [_chunk_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    xi = np.concatenate([r[1] for r in results], axis=0)
    max_err = max((r[2] for r in results), default=None) if validate else None
    return xi, max_err


def _compare_covariance(emp: np.ndarray, se: np.ndarray, pred: np.ndarray, rel_tol: float):
    """Entrywise band check against a predicted covariance.

    Band per entry is max(5 stderr, rel_tol * |pred entry|).  A prediction
    that is exactly zero (degenerate limit) is checked purely against the
    stderr band.  The verdict degrades to INCONCLUSIVE when the stderr
    exceeds half the relative band at the matrix scale.
    """
    diff = emp - pred
    scale = float(np.abs(pred).max())
    rel_frob = frobenius_norm(diff) / frobenius_norm(pred) if scale > 0 else frobenius_norm(diff)
    if scale == 0.0:
        verdict = "PASS" if np.all(np.abs(emp) <= 5.0 * se) else "FAIL"
        return verdict, rel_frob
    band = np.maximum(5.0 * se, rel_tol * np.abs(pred))
    if np.any(np.abs(diff) > band):
        return "FAIL", rel_frob
    if float(se.max()) > rel_tol * scale / 2.0:
        return "INCONCLUSIVE", rel_frob
    return "PASS", rel_frob


def _ks_projections(samples: np.ndarray, q: int, alpha: float):
    """KS distance to the standard normal of each standardized coordinate.

    For q >= 2 only upper-triangle coordinates are tested (the statistic is
    symmetric, so the rest duplicate); the significance level is split
    across projections.
    """
    coords = [(i, j) for i in range(q) for j in range(i, q)]
    n = samples.shape[0]
    per_projection = []
    for i, j in coords:
        col = samples[:, i * q + j]
        sd = col.std(ddof=1)
        if sd == 0.0:
            return None, None, None
        z = (col - col.mean()) / sd
        per_projection.append(float(stats.kstest(z, "norm").statistic))
    critical = float(stats.kstwo.isf(alpha / len(coords), n))
    return max(per_projection), critical, per_projection


def verify_clt(cfg: WalkConfig, workers: int | None = None, validate_decomposition: bool = False,
               stream_tag: int = 0, checks=("exact", "limit", "ks"), rel_tol: float = 0.05,
               ks_alpha: float = 1e-3) -> ExperimentReport:
    """Run the configured experiment and compare the empirical covariance of
    the normalized statistic against the exact finite-n prediction and the
    asymptotic limit, with a normality check on scalar projections.

    ``checks`` selects which comparisons feed the overall verdict; every
    comparison is still computed and reported.
    """
    t0 = time.perf_counter()
    q = cfg.nu.q
    xi_vecs, max_err = _run_all_chunks(cfg, stream_tag, workers, validate_decomposition)
    scale = cfg.scale
    samples = scale * xi_vecs
    est = estimate_covariance(samples)

    _, _, cov_xi = predict_covariances(cfg.nu, cfg.n, cfg.p)
    predicted_exact = scale * scale * cov_xi
    if cfg.regime == "CLT_I":
        predicted_limit = t_nu(cfg.nu)
    else:
        predicted_limit = sigma_nu(cfg.nu) + cfg.limit_c * t_nu(cfg.nu)

    verdict_exact, rel_exact = _compare_covariance(est.cov, est.stderr, predicted_exact, rel_tol)
    verdict_limit, rel_limit = _compare_covariance(est.cov, est.stderr, predicted_limit, rel_tol)

    degenerate = float(np.abs(predicted_limit).max()) == 0.0
    if degenerate:
        ks_stat = ks_crit = ks_all = None
        verdict_ks = "SKIPPED"
    else:
        ks_stat, ks_crit, ks_all = _ks_projections(samples, q, ks_alpha)
        verdict_ks = "SKIPPED" if ks_stat is None else ("PASS" if ks_stat < ks_crit else "FAIL")

    with np.errstate(divide="ignore", invalid="ignore"):
        z = (est.cov - predicted_exact) / est.stderr
    z[np.isnan(z)] = 0.0

    verdicts = {
        "exact_covariance": verdict_exact,
        "limit_covariance": verdict_limit,
        "ks_normality": verdict_ks,
    }
    requested = [verdicts[{"exact": "exact_covariance", "limit": "limit_covariance", "ks": "ks_normality"}[c]]
                 for c in checks]
    if any(v == "FAIL" for v in requested):
        overall = "FAIL"
    elif any(v == "INCONCLUSIVE" for v in requested) or cfg.trials < 1000:
        # below 10^3 trials the bands are noise-dominated, so no PASS verdict
        overall = "INCONCLUSIVE"
    else:
        overall = "PASS"

    config_echo = {
        "law": cfg.nu.to_config(),
        "n": cfg.n,
        "p": cfg.p,
        "q": q,
        "trials": cfg.trials,
        "regime": cfg.regime,
        "c": cfg.limit_c,
        "seed": cfg.seed,
        "fast_path": cfg.fast_path,
        "stream_tag": stream_tag,
        "checks": list(checks),
        "rel_tol": rel_tol,
        "ks_alpha": ks_alpha,
    }
    return ExperimentReport(
        config=config_echo,
        normalization=scale,
        predicted_exact=predicted_exact,
        predicted_limit=predicted_limit,
        empirical_mean=est.mean,
        empirical_cov=est.cov,
        stderr=est.stderr,
        rel_frob_err_exact=rel_exact,
        rel_frob_err_limit=rel_limit,
        z_scores_exact=z,
        ks_stat=ks_stat,
        ks_critical=ks_crit,
        ks_per_projection=ks_all,
        verdicts=verdicts,
        overall=overall,
        max_decomposition_err=max_err,
        wall_time_s=time.perf_counter() - t0,
    )


@dataclass
class MomentDecayReport:
    """Either a log-log decay fit (all row sums even) or a parity z-score sweep."""

    branch: str  # "decay" or "parity"
    p_grid: list
    estimates: list
    stderrs: list
    weight: int
    slope: float | None = None
    slope_stderr: float | None = None
    intercept: float | None = None
    max_abs_z: float | None = None
    points: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "p_grid": self.p_grid,
            "estimates": self.estimates,
            "stderrs": self.stderrs,
            "weight": self.weight,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "intercept": self.intercept,
            "max_abs_z": self.max_abs_z,
        }


def moment_decay_experiment(nu: RadialLaw, kappa, p_grid, trials: int,
                            rng: np.random.Generator) -> MomentDecayReport:
    """Estimate the monomial moment across a dimension grid and either fit
    its log-log decay slope (even branch) or report parity z-scores (odd)."""
    p_grid = [int(p) for p in p_grid]
    even = kappa_all_rows_even(kappa)
    if even and len(p_grid) < 3:
        raise BadArity("decay slope needs at least 3 grid points")
    ests, ses = [], []
    for p in p_grid:
        est, se = radial_moment_mc(p, nu, kappa, trials, rng)
        ests.append(est)
        ses.append(se)
    report = MomentDecayReport(
        branch="decay" if even else "parity",
        p_grid=p_grid, estimates=ests, stderrs=ses, weight=kappa_weight(kappa),
    )
    if even:
        logs = np.log(np.abs(ests))
        coef, cov = np.polyfit(np.log(p_grid), logs, 1, cov=True)
        report.slope = float(coef[0])
        report.intercept = float(coef[1])
        report.slope_stderr = float(np.sqrt(cov[0, 0]))
    else:
        zs = [abs(e) / s if s > 0 else np.inf for e, s in zip(ests, ses)]
        report.max_abs_z = float(max(zs))
    return report
