"""Monte Carlo harness: alpha estimation, CLT replicate studies, the
binomial/Poisson variance relation, de-Poissonization, expectation
convergence, and radius-tail tables.

Replicates use per-index derived seeds, so results are byte-identical for any
worker count; aggregation is by replicate index only.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats as sps

from .filtration import build, mu
from .persistence import RankQuery, reduce
from .point_process import (
    Box,
    Density,
    DomainError,
    PointCloud,
    RngSeed,
    sample_binomial,
    sample_poisson_homogeneous,
)
from .stabilization import (
    AddOneQuery,
    add_one_cost,
    strong_radius_estimate,
    weak_radius,
)

CENSORING_LIMIT = 0.10
AD_CRITICAL_1PCT = 1.035


class CensoringError(RuntimeError):
    """Censored fraction too high: the window is too small to trust truncation."""


class NumericalError(RuntimeError):
    pass


def _map_indexed(fn: Callable[[int], object], count: int, threads: int = 1) -> list:
    """Run fn(0..count-1); results ordered by index regardless of scheduling."""
    out = [None] * count
    if threads <= 1:
        for i in range(count):
            out[i] = fn(i)
        return out
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for i, res in zip(range(count), pool.map(fn, range(count))):
            out[i] = res
    return out


# ---------------------------------------------------------------------------
# Normality scores
# ---------------------------------------------------------------------------


class NormalityScore(NamedTuple):
    ad: float
    ks: float
    skewness: float
    excess_kurtosis: float


def normality_score(samples) -> NormalityScore:
    """Anderson-Darling (small-sample modified), KS distance, skewness and
    excess kurtosis of the studentized sample against the standard normal."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 20:
        raise DomainError("normality score needs at least 20 samples")
    sd = x.std(ddof=1)
    if sd == 0.0:
        raise NumericalError("degenerate sample variance")
    z = np.sort((x - x.mean()) / sd)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (sps.norm.logcdf(z) + sps.norm.logsf(z[::-1])))
    a_star = a2 * (1.0 + 0.75 / n + 2.25 / n**2)
    ks = sps.kstest(z, "norm").statistic
    return NormalityScore(float(a_star), float(ks), float(sps.skew(z)), float(sps.kurtosis(z)))


# ---------------------------------------------------------------------------
# Process sampling in the thermodynamic regime
# ---------------------------------------------------------------------------


def sample_scaled_process(process: str, density: Density, n: int, seed: RngSeed) -> PointCloud:
    """n^{1/d} S_n on [0, n^{1/d}]^d: binomial = exactly n iid kappa points,
    poisson = Poisson(n) many iid kappa points (intensity n kappa(x))."""
    d = density.d
    if process == "binomial":
        m = n
    elif process == "poisson":
        m = int(seed.generator().poisson(n))
    else:
        raise DomainError(f"unknown process {process!r}")
    unit = sample_binomial(m, density, seed.derive(1)) if m else PointCloud(
        np.empty((0, d)), Box((0.0,) * d, (1.0,) * d)
    )
    return unit.scale(n ** (1.0 / d)) if n > 0 else unit


def _betti_vector(P: PointCloud, q: int, pairs, kind: str, r_max: float) -> np.ndarray:
    C = build(P, kind, r_max=r_max, q_max=q + 1)
    D = reduce(C)
    return np.array([D.persistent_betti(RankQuery(q, r, s)) for r, s in pairs], dtype=float)


# ---------------------------------------------------------------------------
# Alpha
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaEstimate:
    r: float
    s: float
    q: int
    value: float
    standard_error: float
    truncation_radius: float
    censored_fraction: float


def estimate_alpha(
    r: float,
    s: float,
    q: int,
    density: Density,
    window_radius: float,
    reps: int,
    seed: RngSeed,
    kind: str = "rips",
    threads: int = 1,
) -> AlphaEstimate:
    """alpha(r,s) = E over X ~ kappa of the add-one cost at the origin of a
    homogeneous Poisson window with intensity kappa(X)."""
    if r > s:
        raise DomainError("alpha needs r <= s")
    if window_radius < 3.0 * mu(kind, s):
        raise DomainError("window radius below a*(s) + 2 mu(s)")
    d = density.d
    box = Box((-window_radius,) * d, (window_radius,) * d)
    origin = np.zeros((1, d))

    def one(i: int):
        sd = seed.derive(i)
        x = sample_binomial(1, density, sd).points[:1]
        lam = float(density(x)[0])
        P = sample_poisson_homogeneous(lam, box, sd.derive(1))
        cost = add_one_cost(AddOneQuery(P, origin, q, r, s, kind))
        if s > 0:
            est = weak_radius(P, origin, np.zeros(d), r, s, kind=kind, window_radius=window_radius)
            censored = est.censored
        else:
            censored = False
        return cost, censored

    rows = _map_indexed(one, reps, threads)
    costs = np.array([c for c, _ in rows], dtype=float)
    censored_frac = float(np.mean([c for _, c in rows]))
    if censored_frac > CENSORING_LIMIT:
        raise CensoringError(
            f"censored fraction {censored_frac:.3f} exceeds {CENSORING_LIMIT}; enlarge the window"
        )
    se = float(costs.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return AlphaEstimate(r, s, q, float(costs.mean()), se, window_radius, censored_frac)


# ---------------------------------------------------------------------------
# CLT harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CltConfig:
    process: str
    density: Density
    kind: str
    q: int
    pairs: tuple
    n_grid: tuple
    replicates: int
    seed: RngSeed
    r_max: float
    q_max: int

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((float(r), float(s)) for r, s in self.pairs))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.process not in ("poisson", "binomial"):
            raise DomainError(f"unknown process {self.process!r}")
        if any(r > s for r, s in self.pairs):
            raise DomainError("every pair needs r <= s")
        if not self.pairs:
            raise DomainError("at least one (r,s) pair required")
        if self.r_max < max(s for _, s in self.pairs):
            raise DomainError("r_max cap below the largest s")
        if self.q_max < self.q + 1:
            raise DomainError("q_max cap must exceed q")
        if self.replicates < 50:
            raise DomainError("at least 50 replicates required")
        if list(self.n_grid) != sorted(set(self.n_grid)) or min(self.n_grid, default=0) <= 0:
            raise DomainError("n grid must be ascending positive integers")


@dataclass
class CltPerN:
    betas: np.ndarray  # (R, l) raw persistent Betti numbers
    standardized: np.ndarray  # (R, l) = n^{-1/2} (beta - mean)
    covariance: np.ndarray  # (l, l)
    scores: list


@dataclass
class CltResult:
    config: CltConfig
    per_n: dict
    elapsed: float


def run_clt(config: CltConfig, threads: int = 1) -> CltResult:
    t0 = time.time()
    l = len(config.pairs)
    per_n: dict[int, CltPerN] = {}
    for n_idx, n in enumerate(config.n_grid):
        base = config.seed.derive(n_idx)

        def one(rep: int, n=n, base=base):
            P = sample_scaled_process(config.process, config.density, n, base.derive(rep))
            return _betti_vector(P, config.q, config.pairs, config.kind, config.r_max)

        betas = np.vstack(_map_indexed(one, config.replicates, threads))
        std = (betas - betas.mean(axis=0)) / math.sqrt(n)
        cov = (std.T @ std) / (config.replicates - 1)
        cov = (cov + cov.T) / 2.0
        if np.linalg.eigvalsh(cov).min() < -1e-8:
            raise NumericalError("covariance estimate is not positive semidefinite")
        scores = []
        for i in range(l):
            label = f"coord_{i}"
            try:
                sc = normality_score(std[:, i])
            except NumericalError:
                sc = NormalityScore(math.nan, math.nan, math.nan, math.nan)
            scores.append({"label": label, **sc._asdict()})
        if l > 1:
            prng = np.random.default_rng(np.random.SeedSequence(config.seed.seed, spawn_key=(999,)))
            for k in range(3):
                v = prng.standard_normal(l)
                v /= np.linalg.norm(v)
                try:
                    sc = normality_score(std @ v)
                except NumericalError:
                    sc = NormalityScore(math.nan, math.nan, math.nan, math.nan)
                scores.append({"label": f"proj_{k}", **sc._asdict()})
        per_n[n] = CltPerN(betas, std, cov, scores)
    return CltResult(config, per_n, time.time() - t0)


# ---------------------------------------------------------------------------
# Variance relation, expectation convergence, de-Poissonization
# ---------------------------------------------------------------------------


def _jackknife_cov_se(std: np.ndarray) -> np.ndarray:
    """Leave-one-out standard errors of the entries of the covariance matrix."""
    r, l = std.shape
    thetas = np.empty((r, l, l))
    s1 = std.sum(axis=0)
    s2 = std.T @ std
    for i in range(r):
        xi = std[i]
        m = (s1 - xi) / (r - 1)
        raw = s2 - np.outer(xi, xi)
        thetas[i] = (raw - (r - 1) * np.outer(m, m)) / (r - 2)
    bar = thetas.mean(axis=0)
    return np.sqrt((r - 1) / r * ((thetas - bar) ** 2).sum(axis=0))


def variance_relation_check(poisson: CltResult, binomial: CltResult, alphas: list) -> dict:
    """Check Sigma_bin == Sigma_poi - alpha alpha^T entrywise at 3 SE."""
    if poisson.config.pairs != binomial.config.pairs:
        raise DomainError("pair lists must match between the two runs")
    if len(alphas) != len(poisson.config.pairs):
        raise DomainError("one alpha estimate per pair required")
    n = max(set(poisson.per_n) & set(binomial.per_n))
    sp, sb = poisson.per_n[n], binomial.per_n[n]
    a = np.array([al.value for al in alphas])
    a_se = np.array([al.standard_error for al in alphas])
    rhs = sp.covariance - np.outer(a, a)
    lhs = sb.covariance
    se_p = _jackknife_cov_se(sp.standardized)
    se_b = _jackknife_cov_se(sb.standardized)
    se_alpha = np.abs(np.outer(a, a_se)) + np.abs(np.outer(a_se, a))
    pooled = np.sqrt(se_p**2 + se_b**2 + se_alpha**2)
    diff = np.abs(lhs - rhs)
    entries = []
    for i in range(len(a)):
        for j in range(len(a)):
            entries.append(
                {
                    "i": i,
                    "j": j,
                    "sigma_bin": float(lhs[i, j]),
                    "sigma_poi_minus_alpha": float(rhs[i, j]),
                    "diff": float(diff[i, j]),
                    "pooled_se": float(pooled[i, j]),
                    "pass": bool(diff[i, j] <= 3.0 * pooled[i, j] + 1e-12),
                }
            )
    return {"n": n, "entries": entries, "pass": all(e["pass"] for e in entries)}


def expectation_convergence(
    process: str,
    density: Density,
    pair: tuple,
    q: int,
    n_grid,
    reps: int,
    seed: RngSeed,
    kind: str = "rips",
    threads: int = 1,
) -> list[dict]:
    """Per-n estimates of n^{-1} E[beta], with successive differences."""
    r, s = pair
    rows = []
    for n_idx, n in enumerate(sorted(n_grid)):
        base = seed.derive(n_idx)

        def one(rep: int, n=n, base=base):
            P = sample_scaled_process(process, density, n, base.derive(rep))
            return _betti_vector(P, q, [(r, s)], kind, s)[0] / n

        vals = np.array(_map_indexed(one, reps, threads))
        rows.append(
            {
                "n": n,
                "mean": float(vals.mean()),
                "se": float(vals.std(ddof=1) / math.sqrt(reps)),
            }
        )
    for i, row in enumerate(rows):
        row["delta"] = math.nan if i == 0 else row["mean"] - rows[i - 1]["mean"]
    return rows


def depoissonization_check(
    n: int,
    r: float,
    s: float,
    q: int,
    density: Density,
    reps: int,
    seed: RngSeed,
    kind: str = "rips",
    alpha: AlphaEstimate | None = None,
    threads: int = 1,
) -> dict:
    """E[R_{n,n}] vs alpha(r,s): paired add-one increments of the scaled
    binomial process against the local Poisson estimate."""
    if alpha is None:
        alpha = estimate_alpha(
            r, s, q, density, window_radius=max(3.0, 3.0 * mu(kind, s)),
            reps=min(reps, 2000), seed=seed.derive(10**6), kind=kind, threads=threads,
        )
    scale = n ** (1.0 / density.d)

    def one(rep: int):
        sd = seed.derive(rep)
        base = sample_binomial(n + 1, density, sd).scale(scale)
        smaller = PointCloud(base.points[:-1], base.window)
        b_small = _betti_vector(smaller, q, [(r, s)], kind, s)[0]
        b_big = _betti_vector(base, q, [(r, s)], kind, s)[0]
        return b_big - b_small

    vals = np.array(_map_indexed(one, reps, threads))
    mean_r = float(vals.mean())
    se_r = float(vals.std(ddof=1) / math.sqrt(reps))
    pooled = math.sqrt(se_r**2 + alpha.standard_error**2)
    return {
        "n": n,
        "mean_R": mean_r,
        "se_R": se_r,
        "alpha": alpha.value,
        "alpha_se": alpha.standard_error,
        "pooled_se": pooled,
        "diff": abs(mean_r - alpha.value),
        "pass": abs(mean_r - alpha.value) <= 3.0 * pooled + 1e-12,
    }


# ---------------------------------------------------------------------------
# Radius tails
# ---------------------------------------------------------------------------


@dataclass
class TailTable:
    rows: list  # dicts: lambda, r, q, statistic, L, survival, wilson_low, wilson_high

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "r", "q", "statistic", "L", "survival", "wilson_low", "wilson_high"])
        for row in self.rows:
            w.writerow(
                [
                    repr(float(row["lambda"])),
                    repr(float(row["r"])),
                    int(row["q"]),
                    row["statistic"],
                    repr(float(row["L"])),
                    repr(float(row["survival"])),
                    repr(float(row["wilson_low"])),
                    repr(float(row["wilson_high"])),
                ]
            )
        return buf.getvalue()


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _per_q_weak_value(trace, q: int) -> float:
    d1 = trace.d1[:, q]
    d2 = trace.d2[:, q]
    changed = (d1 != d1[-1]) | (d2 != d2[-1])
    idx = np.flatnonzero(changed)
    return 0.0 if len(idx) == 0 else float(trace.radii[idx[-1] + 1])


def radius_tail_experiment(
    lambda_grid,
    r_grid,
    q_list,
    L_grid,
    reps: int,
    window: float,
    seed: RngSeed,
    d: int = 2,
    kind: str = "rips",
    threads: int = 1,
) -> TailTable:
    """Empirical survival of the weak radius and of the strong-radius
    surrogate; censored replicates count as exceedances (conservative)."""
    L_grid = sorted(float(L) for L in L_grid)
    max_r = max(float(r) for r in r_grid)
    if window < max(L_grid) + 2.0 * mu(kind, max_r):
        raise DomainError("window below max L + 2 mu(max r)")
    box = Box((-window,) * d, (window,) * d)
    origin = np.zeros((1, d))
    z = np.zeros(d)
    rows = []
    cell = 0
    for lam in lambda_grid:
        for r in r_grid:
            base = seed.derive(cell)
            cell += 1

            def one(rep: int, lam=lam, r=r, base=base):
                P = sample_poisson_homogeneous(float(lam), box, base.derive(rep))
                est, trace = weak_radius(
                    P, origin, z, float(r), float(r), kind=kind,
                    window_radius=window, return_trace=True,
                )
                weak_vals = {
                    q: (math.inf if est.censored else _per_q_weak_value(trace, q)) for q in q_list
                }
                strong_vals = {}
                for q in q_list:
                    st = strong_radius_estimate(P, origin, z, float(r), int(q), kind, window_radius=window)
                    strong_vals[q] = math.inf if st.censored else st.value
                return weak_vals, strong_vals

            results = _map_indexed(one, reps, threads)
            for q in q_list:
                for stat, idx in (("weak", 0), ("strong", 1)):
                    vals = np.array([res[idx][q] for res in results])
                    for L in L_grid:
                        exceed = int(np.count_nonzero(vals > L))
                        lo, hi = wilson_interval(exceed, reps)
                        rows.append(
                            {
                                "lambda": float(lam),
                                "r": float(r),
                                "q": int(q),
                                "statistic": stat,
                                "L": L,
                                "survival": exceed / reps,
                                "wilson_low": lo,
                                "wilson_high": hi,
                            }
                        )
    return TailTable(rows)


# ---------------------------------------------------------------------------
# CSV serialization of CLT runs
# ---------------------------------------------------------------------------


def replicates_csv(result: CltResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "rep", "pair_index", "beta", "standardized"])
    for n in result.config.n_grid:
        page = result.per_n[n]
        for rep in range(page.betas.shape[0]):
            for i in range(page.betas.shape[1]):
                w.writerow(
                    [n, rep, i, repr(float(page.betas[rep, i])), repr(float(page.standardized[rep, i]))]
                )
    return buf.getvalue()


def covariance_csv(result: CltResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "i", "j", "value"])
    for n in result.config.n_grid:
        cov = result.per_n[n].covariance
        for i in range(cov.shape[0]):
            for j in range(cov.shape[1]):
                w.writerow([n, i, j, repr(float(cov[i, j]))])
    return buf.getvalue()


def scores_csv(result: CltResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "label", "ad", "ks", "skewness", "excess_kurtosis"])
    for n in result.config.n_grid:
        for row in result.per_n[n].scores:
            w.writerow(
                [n, row["label"], repr(row["ad"]), repr(row["ks"]), repr(row["skewness"]), repr(row["excess_kurtosis"])]
            )
    return buf.getvalue()
