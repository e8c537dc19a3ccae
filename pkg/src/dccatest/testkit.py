"""Joint-exceedance test for long-range cross-correlation.

The observed statistic is the largest standardisation level lambda such
that at least kappa of the r scaled coefficients sqrt([N/n_i]) rho(n_i)
exceed lambda * sqrt(C_ii) simultaneously, on the better of the two sign
branches; equivalently the kappa-th largest standardised value.  Its
null distribution is estimated by Monte Carlo draws from N(0, C), which
also yields the critical threshold theta* and the p-value.  For
kappa < r the reported p-value is the conservative binomial bound
min(1, 2 C(r, kappa) Pr(leading kappa coordinates jointly exceed)).

Rejection is decided from the p-value (reject iff p <= level).  For
kappa = r this agrees with the critical-region rule T > theta* up to the
0.01 grid resolution of the threshold search; for kappa < r the binomial
bound is the deciding quantity and theta* is reported for reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import CovTable, NullCovariance, rho_null_cov, worst_case_cov
from .fluctuation import FluctuationSet, HurstEstimate, fluctuation_analysis, \
    hurst_estimate
from .series import ScaleSet, SeriesPair

_CHUNK = 1 << 17
_THETA_MAX = 50.0
_THETA_STEP = 0.01
MIN_MC_SAMPLES = 100_000
MAX_R_FOR_BINOM = 64

# Default half-width of the Hurst range around DFA estimates in 'auto'
# mode; the covariance may be recomputed with a tighter range when the
# exponents are known more precisely.
AUTO_HURST_MARGIN = 0.1


def _factor_cov(matrix: np.ndarray) -> np.ndarray:
    """Lower-triangular-like factor L with L L^T = C; eigenvalue fallback
    tolerates round-off level negativity only."""
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(matrix)
        if vals[0] < -1e-8 * float(np.trace(matrix)):
            raise RuntimeError(
                f"covariance factorization failed (eigmin {vals[0]:.3e})"
            ) from None
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


class GaussianTailPool:
    """Sorted Monte Carlo pool of per-draw test statistics under N(0, C).

    mode 'kth': the two-sided kappa-subset statistic (critical region
    membership is T > theta).  mode 'leading-min': one-sided joint
    minimum of the first kappa standardised coordinates, used by the
    binomial p-value bound.  Chunked generation with seeds derived from
    a SeedSequence keeps results reproducible and independent of chunk
    scheduling.
    """

    def __init__(self, matrix: np.ndarray, kappa: int, samples: int,
                 seed: int, mode: str = "kth"):
        matrix = np.asarray(matrix, dtype=float)
        r = matrix.shape[0]
        if not 1 <= kappa <= r:
            raise ValueError(f"kappa must lie in 1..{r}")
        if samples < MIN_MC_SAMPLES:
            raise ValueError(f"need at least {MIN_MC_SAMPLES} MC samples")
        if mode not in ("kth", "leading-min"):
            raise ValueError(f"unknown pool mode {mode!r}")
        if mode == "leading-min":
            matrix = matrix[:kappa, :kappa]
        factor = _factor_cov(matrix)
        std = np.sqrt(np.diag(matrix))
        dim = matrix.shape[0]

        n_chunks = (samples + _CHUNK - 1) // _CHUNK
        seeds = np.random.SeedSequence(seed).spawn(n_chunks)
        parts = []
        remaining = samples
        for child in seeds:
            count = min(_CHUNK, remaining)
            remaining -= count
            rng = np.random.default_rng(child)
            s = (rng.standard_normal((count, dim)) @ factor.T) / std
            if mode == "kth":
                upper = np.partition(s, r - kappa, axis=1)[:, r - kappa]
                lower = np.partition(s, kappa - 1, axis=1)[:, kappa - 1]
                parts.append(np.maximum(upper, -lower))
            else:
                parts.append(s.min(axis=1))
        self.values = np.sort(np.concatenate(parts))
        self.samples = samples
        self.kappa = kappa
        self.mode = mode

    def prob_above(self, theta: float) -> tuple[float, float]:
        """(estimate, binomial standard error) of Pr(statistic > theta)."""
        count = self.samples - int(np.searchsorted(self.values, theta,
                                                   side="right"))
        p = count / self.samples
        return p, math.sqrt(max(p * (1.0 - p), 0.0) / self.samples)

    def threshold(self, level: float) -> float:
        """Smallest theta on the 0.01 grid with Pr-hat(> theta) < level."""
        if not 0.0 < level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        n_grid = int(round(_THETA_MAX / _THETA_STEP))
        if self.prob_above(_THETA_MAX)[0] >= level:
            raise RuntimeError(
                f"failed to bracket level {level} within theta <= {_THETA_MAX}"
            )
        lo, hi = 0, n_grid  # invariant: prob(hi*step) < level
        if self.prob_above(0.0)[0] < level:
            return 0.0
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.prob_above(mid * _THETA_STEP)[0] < level:
                hi = mid
            else:
                lo = mid
        return hi * _THETA_STEP


def scaled_rho(rho: np.ndarray, window_counts: np.ndarray) -> np.ndarray:
    """Map raw coefficients to the sqrt([N/n_i]) rho(n_i) convention."""
    return np.asarray(rho, dtype=float) * np.sqrt(window_counts)


def test_statistic(rho_scaled: np.ndarray, cov: NullCovariance,
                   kappa: int) -> float:
    """kappa-th largest standardised value over the better sign branch."""
    rho_scaled = np.asarray(rho_scaled, dtype=float)
    r = cov.r
    if len(rho_scaled) != r:
        raise ValueError(
            f"rho vector has length {len(rho_scaled)}, covariance is {r}x{r}"
        )
    if not 1 <= kappa <= r:
        raise ValueError(f"kappa must lie in 1..{r}")
    diag = np.diag(cov.matrix)
    if np.any(diag <= 0):
        raise ValueError("covariance diagonal must be positive")
    s = rho_scaled / np.sqrt(diag)
    upper = np.partition(s, r - kappa)[r - kappa]
    lower = np.partition(s, kappa - 1)[kappa - 1]
    return float(max(upper, -lower))


def statistic_direction(rho_scaled: np.ndarray, cov: NullCovariance,
                        kappa: int) -> str:
    """Sign branch achieving the statistic ('positive' or 'negative')."""
    s = np.asarray(rho_scaled) / np.sqrt(np.diag(cov.matrix))
    r = len(s)
    upper = np.partition(s, r - kappa)[r - kappa]
    lower = np.partition(s, kappa - 1)[kappa - 1]
    return "positive" if upper >= -lower else "negative"


def exceedance_prob_mc(cov: NullCovariance, theta: float, kappa: int,
                       samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo Pr over N(0, C) that some kappa-subset of coordinates
    all exceed theta*sqrt(C_ii) or all fall below the negatives."""
    pool = GaussianTailPool(cov.matrix, kappa, samples, seed)
    return pool.prob_above(theta)


def crit_threshold(cov: NullCovariance, level: float, kappa: int,
                   samples: int, seed: int) -> float:
    """Critical theta* with estimated exceedance probability below level."""
    pool = GaussianTailPool(cov.matrix, kappa, samples, seed)
    return pool.threshold(level)


def pvalue_bound_kappa(cov: NullCovariance, t_observed: float, kappa: int,
                       samples: int, seed: int) -> float:
    """Conservative p-value for the observed statistic.

    kappa == r uses the exceedance probability of the critical-region
    event directly; kappa < r multiplies the joint one-sided tail of the
    leading kappa coordinates by 2 C(r, kappa).  Reported values are
    capped at 1 and floored at the 1/samples Monte Carlo resolution.
    """
    r = cov.r
    if kappa == r:
        p, _ = exceedance_prob_mc(cov, t_observed, kappa, samples, seed)
    else:
        if r > MAX_R_FOR_BINOM:
            raise ValueError(
                f"binomial bound supports at most r={MAX_R_FOR_BINOM} scales"
            )
        pool = GaussianTailPool(cov.matrix, kappa, samples, seed,
                                mode="leading-min")
        joint, _ = pool.prob_above(t_observed)
        p = 2.0 * math.comb(r, kappa) * joint
    return float(min(1.0, max(p, 1.0 / samples)))


# ---------------------------------------------------------------------------
# Full test procedure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestConfig:
    """Configuration of the joint-exceedance test."""

    __test__ = False  # not a pytest class despite the name

    scale_set: ScaleSet
    level: float = 0.05
    kappa: int | None = None          # None means kappa = r
    hurst_mode: tuple = ("auto",)     # ("known", H, G) | ("range", hl, hh,
                                      #  gl, gh) | ("auto",)
    mc_samples: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if self.kappa is not None and not 1 <= self.kappa <= self.scale_set.r:
            raise ValueError(f"kappa must lie in 1..{self.scale_set.r}")
        if self.mc_samples < MIN_MC_SAMPLES:
            raise ValueError(f"mc_samples must be >= {MIN_MC_SAMPLES}")
        mode = self.hurst_mode[0]
        if mode not in ("known", "range", "auto"):
            raise ValueError(f"unknown Hurst mode {mode!r}")

    @property
    def effective_kappa(self) -> int:
        return self.scale_set.r if self.kappa is None else self.kappa


@dataclass(frozen=True)
class TestOutcome:
    """Result of the joint-exceedance test on one series pair."""

    __test__ = False  # not a pytest class despite the name

    statistic: float
    threshold: float
    p_value: float
    p_stderr: float
    reject: bool
    direction: str                  # 'positive' | 'negative' | 'none'
    rho: np.ndarray
    rho_bounds: np.ndarray          # theta* sqrt(C_ii/[N/n_i]) on rho scale
    fluctuations: FluctuationSet
    null_cov: NullCovariance
    hurst1: HurstEstimate
    hurst2: HurstEstimate
    config: TestConfig
    discarded: np.ndarray
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "not-reject"


def _hurst_range(est: HurstEstimate, table: CovTable) -> tuple[float, float]:
    lo = min(max(est.h_hat - AUTO_HURST_MARGIN, table.grid_min),
             table.grid_max)
    hi = min(max(est.h_hat + AUTO_HURST_MARGIN, table.grid_min),
             table.grid_max)
    return lo, hi


def build_null_cov(config: TestConfig, n_samples: int, table: CovTable,
                   est1: HurstEstimate | None = None,
                   est2: HurstEstimate | None = None) -> NullCovariance:
    """Null covariance per the configured Hurst mode."""
    scales = config.scale_set.scales
    mode = config.hurst_mode[0]
    if mode == "known":
        _, h, g = config.hurst_mode
        return rho_null_cov(scales, n_samples, h, g, table,
                            config.scale_set.degree)
    if mode == "range":
        _, hl, hh, gl, gh = config.hurst_mode
        return worst_case_cov(scales, n_samples, (hl, hh), (gl, gh), table,
                              config.scale_set.degree)
    if est1 is None or est2 is None:
        raise ValueError("auto Hurst mode needs DFA estimates")
    return worst_case_cov(scales, n_samples, _hurst_range(est1, table),
                          _hurst_range(est2, table), table,
                          config.scale_set.degree)


def stat_dcca(pair: SeriesPair, config: TestConfig,
              table: CovTable) -> TestOutcome:
    """Run the full test: profiles, rho vector, null covariance,
    statistic, threshold and conservative p-value."""
    fluct = fluctuation_analysis(pair, config.scale_set)
    est1 = hurst_estimate(fluct.f2_auto1, fluct.scales)
    est2 = hurst_estimate(fluct.f2_auto2, fluct.scales)

    notes = []
    if est1.h_hat < 0.55 and est2.h_hat < 0.55:
        notes.append(
            f"DFA estimates H={est1.h_hat:.3f}, G={est2.h_hat:.3f} are both "
            "below 0.55; the long-range-dependence premise of the test is "
            "doubtful for this pair"
        )

    cov = build_null_cov(config, pair.n_samples, table, est1, est2)
    kappa = config.effective_kappa
    counts = config.scale_set.window_counts(pair.n_samples)
    rho_sc = scaled_rho(fluct.rho, counts)
    t_obs = test_statistic(rho_sc, cov, kappa)

    pool = GaussianTailPool(cov.matrix, kappa, config.mc_samples, config.seed)
    theta_star = pool.threshold(config.level)
    if kappa == cov.r:
        p_value, p_stderr = pool.prob_above(t_obs)
        p_value = min(1.0, max(p_value, 1.0 / config.mc_samples))
    else:
        sub_pool = GaussianTailPool(cov.matrix, kappa, config.mc_samples,
                                    config.seed, mode="leading-min")
        joint, joint_se = sub_pool.prob_above(t_obs)
        mult = 2.0 * math.comb(cov.r, kappa)
        p_value = min(1.0, max(mult * joint, 1.0 / config.mc_samples))
        p_stderr = mult * joint_se

    reject = p_value <= config.level
    direction = statistic_direction(rho_sc, cov, kappa) if reject else "none"
    return TestOutcome(
        statistic=t_obs,
        threshold=theta_star,
        p_value=p_value,
        p_stderr=p_stderr,
        reject=reject,
        direction=direction,
        rho=fluct.rho,
        rho_bounds=cov.rho_bounds(theta_star),
        fluctuations=fluct,
        null_cov=cov,
        hurst1=est1,
        hurst2=est2,
        config=config,
        discarded=config.scale_set.discarded_samples(pair.n_samples),
        warnings=tuple(notes),
    )
