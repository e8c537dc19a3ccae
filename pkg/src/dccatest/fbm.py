"""Covariance kernels of (bivariate) fractional Brownian motion.

The cross kernel has two branches depending on whether the sum of the
two Hurst exponents equals 1; the branch switch happens inside a 1e-9
band around 1, where the logarithmic form applies.  Auto kernels use
the standard fBm covariance, which is a valid positive-semidefinite
kernel on the whole real line, so window blocks may be built at
negative times (two-sided fBm with stationary increments).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Branch-switch tolerance on |H + G - 1|.
_LOG_BRANCH_TOL = 1e-9

# Dense covariance blocks are capped for memory predictability.
MAX_BLOCK_SIZE = 4096


@dataclass(frozen=True)
class FbmParams:
    """Parameters of a bivariate fractional Brownian motion.

    ``hurst1``/``hurst2`` are the marginal Hurst exponents, ``rho`` the
    instantaneous cross-correlation, ``eta`` the antisymmetric cross
    parameter.  The null configuration of the independence test has
    rho == eta == 0.
    """

    hurst1: float
    hurst2: float
    rho: float = 0.0
    eta: float = 0.0
    sigma1: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        # Kernel-level validity; the long-range model domain [0.5, 1) is
        # enforced by the surfaces that assume it (simulators, tables).
        if not (0.0 < self.hurst1 < 1.0 and 0.0 < self.hurst2 < 1.0):
            raise ValueError("Hurst exponents must lie in (0, 1)")
        if abs(self.rho) > 1.0:
            raise ValueError("|rho| must not exceed 1")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("scale parameters must be positive")

    @property
    def is_null(self) -> bool:
        return self.rho == 0.0 and self.eta == 0.0

    @property
    def is_long_range(self) -> bool:
        return self.hurst1 >= 0.5 and self.hurst2 >= 0.5


def _xlogx(u: np.ndarray) -> np.ndarray:
    """u * log|u| with the convention 0 * log 0 = 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    nz = u != 0
    out[nz] = u[nz] * np.log(np.abs(u[nz]))
    return out


def fbm_auto_cov(s, t, hurst: float, sigma: float = 1.0) -> np.ndarray:
    """E(X(s)X(t)) for fBm with the given Hurst exponent (any real s, t)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * sigma * sigma * (
        np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(t - s) ** h2
    )


def fbm_cross_cov(s, t, params: FbmParams) -> float | np.ndarray:
    """E(X1(s)X2(t)) of bivariate fBm at non-negative times.

    Selects the power-law branch when hurst1 + hurst2 differs from 1 and
    the logarithmic branch inside a 1e-9 band around hurst1 + hurst2 = 1.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("cross kernel is defined for non-negative times")
    hg = params.hurst1 + params.hurst2
    rho, eta = params.rho, params.eta
    amp = 0.5 * params.sigma1 * params.sigma2
    if abs(hg - 1.0) < _LOG_BRANCH_TOL:
        val = amp * (
            rho * (np.abs(s) + np.abs(t) - np.abs(t - s))
            + eta * (_xlogx(t) + _xlogx(s) - _xlogx(t - s))
        )
    else:
        val = amp * (
            (rho + eta * np.sign(s)) * np.abs(s) ** hg
            + (rho - eta * np.sign(t)) * np.abs(t) ** hg
            - (rho - eta * np.sign(t - s)) * np.abs(t - s) ** hg
        )
    if val.ndim == 0:
        return float(val)
    return val


def fgn_autocov(k, hurst: float, sigma: float = 1.0) -> float | np.ndarray:
    """Autocovariance of fractional Gaussian noise at integer lag k.

    gamma(k) = (sigma^2/2) (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}).
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError("Hurst exponent must lie in (0, 1)")
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * hurst
    val = 0.5 * sigma * sigma * (
        (k + 1.0) ** h2 - 2.0 * k ** h2 + np.abs(k - 1.0) ** h2
    )
    if val.ndim == 0:
        return float(val)
    return val


def fgn_cross_cov(k, params: FbmParams) -> float | np.ndarray:
    """Cross-covariance of the increment pair at integer lag k.

    gamma12(k) = E(dX1(t) dX2(t+k)), the second difference of the cross
    kernel; reduces to (rho sigma1 sigma2 / 2) d2|k|^{H+G} when eta = 0.
    """
    k = np.asarray(k, dtype=float)
    hg = params.hurst1 + params.hurst2
    rho, eta = params.rho, params.eta
    amp = 0.5 * params.sigma1 * params.sigma2

    if abs(hg - 1.0) < _LOG_BRANCH_TOL:
        def psi(u):
            return rho * np.abs(u) + eta * _xlogx(u)
    else:
        def psi(u):
            return (rho - eta * np.sign(u)) * np.abs(u) ** hg

    val = amp * (psi(k + 1.0) - 2.0 * psi(k) + psi(k - 1.0))
    if val.ndim == 0:
        return float(val)
    return val


@dataclass(frozen=True)
class CovBlock:
    """Covariance matrix between two fBm windows.

    Row window: times 1..n.  Column window: times offset+1..offset+m,
    where offset is expressed in samples.  ``kind`` is one of
    'auto1', 'auto2', 'cross'.
    """

    matrix: np.ndarray
    row_scale: int
    col_scale: int
    offset: int
    kind: str


def _check_block_size(n: int, m: int):
    if n < 2 or m < 2:
        raise ValueError("window covariance blocks need sizes >= 2")
    if n > MAX_BLOCK_SIZE or m > MAX_BLOCK_SIZE:
        raise ValueError(
            f"block size {max(n, m)} exceeds cap {MAX_BLOCK_SIZE}"
        )


def auto_block(n: int, m: int, offset: int, hurst: float,
               sigma: float = 1.0) -> np.ndarray:
    """n-by-m auto-covariance block E(X(a) X(offset+b)), a=1..n, b=1..m.

    ``offset`` is a displacement in samples and may be negative; the
    two-sided fBm kernel keeps the block exact in that case.
    """
    _check_block_size(n, m)
    a = np.arange(1, n + 1, dtype=float)[:, None]
    b = offset + np.arange(1, m + 1, dtype=float)[None, :]
    return fbm_auto_cov(a, b, hurst, sigma)


def cross_block(n: int, m: int, offset: int, params: FbmParams) -> np.ndarray:
    """n-by-m cross block E(X1(a) X2(offset+b)); zero under the null."""
    _check_block_size(n, m)
    if params.is_null:
        return np.zeros((n, m))
    if offset < 0:
        raise ValueError("cross blocks support non-negative offsets only")
    a = np.arange(1, n + 1, dtype=float)[:, None]
    b = offset + np.arange(1, m + 1, dtype=float)[None, :]
    return np.asarray(fbm_cross_cov(a, b, params))


def window_cov_block(n: int, m: int, j: int, params: FbmParams,
                     kind: str = "auto1") -> CovBlock:
    """Covariance block between window 1 of size n and a window of size m
    starting j row-windows later (times a and j*n + b).

    Auto blocks with j = 0 are validated positive semidefinite
    (smallest eigenvalue >= -1e-8 * trace).
    """
    if j < 0:
        raise ValueError("window offset must be non-negative")
    offset = j * n
    if kind == "auto1":
        mat = auto_block(n, m, offset, params.hurst1, params.sigma1)
    elif kind == "auto2":
        mat = auto_block(n, m, offset, params.hurst2, params.sigma2)
    elif kind == "cross":
        mat = cross_block(n, m, offset, params)
    else:
        raise ValueError(f"unknown block kind {kind!r}")
    if kind.startswith("auto") and j == 0 and n == m:
        eigmin = float(np.linalg.eigvalsh(mat)[0])
        tol = 1e-8 * float(np.trace(mat))
        if eigmin < -tol:
            raise RuntimeError(
                f"auto covariance block failed PSD check: "
                f"eigmin={eigmin:.3e}"
            )
    return CovBlock(matrix=mat, row_scale=n, col_scale=m, offset=offset,
                    kind=kind)
