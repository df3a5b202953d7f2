"""Exact Gaussian log-likelihoods for scaled and fractional Brownian motion.

Both models are zero-mean Gaussian processes for the increments
``dx_i = x_i - x_{i-1}`` sampled at ``t_i = i * dt``.  Measurement noise of
standard deviation ``sigma_mn`` on every recorded position (the origin
included) adds ``2 sigma_mn**2`` to each increment variance and
``-sigma_mn**2`` to the covariance of neighbouring increments.

* SBM increments are independent apart from the noise, so the likelihood is
  evaluated by an O(N) forward recursion over conditional means and
  variances.
* FBM increments are stationary with autocovariance ``gamma(n)``; the
  Toeplitz likelihood is evaluated by the Durbin-Levinson recursion in
  O(N**2) time and O(N) memory.

The compiled cores return NaN to flag a numerical-domain failure; the public
wrappers turn that into :class:`~sbmfbm.errors.NumericalDomainError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NotPositiveDefiniteError, NumericalDomainError, ParameterError

LOG_2PI = math.log(2.0 * math.pi)

SBM = "SBM"
FBM = "FBM"


def _check_common(alpha, sigma_mn, dt):
    if not (0.0 < alpha < 2.0):
        raise ParameterError(f"alpha must lie in (0, 2), got {alpha!r}")
    if not (sigma_mn >= 0.0 and math.isfinite(sigma_mn)):
        raise ParameterError(f"sigma_mn must be finite and >= 0, got {sigma_mn!r}")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ParameterError(f"dt must be finite and > 0, got {dt!r}")


@dataclass(frozen=True)
class SbmParams:
    """Scaled Brownian motion parameters.

    The amplitude is the standard deviation ``sigma1`` of the first step
    (before noise); the anomalous diffusion coefficient follows from it, see
    :attr:`k_alpha`.
    """

    alpha: float
    sigma1: float
    t0: float = 0.0
    sigma_mn: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        _check_common(self.alpha, self.sigma_mn, self.dt)
        if not (self.sigma1 > 0.0 and math.isfinite(self.sigma1)):
            raise ParameterError(f"sigma1 must be finite and > 0, got {self.sigma1!r}")
        if not (self.t0 >= 0.0 and math.isfinite(self.t0)):
            raise ParameterError(f"t0 must be finite and >= 0, got {self.t0!r}")

    @property
    def k_alpha(self) -> float:
        c = self.t0 / self.dt
        return self.sigma1**2 / (
            2.0 * self.dt**self.alpha * _power_difference(1.0, self.alpha, c)
        )

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "sigma": self.sigma1,
            "t0": self.t0,
            "sigma_mn": self.sigma_mn,
            "dt": self.dt,
        }


@dataclass(frozen=True)
class FbmParams:
    """Fractional Brownian motion parameters.

    ``sigma`` is the (noise-free) step deviation, i.e.
    ``K_alpha = sigma**2 / (2 dt**alpha)``.  The Hurst exponent is ``alpha/2``.
    """

    alpha: float
    sigma: float
    sigma_mn: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        _check_common(self.alpha, self.sigma_mn, self.dt)
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ParameterError(f"sigma must be finite and > 0, got {self.sigma!r}")

    @property
    def k_alpha(self) -> float:
        return self.sigma**2 / (2.0 * self.dt**self.alpha)

    @property
    def hurst(self) -> float:
        return self.alpha / 2.0

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "sigma": self.sigma,
            "t0": 0.0,
            "sigma_mn": self.sigma_mn,
            "dt": self.dt,
        }


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _power_difference(i, alpha, c):
    # (i + c)**alpha - (i - 1 + c)**alpha, cancellation-free form
    base = i - 1.0 + c
    if base == 0.0:
        return 1.0
    if base < 1.0:
        # no cancellation here, and 1/base may overflow
        return (base + 1.0) ** alpha - base**alpha
    return base**alpha * math.expm1(alpha * math.log1p(1.0 / base))


@njit(cache=True)
def _sbm_variances(n, alpha, sigma1, c):
    out = np.empty(n)
    s2 = sigma1 * sigma1
    if alpha == 1.0:
        out[:] = s2
        return out
    first = _power_difference(1.0, alpha, c)
    out[0] = s2
    lo = c**alpha
    hi = (1.0 + c) ** alpha
    for i in range(1, n):
        base = i + c
        lo = hi
        hi = (base + 1.0) ** alpha
        if base > 1e6:
            # bases within 1e-6 relative of each other
            out[i] = s2 * (_power_difference(i + 1.0, alpha, c) / first)
        else:
            out[i] = s2 * ((hi - lo) / first)
    return out


@njit(cache=True)
def _sbm_loglik_row(dx, step_var, sigma_mn):
    n = dx.shape[0]
    s2mn = sigma_mn * sigma_mn
    ll = 0.0
    var = step_var[0] + 2.0 * s2mn
    mean = 0.0
    for i in range(n):
        if i > 0:
            # conditional mean and variance given the previous residual
            resid = dx[i - 1] - mean
            mean = -s2mn / var * resid
            var = step_var[i] + s2mn * (2.0 - s2mn / var)
        if not (var > 0.0) or not math.isfinite(var):
            return np.nan
        r = dx[i] - mean
        ll += -0.5 * (LOG_2PI + math.log(var) + r * r / var)
    return ll


@njit(cache=True)
def _sbm_loglik(dx2, alpha, sigma1, t0, sigma_mn, dt):
    step_var = _sbm_variances(dx2.shape[1], alpha, sigma1, t0 / dt)
    total = 0.0
    for d in range(dx2.shape[0]):
        total += _sbm_loglik_row(dx2[d], step_var, sigma_mn)
    return total


@njit(cache=True)
def _fbm_gamma(n, alpha, sigma, sigma_mn):
    # K_alpha dt**alpha == sigma**2 / 2, so dt drops out
    half = 0.5 * sigma * sigma
    s2mn = sigma_mn * sigma_mn
    g = np.empty(n)
    g[0] = 2.0 * half + 2.0 * s2mn
    if n > 1:
        g[1] = half * (2.0**alpha - 2.0) - s2mn
    for k in range(2, n):
        g[k] = half * ((k + 1.0) ** alpha + (k - 1.0) ** alpha - 2.0 * k**alpha)
    return g


@njit(fastmath=True, cache=True)
def _dot(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        acc += a[k] * b[k]
    return acc


@njit(fastmath=True, cache=True)
def _reflect_update(fwd, rev, kappa):
    for k in range(fwd.shape[0]):
        a = fwd[k]
        b = rev[k]
        fwd[k] = a - kappa * b
        rev[k] = b - kappa * a


@njit(cache=True)
def _durbin_levinson_loglik(dx2, gamma):
    """Joint log-density of the rows of ``dx2`` under Toeplitz ``gamma``.

    The order-t predictor is kept both forward (``fwd[1:t+1]``) and reversed
    (``rev[s:s+t]``) so every inner product runs over contiguous memory.
    Predictor coefficients are shared by all rows; per-row sums are kept
    separate and added in row order.
    """
    ndim, n = dx2.shape
    fwd = np.zeros(n + 1)
    rev = np.zeros(n + 1)
    ll = np.zeros(ndim)
    v = gamma[0]
    if not (v > 0.0) or not math.isfinite(v):
        return np.nan
    logv = math.log(v)
    for d in range(ndim):
        x = dx2[d, 0]
        ll[d] += -0.5 * (LOG_2PI + logv + x * x / v)
    s = n
    for t in range(1, n):
        m = t - 1
        kappa = (gamma[t] - _dot(rev[s:s + m], gamma[1:1 + m])) / v
        _reflect_update(fwd[1:1 + m], rev[s:s + m], kappa)
        s -= 1
        rev[s] = kappa
        fwd[t] = kappa
        v = v * (1.0 - kappa * kappa)
        if not (v > 0.0) or not math.isfinite(v):
            return np.nan
        logv = math.log(v)
        coef = rev[s:s + t]
        for d in range(ndim):
            r = dx2[d, t] - _dot(coef, dx2[d, :t])
            ll[d] += -0.5 * (LOG_2PI + logv + r * r / v)
    total = 0.0
    for d in range(ndim):
        total += ll[d]
    return total


@njit(cache=True)
def _fbm_loglik(dx2, alpha, sigma, sigma_mn):
    return _durbin_levinson_loglik(dx2, _fbm_gamma(dx2.shape[1], alpha, sigma, sigma_mn))


# ---------------------------------------------------------------------------
# public API


def _as_increments(dx) -> np.ndarray:
    arr = np.ascontiguousarray(dx, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("increment series must be a non-empty 1-d array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("increment series contains non-finite values")
    return arr


def _checked(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NumericalDomainError(f"{what}: recursion reached a non-positive variance")
    return value


def sbm_step_variance(i: int, p: SbmParams) -> float:
    """Variance of the ``i``-th noise-free SBM increment (``i >= 1``)."""
    if i < 1:
        raise ValueError("step index starts at 1")
    v = _sbm_variances(i, p.alpha, p.sigma1, p.t0 / p.dt)[-1]
    if not (v > 0.0 and math.isfinite(v)):
        raise NumericalDomainError(f"step variance {v!r} at i={i} is not positive and finite")
    return v


def sbm_increment_covariance(p: SbmParams, n: int) -> np.ndarray:
    """Dense tridiagonal covariance of ``n`` noisy SBM increments."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s2mn = p.sigma_mn**2
    # closed form through K_alpha, deliberately not sharing code with the recursion
    i = np.arange(1, n + 1, dtype=np.float64)
    c = p.t0 / p.dt
    step_var = 2.0 * p.k_alpha * p.dt**p.alpha * ((i + c) ** p.alpha - (i - 1.0 + c) ** p.alpha)
    diag = step_var + 2.0 * s2mn
    cov = np.diag(diag)
    idx = np.arange(n - 1)
    cov[idx, idx + 1] = -s2mn
    cov[idx + 1, idx] = -s2mn
    return cov


def sbm_loglik_1d(dx, p: SbmParams) -> float:
    """Log-likelihood of one increment series under SBM with noise."""
    arr = _as_increments(dx)
    return _checked(
        _sbm_loglik(arr[None, :], p.alpha, p.sigma1, p.t0, p.sigma_mn, p.dt), "SBM likelihood"
    )


def fbm_autocov(n: int, p: FbmParams) -> float:
    """Autocovariance ``gamma(n)`` of noisy FBM increments at integer lag ``n``."""
    n = abs(int(n))
    half = p.k_alpha * p.dt**p.alpha
    s2mn = p.sigma_mn**2
    if n == 0:
        return 2.0 * half + 2.0 * s2mn
    if n == 1:
        return half * (2.0**p.alpha - 2.0) - s2mn
    a = p.alpha
    return half * ((n + 1.0) ** a + (n - 1.0) ** a - 2.0 * n**a)


def fbm_autocov_vector(n: int, p: FbmParams) -> np.ndarray:
    """``gamma(0), ..., gamma(n-1)``."""
    return _fbm_gamma(int(n), p.alpha, p.sigma, p.sigma_mn)


def fbm_covariance(p: FbmParams, n: int) -> np.ndarray:
    """Dense Toeplitz covariance of ``n`` FBM increments (oracle use only)."""
    from scipy.linalg import toeplitz

    return toeplitz(fbm_autocov_vector(n, p))


def toeplitz_loglik_1d(dx, gamma) -> float:
    """Durbin-Levinson log-density of ``dx`` for first-row autocovariance ``gamma``."""
    arr = _as_increments(dx)
    g = np.ascontiguousarray(gamma, dtype=np.float64)
    if g.shape[0] < arr.shape[0]:
        raise ValueError("need at least len(dx) autocovariances")
    return _checked(_durbin_levinson_loglik(arr[None, :], g[: arr.shape[0]]), "Toeplitz likelihood")


def fbm_loglik_1d(dx, p: FbmParams) -> float:
    """Log-likelihood of one increment series under FBM with noise."""
    arr = _as_increments(dx)
    return _checked(
        _fbm_loglik(arr[None, :], p.alpha, p.sigma, p.sigma_mn), "FBM likelihood"
    )


def dense_gaussian_loglik(dx, cov) -> float:
    """Zero-mean multivariate normal log-density via a dense Cholesky factor.

    Serves as the independent reference for the recursive likelihoods.
    """
    x = _as_increments(dx)
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (x.size, x.size):
        raise ValueError(f"covariance shape {cov.shape} does not match {x.size} increments")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    from scipy.linalg import solve_triangular

    z = solve_triangular(chol, x, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * (x.size * LOG_2PI + logdet + z @ z))


def increments_of(traj) -> np.ndarray:
    """``dims x N`` increment array from a trajectory record or position array."""
    pos = getattr(traj, "positions", traj)
    pos = np.asarray(pos, dtype=np.float64)
    if pos.ndim == 1:
        pos = pos[None, :]
    if not (1 <= pos.shape[0] <= 3) or pos.shape[1] < 2:
        raise ValueError(f"positions must be dims x (N+1) with 1 <= dims <= 3, got {pos.shape}")
    return np.ascontiguousarray(np.diff(pos, axis=1))


def loglik_multidim(traj, model: str, theta) -> float:
    """Sum of per-dimension log-likelihoods with shared parameters."""
    dx2 = increments_of(traj)
    if not np.all(np.isfinite(dx2)):
        raise ValueError("trajectory contains non-finite positions")
    if model == SBM:
        if not isinstance(theta, SbmParams):
            raise TypeError("SBM needs SbmParams")
        val = _sbm_loglik(dx2, theta.alpha, theta.sigma1, theta.t0, theta.sigma_mn, theta.dt)
    elif model == FBM:
        if not isinstance(theta, FbmParams):
            raise TypeError("FBM needs FbmParams")
        val = _fbm_loglik(dx2, theta.alpha, theta.sigma, theta.sigma_mn)
    else:
        raise ValueError(f"unknown model {model!r}")
    return _checked(val, f"{model} likelihood")
