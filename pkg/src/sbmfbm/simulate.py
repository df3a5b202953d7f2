"""Trajectory generators for SBM, FBM and CTRW, plus ensemble MSD.

Random streams are derived from a single 64-bit trajectory seed through
``numpy.random.SeedSequence`` spawn keys:

* ``(d,)`` for the increments of dimension ``d``;
* ``(NOISE_KEY, d)`` for measurement noise of dimension ``d``;
* ``(CLOCK_KEY,)`` for the CTRW waiting-time clock (shared by all dimensions).

Measurement noise is added to every recorded position, the origin
included, and the record is then shifted so that it starts at zero.  The
origin is therefore itself a noisy observation, which gives the increment
covariance used by the likelihoods (``2 sigma_mn**2`` on the diagonal,
``-sigma_mn**2`` next to it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .likelihood import FBM, SBM, FbmParams, SbmParams, _fbm_gamma, _sbm_variances
from .errors import NumericalDomainError, ParameterError

CTRW = "CTRW"
MODELS = (SBM, FBM, CTRW)
NOISE_KEY = 1_000_001
CLOCK_KEY = 1_000_002
SCHEMA_VERSION = 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``seed`` and a spawn key."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


@dataclass
class TrajectoryRecord:
    id: str
    model: str
    dt: float
    positions: np.ndarray
    ground_truth: dict
    seed: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        dims, npts = self.positions.shape
        if not 1 <= dims <= 3:
            raise ValueError(f"dims must be 1..3, got {dims}")
        if npts < 2:
            raise ValueError("a trajectory needs at least one step")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError(f"trajectory {self.id}: non-finite positions")
        if np.any(self.positions[:, 0] != 0.0):
            raise ValueError(f"trajectory {self.id}: positions must start at the origin")

    @property
    def dims(self) -> int:
        return self.positions.shape[0]

    @property
    def n_steps(self) -> int:
        return self.positions.shape[1] - 1

    @property
    def increments(self) -> np.ndarray:
        return np.ascontiguousarray(np.diff(self.positions, axis=1))

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "model": self.model,
            "dims": self.dims,
            "dt": self.dt,
            "seed": int(self.seed),
            "ground_truth": dict(self.ground_truth),
            "positions": self.positions.tolist(),
        }
        if self.provenance:
            d["provenance"] = dict(self.provenance)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryRecord":
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported trajectory schema_version {version!r}")
        for key in ("id", "model", "dt", "positions", "ground_truth", "seed"):
            if key not in d:
                raise ValueError(f"trajectory record lacks field {key!r}")
        rec = cls(
            id=str(d["id"]),
            model=d["model"],
            dt=float(d["dt"]),
            positions=np.asarray(d["positions"], dtype=np.float64),
            ground_truth=dict(d["ground_truth"]),
            seed=int(d["seed"]),
            provenance=dict(d.get("provenance", {})),
        )
        if "dims" in d and int(d["dims"]) != rec.dims:
            raise ValueError(f"trajectory {rec.id}: dims field disagrees with positions")
        return rec


@dataclass(frozen=True)
class MsdCurve:
    lags: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray


def _check_size(n_steps: int, dims: int):
    if n_steps < 1:
        raise ValueError("need at least one step")
    if not 1 <= dims <= 3:
        raise ValueError("dims must be 1, 2 or 3")


def _record(model, increments, dt, truth, seed, traj_id):
    dims = increments.shape[0]
    pos = np.zeros((dims, increments.shape[1] + 1))
    np.cumsum(increments, axis=1, out=pos[:, 1:])
    return TrajectoryRecord(traj_id or f"{model}-{seed}", model, dt, pos, truth, seed)


def _default_noise_seed(seed: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(NOISE_KEY,)).generate_state(1, np.uint64)[0])


def simulate_sbm(p: SbmParams, n_steps: int, dims: int = 2, seed: int = 0,
                 traj_id: str | None = None) -> TrajectoryRecord:
    """SBM trajectory; measurement noise is added when ``p.sigma_mn > 0``."""
    _check_size(n_steps, dims)
    sd = np.sqrt(_sbm_variances(n_steps, p.alpha, p.sigma1, p.t0 / p.dt))
    if not np.all(np.isfinite(sd) & (sd > 0)):
        raise NumericalDomainError("SBM step variances are not positive and finite")
    inc = np.vstack([stream(seed, d).standard_normal(n_steps) * sd for d in range(dims)])
    truth = {"alpha": p.alpha, "sigma": p.sigma1, "t0": p.t0, "sigma_mn": 0.0}
    rec = _record(SBM, inc, p.dt, truth, seed, traj_id)
    if p.sigma_mn > 0:
        rec = add_measurement_noise(rec, p.sigma_mn, _default_noise_seed(seed))
    return rec


@njit(cache=True)
def _innovations_sample(gamma, z):
    """Exact Gaussian sample with Toeplitz covariance via Durbin-Levinson."""
    n = z.shape[0]
    x = np.empty(n)
    fwd = np.zeros(n + 1)
    rev = np.zeros(n + 1)
    v = gamma[0]
    if not v > 0.0:
        return x * np.nan
    x[0] = math.sqrt(v) * z[0]
    s = n
    for t in range(1, n):
        m = t - 1
        acc = gamma[t]
        for k in range(m):
            acc -= rev[s + k] * gamma[1 + k]
        kappa = acc / v
        for k in range(m):
            a = fwd[1 + k]
            b = rev[s + k]
            fwd[1 + k] = a - kappa * b
            rev[s + k] = b - kappa * a
        s -= 1
        rev[s] = kappa
        fwd[t] = kappa
        v = v * (1.0 - kappa * kappa)
        if not v > 0.0:
            return x * np.nan
        pred = 0.0
        for k in range(t):
            pred += rev[s + k] * x[k]
        x[t] = pred + math.sqrt(v) * z[t]
    return x


def simulate_fbm(p: FbmParams, n_steps: int, dims: int = 2, seed: int = 0,
                 traj_id: str | None = None) -> TrajectoryRecord:
    """FBM trajectory from the exact O(N**2) innovations sampler.

    The latent path uses the noise-free autocovariance; noise is added
    afterwards when ``p.sigma_mn > 0``.
    """
    _check_size(n_steps, dims)
    gamma = _fbm_gamma(n_steps, p.alpha, p.sigma, 0.0)
    rows = []
    for d in range(dims):
        row = _innovations_sample(gamma, stream(seed, d).standard_normal(n_steps))
        if not np.all(np.isfinite(row)):
            raise NumericalDomainError("FBM innovation variance became non-positive")
        rows.append(row)
    truth = {"alpha": p.alpha, "sigma": p.sigma, "t0": 0.0, "sigma_mn": 0.0}
    rec = _record(FBM, np.vstack(rows), p.dt, truth, seed, traj_id)
    if p.sigma_mn > 0:
        rec = add_measurement_noise(rec, p.sigma_mn, _default_noise_seed(seed))
    return rec


def add_measurement_noise(traj: TrajectoryRecord, sigma_mn: float, seed: int) -> TrajectoryRecord:
    """Displace every recorded position by independent N(0, sigma_mn**2)."""
    if not sigma_mn >= 0.0:
        raise ParameterError("sigma_mn must be >= 0")
    if sigma_mn == 0.0:
        return traj
    npts = traj.positions.shape[1]
    eta = np.vstack([stream(seed, NOISE_KEY, d).standard_normal(npts) for d in range(traj.dims)])
    eta *= sigma_mn
    noisy = traj.positions + eta
    noisy -= noisy[:, :1]
    truth = dict(traj.ground_truth)
    truth["sigma_mn"] = math.hypot(truth.get("sigma_mn", 0.0), sigma_mn)
    return TrajectoryRecord(traj.id, traj.model, traj.dt, noisy, truth, traj.seed,
                            dict(traj.provenance))


def sample_one_sided_stable(alpha: float, rng: np.random.Generator, size=None):
    """Standard one-sided alpha-stable draws, ``E[exp(-s T)] = exp(-s**alpha)``.

    Kanter's representation of the Chambers-Mallows-Stuck construction for
    the totally skewed case.  ``alpha == 1`` is the degenerate law at 1.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError("one-sided stable laws need 0 < alpha <= 1")
    if alpha == 1.0:
        return 1.0 if size is None else np.ones(size)
    u = np.pi * rng.random(size)
    w = rng.standard_exponential(size)
    # guard the open interval (0, pi)
    u = np.where(u == 0.0, np.pi * 0.5, u)
    t = (np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)) * (
        np.sin((1.0 - alpha) * u) / w
    ) ** ((1.0 - alpha) / alpha)
    return float(t) if size is None else t


def simulate_ctrw(alpha: float, n_steps: int, dims: int = 2, dt: float = 1.0, ds: float = 0.01,
                  seed: int = 0, sigma_mn: float = 0.0, traj_id: str | None = None,
                  chunk: int = 4096) -> TrajectoryRecord:
    """CTRW by subordination of Brownian motion to an inverse stable clock.

    Operational time advances in steps ``ds``; each step costs physical time
    ``ds**(1/alpha)`` times a one-sided stable draw.  The latent walk is
    Brownian in operational time with variance ``ds`` per step (unit jump
    variance per unit of operational time).  The position recorded at
    ``t_i = i * dt`` is the latent position at the last operational step whose
    physical time does not exceed ``t_i``; noise is added after sampling.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError("CTRW requires 0 < alpha <= 1")
    if not ds > 0.0:
        raise ParameterError("ds must be positive")
    if not dt > 0.0:
        raise ParameterError("dt must be positive")
    _check_size(n_steps, dims)
    clock = stream(seed, CLOCK_KEY)
    horizon = n_steps * dt
    scale = ds ** (1.0 / alpha)
    # physical clock in units of `scale`; for alpha == 1 this counts steps exactly
    totals = [np.zeros(1)]
    last = 0.0
    while last <= horizon / scale:
        draws = sample_one_sided_stable(alpha, clock, chunk)
        part = last + np.cumsum(draws)
        totals.append(part)
        last = part[-1]
    clock_times = np.concatenate(totals)
    grid = np.arange(n_steps + 1) * dt / scale
    # operational steps completed by each grid time
    k = np.searchsorted(clock_times, grid, side="right") - 1
    dk = np.diff(k).astype(np.float64)
    sd = np.sqrt(dk * ds)
    inc = np.vstack([stream(seed, d).standard_normal(n_steps) * sd for d in range(dims)])
    truth = {
        "alpha": alpha,
        "sigma": 1.0,
        "t0": 0.0,
        "sigma_mn": 0.0,
        "ds": ds,
        "jump_variance_per_unit_operational_time": 1.0,
    }
    rec = _record(CTRW, inc, dt, truth, seed, traj_id)
    if sigma_mn > 0:
        rec = add_measurement_noise(rec, sigma_mn, _default_noise_seed(seed))
    return rec


def msd_ensemble(trajs) -> MsdCurve:
    """Ensemble MSD ``<|x(t_k) - x(0)|**2>`` summed over dimensions."""
    trajs = list(trajs)
    if not trajs:
        raise ValueError("msd_ensemble needs at least one trajectory")
    first = trajs[0]
    for t in trajs[1:]:
        if t.positions.shape != first.positions.shape or t.dt != first.dt:
            raise ValueError("trajectories differ in N, dims or dt")
    pos = np.stack([t.positions for t in trajs])
    sq = np.sum((pos[:, :, 1:] - pos[:, :, :1]) ** 2, axis=1)
    msd = sq.mean(axis=0)
    if len(trajs) > 1:
        stderr = sq.std(axis=0, ddof=1) / math.sqrt(len(trajs))
    else:
        stderr = np.zeros_like(msd)
    lags = np.arange(1, first.n_steps + 1) * first.dt
    return MsdCurve(lags, msd, stderr)
