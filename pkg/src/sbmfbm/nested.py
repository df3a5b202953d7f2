"""Nested sampling for model evidence and weighted posterior samples.

The engine follows Skilling's scheme with the deterministic shrinkage
``ln X_k = -k / n_live`` and a trapezoid quadrature of ``Z = int L dX``.  The
evidence uncertainty is reported as ``sqrt(H / n_live)``.

Replacement points are produced by a random-walk Metropolis kernel in the
unit cube.  Proposals are Gaussian, shaped by the covariance of the current
live points and a global scale that is adapted towards 50% acceptance, with
coordinate-wise reflection at the cube faces.  Two kernels share that logic:

* :class:`RandomWalkKernel` calls an arbitrary Python ``cube_loglik(u)``.
* :class:`CompiledRandomWalkKernel` runs the whole walk inside numba for a
  jitted ``fn(u, args)``; this is what the model inference uses.

Ties in the likelihood (plateaus) are broken by an independent uniform label
per point, so the hard constraint is "(logL, label) strictly greater than the
threshold pair".  For continuous likelihoods the label never matters.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NonConvergenceError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NestedConfig:
    n_live: int = 100
    steps_per_replacement: int = 40
    termination_fraction: float = 1e-4
    max_iterations: int = 1_000_000
    seed: int | None = None

    def __post_init__(self):
        if self.n_live < 2:
            raise ValueError("n_live must be >= 2")
        if self.steps_per_replacement < 1:
            raise ValueError("steps_per_replacement must be >= 1")
        if not 0.0 < self.termination_fraction < 1.0:
            raise ValueError("termination_fraction must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class NestedResult:
    """Evidence estimate and weighted posterior samples.

    Samples are ordered by ascending log-likelihood (dead points, then the
    final live points) and ``weights`` sum to one.
    """

    logz: float
    logz_err: float
    information: float
    u: np.ndarray
    logl: np.ndarray
    weights: np.ndarray
    params: list
    niter: int
    ncall: int
    acceptance: float
    zero_accept_count: int = 0
    diagnostics: dict = field(default_factory=dict, repr=False)

    def posterior_mean(self, fn=None) -> np.ndarray:
        vals = self.u if fn is None else np.array([fn(p) for p in self.params], dtype=float)
        return np.average(vals, axis=0, weights=self.weights)

    def write_diagnostics(self, path) -> None:
        """Per-iteration trace (iteration, ln X, ln L, acceptance) as CSV."""
        d = self.diagnostics
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "log_x", "log_l", "acceptance"])
            for row in zip(d["iteration"], d["log_x"], d["log_l"], d["acceptance"]):
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


# ---------------------------------------------------------------------------
# exploration kernels


@njit(cache=True)
def _reflect(v):
    # fold onto [0, 1] by mirror reflection at both faces
    for k in range(v.shape[0]):
        x = v[k] % 2.0
        if x > 1.0:
            x = 2.0 - x
        v[k] = x


@njit(cache=True)
def _inside(v):
    for k in range(v.shape[0]):
        if not (0.0 < v[k] < 1.0):
            return False
    return True


@njit(cache=True)
def _walk_compiled(fn, args, u, logl, label, thr_logl, thr_label, step, z, labels):
    """Constrained random walk; ``step`` is the scaled Cholesky factor."""
    ndim = u.shape[0]
    cur = u.copy()
    prop = np.empty(ndim)
    naccept = 0
    ncall = 0
    for s in range(z.shape[0]):
        for a in range(ndim):
            acc = cur[a]
            for b in range(a + 1):
                acc += step[a, b] * z[s, b]
            prop[a] = acc
        _reflect(prop)
        if not _inside(prop):
            continue
        new_logl = fn(prop, args)
        ncall += 1
        if new_logl != new_logl:
            new_logl = -np.inf
        new_label = labels[s]
        if new_logl > thr_logl or (new_logl == thr_logl and new_label > thr_label):
            cur[:] = prop
            logl = new_logl
            label = new_label
            naccept += 1
    return cur, logl, label, naccept, ncall


class RandomWalkKernel:
    """Adaptive random-walk Metropolis in the unit cube.

    ``cube_loglik`` maps a cube point to a log-likelihood; ``-inf`` means
    zero likelihood.
    """

    target_acceptance = 0.5

    def __init__(self, cube_loglik=None, scale: float | None = None):
        self.cube_loglik = cube_loglik
        self.scale = scale
        self.chol = None

    def evaluate(self, u) -> float:
        val = float(self.cube_loglik(u))
        return -math.inf if math.isnan(val) else val

    def prepare(self, live_u: np.ndarray) -> None:
        """Refresh the proposal shape from the live points."""
        ndim = live_u.shape[1]
        if self.scale is None:
            self.scale = 2.38 / math.sqrt(ndim)
        cov = np.atleast_2d(np.cov(live_u, rowvar=False))
        cov += np.eye(ndim) * 1e-12
        try:
            self.chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            self.chol = np.diag(np.sqrt(np.clip(np.diag(cov), 1e-12, None)))

    def adapt(self, naccept: int, nsteps: int) -> None:
        rate = naccept / nsteps
        self.scale *= math.exp(rate - self.target_acceptance)
        self.scale = min(max(self.scale, 1e-8), 10.0)

    def explore(self, u, logl, label, threshold, rng, nsteps):
        """Walk from a live point that already satisfies the constraint.

        Returns ``(u, logl, label, naccept, ncall)``.
        """
        thr_logl, thr_label = threshold
        ndim = u.shape[0]
        z = rng.standard_normal((nsteps, ndim))
        labels = rng.random(nsteps)
        step = self.scale * self.chol
        cur = u.copy()
        naccept = ncall = 0
        for s in range(nsteps):
            prop = cur + step @ z[s]
            _reflect(prop)
            if not _inside(prop):
                continue
            new_logl = self.evaluate(prop)
            ncall += 1
            if new_logl > thr_logl or (new_logl == thr_logl and labels[s] > thr_label):
                cur, logl, label = prop, new_logl, labels[s]
                naccept += 1
        return cur, logl, label, naccept, ncall


class CompiledRandomWalkKernel(RandomWalkKernel):
    """Same walk as :class:`RandomWalkKernel`, executed in numba.

    ``fn`` must be an ``@njit`` function ``fn(u, args) -> float``.
    """

    def __init__(self, fn, args, scale: float | None = None):
        super().__init__(None, scale)
        self.fn = fn
        self.args = args

    def evaluate(self, u) -> float:
        val = float(self.fn(np.ascontiguousarray(u, dtype=np.float64), self.args))
        return -math.inf if math.isnan(val) else val

    def explore(self, u, logl, label, threshold, rng, nsteps):
        ndim = u.shape[0]
        z = rng.standard_normal((nsteps, ndim))
        labels = rng.random(nsteps)
        step = np.ascontiguousarray(self.scale * self.chol)
        cur, logl, label, naccept, ncall = _walk_compiled(
            self.fn, self.args, u, float(logl), float(label),
            float(threshold[0]), float(threshold[1]), step, z, labels,
        )
        return cur, logl, label, naccept, ncall


# ---------------------------------------------------------------------------
# engine


def _logsumexp(a: np.ndarray) -> float:
    m = np.max(a)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(a - m))))


def run_nested(loglik, transform, cfg: NestedConfig | None = None, ndim: int | None = None,
               kernel: RandomWalkKernel | None = None) -> NestedResult:
    """Estimate ``ln Z`` for ``loglik(transform(u))`` over the unit cube.

    Parameters
    ----------
    loglik : callable
        Maps parameters (whatever ``transform`` returns) to a log-likelihood.
        ``-inf`` is a valid "zero likelihood" value.  Ignored when ``kernel``
        brings its own compiled likelihood.
    transform : callable
        Maps a point of the open unit cube to parameters.
    cfg : NestedConfig
    ndim : int
        Cube dimension.  Required.
    kernel : RandomWalkKernel, optional
        Exploration kernel; defaults to a Python random walk over
        ``loglik(transform(u))``.
    """
    cfg = cfg or NestedConfig()
    if ndim is None or ndim < 1:
        raise ValueError("ndim must be a positive integer")
    if kernel is None:
        kernel = RandomWalkKernel(lambda u: loglik(transform(u)))
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_live
    nsteps = cfg.steps_per_replacement

    live_u = rng.random((n, ndim))
    while not np.all((live_u > 0.0) & (live_u < 1.0)):
        bad = ~np.all((live_u > 0.0) & (live_u < 1.0), axis=1)
        live_u[bad] = rng.random((int(bad.sum()), ndim))
    live_logl = np.array([kernel.evaluate(u) for u in live_u])
    live_label = rng.random(n)
    ncall = n

    dead_u, dead_logl, dead_logw = [], [], []
    trace_it, trace_logx, trace_acc = [], [], []
    log_shrink = math.log(-math.expm1(-1.0 / n))  # ln(1 - e^{-1/n})
    logz = -math.inf
    prev_logl = None
    total_acc = total_steps = zero_accept = 0
    refresh = max(1, n // 10)
    log_frac = math.log(cfg.termination_fraction)
    converged = False

    it = 0
    while it < cfg.max_iterations:
        it += 1
        worst = int(np.lexsort((live_label, live_logl))[0])
        logl_k = float(live_logl[worst])
        if prev_logl is None:
            prev_logl = logl_k
        # trapezoid between X_{k-1} = e^{-(k-1)/n} and X_k = e^{-k/n}
        logw = np.logaddexp(prev_logl, logl_k) - math.log(2.0) + log_shrink - (it - 1) / n
        if not np.isfinite(logw):
            logw = -math.inf
        logz = float(np.logaddexp(logz, logw))
        prev_logl = logl_k
        dead_u.append(live_u[worst].copy())
        dead_logl.append(logl_k)
        dead_logw.append(logw)
        logx = -it / n
        trace_it.append(it)
        trace_logx.append(logx)

        threshold = (logl_k, float(live_label[worst]))
        if it % refresh == 1 or refresh == 1 or kernel.chol is None:
            kernel.prepare(live_u)
        # start from a copy of a surviving live point
        donor = worst
        while donor == worst:
            donor = int(rng.integers(n))
        new_u, new_logl, new_label, nacc, nc = kernel.explore(
            live_u[donor], live_logl[donor], live_label[donor], threshold, rng, nsteps
        )
        kernel.adapt(nacc, nsteps)
        ncall += nc
        total_acc += nacc
        total_steps += nsteps
        if nacc == 0:
            zero_accept += 1
        trace_acc.append(nacc / nsteps)
        live_u[worst] = new_u
        live_logl[worst] = new_logl
        live_label[worst] = new_label

        if np.max(live_logl) + logx < log_frac + logz:
            converged = True
            break

    logx = -it / n
    order = np.lexsort((live_label, live_logl))
    live_logw = live_logl[order] + logx - math.log(n)
    all_logl = np.concatenate([np.array(dead_logl), live_logl[order]])
    all_logw = np.concatenate([np.array(dead_logw), live_logw])
    all_u = np.vstack([np.array(dead_u), live_u[order]])
    logz = _logsumexp(all_logw)

    weights = np.exp(all_logw - logz)
    weights /= weights.sum()
    finite = weights > 0.0
    info = float(np.sum(weights[finite] * all_logl[finite]) - logz)
    info = max(info, 0.0)
    result = NestedResult(
        logz=logz,
        logz_err=math.sqrt(info / n),
        information=info,
        u=all_u,
        logl=all_logl,
        weights=weights,
        params=[],
        niter=it,
        ncall=ncall,
        acceptance=total_acc / max(total_steps, 1),
        zero_accept_count=zero_accept,
        diagnostics={
            "iteration": trace_it,
            "log_x": trace_logx,
            "log_l": dead_logl,
            "acceptance": trace_acc,
        },
    )
    if zero_accept:
        log.debug("%d replacements accepted no move", zero_accept)
    if not converged:
        raise NonConvergenceError(
            f"nested sampling did not terminate within {cfg.max_iterations} iterations",
            partial=result,
        )
    result.params = [transform(u) for u in all_u]
    return result


def weighted_quantile(values, weights, q: float) -> float:
    """Smallest value whose cumulative (value-sorted) weight reaches ``q``.

    Weights are normalized here; a relative slack of 1e-12 absorbs rounding in
    the cumulative sum.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.size == 0:
        raise ValueError("weighted_quantile of an empty sample")
    if values.shape != weights.shape:
        raise ValueError("values and weights differ in shape")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    idx = int(np.searchsorted(cw, q - 1e-12, side="left"))
    return float(values[order][min(idx, values.size - 1)])
