"""Model probabilities, point estimates, classification and benchmark metrics."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NumericalDomainError
from .likelihood import FBM, SBM, _fbm_loglik, _sbm_loglik, increments_of, loglik_multidim
from .nested import CompiledRandomWalkKernel, NestedConfig, NestedResult, run_nested, weighted_quantile
from .priors import PriorSpec, cube_alpha, cube_amplitude, unit_to_params

MODEL_ORDER = (SBM, FBM)
_MODEL_CODES = {SBM: 1, FBM: 2}


# ---------------------------------------------------------------------------
# cube likelihoods for the compiled kernel


@njit(cache=True)
def _sbm_cube_loglik(u, args):
    dx2, alpha_code, noise_max, t0_max, dt = args
    alpha = cube_alpha(u[0], alpha_code)
    if not (0.0 < alpha < 2.0):
        return -np.inf
    t0 = t0_max * u[3] if u.shape[0] > 3 else 0.0
    val = _sbm_loglik(dx2, alpha, cube_amplitude(u[1]), t0, noise_max * u[2], dt)
    return -np.inf if val != val else val


@njit(cache=True)
def _fbm_cube_loglik(u, args):
    dx2, alpha_code, noise_max, t0_max, dt = args
    alpha = cube_alpha(u[0], alpha_code)
    if not (0.0 < alpha < 2.0):
        return -np.inf
    val = _fbm_loglik(dx2, alpha, cube_amplitude(u[1]), noise_max * u[2])
    return -np.inf if val != val else val


def model_kernel(dx2: np.ndarray, spec: PriorSpec) -> CompiledRandomWalkKernel:
    """Compiled random-walk kernel for one trajectory under one prior."""
    args = (
        np.ascontiguousarray(dx2, dtype=np.float64),
        np.int64(spec.alpha_code),
        float(spec.noise_prior_max),
        float(spec.t0_max or 0.0),
        float(spec.dt),
    )
    fn = _sbm_cube_loglik if spec.model == SBM else _fbm_cube_loglik
    return CompiledRandomWalkKernel(fn, args)


def derive_seed(master_seed: int, *labels) -> int:
    """64-bit seed from a master seed and string labels (e.g. id, model)."""
    digest = hashlib.blake2b("\x1f".join(map(str, labels)).encode(), digest_size=8).digest()
    words = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest, "little")]
    ss = np.random.SeedSequence(words)
    return int(ss.generate_state(1, np.uint64)[0])


def run_model(traj, spec: PriorSpec, cfg: NestedConfig) -> NestedResult:
    """Nested sampling of one model's posterior for one trajectory."""
    dx2 = increments_of(traj)
    positions = getattr(traj, "positions", traj)

    def loglik(theta):
        # domain failures count as zero likelihood inside the sampler
        try:
            return loglik_multidim(positions, spec.model, theta)
        except NumericalDomainError:
            return -math.inf

    return run_nested(
        loglik,
        lambda u: unit_to_params(u, spec),
        cfg,
        ndim=spec.ndim,
        kernel=model_kernel(dx2, spec),
    )


# ---------------------------------------------------------------------------
# decision layer


def model_posterior(logz, model_priors=None) -> np.ndarray:
    """Posterior model probabilities from log-evidences (stable softmax)."""
    logz = np.asarray(logz, dtype=np.float64)
    if model_priors is None:
        model_priors = np.full(logz.shape, 1.0 / logz.size)
    prior = np.asarray(model_priors, dtype=np.float64)
    if prior.shape != logz.shape:
        raise ValueError("one prior probability per model is required")
    if not np.all(np.isfinite(logz)):
        raise ValueError("log-evidences must be finite")
    if abs(prior.sum() - 1.0) > 1e-12 or np.any(prior < 0):
        raise ValueError("model priors must be non-negative and sum to 1")
    with np.errstate(divide="ignore"):
        a = logz + np.log(prior)
    a = a - np.max(a)
    p = np.exp(a)
    return p / p.sum()


def estimate_alpha(medians, probs) -> float:
    """Model-probability-weighted posterior median of alpha."""
    medians = np.asarray(medians, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    return float(np.dot(medians, probs))


def classify(probs, models=MODEL_ORDER) -> str:
    """Most probable model; exact ties go to the first model (SBM)."""
    probs = np.asarray(probs, dtype=np.float64)
    return models[int(np.argmax(probs))]


def mae(predictions, ground_truths) -> tuple[float, float]:
    """Mean absolute error and its standard error (0 for a single value)."""
    pred = np.asarray(predictions, dtype=np.float64)
    gt = np.asarray(ground_truths, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError("predictions and ground truths differ in length")
    if pred.size == 0:
        raise ValueError("mae of an empty sample")
    err = np.abs(pred - gt)
    se = float(err.std(ddof=1) / math.sqrt(err.size)) if err.size > 1 else 0.0
    return float(err.mean()), se


def f1_score(assignments, ground_truth_models) -> tuple[float, float]:
    """Fraction of correct assignments with its Bernoulli standard error."""
    a = list(assignments)
    g = list(ground_truth_models)
    if len(a) != len(g):
        raise ValueError("assignments and ground truths differ in length")
    if not a:
        raise ValueError("f1_score of an empty sample")
    p = sum(x == y for x, y in zip(a, g)) / len(a)
    return p, math.sqrt(p * (1.0 - p) / len(a))


def confusion_matrix(assignments, ground_truth_models, models=MODEL_ORDER) -> np.ndarray:
    """Counts with rows = ground truth, columns = assignment."""
    a = list(assignments)
    g = list(ground_truth_models)
    if len(a) != len(g):
        raise ValueError("assignments and ground truths differ in length")
    if not a:
        raise ValueError("confusion_matrix of an empty sample")
    index = {m: i for i, m in enumerate(models)}
    out = np.zeros((len(models), len(models)), dtype=np.int64)
    for x, y in zip(a, g):
        out[index[y], index[x]] += 1
    return out


@dataclass
class ModelSummary:
    logz: float
    logz_err: float
    information: float
    alpha_median: float
    niter: int
    ncall: int
    acceptance: float

    @classmethod
    def from_result(cls, res: NestedResult) -> "ModelSummary":
        alphas = np.array([p.alpha for p in res.params])
        return cls(
            logz=res.logz,
            logz_err=res.logz_err,
            information=res.information,
            alpha_median=weighted_quantile(alphas, res.weights, 0.5),
            niter=res.niter,
            ncall=res.ncall,
            acceptance=res.acceptance,
        )


@dataclass
class TrajectoryInference:
    id: str
    models: dict
    probabilities: dict
    assigned: str
    alpha_estimate: float
    ambiguous: bool
    true_model: str | None = None
    ground_truth: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "models": {m: vars(s).copy() for m, s in self.models.items()},
            "probabilities": dict(self.probabilities),
            "assigned": self.assigned,
            "alpha_estimate": self.alpha_estimate,
            "ambiguous": self.ambiguous,
            "true_model": self.true_model,
            "ground_truth": dict(self.ground_truth),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryInference":
        return cls(
            id=d["id"],
            models={m: ModelSummary(**s) for m, s in d["models"].items()},
            probabilities=dict(d["probabilities"]),
            assigned=d["assigned"],
            alpha_estimate=float(d["alpha_estimate"]),
            ambiguous=bool(d["ambiguous"]),
            true_model=d.get("true_model"),
            ground_truth=dict(d.get("ground_truth", {})),
        )


def combine(traj_id: str, summaries: dict, model_priors=None, true_model=None,
            ground_truth=None, results=None) -> TrajectoryInference:
    """Decision step for one trajectory given per-model summaries."""
    models = [m for m in MODEL_ORDER if m in summaries]
    logz = [summaries[m].logz for m in models]
    probs = model_posterior(logz, model_priors)
    medians = [summaries[m].alpha_median for m in models]
    ambiguous = False
    if len(models) == 2:
        a, b = (summaries[m] for m in models)
        ambiguous = abs(a.logz - b.logz) < 2.0 * math.hypot(a.logz_err, b.logz_err)
    return TrajectoryInference(
        id=traj_id,
        models=dict(summaries),
        probabilities={m: float(p) for m, p in zip(models, probs)},
        assigned=classify(probs, tuple(models)),
        alpha_estimate=estimate_alpha(medians, probs),
        ambiguous=ambiguous,
        true_model=true_model,
        ground_truth=dict(ground_truth or {}),
        results=dict(results or {}),
    )


def infer_trajectory(traj, priors: dict, cfg: NestedConfig | None = None, master_seed: int = 0,
                     keep_results: bool = False) -> TrajectoryInference:
    """Evidence, posterior medians and model choice for one trajectory.

    ``priors`` maps model id to :class:`PriorSpec`.  Each model's run gets its
    own seed derived from (``master_seed``, trajectory id, model).
    """
    cfg = cfg or NestedConfig()
    summaries, results = {}, {}
    for model in MODEL_ORDER:
        if model not in priors:
            continue
        seed = derive_seed(master_seed, traj.id, model)
        run_cfg = NestedConfig(cfg.n_live, cfg.steps_per_replacement, cfg.termination_fraction,
                               cfg.max_iterations, seed)
        res = run_model(traj, priors[model], run_cfg)
        summaries[model] = ModelSummary.from_result(res)
        if keep_results:
            results[model] = res
    return combine(traj.id, summaries, true_model=getattr(traj, "model", None),
                   ground_truth=getattr(traj, "ground_truth", None), results=results)
