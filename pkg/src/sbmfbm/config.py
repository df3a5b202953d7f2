"""Run configuration: parsing, validation and hashing.

Configuration files are plain ``key = value`` text (``#`` starts a comment);
lists are comma-separated.  Recognised keys::

    models          data-generating models: SBM, FBM, CTRW        (SBM, FBM)
    alphas          alpha grid, or the word ``uniform``           (1.0)
    n_steps         trajectory lengths N                          (200)
    sigma_mn        measurement-noise levels                      (0)
    dims            spatial dimensions, 1..3                      (2)
    n_traj          trajectories per grid cell                    (50)
    seed            master seed, unsigned 64-bit                  (0)
    priors          ``correct`` and/or ``wrong``                  (correct)
    noise_prior_max ``auto`` or a number                          (auto)
    dt, ds          sampling interval, CTRW operational step      (1, 0.01)
    n_live, steps_per_replacement, termination_fraction, max_iterations
    workers         worker processes, 0 = all cores               (0)
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace

from . import __version__
from .likelihood import FBM, SBM
from .nested import NestedConfig
from .simulate import CTRW, MODELS


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    models: tuple = (SBM, FBM)
    alphas: tuple = (1.0,)
    n_steps: tuple = (200,)
    sigma_mn: tuple = (0.0,)
    dims: int = 2
    n_traj: int = 50
    seed: int = 0
    priors: tuple = ("correct",)
    noise_prior_max: str | float = "auto"
    dt: float = 1.0
    ds: float = 0.01
    n_live: int = 100
    steps_per_replacement: int = 40
    termination_fraction: float = 1e-4
    max_iterations: int = 1_000_000
    workers: int = 0
    inference_models: tuple = field(default=(SBM, FBM))

    def validate(self) -> "RunConfig":
        if not self.models or any(m not in MODELS for m in self.models):
            raise ConfigError(f"models must be drawn from {MODELS}, got {self.models}")
        if self.alphas != ("uniform",):
            for a in self.alphas:
                if not isinstance(a, float) or not 0.0 < a < 2.0:
                    raise ConfigError(f"alpha values must lie in (0, 2), got {a!r}")
                if CTRW in self.models and a > 1.0:
                    raise ConfigError(f"CTRW requires alpha <= 1, got {a}")
        elif CTRW in self.models:
            raise ConfigError("CTRW datasets need an explicit alpha grid")
        if not self.n_steps or any(n < 1 for n in self.n_steps):
            raise ConfigError("n_steps values must be >= 1")
        if any(s < 0 for s in self.sigma_mn):
            raise ConfigError("sigma_mn values must be >= 0")
        if not 1 <= self.dims <= 3:
            raise ConfigError("dims must be 1, 2 or 3")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.priors or any(p not in ("correct", "wrong") for p in self.priors):
            raise ConfigError("priors must be 'correct' and/or 'wrong'")
        if self.noise_prior_max != "auto" and not (
            isinstance(self.noise_prior_max, float) and self.noise_prior_max > 0
        ):
            raise ConfigError("noise_prior_max must be 'auto' or a positive number")
        if self.dt <= 0 or self.ds <= 0:
            raise ConfigError("dt and ds must be positive")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        try:
            self.nested_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def nested_config(self, seed: int | None = None) -> NestedConfig:
        return NestedConfig(self.n_live, self.steps_per_replacement, self.termination_fraction,
                            self.max_iterations, seed)

    def worker_count(self) -> int:
        return self.workers or os.cpu_count() or 1

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def config_hash(self) -> str:
        """Hash of the settings that determine each trajectory's results.

        The grid (alphas, n_steps, sigma_mn, models, n_traj) is left out on
        purpose: trajectory ids encode their grid cell, so extending a grid
        reuses cached results.  Worker count never affects results.
        """
        keep = {k: v for k, v in self.to_dict().items()
                if k not in ("alphas", "n_steps", "sigma_mn", "models", "n_traj", "workers",
                             "priors")}
        keep["version"] = __version__
        blob = json.dumps(keep, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw).validate() if kw else self


_LIST_KEYS = {"models", "alphas", "n_steps", "sigma_mn", "priors", "inference_models"}
_INT_KEYS = {"dims", "n_traj", "seed", "n_live", "steps_per_replacement", "max_iterations", "workers"}
_FLOAT_KEYS = {"dt", "ds", "termination_fraction"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _LIST_KEYS:
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if key == "alphas":
                if [i.lower() for i in items] == ["uniform"]:
                    return ("uniform",)
                return tuple(float(x) for x in items)
            if key == "n_steps":
                return tuple(int(x) for x in items)
            if key == "sigma_mn":
                return tuple(float(x) for x in items)
            if key in ("models", "inference_models"):
                return tuple(x.upper() for x in items)
            return tuple(x.lower() for x in items)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "noise_prior_max":
            return "auto" if raw.lower() == "auto" else float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    raise ConfigError(f"unknown configuration key {key!r}")


def parse_config_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    values = {key: _parse_value(key, raw) for key, raw in parser["run"].items()}
    return RunConfig(**values).validate()


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def dump_config_text(cfg: RunConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, list):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
