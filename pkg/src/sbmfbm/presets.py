"""Named desk-scale benchmark campaigns.

Each preset is a :class:`RunConfig` reproducing one experiment at reduced
size (``n_traj = 50`` per cell unless a comparison needs more statistics).
"""

from __future__ import annotations

from .config import RunConfig

SEED = 2022

PRESETS = {
    # F1 near and away from alpha = 1 at two trajectory lengths, noise-free
    "f1_alpha": RunConfig(models=("SBM", "FBM"), alphas=(0.4, 1.0, 1.6), n_steps=(50, 200),
                          sigma_mn=(0.0,), n_traj=50, seed=SEED),
    # sub- vs superdiffusive confusion under strong noise
    "noise_asymmetry": RunConfig(models=("SBM", "FBM"), alphas=(0.4, 1.6), n_steps=(200,),
                                 sigma_mn=(1.0,), n_traj=50, seed=SEED),
    # uniform vs linear alpha prior on uniform-alpha SBM data
    "wrong_prior_n50": RunConfig(models=("SBM",), alphas=("uniform",), n_steps=(50,),
                                 sigma_mn=(0.0,), n_traj=1000, seed=SEED,
                                 priors=("correct", "wrong")),
    "wrong_prior_n400": RunConfig(models=("SBM",), alphas=("uniform",), n_steps=(400,),
                                  sigma_mn=(0.0,), n_traj=300, seed=SEED,
                                  priors=("correct", "wrong")),
    # CTRW analysed with SBM and FBM only
    "ctrw": RunConfig(models=("CTRW",), alphas=(0.3, 0.5, 0.7), n_steps=(200,),
                      sigma_mn=(0.1,), n_traj=50, seed=SEED),
    # full grid of MAE/F1 figures (hours of CPU time)
    "full_grid": RunConfig(models=("SBM", "FBM"), alphas=(0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8),
                           n_steps=(50, 100, 200), sigma_mn=(0.0, 0.1, 1.0, 10.0), n_traj=50,
                           seed=SEED),
}


def preset(name: str) -> RunConfig:
    try:
        return PRESETS[name].validate()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
