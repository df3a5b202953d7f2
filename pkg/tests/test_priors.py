import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sbmfbm.likelihood import FBM, SBM, FbmParams, SbmParams
from sbmfbm.priors import (
    PriorSpec,
    alpha_log_density,
    amplitude_log_density,
    draw_ground_truth,
    log_prior_density,
    noise_log_density,
    noise_prior_max_for,
    norm_ppf,
    prior_for,
    unit_to_params,
)

interior = st.floats(1e-12, 1 - 1e-12)


def test_cube_midpoints():
    spec = PriorSpec(SBM)
    p = unit_to_params([0.5, 0.5, 0.5], spec)
    assert p.alpha == 1.0 and p.sigma1 == 1.0 and p.sigma_mn == 0.5 and p.t0 == 0.0
    assert unit_to_params([0.25, 0.5, 0.5], PriorSpec(FBM, "linear")).alpha == 1.0


@pytest.mark.parametrize("u", [[0.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 0.0], [0.5, 0.5]])
def test_cube_boundary_and_shape_rejected(u):
    with pytest.raises(ValueError):
        unit_to_params(u, PriorSpec(SBM))


def test_marginal_densities():
    for a in (0.01, 0.7, 1.99):
        assert math.exp(alpha_log_density(a, "uniform")) == pytest.approx(0.5)
    assert math.exp(alpha_log_density(2.0, "linear")) == pytest.approx(1.0)
    assert math.exp(alpha_log_density(0.5, "linear")) == pytest.approx(0.25)
    assert alpha_log_density(2.5, "uniform") == -math.inf
    assert noise_log_density(0.5, 10.0) == pytest.approx(-math.log(10.0))
    assert noise_log_density(1.5, 1.0) == -math.inf
    assert amplitude_log_density(-1.0) == -math.inf


@pytest.mark.parametrize("density,lo,hi", [
    (lambda a: math.exp(alpha_log_density(a, "uniform")), 0.0, 2.0),
    (lambda a: math.exp(alpha_log_density(a, "linear")), 0.0, 2.0),
    (lambda s: math.exp(amplitude_log_density(s)), 0.0, math.inf),
    (lambda s: math.exp(noise_log_density(s, 10.0)), 0.0, 10.0),
])
def test_marginals_normalised(density, lo, hi):
    from scipy.integrate import quad

    if math.isinf(hi):
        # log-normal: integrate in log10 space for accuracy
        total = quad(lambda z: density(10**z) * 10**z * math.log(10), -30, 30, epsabs=1e-12)[0]
    else:
        total = quad(density, lo, hi, epsabs=1e-12)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_out_of_support_is_minus_inf():
    spec = PriorSpec(SBM)
    assert log_prior_density(SbmParams(1.0, 1.0, t0=2.0), spec) == -math.inf
    assert log_prior_density(SbmParams(1.0, 1.0, sigma_mn=1.5), spec) == -math.inf
    assert math.isfinite(log_prior_density(SbmParams(1.0, 1.0, sigma_mn=1.5), PriorSpec(SBM, noise_prior_max=10)))


@given(interior, interior, interior, st.sampled_from([SBM, FBM]), st.sampled_from(["uniform", "linear"]))
def test_round_trip_density_finite(u0, u1, u2, model, alpha_prior):
    spec = PriorSpec(model, alpha_prior)
    theta = unit_to_params([u0, u1, u2], spec)
    assert math.isfinite(log_prior_density(theta, spec))


@given(interior, interior, interior, interior)
def test_round_trip_with_t0(u0, u1, u2, u3):
    spec = PriorSpec(SBM, t0_max=5.0)
    theta = unit_to_params([u0, u1, u2, u3], spec)
    assert 0 <= theta.t0 < 5.0
    assert math.isfinite(log_prior_density(theta, spec))


def test_inverse_normal_cdf_accuracy():
    p = np.concatenate([np.geomspace(1e-300, 0.5, 20_000), 1 - np.geomspace(1e-16, 0.5, 20_000)])
    x = stats.norm.ppf(p)
    ours = np.array([norm_ppf(v) for v in p])
    rel = np.abs(ours - x) / np.maximum(np.abs(x), 1e-300)
    assert rel.max() <= 1.2e-9
    assert norm_ppf(0.5) == 0.0


@pytest.fixture(scope="module")
def pushforward():
    rng = np.random.default_rng(2024)
    u = rng.random((100_000, 3))
    out = {}
    for prior in ("uniform", "linear"):
        spec = PriorSpec(FBM, prior, noise_prior_max=10.0)
        ps = [unit_to_params(row, spec) for row in u]
        out[prior] = np.array([[p.alpha, p.sigma, p.sigma_mn] for p in ps])
    return out


def test_pushforward_ks(pushforward):
    uni, lin = pushforward["uniform"], pushforward["linear"]
    assert stats.kstest(uni[:, 0], stats.uniform(0, 2).cdf).pvalue > 0.01
    assert stats.kstest(lin[:, 0], lambda a: np.clip(a, 0, 2) ** 2 / 4).pvalue > 0.01
    assert stats.kstest(np.log10(uni[:, 1]), "norm").pvalue > 0.01
    assert stats.kstest(uni[:, 2], stats.uniform(0, 10).cdf).pvalue > 0.01


def test_pushforward_chi_square_linear_alpha(pushforward):
    a = pushforward["linear"][:, 0]
    edges = np.linspace(0, 2, 41)
    observed, _ = np.histogram(a, edges)
    expected = a.size * np.diff(edges**2 / 4)
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_ground_truth_fixed_alpha():
    rng = np.random.default_rng(0)
    p = draw_ground_truth(PriorSpec(SBM), rng, 0.4, sigma_mn=0.1)
    assert p.alpha == 0.4 and p.t0 == 0.0 and p.sigma_mn == 0.1


def test_ground_truth_amplitude_law():
    rng = np.random.default_rng(7)
    draws = [draw_ground_truth(PriorSpec(SBM), rng) for _ in range(100_000)]
    z = np.log10([d.sigma1 for d in draws])
    n = z.size
    assert abs(z.mean()) <= 4 / math.sqrt(n)
    assert abs(z.var(ddof=1) - 1) <= 4 * math.sqrt(2 / n)
    assert all(d.t0 == 0.0 for d in draws)
    alphas = np.array([d.alpha for d in draws])
    assert np.all((alphas > 0) & (alphas < 2))
    assert stats.kstest(alphas, stats.uniform(0, 2).cdf).pvalue > 0.01


def test_noise_prior_switching():
    assert noise_prior_max_for(10.0) == 10.0
    for s in (0.0, 0.1, 1.0):
        assert noise_prior_max_for(s) == 1.0


def test_prior_for_and_dict_round_trip():
    spec = prior_for(SBM, "wrong", 10.0)
    assert spec.alpha_prior == "linear" and spec.noise_prior_max == 10.0 and spec.ndim == 3
    assert PriorSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        prior_for(SBM, "flat")


@pytest.mark.parametrize("kw", [
    dict(model="CTRW"), dict(model=SBM, alpha_prior="beta"), dict(model=SBM, noise_prior_max=0.0),
    dict(model=FBM, t0_max=1.0), dict(model=SBM, t0_max=-1.0),
])
def test_prior_spec_validation(kw):
    with pytest.raises(ValueError):
        PriorSpec(**kw)
