import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import mc_bootstrap, mixture_2d, mixture_8d, posterior_weights_mp, probe_pairs, within_standard_errors
from pnp_pdhg.prior import (
    DegenerateOracleError,
    DiffusionSchedule,
    GmmFlowDenoiser,
    GmmPrior,
    TweedieDenoiser,
    gmm_denoise,
    gmm_marginal_score,
    gmm_posterior_weights,
    gmm_velocity,
    mc_conditional_mean_oracle,
    template_image_prior,
    tweedie_denoise,
)


def test_prior_validation():
    with pytest.raises(ValueError):
        GmmPrior([0.5, 0.6], [[0.0], [1.0]], [1.0, 1.0])
    with pytest.raises(ValueError):
        GmmPrior([1.0], [[0.0]], [0.0])
    with pytest.raises(ValueError):
        GmmPrior([1.0], [[np.nan]], [1.0])
    with pytest.raises(ValueError):
        GmmPrior([0.5, 0.5], [[0.0]], [1.0, 1.0])


def test_serialization_round_trip(tmp_path):
    p = mixture_8d()
    path = tmp_path / "prior.json"
    p.save(path)
    q = GmmPrior.load(path)
    assert np.array_equal(p.weights, q.weights)
    assert np.array_equal(p.means, q.means)
    assert np.array_equal(p.variances, q.variances)
    with pytest.raises(ValueError):
        GmmPrior.from_dict({"format": "other"})


def test_sampling_moments():
    p = mixture_2d()
    s = p.sample(200000, np.random.default_rng(0))
    assert np.allclose(s.mean(axis=0), p.mean(), atol=0.02)


def test_weights_single_component():
    p = GmmPrior([1.0], [[0.3, -0.2]], [0.5])
    assert np.array_equal(gmm_posterior_weights(p, np.array([4.0, 1.0]), 0.6), [1.0])


def test_weights_symmetric():
    p = GmmPrior([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [0.4, 0.4])
    assert np.allclose(gmm_posterior_weights(p, np.array([0.0, 0.7]), 0.5), [0.5, 0.5], atol=1e-15)


def test_weights_high_precision_oracle():
    p = mixture_2d()
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.normal(scale=2, size=2)
        assert np.allclose(gmm_posterior_weights(p, x, 0.5), posterior_weights_mp(p, x, 0.5),
                           rtol=1e-12, atol=1e-15)


def test_weights_far_from_support_do_not_underflow():
    p = mixture_2d()
    w = gmm_posterior_weights(p, np.array([300.0, -400.0]), 0.99)
    assert np.all(np.isfinite(w)) and abs(w.sum() - 1) < 1e-12


def test_weights_reject_t_one():
    with pytest.raises(ValueError):
        gmm_posterior_weights(mixture_2d(), np.zeros(2), 1.0)


@given(st.floats(0, 0.999), st.integers(0, 2**31 - 1))
def test_weights_sum_to_one(t, seed):
    p = mixture_8d()
    x = np.random.default_rng(seed).normal(scale=3, size=8)
    assert abs(gmm_posterior_weights(p, x, t).sum() - 1) <= 1e-12


def test_weights_invariant_to_log_offset(rng):
    # Scaling every mixture weight by the same factor adds a constant to all log-densities.
    p = mixture_2d()
    from pnp_pdhg.prior.gmm import _component_logits

    x = rng.normal(size=2)
    logits, _ = _component_logits(p, x, 0.4)
    for c in (-700.0, 0.0, 700.0):
        shifted = np.exp(logits + c - (logits + c).max())
        assert np.allclose(shifted / shifted.sum(), gmm_posterior_weights(p, x, 0.4), atol=1e-15)


def test_denoise_boundaries(rng):
    for p in (mixture_2d(), mixture_8d()):
        x = rng.normal(size=p.dim)
        assert np.array_equal(gmm_denoise(p, x, 1.0), x)
        assert np.array_equal(gmm_denoise(p, x, 0.0), p.mean())


def test_denoise_single_gaussian_closed_form(rng):
    mu, s2 = np.array([0.5, -1.0]), 0.7
    p = GmmPrior([1.0], [mu], [s2])
    x, t = rng.normal(size=2), 0.35
    v = (1 - t) ** 2 + t**2 * s2
    assert np.allclose(gmm_denoise(p, x, t), mu + t * s2 / v * (x - t * mu), atol=1e-15)


def test_denoise_single_gaussian_mc():
    p = GmmPrior([1.0], [[0.5, -1.0]], [0.7])
    x, t = np.array([0.2, -0.4]), 0.5
    mc = mc_conditional_mean_oracle(p, x, t, 10**6, seed=1)
    ref = gmm_denoise(p, x, t)
    assert np.linalg.norm(mc - ref) / np.linalg.norm(ref) < 0.02


def test_standard_normal_denoiser():
    p = GmmPrior([1.0], [[0.0, 0.0]], [1.0])
    x, t = np.array([1.0, -2.0]), 0.3
    assert np.allclose(gmm_denoise(p, x, t), t * x / ((1 - t) ** 2 + t**2), atol=1e-15)
    mc = mc_conditional_mean_oracle(p, x, t, 10**6, seed=2)
    assert np.linalg.norm(mc - t * x / ((1 - t) ** 2 + t**2)) < 0.02 * np.linalg.norm(x)


def test_velocity_relation(rng):
    p = mixture_8d()
    x, t = rng.normal(size=8), 0.42
    assert np.array_equal(x + (1 - t) * gmm_velocity(p, x, t),
                          x + (1 - t) * ((gmm_denoise(p, x, t) - x) / (1 - t)))
    assert np.allclose(x + (1 - t) * gmm_velocity(p, x, t), gmm_denoise(p, x, t), atol=1e-14)
    with pytest.raises(ValueError):
        gmm_velocity(p, x, 1.0)


def test_velocity_symmetry():
    p = GmmPrior([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [0.2, 0.2])
    x = np.array([0.0, 0.8])
    v = gmm_velocity(p, x, 0.5)
    assert abs(v[0]) < 1e-15
    assert v[1] < 0


def test_point_mass_oracle():
    p = GmmPrior([1.0], [[0.4, -0.3]], [1e-12])
    assert np.allclose(mc_conditional_mean_oracle(p, np.array([0.1, 0.2]), 0.5, 1000, 0),
                       [0.4, -0.3], atol=1e-5)


def test_oracle_degenerate_error():
    p = GmmPrior([1.0], [[0.0]], [1e-4])
    with pytest.raises(DegenerateOracleError):
        mc_conditional_mean_oracle(p, np.array([1e160]), 0.5, 10, 0)
    with pytest.raises(ValueError):
        mc_conditional_mean_oracle(p, np.array([0.0]), 1.0, 10, 0)


def test_oracle_convergence_with_samples():
    p = mixture_2d()
    x, t = np.array([0.3, -0.5]), 0.6
    ref = gmm_denoise(p, x, t)
    errs = {n: np.median([np.linalg.norm(mc_conditional_mean_oracle(p, x, t, n, s) - ref)
                          for s in range(20)]) for n in (2000, 4000, 8000)}
    assert errs[8000] < errs[4000] < errs[2000]


def test_denoise_matches_mc_small():
    p = mixture_2d()
    probes = probe_pairs(p, 10, seed=4)
    means, ses = mc_bootstrap(p, probes, lambda t: (t, 1 - t), n_total=2 * 10**5, n_batches=20)
    closed = [gmm_denoise(p, x, t) for x, t in probes]
    ok, _, _ = within_standard_errors(closed, means, ses)
    assert ok.all()


@given(st.floats(0.0, 0.999), st.integers(0, 2**31 - 1))
def test_denoise_norm_bound(t, seed):
    p = mixture_8d()
    x = np.random.default_rng(seed).normal(scale=4, size=8)
    gain = t * p.variances / ((1 - t) ** 2 + t**2 * p.variances)
    bound = (np.linalg.norm(p.means, axis=1).max()
             + gain.max() * np.linalg.norm(x[None] - t * p.means, axis=1).max())
    assert np.linalg.norm(gmm_denoise(p, x, t)) <= bound * (1 + 1e-12)


def test_flow_denoiser_interface(rng):
    p = mixture_2d()
    d = GmmFlowDenoiser(p)
    x = rng.normal(size=(1, 1, 2))
    assert d.denoise(x, 0.3).shape == (1, 1, 2)
    assert np.array_equal(d.denoise(x, 1.0), x)
    assert np.allclose(d.velocity(x, 0.3), (d.denoise(x, 0.3) - x) / 0.7)


def test_schedules_validate():
    grid = np.linspace(0.01, 0.99, 99)
    DiffusionSchedule.vp_from_flow().validate(grid)
    DiffusionSchedule.vp_cosine().validate(grid)
    DiffusionSchedule.flow_interpolant().validate(grid)
    bad = DiffusionSchedule(lambda t: 0.5, lambda t: 0.5, True)
    with pytest.raises(ValueError):
        bad.validate(grid)
    wavy = DiffusionSchedule(lambda t: 0.5 + 0.4 * np.sin(10 * t), lambda t: 0.1)
    with pytest.raises(ValueError):
        wavy.validate(grid)


def test_tweedie_zero_noise():
    p = mixture_2d()
    sched = DiffusionSchedule(lambda t: 0.5, lambda t: 0.0)
    x = np.array([0.3, -0.7])
    assert np.array_equal(tweedie_denoise(p, sched, x, 0.2), x / 0.5)
    with pytest.raises(ValueError):
        tweedie_denoise(p, DiffusionSchedule(lambda t: 0.0, lambda t: 1.0), x, 0.2)


def test_tweedie_single_gaussian_closed_form(rng):
    mu, s2 = rng.normal(size=3), 0.45
    p = GmmPrior([1.0], [mu], [s2])
    sched = DiffusionSchedule.vp_cosine()
    for t in (0.1, 0.5, 0.9):
        a, sg = sched(t)
        x = rng.normal(size=3)
        ref = mu + a * s2 / (a**2 * s2 + sg**2) * (x - a * mu)
        assert np.max(np.abs(tweedie_denoise(p, sched, x, t) - ref)) <= 1e-10


def test_marginal_score_finite_difference(rng):
    p = mixture_2d()
    a, s = 0.7, 0.5
    x = rng.normal(size=2)
    marg = GmmPrior(p.weights, a * p.means, a**2 * p.variances + s**2)
    h = 1e-6
    fd = [(marg.log_density(x + h * e)[0] - marg.log_density(x - h * e)[0]) / (2 * h) for e in np.eye(2)]
    assert np.allclose(gmm_marginal_score(p, x, a, s), fd, atol=1e-7)


def test_tweedie_reduces_to_flow_denoiser(rng):
    # Rescaling the flow path by 1/r with r = sqrt(t^2 + (1-t)^2) gives a VP schedule.
    sched = DiffusionSchedule.vp_from_flow()
    for p in (GmmPrior([1.0], [[0.4, -1.1]], [0.6]), mixture_2d()):
        for t in (0.2, 0.5, 0.8):
            x = rng.normal(size=2)
            r = np.sqrt(t**2 + (1 - t) ** 2)
            assert np.max(np.abs(tweedie_denoise(p, sched, x / r, t) - gmm_denoise(p, x, t))) <= 1e-10


def test_tweedie_denoiser_class(rng):
    d = TweedieDenoiser(mixture_2d(), DiffusionSchedule.vp_from_flow())
    x = rng.normal(size=2)
    assert d.denoise(x, 0.4).shape == (2,)


def test_template_prior():
    p = template_image_prior(16, 16, 1, n_components=5, spread=0.1, seed=3)
    assert p.dim == 256 and p.n_components == 5
    assert np.all(np.abs(p.means) <= 0.8 + 1e-12)
    assert np.allclose(p.variances, 0.01)
    q = template_image_prior(16, 16, 1, n_components=5, spread=0.1, seed=3)
    assert np.array_equal(p.means, q.means)
