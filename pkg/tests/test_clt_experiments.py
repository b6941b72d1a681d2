import numpy as np
import pytest
from scipy import stats

from radwalk import BadArity, TooFewSamples
from radwalk.clt_experiments import (
    CHUNK_TRIALS,
    WalkConfig,
    _fast_chunk_q1,
    _walk_chunk,
    estimate_covariance,
    fast_walk_trial_q1,
    moment_decay_experiment,
    predict_covariances,
    run_walk_trial,
    trial_stream,
    verify_clt,
)
from radwalk.radial_measures import RadialLaw, r2, sigma_nu, t_nu

TWO_POINT = RadialLaw.two_point(1.0, 0.5, np.sqrt(3.0))
Q2_ATOMS = RadialLaw.from_atoms(
    np.array([[[1.5, 0.5], [0.5, 0.5]], [[1.0, 0.0], [0.0, 1.0]]]), [0.5, 0.5]
)


def _cfg(**kw):
    base = dict(nu=TWO_POINT, n=20, p=100, trials=2000, regime="CLT_II", seed=7, fast_path=True)
    base.update(kw)
    return WalkConfig(**base)


def test_config_validation():
    with pytest.raises(BadArity):
        _cfg(regime="CLT_III")
    with pytest.raises(BadArity):
        _cfg(trials=10)
    with pytest.raises(BadArity):
        WalkConfig(nu=Q2_ATOMS, n=5, p=1, trials=200, regime="CLT_II")
    with pytest.raises(BadArity):
        WalkConfig(nu=Q2_ATOMS, n=5, p=10, trials=200, regime="CLT_II", fast_path=True)


def test_single_step_trial_has_no_cross_terms():
    rng = np.random.default_rng(90)
    cfg = WalkConfig(nu=Q2_ATOMS, n=1, p=10, trials=100, regime="CLT_II", seed=0)
    t = run_walk_trial(cfg, rng, validate=True)
    assert np.abs(t.b).max() < 1e-12
    assert np.abs(t.b_direct).max() == 0.0
    # Xi_1 = gram(X_1) - r2 means a = xi
    assert np.array_equal(t.xi, t.a)


def test_point_mass_unit_radius_has_zero_a_part():
    rng = np.random.default_rng(91)
    cfg = WalkConfig(nu=RadialLaw.point_mass(1.0), n=15, p=8, trials=100, regime="CLT_II", seed=0)
    for _ in range(5):
        t = run_walk_trial(cfg, rng)
        assert np.abs(t.a).max() < 1e-11


def test_decomposition_identity_direct_path():
    rng = np.random.default_rng(92)
    for nu, p in ((TWO_POINT, 7), (Q2_ATOMS, 9)):
        xi, a, b, b_direct = _walk_chunk(nu, 12, p, 50, rng, validate=True)
        m = xi.shape[0]
        tol = 1e-8 * (1.0 + np.linalg.norm(xi.reshape(m, -1), axis=1))
        err = np.abs((b_direct - b).reshape(m, -1)).max(axis=1)
        assert np.all(err <= tol)


def test_fast_path_single_step_is_radius_squared():
    rng = np.random.default_rng(93)
    xi, a, b, _ = _fast_chunk_q1(TWO_POINT, 1, 50, 200, rng)
    assert not b.any()
    s2 = xi[:, 0, 0] + 1 * float(r2(TWO_POINT)[0, 0])
    assert set(np.round(np.unique(s2), 12)) <= {1.0, 3.0}


def test_fast_path_decomposition_identity():
    rng = np.random.default_rng(94)
    xi, a, b, b_direct = _fast_chunk_q1(TWO_POINT, 25, 40, 300, rng, validate=True)
    assert np.abs(b_direct - b).max() <= 1e-8 * (1.0 + np.abs(xi).max())


def test_fast_and_direct_paths_agree_in_distribution():
    n_trials = 10_000
    xi_fast, _, _, _ = _fast_chunk_q1(TWO_POINT, 20, 50, n_trials, np.random.default_rng(95))
    xi_direct, _, _, _ = _walk_chunk(TWO_POINT, 20, 50, n_trials, np.random.default_rng(96))
    res = stats.ks_2samp(xi_fast.reshape(-1), xi_direct.reshape(-1))
    assert res.pvalue > 0.001


def test_trial_statistics_wrappers():
    rng = np.random.default_rng(97)
    t = fast_walk_trial_q1(_cfg(), rng)
    assert t.xi.shape == (1,)
    assert t.normalization == pytest.approx(1.0 / np.sqrt(20))
    with pytest.raises(BadArity):
        fast_walk_trial_q1(WalkConfig(nu=Q2_ATOMS, n=5, p=10, trials=200, regime="CLT_II"), rng)


def test_predict_covariances_two_point_values():
    cov_a, cov_b, cov_xi = predict_covariances(TWO_POINT, 100, 1000)
    assert cov_xi[0, 0] / 100 == pytest.approx(1.792, rel=1e-12)
    assert cov_a[0, 0] == pytest.approx(100.0, rel=1e-12)


def test_predict_covariances_degenerate_cases():
    cov_a, cov_b, _ = predict_covariances(RadialLaw.point_mass(1.0), 50, 100)
    assert not cov_a.any()
    _, cov_b1, _ = predict_covariances(TWO_POINT, 1, 100)
    assert not cov_b1.any()


def test_estimate_covariance_constant_samples():
    est = estimate_covariance(np.ones((50, 3)))
    assert not est.cov.any()


def test_estimate_covariance_two_antipodal_samples():
    v = np.array([1.0, -2.0])
    est = estimate_covariance(np.stack([v, -v]))
    assert np.allclose(est.cov, 2.0 * np.outer(v, v))
    assert np.all(np.isinf(est.stderr))
    with pytest.raises(TooFewSamples):
        estimate_covariance(v[None, :])


def test_estimate_covariance_matches_known_law():
    rng = np.random.default_rng(98)
    m = rng.standard_normal((3, 3))
    cov = m @ m.T
    lfac = np.linalg.cholesky(cov)
    draws = rng.standard_normal((100_000, 3)) @ lfac.T
    est = estimate_covariance(draws)
    assert np.linalg.norm(est.cov - cov) / np.linalg.norm(cov) < 0.05


def test_jackknife_stderr_scale_for_gaussian_variance():
    # for iid normals the variance estimator has stderr ~ sigma^2 sqrt(2/n)
    rng = np.random.default_rng(99)
    n = 20_000
    est = estimate_covariance(rng.standard_normal((n, 1)))
    theory = np.sqrt(2.0 / n)
    assert est.stderr[0, 0] == pytest.approx(theory, rel=0.3)


def test_zero_cross_covariance_of_parts():
    # exhaustively checkable corner: p = q = 1, n = 2, every step is +-r
    rng = np.random.default_rng(100)
    xi, a, b, _ = _walk_chunk(TWO_POINT, 2, 1, 20_000, rng)
    av, bv = a.reshape(-1), b.reshape(-1)
    n = av.size
    prod = (av - av.mean()) * (bv - bv.mean())
    se = prod.std(ddof=1) / np.sqrt(n)
    assert abs(prod.mean()) <= 4.0 * se


def test_verify_clt_exact_check_passes():
    cfg = _cfg(n=30, p=900, trials=4096, seed=11)
    rep = verify_clt(cfg, checks=("exact",))
    assert rep.verdicts["exact_covariance"] == "PASS"
    assert rep.overall == "PASS"
    target = sigma_nu(TWO_POINT)[0, 0] + 29 / 900 * t_nu(TWO_POINT)[0, 0]
    assert rep.predicted_exact[0, 0] == pytest.approx(target, rel=1e-12)


def test_verify_clt_inconclusive_below_trial_floor():
    cfg = _cfg(trials=512, seed=3)
    rep = verify_clt(cfg, checks=("exact",))
    assert rep.overall in ("INCONCLUSIVE", "FAIL")
    assert rep.overall != "PASS"


def test_verify_clt_degenerate_limit_skips_ks():
    # point mass with a single step: Xi is identically zero, limit is a point mass
    cfg = WalkConfig(nu=RadialLaw.point_mass(1.0), n=1, p=16, trials=1024,
                     regime="CLT_II", seed=5, fast_path=True)
    rep = verify_clt(cfg, checks=("limit",))
    assert rep.verdicts["ks_normality"] == "SKIPPED"
    assert not rep.predicted_limit.any()
    assert not rep.empirical_cov.any()
    assert rep.verdicts["limit_covariance"] == "PASS"
    assert rep.verdicts["exact_covariance"] == "PASS"


def test_verify_clt_deterministic_and_worker_independent():
    cfg = _cfg(trials=CHUNK_TRIALS * 2 + 100, seed=21)
    rep1 = verify_clt(cfg, workers=None, checks=("exact",))
    rep2 = verify_clt(cfg, workers=2, checks=("exact",))
    assert rep1.to_dict() == rep2.to_dict()


def test_verify_clt_report_is_self_contained():
    cfg = _cfg(trials=1100, seed=33)
    rep = verify_clt(cfg)
    echo = rep.config
    again = verify_clt(WalkConfig(nu=RadialLaw.from_config(echo["law"]), n=echo["n"], p=echo["p"],
                                  trials=echo["trials"], regime=echo["regime"], c=echo["c"],
                                  seed=echo["seed"], fast_path=echo["fast_path"]),
                       stream_tag=echo["stream_tag"])
    assert rep.to_dict() == again.to_dict()


def test_clt1_normalization_and_a_part_shrinks():
    # along a CLT I schedule the per-step part contributes p Sigma / n -> 0
    variances = []
    for n in (100, 400, 1600):
        p = int(np.ceil(np.sqrt(n)))
        rng = trial_stream(17, 0, n)
        _, a, _, _ = _fast_chunk_q1(TWO_POINT, n, p, 3000, rng)
        scale = np.sqrt(p) / n
        variances.append((scale * a.reshape(-1)).var(ddof=1))
    assert variances[0] > variances[1] > variances[2]


def test_moment_decay_slope_inverse_p():
    rng = np.random.default_rng(101)
    rep = moment_decay_experiment(RadialLaw.point_mass(1.0), {(0, 0): 2},
                                  [8, 16, 32, 64, 128], 10_000, rng)
    assert rep.branch == "decay"
    assert abs(rep.slope - (-1.0)) <= 0.3
    for p, est, se in zip(rep.p_grid, rep.estimates, rep.stderrs):
        assert abs(est - 1.0 / p) <= 4.0 * se


def test_moment_decay_parity_branch():
    rng = np.random.default_rng(102)
    rep = moment_decay_experiment(TWO_POINT, {(0, 0): 1, (1, 0): 2}, [10, 50], 5000, rng)
    assert rep.branch == "parity"
    assert rep.max_abs_z < 4.0


def test_moment_decay_needs_three_points_for_slope():
    rng = np.random.default_rng(103)
    with pytest.raises(BadArity):
        moment_decay_experiment(RadialLaw.point_mass(1.0), {(0, 0): 2}, [8], 2000, rng)


def test_trial_stream_reproducible_and_split():
    a = trial_stream(5, 1, 0).standard_normal(4)
    b = trial_stream(5, 1, 0).standard_normal(4)
    c = trial_stream(5, 1, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
