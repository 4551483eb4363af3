import math

import numpy as np
import pytest

from robust_frechet import (
    DGP,
    Dataset,
    DistributionParams,
    FitConfig,
    GridSpec,
    QuantileFunction,
    ScenarioSpec,
    SymMatrix,
    contaminate,
    dgp1_truth,
    dgp2_truth,
    frobenius_distance,
    gen_dgp1,
    gen_dgp2,
    gen_dist_dgp,
    leave_one_out,
    mise_distribution,
    mse_matrix,
    quantile_grid,
    run_scenario,
)
from conftest import random_quantile, random_sym

SMALL_GRID = GridSpec(lambda_count=6)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def test_dgp1_moments_and_shape():
    rng = np.random.default_rng(1)
    data, truth = gen_dgp1(2000, 3, rng)
    x = data.covariates[:, 0]
    off = np.array([y.values[0, 1] for y in data.responses])
    # Beta(x, 1-x) has mean x: the average off-diagonal deviation vanishes
    assert abs(np.mean(off - x)) < 0.01
    for y in data.responses[:20]:
        assert np.array_equal(y.values, y.values.T)
        assert np.all(np.diag(y.values) == 1.0)
        assert np.all((y.values >= 0.0) & (y.values <= 1.0))


def test_dgp1_truth_formula():
    t3 = dgp1_truth(0.3, 4)
    assert np.all(np.diag(t3.values) == 1.0)
    off = t3.values[~np.eye(4, dtype=bool)]
    assert np.all(off == 0.3)
    # boundary: truth matches the conditional mean of the responses,
    # identity at x=0 and all-ones at x=1
    assert np.array_equal(dgp1_truth(0.0, 3).values, np.eye(3))
    assert np.array_equal(dgp1_truth(1.0, 3).values, np.ones((3, 3)))


def test_dgp2_truth_matches_monte_carlo_oracle():
    rng = np.random.default_rng(2)
    n_draws = 1_000_000
    # diagonal: E[exp(0.2 Z + 1)], Z ~ N(0,1)
    diag_mc = np.mean(np.exp(0.2 * rng.normal(size=n_draws) + 1.0))
    assert math.exp(1.02) == pytest.approx(diag_mc, rel=5e-3)
    # off-diagonal at c != 0: E[exp(0.2 Z')] E[exp(U c)], Z' ~ N(0, 1/2)
    for c in (-1.0, 0.37, 1.0):
        off_mc = np.mean(
            np.exp(0.2 * rng.normal(scale=math.sqrt(0.5), size=n_draws)
                   + rng.uniform(size=n_draws) * c)
        )
        closed = math.exp(0.01) * math.expm1(c) / c
        assert closed == pytest.approx(off_mc, rel=5e-3)
    beta = np.zeros(5)
    beta[0] = 0.125  # cos(4 pi * 0.125 x)=0 at x=(1,0,..): c = cos(pi/2)
    x = np.zeros(5)
    x[0] = 1.0
    truth = dgp2_truth(x, beta, 3)
    assert truth.values[0, 1] == pytest.approx(math.exp(0.01), abs=1e-12)


def test_dgp2_sample_shape():
    rng = np.random.default_rng(3)
    data, truth = gen_dgp2(30, 4, 10, None, rng)
    assert data.covariates.shape == (30, 10)
    for y in data.responses[:10]:
        assert y.dim == 4
        assert np.array_equal(y.values, y.values.T)
        assert np.all(y.values > 0.0)
    assert np.allclose(np.diag(truth.targets[0].values), math.exp(1.02))


def test_dist_dgp_grid_and_monotonicity():
    rng = np.random.default_rng(4)
    data, truth = gen_dist_dgp(40, DistributionParams(), rng)
    grid = data.responses[0].grid
    assert grid.size == 81
    assert grid[0] == pytest.approx(0.1, abs=1e-15)
    assert grid[-1] == pytest.approx(0.9, abs=1e-15)
    for y in data.responses:
        assert np.all(np.diff(y.values) > 0.0)
    assert truth.latent_sds is not None and np.all(truth.latent_sds > 0.0)


def test_dist_dgp_latent_moments():
    rng = np.random.default_rng(5)
    params = DistributionParams()
    data, truth = gen_dist_dgp(20000, params, rng)
    x = data.covariates[:, 0]
    sigma = truth.latent_sds
    resid = sigma - (params.sigma0 + params.gamma_sigma * x)
    # Gamma scale parameterization: conditional mean sigma0 + gamma_sigma x,
    # conditional variance v2
    assert abs(np.mean(resid)) < 0.02
    assert np.var(resid) == pytest.approx(params.v2, rel=0.05)
    mu_resid = truth.latent_means - params.beta * x
    assert abs(np.mean(mu_resid)) < 0.02
    assert np.var(mu_resid) == pytest.approx(params.v1, rel=0.05)


def test_dist_params_validation():
    with pytest.raises(ValueError):
        DistributionParams(v1=0.0)
    with pytest.raises(ValueError):
        DistributionParams(sigma0=1.0, gamma_sigma=-2.0)


# ---------------------------------------------------------------------------
# contamination
# ---------------------------------------------------------------------------

def test_contaminate_zero_proportion(rng):
    data, _ = gen_dgp1(10, 3, rng)
    out, idx = contaminate(data, 0.0, 100.0, rng)
    assert out is data
    assert idx.size == 0


def test_contaminate_matrix_distance(rng):
    data, _ = gen_dgp1(10, 4, rng)
    out, idx = contaminate(data, 0.2, 7.0, rng)
    assert idx.size == 2
    for i in idx:
        d = frobenius_distance(out.responses[i], data.responses[i])
        assert d == pytest.approx(7.0 * 4, abs=1e-9)  # shift * q
    untouched = [i for i in range(10) if i not in set(idx.tolist())]
    for i in untouched:
        assert np.array_equal(out.responses[i].values, data.responses[i].values)
    assert np.array_equal(out.covariates, data.covariates)


def test_contaminate_rounding_half_up(rng):
    data, _ = gen_dgp1(10, 3, rng)
    _, idx = contaminate(data, 0.25, 1.0, rng)  # 2.5 -> 3
    assert idx.size == 3
    _, idx = contaminate(data, 0.24, 1.0, rng)  # 2.4 -> 2
    assert idx.size == 2


def test_contaminate_distribution_stays_monotone(rng):
    data, _ = gen_dist_dgp(8, DistributionParams(), rng)
    out, idx = contaminate(data, 0.25, 100.0, rng)
    for i in idx:
        values = out.responses[i].values
        assert np.all(np.diff(values) > 0.0)
        assert np.allclose(values - data.responses[i].values, 100.0)


# ---------------------------------------------------------------------------
# error metrics
# ---------------------------------------------------------------------------

def test_mse_matrix_cases(rng):
    mats = [random_sym(rng, 3) for _ in range(4)]
    assert mse_matrix(mats, mats) == 0.0
    a = SymMatrix(np.zeros((5, 5)))
    b = SymMatrix(np.ones((5, 5)))
    assert mse_matrix([a], [b]) == pytest.approx(25.0, abs=1e-12)
    est = [random_sym(rng, 3) for _ in range(3)]
    tru = [random_sym(rng, 3) for _ in range(3)]
    oracle = 0.0
    for e, t in zip(est, tru):
        for j in range(3):
            for k in range(3):
                oracle += (e.values[j, k] - t.values[j, k]) ** 2
    assert mse_matrix(est, tru) == pytest.approx(oracle / 3.0, abs=1e-12)


def test_mise_distribution_cases(rng):
    grid = quantile_grid()
    fs = [random_quantile(rng, grid) for _ in range(3)]
    assert mise_distribution(fs, fs) == 0.0
    shifted = [QuantileFunction(grid, f.values + 2.0) for f in fs]
    assert mise_distribution(fs, shifted) == pytest.approx(4.0 * 0.8, abs=1e-12)
    # refined-grid oracle
    gs = [random_quantile(rng, grid) for _ in range(3)]
    fine = np.linspace(grid[0], grid[-1], 10 * (grid.size - 1) + 1)
    oracle = np.mean([
        np.trapezoid((np.interp(fine, grid, f.values) - np.interp(fine, grid, g.values)) ** 2, fine)
        for f, g in zip(fs, gs)
    ])
    assert mise_distribution(fs, gs) == pytest.approx(oracle, abs=1e-3)


# ---------------------------------------------------------------------------
# run_scenario
# ---------------------------------------------------------------------------

def test_run_scenario_deterministic():
    spec = ScenarioSpec(dgp=DGP.MATRIX_BETA, n=16, q=3,
                        contamination_proportion=0.2, shift=50.0,
                        replications=3, seed=99)
    r1, s1 = run_scenario(spec, SMALL_GRID)
    r2, s2 = run_scenario(spec, SMALL_GRID)
    for a, b in zip(r1, r2):
        assert a.failed == b.failed
        np.testing.assert_array_equal([a.mse_standard, a.mse_robust],
                                      [b.mse_standard, b.mse_robust])
        assert a.pair == b.pair
        assert a.k_hat == b.k_hat
    np.testing.assert_array_equal(s1.mse_robust_mean, s2.mse_robust_mean)


def test_run_scenario_clean_matches_standard():
    spec = ScenarioSpec(dgp=DGP.MATRIX_BETA, n=24, q=3, replications=3, seed=7)
    reports, summary = run_scenario(spec, SMALL_GRID)
    assert summary.n_failed == 0
    rel = abs(summary.mse_robust_mean - summary.mse_standard_mean) / summary.mse_standard_mean
    assert rel <= 0.15
    assert math.isnan(summary.detection_rate)  # nothing contaminated


def test_run_scenario_aggregate_is_plain_mean():
    spec = ScenarioSpec(dgp=DGP.MATRIX_BETA, n=14, q=3,
                        contamination_proportion=0.1, shift=30.0,
                        replications=4, seed=3)
    reports, summary = run_scenario(spec, SMALL_GRID)
    good = [r for r in reports if not r.failed]
    assert summary.mse_standard_mean == pytest.approx(
        np.mean([r.mse_standard for r in good]), abs=1e-12)
    assert summary.mse_robust_mean == pytest.approx(
        np.mean([r.mse_robust for r in good]), abs=1e-12)


def test_run_scenario_contaminated_detection():
    spec = ScenarioSpec(dgp=DGP.MATRIX_BETA, n=20, q=4,
                        contamination_proportion=0.2, shift=100.0,
                        replications=3, seed=21)
    reports, summary = run_scenario(spec, SMALL_GRID)
    assert summary.n_failed == 0
    assert summary.detection_rate == 1.0
    assert summary.mse_robust_mean < 0.2 * summary.mse_standard_mean
    for rep in reports:
        assert rep.k_hat <= math.floor(0.3 * 20)


def test_run_scenario_distribution_smoke():
    spec = ScenarioSpec(dgp=DGP.DISTRIBUTION_NORMAL, n=16,
                        contamination_proportion=0.2, shift=100.0,
                        replications=2, seed=11)
    reports, summary = run_scenario(spec, SMALL_GRID)
    assert summary.n_failed == 0
    assert summary.mse_robust_mean < summary.mse_standard_mean


def test_run_scenario_lognormal_smoke():
    spec = ScenarioSpec(dgp=DGP.MATRIX_LOGNORMAL, n=16, q=4, p=10,
                        replications=2, seed=13)
    reports, summary = run_scenario(spec, SMALL_GRID)
    assert summary.n_failed == 0
    assert np.isfinite(summary.mse_standard_mean)


# ---------------------------------------------------------------------------
# leave_one_out
# ---------------------------------------------------------------------------

def test_loo_identical_responses_constant_covariate(rng):
    y = random_sym(rng, 3)
    data = Dataset(np.full((6, 1), 0.4), (y,) * 6)
    report = leave_one_out(data, SMALL_GRID)
    assert np.allclose(report.error_standard, 0.0, atol=1e-20)
    assert np.allclose(report.error_robust, 0.0, atol=1e-20)
    assert all(p is None for p in report.pairs)  # degenerate tuning fallback


def test_loo_exclude_matches_admit_all(rng):
    data, _ = gen_dgp1(10, 3, rng)
    full = leave_one_out(data, SMALL_GRID)
    explicit = leave_one_out(data, SMALL_GRID, exclude=())
    assert full.indices == explicit.indices == tuple(range(10))
    assert np.array_equal(full.error_robust, explicit.error_robust)


def test_loo_excludes_contaminated_indices():
    rng = np.random.default_rng(17)
    data, _ = gen_dgp1(12, 3, rng)
    cont, idx = contaminate(data, 0.25, 60.0, rng)
    report = leave_one_out(cont, SMALL_GRID, exclude=idx)
    assert set(report.indices).isdisjoint(set(idx.tolist()))
    assert len(report.indices) == 12 - idx.size
    # robust holdout error no worse than the standard one on average
    assert report.mean_robust <= report.mean_standard


def test_loo_requires_enough_observations(rng):
    y = random_sym(rng, 2)
    data = Dataset(np.array([[0.0], [1.0]]), (y, y))
    with pytest.raises(ValueError):
        leave_one_out(data)
