import math

import numpy as np
import pytest

from robust_frechet import (
    Dataset,
    FitConfig,
    GridSpec,
    NoFeasiblePair,
    SymMatrix,
    TuningPair,
    bic_score,
    build_grid,
    contaminate,
    fit_robust,
    gen_dgp1,
    lambda_max,
    own_point_weights,
    select_tuning,
)
from conftest import matrix_dataset, random_sym


def test_lambda_max_identical_responses(rng):
    y = random_sym(rng, 3)
    data = Dataset(rng.uniform(size=(5, 1)), (y,) * 5)
    # zero up to the rounding dust of the weighted average
    assert lambda_max(data) == pytest.approx(0.0, abs=1e-24)


def test_lambda_max_two_point_hand_case():
    # X = (0, 1): the standard fit at x_0 is (3A + B)/4 with leverages
    # (1.5, 0.5), so the two residual products there are
    #   r_A = 1.5 * ||A - B||^2 / 16   and   r_B = 0.5 * 9 ||A - B||^2 / 16,
    # and the fit at x_1 mirrors them; the largest is 9/32 * ||A - B||^2.
    a = SymMatrix(np.eye(2))
    b = SymMatrix(np.ones((2, 2)))
    data = Dataset(np.array([[0.0], [1.0]]), (a, b))
    assert lambda_max(data) == pytest.approx(9.0 / 32.0 * 2.0, abs=1e-12)


def test_lambda_max_saturates_all_weights(rng):
    data = matrix_dataset(rng, n=10)
    lmax = lambda_max(data)
    w, _ = own_point_weights(data, TuningPair(lmax, 0.7))
    assert np.all(w == 1.0)
    res = fit_robust(data, data.covariates[3], TuningPair(lmax, 0.7))
    assert np.all(res.weights == 1.0)


def test_build_grid_shape_and_monotonicity(rng):
    data = matrix_dataset(rng, n=10)
    lmax = lambda_max(data)
    grid = build_grid(data, GridSpec(lambda_count=20, exponent=0.8))
    lams = sorted({t.lam for t in grid})
    assert len(lams) == 20
    assert lams[-1] == pytest.approx(lmax, rel=1e-15)
    assert np.all(np.diff(lams) > 0.0)
    # gamma candidates are the stated multiples of each lambda
    for lam in lams[1:]:
        gammas = sorted(t.gamma for t in grid if t.lam == lam)
        assert gammas == pytest.approx([0.0, 0.25 * lam, 0.5 * lam, lam, 2 * lam])


def test_build_grid_zero_gamma_only(rng):
    data = matrix_dataset(rng, n=8)
    grid = build_grid(data, GridSpec(gamma_ratios=(0.0,)))
    assert all(t.gamma == 0.0 for t in grid)


def test_build_grid_strips_zero_when_disabled(rng):
    data = matrix_dataset(rng, n=8)
    grid = build_grid(data, GridSpec(gamma_ratios=(0.0, 1.0), include_zero_gamma=False))
    assert all(t.gamma > 0.0 or t.lam == 0.0 for t in grid)


def test_bic_score_at_lambda_max(rng):
    data = matrix_dataset(rng, n=10)
    rec = bic_score(data, TuningPair(lambda_max(data), 0.0))
    assert rec.k_hat == 0
    assert rec.feasible
    _, resid = own_point_weights(data, TuningPair(lambda_max(data), 0.0))
    assert rec.mean_weighted_residual == pytest.approx(resid.mean(), rel=1e-12)
    assert rec.bic == pytest.approx(10 * math.log(resid.mean()), rel=1e-12)


def test_bic_score_degenerate_zero_residual(rng):
    # identical responses: the fit interpolates and the goodness-of-fit
    # term degenerates, guarded as an infeasible record
    y = SymMatrix(np.ones((2, 2)) * 0.3)
    data = Dataset(np.array([[0.0], [1.0]]), (y, y))
    rec = bic_score(data, TuningPair(1.0, 0.5))
    assert not rec.feasible
    assert math.isinf(rec.bic)


def test_bic_score_deterministic(rng):
    data = matrix_dataset(rng, n=9)
    t = TuningPair(0.5 * lambda_max(data), 0.1)
    r1 = bic_score(data, t)
    r2 = bic_score(data, t)
    assert r1 == r2  # bit-identical record


def test_select_tuning_singleton_grid(rng):
    data = matrix_dataset(rng, n=9)
    spec = GridSpec(lambda_count=2, exponent=0.8, gamma_ratios=(0.0,))
    pair, records = select_tuning(data, spec)
    feasible = [r for r in records if r.feasible]
    assert pair in {r.pair for r in feasible}


def test_select_tuning_gamma_ratio_order_irrelevant(rng):
    data = matrix_dataset(rng, n=9)
    a, _ = select_tuning(data, GridSpec(gamma_ratios=(0.0, 0.25, 0.5, 1.0, 2.0)))
    b, _ = select_tuning(data, GridSpec(gamma_ratios=(2.0, 0.5, 0.0, 1.0, 0.25)))
    assert a == b


def test_select_tuning_no_feasible_pair(rng):
    y = random_sym(rng, 2)
    data = Dataset(rng.uniform(size=(5, 1)), (y,) * 5)  # zero residuals everywhere
    with pytest.raises(NoFeasiblePair):
        select_tuning(data)


def test_selected_khat_within_bound():
    rng = np.random.default_rng(4)
    data, _ = gen_dgp1(20, 4, rng)
    cont, _ = contaminate(data, 0.2, 50.0, rng)
    pair, records = select_tuning(cont, GridSpec(lambda_count=10))
    selected = [r for r in records if r.pair == pair]
    assert selected[0].k_hat <= math.floor(0.3 * 20)


def test_khat_monotone_in_thresholds(rng):
    # at fixed residuals the flagged set {r > lam} only shrinks as the
    # thresholds rise, in lambda and (trivially) in gamma
    from robust_frechet import adaptive_weight, fit_standard

    data = matrix_dataset(rng, n=14)
    r = fit_standard(data, [0.4]).weighted_sq_distances
    tol = FitConfig().weight_floor_tolerance

    def khat(t):
        return int(np.sum(adaptive_weight(r, t) < 1.0 - tol))

    lams = np.quantile(r, np.linspace(0.0, 1.0, 9))
    for ratio in (0.0, 0.5, 2.0):
        ks = [khat(TuningPair(float(l), float(ratio * l))) for l in lams]
        assert all(a >= b for a, b in zip(ks, ks[1:]))
    lam = float(np.median(r))
    ks_g = [khat(TuningPair(lam, g)) for g in lam * np.array([0.0, 0.5, 1.0, 4.0])]
    assert all(a >= b for a, b in zip(ks_g, ks_g[1:]))


def test_khat_pipeline_monotone_in_lambda():
    # through the full refitting pipeline on contaminated data
    rng = np.random.default_rng(5)
    data, _ = gen_dgp1(16, 3, rng)
    cont, _ = contaminate(data, 0.2, 30.0, rng)
    cfg = FitConfig()
    lams = np.geomspace(0.3, 2.0, 8) * lambda_max(cont)
    ks = []
    for l in lams:
        try:
            w, _ = own_point_weights(cont, TuningPair(float(l), 0.5 * float(l)), cfg)
        except Exception:
            continue
        ks.append(int(np.sum(w < 1.0 - cfg.weight_floor_tolerance)))
    assert len(ks) >= 4
    assert ks[0] > 0  # the range starts low enough to flag something
    assert all(a >= b for a, b in zip(ks, ks[1:]))


def test_bic_trend_with_contamination_severity():
    # heavier contamination selects a larger lambda
    rng = np.random.default_rng(6)
    data, _ = gen_dgp1(50, 8, rng)
    mild, _ = contaminate(data, 0.1, 50.0, np.random.default_rng(7))
    heavy, _ = contaminate(data, 0.2, 100.0, np.random.default_rng(7))
    pair_mild, _ = select_tuning(mild, GridSpec(lambda_count=12))
    pair_heavy, _ = select_tuning(heavy, GridSpec(lambda_count=12))
    assert pair_heavy.lam > pair_mild.lam
    assert pair_heavy.gamma >= 0.0 and pair_mild.gamma >= 0.0
