"""Synthetic data generators, contamination, and the evaluation harness.

Three data-generating processes are supported:

* matrix-beta: univariate uniform covariate, symmetric matrices with unit
  diagonal and Beta(x, 1-x) off-diagonals, so the conditional Fréchet mean
  under the Frobenius metric has off-diagonal x and unit diagonal.
* matrix-lognormal: multivariate uniform covariates, entrywise lognormal
  responses driven by a cosine signal in a sparse covariate direction.
* distribution-normal: Gaussian quantile functions on the 81-point level
  grid over [0.1, 0.9], with latent mean and scale drawn per observation.

Contamination adds a fixed shift to every element of a random subset of
responses. ``run_scenario`` runs seeded Monte Carlo replications of the
generate / contaminate / tune / fit / score pipeline; ``leave_one_out``
implements the holdout evaluation protocol. Every stochastic operation
consumes an explicit generator, and replicate generators are spawned from
the scenario seed with ``numpy.random.SeedSequence``, so results are fully
reproducible.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import (
    DimensionMismatch,
    GridMismatch,
    NearSingularDenominator,
    NoFeasiblePair,
)
from .metric import QuantileFunction, SymMatrix, distance, trapezoid_weights
from .regression import Dataset, FitConfig, TuningPair, fit_robust, fit_standard
from .tuning import GridSpec, own_point_weights, select_tuning


class DGP(str, enum.Enum):
    MATRIX_BETA = "matrix-beta"
    MATRIX_LOGNORMAL = "matrix-lognormal"
    DISTRIBUTION_NORMAL = "distribution-normal"


@dataclass(frozen=True)
class DistributionParams:
    """Latent-parameter design of the distribution DGP.

    The scale parameter is Gamma with shape (sigma0 + gamma_sigma*x)^2/v2
    and scale v2/(sigma0 + gamma_sigma*x), so its conditional mean is
    sigma0 + gamma_sigma*x and its conditional variance v2.
    """

    mu0: float = 0.0
    beta: float = 3.0
    v1: float = 0.25
    sigma0: float = 3.0
    gamma_sigma: float = 0.5
    v2: float = 0.25

    def __post_init__(self):
        if not (self.v1 > 0.0 and self.v2 > 0.0):
            raise ValueError("v1 and v2 must be positive")
        if self.sigma0 <= 0.0 or self.sigma0 + self.gamma_sigma <= 0.0:
            raise ValueError("sigma0 + gamma_sigma*x must stay positive on [0, 1]")


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation scenario: DGP, sizes, contamination, and seed."""

    dgp: DGP
    n: int = 50
    q: int = 8
    p: int = 1
    contamination_proportion: float = 0.0
    shift: float = 0.0
    n_test: Optional[int] = None
    replications: int = 100
    seed: int = 0
    dgp_params: DistributionParams = field(default_factory=DistributionParams)

    def __post_init__(self):
        object.__setattr__(self, "dgp", DGP(self.dgp))
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not (0.0 <= self.contamination_proportion < 1.0):
            raise ValueError("contamination_proportion must be in [0, 1)")
        if self.shift < 0.0:
            raise ValueError("shift must be nonnegative")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")

    @property
    def resolved_n_test(self) -> int:
        return self.n if self.n_test is None else self.n_test


@dataclass(frozen=True, eq=False)
class TruthBundle:
    """True targets matching a generated sample.

    For the matrix DGPs the targets are the conditional Fréchet means at
    the generated covariates; for the distribution DGP they are the
    realized quantile functions, with the latent (mu_i, sigma_i) retained.
    """

    covariates: np.ndarray
    targets: tuple
    latent_means: Optional[np.ndarray] = None
    latent_sds: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ReplicateReport:
    """Per-replicate outcome; errors are MSE for matrix scenarios and MISE
    for distribution scenarios."""

    index: int
    mse_standard: float
    mse_robust: float
    pair: Optional[TuningPair]
    k_hat: int
    n_contaminated: int
    n_contaminated_zeroed: int
    runtime: float
    failed: bool = False


@dataclass(frozen=True)
class ScenarioSummary:
    """Aggregate over the non-failed replicates (mean and Monte Carlo
    standard error, i.e. sd/sqrt(reps))."""

    mse_standard_mean: float
    mse_standard_se: float
    mse_robust_mean: float
    mse_robust_se: float
    lambda_mean: float
    lambda_se: float
    gamma_mean: float
    gamma_se: float
    k_hat_mean: float
    detection_rate: float
    n_replications: int
    n_failed: int


def quantile_grid() -> np.ndarray:
    """The 81 equally spaced levels 0.1, 0.11, ..., 0.9."""
    return np.linspace(0.1, 0.9, 81)


def dgp1_truth(x: float, q: int) -> SymMatrix:
    """Conditional Fréchet mean of the matrix-beta DGP: unit diagonal,
    off-diagonal entries equal to x."""
    m = np.full((q, q), float(x))
    np.fill_diagonal(m, 1.0)
    return SymMatrix(m)


def gen_dgp1(n: int, q: int, rng: np.random.Generator):
    """Matrix-beta sample: X ~ U(0,1), off-diagonals Beta(X, 1-X) mirrored."""
    if q < 2:
        raise ValueError("q must be at least 2")
    x = rng.uniform(size=n)
    # Beta parameters must be strictly positive; an exact 0 or 1 draw has
    # probability zero but would break the sampler.
    while True:
        bad = (x <= 0.0) | (x >= 1.0)
        if not bad.any():
            break
        x[bad] = rng.uniform(size=int(bad.sum()))
    iu = np.triu_indices(q, k=1)
    m_off = iu[0].size
    draws = rng.beta(np.repeat(x, m_off), np.repeat(1.0 - x, m_off)).reshape(n, m_off)
    responses = []
    targets = []
    for i in range(n):
        mat = np.zeros((q, q))
        mat[iu] = draws[i]
        mat = mat + mat.T
        np.fill_diagonal(mat, 1.0)
        responses.append(SymMatrix(mat))
        targets.append(dgp1_truth(x[i], q))
    covariates = x.reshape(-1, 1)
    return Dataset(covariates, tuple(responses)), TruthBundle(covariates, tuple(targets))


def default_dgp2_coefficients(p: int) -> np.ndarray:
    """Sparse signal direction (0.1, ..., 0.5, 0, ..., 0) of length p."""
    if p < 5:
        raise ValueError("p must be at least 5 for the default coefficients")
    b = np.zeros(p)
    b[:5] = (0.1, 0.2, 0.3, 0.4, 0.5)
    return b


def dgp2_truth(x, beta, q: int) -> SymMatrix:
    """Entrywise conditional expectation of the matrix-lognormal DGP.

    Diagonal entries are exp(1.02); off-diagonal entries are
    exp(0.01) * (exp(c) - 1)/c with c = cos(4*pi*beta^T x), continuously
    extended to 1 at c = 0.
    """
    c = float(np.cos(4.0 * np.pi * (np.asarray(beta, dtype=float) @ np.asarray(x, dtype=float))))
    mgf_u = math.expm1(c) / c if abs(c) > 1e-12 else 1.0 + c / 2.0
    m = np.full((q, q), math.exp(0.01) * mgf_u)
    np.fill_diagonal(m, math.exp(1.02))
    return SymMatrix(m)


def gen_dgp2(n: int, q: int, p: int, beta, rng: np.random.Generator):
    """Matrix-lognormal sample: Y_jk = exp(0.2 Z_jk + D_jk(X)) with a
    symmetric Gaussian Z and D carrying a cosine signal off the diagonal."""
    if q < 2:
        raise ValueError("q must be at least 2")
    b = default_dgp2_coefficients(p) if beta is None else np.asarray(beta, dtype=float).reshape(-1)
    if b.shape[0] != p:
        raise DimensionMismatch(f"beta has length {b.shape[0]}, expected {p}")
    x = rng.uniform(size=(n, p))
    iu = np.triu_indices(q, k=1)
    m_off = iu[0].size
    responses = []
    targets = []
    for i in range(n):
        c = float(np.cos(4.0 * np.pi * (b @ x[i])))
        z_diag = rng.normal(size=q)
        z_off = rng.normal(scale=math.sqrt(0.5), size=m_off)
        u_off = rng.uniform(size=m_off)
        mat = np.zeros((q, q))
        mat[iu] = np.exp(0.2 * z_off + u_off * c)
        mat = mat + mat.T
        np.fill_diagonal(mat, np.exp(0.2 * z_diag + 1.0))
        responses.append(SymMatrix(mat))
        targets.append(dgp2_truth(x[i], b, q))
    return Dataset(x, tuple(responses)), TruthBundle(x, tuple(targets))


def gen_dist_dgp(n: int, params: DistributionParams, rng: np.random.Generator):
    """Distribution sample: Gaussian quantile functions with latent
    mu_i ~ N(mu0 + beta*X_i, v1) and Gamma-distributed sigma_i.

    The realized quantile vectors are the truth; the latent parameters are
    retained in the bundle.
    """
    x = rng.uniform(size=n)
    mu = rng.normal(params.mu0 + params.beta * x, math.sqrt(params.v1))
    mean_sigma = params.sigma0 + params.gamma_sigma * x
    sigma = rng.gamma(shape=mean_sigma ** 2 / params.v2, scale=params.v2 / mean_sigma)
    grid = quantile_grid()
    zq = ndtri(grid)
    responses = []
    targets = []
    for i in range(n):
        values = mu[i] + sigma[i] * zq
        responses.append(QuantileFunction(grid, values))
        targets.append(QuantileFunction(grid, values))
    covariates = x.reshape(-1, 1)
    return (
        Dataset(covariates, tuple(responses)),
        TruthBundle(covariates, tuple(targets), latent_means=mu, latent_sds=sigma),
    )


def contaminate(data: Dataset, proportion: float, shift: float, rng: np.random.Generator):
    """Shift every element of a random subset of responses.

    round(proportion * n) indices (half-up) are drawn uniformly without
    replacement; covariates are untouched. Returns the new dataset and the
    sorted contaminated index set.
    """
    if not (0.0 <= proportion < 1.0):
        raise ValueError("proportion must be in [0, 1)")
    if shift < 0.0:
        raise ValueError("shift must be nonnegative")
    count = int(math.floor(proportion * data.n + 0.5))
    if count == 0:
        return data, np.empty(0, dtype=int)
    idx = np.sort(rng.choice(data.n, size=count, replace=False))
    responses = list(data.responses)
    for i in idx:
        obj = responses[i]
        if isinstance(obj, SymMatrix):
            responses[i] = SymMatrix(obj.values + shift)
        else:
            responses[i] = QuantileFunction(obj.grid, obj.values + shift)
    return Dataset(data.covariates, tuple(responses)), idx


def mse_matrix(estimates: Sequence[SymMatrix], truths: Sequence[SymMatrix]) -> float:
    """Mean squared Frobenius error (1/n) sum_i tr[(M_i - M_i*)^T (M_i - M_i*)]."""
    if len(estimates) != len(truths):
        raise DimensionMismatch(f"{len(estimates)} estimates vs {len(truths)} truths")
    total = 0.0
    for est, tru in zip(estimates, truths):
        if est.dim != tru.dim:
            raise DimensionMismatch(f"matrix dims differ: {est.dim} vs {tru.dim}")
        diff = est.values - tru.values
        total += float(np.sum(diff * diff))
    return total / len(estimates)


def mise_distribution(estimates: Sequence[QuantileFunction],
                      truths: Sequence[QuantileFunction]) -> float:
    """Mean integrated squared error between quantile functions, integrated
    with the trapezoid rule on the shared grid."""
    if len(estimates) != len(truths):
        raise DimensionMismatch(f"{len(estimates)} estimates vs {len(truths)} truths")
    total = 0.0
    for est, tru in zip(estimates, truths):
        if est.grid.shape != tru.grid.shape or np.max(np.abs(est.grid - tru.grid)) > 1e-12:
            raise GridMismatch("estimate and truth grids differ")
        tw = trapezoid_weights(est.grid)
        diff = est.values - tru.values
        total += float(tw @ (diff * diff))
    return total / len(estimates)


def _generate(spec: ScenarioSpec, rng: np.random.Generator):
    if spec.dgp is DGP.MATRIX_BETA:
        return gen_dgp1(spec.n, spec.q, rng)
    if spec.dgp is DGP.MATRIX_LOGNORMAL:
        return gen_dgp2(spec.n, spec.q, spec.p, None, rng)
    return gen_dist_dgp(spec.n, spec.dgp_params, rng)


def _test_points(spec: ScenarioSpec, rng: np.random.Generator):
    """Fresh test covariates plus their true targets."""
    nt = spec.resolved_n_test
    if spec.dgp is DGP.MATRIX_BETA:
        xt = rng.uniform(size=nt).reshape(-1, 1)
        truths = tuple(dgp1_truth(float(v), spec.q) for v in xt[:, 0])
        return xt, truths
    if spec.dgp is DGP.MATRIX_LOGNORMAL:
        xt = rng.uniform(size=(nt, spec.p))
        b = default_dgp2_coefficients(spec.p)
        truths = tuple(dgp2_truth(row, b, spec.q) for row in xt)
        return xt, truths
    test_data, test_truth = gen_dist_dgp(nt, spec.dgp_params, rng)
    return test_data.covariates, test_truth.targets


def _score(spec: ScenarioSpec, estimates, truths) -> float:
    if spec.dgp is DGP.DISTRIBUTION_NORMAL:
        return mise_distribution(estimates, truths)
    return mse_matrix(estimates, truths)


def _one_replicate(spec: ScenarioSpec, index: int, rng: np.random.Generator,
                   grid: GridSpec, cfg: FitConfig) -> ReplicateReport:
    start = time.perf_counter()
    data, _ = _generate(spec, rng)
    contaminated, idx = contaminate(data, spec.contamination_proportion, spec.shift, rng)
    xt, truths = _test_points(spec, rng)
    def failed_report():
        return ReplicateReport(
            index=index, mse_standard=math.nan, mse_robust=math.nan, pair=None,
            k_hat=0, n_contaminated=idx.size, n_contaminated_zeroed=0,
            runtime=time.perf_counter() - start, failed=True,
        )

    try:
        pair, records = select_tuning(contaminated, grid, cfg)
    except NoFeasiblePair:
        return failed_report()
    selected = min(
        (rec for rec in records if rec.pair == pair),
        key=lambda rec: rec.bic,
    )
    own_w, _ = own_point_weights(contaminated, pair, cfg)
    zeroed = int(np.sum(own_w[idx] <= cfg.weight_floor_tolerance)) if idx.size else 0
    std_est = [fit_standard(contaminated, x).estimate for x in xt]
    try:
        rob_est = [fit_robust(contaminated, x, pair, cfg).estimate for x in xt]
    except NearSingularDenominator:
        # the selected pair can still degenerate at an extrapolating test
        # point on small samples; record the replicate as failed
        return failed_report()
    return ReplicateReport(
        index=index,
        mse_standard=_score(spec, std_est, truths),
        mse_robust=_score(spec, rob_est, truths),
        pair=pair,
        k_hat=selected.k_hat,
        n_contaminated=int(idx.size),
        n_contaminated_zeroed=zeroed,
        runtime=time.perf_counter() - start,
    )


def _mean_se(values: np.ndarray):
    if values.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(values))
    if values.size == 1:
        return mean, math.nan
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


def run_scenario(spec: ScenarioSpec, grid: GridSpec = GridSpec(),
                 cfg: FitConfig = FitConfig()):
    """Run the full Monte Carlo pipeline for one scenario.

    Per replicate: generate, contaminate, select the tuning pair by BIC,
    fit standard and robust at fresh test covariates, and score against
    the truth. Replicate k uses the k-th child of
    ``SeedSequence(spec.seed)``, so reports are reproducible and
    independent of execution order. Replicates without a feasible tuning
    pair are recorded as failed and excluded from the aggregates.

    Returns (list of :class:`ReplicateReport`, :class:`ScenarioSummary`).
    """
    children = np.random.SeedSequence(spec.seed).spawn(spec.replications)
    reports = [
        _one_replicate(spec, k, np.random.default_rng(children[k]), grid, cfg)
        for k in range(spec.replications)
    ]
    good = [rep for rep in reports if not rep.failed]
    mse_std = np.array([rep.mse_standard for rep in good])
    mse_rob = np.array([rep.mse_robust for rep in good])
    lams = np.array([rep.pair.lam for rep in good])
    gams = np.array([rep.pair.gamma for rep in good])
    k_hats = np.array([rep.k_hat for rep in good], dtype=float)
    total_contaminated = sum(rep.n_contaminated for rep in good)
    total_zeroed = sum(rep.n_contaminated_zeroed for rep in good)
    std_mean, std_se = _mean_se(mse_std)
    rob_mean, rob_se = _mean_se(mse_rob)
    lam_mean, lam_se = _mean_se(lams)
    gam_mean, gam_se = _mean_se(gams)
    summary = ScenarioSummary(
        mse_standard_mean=std_mean,
        mse_standard_se=std_se,
        mse_robust_mean=rob_mean,
        mse_robust_se=rob_se,
        lambda_mean=lam_mean,
        lambda_se=lam_se,
        gamma_mean=gam_mean,
        gamma_se=gam_se,
        k_hat_mean=float(np.mean(k_hats)) if k_hats.size else math.nan,
        detection_rate=(total_zeroed / total_contaminated) if total_contaminated else math.nan,
        n_replications=spec.replications,
        n_failed=len(reports) - len(good),
    )
    return reports, summary


@dataclass(frozen=True, eq=False)
class LOOReport:
    """Leave-one-out errors, per held-out index and aggregated."""

    indices: tuple
    error_standard: np.ndarray
    error_robust: np.ndarray
    mean_standard: float
    se_standard: float
    mean_robust: float
    se_robust: float
    pairs: tuple


def _drop_index(data: Dataset, i: int) -> Dataset:
    keep = [j for j in range(data.n) if j != i]
    return Dataset(data.covariates[keep], tuple(data.responses[j] for j in keep))


def leave_one_out(data: Dataset, grid: GridSpec = GridSpec(),
                  cfg: FitConfig = FitConfig(), exclude=None) -> LOOReport:
    """Leave-one-out evaluation of the standard and robust fits.

    Indices listed in ``exclude`` (e.g. a known contamination set) are
    never held out but always stay in the training remainder, matching the
    protocol of holding out only clean observations; ``exclude=None``
    admits every index. Each holdout re-tunes by BIC on the remainder;
    when no feasible pair exists (e.g. an exactly interpolating
    remainder), the robust fit falls back to the standard fit and the pair
    is recorded as None.
    """
    if data.n < 3:
        raise ValueError("leave-one-out needs at least three observations")
    excluded = set() if exclude is None else {int(i) for i in np.asarray(exclude, dtype=int).reshape(-1)}
    held = [i for i in range(data.n) if i not in excluded]
    if not held:
        raise ValueError("exclude set leaves no admissible holdout index")
    err_std = np.empty(len(held))
    err_rob = np.empty(len(held))
    pairs = []
    for pos, i in enumerate(held):
        sub = _drop_index(data, i)
        x_i = data.covariates[i]
        std = fit_standard(sub, x_i)
        try:
            pair, _ = select_tuning(sub, grid, cfg)
            rob = fit_robust(sub, x_i, pair, cfg)
        except (NoFeasiblePair, NearSingularDenominator):
            pair = None
            rob = std
        err_std[pos] = distance(data.responses[i], std.estimate) ** 2
        err_rob[pos] = distance(data.responses[i], rob.estimate) ** 2
        pairs.append(pair)
    std_mean, std_se = _mean_se(err_std)
    rob_mean, rob_se = _mean_se(err_rob)
    return LOOReport(
        indices=tuple(held),
        error_standard=err_std,
        error_robust=err_rob,
        mean_standard=std_mean,
        se_standard=std_se,
        mean_robust=rob_mean,
        se_robust=rob_se,
        pairs=tuple(pairs),
    )
