"""BIC-based selection of the elastic-net tuning pair.

Candidate lambdas follow the power-grid recipe lambda_max * x_i^0.8 over
an equally spaced x-grid; gammas are fixed multiples of each lambda. Each
pair is scored by fitting at every training covariate (the "diagonal"
convention: observation i's weight and residual come from the fit at its
own covariate) and plugging the weighted mean squared residual and the
outlier count into the BIC formula; pairs flagging more than 30% of the
sample are infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NearSingularDenominator, NoFeasiblePair
from .metric import DENOM_GUARD
from .regression import Dataset, FitConfig, TuningPair, _alternate_lean, leverage


@dataclass(frozen=True)
class GridSpec:
    """Shape of the (lambda, gamma) candidate grid.

    ``gamma_ratios`` multiply each lambda candidate; ``include_zero_gamma``
    forces (or strips) the pure-L1 gamma = 0 column.
    """

    lambda_count: int = 20
    exponent: float = 0.8
    gamma_ratios: tuple = (0.0, 0.25, 0.5, 1.0, 2.0)
    include_zero_gamma: bool = True

    def __post_init__(self):
        if self.lambda_count < 2:
            raise ValueError("lambda_count must be at least 2")
        if not self.exponent > 0.0:
            raise ValueError("exponent must be positive")
        ratios = tuple(float(r) for r in self.gamma_ratios)
        if any(r < 0.0 for r in ratios):
            raise ValueError("gamma_ratios must be nonnegative")
        object.__setattr__(self, "gamma_ratios", ratios)

    def effective_ratios(self) -> tuple:
        ratios = sorted(set(self.gamma_ratios))
        if self.include_zero_gamma and 0.0 not in ratios:
            ratios.insert(0, 0.0)
        if not self.include_zero_gamma:
            ratios = [r for r in ratios if r != 0.0]
        return tuple(ratios)


@dataclass(frozen=True)
class BICRecord:
    """One scored tuning pair.

    ``mean_weighted_residual`` is the argument of the log in the BIC
    formula; degenerate pairs (zeroed-out sample, nonpositive residual
    mass) carry an infinite BIC sentinel and ``feasible=False`` so the
    grid trace stays complete.
    """

    pair: TuningPair
    bic: float
    k_hat: int
    mean_weighted_residual: float
    feasible: bool


def _diag_standard_fits(data: Dataset):
    """Leverage rows and standard fits at every training covariate.

    These do not depend on the tuning pair, so the grid search computes
    them once.
    """
    space = data.space
    gs, us, dsqs = [], [], []
    for i in range(data.n):
        g = leverage(data, data.covariates[i])
        u = space.mean(g)
        gs.append(g)
        us.append(u)
        dsqs.append(space.sq_distances(u))
    return gs, us, dsqs


def lambda_max(data: Dataset, cfg: FitConfig = FitConfig()) -> float:
    """Smallest lam at which no observation is flagged, regardless of gamma.

    Computed as the largest weighted squared residual any observation
    attains in any of the per-covariate standard fits: at or above this
    value every weight update returns all ones, so all the fits stay at
    the standard fit and the outlier count is zero by construction. (The
    diagonal residuals alone would not bound the weights inside the fits
    at the other covariates.)
    """
    gs, _, dsqs = _diag_standard_fits(data)
    return max(0.0, float(max(np.max(gs[i] * dsqs[i]) for i in range(data.n))))


def build_grid(data: Dataset, spec: GridSpec = GridSpec(),
               cfg: FitConfig = FitConfig()) -> list:
    """Cross product of the power-scaled lambda grid and the gamma ratios,
    deduplicated, in ascending (lambda, gamma) order."""
    lmax = lambda_max(data, cfg)
    xs = np.linspace(1e-7, 1.0, spec.lambda_count)
    lams = lmax * xs ** spec.exponent
    ratios = spec.effective_ratios()
    seen = {}
    for lam in lams:
        for ratio in ratios:
            pair = TuningPair(float(lam), float(ratio * lam))
            seen.setdefault((pair.lam, pair.gamma), pair)
    return [seen[key] for key in sorted(seen)]


def _own_point_stats(data: Dataset, t: TuningPair, cfg: FitConfig, pre):
    """Diagonal-convention weights and residuals at a tuning pair.

    For every i, fit robustly at x = X_i and keep observation i's own
    weight plus its squared distance to the fitted object. Fits whose
    mean update degenerates stop at their last valid iterate, so the
    statistics are always defined.
    """
    gs, us, dsqs = pre
    n = data.n
    own_w = np.empty(n)
    resid = np.empty(n)
    for i in range(n):
        _, w_hat, dsq, _, _ = _alternate_lean(data.space, gs[i], t, cfg, us[i], dsqs[i])
        own_w[i] = w_hat[i]
        resid[i] = dsq[i]
    return own_w, resid


def own_point_weights(data: Dataset, t: TuningPair, cfg: FitConfig = FitConfig()):
    """Per-observation diagonal-convention weights and squared residuals."""
    return _own_point_stats(data, t, cfg, _diag_standard_fits(data))


def _residual_floor(data: Dataset) -> float:
    # Exactly interpolating fits leave rounding dust instead of true
    # zeros; residual mass below this scale-aware floor is degenerate.
    scale = max(1.0, float(np.max(np.abs(data.space.values))))
    return (1e-12 * scale) ** 2


def _bic_score(data: Dataset, t: TuningPair, cfg: FitConfig, pre) -> BICRecord:
    n = data.n
    try:
        own_w, resid = _own_point_stats(data, t, cfg, pre)
    except NearSingularDenominator:
        return BICRecord(t, math.inf, n, math.nan, False)
    k_hat = int(np.sum(own_w < 1.0 - cfg.weight_floor_tolerance))
    wsum = float(own_w.sum())
    if wsum <= DENOM_GUARD:
        return BICRecord(t, math.inf, k_hat, math.nan, False)
    mean_wr = float(own_w @ resid) / wsum
    if mean_wr <= _residual_floor(data):
        return BICRecord(t, math.inf, k_hat, mean_wr, False)
    bic = n * math.log(mean_wr) + k_hat * (math.log(n) + 1.0)
    feasible = k_hat <= math.floor(0.3 * n)
    return BICRecord(t, bic, k_hat, mean_wr, feasible)


def bic_score(data: Dataset, t: TuningPair, cfg: FitConfig = FitConfig()) -> BICRecord:
    """Score one tuning pair with the BIC criterion.

    BIC = n log(sum W_i r_i / sum W_i) + k_hat (log n + 1), with k_hat the
    number of weights strictly below one. Degenerate pairs come back as
    infeasible records with an infinite BIC instead of an exception.
    """
    return _bic_score(data, t, cfg, _diag_standard_fits(data))


def select_tuning(data: Dataset, spec: GridSpec = GridSpec(),
                  cfg: FitConfig = FitConfig()):
    """Evaluate the grid and return (best pair, full record trace).

    Infeasible records are kept in the trace but never selected; exact BIC
    ties break toward the larger lambda, then the smaller gamma, which
    keeps the selection invariant to grid ordering and selects gamma = 0
    whenever the pure-L1 pair fits equally well.
    """
    pairs = build_grid(data, spec, cfg)
    if not pairs:
        raise NoFeasiblePair("empty tuning grid")
    pre = _diag_standard_fits(data)
    records = [_bic_score(data, t, cfg, pre) for t in pairs]
    feasible = [rec for rec in records if rec.feasible and math.isfinite(rec.bic)]
    if not feasible:
        raise NoFeasiblePair(
            f"all {len(records)} candidate pairs are infeasible or degenerate"
        )
    best = min(feasible, key=lambda rec: (rec.bic, -rec.pair.lam, rec.pair.gamma))
    return best.pair, records
