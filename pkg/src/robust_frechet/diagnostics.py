"""Empirical checks of the regularity apparatus behind the alternating fit.

The linear-convergence argument for the alternating estimator rests on
boundedness and Lipschitz constants of the metric, the leverage, and the
mean-update map, combined into the contraction factor

    rho = (2 gamma)^{-1} sqrt(n) C_u L_d D_g.

Exact suprema are intractable, so ``estimate_regularity`` probes them with
random weighted combinations of the observed responses and random weight
vectors; every reported constant is an empirical lower bound of the true
supremum. ``contraction_trace`` extracts the observed per-step contraction
ratios from an actual fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientIterations, NearSingularDenominator
from .metric import distance
from .regression import Dataset, FitConfig, FitResult, TuningPair, _weights, fit_robust, leverage


@dataclass(frozen=True)
class RegularityReport:
    """Empirical lower bounds for the regularity constants.

    ``rho_hat`` composes the probed constants into the theoretical
    contraction factor (infinite when gamma is zero); ``rho_empirical`` is
    the largest observed per-step ratio along one actual fit trace.
    """

    d_u_hat: float
    d_g_hat: float
    xi_hat: float
    l_d_hat: float
    c_u_hat: float
    rho_hat: float
    rho_empirical: float


def contraction_trace(fit: FitResult):
    """Per-step ratios d(u^(s+1), u*)/d(u^(s), u*), u* the final iterate.

    Returns (ratios, geometric) where ``geometric`` flags that every ratio
    is below one (the trace is bounded by a geometric envelope; trivially
    true for an empty trace). Steps that have already landed exactly on
    u* are skipped. Raises :class:`InsufficientIterations` for fits
    without at least one alternation (e.g. a standard fit).
    """
    if len(fit.iterates) < 2:
        raise InsufficientIterations(
            "contraction trace needs at least two iterates (one alternation)"
        )
    u_star = fit.iterates[-1]
    dists = [distance(u, u_star) for u in fit.iterates]
    ratios = [
        dists[s + 1] / dists[s]
        for s in range(len(dists) - 2)
        if dists[s] > 0.0
    ]
    ratios = np.asarray(ratios)
    geometric = bool(np.all(ratios < 1.0)) if ratios.size else True
    return ratios, geometric


def estimate_regularity(data: Dataset, x, t: TuningPair, cfg: FitConfig = FitConfig(),
                        probes: int = 50, rng=None) -> RegularityReport:
    """Probe the regularity constants on concrete data.

    Random fitted-object candidates are weighted combinations of the
    observed responses; random weight vectors are uniform on [0, 1]^n.
    With ``probes`` candidates the pairwise ratios estimate the Lipschitz
    constants from below. One robust fit at (x, t) supplies the empirical
    contraction ratio.
    """
    if probes < 10:
        raise ValueError("need at least 10 probes")
    rng = np.random.default_rng(rng)
    space = data.space
    n = data.n
    pt = np.asarray(x, dtype=float).reshape(-1)
    g = leverage(data, pt)

    # Candidate fitted objects: normalized positive combinations.
    coeffs = rng.random((probes, n))
    coeffs /= coeffs.sum(axis=1, keepdims=True)
    u_rows = np.stack([space.mean(c) for c in coeffs])
    sq = np.stack([space.sq_distances(u) for u in u_rows])  # (probes, n)

    d_u_hat = float(np.sqrt(sq.max()))
    l_d_hat = 0.0
    for k in range(probes):
        for l in range(k + 1, probes):
            du = space.dist(u_rows[k], u_rows[l])
            d_u_hat = max(d_u_hat, du)
            if du > 1e-12:
                l_d_hat = max(l_d_hat, float(np.max(np.abs(sq[k] - sq[l]))) / du)

    # Leverage bound over the given point plus random points in the
    # convex hull of the training covariates.
    mix = rng.random((probes, n))
    mix /= mix.sum(axis=1, keepdims=True)
    probe_points = np.vstack([pt, mix @ data.covariates])
    d_g_hat = max(float(np.max(np.abs(leverage(data, pp)))) for pp in probe_points)

    xi_hat = min(float(np.mean(_weights(g * sq[k], t))) for k in range(probes))

    # Lipschitz constant of the mean-update map over random weight vectors.
    w_probes = rng.random((probes, n))
    phi_rows = []
    for w in w_probes:
        try:
            phi_rows.append(space.mean(w * g))
        except NearSingularDenominator:
            phi_rows.append(None)
    c_u_hat = 0.0
    for k in range(probes):
        if phi_rows[k] is None:
            continue
        for l in range(k + 1, probes):
            if phi_rows[l] is None:
                continue
            dw = float(np.linalg.norm(w_probes[k] - w_probes[l]))
            if dw > 1e-12:
                c_u_hat = max(c_u_hat, space.dist(phi_rows[k], phi_rows[l]) / dw)

    if t.gamma > 0.0:
        rho_hat = math.sqrt(n) * c_u_hat * l_d_hat * d_g_hat / (2.0 * t.gamma)
    else:
        rho_hat = math.inf

    fit = fit_robust(data, pt, t, cfg)
    ratios, _ = contraction_trace(fit)
    rho_empirical = float(ratios.max()) if ratios.size else 0.0

    return RegularityReport(
        d_u_hat=d_u_hat,
        d_g_hat=d_g_hat,
        xi_hat=xi_hat,
        l_d_hat=l_d_hat,
        c_u_hat=c_u_hat,
        rho_hat=rho_hat,
        rho_empirical=rho_empirical,
    )
