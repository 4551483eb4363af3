"""Command-line front end.

Subcommands: ``fit``, ``predict``, ``tune``, ``simulate``, ``loo``,
``diagnose``. Settings come from built-in defaults, overridden by an
optional key=value config file, overridden by command-line flags. Every
command writes machine-readable artifacts (JSON and CSV) into the output
directory and echoes its resolved configuration into them, so a rerun of
the same config and seed reproduces the artifacts byte for byte. Failures
exit nonzero and print a JSON error record with a stable code to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .dataio import load_covariates, load_dataset, write_csv, write_json
from .diagnostics import estimate_regularity
from .errors import ParseError, RobustFrechetError
from .metric import QuantileFunction, SymMatrix
from .regression import Dataset, FitConfig, FitResult, TuningPair, fit_robust
from .simulation import (
    DGP,
    DistributionParams,
    ScenarioSpec,
    leave_one_out,
    run_scenario,
)
from .tuning import GridSpec, select_tuning

DEFAULT_SCENARIOS = "0:0,0.1:50,0.1:100,0.2:50,0.2:100"

_CONFIG_KEYS = {
    "covariates", "responses", "kind", "points", "truth", "output", "seed",
    "lambda", "gamma", "epsilon", "max_iter", "grid_lambda_count",
    "grid_exponent", "gamma_ratios", "covariate_transform", "dgp", "n", "q",
    "p", "n_test", "replications", "scenarios", "exclude", "at", "probes",
    "dist_mu0", "dist_beta", "dist_v1", "dist_sigma0", "dist_gamma_sigma",
    "dist_v2",
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one CLI invocation (echoed into artifacts)."""

    command: str
    covariates: Optional[str] = None
    responses: Optional[str] = None
    kind: str = "matrix"
    points: Optional[str] = None
    truth: Optional[str] = None
    output: str = "."
    seed: int = 0
    lam: Optional[float] = None
    gamma: Optional[float] = None
    epsilon: float = 1e-6
    max_iter: int = 100
    grid_lambda_count: int = 20
    grid_exponent: float = 0.8
    gamma_ratios: tuple = (0.0, 0.25, 0.5, 1.0, 2.0)
    covariate_transform: str = "none"
    dgp: str = "matrix-beta"
    n: int = 50
    q: int = 8
    p: Optional[int] = None
    n_test: Optional[int] = None
    replications: int = 100
    scenarios: str = DEFAULT_SCENARIOS
    exclude: tuple = ()
    at: Optional[tuple] = None
    probes: int = 50
    dist_mu0: float = 0.0
    dist_beta: float = 3.0
    dist_v1: float = 0.25
    dist_sigma0: float = 3.0
    dist_gamma_sigma: float = 0.5
    dist_v2: float = 0.25


def load_config_file(path) -> dict:
    """Parse the key = value config format ('#' starts a comment)."""
    values = {}
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ParseError(f"{path}: line {lineno}: expected key = value")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ParseError(f"{path}: line {lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def _parse_float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a comma-separated float list") from None


def _parse_int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a comma-separated integer list") from None


def _resolve(args: argparse.Namespace) -> RunConfig:
    """Merge flag values over config-file values over defaults."""
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(flag_name, key, convert, default):
        flag = getattr(args, flag_name, None)
        if flag is not None:
            return flag
        if key in file_values:
            return convert(file_values[key])
        return default

    return RunConfig(
        command=args.command,
        covariates=pick("covariates", "covariates", str, None),
        responses=pick("responses", "responses", str, None),
        kind=pick("kind", "kind", str, "matrix"),
        points=pick("points", "points", str, None),
        truth=pick("truth", "truth", str, None),
        output=pick("output", "output", str, "."),
        seed=pick("seed", "seed", int, 0),
        lam=pick("lam", "lambda", float, None),
        gamma=pick("gamma", "gamma", float, None),
        epsilon=pick("epsilon", "epsilon", float, 1e-6),
        max_iter=pick("max_iter", "max_iter", int, 100),
        grid_lambda_count=pick("grid_lambda_count", "grid_lambda_count", int, 20),
        grid_exponent=pick("grid_exponent", "grid_exponent", float, 0.8),
        gamma_ratios=_as_ratio_tuple(pick("gamma_ratios", "gamma_ratios", str, "0,0.25,0.5,1,2")),
        covariate_transform=pick("covariate_transform", "covariate_transform", str, "none"),
        dgp=pick("dgp", "dgp", str, "matrix-beta"),
        n=pick("n", "n", int, 50),
        q=pick("q", "q", int, 8),
        p=pick("p", "p", int, None),
        n_test=pick("n_test", "n_test", int, None),
        replications=pick("replications", "replications", int, 100),
        scenarios=pick("scenarios", "scenarios", str, DEFAULT_SCENARIOS),
        exclude=_as_int_tuple(pick("exclude", "exclude", str, "")),
        at=_as_point_tuple(pick("at", "at", str, None)),
        probes=pick("probes", "probes", int, 50),
        dist_mu0=pick("dist_mu0", "dist_mu0", float, 0.0),
        dist_beta=pick("dist_beta", "dist_beta", float, 3.0),
        dist_v1=pick("dist_v1", "dist_v1", float, 0.25),
        dist_sigma0=pick("dist_sigma0", "dist_sigma0", float, 3.0),
        dist_gamma_sigma=pick("dist_gamma_sigma", "dist_gamma_sigma", float, 0.5),
        dist_v2=pick("dist_v2", "dist_v2", float, 0.25),
    )


def _as_ratio_tuple(value) -> tuple:
    if isinstance(value, tuple):
        return value
    return _parse_float_list(value)


def _as_int_tuple(value) -> tuple:
    if isinstance(value, tuple):
        return value
    if not value:
        return ()
    return _parse_int_list(value)


def _as_point_tuple(value):
    if value is None or isinstance(value, tuple):
        return value
    return _parse_float_list(value)


def _echo(rc: RunConfig) -> dict:
    payload = asdict(rc)
    payload["gamma_ratios"] = list(rc.gamma_ratios)
    payload["exclude"] = list(rc.exclude)
    payload["at"] = list(rc.at) if rc.at is not None else None
    return payload


def _fit_config(rc: RunConfig) -> FitConfig:
    return FitConfig(epsilon=rc.epsilon, max_iterations=rc.max_iter)


def _grid_spec(rc: RunConfig) -> GridSpec:
    return GridSpec(
        lambda_count=rc.grid_lambda_count,
        exponent=rc.grid_exponent,
        gamma_ratios=rc.gamma_ratios,
    )


def _dist_params(rc: RunConfig) -> DistributionParams:
    return DistributionParams(
        mu0=rc.dist_mu0, beta=rc.dist_beta, v1=rc.dist_v1,
        sigma0=rc.dist_sigma0, gamma_sigma=rc.dist_gamma_sigma, v2=rc.dist_v2,
    )


def _transform(rc: RunConfig, covariates: np.ndarray) -> np.ndarray:
    if rc.covariate_transform == "quadratic":
        return np.hstack([covariates, covariates ** 2])
    if rc.covariate_transform != "none":
        raise ValueError(f"unknown covariate transform {rc.covariate_transform!r}")
    return covariates


def _load_data(rc: RunConfig) -> Dataset:
    if not rc.covariates or not rc.responses:
        raise ValueError(f"command {rc.command!r} needs --covariates and --responses")
    data = load_dataset(rc.covariates, rc.responses, rc.kind)
    transformed = _transform(rc, data.covariates)
    if transformed is not data.covariates:
        data = Dataset(transformed, data.responses)
    return data


def _load_points(rc: RunConfig) -> np.ndarray:
    return _transform(rc, load_covariates(rc.points))


def _resolve_pair(rc: RunConfig, data: Dataset, cfg: FitConfig):
    """Tuning pair from flags, or BIC selection when no flags are given."""
    if (rc.lam is None) != (rc.gamma is None):
        raise ValueError("provide both --lambda and --gamma, or neither")
    if rc.lam is not None:
        return TuningPair(rc.lam, rc.gamma), "flags"
    pair, _ = select_tuning(data, _grid_spec(rc), cfg)
    return pair, "bic"


def _estimate_payload(obj) -> dict:
    if isinstance(obj, SymMatrix):
        return {"kind": "matrix", "matrix": obj.values.tolist()}
    return {"kind": "distribution", "grid": obj.grid.tolist(), "values": obj.values.tolist()}


def _fit_record(res: FitResult) -> dict:
    return {
        "point": res.evaluation_point.tolist(),
        "estimate": _estimate_payload(res.estimate),
        "weights": res.weights.tolist(),
        "leverages": res.leverages.tolist(),
        "weighted_sq_distances": res.weighted_sq_distances.tolist(),
        "iterations": res.iterations,
        "converged": res.converged,
        "step_sizes": res.step_sizes.tolist(),
    }


def _outdir(rc: RunConfig) -> Path:
    out = Path(rc.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_fit(rc: RunConfig) -> int:
    data = _load_data(rc)
    cfg = _fit_config(rc)
    points = _load_points(rc) if rc.points else data.covariates
    pair, source = _resolve_pair(rc, data, cfg)
    results = [fit_robust(data, row, pair, cfg) for row in points]
    write_json(_outdir(rc) / "fit.json", {
        "config": _echo(rc),
        "tuning": {"lambda": pair.lam, "gamma": pair.gamma, "source": source},
        "results": [_fit_record(res) for res in results],
    })
    return 0


def _cmd_predict(rc: RunConfig) -> int:
    if not rc.points:
        raise ValueError("predict needs --points")
    data = _load_data(rc)
    cfg = _fit_config(rc)
    points = _load_points(rc)
    pair, source = _resolve_pair(rc, data, cfg)
    results = [fit_robust(data, row, pair, cfg) for row in points]
    out = _outdir(rc)
    write_json(out / "predict.json", {
        "config": _echo(rc),
        "tuning": {"lambda": pair.lam, "gamma": pair.gamma, "source": source},
        "results": [_fit_record(res) for res in results],
    })
    if rc.truth:
        truth = load_dataset(rc.points, rc.truth, rc.kind)
        if truth.n != len(results):
            raise ValueError(
                f"truth file has {truth.n} rows but {len(results)} points were predicted"
            )
        rows = []
        for res, tru in zip(results, truth.responses):
            if isinstance(tru, SymMatrix):
                err = np.abs(res.estimate.values - tru.values).reshape(-1)
            else:
                err = np.abs(res.estimate.values - tru.values)
            rows.append(err)
        write_csv(out / "predict_abs_error.csv", None, rows)
    return 0


def _cmd_tune(rc: RunConfig) -> int:
    data = _load_data(rc)
    cfg = _fit_config(rc)
    pair, records = select_tuning(data, _grid_spec(rc), cfg)
    out = _outdir(rc)
    write_csv(
        out / "tune_trace.csv",
        ["lambda", "gamma", "bic", "k_hat", "mean_weighted_residual", "feasible"],
        (
            [rec.pair.lam, rec.pair.gamma, rec.bic, rec.k_hat,
             rec.mean_weighted_residual, rec.feasible]
            for rec in records
        ),
    )
    write_json(out / "tune_selected.json", {
        "config": _echo(rc),
        "selected": {"lambda": pair.lam, "gamma": pair.gamma},
        "candidates": len(records),
        "feasible": sum(1 for rec in records if rec.feasible),
    })
    return 0


def _parse_scenarios(text: str):
    scenarios = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(":")
        if len(pieces) != 2:
            raise ParseError(f"scenario {part!r} is not proportion:shift")
        try:
            scenarios.append((float(pieces[0]), float(pieces[1])))
        except ValueError:
            raise ParseError(f"scenario {part!r} is not proportion:shift") from None
    if not scenarios:
        raise ParseError("empty scenario list")
    return scenarios


def _cmd_simulate(rc: RunConfig) -> int:
    scenarios = _parse_scenarios(rc.scenarios)
    dgp = DGP(rc.dgp)
    p = rc.p if rc.p is not None else (10 if dgp is DGP.MATRIX_LOGNORMAL else 1)
    grid = _grid_spec(rc)
    cfg = _fit_config(rc)
    children = np.random.SeedSequence(rc.seed).spawn(len(scenarios))
    csv_rows = []
    cells = []
    for (proportion, shift), child in zip(scenarios, children):
        spec = ScenarioSpec(
            dgp=dgp, n=rc.n, q=rc.q, p=p,
            contamination_proportion=proportion, shift=shift,
            n_test=rc.n_test, replications=rc.replications,
            seed=int(child.generate_state(1, np.uint64)[0]),
            dgp_params=_dist_params(rc),
        )
        reports, summary = run_scenario(spec, grid, cfg)
        for rep in reports:
            csv_rows.append([
                proportion, shift, rep.index,
                rep.mse_standard, rep.mse_robust,
                rep.pair.lam if rep.pair else math.nan,
                rep.pair.gamma if rep.pair else math.nan,
                rep.k_hat, rep.n_contaminated, rep.n_contaminated_zeroed,
                rep.failed,
            ])
        cells.append({
            "proportion": proportion,
            "shift": shift,
            "error": {
                "standard": {"mean": summary.mse_standard_mean, "se": summary.mse_standard_se},
                "robust": {"mean": summary.mse_robust_mean, "se": summary.mse_robust_se},
            },
            "tuning": {
                "lambda": {"mean": summary.lambda_mean, "se": summary.lambda_se},
                "gamma": {"mean": summary.gamma_mean, "se": summary.gamma_se},
            },
            "k_hat_mean": summary.k_hat_mean,
            "detection_rate": summary.detection_rate,
            "replications": summary.n_replications,
            "failed": summary.n_failed,
        })
    out = _outdir(rc)
    write_csv(
        out / "simulate_replicates.csv",
        ["proportion", "shift", "replicate", "mse_standard", "mse_robust",
         "lambda", "gamma", "k_hat", "n_contaminated", "n_contaminated_zeroed",
         "failed"],
        csv_rows,
    )
    write_json(out / "simulate_aggregate.json", {
        "config": _echo(rc),
        "scenarios": cells,
    })
    return 0


def _cmd_loo(rc: RunConfig) -> int:
    data = _load_data(rc)
    report = leave_one_out(data, _grid_spec(rc), _fit_config(rc),
                           exclude=rc.exclude or None)
    out = _outdir(rc)
    write_csv(
        out / "loo_points.csv",
        ["index", "error_standard", "error_robust"],
        (
            [idx, report.error_standard[pos], report.error_robust[pos]]
            for pos, idx in enumerate(report.indices)
        ),
    )
    write_json(out / "loo_aggregate.json", {
        "config": _echo(rc),
        "standard": {"mean": report.mean_standard, "se": report.se_standard},
        "robust": {"mean": report.mean_robust, "se": report.se_robust},
        "held_out": len(report.indices),
    })
    return 0


def _cmd_diagnose(rc: RunConfig) -> int:
    data = _load_data(rc)
    cfg = _fit_config(rc)
    pair, source = _resolve_pair(rc, data, cfg)
    point = np.asarray(rc.at, dtype=float) if rc.at is not None else data.mean
    report = estimate_regularity(
        data, point, pair, cfg, probes=rc.probes,
        rng=np.random.default_rng(rc.seed),
    )
    write_json(_outdir(rc) / "diagnose.json", {
        "config": _echo(rc),
        "tuning": {"lambda": pair.lam, "gamma": pair.gamma, "source": source},
        "point": point.tolist(),
        "report": {
            "d_u_hat": report.d_u_hat,
            "d_g_hat": report.d_g_hat,
            "xi_hat": report.xi_hat,
            "l_d_hat": report.l_d_hat,
            "c_u_hat": report.c_u_hat,
            "rho_hat": report.rho_hat,
            "rho_empirical": report.rho_empirical,
        },
    })
    return 0


_HANDLERS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "tune": _cmd_tune,
    "simulate": _cmd_simulate,
    "loo": _cmd_loo,
    "diagnose": _cmd_diagnose,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file; flags win over file values")
    parser.add_argument("--output", help="output directory (default: current directory)")
    parser.add_argument("--seed", type=int, help="seed for all randomized steps")


def _add_data(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--covariates", help="covariate CSV, one row per observation")
    parser.add_argument("--responses", help="response CSV (matrix rows or grid+rows)")
    parser.add_argument("--kind", choices=["matrix", "distribution"])
    parser.add_argument("--covariate-transform", dest="covariate_transform",
                        choices=["none", "quadratic"],
                        help="append squared covariate columns before fitting")


def _add_fitting(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float, help="convergence tolerance")
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap")


def _add_pair(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="full-weight threshold; omit both to tune by BIC")
    parser.add_argument("--gamma", type=float, help="elastic-net curvature")


def _add_grid(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-lambda-count", dest="grid_lambda_count", type=int)
    parser.add_argument("--grid-exponent", dest="grid_exponent", type=float)
    parser.add_argument("--gamma-ratios", dest="gamma_ratios",
                        help="comma-separated gamma/lambda ratios")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-frechet",
        description="Robust global Fréchet regression for matrix and distribution responses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="robust fits at the training covariates or given points")
    for add in (_add_common, _add_data, _add_fitting, _add_pair, _add_grid):
        add(fit)
    fit.add_argument("--points", help="optional CSV of evaluation points")

    pred = sub.add_parser("predict", help="robust fits at new points")
    for add in (_add_common, _add_data, _add_fitting, _add_pair, _add_grid):
        add(pred)
    pred.add_argument("--points", help="CSV of evaluation points", required=False)
    pred.add_argument("--truth", help="optional truth responses; writes absolute-error CSV")

    tune = sub.add_parser("tune", help="BIC selection over the tuning grid")
    for add in (_add_common, _add_data, _add_fitting, _add_grid):
        add(tune)

    sim = sub.add_parser("simulate", help="seeded Monte Carlo study")
    for add in (_add_common, _add_fitting, _add_grid):
        add(sim)
    sim.add_argument("--dgp", choices=[d.value for d in DGP])
    sim.add_argument("--n", type=int)
    sim.add_argument("--q", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--n-test", dest="n_test", type=int)
    sim.add_argument("--replications", type=int)
    sim.add_argument("--scenarios", help="comma-separated proportion:shift pairs")

    loo = sub.add_parser("loo", help="leave-one-out evaluation")
    for add in (_add_common, _add_data, _add_fitting, _add_grid):
        add(loo)
    loo.add_argument("--exclude", help="comma-separated indices never held out")

    diag = sub.add_parser("diagnose", help="regularity and contraction diagnostics")
    for add in (_add_common, _add_data, _add_fitting, _add_pair, _add_grid):
        add(diag)
    diag.add_argument("--at", help="evaluation point, comma-separated (default: covariate mean)")
    diag.add_argument("--probes", type=int, help="number of random probes")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = _resolve(args)
        return _HANDLERS[args.command](rc)
    except RobustFrechetError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return exc.exit_status
    except ValueError as exc:
        sys.stderr.write(json.dumps({"error": "invalid_value", "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
