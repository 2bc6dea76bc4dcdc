"""
RapPCA command-line entry point.

- simulate: synthetic scenario replicates with ground truth
- fit / predict: model bundles and score prediction at new locations
- evaluate / tune / rank-curves / gamma-sweep / lambda-sweep: cross-validated studies
- verify-optimality: polar perturbation curves around the closed-form solution
"""
import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from config import ConfigManager, reload_config
from models.basis.kernels import KernelSpec
from models.engines.context import FitContext
from models.engines.model import Hyperparams, load_bundle, save_bundle
from models.engines.rappca import polar_perturbation_check, rappca_solve_component
from models.pipeline import evaluate_folds, fit_method, predict_new
from models.tuning.cv import gamma_sweep, lambda_sweep, tune_components
from models.tuning.rank import rank_curves
from utils.artifacts import artifact_dir, atomic_file, write_csv, write_manifest, write_yaml
from utils.dataset import dataset_frame, ingest_locations
from utils.errors import ConfigError, RapPCAError, exit_code_for
from utils.logger import logger, progress, setup_logger, timed_stage
from utils.seeding import derive_seed
from utils.simulation import gen_replicates


def parse_arguments(argv: Optional[List[str]] = None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(description="RapPCA: representability-and-predictability PCA for spatial data")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        default=None,
        help="Path to configuration file (default: config/base_config.yaml)"
    )
    common.add_argument(
        "--override",
        type=str,
        help="JSON string with configuration overrides"
    )
    common.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output directory (default: <output.dir>/<command>)"
    )

    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="Generate simulated replicates")
    sim.add_argument("--scenario", type=int, choices=(1, 2, 3), default=None)
    sim.add_argument("--replicates", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)

    sub.add_parser("fit", parents=[common], help="Fit a model bundle")

    pred = sub.add_parser("predict", parents=[common], help="Predict scores at new locations")
    pred.add_argument("--model", type=str, required=True, help="Model bundle directory")
    pred.add_argument("--locations", type=str, required=True, help="CSV with id, coordinate and covariate columns")
    pred.add_argument("--id-col", type=str, default="id")

    sub.add_parser("evaluate", parents=[common], help="K-fold evaluation of one or more methods")
    sub.add_parser("tune", parents=[common], help="Sequential cross-validated hyperparameter search")

    rank = sub.add_parser("rank-curves", parents=[common], help="Elbow curves for choosing r")
    rank.add_argument("--rmax", type=int, required=True)

    verify = sub.add_parser("verify-optimality", parents=[common], help="Polar perturbation check of the solver")
    verify.add_argument("--theta-grid", type=int, default=None)

    sub.add_parser("gamma-sweep", parents=[common], help="First-component metrics across gamma")
    sub.add_parser("lambda-sweep", parents=[common], help="First-component error surface over lambda1 and lambda2/lambda1")
    return parser.parse_args(argv)


def setup_environment(args) -> ConfigManager:
    """Load configuration, apply overrides and configure logging."""
    config = reload_config(args.config)
    if args.override:
        try:
            overrides = json.loads(args.override)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in override parameter: {e}")
        config.override_config(overrides)
        logger.info("Applied configuration overrides")
    if config.output.log_file:
        setup_logger(level=logger.level, log_file=config.output.log_file)
    logger.info(f"RapPCA {args.command}: method={config.method.name}, r={config.method.r}, seed={config.seed}")
    return config


def _out_dir(args, config: ConfigManager) -> str:
    return args.out or str(Path(config.output.dir) / args.command)


def simulate(args, config: ConfigManager) -> None:
    overrides = {}
    if args.scenario is not None:
        overrides.setdefault("simulation", {})["scenario"] = args.scenario
    if args.replicates is not None:
        overrides.setdefault("simulation", {})["replicates"] = args.replicates
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config.override_config(overrides)

    base = replace(config.scenario_config(), seed=config.seed)
    replicates = gen_replicates(base, config.simulation.replicates, config.performance.max_workers)
    with artifact_dir(_out_dir(args, config)) as out:
        for i, (data, truth) in enumerate(replicates, start=1):
            rep_dir = out / f"replicate_{i:03d}"
            rep_dir.mkdir()
            write_csv(dataset_frame(data), rep_dir / "data.csv")
            pc_cols = [f"pc{l}" for l in range(1, truth.pcs.shape[1] + 1)]
            pcs = pd.DataFrame(truth.pcs, columns=pc_cols)
            pcs.insert(0, "id", data.ids)
            write_csv(pcs, rep_dir / "truth_pcs.csv")
            means = pd.DataFrame(truth.means, columns=pc_cols)
            means.insert(0, "id", data.ids)
            write_csv(means, rep_dir / "truth_means.csv")
            mixing = pd.DataFrame(truth.M, columns=list(data.outcome_names))
            mixing.insert(0, "pc", pc_cols)
            write_csv(mixing, rep_dir / "truth_mixing.csv")
            write_yaml({
                **asdict(base),
                "root_seed": config.seed,
                "replicate": i,
                "seed": derive_seed(config.seed, "replicate", i - 1),
                "decay_rule": "scenario 2 row l of the mixing weights has norm (n_pcs - l + 1) / n_pcs times the mean row norm",
            }, rep_dir / "metadata.yaml")
            progress("replicate", f"{i}/{len(replicates)} written")
        write_manifest(out, "simulate", config.config_hash(), config.seed, {"replicates": len(replicates)})


def fit(args, config: ConfigManager) -> None:
    data = config.load_dataset()
    model = fit_method(data, config.method_spec())
    with artifact_dir(_out_dir(args, config)) as out:
        save_bundle(model, out)
        write_manifest(out, "fit", config.config_hash(), config.seed)


def predict(args, config: ConfigManager) -> None:
    model = load_bundle(args.model)
    ids, coords, X = ingest_locations(args.locations, model.train.coord_names, model.train.covariate_names, args.id_col)
    U_hat, Y_hat = predict_new(model, coords, X if X.shape[1] else None, config.predictor_params())
    frame = pd.DataFrame(U_hat, columns=[f"pc{l}" for l in range(1, model.r + 1)])
    frame.insert(0, args.id_col, ids)
    for j, name in enumerate(model.train.outcome_names):
        frame[f"yhat_{name}"] = Y_hat[:, j]
    target = args.out or str(Path(config.output.dir) / "predictions.csv")
    with atomic_file(target) as tmp:
        write_csv(frame, tmp)
    logger.info(f"Predicted {model.r} scores at {len(ids)} locations -> {target}")


def evaluate(args, config: ConfigManager) -> None:
    data = config.load_dataset()
    results = evaluate_folds(data, config.method_specs(), config.cv_plan(), config.predictor_params(), config.performance.max_workers)
    with artifact_dir(_out_dir(args, config)) as out:
        summary = []
        for name, result in results.items():
            table = result.table()
            write_csv(table, out / f"metrics_{name}.csv")
            summary.append(table[table["fold"].isin(["mean", "sd"])])
        write_csv(pd.concat(summary, ignore_index=True), out / "summary.csv")
        write_manifest(out, "evaluate", config.config_hash(), config.seed, {"methods": list(results)})


def tune(args, config: ConfigManager) -> None:
    data = config.load_dataset()
    kernel = config.kernel_spec()
    results = tune_components(
        data,
        config.method.r,
        config.tuning_grid(),
        config.cv_plan(),
        kernel=kernel,
        spline_m=config.spline.m,
        predictor=config.predictor_params(),
        max_workers=config.performance.max_workers,
    )
    selected_h = results[0].best.h
    if selected_h is not None:
        kernel = KernelSpec(kernel.family, selected_h)
    spec = replace(config.method_spec("rappca"), hypers=tuple(res.best.hyper for res in results), kernel=kernel)
    model = fit_method(data, spec)

    with artifact_dir(_out_dir(args, config)) as out:
        selected = []
        for res in results:
            write_csv(res.table, out / f"scores_pc{res.component}.csv")
            selected.append({**{k: float(v) for k, v in asdict(res.best.hyper).items()},
                             "h": res.best.h, "cv_score": res.score, "component": res.component})
        write_yaml({"metric": config.cv.metric, "selected": selected}, out / "selected.yaml")
        save_bundle(model, out / "model", extra_metadata={"selected_by": f"{config.cv.k}-fold CV ({config.cv.metric})"})
        write_manifest(out, "tune", config.config_hash(), config.seed)


def rank_curves_command(args, config: ConfigManager) -> None:
    data = config.load_dataset()
    table = rank_curves(data, config.method_spec(), args.rmax, config.cv_plan(), config.predictor_params(), config.performance.max_workers)
    with artifact_dir(_out_dir(args, config)) as out:
        write_csv(table, out / "rank_curves.csv")
        write_manifest(out, "rank-curves", config.config_hash(), config.seed, {"rmax": args.rmax})


def verification_combinations(config: ConfigManager) -> List[Hyperparams]:
    v = config.verification
    combos = [Hyperparams(gamma=v.gamma, lambda1=lam, lambda2=lam, delta=config.hyper.delta) for lam in v.equal_lambdas]
    combos += [Hyperparams.from_ratio(v.gamma, v.ratio_lambda1, ratio, delta=config.hyper.delta) for ratio in v.ratios]
    return combos


def verify_optimality(args, config: ConfigManager) -> None:
    data = config.load_dataset()
    grid_size = args.theta_grid or config.verification.theta_grid
    ctx = FitContext.build(data, kernel=config.kernel_spec(), spline_m=config.spline.m, standardize=config.method.standardize)
    B, Q = ctx.basis.B, ctx.basis.Q

    curves, summary = [], []
    for hyper in verification_combinations(config):
        comp = rappca_solve_component(ctx.Y, ctx.K, B, Q, hyper)
        curve = polar_perturbation_check(ctx.Y, comp, ctx.K, B, Q, hyper, grid_size)
        curves.append(pd.DataFrame({
            "gamma": hyper.gamma, "lambda1": hyper.lambda1, "lambda2": hyper.lambda2,
            "theta": curve.theta, "difference": curve.difference,
        }))
        summary.append({
            "gamma": hyper.gamma, "lambda1": hyper.lambda1, "lambda2": hyper.lambda2,
            "min_difference": curve.minimum,
            "argmin_theta": float(curve.theta[np.argmin(curve.difference)]),
            "solver_theta": curve.own_theta,
            "objective": comp.objective,
        })
        progress("verify", f"gamma={hyper.gamma:g} lambda1={hyper.lambda1:g} lambda2={hyper.lambda2:g}: "
                           f"min difference {curve.minimum:.3e}", done=curve.minimum >= -1e-8)

    with artifact_dir(_out_dir(args, config)) as out:
        write_csv(pd.concat(curves, ignore_index=True), out / "curves.csv")
        write_csv(pd.DataFrame(summary), out / "summary.csv")
        write_manifest(out, "verify-optimality", config.config_hash(), config.seed, {"theta_grid": grid_size})


def gamma_sweep_command(args, config: ConfigManager) -> None:
    data = config.load_dataset()
    hyper = config.hypers()[0]
    table = gamma_sweep(
        data,
        config.verification.sweep_gammas,
        hyper.lambda1,
        hyper.ratio,
        config.cv_plan(),
        kernel=config.kernel_spec(),
        spline_m=config.spline.m,
        predictor=config.predictor_params(),
        delta=hyper.delta,
    )
    with artifact_dir(_out_dir(args, config)) as out:
        write_csv(table, out / "gamma_sweep.csv")
        write_manifest(out, "gamma-sweep", config.config_hash(), config.seed)


def lambda_sweep_command(args, config: ConfigManager) -> None:
    data = config.load_dataset()
    v = config.verification
    table = lambda_sweep(
        data,
        v.sweep_lambda1s,
        v.sweep_ratios,
        v.sweep_gammas,
        config.cv_plan(),
        kernel=config.kernel_spec(),
        spline_m=config.spline.m,
        predictor=config.predictor_params(),
        delta=config.hypers()[0].delta,
    )
    with artifact_dir(_out_dir(args, config)) as out:
        write_csv(table, out / "lambda_sweep.csv")
        write_manifest(out, "lambda-sweep", config.config_hash(), config.seed)


HANDLERS = {
    "simulate": simulate,
    "fit": fit,
    "predict": predict,
    "evaluate": evaluate,
    "tune": tune,
    "rank-curves": rank_curves_command,
    "verify-optimality": verify_optimality,
    "gamma-sweep": gamma_sweep_command,
    "lambda-sweep": lambda_sweep_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_arguments(argv)
    try:
        config = setup_environment(args)
        with timed_stage(args.command):
            HANDLERS[args.command](args, config)
    except RapPCAError as e:
        code = exit_code_for(e)
        logger.error(f"error={type(e).__name__} code={code} message={e}")
        return code
    except Exception as e:
        logger.exception(f"error={type(e).__name__} code={exit_code_for(e)} message={e}")
        return exit_code_for(e)
    return 0


if __name__ == "__main__":
    sys.exit(main())
