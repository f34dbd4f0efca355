"""Command-line entry point: ``gfgl {fit,simulate,evaluate,path}``."""

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .core import NotPositiveDefiniteError, Segmentation, local_covariances
from .evaluate import evaluate_fit
from .fileio import (
    FIT_FORMAT,
    InputFormatError,
    read_json,
    read_series_csv,
    read_simspec_config,
    truth_from_dict,
    truth_to_dict,
    write_json,
    write_series_csv,
)
from .path import default_lambda2_grid, lambda2_path
from .segmentation import block_precisions
from .simulate import SimSpec, generate_truth, sample_timeseries
from .solver import SolverConfig, SolverError, admm_solve

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("gfgl")


def _positive_lambda1(value):
    v = float(value)
    if not v > 0:
        raise InputFormatError("lambda1 must be positive")
    return v


def _solver_args(p):
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol-primal", type=float, default=1e-5)
    p.add_argument("--tol-dual", type=float, default=1e-5)
    p.add_argument("--gamma", type=float, nargs=3, default=(1.0, 1.0, 1.0),
                   metavar=("V1", "V2", "W"), help="ADMM step weights")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="threads for the per-time updates (default: all cores)")
    p.add_argument("--block-restart", type=int, default=5, metavar="N",
                   help="jump to the exact solution for a changepoint pattern "
                        "unchanged for N iterations (0 = plain ADMM; default 5)")
    p.add_argument("--fixed-gamma", action="store_true",
                   help="keep the step weights fixed instead of balancing residuals")


def _config(args, lambda1, lambda2, history=False):
    g1, g2, gw = args.gamma
    return SolverConfig.from_lambdas(
        lambda1, lambda2, gamma_v1=g1, gamma_v2=g2, gamma_w=gw,
        tol_primal=args.tol_primal, tol_dual=args.tol_dual, max_iter=args.max_iter,
        record_history=history, threads=args.threads, block_restart=args.block_restart,
        adapt_every=0 if args.fixed_gamma else 10)


def _config_echo(cfg):
    return {
        "lambda1": cfg.reg.lambda1, "lambda2": cfg.reg.lambda2,
        "gamma_v1": cfg.gamma_v1, "gamma_v2": cfg.gamma_v2, "gamma_w": cfg.gamma_w,
        "tol_primal": cfg.tol_primal, "tol_dual": cfg.tol_dual, "max_iter": cfg.max_iter,
        "block_restart": cfg.block_restart, "adapt_every": cfg.adapt_every,
    }


def fit_report(res, cfg, source=None):
    seg = res.segmentation
    d = {
        "format": FIT_FORMAT,
        "input": source,
        "T": seg.T,
        "p": res.precisions.p,
        "changepoints": list(seg.changepoints),
        "block_precisions": block_precisions(res.precisions, seg),
        "jump_norms": res.jump_norms,
        "objective": res.final_objective,
        "iterations": res.iterations,
        "converged": res.converged,
        "residuals": {"primal": res.eps_primal, "dual": res.eps_dual},
        "config": _config_echo(cfg),
    }
    if res.residual_history is not None:
        d["history"] = {
            "residuals": [list(r) for r in res.residual_history],
            "objective": list(res.objective_history),
        }
    return d


def cmd_fit(args):
    lam1 = _positive_lambda1(args.lambda1)
    series = read_series_csv(args.input)
    cfg = _config(args, lam1, args.lambda2, history=args.history)
    res = admm_solve(local_covariances(series), cfg)
    write_json(args.output, fit_report(res, cfg, source=args.input))
    log.info("fit: %d changepoints %s, converged=%s after %d iterations",
             len(res.segmentation.changepoints), list(res.segmentation.changepoints),
             res.converged, res.iterations)
    return EXIT_OK


_SPEC_FLAGS = {
    "p": int, "T": int, "graph_model": str, "edge_count": int, "edge_prob": float,
    "base_diagonal": float, "structure_change": str, "perturb_edges": int,
    "min_jump": float, "max_redraws": int,
}


def cmd_simulate(args):
    values = read_simspec_config(args.config) if args.config else {}
    for name in _SPEC_FLAGS:
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.changepoints is not None:
        values["true_changepoints"] = tuple(args.changepoints)
    if args.edge_weight_range is not None:
        values["edge_weight_range"] = tuple(args.edge_weight_range)
    if args.fixed_sign:
        values["random_sign"] = False
    values["seed"] = args.seed
    missing = [k for k in ("p", "T") if k not in values]
    if missing:
        raise InputFormatError(f"simulation needs {', '.join(missing)} (flag or config)")
    spec = SimSpec.from_dict(values)
    truth = generate_truth(spec)
    # the sample seed is derived so one --seed fixes both draws
    series = sample_timeseries(truth, seed=np.random.SeedSequence(args.seed).spawn(1)[0])
    write_series_csv(args.data, series)
    write_json(args.truth, truth_to_dict(truth, spec))
    log.info("simulate: T=%d p=%d changepoints=%s eta_min=%s",
             spec.T, spec.p, list(spec.true_changepoints), truth.eta_min)
    return EXIT_OK


def cmd_evaluate(args):
    fit = read_json(args.fit)
    if fit.get("format") != FIT_FORMAT:
        raise InputFormatError(f"{args.fit}: not a fit report (format={fit.get('format')!r})")
    truth = truth_from_dict(read_json(args.truth))
    if int(fit["T"]) != truth.T or int(fit["p"]) != truth.p:
        raise InputFormatError("fit and truth differ in T or p")
    seg = Segmentation(tuple(fit["changepoints"]), truth.T)
    cfg = fit.get("config", {})
    report = evaluate_fit(np.array(fit["block_precisions"], dtype=float), seg, truth,
                          lambda1=cfg.get("lambda1"), lambda2=cfg.get("lambda2"),
                          delta_T=args.delta_t)
    write_json(args.output, report.to_dict())
    return EXIT_OK


def cmd_path(args):
    series = read_series_csv(args.input)
    S = local_covariances(series)
    lam1_grid = [_positive_lambda1(v) for v in (args.lambda1_grid or [args.lambda1])]
    if args.lambda2_grid:
        grid = np.asarray(args.lambda2_grid, dtype=float)
    else:
        grid = default_lambda2_grid(S, args.n_points, args.ratio)
    cfg = _config(args, lam1_grid[0], 0.0)
    path = lambda2_path(S, cfg, grid, lambda1_grid=lam1_grid, target_k=args.target_k,
                        refine_steps=args.refine_steps, warm_start=not args.cold)
    out = path.to_dict()
    if path.selected_result is not None:
        sel_cfg = _config(args, path.selected.lambda1, path.selected.lambda2)
        out["selected_fit"] = fit_report(path.selected_result, sel_cfg, source=args.input)
    write_json(args.output, out)
    if args.fit_output and path.selected_result is not None:
        write_json(args.fit_output, out["selected_fit"])
    if args.target_k is not None and path.selected is None:
        log.warning("no grid point produced exactly %d changepoints", args.target_k)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gfgl", description="Group-fused graphical lasso: changepoints in sparse "
                                 "Gaussian graphical models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate precisions and changepoints from a CSV")
    p.add_argument("--input", required=True, help="T x p CSV, rows are time points")
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--lambda2", type=float, required=True)
    p.add_argument("--output", default="-", help="JSON path (default: stdout)")
    p.add_argument("--history", action="store_true", help="record residual/objective history")
    _solver_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="draw a piecewise-constant GGM and a sample from it")
    p.add_argument("--config", help="key = value file with SimSpec fields")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--data", required=True, help="output CSV")
    p.add_argument("--truth", required=True, help="output ground-truth JSON")
    p.add_argument("--p", type=int, dest="p")
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--changepoints", type=int, nargs="*")
    p.add_argument("--graph-model", dest="graph_model")
    p.add_argument("--edge-count", type=int, dest="edge_count")
    p.add_argument("--edge-prob", type=float, dest="edge_prob")
    p.add_argument("--edge-weight-range", type=float, nargs=2)
    p.add_argument("--fixed-sign", action="store_true", help="all edge weights positive")
    p.add_argument("--base-diagonal", type=float, dest="base_diagonal")
    p.add_argument("--structure-change", dest="structure_change")
    p.add_argument("--perturb-edges", type=int, dest="perturb_edges")
    p.add_argument("--min-jump", type=float, dest="min_jump")
    p.add_argument("--max-redraws", type=int, dest="max_redraws")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score a fit against a ground truth")
    p.add_argument("--fit", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--delta-t", type=float, help="changepoint error rate for the beta3 ratio")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("path", help="warm-started sweep over lambda2")
    p.add_argument("--input", required=True)
    p.add_argument("--lambda1", type=float, default=0.05)
    p.add_argument("--lambda1-grid", type=float, nargs="+")
    p.add_argument("--lambda2-grid", type=float, nargs="+")
    p.add_argument("--n-points", type=int, default=20)
    p.add_argument("--ratio", type=float, default=0.05,
                   help="smallest/largest lambda2 on the default grid")
    p.add_argument("--target-k", type=int)
    p.add_argument("--refine-steps", type=int, default=0)
    p.add_argument("--cold", action="store_true", help="disable warm starts")
    p.add_argument("--output", default="-")
    p.add_argument("--fit-output", help="also write the selected fit as a fit report")
    _solver_args(p)
    p.set_defaults(func=cmd_path)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputFormatError, FileNotFoundError, NotPositiveDefiniteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
