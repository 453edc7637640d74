"""Command-line entry points: ``solve``, ``compare``, ``verify-bounds``, ``gen-data``.

Exit codes: 0 on success, 2 on configuration errors, 3 on solver failure.
Output goes to ``--out``, else ``$FLEXCD_OUTPUT_DIR``, else ``./flexcd_out``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import BOUND_TAGS, estimate_constants, iteration_bound, levelset_radius, validate_bound
from .driver import FcdConfig, SolverError, UcdcConfig, fcd_run, ucdc_run
from .libsvm import parse_libsvm, write_libsvm
from .linesearch import LineSearchConfig
from .losses import make_loss
from .model import make_strategy
from .problem import CompositeProblem, eval_F
from .regularizers import make_regularizer
from .subsolver import InexactnessPolicy
from .synthetic import SyntheticRecipe, generate_synthetic

OUTPUT_ENV = "FLEXCD_OUTPUT_DIR"
ALGORITHMS = ("fcd", "fcd-v1", "fcd-v2", "ucdc-v1", "ucdc-v2")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--data", help="LIBSVM file")
    g.add_argument("--synthetic", choices=("quadratic", "logistic"), help="generate data instead of reading")
    g.add_argument("--N", type=int, default=100)
    g.add_argument("--m", type=int, default=200)
    g.add_argument("--cond", type=float, default=1.0)
    g.add_argument("--sparsity", type=float, default=1.0)
    g.add_argument("--support", type=float, default=0.2)
    g.add_argument("--margin", type=float, default=0.1)
    g.add_argument("--label-noise", type=float, default=0.0)
    g.add_argument("--data-seed", type=int, default=0)
    g.add_argument("--loss", choices=("quadratic", "logistic"), default=None)
    g.add_argument("--reg", default="l1", help="zero, l1, l2sq or elastic")
    g.add_argument("--c", type=float, default=0.1, help="regularization weight")
    g.add_argument("--c2", type=float, default=None, help="squared-l2 weight of the elastic net")


def _add_solver_args(p):
    g = p.add_argument_group("solver")
    g.add_argument("--tau", type=int, default=None, help="block size (default ceil(0.001 N))")
    g.add_argument("--hessian", choices=("identity", "scaled", "lipschitz", "diag", "minor", "lbfgs"),
                   default=None)
    g.add_argument("--ridge", type=float, default=None)
    g.add_argument("--lbfgs-mem", type=int, default=10)
    g.add_argument("--eta", type=float, default=0.9)
    g.add_argument("--inner", choices=("auto", "closed", "cg", "prox"), default="auto")
    g.add_argument("--inner-max", type=int, default=None)
    g.add_argument("--strict-certificates", action="store_true")
    g.add_argument("--theta", type=float, default=1e-3)
    g.add_argument("--max-backtracks", type=int, default=200)
    g.add_argument("--budget", type=int, default=1000, help="iteration budget")
    g.add_argument("--time-budget", type=float, default=None, help="wall-clock budget in seconds")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--instrument", action="store_true")


def _add_output_args(p):
    p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./flexcd_out)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flexcd", description="Flexible coordinate descent solver and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one algorithm")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--algo", choices=ALGORITHMS, default="fcd")
    _add_output_args(p)

    p = sub.add_parser("compare", help="run several algorithms on one problem")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--algos", default="fcd-v1,fcd-v2,ucdc-v1,ucdc-v2")
    p.add_argument("--workers", type=int, default=4)
    _add_output_args(p)

    p = sub.add_parser("verify-bounds", help="Monte-Carlo check of an iteration bound")
    _add_problem_args(p)
    _add_solver_args(p)
    p.add_argument("--theorem", choices=BOUND_TAGS, default="SC-N")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--epsilon", type=float, default=1e-3, help="target accuracy relative to F(x0) - F*")
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--k-scale", type=float, default=1.0, help="multiply the theoretical K")
    p.add_argument("--workers", type=int, default=4)
    _add_output_args(p)

    p = sub.add_parser("gen-data", help="write a synthetic instance in LIBSVM format")
    _add_problem_args(p)
    p.add_argument("--output", required=True, help="LIBSVM file to write")
    return parser


# ---------------------------------------------------------------------------


def _load_problem(args):
    """Problem, planted optimum (or None) and optimal value (or None)."""
    reg = make_regularizer(args.reg, args.c, args.c2)
    if args.data and args.synthetic:
        raise ConfigError("use either --data or --synthetic")
    if args.data:
        loss_kind = args.loss or "logistic"
        A, b = parse_libsvm(args.data, binary=(loss_kind == "logistic"))
        return CompositeProblem(make_loss(loss_kind, A, b), reg), None, None
    kind = args.synthetic or args.loss or "quadratic"
    if args.loss and args.loss != kind:
        raise ConfigError("--loss disagrees with --synthetic")
    recipe = SyntheticRecipe(kind=kind, N=args.N, m=args.m, cond=args.cond, sparsity=args.sparsity,
                             support=args.support, margin=args.margin, label_noise=args.label_noise,
                             seed=args.data_seed)
    inst = generate_synthetic(recipe, reg)
    return inst.problem, inst.x_star, inst.F_star


def _fcd_config(args, N, algo):
    tau = args.tau if args.tau is not None else max(1, math.ceil(0.001 * N))
    if algo == "fcd-v2":
        hessian, inner, ridge = "minor", "prox", args.ridge if args.ridge is not None else 1e-6
    elif algo == "fcd-v1":
        hessian, inner, ridge = "diag", "closed", args.ridge
    else:
        hessian, inner, ridge = args.hessian or "diag", args.inner, args.ridge
    if args.hessian and algo != "fcd":
        hessian = args.hessian
    if hessian not in ("identity", "scaled", "lipschitz", "diag") and inner == "closed":
        inner = "auto"
    return FcdConfig(
        tau=tau, seed=args.seed,
        strategy=make_strategy(hessian, ridge, args.lbfgs_mem),
        policy=InexactnessPolicy(eta=args.eta, max_inner=args.inner_max, inner=inner,
                                 strict=args.strict_certificates),
        linesearch=LineSearchConfig(theta=args.theta, max_backtracks=args.max_backtracks),
        max_iters=args.budget, max_time=args.time_budget, instrument=args.instrument,
    )


def _run(problem, args, algo):
    N = problem.N
    if algo.startswith("ucdc"):
        tau = args.tau if args.tau is not None else max(1, math.ceil(0.001 * N))
        cfg = UcdcConfig(variant=algo[-2:], tau=tau, seed=args.seed, max_iters=args.budget,
                         max_time=args.time_budget)
        trace = ucdc_run(problem, cfg)
    else:
        trace = fcd_run(problem, _fcd_config(args, N, algo))
    trace.algorithm = algo
    return trace


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "flexcd_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_long_csv(path, traces: dict) -> None:
    """Plot-ready rows ``algorithm,k,time_s,F`` (row ``k=0`` holds the starting point)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("algorithm", "k", "time_s", "F"))
        for name, tr in traces.items():
            w.writerow((name, 0, f"{tr.setup_time_s:.6f}", repr(tr.F0)))
            for r in tr.records:
                w.writerow((name, r.k, f"{r.time_s:.6f}", repr(r.F)))


def _emit(out: Path, traces: dict, args, F_star, stem: str) -> None:
    for name, tr in traces.items():
        tr.write_json(out / f"{name}.json")
        tr.write_csv(out / f"{name}.csv")
    write_long_csv(out / f"{stem}_long.csv", traces)
    if not args.no_plot:
        from .plotting import plot_traces

        plot_traces(traces, out / stem, F_star)


def cmd_solve(args) -> int:
    problem, _, F_star = _load_problem(args)
    trace = _run(problem, args, args.algo)
    out = _out_dir(args)
    _emit(out, {args.algo: trace}, args, F_star, "solve")
    print(f"{args.algo}: F={trace.F_final:.12g} iterations={len(trace.records)} reason={trace.reason}")
    return 0


def cmd_compare(args) -> int:
    problem, _, F_star = _load_problem(args)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad or not algos:
        raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        traces = dict(zip(algos, pool.map(lambda a: _run(problem, args, a), algos)))
    out = _out_dir(args)
    _emit(out, traces, args, F_star, "compare")
    for name, tr in traces.items():
        print(f"{name}: F={tr.F_final:.12g} iterations={len(tr.records)} reason={tr.reason}")
    return 0


def cmd_verify(args) -> int:
    problem, x_star, F_star = _load_problem(args)
    if F_star is None:
        raise ConfigError("bound verification needs an instance with a planted optimum")
    cfg = _fcd_config(args, problem.N, "fcd")
    theta, eta = cfg.linesearch.theta, cfg.policy.effective_eta
    if cfg.policy.inner == "closed" or (cfg.policy.inner == "auto" and cfg.strategy.name in ("diag", "identity", "scaled", "lipschitz")):
        eta = 0.0  # diagonal models are solved exactly
    consts = estimate_constants(problem, cfg.strategy, cfg.tau, theta, eta)
    x0 = np.zeros(problem.N)
    gap = eval_F(problem, x0) - F_star
    eps = args.epsilon * gap
    tag = args.theorem
    kw = dict(N=problem.N, tau=cfg.tau, eps=eps, rho=args.rho, gap=gap)
    if tag in ("C-N-i", "C-N-ii", "C-S"):
        kw["radius"] = levelset_radius(problem, x0, x_star, F_star)
    if tag in ("C-N-i", "C-N-ii", "SC-N"):
        kw["chi"] = consts.chi
    if tag == "SC-N":
        kw["delta"] = consts.delta
    if tag in ("C-S", "SC-S"):
        kw["vartheta"] = consts.vartheta
        kw["mu_f"] = consts.mu_f
    K = iteration_bound(tag, **kw)
    K = max(0, int(math.ceil(K * args.k_scale)))
    report = validate_bound(problem, cfg, tag=tag, K=K, eps=eps, rho=args.rho, F_star=F_star,
                            trials=args.trials, x0=x0, seed0=args.seed, workers=args.workers)
    out = _out_dir(args)
    payload = {"report": report.to_dict(), "constants": consts.to_dict()}
    (out / "bound_report.json").write_text(json.dumps(payload, indent=2))
    print(f"{tag}: K={K} frequency={report.frequency:.3f} threshold={report.threshold:.3f} "
          f"{'PASS' if report.passed else 'FAIL'}")
    return 0


def cmd_gen_data(args) -> int:
    problem, x_star, F_star = _load_problem(args)
    write_libsvm(args.output, problem.loss.A, problem.loss.b)
    meta = {"N": problem.N, "m": problem.loss.m, "loss": problem.loss.name,
            "regularizer": problem.reg.describe(), "F_star": F_star,
            "x_star": None if x_star is None else x_star.tolist()}
    Path(str(args.output) + ".json").write_text(json.dumps(meta))
    print(f"wrote {args.output}")
    return 0


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "verify-bounds": cmd_verify, "gen-data": cmd_gen_data}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"flexcd: error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"flexcd: solver failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"flexcd: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
