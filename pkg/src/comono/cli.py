"""Benchmark and verification command line front end.

Three subcommands: ``run`` executes a configured experiment and writes one
CSV trace per seed plus an aggregate summary JSON, ``verify`` runs the
operator-property suite on a problem spec, and ``budget`` prints the exact
inner-iteration budget tables.  Exit codes: 0 success, 2 configuration
error, 3 numeric failure (non-finite values during a run).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys

import numpy as np

from . import metrics, outer, problems
from .core import ComonoError, NumericsError, ParameterError
from .prox import BoxSet
from .rng import substream

CSV_HEADER = "k,inner_iters,cum_oracle_calls,residual,residual_bound_theorem,dist_to_solution,wall_ns"

ALGORITHMS = ("halpern", "km", "halpern_stoch", "km_mlmc")


class ConfigError(ParameterError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config error at {field!r}: {message}")
        self.field = field


def _require(cfg: dict, field: str, types, where: str):
    if field not in cfg:
        raise ConfigError(f"{where}.{field}", "missing required field")
    value = cfg[field]
    if not isinstance(value, types):
        raise ConfigError(f"{where}.{field}", f"expected {types}, got {type(value).__name__}")
    return value


def build_problem(spec: dict, where: str = "problem"):
    """Construct an InclusionProblem from its JSON spec (tagged by 'kind')."""
    kind = _require(spec, "kind", str, where)
    noise = spec.get("noise_sigma", 0.0)
    if not isinstance(noise, (int, float)) or noise < 0:
        raise ConfigError(f"{where}.noise_sigma", "must be a nonnegative number")
    try:
        if kind == "rotation":
            p = problems.make_rotation(
                problems.RotationSpec(
                    lipschitz=float(_require(spec, "lipschitz", (int, float), where)),
                    theta=float(_require(spec, "theta", (int, float), where)),
                    dim=int(_require(spec, "dim", int, where)),
                )
            )
        elif kind == "matrix_game":
            payoff = np.asarray(_require(spec, "payoff", list, where), dtype=np.float64)
            p = problems.make_matrix_game(payoff)
        elif kind == "ratio_game":
            if spec.get("shipped", False):
                p = problems.shipped_ratio_game()
            else:
                p = problems.make_ratio_game(
                    problems.RatioGameSpec(
                        np.asarray(_require(spec, "r", list, where), dtype=np.float64),
                        np.asarray(_require(spec, "s", list, where), dtype=np.float64),
                    ),
                    rho=float(spec.get("rho", 0.0)),
                )
        elif kind == "affine":
            m = np.asarray(_require(spec, "m", list, where), dtype=np.float64)
            b = np.asarray(_require(spec, "b", list, where), dtype=np.float64)
            g = None
            gspec = spec.get("g")
            if gspec is not None:
                gkind = _require(gspec, "kind", str, f"{where}.g")
                if gkind == "box":
                    g = BoxSet(
                        np.asarray(_require(gspec, "lower", list, f"{where}.g")),
                        np.asarray(_require(gspec, "upper", list, f"{where}.g")),
                    )
                elif gkind == "l1":
                    g = problems.L1(float(_require(gspec, "weight", (int, float), f"{where}.g")))
                else:
                    raise ConfigError(f"{where}.g.kind", f"unknown constraint {gkind!r}")
            p = problems.make_affine(m, b, g)
        else:
            raise ConfigError(f"{where}.kind", f"unknown problem kind {kind!r}")
    except ConfigError:
        raise
    except ComonoError as exc:
        raise ConfigError(where, str(exc)) from exc
    if noise > 0:
        p = problems.with_gaussian_noise(p, float(noise))
    return p


def _parse_x0(value, dim: int):
    if value is None or value == "zeros":
        return np.zeros(dim)
    if value == "e1":
        x0 = np.zeros(dim)
        x0[0] = 1.0
        return x0
    if isinstance(value, list):
        arr = np.asarray(value, dtype=np.float64)
        if arr.shape != (dim,):
            raise ConfigError("x0", f"expected {dim} entries, got shape {arr.shape}")
        return arr
    raise ConfigError("x0", "must be 'zeros', 'e1', or an explicit vector")


def parse_run_config(cfg: dict):
    problem = build_problem(_require(cfg, "problem", dict, "config"))
    algorithm = _require(cfg, "algorithm", str, "config")
    if algorithm not in ALGORITHMS:
        raise ConfigError("algorithm", f"must be one of {ALGORITHMS}")
    eta = float(_require(cfg, "eta", (int, float), "config"))
    rho = float(_require(cfg, "rho", (int, float), "config"))
    k_outer = int(_require(cfg, "k_outer", int, "config"))
    seeds = cfg.get("seeds", cfg.get("seed", 0))
    if isinstance(seeds, int):
        seeds = [seeds]
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds", "must be an integer or a list of integers")
    budget_scale = float(cfg.get("budget_scale", 1.0))
    out_prefix = _require(cfg, "out_prefix", str, "config")
    residual_tol = float(cfg.get("residual_tol", metrics.REFERENCE_TOL))
    x0 = _parse_x0(cfg.get("x0"), problem.dim)
    try:
        params = outer.OuterParams(
            eta=eta, rho=rho, k_outer=k_outer, budget_scale=budget_scale, x0=x0
        )
        lip = problem.f.lipschitz
        ceiling = math.inf if lip == 0.0 else 1.0 / lip
        if not (eta < ceiling):
            raise ParameterError(f"eta = {eta:.6g} must be < 1/L = {ceiling:.6g}")
    except ParameterError as exc:
        raise ConfigError("eta/rho", str(exc)) from exc
    return problem, algorithm, params, seeds, out_prefix, residual_tol


def _worker_count(n_tasks: int) -> int:
    cap = os.environ.get("COMONO_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def _theorem_bound_curve(algorithm, problem, params):
    """Per-row residual bound column; empty when no solution is known.

    Anchored bounds are last-iterate; 'km' rows carry the averaged-rate
    value at K = k, and stochastic rows an in-expectation value, so single
    rows of those runs are informational rather than per-row guarantees.
    """
    if problem.known_solution is None or params.x0 is None:
        return None
    dist0 = float(np.linalg.norm(params.x0 - problem.known_solution))
    gap = params.eta - params.rho
    sigma2 = problem.f.variance_bound or 0.0
    alpha = params.alpha

    def bound(k):
        if algorithm == "halpern":
            return 4.0 * dist0 / (gap * (k + 1))
        if algorithm == "km":
            return math.sqrt(11.0) * dist0 / (gap * math.sqrt(k))
        if algorithm == "halpern_stoch":
            return 6.0 * math.sqrt(dist0**2 + sigma2) / (gap * k)
        return (
            math.sqrt(
                64.0 * (dist0**2 + alpha**2 * sigma2) * math.log(k + 3) / (alpha**2 * math.sqrt(k))
            )
            / params.eta
        )

    return bound


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path: str, report, bound_fn) -> None:
    lines = [CSV_HEADER]
    for row in report.rows:
        bound = bound_fn(row.k) if bound_fn else None
        lines.append(
            ",".join(
                [
                    str(row.k),
                    str(row.inner_iters),
                    str(row.cum_oracle_calls),
                    _fmt(row.residual_estimate),
                    _fmt(bound),
                    _fmt(row.dist_to_solution),
                    str(row.wall_ns),
                ]
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _theorem_check(algorithm, problem, params, reports):
    """Aggregate residual-vs-bound verdict for the summary JSON."""
    applicable = params.budget_scale == 1.0 and problem.known_solution is not None
    if not applicable:
        reason = (
            "budget_scale != 1" if params.budget_scale != 1.0 else "no known solution"
        )
        return {"applicable": False, "passed": None, "detail": reason}
    dist0 = float(np.linalg.norm(params.x0 - problem.known_solution))
    gap = params.eta - params.rho
    sigma2 = problem.f.variance_bound or 0.0
    k_outer = params.k_outer
    res2 = np.array(
        [[row.residual_estimate**2 for row in rep.rows] for rep in reports]
    )  # (seeds, K)
    initial2 = np.array([rep.initial_residual**2 for rep in reports])
    mean2 = res2.mean(axis=0)
    if algorithm == "halpern":
        ks = np.arange(1, k_outer + 1)
        bounds = 16.0 * dist0**2 / (gap**2 * (ks + 1) ** 2) + 2e-12 / params.eta
        passed = bool(np.all(res2 <= bounds))
        detail = f"last-iterate squared residual vs 16 D^2/((eta-rho)^2 (k+1)^2), all k in [1, {k_outer}]"
    elif algorithm == "km":
        running = (initial2.mean() + np.sum(mean2[: k_outer - 1])) / k_outer
        bound = 11.0 * dist0**2 / (gap**2 * k_outer)
        passed = bool(running <= bound)
        detail = f"mean squared residual over first K iterates {running:.6g} vs {bound:.6g}"
    elif algorithm == "halpern_stoch":
        ks = np.arange(1, k_outer + 1)
        bounds = 36.0 * (dist0**2 + sigma2) / (gap**2 * ks**2)
        passed = bool(np.all(mean2 <= bounds))
        detail = "seed-mean squared residual vs 36 (D^2+sigma^2)/((eta-rho)^2 k^2)"
    else:
        uniform = (initial2.mean() + np.sum(mean2[: k_outer - 1])) / k_outer
        bound = (
            64.0
            * (dist0**2 + params.alpha**2 * sigma2)
            * math.log(k_outer + 3)
            / (params.alpha**2 * math.sqrt(k_outer))
        ) / params.eta**2
        passed = bool(uniform <= bound)
        detail = f"uniform-iterate mean squared residual {uniform:.6g} vs {bound:.6g}"
    return {"applicable": True, "passed": passed, "detail": detail}


def cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        problem, algorithm, params, seeds, prefix, residual_tol = parse_run_config(cfg)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    try:
        if algorithm == "halpern_stoch":
            reports = outer.halpern_stochastic_solve_seeds(problem, params, seeds)
        elif algorithm == "km_mlmc":
            reports = outer.km_mlmc_solve_seeds(problem, params, seeds)
        else:
            solver = outer.halpern_solve if algorithm == "halpern" else outer.km_solve

            def one(seed):
                rep = solver(problem, params)
                rep.params_echo["seed"] = seed
                return rep

            with concurrent.futures.ThreadPoolExecutor(_worker_count(len(seeds))) as pool:
                reports = list(pool.map(one, seeds))
        for report in reports:
            metrics.attach_residuals(report, problem, params.eta, residual_tol)
    except ParameterError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3

    os.makedirs(os.path.dirname(prefix) or ".", exist_ok=True)
    bound_fn = _theorem_bound_curve(algorithm, problem, params)
    csv_paths = []
    for seed, report in zip(seeds, reports):
        path = f"{prefix}.seed{seed}.csv"
        write_csv(path, report, bound_fn)
        csv_paths.append(path)

    mean_residual = np.mean(
        [[row.residual_estimate for row in rep.rows] for rep in reports], axis=0
    )
    summary = {
        "config": cfg,
        "resolved": {
            "algorithm": algorithm,
            "eta": params.eta,
            "rho": params.rho,
            "alpha": params.alpha,
            "k_outer": params.k_outer,
            "budget_scale": params.budget_scale,
            "seeds": seeds,
            "residual_tol": residual_tol,
            "x0": params.x0.tolist(),
            "lipschitz": problem.f.lipschitz,
            "assumption": problem.assumption.kind,
            "assumption_rho": problem.assumption.rho,
            "noise_variance_bound": problem.f.variance_bound,
        },
        "csv_files": csv_paths,
        "initial_residual": [rep.initial_residual for rep in reports],
        "mean_residual_per_k": mean_residual.tolist(),
        "theorem_check": _theorem_check(algorithm, problem, params, reports),
        "best_iterate_index": [rep.best_iterate_index for rep in reports],
        "random_iterate_index": [rep.random_iterate_index for rep in reports],
        "final_oracle_calls": [rep.rows[-1].cum_oracle_calls for rep in reports],
    }
    with open(f"{prefix}.summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_verify(args) -> int:
    try:
        with open(args.problem) as fh:
            spec = json.load(fh)
        problem = build_problem(spec)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    eta = args.eta if args.eta is not None else metrics.default_eta(problem)
    rho = problem.assumption.rho * args.rho_scale
    try:
        reports = [
            metrics.check_shifted_map_regularity(
                problem, eta, args.samples, substream(args.seed, "regular")
            ),
            metrics.check_prox_firmly_nonexpansive(
                problem.g, problem.dim, args.samples, substream(args.seed, "firm"), gamma=eta
            ),
            metrics.check_conic_nonexpansive(
                problem, eta, rho, args.samples, substream(args.seed, "conic")
            ),
            metrics.check_cocoercive_identity_minus_j(
                problem, eta, rho, args.samples, substream(args.seed, "cocoercive")
            ),
        ]
        rho_estimate = None
        if problem.known_solution is not None:
            rho_estimate = metrics.estimate_weak_mvi_rho(
                problem, problem.known_solution, args.samples, substream(args.seed, "mvi")
            )
    except ParameterError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    all_passed = all(r.passed for r in reports)
    payload = {
        "problem": spec,
        "eta": eta,
        "rho_checked": rho,
        "rho_scale": args.rho_scale,
        "samples": args.samples,
        "seed": args.seed,
        "reports": [r.to_dict() for r in reports],
        "weak_mvi_rho_estimate": rho_estimate,
        "all_passed": all_passed,
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: worst violation {r.worst_violation:.3e}")
    return 0 if all_passed else 1


def cmd_budget(args) -> int:
    try:
        if args.alg == "km_mlmc":
            print("k, alpha_k/alpha, N_k, M_k")
            for k in range(args.k_max):
                ratio, n, m = outer.budgets_mlmc_km(k, args.eta_l)
                print(f"{k}, {ratio:.17g}, {n}, {m}")
        else:
            fn = {
                "halpern": outer.budget_halpern,
                "km": outer.budget_km,
                "halpern_stoch": outer.budget_halpern_stochastic,
            }[args.alg]
            print("k, N_k")
            for k in range(args.k_max):
                print(f"{k}, {fn(k, args.eta_l)}")
    except ParameterError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comono",
        description="Benchmark and verification CLI for nonmonotone inclusion solvers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured experiment")
    run_p.add_argument("config", help="path to the run config JSON")
    run_p.set_defaults(func=cmd_run)

    ver_p = sub.add_parser("verify", help="run operator property checks on a problem")
    ver_p.add_argument("--problem", required=True, help="path to the problem spec JSON")
    ver_p.add_argument("--samples", type=int, default=10_000)
    ver_p.add_argument("--seed", type=int, default=0)
    ver_p.add_argument("--eta", type=float, default=None)
    ver_p.add_argument(
        "--rho-scale",
        type=float,
        default=1.0,
        help="scale the problem's rho before checking (sharpness probes)",
    )
    ver_p.add_argument("--out", default="verify.json", help="verification JSON output path")
    ver_p.set_defaults(func=cmd_verify)

    bud_p = sub.add_parser("budget", help="print inner-iteration budget tables")
    bud_p.add_argument("--alg", required=True, choices=ALGORITHMS)
    bud_p.add_argument("--eta-l", type=float, required=True, dest="eta_l")
    bud_p.add_argument("--k-max", type=int, required=True, dest="k_max")
    bud_p.set_defaults(func=cmd_budget)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
