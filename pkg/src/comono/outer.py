"""Outer loops and their exact inner-iteration budgets.

Four solvers share one skeleton: at outer step k, approximate the resolvent
J_{eta(F+G)}(x_k) with an inner solver run for a k-indexed budget, then take
an anchored (Halpern) or averaged (KM) step with relaxation
alpha = 1 - rho/eta.  The budgets are the exact ceiling formulas the
convergence guarantees are priced against; ``budget_scale`` shrinks them
uniformly for exploratory runs, and any theorem-level claim requires the
default scale of 1.

All logarithms in budget formulas are natural logs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    InclusionProblem,
    ParameterError,
    SolveReport,
    SolveRow,
    as_point,
    check_finite,
    make_shifted_map,
)
from .inner import coupled_level_run, fbf_run, fbf_stochastic_run, max_level
from .rng import substream


@dataclass(frozen=True)
class OuterParams:
    """Run parameters shared by every outer loop.

    ``rho`` is the nonmonotonicity modulus the run is priced for and must
    satisfy rho < eta < 1/L; it is user-supplied, never estimated.  The
    anchor coefficient beta_k = 1/(k+2) and the decaying relaxation
    alpha_k = alpha / (sqrt(k+2) * log(k+3)) are derived schedules.
    """

    eta: float
    rho: float
    k_outer: int
    seed: int = 0
    budget_scale: float = 1.0
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.eta > 0.0):
            raise ParameterError("eta must be positive")
        if not (0.0 <= self.rho < self.eta):
            raise ParameterError(
                f"need 0 <= rho < eta, got rho={self.rho:.6g}, eta={self.eta:.6g}"
            )
        if self.k_outer < 1:
            raise ParameterError("outer budget K must be >= 1")
        if not (0.0 < self.budget_scale <= 1.0):
            raise ParameterError("budget_scale must lie in (0, 1]")

    @property
    def alpha(self) -> float:
        return 1.0 - self.rho / self.eta

    def alpha_schedule(self, k: int) -> float:
        return self.alpha / (math.sqrt(k + 2) * math.log(k + 3))


def _check_budget_args(k: int, eta_l: float) -> None:
    if k < 0:
        raise ParameterError("iteration index must be >= 0")
    if not (0.0 <= eta_l < 1.0):
        raise ParameterError(f"eta*L must lie in [0, 1), got {eta_l:.6g}")


def budget_halpern(k: int, eta_l: float) -> int:
    """Inner budget for the anchored loop:
    ceil(4(1+eta*L)/(1-eta*L) * log(98 sqrt(k+2) log(k+2)))."""
    _check_budget_args(k, eta_l)
    return math.ceil(
        4.0 * (1.0 + eta_l) / (1.0 - eta_l) * math.log(98.0 * math.sqrt(k + 2) * math.log(k + 2))
    )


def budget_km(k: int, eta_l: float) -> int:
    """Inner budget for the averaged loop:
    ceil(4(1+eta*L)/(1-eta*L) * log(8(k+1) log^2(k+2)))."""
    _check_budget_args(k, eta_l)
    return math.ceil(
        4.0 * (1.0 + eta_l) / (1.0 - eta_l) * math.log(8.0 * (k + 1) * math.log(k + 2) ** 2)
    )


def budget_halpern_stochastic(k: int, eta_l: float) -> int:
    """Inner budget for the stochastic anchored loop:
    ceil(1734 (k+2)^3 log^2(k+2) / (1-eta*L)^2)."""
    _check_budget_args(k, eta_l)
    return math.ceil(1734.0 * (k + 2) ** 3 * math.log(k + 2) ** 2 / (1.0 - eta_l) ** 2)


def budgets_mlmc_km(k: int, eta_l: float):
    """Budgets for the randomized-level averaged loop.

    Returns (alpha_k / alpha, N_k, M_k) with
    N_k = ceil(96 (1-eta*L)^-2 / min{ratio/(120(k+1)), 1/120}) and
    M_k = ceil(672 * 120 * log2(N_k) / (1-eta*L)^2).
    """
    _check_budget_args(k, eta_l)
    ratio = 1.0 / (math.sqrt(k + 2) * math.log(k + 3))
    pinch = min(ratio / (120.0 * (k + 1)), 1.0 / 120.0)
    n = math.ceil(96.0 * (1.0 - eta_l) ** -2 / pinch)
    m = math.ceil(672.0 * 120.0 * math.log2(n) / (1.0 - eta_l) ** 2)
    return ratio, n, m


def _scaled(n: int, scale: float, floor: int = 1) -> int:
    return max(floor, math.ceil(scale * n))


def _initial_point(problem: InclusionProblem, params: OuterParams) -> np.ndarray:
    if params.x0 is None:
        return np.zeros(problem.dim)
    return as_point(params.x0, problem.dim, "x0")


def _validate(problem: InclusionProblem, params: OuterParams, kinds, need_sampler=False):
    if problem.assumption.kind not in kinds:
        raise ParameterError(
            f"solver requires assumption in {kinds}, problem is tagged "
            f"{problem.assumption.kind!r}"
        )
    lip = problem.f.lipschitz
    ceiling = math.inf if lip == 0.0 else 1.0 / lip
    if not (params.eta < ceiling):
        raise ParameterError(
            f"eta = {params.eta:.6g} must be < 1/L = {ceiling:.6g}"
        )
    if need_sampler and problem.f.sampler is None:
        raise ParameterError("stochastic solver requires a sampler on F")


def _echo(problem, params, algorithm, seed):
    return {
        "algorithm": algorithm,
        "eta": params.eta,
        "rho": params.rho,
        "alpha": params.alpha,
        "k_outer": params.k_outer,
        "seed": seed,
        "budget_scale": params.budget_scale,
        "lipschitz": problem.f.lipschitz,
        "assumption": problem.assumption.kind,
        "assumption_rho": problem.assumption.rho,
        "dim": problem.dim,
        "noise_variance_bound": problem.f.variance_bound,
    }


def _finish_report(report: SolveReport, problem: InclusionProblem) -> SolveReport:
    if problem.known_solution is not None:
        sol = problem.known_solution
        for row in report.rows:
            row.dist_to_solution = float(np.linalg.norm(row.iterate - sol))
    if problem.unconstrained:
        # computable output selection: smallest ||F|| over x_0..x_{K-1},
        # ties to the smallest index; not charged to the oracle count
        pts = report.iterates()[:-1]
        norms = np.linalg.norm(problem.f.eval(pts), axis=-1)
        report.best_iterate_index = int(np.argmin(norms))
    return report


def _deterministic_loop(problem, params, budget_fn, update, algorithm):
    eta = params.eta
    eta_l = eta * problem.f.lipschitz
    a = problem.g.scaled(eta)
    x0 = _initial_point(problem, params)
    x = x0.copy()
    rows = []
    cum = 0
    for k in range(params.k_outer):
        t_start = time.perf_counter_ns()
        n = _scaled(budget_fn(k, eta_l), params.budget_scale)
        shifted = make_shifted_map(problem.f, eta, x)
        inner = fbf_run(x, n, a, shifted)
        x = update(k, x0, x, inner.z_out)
        check_finite(x, "outer iterate")
        cum += inner.oracle_calls
        rows.append(
            SolveRow(
                k=k + 1,
                inner_iters=inner.iterations,
                cum_oracle_calls=cum,
                iterate=x.copy(),
                inner_solution=inner.z_out,
                wall_ns=time.perf_counter_ns() - t_start,
            )
        )
    report = SolveReport(
        x0=x0, rows=rows, params_echo=_echo(problem, params, algorithm, params.seed)
    )
    return _finish_report(report, problem)


def halpern_solve(problem: InclusionProblem, params: OuterParams) -> SolveReport:
    """Anchored outer loop for monotone or cohypomonotone problems.

    Updates x_{k+1} = beta_k x_0 + (1-beta_k)((1-alpha) x_k + alpha Jk)
    with beta_k = 1/(k+2) and Jk the inner FBF output at the exact budget.
    At budget_scale 1 the squared residual at x_k is bounded by
    16 ||x_0-x*||^2 / ((eta-rho)^2 (k+1)^2) for every k >= 1.
    """
    _validate(problem, params, ("monotone", "cohypomonotone"))
    alpha = params.alpha

    def update(k, x0, x, j_tilde):
        beta = 1.0 / (k + 2)
        return beta * x0 + (1.0 - beta) * ((1.0 - alpha) * x + alpha * j_tilde)

    return _deterministic_loop(problem, params, budget_halpern, update, "halpern")


def km_solve(problem: InclusionProblem, params: OuterParams) -> SolveReport:
    """Averaged outer loop, valid down to weak-MVI problems.

    Updates x_{k+1} = (1-alpha) x_k + alpha Jk.  At budget_scale 1 the
    average of the first K squared residuals is bounded by
    11 ||x_0-x*||^2 / ((eta-rho)^2 K).
    """
    _validate(problem, params, ("monotone", "cohypomonotone", "weak_mvi"))
    alpha = params.alpha

    def update(k, x0, x, j_tilde):
        return (1.0 - alpha) * x + alpha * j_tilde

    return _deterministic_loop(problem, params, budget_km, update, "km")


def _multi_reports(problem, params, algorithm, seeds, x0, per_seed_rows):
    reports = []
    for s, rows in zip(seeds, per_seed_rows):
        rng_pick = substream(0, algorithm, s, "pick")
        report = SolveReport(
            x0=x0.copy(),
            rows=rows,
            params_echo=_echo(problem, params, algorithm, s),
            random_iterate_index=int(rng_pick.integers(params.k_outer)),
        )
        reports.append(_finish_report(report, problem))
    return reports


def halpern_stochastic_solve_seeds(
    problem: InclusionProblem, params: OuterParams, seeds
) -> list:
    """Stochastic anchored loop for a list of seeds, advanced in lockstep.

    All seeds share the per-step budgets, so their inner trajectories run
    as one stacked batch; each seed's rows are split back out afterwards.
    Results are deterministic for a fixed seed list.
    """
    _validate(problem, params, ("monotone", "cohypomonotone"), need_sampler=True)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ParameterError("need at least one seed")
    eta, alpha = params.eta, params.alpha
    eta_l = eta * problem.f.lipschitz
    a = problem.g.scaled(eta)
    x0 = _initial_point(problem, params)
    xs = np.tile(x0, (len(seeds), 1))
    rows = [[] for _ in seeds]
    cums = [0 for _ in seeds]
    for k in range(params.k_outer):
        t_start = time.perf_counter_ns()
        n = _scaled(budget_halpern_stochastic(k, eta_l), params.budget_scale)
        shifted = make_shifted_map(problem.f, eta, anchor=xs)
        rng = substream(0, "halpern_stochastic", *seeds, k)
        inner = fbf_stochastic_run(xs, n, a, shifted, rng)
        beta = 1.0 / (k + 2)
        xs = beta * x0 + (1.0 - beta) * ((1.0 - alpha) * xs + alpha * inner.z_out)
        check_finite(xs, "outer iterate")
        wall = time.perf_counter_ns() - t_start
        for i in range(len(seeds)):
            cums[i] += inner.oracle_calls
            rows[i].append(
                SolveRow(
                    k=k + 1,
                    inner_iters=inner.iterations,
                    cum_oracle_calls=cums[i],
                    iterate=xs[i].copy(),
                    inner_solution=inner.z_out[i].copy(),
                    wall_ns=wall,
                )
            )
    return _multi_reports(problem, params, "halpern_stochastic", seeds, x0, rows)


def halpern_stochastic_solve(problem: InclusionProblem, params: OuterParams) -> SolveReport:
    """Single-seed stochastic anchored loop (seed taken from ``params``).

    At budget_scale 1 the expected squared residual at x_k is bounded by
    36 (||x_0-x*||^2 + sigma^2) / ((eta-rho)^2 k^2) for k >= 1.
    """
    return halpern_stochastic_solve_seeds(problem, params, [params.seed])[0]


def km_mlmc_solve_seeds(
    problem: InclusionProblem,
    params: OuterParams,
    seeds,
    m_override: Optional[int] = None,
) -> list:
    """Randomized-level averaged loop for a list of seeds, in lockstep.

    At outer step k every seed draws M_k estimator levels; draws sharing a
    level advance as one stacked trajectory batch across seeds, which keeps
    the expected cost per step logarithmic without changing any draw's
    distribution.  ``m_override`` forces the per-step draw count and exists
    for degeneracy tests only.
    """
    _validate(problem, params, ("monotone", "cohypomonotone", "weak_mvi"), need_sampler=True)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ParameterError("need at least one seed")
    eta, alpha = params.eta, params.alpha
    eta_l = eta * problem.f.lipschitz
    a = problem.g.scaled(eta)
    x0 = _initial_point(problem, params)
    n_seeds = len(seeds)
    xs = np.tile(x0, (n_seeds, 1))
    rows = [[] for _ in seeds]
    cums = [0 for _ in seeds]
    for k in range(params.k_outer):
        t_start = time.perf_counter_ns()
        ratio, n_raw, m_raw = budgets_mlmc_km(k, eta_l)
        n_budget = _scaled(n_raw, params.budget_scale, floor=2)
        m_draws = m_override if m_override is not None else _scaled(m_raw, params.budget_scale)
        alpha_k = alpha * ratio
        cap = max_level(n_budget)
        rng = substream(0, "km_mlmc", *seeds, k)
        levels = rng.geometric(0.5, size=(n_seeds, m_draws)).astype(np.int64)
        outputs = np.empty((n_seeds, m_draws, problem.dim))
        iters_by_seed = np.zeros(n_seeds, dtype=np.int64)
        for level in range(1, cap + 1):
            mask = levels == level
            seed_idx, _ = np.nonzero(mask)
            if seed_idx.size == 0:
                continue
            starts = xs[seed_idx]
            shifted = make_shifted_map(problem.f, eta, anchor=starts)
            y0, y_lo, y_hi, iters = coupled_level_run(starts, level, a, shifted, rng)
            outputs[mask] = y0 + (2.0**level) * (y_hi - y_lo)
            iters_by_seed += mask.sum(axis=1) * iters
        mask = levels > cap
        seed_idx, _ = np.nonzero(mask)
        if seed_idx.size:
            starts = xs[seed_idx]
            shifted = make_shifted_map(problem.f, eta, anchor=starts)
            run = fbf_stochastic_run(starts, 1, a, shifted, rng)
            outputs[mask] = run.z_out
            iters_by_seed += mask.sum(axis=1)
        j_tilde = outputs.mean(axis=1)
        xs = (1.0 - alpha_k) * xs + alpha_k * j_tilde
        check_finite(xs, "outer iterate")
        wall = time.perf_counter_ns() - t_start
        for i in range(n_seeds):
            cums[i] += 2 * int(iters_by_seed[i])
            rows[i].append(
                SolveRow(
                    k=k + 1,
                    inner_iters=int(iters_by_seed[i]),
                    cum_oracle_calls=cums[i],
                    iterate=xs[i].copy(),
                    inner_solution=j_tilde[i].copy(),
                    wall_ns=wall,
                )
            )
    return _multi_reports(problem, params, "km_mlmc", seeds, x0, rows)


def km_mlmc_solve(
    problem: InclusionProblem,
    params: OuterParams,
    m_override: Optional[int] = None,
) -> SolveReport:
    """Single-seed randomized-level averaged loop.

    Uses the decaying relaxation alpha_k = alpha / (sqrt(k+2) log(k+3)).
    At budget_scale 1 a uniformly random iterate satisfies
    E||x - J(x)||^2 <= 64 (||x_0-x*||^2 + alpha^2 sigma^2) log(K+3)
    / (alpha^2 sqrt(K)).
    """
    return km_mlmc_solve_seeds(problem, params, [params.seed], m_override=m_override)[0]
