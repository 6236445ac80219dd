"""Inner solvers that approximate the resolvent J_{eta(F+G)}(xbar).

Three routes: deterministic forward-backward-forward splitting with fixed
step 1/(2*L_B); its stochastic variant with the decaying schedule
tau_t = 2/((t+1)*mu + 6*L_B); and a randomized-level telescoping estimator on
top of the stochastic variant that trades a small bias for logarithmic
expected cost.

Every function accepts a single start point (d,) or a stack (m, d) of
independent trajectories; the stochastic noise for a stack is drawn batchwise
from the supplied generator, one call per operator evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ParameterError, ProxOperator, ShiftedMap, check_finite, fbf_oracle_cost


@dataclass
class InnerSolveResult:
    """Output of one inner solve.

    ``oracle_calls`` is exactly 2 * iterations for every FBF variant: two
    forward evaluations and one resolvent per iteration, charged per the
    two-calls-per-step convention.  ``levels_drawn`` is set only by the
    randomized-level estimator.
    """

    z_out: np.ndarray
    oracle_calls: int
    iterations: int
    levels_drawn: Optional[list] = None


def fbf_run(z0: np.ndarray, n_iters: int, a: ProxOperator, b: ShiftedMap) -> InnerSolveResult:
    """Deterministic FBF: n_iters steps from z0 with tau = 1/(2*L_B).

    Each step is z+ = J_{tau A}(z - tau B(z)) followed by the forward
    correction z+ + tau*(B(z) - B(z+)).  With mu > 0 the squared distance to
    the fixed point contracts by at least (1 - mu/(2*L_B)) per step, so
    ceil((4 L_B / mu) * log(dist/zeta)) steps reach accuracy zeta.
    N = 0 is legal and returns z0 unchanged.
    """
    if n_iters < 0:
        raise ParameterError("iteration count must be >= 0")
    if not (b.mu > 0.0):
        raise ParameterError("shifted map must be strongly monotone (mu > 0)")
    tau = 1.0 / (2.0 * b.lip)
    z = np.array(z0, dtype=np.float64)
    for _ in range(n_iters):
        bz = b(z)
        zh = a.resolve(tau, z - tau * bz)
        z = zh + tau * (bz - b(zh))
    check_finite(z, "inner iterate")
    return InnerSolveResult(z, fbf_oracle_cost(n_iters), n_iters)


def stochastic_step_size(t: int, mu: float, lip: float) -> float:
    """Decaying schedule tau_t = 2 / ((t+1)*mu + 6*L_B)."""
    return 2.0 / ((t + 1) * mu + 6.0 * lip)


def fbf_stochastic_run(
    z0: np.ndarray,
    n_iters: int,
    a: ProxOperator,
    b: ShiftedMap,
    rng: np.random.Generator,
    snapshots: Optional[set] = None,
) -> InnerSolveResult:
    """Stochastic FBF with fresh unbiased samples of B at both half-steps.

    The last iterate satisfies E||z_N - z*||^2 <= (6*(L_B/mu)*||z0 - z*||^2
    + 48*sigma^2/mu^2) / (N + 6*L_B/mu) where sigma^2 bounds the sample
    variance of B.  Bitwise deterministic given the generator state.

    ``snapshots`` optionally collects copies of the iterate after selected
    step counts; the dict of snapshots is stashed on the result as
    ``result.snapshots`` (used by the level-coupled estimator).
    """
    if n_iters < 0:
        raise ParameterError("iteration count must be >= 0")
    if not b.has_sampler:
        raise ParameterError("stochastic inner solve requires a sampler on F")
    if not (b.mu > 0.0):
        raise ParameterError("shifted map must be strongly monotone (mu > 0)")
    mu, lip = b.mu, b.lip
    taken = {}
    z = np.array(z0, dtype=np.float64)
    for t in range(n_iters):
        tau = stochastic_step_size(t, mu, lip)
        bz = b.sample(z, rng)
        zh = a.resolve(tau, z - tau * bz)
        z = zh + tau * (bz - b.sample(zh, rng))
        if snapshots and (t + 1) in snapshots:
            taken[t + 1] = z.copy()
    check_finite(z, "inner iterate")
    result = InnerSolveResult(z, fbf_oracle_cost(n_iters), n_iters)
    result.snapshots = taken
    return result


def max_level(n_budget: int) -> int:
    """Largest i with 2^i <= n_budget."""
    if n_budget < 2:
        raise ParameterError("estimator budget must be >= 2")
    return int(math.floor(math.log2(n_budget)))


def coupled_level_run(z0, level, a, b, rng):
    """One trajectory of 2^level stochastic-FBF steps with the telescope's
    three coupled reads: the iterates after 1, 2^(level-1) and 2^level steps.

    Returns ``(y0, y_lo, y_hi, iterations)``.
    """
    snaps = {1, 2 ** (level - 1), 2**level}
    run = fbf_stochastic_run(z0, 2**level, a, b, rng, snapshots=snaps)
    y0 = run.snapshots[1]
    y_lo = run.snapshots[2 ** (level - 1)]
    y_hi = run.snapshots[2**level]
    return y0, y_lo, y_hi, run.iterations


def mlmc_fbf(
    z0: np.ndarray,
    n_budget: int,
    a: ProxOperator,
    b: ShiftedMap,
    rng: np.random.Generator,
) -> InnerSolveResult:
    """One randomized-level draw of the telescoping resolvent estimator.

    Draws I with P(I = i) = 2^-i for i >= 1.  If 2^I <= n_budget, returns
    y^0 + 2^I (y^I - y^{I-1}) where y^i is the stochastic-FBF iterate after
    2^i steps; otherwise returns y^0.  Levels are coupled: y^{I-1} is the
    midpoint iterate of the same trajectory that produces y^I, which keeps
    the level differences square-summable without changing any marginal.
    """
    cap = max_level(n_budget)
    level = int(rng.geometric(0.5))
    if level <= cap:
        y0, y_lo, y_hi, iters = coupled_level_run(z0, level, a, b, rng)
        out = y0 + (2.0**level) * (y_hi - y_lo)
    else:
        run = fbf_stochastic_run(z0, 1, a, b, rng)
        out, iters = run.z_out, 1
    check_finite(out, "estimator output")
    return InnerSolveResult(out, fbf_oracle_cost(iters), iters, levels_drawn=[level])


def mlmc_average(
    z0: np.ndarray,
    n_budget: int,
    n_draws: int,
    a: ProxOperator,
    b: ShiftedMap,
    rng: np.random.Generator,
) -> InnerSolveResult:
    """Mean of ``n_draws`` independent estimator draws, oracle calls summed.

    Draws sharing a level advance as one batched trajectory stack (their
    noise comes from the same generator, sliced row-wise, so the draws stay
    independent); outputs land in a draw-indexed array and are reduced in
    that fixed order, making the mean reproducible for a given generator.
    """
    if n_draws < 1:
        raise ParameterError("draw count must be >= 1")
    z0 = np.asarray(z0, dtype=np.float64)
    if z0.ndim != 1:
        raise ParameterError("averaged estimator expects a single start point")
    cap = max_level(n_budget)
    levels = rng.geometric(0.5, size=n_draws).astype(np.int64)
    outputs = np.empty((n_draws, z0.shape[0]), dtype=np.float64)
    iters_total = 0
    for level in range(1, cap + 1):
        idx = np.nonzero(levels == level)[0]
        if idx.size == 0:
            continue
        starts = np.broadcast_to(z0, (idx.size, z0.shape[0]))
        y0, y_lo, y_hi, iters = coupled_level_run(starts, level, a, b, rng)
        outputs[idx] = y0 + (2.0**level) * (y_hi - y_lo)
        iters_total += iters * idx.size
    idx = np.nonzero(levels > cap)[0]
    if idx.size:
        starts = np.broadcast_to(z0, (idx.size, z0.shape[0]))
        run = fbf_stochastic_run(starts, 1, a, b, rng)
        outputs[idx] = run.z_out
        iters_total += idx.size
    mean = outputs.mean(axis=0)
    check_finite(mean, "estimator mean")
    return InnerSolveResult(
        mean, fbf_oracle_cost(iters_total), iters_total, levels_drawn=levels.tolist()
    )


def mlmc_enumerate_mean(
    z0: np.ndarray,
    n_budget: int,
    a: ProxOperator,
    b: ShiftedMap,
    rng: np.random.Generator,
):
    """Probability-weighted mean over every level outcome (test oracle).

    Replaces the random level draw by exhaustive enumeration: level i gets
    weight 2^-i for i = 1..max_level, and the event 2^I > n_budget gets the
    tail weight 2^-max_level with output y^0.  All levels are read off one
    shared trajectory, so for a noiseless sampler the returned mean is the
    exact estimator expectation and the support lists every reachable output.

    Returns ``(mean, support)`` with support entries ``(probability, y)``.
    """
    cap = max_level(n_budget)
    snaps = {2**i for i in range(cap + 1)}
    run = fbf_stochastic_run(z0, 2**cap, a, b, rng, snapshots=snaps)
    y = [run.snapshots[2**i] for i in range(cap + 1)]
    support = []
    for i in range(1, cap + 1):
        support.append((2.0**-i, y[0] + (2.0**i) * (y[i] - y[i - 1])))
    support.append((2.0**-cap, y[0]))
    mean = sum(p * out for p, out in support)
    return mean, support
