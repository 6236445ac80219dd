"""Ground-truth residuals, optimality certificates and operator property checks.

The fixed-point residual ||x - J_{eta(F+G)}(x)|| / eta vanishes exactly at
solutions, and (x - xhat)/eta is an element of (F+G)(xhat) at the resolvent
point xhat, which converts any residual value into a distance-to-inclusion
certificate.  Reference resolvents come from the direct affine solve when
available and from a budgeted inner solve otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    InclusionProblem,
    ParameterError,
    ProxOperator,
    SolveReport,
    make_shifted_map,
)
from .inner import fbf_run
from .prox import resolve_affine
from .rng import substream

REFERENCE_TOL = 1e-12
_WARMUP_ITERS = 32


@dataclass
class PropertyReport:
    """Outcome of one sampled operator-property check."""

    name: str
    samples: int
    worst_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": self.samples,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def reference_resolvent(
    problem: InclusionProblem, x: np.ndarray, eta: float, tol: float = REFERENCE_TOL
):
    """Approximate J_{eta(F+G)}(x) to within ``tol`` (exact for affine, G=0).

    The iterative path runs a short warmup from x, uses the measured
    progress to bound the remaining distance through the contraction factor,
    and then runs the budget that the linear rate prescribes for ``tol``.
    Accepts a single point or a stack of points.
    """
    ceiling = math.inf if problem.f.lipschitz == 0.0 else 1.0 / problem.f.lipschitz
    if not (0.0 < eta < ceiling):
        raise ParameterError("eta must lie in (0, 1/L) for the resolvent to be tractable")
    x = np.asarray(x, dtype=np.float64)
    if problem.has_direct_resolvent:
        m, b = problem.affine_part
        return resolve_affine(m, b, eta, x), 0.0
    shifted = make_shifted_map(problem.f, eta, anchor=x)
    a = problem.g.scaled(eta)
    warm = fbf_run(x, _WARMUP_ITERS, a, shifted)
    progress = np.linalg.norm(x - warm.z_out, axis=-1)
    # ||z_w - z*|| <= q/(1-q) * ||x - z_w|| with q the warmup contraction
    q = (1.0 - shifted.mu / (2.0 * shifted.lip)) ** (_WARMUP_ITERS / 2.0)
    remaining = float(np.max(progress)) * q / (1.0 - q)
    if remaining > tol:
        extra = math.ceil(4.0 * shifted.lip / shifted.mu * math.log(remaining / tol))
        refined = fbf_run(warm.z_out, extra, a, shifted)
        return refined.z_out, tol
    return warm.z_out, tol


def residual(
    problem: InclusionProblem, x: np.ndarray, eta: float, tol: float = REFERENCE_TOL
):
    """Fixed-point residual ||x - J_{eta(F+G)}(x)|| / eta.

    The reported value carries +-tol/eta uncertainty from the reference
    resolvent.  Vectorized over stacked points.
    """
    xhat, _ = reference_resolvent(problem, x, eta, tol)
    out = np.linalg.norm(np.asarray(x, dtype=np.float64) - xhat, axis=-1) / eta
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class Certificate:
    """Resolvent point with its distance-to-inclusion bound.

    ``bound`` dominates dist(0, (F+G)(point)); for unconstrained problems
    ``f_norm`` is the exact ||F(point)||, which must never exceed the bound.
    """

    point: np.ndarray
    bound: float
    f_norm: Optional[float] = None


def extract_certificate(
    problem: InclusionProblem, x: np.ndarray, eta: float, tol: float = REFERENCE_TOL
) -> Certificate:
    """Certificate at xhat ~= J_{eta(F+G)}(x): (x - xhat)/eta lies in
    (F+G)(xhat), so ||x - xhat||/eta + tol/eta bounds dist(0, (F+G)(xhat))."""
    xhat, err = reference_resolvent(problem, x, eta, tol)
    bound = float(np.linalg.norm(np.asarray(x) - xhat)) / eta + (err if err else tol) / eta
    f_norm = None
    if problem.unconstrained:
        f_norm = float(np.linalg.norm(problem.f.eval(xhat)))
    return Certificate(point=xhat, bound=bound, f_norm=f_norm)


def _sample_points(problem, rng, count, radius=10.0):
    if problem.sample_feasible is not None:
        return problem.sample_feasible(rng, count)
    center = problem.known_solution
    pts = radius * rng.standard_normal((count, problem.dim)) / math.sqrt(problem.dim)
    return pts if center is None else pts + center


def check_conic_nonexpansive(
    problem: InclusionProblem,
    eta: float,
    rho: float,
    n_samples: int,
    rng: np.random.Generator,
    tol: float = 1e-8,
) -> PropertyReport:
    """Sampled conic nonexpansiveness of the resolvent at modulus 1/(2*alpha).

    With alpha = 1 - rho/eta, checks ||(1-2a)(x-y) + 2a(Jx-Jy)|| <= ||x-y||
    on random pairs; for problems tagged only against a solution the quasi
    variant fixes y at the stored solution.  At rho = 0 this reduces to
    nonexpansiveness of the reflected resolvent 2J - Id.
    """
    if not (rho < eta):
        raise ParameterError("conic check needs rho < eta")
    a = 1.0 - rho / eta
    xs = _sample_points(problem, rng, n_samples)
    if problem.assumption.pairwise:
        ys = _sample_points(problem, rng, n_samples)
        name = "conic_nonexpansive"
    else:
        if problem.known_solution is None:
            raise ParameterError("quasi variant needs a stored solution")
        ys = np.broadcast_to(problem.known_solution, xs.shape)
        name = "conic_quasi_nonexpansive"
    jx, _ = reference_resolvent(problem, xs, eta, REFERENCE_TOL)
    jy, _ = reference_resolvent(problem, ys, eta, REFERENCE_TOL)
    lhs = np.linalg.norm((1.0 - 2.0 * a) * (xs - ys) + 2.0 * a * (jx - jy), axis=-1)
    worst = float(np.max(lhs - np.linalg.norm(xs - ys, axis=-1)))
    return PropertyReport(name, n_samples, worst, tol)


def check_cocoercive_identity_minus_j(
    problem: InclusionProblem,
    eta: float,
    rho: float,
    n_samples: int,
    rng: np.random.Generator,
    tol: float = 1e-8,
) -> PropertyReport:
    """Sampled (1 - rho/eta)-cocoercivity of R = Id - J_{eta(F+G)}.

    Checks <R(x)-R(y), x-y> >= alpha ||R(x)-R(y)||^2 on random pairs, or the
    star variant against the stored solution where only that holds.
    """
    if not (rho < eta):
        raise ParameterError("cocoercivity check needs rho < eta")
    a = 1.0 - rho / eta
    xs = _sample_points(problem, rng, n_samples)
    if problem.assumption.pairwise:
        ys = _sample_points(problem, rng, n_samples)
        name = "cocoercive_identity_minus_resolvent"
    else:
        if problem.known_solution is None:
            raise ParameterError("star variant needs a stored solution")
        ys = np.broadcast_to(problem.known_solution, xs.shape)
        name = "star_cocoercive_identity_minus_resolvent"
    jx, _ = reference_resolvent(problem, xs, eta, REFERENCE_TOL)
    jy, _ = reference_resolvent(problem, ys, eta, REFERENCE_TOL)
    rx, ry = xs - jx, ys - jy
    gap = a * np.einsum("ij,ij->i", rx - ry, rx - ry) - np.einsum(
        "ij,ij->i", rx - ry, xs - ys
    )
    return PropertyReport(name, n_samples, float(np.max(gap)), tol)


def check_shifted_map_regularity(
    problem: InclusionProblem,
    eta: float,
    n_samples: int,
    rng: np.random.Generator,
    tol: float = 1e-10,
) -> PropertyReport:
    """Sampled strong monotonicity and Lipschitz bounds of Id + eta*F.

    Both violations are normalized by the pair distance (squared distance
    for monotonicity) so the tolerance reads as a relative slack.
    """
    shifted = make_shifted_map(problem.f, eta, np.zeros(problem.dim))
    xs = _sample_points(problem, rng, n_samples)
    ys = _sample_points(problem, rng, n_samples)
    keep = np.linalg.norm(xs - ys, axis=-1) > 1e-12
    xs, ys = xs[keep], ys[keep]
    diff = xs - ys
    bdiff = shifted(xs) - shifted(ys)
    d2 = np.einsum("ij,ij->i", diff, diff)
    mono = (shifted.mu * d2 - np.einsum("ij,ij->i", bdiff, diff)) / d2
    lip = (np.linalg.norm(bdiff, axis=-1) - shifted.lip * np.sqrt(d2)) / np.sqrt(d2)
    worst = float(max(np.max(mono), np.max(lip)))
    return PropertyReport("shifted_map_regularity", int(keep.sum()), worst, tol)


def check_prox_firmly_nonexpansive(
    g: ProxOperator,
    dim: int,
    n_samples: int,
    rng: np.random.Generator,
    gamma: float = 1.0,
    tol: float = 1e-10,
) -> PropertyReport:
    """Sampled firm nonexpansiveness ||Jx-Jy||^2 <= <Jx-Jy, x-y>."""
    xs = 5.0 * rng.standard_normal((n_samples, dim))
    ys = 5.0 * rng.standard_normal((n_samples, dim))
    jx = g.resolve(gamma, xs)
    jy = g.resolve(gamma, ys)
    jd = jx - jy
    gap = np.einsum("ij,ij->i", jd, jd) - np.einsum("ij,ij->i", jd, xs - ys)
    return PropertyReport("prox_firmly_nonexpansive", n_samples, float(np.max(gap)), tol)


def estimate_weak_mvi_rho(
    problem: InclusionProblem,
    x_star: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
    radius: Optional[float] = None,
    eta_small: Optional[float] = None,
    tol: float = REFERENCE_TOL,
) -> float:
    """Sampled estimate of the weak-MVI modulus against ``x_star``.

    Returns max(0, sup -<u, p - x_star>/||u||^2) over sampled points, where
    for unconstrained problems u = F(x) at p = x, and otherwise
    u = (x - xhat)/eta_small at p = xhat with xhat the reference resolvent
    at a small step, which places u inside (F+G)(xhat).  A sampling estimate
    by construction, not a certificate.  Points with ||u|| below 1e-14 are
    skipped.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    if problem.unconstrained:
        if radius is None:
            radius = 10.0 * (1.0 + float(np.linalg.norm(x_star)))
        pts = x_star + radius * rng.standard_normal((n_samples, problem.dim)) / math.sqrt(
            problem.dim
        )
        u = problem.f.eval(pts)
        at = pts
    else:
        pts = problem.sample_feasible(rng, n_samples)
        if eta_small is None:
            eta_small = 0.02 / problem.f.lipschitz
        xhat, _ = reference_resolvent(problem, pts, eta_small, tol)
        u = (pts - xhat) / eta_small
        at = xhat
    norms2 = np.einsum("ij,ij->i", u, u)
    keep = np.sqrt(norms2) > 1e-14
    if not np.any(keep):
        return 0.0
    vals = -np.einsum("ij,ij->i", u[keep], at[keep] - x_star) / norms2[keep]
    return max(0.0, float(np.max(vals)))


def default_eta(problem: InclusionProblem) -> float:
    """A step inside (rho, 1/L), midway when rho > 0."""
    lip = problem.f.lipschitz
    if lip == 0.0:
        return 1.0
    rho = problem.assumption.rho
    return (rho + 1.0 / lip) / 2.0 if rho > 0.0 else 0.5 / lip


def property_suite(
    problem: InclusionProblem,
    eta: Optional[float] = None,
    n_samples: int = 2000,
    seed: int = 0,
) -> list:
    """All property checks for one problem, with fresh substreams per check."""
    if eta is None:
        eta = default_eta(problem)
    rho = problem.assumption.rho
    reports = [
        check_shifted_map_regularity(problem, eta, n_samples, substream(seed, "regular")),
        check_prox_firmly_nonexpansive(
            problem.g, problem.dim, n_samples, substream(seed, "firm"), gamma=eta
        ),
        check_conic_nonexpansive(problem, eta, rho, n_samples, substream(seed, "conic")),
        check_cocoercive_identity_minus_j(
            problem, eta, rho, n_samples, substream(seed, "cocoercive")
        ),
    ]
    return reports


def attach_residuals(
    report: SolveReport,
    problem: InclusionProblem,
    eta: float,
    tol: float = REFERENCE_TOL,
) -> SolveReport:
    """Fill residual estimates for every recorded iterate, in one batch."""
    pts = report.iterates()
    values = residual(problem, pts, eta, tol)
    report.initial_residual = float(values[0])
    for row, val in zip(report.rows, values[1:]):
        row.residual_estimate = float(val)
    return report


def best_iterate_by_residual(
    report: SolveReport,
    problem: InclusionProblem,
    eta: float,
    tol: float = REFERENCE_TOL,
) -> int:
    """Index of the smallest reference residual over x_0..x_{K-1}.

    For constrained problems this selection needs the reference resolvent,
    so it lives here as a verification-side helper; ties break toward the
    smallest index.
    """
    pts = report.iterates()[:-1]
    values = residual(problem, pts, eta, tol)
    return int(np.argmin(values))
