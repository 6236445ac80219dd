"""Domain types for structured inclusion problems 0 in (F+G)(x).

F is a single-valued L-Lipschitz map, G is maximally monotone and only
reachable through its resolvent.  Every inner solve works on the shifted map
B(z) = (Id + eta*F)(z) - xbar, which is (1 - eta*L)-strongly monotone and
(1 + eta*L)-Lipschitz whenever eta < 1/L; that pair of constants is what all
inner-iteration budgets are priced against.

All maps are vectorized: ``eval``/``resolve``/``sampler`` accept arrays whose
last axis has length ``dim`` and operate independently over leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class ComonoError(Exception):
    """Base class for library errors."""


class ParameterError(ComonoError):
    """A parameter or configuration violates a precondition."""


class DimensionMismatch(ParameterError):
    """Input dimension does not match the problem dimension."""


class NumericsError(ComonoError):
    """A non-finite value appeared where the contract requires finite data."""


class SingularSystemError(NumericsError):
    """A direct linear solve failed; carries the offending pivot magnitude."""

    def __init__(self, message: str, pivot_magnitude: float):
        super().__init__(f"{message} (pivot magnitude {pivot_magnitude:.3e})")
        self.pivot_magnitude = pivot_magnitude


def as_point(x, dim: Optional[int] = None, name: str = "point") -> np.ndarray:
    """Validate and return ``x`` as a finite float64 vector."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"{name} contains non-finite entries")
    return arr


def check_finite(arr: np.ndarray, what: str = "value") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite {what} detected")
    return arr


def _frozen_array(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def fbf_oracle_cost(iterations: int) -> int:
    """First-order oracle calls charged to ``iterations`` FBF steps.

    One oracle call is one F evaluation plus one G resolvent; an FBF step
    makes two F evaluations and one resolvent, charged as 2 calls.
    """
    return 2 * int(iterations)


@dataclass(frozen=True)
class Assumption:
    """Structural tag: monotone, cohypomonotone(rho) or weak MVI(rho)."""

    kind: str
    rho: float = 0.0

    _KINDS = ("monotone", "cohypomonotone", "weak_mvi")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ParameterError(f"unknown assumption kind {self.kind!r}")
        if self.rho < 0.0:
            raise ParameterError("rho must be nonnegative")
        if self.kind == "monotone" and self.rho != 0.0:
            raise ParameterError("monotone assumption carries rho = 0")

    @property
    def pairwise(self) -> bool:
        """True when the inequality holds between arbitrary pairs, not just
        against a solution."""
        return self.kind in ("monotone", "cohypomonotone")


MONOTONE = Assumption("monotone")


def cohypomonotone(rho: float) -> Assumption:
    return Assumption("cohypomonotone", float(rho))


def weak_mvi(rho: float) -> Assumption:
    return Assumption("weak_mvi", float(rho))


@dataclass(frozen=True)
class SmoothMap:
    """Single-valued Lipschitz operator F, optionally with an unbiased sampler.

    ``eval`` must be a pure function of its input.  ``sampler(x, rng)``, when
    present, returns an unbiased draw of ``eval(x)`` whose total variance
    E||sample - eval(x)||^2 is bounded by ``variance_bound``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    dim: int
    sampler: Optional[Callable[[np.ndarray, np.random.Generator], np.ndarray]] = None
    variance_bound: Optional[float] = None

    def __post_init__(self):
        # L = 0 is legal and means F is constant (e.g. the zero operator)
        if not (self.lipschitz >= 0.0):
            raise ParameterError("Lipschitz constant must be nonnegative")
        if self.variance_bound is not None and self.variance_bound < 0.0:
            raise ParameterError("variance bound must be nonnegative")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.eval(x)

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is None:
            raise ParameterError("operator has no stochastic sampler")
        return self.sampler(x, rng)


@dataclass(frozen=True)
class ProxOperator:
    """Maximally monotone G exposed through its resolvent x -> J_{gamma G}(x).

    ``resolve(gamma, x)`` must implement (Id + gamma*G)^{-1} for any step
    gamma > 0.  ``is_identity`` marks G = 0, which unlocks closed-form
    reference resolvents and the ||F(x)|| optimality certificate.
    """

    resolve: Callable[[float, np.ndarray], np.ndarray]
    is_identity: bool = False

    def __call__(self, gamma: float, x: np.ndarray) -> np.ndarray:
        if gamma <= 0.0:
            raise ParameterError("resolvent step must be positive")
        return self.resolve(gamma, x)

    def scaled(self, factor: float) -> "ProxOperator":
        """Resolvent of the scaled operator ``factor * G``."""
        if factor <= 0.0:
            raise ParameterError("scaling factor must be positive")
        if self.is_identity:
            return self
        inner = self.resolve
        return ProxOperator(lambda g, x: inner(g * factor, x), is_identity=False)


@dataclass(frozen=True)
class ShiftedMap:
    """The inner-solve operator B(z) = (Id + eta*F)(z) - anchor.

    Carries mu = 1 - eta*L (strong monotonicity) and lip = 1 + eta*L
    (Lipschitz constant).  ``anchor`` is a single point or a stack of points;
    stacked anchors let one batched inner solve advance many trajectories.
    """

    anchor: np.ndarray
    eta: float
    underlying: SmoothMap
    mu: float
    lip: float

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return z + self.eta * self.underlying.eval(z) - self.anchor

    def sample(self, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return z + self.eta * self.underlying.sample(z, rng) - self.anchor

    @property
    def has_sampler(self) -> bool:
        return self.underlying.sampler is not None

    @property
    def variance_bound(self) -> Optional[float]:
        # noise enters through eta * (F_sample - F)
        vb = self.underlying.variance_bound
        return None if vb is None else self.eta**2 * vb


def make_shifted_map(f: SmoothMap, eta: float, anchor: np.ndarray) -> ShiftedMap:
    """Build B(z) = z + eta*F(z) - anchor, requiring 0 < eta < 1/L.

    Rejects eta >= 1/L: strong monotonicity of B is lost there and every
    inner-solver guarantee voids with it.
    """
    if not (eta > 0.0):
        raise ParameterError("eta must be positive")
    eta_l = eta * f.lipschitz
    if eta_l >= 1.0:
        raise ParameterError(
            f"eta*L = {eta_l:.6g} must be < 1; the shifted map would not be "
            "strongly monotone"
        )
    anchor = np.asarray(anchor, dtype=np.float64)
    if anchor.shape[-1] != f.dim:
        raise DimensionMismatch(
            f"anchor dimension {anchor.shape[-1]} does not match operator dimension {f.dim}"
        )
    check_finite(anchor, "anchor")
    return ShiftedMap(anchor=anchor, eta=eta, underlying=f, mu=1.0 - eta_l, lip=1.0 + eta_l)


@dataclass(frozen=True)
class InclusionProblem:
    """Problem data for 0 in (F+G)(x) with a structural assumption tag.

    ``affine_part`` holds (M, b) when F(x) = Mx + b, enabling the direct
    reference resolvent for unconstrained affine problems.
    ``sample_feasible(rng, n)`` draws feasible points for constrained
    problems; verification sampling uses it when present.
    """

    f: SmoothMap
    g: ProxOperator
    assumption: Assumption
    dim: int
    known_solution: Optional[np.ndarray] = None
    affine_part: Optional[tuple] = None
    sample_feasible: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def __post_init__(self):
        if self.dim != self.f.dim:
            raise DimensionMismatch("problem and operator dimensions disagree")
        ceiling = math.inf if self.f.lipschitz == 0.0 else 1.0 / self.f.lipschitz
        if self.assumption.rho >= ceiling:
            raise ParameterError(
                f"rho = {self.assumption.rho:.6g} is outside the admissible "
                f"range [0, 1/L) with L = {self.f.lipschitz:.6g}"
            )
        if self.known_solution is not None:
            sol = as_point(self.known_solution, self.dim, "known_solution")
            object.__setattr__(self, "known_solution", _frozen_array(sol))
        if self.affine_part is not None:
            m, b = self.affine_part
            m = _frozen_array(m)
            b = _frozen_array(b)
            if m.shape != (self.dim, self.dim) or b.shape != (self.dim,):
                raise DimensionMismatch("affine part shapes do not match dimension")
            object.__setattr__(self, "affine_part", (m, b))

    @property
    def unconstrained(self) -> bool:
        return self.g.is_identity

    @property
    def has_direct_resolvent(self) -> bool:
        return self.affine_part is not None and self.g.is_identity


@dataclass
class SolveRow:
    """One outer iteration of a solve trace.

    ``iterate`` is x_k; ``inner_solution`` is the inexact resolvent output
    that produced it from x_{k-1}.  ``residual_estimate`` is filled in by the
    verification layer, never by the solver (reference residuals cost oracle
    calls that must not pollute the run's accounting).
    """

    k: int
    inner_iters: int
    cum_oracle_calls: int
    iterate: np.ndarray
    inner_solution: np.ndarray
    residual_estimate: Optional[float] = None
    dist_to_solution: Optional[float] = None
    wall_ns: int = 0


@dataclass
class SolveReport:
    """Trace of one outer-loop run: rows for k = 1..K plus the start point."""

    x0: np.ndarray
    rows: list = field(default_factory=list)
    params_echo: dict = field(default_factory=dict)
    initial_residual: Optional[float] = None
    best_iterate_index: Optional[int] = None
    random_iterate_index: Optional[int] = None

    def iterates(self) -> np.ndarray:
        """All iterates x_0, x_1, ..., x_K as a (K+1, d) array."""
        return np.vstack([self.x0] + [row.iterate for row in self.rows])

    def check_invariants(self, k_outer: int) -> None:
        """Raise if the trace violates its structural contract."""
        if len(self.rows) != k_outer:
            raise ComonoError(f"expected {k_outer} rows, found {len(self.rows)}")
        last = 0
        for row in self.rows:
            if row.cum_oracle_calls <= last:
                raise ComonoError("cum_oracle_calls must be strictly increasing")
            last = row.cum_oracle_calls
            check_finite(row.iterate, f"iterate at k={row.k}")
