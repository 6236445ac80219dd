"""Concrete resolvents and projections for the catalog of test problems.

Projections realize J_{gamma G} for indicator functions (step-invariant),
soft-thresholding realizes the l1 resolvent, and ``resolve_affine`` is the
direct ground-truth resolvent for affine F with G = 0.  Everything is
vectorized over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionMismatch,
    ParameterError,
    ProxOperator,
    SingularSystemError,
    check_finite,
)


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box [lower, upper], componentwise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("box bounds must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ParameterError("box requires lower <= upper componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True)
class SimplexSet:
    """Standard probability simplex in R^dim."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError("simplex dimension must be >= 1")


def project_box(box: BoxSet, x: np.ndarray) -> np.ndarray:
    """Componentwise clamp of ``x`` into the box."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != box.dim:
        raise DimensionMismatch(f"point dimension {x.shape[-1]} != box dimension {box.dim}")
    return np.clip(x, box.lower, box.upper)


def project_simplex(s: SimplexSet, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the simplex via sort-and-threshold.

    Sorts each vector, locates the largest support size whose water level
    keeps all retained coordinates positive, then clips.  O(d log d) and
    exact in exact arithmetic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != s.dim:
        raise DimensionMismatch(f"point dimension {x.shape[-1]} != simplex dimension {s.dim}")
    u = np.sort(x, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1)
    j = np.arange(1, s.dim + 1, dtype=np.float64)
    positive = u + (1.0 - css) / j > 0.0
    # last index where the condition holds; it holds at index 0 always
    support = s.dim - 1 - np.argmax(positive[..., ::-1], axis=-1)
    tau = (np.take_along_axis(css, support[..., None], axis=-1)[..., 0] - 1.0) / (
        support + 1.0
    )
    return np.maximum(x - tau[..., None], 0.0)


def soft_threshold(shrink: float, x: np.ndarray) -> np.ndarray:
    """Componentwise shrinkage sign(x) * max(|x| - shrink, 0).

    ``shrink`` is the product lambda*gamma, so this is the resolvent of
    gamma * (lambda * l1-norm) subdifferential.
    """
    if shrink < 0.0:
        raise ParameterError("shrinkage amount must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - shrink, 0.0)


def _min_pivot_magnitude(a: np.ndarray) -> float:
    # partial-pivot LU, only to report how singular the system was
    u = np.array(a, dtype=np.float64)
    n = u.shape[0]
    smallest = np.inf
    for col in range(n):
        p = col + int(np.argmax(np.abs(u[col:, col])))
        if p != col:
            u[[col, p]] = u[[p, col]]
        piv = abs(u[col, col])
        smallest = min(smallest, piv)
        if piv == 0.0:
            return 0.0
        u[col + 1 :] -= np.outer(u[col + 1 :, col] / u[col, col], u[col])
    return float(smallest)


def resolve_affine(m: np.ndarray, b: np.ndarray, eta: float, xbar: np.ndarray) -> np.ndarray:
    """Reference resolvent for F(x) = Mx + b with G = 0.

    Returns the unique z with z + eta*(Mz + b) = xbar by a partial-pivot
    direct solve; this is the oracle everything else is judged against, so
    it must be more accurate than any iterative path.
    """
    m = np.asarray(m, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    xbar = np.asarray(xbar, dtype=np.float64)
    if eta <= 0.0:
        raise ParameterError("eta must be positive")
    d = m.shape[0]
    if m.shape != (d, d) or b.shape != (d,) or xbar.shape[-1] != d:
        raise DimensionMismatch("affine resolvent shapes are inconsistent")
    system = np.eye(d) + eta * m
    rhs = xbar - eta * b
    try:
        if rhs.ndim == 1:
            out = np.linalg.solve(system, rhs)
        else:
            out = np.linalg.solve(system, rhs.reshape(-1, d).T).T.reshape(rhs.shape)
    except np.linalg.LinAlgError:
        raise SingularSystemError(
            "Id + eta*M is singular", _min_pivot_magnitude(system)
        ) from None
    return check_finite(out, "affine resolvent output")


def identity_prox() -> ProxOperator:
    """Resolvent of G = 0, i.e. the identity for every step."""
    return ProxOperator(lambda gamma, x: np.asarray(x, dtype=np.float64), is_identity=True)


def box_prox(box: BoxSet) -> ProxOperator:
    """Resolvent of the box indicator's subdifferential (step-invariant)."""
    return ProxOperator(lambda gamma, x: project_box(box, x))


def l1_prox(lam: float) -> ProxOperator:
    """Resolvent of gamma * lambda * l1-norm subdifferential."""
    if lam < 0.0:
        raise ParameterError("l1 weight must be nonnegative")
    return ProxOperator(lambda gamma, x: soft_threshold(lam * gamma, x))


def simplex_product_prox(sizes: tuple) -> ProxOperator:
    """Resolvent of the normal cone of a product of simplices.

    Splits the last axis into blocks of the given sizes and projects each
    block onto its simplex; the step is irrelevant for indicator functions.
    """
    sets = [SimplexSet(int(n)) for n in sizes]
    offsets = np.cumsum([0] + [s.dim for s in sets])

    def resolve(gamma, x):
        x = np.asarray(x, dtype=np.float64)
        parts = [
            project_simplex(s, x[..., offsets[i] : offsets[i + 1]])
            for i, s in enumerate(sets)
        ]
        return np.concatenate(parts, axis=-1)

    return ProxOperator(resolve)
