"""Shared fixtures and independent oracles for the test suite."""

import math

import numpy as np
import pytest

import comono


ROT_THETA = 3 * math.pi / 4
ROT_RHO = math.sqrt(2) / 2
RUN_RHO = 0.70711  # the rounded modulus the benchmark runs are priced for
RUN_ETA = 0.85


@pytest.fixture
def rotation2():
    """The d=2 rotation benchmark problem (L=1, theta=3pi/4)."""
    return comono.make_rotation(comono.RotationSpec(1.0, ROT_THETA, 2))


@pytest.fixture
def affine_1d_pieces():
    """The 1-D inner subproblem B(z) = 1.5 z - 1 with mu=0.5, L_B=1.5.

    Built from F = Id (L = 1), eta = 0.5, anchor 1; the unique zero is
    z* = 2/3.
    """
    f = comono.SmoothMap(eval=lambda x: np.asarray(x, dtype=float), lipschitz=1.0, dim=1)
    b = comono.make_shifted_map(f, 0.5, np.array([1.0]))
    return comono.identity_prox(), b, np.array([2.0 / 3.0])


def noisy_affine_1d_pieces(sigma_b):
    """Same subproblem with additive Gaussian noise of total std sigma_b on B.

    The noise is attached to F, so the B-level standard deviation sigma_b
    corresponds to an F-level deviation sigma_b / eta with eta = 0.5.
    """
    f = comono.SmoothMap(eval=lambda x: np.asarray(x, dtype=float), lipschitz=1.0, dim=1)
    base = comono.InclusionProblem(
        f=f,
        g=comono.identity_prox(),
        assumption=comono.MONOTONE,
        dim=1,
        affine_part=(np.eye(1), np.zeros(1)),
    )
    noisy = comono.with_gaussian_noise(base, sigma_b / 0.5)
    b = comono.make_shifted_map(noisy.f, 0.5, np.array([1.0]))
    return comono.identity_prox(), b


def inverse_2x2(m):
    """Closed-form 2x2 inverse via the adjugate (independent of LAPACK)."""
    (a, b), (c, d) = m
    det = a * d - b * c
    return np.array([[d, -b], [-c, a]]) / det


def rotation_resolvent_oracle(theta, lipschitz, eta, x):
    """J_{eta F}(x) for the planar rotation field, by the 2x2 adjugate."""
    c, s = math.cos(theta), math.sin(theta)
    m = np.eye(2) + eta * lipschitz * np.array([[c, -s], [s, c]])
    return np.asarray(x, dtype=float) @ inverse_2x2(m).T


def simplex_projection_qp_oracle(v):
    """Exact brute-force QP oracle for the simplex projection.

    Enumerates every candidate support set, solves the equality-constrained
    least squares on it in closed form, keeps feasible candidates and
    returns the one with the smallest distance.  Exponential in d, exact in
    exact arithmetic; independent of the sort-threshold path under test.
    """
    v = np.asarray(v, dtype=float)
    d = v.shape[0]
    best, best_dist = None, np.inf
    for mask in range(1, 1 << d):
        idx = [i for i in range(d) if mask >> i & 1]
        tau = (v[idx].sum() - 1.0) / len(idx)
        x = np.zeros(d)
        x[idx] = v[idx] - tau
        if np.any(x[idx] < -1e-15):
            continue
        dist = np.sum((x - v) ** 2)
        if dist < best_dist - 1e-18:
            best, best_dist = x, dist
    return best


def simplex_projection_grid_oracle(v, resolution=1e-4):
    """Brute-force grid search on the 2-D simplex at the given resolution."""
    v = np.asarray(v, dtype=float)
    assert v.shape == (2,)
    t = np.arange(0.0, 1.0 + resolution, resolution)
    pts = np.stack([t, 1.0 - t], axis=1)
    dists = np.sum((pts - v) ** 2, axis=1)
    return pts[np.argmin(dists)]


class ForcedLevelRng:
    """Generator stub that forces geometric draws and delegates the rest."""

    def __init__(self, levels, seed=0):
        self._levels = list(levels)
        self._inner = comono.substream(seed, "forced-level-noise")

    def geometric(self, p, size=None):
        if size is None:
            return self._levels.pop(0)
        flat = [self._levels.pop(0) for _ in range(int(np.prod(size)))]
        return np.array(flat).reshape(size)

    def __getattr__(self, name):
        return getattr(self._inner, name)
