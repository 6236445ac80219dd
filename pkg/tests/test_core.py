"""Core domain types: validation, the shifted map, and oracle accounting."""

import math

import numpy as np
import pytest

import comono
from comono.core import DimensionMismatch, NumericsError, ParameterError

from conftest import ROT_THETA


def test_as_point_rejects_nan_and_inf():
    with pytest.raises(NumericsError):
        comono.as_point([1.0, float("nan")])
    with pytest.raises(NumericsError):
        comono.as_point([float("inf"), 0.0])
    with pytest.raises(DimensionMismatch):
        comono.as_point([[1.0, 2.0]])
    with pytest.raises(DimensionMismatch):
        comono.as_point([1.0, 2.0], dim=3)


def test_assumption_validation():
    with pytest.raises(ParameterError):
        comono.Assumption("bogus")
    with pytest.raises(ParameterError):
        comono.cohypomonotone(-0.1)
    with pytest.raises(ParameterError):
        comono.Assumption("monotone", rho=0.2)
    assert comono.weak_mvi(0.3).rho == 0.3
    assert comono.MONOTONE.pairwise
    assert not comono.weak_mvi(0.1).pairwise


def test_problem_rejects_rho_at_or_above_one_over_l():
    f = comono.SmoothMap(eval=lambda x: np.asarray(x, float), lipschitz=2.0, dim=1)
    with pytest.raises(ParameterError):
        comono.InclusionProblem(
            f=f, g=comono.identity_prox(), assumption=comono.cohypomonotone(0.5), dim=1
        )
    comono.InclusionProblem(
        f=f, g=comono.identity_prox(), assumption=comono.cohypomonotone(0.49), dim=1
    )


def test_shifted_map_zero_operator():
    # F = 0: B is the pure shift z - anchor, mu = L_B = 1
    f = comono.SmoothMap(eval=lambda x: np.zeros_like(np.asarray(x, float)), lipschitz=0.0, dim=2)
    b = comono.make_shifted_map(f, 0.5, np.zeros(2))
    assert b.mu == 1.0 and b.lip == 1.0
    z = np.array([0.3, -0.2])
    assert np.allclose(b(z), z)


def test_shifted_map_affine_example():
    # F = Id, eta = 0.5, anchor 1: B(z) = 1.5 z - 1 with mu = 0.5, L_B = 1.5
    f = comono.SmoothMap(eval=lambda x: np.asarray(x, float), lipschitz=1.0, dim=1)
    b = comono.make_shifted_map(f, 0.5, np.array([1.0]))
    assert b.mu == 0.5 and b.lip == 1.5
    for z in (-2.0, 0.0, 1.0, 3.5):
        assert b(np.array([z]))[0] == pytest.approx(1.5 * z - 1.0, abs=1e-15)


def test_shifted_map_rejects_eta_at_one_over_l():
    f = comono.SmoothMap(eval=lambda x: np.asarray(x, float), lipschitz=1.0, dim=1)
    with pytest.raises(ParameterError):
        comono.make_shifted_map(f, 1.0, np.zeros(1))


def test_shifted_map_strong_monotonicity_and_lipschitz_sampled(rotation2):
    # <B(z)-B(w), z-w> >= mu ||z-w||^2 and ||B(z)-B(w)|| <= L_B ||z-w||,
    # relative tolerance 1e-10 over 1000 pairs
    rng = comono.substream(3, "core-regularity")
    b = comono.make_shifted_map(rotation2.f, 0.85, np.zeros(2))
    z = rng.normal(size=(1000, 2))
    w = rng.normal(size=(1000, 2))
    diff = z - w
    bdiff = b(z) - b(w)
    d2 = np.einsum("ij,ij->i", diff, diff)
    inner = np.einsum("ij,ij->i", bdiff, diff)
    assert np.all(inner >= b.mu * d2 - 1e-10 * d2)
    assert np.all(np.linalg.norm(bdiff, axis=1) <= b.lip * np.sqrt(d2) * (1 + 1e-10))


def test_prox_firm_nonexpansiveness_sampled(rotation2):
    rng = comono.substream(4, "core-firm")
    rep = comono.check_prox_firmly_nonexpansive(rotation2.g, 2, 1000, rng)
    assert rep.passed


def test_sampler_unbiased_and_variance_bounded(rotation2):
    # statistical check of the stochastic oracle contract
    noisy = comono.with_gaussian_noise(rotation2, 0.3)
    rng = comono.substream(5, "core-sampler")
    x = np.array([0.7, -0.4])
    draws = noisy.f.sample(np.tile(x, (200_000, 1)), rng)
    err = draws - noisy.f.eval(x)
    assert np.linalg.norm(err.mean(axis=0)) < 3 * 0.3 / math.sqrt(200_000) * 3
    emp_var = np.mean(np.sum(err**2, axis=1))
    assert emp_var <= 0.3**2 * (1 + 0.02)
    assert emp_var >= 0.3**2 * (1 - 0.02)


def test_sampler_missing_raises(rotation2):
    with pytest.raises(ParameterError):
        rotation2.f.sample(np.zeros(2), comono.substream(0))


def test_dimension_mismatch_is_hard_error():
    f = comono.SmoothMap(eval=lambda x: np.asarray(x, float), lipschitz=1.0, dim=2)
    with pytest.raises(DimensionMismatch):
        comono.make_shifted_map(f, 0.5, np.zeros(3))


def test_oracle_cost_convention():
    assert comono.fbf_oracle_cost(0) == 0
    assert comono.fbf_oracle_cost(7) == 14


def test_scaled_prox_composes_step():
    g = comono.l1_prox(1.0)
    scaled = g.scaled(0.5)  # resolvent of 0.5 * l1
    x = np.array([2.0, -0.5])
    assert np.allclose(scaled.resolve(1.0, x), comono.soft_threshold(0.5, x))
    with pytest.raises(ParameterError):
        g.scaled(0.0)
