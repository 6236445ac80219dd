"""Projection and resolvent catalog against brute-force and closed-form oracles."""

import numpy as np
import pytest

import comono
from comono.core import DimensionMismatch, ParameterError, SingularSystemError

from conftest import (
    inverse_2x2,
    simplex_projection_grid_oracle,
    simplex_projection_qp_oracle,
)


class TestBoxProjection:
    def test_interior_point_unchanged(self):
        box = comono.BoxSet(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        assert np.array_equal(comono.project_box(box, np.array([0.3, -0.2])), [0.3, -0.2])

    def test_componentwise_clamp(self):
        box = comono.BoxSet(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        assert np.array_equal(comono.project_box(box, np.array([2.0, -3.0])), [1.0, -1.0])

    def test_degenerate_box(self):
        box = comono.BoxSet(np.array([0.0]), np.array([0.0]))
        assert comono.project_box(box, np.array([5.0]))[0] == 0.0

    def test_invalid_bounds(self):
        with pytest.raises(ParameterError):
            comono.BoxSet(np.array([1.0]), np.array([0.0]))
        box = comono.BoxSet(np.array([0.0]), np.array([1.0]))
        with pytest.raises(DimensionMismatch):
            comono.project_box(box, np.array([1.0, 2.0]))


class TestSimplexProjection:
    def test_already_feasible(self):
        s = comono.SimplexSet(2)
        assert np.allclose(comono.project_simplex(s, np.array([0.5, 0.5])), [0.5, 0.5])

    def test_vertex_case_matches_grid_oracle(self):
        s = comono.SimplexSet(2)
        out = comono.project_simplex(s, np.array([2.0, 0.0]))
        assert np.allclose(out, [1.0, 0.0], atol=1e-12)
        grid = simplex_projection_grid_oracle(np.array([2.0, 0.0]), resolution=1e-4)
        assert np.allclose(out, grid, atol=2e-4)

    def test_recorded_3d_case(self):
        # oracle value computed by support enumeration before the build
        s = comono.SimplexSet(3)
        out = comono.project_simplex(s, np.array([0.9, 0.8, -1.0]))
        assert np.allclose(out, [0.55, 0.45, 0.0], atol=1e-12)
        assert np.allclose(out, simplex_projection_qp_oracle([0.9, 0.8, -1.0]), atol=1e-12)

    @pytest.mark.parametrize("dim", [3, 5])
    def test_random_inputs_match_qp_oracle(self, dim):
        s = comono.SimplexSet(dim)
        rng = comono.substream(11, "simplex", dim)
        for _ in range(100):
            v = rng.normal(scale=2.0, size=dim)
            assert np.allclose(
                comono.project_simplex(s, v), simplex_projection_qp_oracle(v), atol=1e-6
            )

    def test_feasibility_invariant(self):
        s = comono.SimplexSet(7)
        rng = comono.substream(12, "simplex-feas")
        out = comono.project_simplex(s, rng.normal(scale=3.0, size=(500, 7)))
        assert np.all(out >= 0.0)
        assert np.max(np.abs(out.sum(axis=1) - 1.0)) <= 1e-12


class TestSoftThreshold:
    def test_zero_shrink_is_identity(self):
        x = np.array([1.5, -0.2, 0.0])
        assert np.array_equal(comono.soft_threshold(0.0, x), x)

    def test_standard_shrinkage(self):
        assert np.array_equal(
            comono.soft_threshold(1.0, np.array([2.0, -0.5])), [1.0, 0.0]
        )

    def test_exact_threshold(self):
        assert comono.soft_threshold(0.25, np.array([0.25]))[0] == 0.0

    def test_negative_shrink_rejected(self):
        with pytest.raises(ParameterError):
            comono.soft_threshold(-0.1, np.array([1.0]))


class TestResolveAffine:
    def test_scalar_case(self):
        # 1.5 z = 1, hand solve
        z = comono.resolve_affine(np.eye(1), np.zeros(1), 0.5, np.array([1.0]))
        assert z[0] == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_zero_map_returns_anchor(self):
        xbar = np.array([0.4, -2.0])
        for eta in (0.1, 1.0, 7.0):
            assert np.array_equal(
                comono.resolve_affine(np.zeros((2, 2)), np.zeros(2), eta, xbar), xbar
            )

    def test_rotation_case_matches_adjugate_inverse(self):
        theta = 3 * np.pi / 4
        m = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        xbar = np.array([1.0, 0.0])
        got = comono.resolve_affine(m, np.zeros(2), 0.85, xbar)
        want = inverse_2x2(np.eye(2) + 0.85 * m) @ xbar
        assert np.allclose(got, want, atol=1e-14)

    def test_residual_invariant(self):
        rng = comono.substream(13, "affine-residual")
        for _ in range(50):
            d = int(rng.integers(1, 6))
            m = rng.normal(size=(d, d))
            b = rng.normal(size=d)
            eta = float(rng.uniform(0.05, 0.45)) / max(1.0, np.linalg.norm(m, 2))
            xbar = rng.normal(scale=3.0, size=d)
            z = comono.resolve_affine(m, b, eta, xbar)
            residual = np.linalg.norm(z + eta * (m @ z + b) - xbar)
            assert residual <= 1e-12 * (1.0 + np.linalg.norm(xbar))

    def test_batched_matches_single(self):
        rng = comono.substream(14, "affine-batch")
        m = rng.normal(size=(3, 3))
        b = rng.normal(size=3)
        pts = rng.normal(size=(10, 3))
        batched = comono.resolve_affine(m, b, 0.1, pts)
        for i in range(10):
            assert np.allclose(batched[i], comono.resolve_affine(m, b, 0.1, pts[i]))

    def test_singular_system_reports_pivot(self):
        with pytest.raises(SingularSystemError) as err:
            comono.resolve_affine(-np.eye(2), np.zeros(2), 1.0, np.ones(2))
        assert err.value.pivot_magnitude == 0.0


def test_catalog_resolvents_firmly_nonexpansive():
    cases = [
        (comono.box_prox(comono.BoxSet(-np.ones(3), np.ones(3))), 3),
        (comono.l1_prox(0.7), 4),
        (comono.simplex_product_prox((2, 3)), 5),
        (comono.identity_prox(), 2),
    ]
    for i, (g, dim) in enumerate(cases):
        rep = comono.check_prox_firmly_nonexpansive(
            g, dim, 2000, comono.substream(15, "catalog", i), gamma=0.3
        )
        assert rep.passed, rep.to_dict()
