import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defectmech import (
    detect_group,
    distance_squared,
    eval_archetype,
    grad_archetype,
    make_archetype,
    n_fold,
    nearest_element,
    neo_hookean,
    symmetry_distance,
)
from defectmech.archetypes import Archetype, SymmetryGroup, default_samples
from defectmech.errors import ConfigError, InconsistentGroupError

from conftest import rot


def fd_gradient(a, B, h=1e-6):
    out = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = h
            out[i, j] = (a(B + E) - a(B - E)) / (2 * h)
    return out


class TestEval:
    def test_neo_hookean_at_identity(self):
        assert eval_archetype(neo_hookean(), np.eye(2)) == pytest.approx(2.0)

    def test_distance_at_identity(self):
        assert eval_archetype(distance_squared(), np.eye(2)) == pytest.approx(0.0, abs=1e-14)

    def test_nfold_at_identity(self):
        assert eval_archetype(n_fold(3), np.eye(2)) == pytest.approx(0.0, abs=1e-14)

    def test_distance_matches_singular_values(self):
        rng = np.random.default_rng(5)
        a = distance_squared()
        for _ in range(20):
            B = np.eye(2) + 0.4 * rng.standard_normal((2, 2))
            s = np.linalg.svd(B, compute_uv=False)
            if np.linalg.det(B) > 0:
                expect = (s[0] - 1) ** 2 + (s[1] - 1) ** 2
            else:
                expect = (s[0] - 1) ** 2 + (s[1] + 1) ** 2
            assert a(B) == pytest.approx(expect, abs=1e-12)

    def test_vectorized(self):
        a = n_fold(2)
        B = np.eye(2) + 0.2 * np.random.default_rng(0).standard_normal((7, 2, 2))
        vals = a(B)
        assert vals.shape == (7,)
        for k in range(7):
            assert vals[k] == pytest.approx(a(B[k]))


class TestGrad:
    def test_neo_hookean_at_identity(self):
        # det term has zero gradient at det = 1: d(det B - 1)^2 = 0 there
        np.testing.assert_allclose(
            grad_archetype(neo_hookean(), np.eye(2)), 2 * np.eye(2), atol=1e-14
        )

    def test_distance_zero_on_rotations(self):
        a = distance_squared()
        for th in (0.0, 0.3, 2.0, -1.2):
            np.testing.assert_allclose(
                grad_archetype(a, rot(th)), np.zeros((2, 2)), atol=1e-12
            )

    def test_nfold_matches_fd_oracle(self):
        a = n_fold(3)
        B = np.diag([1.1, 1.0])
        g = grad_archetype(a, B)
        gfd = fd_gradient(a, B)
        assert np.abs(g - gfd).max() / np.abs(gfd).max() < 1e-6

    def test_all_kinds_match_fd_on_fixed_seed_samples(self):
        # spec invariant: relative error < 1e-5 on 100 fixed-seed matrices
        # with entries around the identity
        rng = np.random.default_rng(42)
        for a in (neo_hookean(), distance_squared(), n_fold(2), n_fold(3)):
            worst = 0.0
            for _ in range(100):
                B = np.eye(2) + rng.uniform(-0.5, 0.5, (2, 2))
                if abs(np.linalg.det(B)) < 0.1:
                    continue
                g = grad_archetype(a, B)
                gfd = fd_gradient(a, B)
                worst = max(worst, np.abs(g - gfd).max() / max(np.abs(gfd).max(), 1e-8))
            assert worst < 1e-5, a.label

    def test_fd_fallback_used_without_analytic_grad(self):
        base = neo_hookean()
        a = Archetype("custom", base.w, None)
        np.testing.assert_allclose(
            grad_archetype(a, np.eye(2)), 2 * np.eye(2), atol=1e-8
        )


class TestSymmetryDistance:
    def test_identity_element_zero(self):
        for a in (neo_hookean(), distance_squared(), n_fold(3)):
            assert symmetry_distance(a, np.eye(2)) == 0.0

    def test_isotropic_any_rotation(self):
        a = neo_hookean()
        for th in np.linspace(0, 2 * np.pi, 17):
            assert symmetry_distance(a, rot(th)) < 1e-12

    def test_nfold3_off_group_rotation_large(self):
        assert symmetry_distance(n_fold(3), rot(np.pi / 4)) > 1e-2

    def test_nfold_group_rotations_exact(self):
        a = n_fold(3)
        for k in range(6):
            assert symmetry_distance(a, rot(k * np.pi / 3)) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=11))
    def test_group_rotations_invariance_property(self, n, k):
        # every rotation by k*pi/n leaves the n-fold energy invariant
        a = n_fold(n)
        assert symmetry_distance(a, rot(k * np.pi / n)) < 1e-11


class TestDetectGroup:
    def test_isotropic_distance_so2(self):
        grp = detect_group(distance_squared())
        assert grp.kind == "continuous-SO2"

    def test_square_symmetry(self):
        grp = detect_group(n_fold(2))
        assert grp.kind == "discrete-cyclic" and grp.order == 4
        np.testing.assert_allclose(grp.angles, np.arange(4) * np.pi / 2)

    def test_hexagonal_symmetry(self):
        grp = detect_group(n_fold(3))
        assert grp.kind == "discrete-cyclic" and grp.order == 6
        np.testing.assert_allclose(grp.angles, np.arange(6) * np.pi / 3)

    def test_stable_under_resolution_doubling(self):
        for a in (neo_hookean(), distance_squared(), n_fold(2), n_fold(3)):
            g1 = detect_group(a, resolution=720)
            g2 = detect_group(a, resolution=1440)
            assert g1.kind == g2.kind
            if not g1.continuous:
                assert g1.order == g2.order

    def test_detected_elements_pass_midpoints_fail(self):
        tol = 1e-8
        a = n_fold(3)
        grp = detect_group(a, tol=tol)
        for th in grp.angles:
            assert symmetry_distance(a, rot(th)) < tol
        mids = grp.angles + np.pi / 6
        for th in mids:
            assert symmetry_distance(a, rot(th)) > 10 * tol

    def test_loose_tolerance_flags_inconsistency(self):
        # a tolerance wide enough to pass near-miss grid angles produces a
        # passing set that is not a subgroup
        with pytest.raises(InconsistentGroupError):
            detect_group(n_fold(3), tol=0.05)

    def test_resolution_floor(self):
        with pytest.raises(ConfigError):
            detect_group(n_fold(3), resolution=100)


class TestNearestElement:
    def test_cyclic6_near_element(self):
        grp = SymmetryGroup("discrete-cyclic", order=6)
        M = rot(np.pi / 3 + 0.01)
        el, dist = nearest_element(grp, M)
        np.testing.assert_allclose(el, rot(np.pi / 3), atol=1e-14)
        # closed form ||R(delta) - Id||_F = 2 sqrt(2) |sin(delta/2)|
        assert dist == pytest.approx(2 * np.sqrt(2) * np.sin(0.005), rel=1e-9)

    def test_so2_rotation_distance_zero(self):
        grp = SymmetryGroup("continuous-SO2")
        _, dist = nearest_element(grp, rot(1.234))
        assert dist < 1e-14

    def test_cyclic4_identity(self):
        grp = SymmetryGroup("discrete-cyclic", order=4)
        el, dist = nearest_element(grp, np.eye(2))
        np.testing.assert_allclose(el, np.eye(2))
        assert dist == 0.0

    def test_elements_closed_under_composition(self):
        grp = SymmetryGroup("discrete-cyclic", order=6)
        els = grp.elements()
        for i in range(6):
            for j in range(6):
                prod = els[i] @ els[j]
                _, dist = nearest_element(grp, prod)
                assert dist < 1e-12
        np.testing.assert_allclose(np.linalg.det(els), np.ones(6), atol=1e-14)

    def test_make_archetype_roundtrip(self):
        a = make_archetype("n-fold-discrete", 3)
        assert a.label == "n-fold-discrete(3)"
        with pytest.raises(ConfigError):
            make_archetype("n-fold-discrete")
        with pytest.raises(ConfigError):
            make_archetype("bogus")

    def test_default_samples_fixed_seed(self):
        s1 = default_samples(0)
        s2 = default_samples(0)
        s3 = default_samples(1)
        assert np.array_equal(s1, s2)
        assert not np.array_equal(s1, s3)
        assert s1.shape == (64, 2, 2)
