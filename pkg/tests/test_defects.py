import numpy as np
import pytest

from defectmech import (
    Curve,
    build_disclination_body,
    build_dislocation_body,
    burgers_vector,
    circle,
    disclination_content,
    verify_content_in_group,
)
from defectmech.defects import split_into_chart_runs
from defectmech.errors import ChartCoverError, DisclinationPresentError, DomainError
from defectmech.geometry import frobenius, inv2

from conftest import rot

TWO_PI = 2 * np.pi


def polygon_loop(radius, sides, base_angle=np.pi / 2):
    ang = base_angle + np.linspace(0, TWO_PI, sides + 1)
    pts = radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    pts[-1] = pts[0]
    return Curve(pts)


class TestSplitting:
    def test_runs_cover_loop_and_alternate_charts(self, disclination_body):
        loop = circle(radius=1.2, segments=64)
        runs = split_into_chart_runs(disclination_body, loop)
        assert len(runs) >= 2
        total = sum(r[1].shape[0] - 1 for r in runs)
        assert total >= 64
        for k, pts in runs:
            dom = disclination_body.charts[k].domain
            for a, b in zip(pts[:-1], pts[1:]):
                assert dom.contains_segment(a, b)

    def test_uncovered_segment_raises(self, disclination_body):
        outside = Curve(np.array([[3.0, 0.0], [4.0, 0.0], [3.0, 0.0]]))
        with pytest.raises(ChartCoverError):
            split_into_chart_runs(disclination_body, outside)

    def test_labelled_curve_respected(self, dislocation_body):
        loop = circle(radius=1.0, segments=8)
        labelled = Curve(loop.vertices, chart_labels=[0] * 8)
        runs = split_into_chart_runs(dislocation_body, labelled)
        assert len(runs) == 1 and runs[0][0] == 0


class TestDisclinationContent:
    def test_core_loop_rotation_by_2_pi_alpha(self, isotropic):
        for alpha in (1.0 / 6.0, 0.25, 1.0 / 3.0):
            body = build_disclination_body(0.5, 2.0, alpha, isotropic)
            content = disclination_content(body, circle(radius=1.2, segments=128))
            assert frobenius(content.conjugated - rot(TWO_PI * alpha)) < 1e-8

    def test_contractible_loop_identity(self, disclination_body):
        loop = circle(center=(0.0, 1.2), radius=0.2, segments=64)
        content = disclination_content(disclination_body, loop)
        assert content.identity_distance < 1e-12

    def test_dislocation_loop_identity(self, dislocation_body):
        content = disclination_content(dislocation_body, circle(radius=0.8))
        assert content.identity_distance < 1e-8

    def test_homotopy_invariance(self, disclination_body):
        base = circle(radius=1.2, segments=128)
        squashed = polygon_loop(1.2, 96)
        c1 = disclination_content(disclination_body, base)
        c2 = disclination_content(disclination_body, squashed)
        assert frobenius(c1.conjugated - c2.conjugated) < 1e-8

    def test_winding_twice_squares_the_rotation(self, disclination_body):
        v = circle(radius=1.2, segments=128).vertices
        double = Curve(np.vstack([v[:-1], v]))
        content = disclination_content(disclination_body, double)
        assert frobenius(content.conjugated - rot(2 * TWO_PI / 6.0)) < 1e-8

    def test_reversed_loop_inverts(self, disclination_body):
        loop = circle(radius=1.2, segments=128)
        c = disclination_content(disclination_body, loop)
        c_rev = disclination_content(disclination_body, loop.reversed_())
        np.testing.assert_allclose(
            c_rev.conjugated, np.linalg.inv(c.conjugated), atol=1e-10
        )

    def test_open_curve_rejected(self, disclination_body):
        with pytest.raises(DomainError):
            disclination_content(
                disclination_body, Curve(np.array([[0.0, 1.0], [1.0, 0.0]]))
            )

    def test_conjugation_consistency_across_base_charts(self, hexagonal):
        # membership (not the matrix) is chart-independent: conjugating with
        # P1 or P2 at the base point gives group elements at equal distance
        body = build_disclination_body(0.5, 2.0, 1.0 / 3.0, hexagonal)
        loop = circle(radius=1.2, segments=128)  # base in both charts
        content = disclination_content(body, loop)
        from defectmech import nearest_element

        P2 = body.charts[1].frames(loop.base_point)
        conj2 = P2 @ content.matrix @ inv2(P2)
        _, d1 = nearest_element(body.group, content.conjugated)
        _, d2 = nearest_element(body.group, conj2)
        assert d1 < 1e-8 and d2 < 1e-8


class TestBurgers:
    def test_dislocation_closed_form(self, isotropic):
        for eps in (0.05, 0.1):
            body = build_dislocation_body(eps, 2.0, isotropic)
            loop = circle(radius=1.0, segments=128)
            b = burgers_vector(body, loop)
            P = body.charts[0].frames(loop.base_point)
            expect = eps * (inv2(P) @ np.array([1.0, 0.0]))
            assert np.abs(b.vector - expect).max() < 1e-6

    def test_trivial_body_zero(self, trivial_body):
        loop = circle(center=(0.5, 0.5), radius=0.3, segments=64)
        b = burgers_vector(trivial_body, loop)
        assert np.abs(b.vector).max() < 1e-14

    def test_homotopy_invariance_three_loops(self, dislocation_body):
        # all three based at (0, 1): Burgers vectors are base-point data
        loops = [
            circle(radius=1.0, segments=128),
            polygon_loop(1.0, 7),
            _ellipse_loop(1.3, 1.0, 128),
        ]
        for lp in loops:
            np.testing.assert_allclose(lp.base_point, [0.0, 1.0], atol=1e-12)
        vecs = [burgers_vector(dislocation_body, lp).vector for lp in loops]
        for v in vecs[1:]:
            assert np.abs(v - vecs[0]).max() < 1e-6

    def test_additivity_same_base(self, dislocation_body):
        # winding the loop twice doubles the Burgers vector when the
        # holonomy is trivial
        v = circle(radius=1.0, segments=128).vertices
        single = Curve(v)
        double = Curve(np.vstack([v[:-1], v]))
        b1 = burgers_vector(dislocation_body, single).vector
        b2 = burgers_vector(dislocation_body, double).vector
        np.testing.assert_allclose(b2, 2 * b1, atol=1e-9)

    def test_additivity_through_connecting_arc(self, dislocation_body):
        # b(c^-1 * g2 * c * g1) = b(g1) + Pi_c^{-1} b(g2) for trivial holonomy
        p = np.array([0.0, 1.0])
        q = np.array([0.0, -1.0])
        g1 = circle(radius=1.0, segments=96).vertices          # based at p
        g2 = circle(radius=1.0, segments=96, base_angle=-np.pi / 2).vertices
        arc_r = np.linspace(np.pi / 2, -np.pi / 2, 33)
        c_pts = np.stack([np.cos(arc_r), np.sin(arc_r)], axis=-1)  # p -> q
        composite = np.vstack([g1[:-1], c_pts[:-1], g2[:-1], c_pts[::-1]])
        comp = Curve(composite)
        from defectmech import transport_chart

        b1 = burgers_vector(dislocation_body, Curve(g1)).vector
        b2 = burgers_vector(dislocation_body, Curve(g2)).vector
        bc = burgers_vector(dislocation_body, comp).vector
        Pi_c = transport_chart(dislocation_body.charts[0], p, q)
        np.testing.assert_allclose(bc, b1 + np.linalg.inv(Pi_c) @ b2, atol=1e-8)

    def test_disclination_present_error_and_override(self, disclination_body):
        loop = circle(radius=1.2, segments=128)
        with pytest.raises(DisclinationPresentError) as exc:
            burgers_vector(disclination_body, loop)
        assert exc.value.distance > 1.0
        b = burgers_vector(disclination_body, loop, allow_circuit_dependent=True)
        assert np.all(np.isfinite(b.vector))
        assert b.content_distance > 1.0


def _ellipse_loop(a, b, segments):
    ang = np.pi / 2 + np.linspace(0, TWO_PI, segments + 1)
    pts = np.stack([a * np.cos(ang), b * np.sin(ang)], axis=-1)
    pts[-1] = pts[0]
    return Curve(pts)


class TestGroupMembership:
    def test_hexagonal_third_loop(self, hexagonal):
        body = build_disclination_body(0.5, 2.0, 1.0 / 3.0, hexagonal)
        rep = verify_content_in_group(body, circle(radius=1.2, segments=128))
        assert rep.passed and rep.distance < 1e-8
        np.testing.assert_allclose(rep.nearest, rot(TWO_PI / 3.0), atol=1e-12)

    def test_isotropic_any_alpha(self, isotropic):
        for alpha in (0.13, 0.4, 0.77):
            body = build_disclination_body(0.5, 2.0, alpha, isotropic)
            rep = verify_content_in_group(body, circle(radius=1.2, segments=128))
            assert rep.passed

    def test_contractible_loop_identity_element(self, disclination_body):
        loop = circle(center=(1.1, 0.6), radius=0.15, segments=48)
        rep = verify_content_in_group(disclination_body, loop)
        assert rep.passed
        np.testing.assert_allclose(rep.nearest, np.eye(2), atol=1e-12)
        assert rep.content.identity_distance < 1e-8


class TestDiscretenessGap:
    def test_bimodal_distances(self, hexagonal):
        # every measured content in the hexagonal suite is either ~Id or at
        # least 2 sqrt(2) sin(pi/6) - margin away from it
        gap = 2 * np.sqrt(2) * np.sin(np.pi / 6) - 1e-6
        dists = []
        for alpha in (1.0 / 6.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 5.0 / 6.0):
            body = build_disclination_body(0.5, 2.0, alpha, hexagonal)
            dists.append(
                disclination_content(body, circle(radius=1.2, segments=128))
                .identity_distance
            )
            dists.append(
                disclination_content(
                    body, circle(center=(1.2, 0.0), radius=0.2, segments=48)
                ).identity_distance
            )
        disl = build_dislocation_body(0.1, 2.0, hexagonal)
        dists.append(
            disclination_content(disl, circle(radius=1.0, segments=96))
            .identity_distance
        )
        for d in dists:
            assert d < 1e-6 or d >= gap, dists
        assert any(d < 1e-6 for d in dists)
        assert any(d >= gap for d in dists)
