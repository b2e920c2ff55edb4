import numpy as np
import pytest

from defectmech import (
    MinimizeOptions,
    assemble_energy,
    assemble_gradient,
    bc_affine,
    bc_identity,
    bc_none,
    build_mesh,
    build_trivial_body,
    build_dislocation_body,
    build_disclination_body,
    mesh_for_body,
    minimize,
    neo_hookean,
)
from defectmech.domains import Annulus, Rect
from defectmech.elasticity import EnergyAssembly, TriMesh
from defectmech.errors import MeshError, StalledDescentError

from conftest import rot


class TestBuildMesh:
    def test_unit_square_resolution_2(self):
        mesh = build_mesh(Rect(0, 1, 0, 1), 2)
        assert mesh.n_triangles == 8
        assert mesh.n_vertices == 9
        assert np.all(mesh.areas() > 1e-12)

    def test_annulus_triangle_count(self):
        for n in (4, 8, 12):
            mesh = build_mesh(Annulus(1.0, 2.0), n)
            assert mesh.n_triangles == 2 * n * n
            assert np.all(mesh.areas() > 1e-12)

    def test_triangle_diameter_bound(self):
        for n in (4, 8, 16):
            mesh = build_mesh(Rect(0, 1, 0, 1), n)
            v = mesh.vertices[mesh.triangles]
            diam = max(
                np.linalg.norm(v[:, i] - v[:, j], axis=1).max()
                for i in range(3) for j in range(i)
            )
            assert diam <= np.sqrt(2.0) / n + 1e-12

    def test_resolution_floor(self):
        with pytest.raises(MeshError):
            build_mesh(Rect(0, 1, 0, 1), 1)

    def test_boundary_markers(self):
        mesh = build_mesh(Rect(0, 1, 0, 1), 4)
        onb = (np.isclose(mesh.vertices[:, 0], 0) | np.isclose(mesh.vertices[:, 0], 1)
               | np.isclose(mesh.vertices[:, 1], 0) | np.isclose(mesh.vertices[:, 1], 1))
        np.testing.assert_array_equal(mesh.boundary, onb)

    def test_mesh_for_disclination_body_assigns_charts(self, disclination_body):
        mesh = mesh_for_body(disclination_body, 12)
        assert mesh.chart_index is not None
        assert np.all(mesh.chart_index >= 0)
        assert set(np.unique(mesh.chart_index)) == {0, 1}


class TestAssembleEnergy:
    def test_trivial_identity_zero(self, trivial_body):
        mesh = mesh_for_body(trivial_body, 6)
        assert assemble_energy(trivial_body, mesh, mesh.vertices) == pytest.approx(0.0, abs=1e-14)

    def test_uniform_stretch_closed_form_any_resolution(self, neo):
        # constant integrand: exactly lam^2 + 1 + (lam - 1)^2, resolution-free
        body = build_trivial_body(neo)
        lam = 1.3
        expect = lam**2 + 1 + (lam - 1) ** 2
        for n in (2, 5, 16):
            mesh = mesh_for_body(body, n)
            E = assemble_energy(body, mesh, mesh.vertices @ np.diag([lam, 1.0]).T)
            assert E == pytest.approx(expect, rel=1e-13)

    def test_disclination_identity_embedding_positive(self, disclination_body):
        mesh = mesh_for_body(disclination_body, 16)
        E = assemble_energy(disclination_body, mesh, mesh.vertices)
        # brute-force per-triangle re-evaluation as the oracle
        E_brute = 0.0
        for t in range(mesh.n_triangles):
            ids = mesh.triangles[t]
            x = mesh.vertices[ids]
            D = np.column_stack([x[1] - x[0], x[2] - x[0]])
            A = np.column_stack([x[1] - x[0], x[2] - x[0]]) @ np.linalg.inv(D)
            c = x.mean(axis=0)
            P = disclination_body.charts[mesh.chart_index[t]].frames(c)
            W = disclination_body.archetype(A @ np.linalg.inv(P))
            E_brute += W * abs(np.linalg.det(P)) * 0.5 * abs(np.linalg.det(D))
        assert E == pytest.approx(E_brute, rel=1e-12)
        assert E > 0.01

    def test_frame_indifference(self, disclination_body):
        mesh = mesh_for_body(disclination_body, 10)
        E = assemble_energy(disclination_body, mesh, mesh.vertices)
        E_rot = assemble_energy(disclination_body, mesh, mesh.vertices @ rot(0.9).T)
        assert abs(E - E_rot) < 1e-10

    def test_chart_independence(self, disclination_body):
        mesh = mesh_for_body(disclination_body, 10)
        E = assemble_energy(disclination_body, mesh, mesh.vertices)
        relaxed = [c.domain.relaxed(1e-6) for c in disclination_body.charts]
        alt = mesh.chart_index.copy()
        tri_pts = mesh.vertices[mesh.triangles]
        swapped = 0
        for t in range(mesh.n_triangles):
            for k in range(len(disclination_body.charts)):
                if k != mesh.chart_index[t] and relaxed[k].contains_triangle(tri_pts[t]):
                    alt[t] = k
                    swapped += 1
                    break
        assert swapped > 0
        mesh_alt = TriMesh(mesh.vertices, mesh.triangles, mesh.boundary,
                           mesh.domain, alt)
        E_alt = assemble_energy(disclination_body, mesh_alt, mesh.vertices)
        assert abs(E - E_alt) < 1e-10

    def test_refinement_convergence_order(self, neo):
        # smooth nonlinear configuration on the trivial body: assembled
        # energy converges to the quadrature oracle at order ~2
        body = build_trivial_body(neo)

        def f(p):
            p = np.asarray(p, float)
            return np.stack([p[..., 0] + 0.1 * np.sin(np.pi * p[..., 1]),
                             p[..., 1] + 0.05 * np.cos(np.pi * p[..., 0])], axis=-1)

        def df(p):
            p = np.asarray(p, float)
            out = np.zeros(p.shape[:-1] + (2, 2))
            out[..., 0, 0] = 1.0
            out[..., 0, 1] = 0.1 * np.pi * np.cos(np.pi * p[..., 1])
            out[..., 1, 0] = -0.05 * np.pi * np.sin(np.pi * p[..., 0])
            out[..., 1, 1] = 1.0
            return out

        x, w = np.polynomial.legendre.leggauss(48)
        t = 0.5 * (x + 1)
        w = 0.5 * w
        X, Y = np.meshgrid(t, t, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        E_exact = float(np.sum(np.outer(w, w).ravel() * neo(df(pts))))
        errs = []
        for n in (8, 16, 32):
            mesh = mesh_for_body(body, n)
            errs.append(abs(assemble_energy(body, mesh, f(mesh.vertices)) - E_exact))
        order = np.log2(errs[0] / errs[2]) / 2.0
        assert order >= 1.8
        assert errs[0] > errs[1] > errs[2]


class TestAssembleGradient:
    def test_zero_at_global_minimum(self, trivial_body):
        mesh = mesh_for_body(trivial_body, 5)
        g = assemble_gradient(trivial_body, mesh, mesh.vertices)
        assert np.abs(g).max() < 1e-10

    def test_matches_fd(self, neo):
        body = build_trivial_body(neo)
        mesh = mesh_for_body(body, 4)
        rng = np.random.default_rng(9)
        pos = mesh.vertices + 0.05 * rng.standard_normal(mesh.vertices.shape)
        asm = EnergyAssembly(body, mesh)
        g = asm.gradient(pos)
        h = 1e-6
        gfd = np.zeros_like(g)
        for i in range(pos.shape[0]):
            for j in range(2):
                pp, pm = pos.copy(), pos.copy()
                pp[i, j] += h
                pm[i, j] -= h
                gfd[i, j] = (asm.energy(pp) - asm.energy(pm)) / (2 * h)
        assert np.abs(g - gfd).max() / np.abs(gfd).max() < 1e-5

    def test_translation_invariance(self, neo):
        body = build_trivial_body(neo)
        mesh = mesh_for_body(body, 6)
        rng = np.random.default_rng(2)
        pos = mesh.vertices + 0.1 * rng.standard_normal(mesh.vertices.shape)
        g = assemble_gradient(body, mesh, pos)
        assert np.abs(g.sum(axis=0)).max() < 1e-12


class TestMinimize:
    def test_trivial_identity_bc_reaches_zero(self, trivial_body):
        mesh = mesh_for_body(trivial_body, 6)
        rng = np.random.default_rng(3)
        x0 = mesh.vertices.copy()
        x0[~mesh.boundary] += 0.03 * rng.standard_normal(x0[~mesh.boundary].shape)
        res = minimize(trivial_body, mesh, bc_identity(mesh), MinimizeOptions(x0=x0))
        assert res.energy < 1e-10
        assert res.iterations < 50

    def test_stretched_bc_monotone_and_converged(self, neo):
        body = build_trivial_body(neo)
        mesh = mesh_for_body(body, 8)
        asm = EnergyAssembly(body, mesh)

        res = minimize(body, mesh, bc_affine(mesh, np.diag([1.2, 1.0])))
        assert res.converged and res.grad_norm < 1e-8
        # energy of the final iterate cannot exceed the pinned start
        x0 = mesh.vertices.copy()
        idx = np.flatnonzero(mesh.boundary)
        x0[idx] = mesh.vertices[idx] @ np.diag([1.2, 1.0]).T
        assert res.energy <= asm.energy(x0) + 1e-12

    def test_dislocation_free_boundary_energy_decreases_with_resolution(self, isotropic):
        body = build_dislocation_body(0.1, 2.0, isotropic)
        energies = []
        for n in (8, 16, 32):
            mesh = mesh_for_body(body, n)
            res = minimize(body, mesh, bc_none(),
                           MinimizeOptions(gtol=1e-6, max_iter=3000))
            energies.append(res.energy)
        assert energies[0] > energies[1] > energies[2]
        assert all(e > 0 for e in energies)

    def test_disclination_energy_decreases_under_minimization(self, disclination_body):
        mesh = mesh_for_body(disclination_body, 12)
        start = assemble_energy(disclination_body, mesh, mesh.vertices)
        res = minimize(disclination_body, mesh, bc_none(),
                       MinimizeOptions(gtol=1e-6, max_iter=1500))
        assert res.energy < start

    def test_stalled_descent_carries_iterate(self, neo):
        body = build_trivial_body(neo)
        mesh = mesh_for_body(body, 4)
        rng = np.random.default_rng(8)
        x0 = mesh.vertices + 0.3 * rng.standard_normal(mesh.vertices.shape)
        with pytest.raises(StalledDescentError) as exc:
            minimize(body, mesh, bc_none(),
                     MinimizeOptions(x0=x0, max_backtracks=1))
        assert exc.value.positions is not None
        assert exc.value.positions.shape == mesh.vertices.shape

    def test_max_iter_returns_unconverged(self, neo):
        body = build_trivial_body(neo)
        mesh = mesh_for_body(body, 6)
        res = minimize(body, mesh, bc_affine(mesh, np.diag([1.5, 1.0])),
                       MinimizeOptions(max_iter=2))
        assert res.iterations == 2 and not res.converged
