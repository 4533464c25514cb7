"""Mesh data model, generators, refinement and I/O tests."""

import numpy as np
import pytest

from polyvem import mesh as M

UNIT_SQUARE = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


class TestPolyMeshBasics:
    def test_unit_square_cell(self):
        mesh = M.PolyMesh(UNIT_SQUARE, [[0, 1, 2, 3]])
        g = mesh.cell_geometry(0)
        assert g.area == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(g.centroid, [0.5, 0.5], atol=1e-15)
        assert g.diameter == pytest.approx(np.sqrt(2.0), abs=1e-15)
        assert mesh.h == pytest.approx(np.sqrt(2.0), abs=1e-15)
        np.testing.assert_allclose(g.edge_lengths, np.ones(4), atol=1e-15)
        np.testing.assert_allclose(
            g.normals, [[0, -1], [1, 0], [0, 1], [-1, 0]], atol=1e-15
        )

    def test_reference_triangle(self):
        mesh = M.PolyMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
        g = mesh.cell_geometry(0)
        assert g.area == pytest.approx(0.5, abs=1e-15)
        np.testing.assert_allclose(g.centroid, [1 / 3, 1 / 3], atol=1e-15)

    def test_regular_hexagon(self):
        ang = np.arange(6) * np.pi / 3
        mesh = M.PolyMesh(np.column_stack([np.cos(ang), np.sin(ang)]), [list(range(6))])
        assert mesh.cell_geometry(0).area == pytest.approx(3 * np.sqrt(3) / 2, rel=1e-14)
        assert mesh.cell_geometry(0).diameter == pytest.approx(2.0, abs=1e-14)

    def test_edge_connectivity_two_cells(self):
        mesh = M.PolyMesh(
            [[0, 0], [1, 0], [2, 0], [2, 1], [1, 1], [0, 1]],
            [[0, 1, 4, 5], [1, 2, 3, 4]],
        )
        assert mesh.num_edges == 7
        shared = mesh.edge_id(1, 4)
        assert not mesh.boundary_edges[shared]
        assert set(mesh.edge_cells[shared]) == {0, 1}
        assert mesh.boundary_edges.sum() == 6
        assert mesh.boundary_vertices.all()  # every vertex touches the outer boundary

    def test_cell_edge_ids_orientation(self):
        mesh = M.PolyMesh(UNIT_SQUARE, [[0, 1, 2, 3]])
        ids, forward = mesh.cell_edge_ids(0)
        # loop 0->1->2->3->0: edges (0,1) (1,2) (2,3) (3,0); last is reversed
        assert list(forward) == [True, True, True, False]
        assert sorted(ids) == list(range(4))

    @pytest.mark.parametrize(
        "vertices,cells,fragment",
        [
            ([[0, 0], [1, 0]], [[0, 1]], "at least 3"),
            (UNIT_SQUARE, [[0, 1, 2, 7]], "out of range"),
            (UNIT_SQUARE, [[0, 1, 2, 1]], "repeats"),
            (UNIT_SQUARE, [[0, 3, 2, 1]], "not CCW"),
            ([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], [[0, 1, 4], [0, 1, 4]], "same direction"),
        ],
    )
    def test_validation_errors(self, vertices, cells, fragment):
        with pytest.raises(M.MeshError, match=fragment.replace("(", r"\(")):
            M.PolyMesh(vertices, cells)


class TestDistortedFamily:
    def test_zero_distortion_is_uniform_grid(self):
        mesh = M.generate_distorted_square_mesh(2, 0.0, seed=0)
        assert mesh.num_cells == 4
        assert mesh.h == pytest.approx(np.sqrt(2.0) / 2.0, abs=1e-15)
        assert mesh.total_area() == pytest.approx(1.0, abs=1e-14)

    def test_distorted_16_cells_partition(self):
        mesh = M.generate_distorted_square_mesh(4, 0.3, seed=1)
        assert mesh.num_cells == 16
        assert mesh.total_area() == pytest.approx(1.0, abs=1e-12)
        # corners pinned, boundary vertices stay on the boundary
        for corner in UNIT_SQUARE:
            assert any(np.allclose(v, corner, atol=1e-15) for v in mesh.vertices)
        on_bdry = mesh.vertices[mesh.boundary_vertices]
        dist = np.minimum(
            np.minimum(on_bdry[:, 0], 1 - on_bdry[:, 0]),
            np.minimum(on_bdry[:, 1], 1 - on_bdry[:, 1]),
        )
        assert np.abs(dist).max() < 1e-14

    def test_coarsest_h_band(self):
        mesh = M.generate_distorted_square_mesh(4, 0.3, seed=0)
        assert 0.35 <= mesh.h <= 0.5

    def test_determinism(self):
        a = M.generate_distorted_square_mesh(8, 0.3, seed=11)
        b = M.generate_distorted_square_mesh(8, 0.3, seed=11)
        np.testing.assert_array_equal(a.vertices, b.vertices)

    def test_all_cells_simple_across_seeds(self):
        for seed in range(8):
            mesh = M.generate_distorted_square_mesh(8, 0.45, seed=seed)
            assert mesh.total_area() == pytest.approx(1.0, abs=1e-12)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            M.generate_distorted_square_mesh(1, 0.3)
        with pytest.raises(ValueError):
            M.generate_distorted_square_mesh(4, 0.5)


class TestVoronoiFamily:
    def test_quadrant_seeds_give_blocks(self):
        seeds = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
        mesh = M.voronoi_mesh_from_seeds(seeds, lloyd_iterations=0)
        assert mesh.num_cells == 4
        for ci in range(4):
            assert mesh.cell_geometry(ci).area == pytest.approx(0.25, abs=1e-12)

    def test_partition_and_convexity(self):
        mesh = M.generate_voronoi_mesh(64, lloyd_iterations=3, seed=7)
        assert mesh.num_cells == 64
        assert mesh.total_area() == pytest.approx(1.0, abs=1e-10)
        for ci in range(mesh.num_cells):
            c = mesh.cell_geometry(ci).coords
            prev = c - np.roll(c, 1, axis=0)
            nxt = np.roll(c, -1, axis=0) - c
            cross = prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0]
            assert (cross > -1e-12).all()

    def test_coarsest_h_band(self):
        mesh = M.generate_voronoi_mesh(16, lloyd_iterations=3, seed=0)
        assert 0.25 <= mesh.h <= 0.4

    def test_lloyd_reduces_spread(self):
        rough = M.generate_voronoi_mesh(49, lloyd_iterations=0, seed=2)
        smooth = M.generate_voronoi_mesh(49, lloyd_iterations=4, seed=2)

        def spread(mesh):
            areas = [mesh.cell_geometry(i).area for i in range(mesh.num_cells)]
            return np.std(areas) / np.mean(areas)

        assert spread(smooth) < spread(rough)

    def test_determinism(self):
        a = M.generate_voronoi_mesh(36, 2, seed=5)
        b = M.generate_voronoi_mesh(36, 2, seed=5)
        np.testing.assert_array_equal(a.vertices, b.vertices)


class TestConcaveFamily:
    def test_two_cells_partition_unit_square(self):
        mesh = M.generate_concave_mesh(1)
        assert mesh.num_cells == 2
        assert mesh.total_area() == pytest.approx(1.0, abs=1e-14)
        for ci in range(2):
            assert mesh.cell_geometry(ci).area == pytest.approx(0.5, abs=1e-14)

    def test_each_cell_has_one_reflex_vertex(self):
        mesh = M.generate_concave_mesh(1)
        for ci in range(2):
            c = mesh.cell_geometry(ci).coords
            prev = c - np.roll(c, 1, axis=0)
            nxt = np.roll(c, -1, axis=0) - c
            cross = prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0]
            assert (cross < -1e-12).sum() == 1

    def test_cell_counts_and_conformity(self):
        mesh = M.generate_concave_mesh(2)
        assert mesh.num_cells == 8
        assert mesh.total_area() == pytest.approx(1.0, abs=1e-13)

    def test_exact_h_halving(self):
        h2 = M.generate_concave_mesh(2).h
        h4 = M.generate_concave_mesh(4).h
        assert abs(h2 / h4 - 2.0) < 1e-12

    def test_h_value(self):
        # diameter of each half-square piece is sqrt(1 + 1/4) * side
        mesh = M.generate_concave_mesh(1)
        assert mesh.h == pytest.approx(np.sqrt(1.25), abs=1e-14)


class TestRefinement:
    def test_refine_single_cell(self):
        mesh = M.generate_distorted_square_mesh(2, 0.0, seed=0)
        fine = M.refine_cells(mesh, [0])
        assert fine.num_cells == 7
        assert fine.total_area() == pytest.approx(1.0, abs=1e-13)
        sizes = sorted(len(c) for c in fine.cells)
        # four children (quads), two neighbors gain one hanging vertex each
        assert sizes == [4, 4, 4, 4, 4, 5, 5]

    def test_refine_all_removes_hanging_nodes(self):
        n = 4
        mesh = M.generate_distorted_square_mesh(n, 0.2, seed=3)
        fine = M.refine_cells(mesh, range(mesh.num_cells))
        assert fine.num_cells == (2 * n) ** 2
        assert fine.num_vertices == (2 * n + 1) ** 2
        assert all(len(c) == 4 for c in fine.cells)

    def test_shared_midpoint_reused(self):
        mesh = M.generate_distorted_square_mesh(2, 0.0, seed=0)
        fine = M.refine_cells(mesh, [0, 1])  # two horizontally adjacent cells
        # the midpoint of the shared edge must appear exactly once
        assert fine.total_area() == pytest.approx(1.0, abs=1e-13)
        coords = [tuple(v) for v in fine.vertices]
        assert len(coords) == len(set(coords))

    def test_hanging_then_refine_neighbor(self):
        mesh = M.generate_distorted_square_mesh(2, 0.0, seed=0)
        once = M.refine_cells(mesh, [0])
        hanging_cell = next(ci for ci in range(once.num_cells) if len(once.cells[ci]) == 5)
        twice = M.refine_cells(once, [hanging_cell])
        assert twice.total_area() == pytest.approx(1.0, abs=1e-13)
        coords = [tuple(v) for v in twice.vertices]
        assert len(coords) == len(set(coords))

    def test_local_refinement_concentrates(self):
        mesh = M.generate_distorted_square_mesh(4, 0.0, seed=0)
        center = np.array([0.5, 0.5])
        for _ in range(2):
            marked = [
                ci
                for ci in range(mesh.num_cells)
                if np.linalg.norm(mesh.cell_geometry(ci).centroid - center) < 0.25
            ]
            mesh = M.refine_cells(mesh, marked)
        inside = sum(
            1
            for ci in range(mesh.num_cells)
            if np.linalg.norm(mesh.cell_geometry(ci).centroid - center) < 0.25
        )
        assert inside / mesh.num_cells >= 0.5

    def test_non_quad_cell_rejected(self):
        mesh = M.generate_concave_mesh(1)
        with pytest.raises(M.MeshError, match="quad-derived"):
            M.refine_cells(mesh, [0])

    def test_empty_marking_is_identity(self):
        mesh = M.generate_distorted_square_mesh(3, 0.2, seed=0)
        same = M.refine_cells(mesh, [])
        assert same.num_cells == mesh.num_cells
        np.testing.assert_array_equal(same.vertices, mesh.vertices)


class TestMeshIO:
    def test_roundtrip_bitwise(self, tmp_path):
        mesh = M.refine_cells(M.generate_distorted_square_mesh(3, 0.3, seed=9), [0, 4])
        path = tmp_path / "mesh.txt"
        M.write_mesh(path, mesh)
        back = M.read_mesh(path)
        assert M.mesh_to_string(back) == M.mesh_to_string(mesh)
        np.testing.assert_array_equal(back.vertices, mesh.vertices)

    def test_parse_error_reports_line(self):
        text = "polymesh 1\nvertices 2\n0.0 0.0\nnot numbers\ncells 0\n"
        with pytest.raises(M.MeshError, match="line 4"):
            M.mesh_from_string(text)

    def test_bad_header(self):
        with pytest.raises(M.MeshError, match="header"):
            M.mesh_from_string("wrong 2\n")

    def test_truncated_file(self):
        with pytest.raises(M.MeshError):
            M.mesh_from_string("polymesh 1\nvertices 5\n0 0\n")

    def test_invalid_mesh_content(self):
        text = "polymesh 1\nvertices 3\n0.0 0.0\n1.0 0.0\n0.0 1.0\ncells 1\n3 0 2 1\n"
        with pytest.raises(M.MeshError, match="invalid mesh"):
            M.mesh_from_string(text)


class TestQuality:
    def test_report_fields(self):
        mesh = M.generate_distorted_square_mesh(4, 0.3, seed=1)
        rep = M.compute_quality(mesh)
        assert rep.num_cells == 16
        assert rep.h == pytest.approx(mesh.h)
        assert 0 < rep.min_edge_ratio < 1
        assert 0 < rep.min_kernel_ratio < 1
        assert "cells=16" in str(rep)

    def test_concave_cells_are_star_shaped(self):
        mesh = M.generate_concave_mesh(2)
        rep = M.compute_quality(mesh)
        assert rep.min_kernel_ratio > 0.05
