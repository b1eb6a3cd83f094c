import dataclasses
import math
from collections import Counter

import numpy as np
import pytest

from abpcap.capillary import halfplane_obstacle, polygon_area
from abpcap.errors import NoGammaVertices, NonSimplePolygon, OverlappingScene
from abpcap.neumann import (
    CONTACT,
    GAMMA,
    INTERIOR,
    SIGMA,
    _TouchIndex,
    abp_chain_report,
    build_marked_mesh,
    cap_domain,
    estimate_sets,
    fit_quadratic_error,
    gamma_touch,
    solve_neumann,
    touching_classify,
)

SQUARE_OFF = np.array([[0, 2], [1, 2], [1, 3], [0, 3]], dtype=float)


@pytest.fixture(scope="module")
def half_disk():
    omega, obstacle = cap_domain(0.0, 0.05)
    return omega, obstacle, build_marked_mesh(omega, obstacle, 0.05)


@pytest.fixture(scope="module")
def half_disk_solution(half_disk):
    return solve_neumann(half_disk[2], 0.0)


def test_half_disk_markers(half_disk):
    omega, _, mesh = half_disk
    V = mesh.vertices
    gam = mesh.boundary_edges[mesh.edge_markers == GAMMA]
    sig = mesh.boundary_edges[mesh.edge_markers == SIGMA]
    assert np.all(np.abs(V[gam.ravel(), 1]) <= 1e-12)
    r = np.hypot(V[sig.ravel(), 0], V[sig.ravel(), 1])
    assert np.all(np.abs(r - 1.0) <= 1e-3)
    corners = np.flatnonzero(mesh.vertex_markers == CONTACT)
    assert len(corners) == 2
    assert sorted(V[corners, 0].round(12).tolist()) == [-1.0, 1.0]
    assert mesh.gamma_length == pytest.approx(2.0, abs=1e-12)
    assert mesh.area == pytest.approx(polygon_area(omega), rel=1e-12)


def test_mesh_is_conforming_and_well_shaped(half_disk):
    mesh = half_disk[2]
    assert np.all(mesh.triangle_areas > 0)
    assert mesh.min_angle >= 15.0
    edges = Counter()
    for t in mesh.triangles:
        for k in range(3):
            edges[tuple(sorted((t[k], t[(k + 1) % 3])))] += 1
    assert set(edges.values()) <= {1, 2}
    boundary = {e for e, n in edges.items() if n == 1}
    assert boundary == {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    # gamma-sigma junctions are exactly the vertices on both marker sets
    on = {m: set(mesh.boundary_edges[mesh.edge_markers == m].ravel()) for m in (SIGMA, GAMMA)}
    assert set(np.flatnonzero(mesh.vertex_markers == CONTACT)) == on[SIGMA] & on[GAMMA]
    assert set(mesh.gamma_vertices) == on[GAMMA]
    assert np.allclose(mesh.gamma_normals[mesh.gamma_vertices], [0.0, 1.0])


def test_mesh_is_deterministic(half_disk):
    omega, obstacle, mesh = half_disk
    again = build_marked_mesh(omega, obstacle, 0.05)
    assert np.array_equal(again.vertices, mesh.vertices)
    assert np.array_equal(again.triangles, mesh.triangles)


def test_mesh_json_shape(half_disk):
    data = half_disk[2].to_json()
    assert set(data) == {"vertices", "triangles", "edge_markers"}
    assert {m for *_, m in data["edge_markers"]} == {"sigma", "gamma"}


def test_mesh_input_errors():
    with pytest.raises(NonSimplePolygon):
        build_marked_mesh([[0, 1], [3, 2], [3, 1], [1, 3]], None, 0.2)
    with pytest.raises(OverlappingScene):
        build_marked_mesh([[0, -1], [1, -1], [1, 1], [0, 1]], halfplane_obstacle(10.0), 0.2)


def test_square_off_obstacle():
    mesh = build_marked_mesh(SQUARE_OFF, halfplane_obstacle(10.0), 0.1)
    assert len(mesh.gamma_vertices) == 0 and np.all(mesh.edge_markers == SIGMA)
    sol = solve_neumann(mesh, 0.3)
    assert sol.c == pytest.approx(4.0, abs=1e-12)
    assert abs(np.dot(sol.mass, sol.u)) <= 1e-12
    est = estimate_sets(sol, 2000, 0)
    assert est.B_hat is None and est.violation_fraction is None
    assert 0.0 <= est.A_hat <= math.pi
    with pytest.raises(NoGammaVertices):
        gamma_touch(sol, [0.1, 0.2])


def test_compatibility_and_galerkin_residual(half_disk_solution):
    sol = half_disk_solution
    assert sol.c == pytest.approx((sol.sigma_length - sol.lam * sol.gamma_length) / sol.area, abs=0)
    # testing the weak form against the constant function
    assert abs(math.fsum(sol.load)) <= 1e-12 * np.abs(sol.load).sum()
    res = sol.stiffness @ sol.u - sol.load
    assert np.abs(res).max() <= 1e-10 * np.abs(sol.load).max()
    assert sol.residual <= 1e-10
    assert abs(np.dot(sol.mass, sol.u)) <= 1e-12


def test_lambda_sign_flip(half_disk):
    mesh = half_disk[2]
    a, b = solve_neumann(mesh, 0.4), solve_neumann(mesh, -0.4)
    assert b.c - a.c == pytest.approx(2 * 0.4 * mesh.gamma_length / mesh.area, rel=1e-12)
    # the boundary part of the load is linear in lambda
    diff = (b.load + b.c * b.mass) - (a.load + a.c * a.mass)
    off_gamma = np.setdiff1d(np.arange(len(diff)), mesh.gamma_vertices)
    assert np.allclose(diff[off_gamma], 0.0, atol=1e-14)
    assert np.all(diff[mesh.gamma_vertices] > 0)


def test_cap_solution_is_near_quadratic(half_disk_solution):
    sol = half_disk_solution
    assert sol.c == pytest.approx(2.0, rel=0.01)
    err, x0 = fit_quadratic_error(sol)
    assert err < 0.01
    assert np.allclose(x0, [0.0, 0.0], atol=0.01)


def test_touching_at_zero_slope(half_disk_solution):
    # the paraboloid's center lies on the facet, so the touch is on Gamma near it
    t = touching_classify(half_disk_solution, [0.0, 0.0])
    assert t.kind == "gamma" and not t.on_contact_line
    assert np.linalg.norm(half_disk_solution.mesh.vertices[t.vertex]) < 0.05
    assert touching_classify(half_disk_solution, [0.0, 0.0]) == t


def test_touching_at_zero_slope_is_interior_below_half():
    omega, obstacle = cap_domain(-0.5, 0.1)
    sol = solve_neumann(build_marked_mesh(omega, obstacle, 0.1), -0.5)
    t = touching_classify(sol, [0.0, 0.0])
    assert t.kind == "interior"
    assert np.linalg.norm(sol.mesh.vertices[t.vertex] - [0.0, 0.5]) < 0.1


def test_touching_ignores_constant_shift(half_disk_solution):
    shifted = dataclasses.replace(half_disk_solution, u=half_disk_solution.u + 7.5)
    rng = np.random.default_rng(3)
    for xi in rng.uniform(-0.7, 0.7, (50, 2)):
        assert touching_classify(shifted, xi) == touching_classify(half_disk_solution, xi)


def test_lifted_index_matches_brute_force(half_disk_solution):
    sol = half_disk_solution
    Y, u = sol.mesh.vertices, np.asarray(sol.u)
    xi = np.random.default_rng(5).uniform(-1, 1, (3000, 2))
    fast = _TouchIndex(Y, u, np.arange(len(u))).argmin(xi)
    score = u[None, :] - xi @ Y.T
    slow = np.argmin(score, axis=1)
    same = fast == slow
    # only exact score ties may differ
    tie = np.abs(score[np.arange(len(xi)), fast] - score[np.arange(len(xi)), slow]) <= 1e-13
    assert np.all(same | tie)
    g = sol.mesh.gamma_vertices
    fast_g = _TouchIndex(Y, u, g).argmin(xi[:200])
    slow_g = [gamma_touch(sol, x) for x in xi[:200]]
    assert fast_g.tolist() == slow_g


def test_chain_on_the_cap(half_disk_solution):
    rep = abp_chain_report(half_disk_solution, 50_000, 1, h=0.05)
    assert rep.upper_ok and rep.lower_ok
    assert rep.A_hat == pytest.approx(math.pi / 2, rel=0.03)
    assert rep.bound == pytest.approx(math.pi / 2, rel=0.02)
    assert rep.violation_fraction < 0.03
    assert set(rep.to_json()) >= {"c", "A_hat", "cap", "bound", "tolerance", "note"}


def test_chain_on_a_square_droplet_has_slack():
    mesh = build_marked_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], halfplane_obstacle(10.0), 0.1)
    sol = solve_neumann(mesh, 0.0)
    rep = abp_chain_report(sol, 20_000, 2, h=0.1)
    assert sol.c == pytest.approx(3.0, abs=1e-12)
    assert rep.bound > rep.A_hat + 0.1
    assert rep.A_hat >= rep.cap - rep.tolerance


def test_estimates_are_seeded(half_disk_solution):
    a = estimate_sets(half_disk_solution, 5000, 9)
    assert a == estimate_sets(half_disk_solution, 5000, 9)
