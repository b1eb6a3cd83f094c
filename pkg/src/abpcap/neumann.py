"""Mixed Neumann problem on polygonal droplets and the discrete ABP chain.

The droplet boundary splits into the free part Sigma and the wetted part
Gamma.  We solve ``Lap u = c`` with ``du/dn = 1`` on Sigma and ``-lam`` on
Gamma by P1 finite elements, where ``c = (|Sigma| - lam |Gamma|) / |Omega|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import shapely
from scipy import sparse
from scipy.sparse.linalg import cg
from scipy.spatial import Delaunay, cKDTree
from shapely.geometry import LineString, Polygon

from .constants import GALERKIN_RTOL, MIN_MESH_ANGLE, OVERLAP_TOL, SNAP_TOL, SOLVER_RTOL
from .convexbody import ConvexSection, boundary_normal
from .errors import (
    MeshQualityFailure,
    NoGammaVertices,
    NonSimplePolygon,
    OverlappingScene,
    SolverDivergence,
)
from .geom2d import _check_lambda, cap_volume

INTERIOR, SIGMA, GAMMA, CONTACT = 0, 1, 2, 3
CLASS_NAMES = {INTERIOR: "interior", SIGMA: "sigma", GAMMA: "gamma", CONTACT: "gamma"}

#: Boundary node spacing as a fraction of the interior target size.
BOUNDARY_RATIO = 0.25
#: Growth rate of the element size away from the boundary.
GRADING = 0.3
SMOOTHING_STEPS = 30

#: Mesh-error constant in the chain tolerance ``3 stderr + C h``.
CHAIN_CONSTANT = 1.0


def _orient_ccw(P: np.ndarray) -> np.ndarray:
    x, y = P[:, 0], P[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return P if area > 0 else P[::-1].copy()


def _edge_is_wetted(obstacle: Optional[ConvexSection], a, b, snap) -> np.ndarray:
    if obstacle is None:
        return np.zeros(len(a), dtype=bool)
    probes = np.concatenate((a, b, 0.5 * (a + b)))
    return np.all(obstacle.boundary_distance(probes).reshape(3, -1) <= snap, axis=0)


@dataclass(frozen=True, eq=False)
class MarkedMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_markers: np.ndarray
    vertex_markers: np.ndarray
    gamma_normals: np.ndarray

    @property
    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self) -> float:
        return math.fsum(self.triangle_areas)

    def _length(self, marker) -> float:
        e = self.boundary_edges[self.edge_markers == marker]
        return math.fsum(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1))

    @property
    def sigma_length(self) -> float:
        return self._length(SIGMA)

    @property
    def gamma_length(self) -> float:
        return self._length(GAMMA)

    @property
    def gamma_vertices(self) -> np.ndarray:
        return np.flatnonzero((self.vertex_markers == GAMMA) | (self.vertex_markers == CONTACT))

    @property
    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        worst = 180.0
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            worst = min(worst, float(np.degrees(np.arccos(np.clip(cos, -1, 1))).min()))
        return worst

    def to_json(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "edge_markers": [
                [int(a), int(b), "gamma" if m == GAMMA else "sigma"]
                for (a, b), m in zip(self.boundary_edges, self.edge_markers)
            ],
        }


def _boundary_nodes(P: np.ndarray, wet: np.ndarray, hb: float):
    nodes, markers = [], []
    for k in range(len(P)):
        a, b = P[k], P[(k + 1) % len(P)]
        m = max(1, int(math.ceil(np.linalg.norm(b - a) / hb - 1e-9)))
        t = np.arange(m) / m
        nodes.append(a + t[:, None] * (b - a))
        markers.extend([GAMMA if wet[k] else SIGMA] * m)
    nodes = np.concatenate(nodes)
    nb = len(nodes)
    segs = np.column_stack((np.arange(nb), (np.arange(nb) + 1) % nb))
    return nodes, segs, np.array(markers)


def _triangular_lattice(lo, hi, s):
    dy = s * math.sqrt(3) / 2
    ys = np.arange(lo[1], hi[1] + dy, dy)
    xs = np.arange(lo[0], hi[0] + s, s)
    X, Y = np.meshgrid(xs, ys)
    X = X + (np.arange(len(ys))[:, None] % 2) * s / 2
    return np.column_stack((X.ravel(), Y.ravel()))


def _edges_of(tris: np.ndarray) -> np.ndarray:
    e = np.concatenate((tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]))
    return np.sort(e, axis=1)


def _triangulate(points, shape, min_area):
    tris = Delaunay(points).simplices
    cen = points[tris].mean(axis=1)
    keep = shapely.contains_xy(shape, cen[:, 0], cen[:, 1])
    tris = tris[keep]
    p = points[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    tris = tris[np.abs(area) > min_area]
    area = area[np.abs(area) > min_area]
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def build_marked_mesh(
    omega,
    obstacle: Optional[ConvexSection],
    h: float,
    snap: float = SNAP_TOL,
    boundary_ratio: float = BOUNDARY_RATIO,
) -> MarkedMesh:
    """Graded triangulation of the polygon ``omega`` with Sigma/Gamma markers.

    Boundary nodes are placed at spacing ``boundary_ratio * h`` and the size
    grows linearly away from the boundary up to ``h``.  Interior nodes start
    on a triangular lattice thinned to the size field and are relaxed by a
    few rounds of spring smoothing; boundary nodes stay fixed.
    """
    P = _orient_ccw(np.asarray(omega, dtype=float).reshape(-1, 2))
    shape = Polygon(P)
    if len(P) < 3 or not shape.is_valid or shape.area <= 0:
        raise NonSimplePolygon("domain polygon is not simple")
    if obstacle is not None and shape.intersection(Polygon(obstacle.vertices)).area > OVERLAP_TOL:
        raise OverlappingScene("domain overlaps the obstacle")
    wet = _edge_is_wetted(obstacle, P, np.roll(P, -1, axis=0), snap)
    hb = boundary_ratio * h
    bnodes, segs, seg_markers = _boundary_nodes(P, wet, hb)
    ring = LineString(np.vstack((P, P[:1])))
    dense = np.asarray(ring.segmentize(hb / 4).coords)
    tree = cKDTree(dense)

    def dist(z):
        return tree.query(z)[0]

    def size(z):
        return np.minimum(h, hb + GRADING * dist(z))

    lo, hi = P.min(axis=0), P.max(axis=0)
    cand = _triangular_lattice(lo, hi, hb)
    cand = cand[shapely.contains_xy(shape, cand[:, 0], cand[:, 1])]
    s = size(cand)
    rng = np.random.default_rng(0)
    cand = cand[rng.random(len(cand)) < (hb / s) ** 2]
    cand = cand[dist(cand) > 0.6 * size(cand)]
    nb = len(bnodes)
    pts = np.vstack((bnodes, cand))

    for _ in range(SMOOTHING_STEPS):
        tris = _triangulate(pts, shape, 0.0)
        bars = np.unique(_edges_of(tris), axis=0)
        vec = pts[bars[:, 0]] - pts[bars[:, 1]]
        L = np.linalg.norm(vec, axis=1)
        L0 = size(0.5 * (pts[bars[:, 0]] + pts[bars[:, 1]]))
        L0 *= 1.2 * math.sqrt(np.sum(L**2) / np.sum(L0**2))
        F = np.maximum(L0 - L, 0.0)
        Fv = (F / L)[:, None] * vec
        move = np.zeros_like(pts)
        np.add.at(move, bars[:, 0], Fv)
        np.add.at(move, bars[:, 1], -Fv)
        move[:nb] = 0.0
        new = pts + 0.2 * move
        inner = new[nb:]
        ok = shapely.contains_xy(shape, inner[:, 0], inner[:, 1])
        ok &= dist(inner) > 0.4 * size(inner)
        pts[nb:][ok] = inner[ok]

    min_area = 1e-10 * hb * hb
    for _ in range(8):
        tris = _triangulate(pts, shape, min_area)
        edges = _edges_of(tris)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        boundary = {tuple(e) for e in uniq[counts == 1]}
        want = {tuple(sorted(s)) for s in segs}
        missing = [k for k, s in enumerate(segs) if tuple(sorted(s)) not in boundary]
        if not missing and boundary == want:
            break
        if not missing:
            raise MeshQualityFailure("triangulation boundary does not match the domain polygon")
        # split every missing boundary segment at its midpoint
        new_pts = [pts]
        new_segs, new_markers = [], []
        split = set(missing)
        nxt = len(pts)
        for k, (a, b) in enumerate(segs):
            if k in split:
                new_pts.append(0.5 * (pts[a] + pts[b])[None, :])
                new_segs += [(a, nxt), (nxt, b)]
                new_markers += [seg_markers[k]] * 2
                nxt += 1
            else:
                new_segs.append((a, b))
                new_markers.append(seg_markers[k])
        pts = np.vstack(new_pts)
        segs = np.array(new_segs)
        seg_markers = np.array(new_markers)
        # drop interior nodes crowding the new boundary nodes
        added = pts[len(pts) - len(split):]
        interior = np.ones(len(pts), dtype=bool)
        interior[np.unique(segs)] = False
        near = cKDTree(added).query(pts)[0] < 0.5 * hb
        drop = interior & near
        if drop.any():
            remap = np.cumsum(~drop) - 1
            pts = pts[~drop]
            segs = remap[segs]
    else:
        raise MeshQualityFailure("could not recover the domain boundary")

    used = np.zeros(len(pts), dtype=bool)
    used[tris.ravel()] = True
    used[segs.ravel()] = True
    if not used.all():
        remap = np.cumsum(used) - 1
        pts, tris, segs = pts[used], remap[tris], remap[segs]

    vmark = np.zeros(len(pts), dtype=int)
    for (a, b), m in zip(segs, seg_markers):
        for v in (a, b):
            bit = 1 if m == SIGMA else 2
            vmark[v] |= bit
    normals = np.full((len(pts), 2), np.nan)
    for v in np.flatnonzero(vmark >= GAMMA):
        normals[v] = boundary_normal(obstacle, pts[v])
    mesh = MarkedMesh(pts, tris, segs, seg_markers, vmark, normals)
    if mesh.min_angle < MIN_MESH_ANGLE:
        raise MeshQualityFailure(f"minimum angle {mesh.min_angle:.2f} deg is below {MIN_MESH_ANGLE}")
    return mesh


@dataclass(frozen=True, eq=False)
class NeumannSolution:
    mesh: MarkedMesh
    u: np.ndarray
    c: float
    lam: float
    area: float
    sigma_length: float
    gamma_length: float
    residual: float
    stiffness: object = field(repr=False, default=None)
    load: np.ndarray = field(repr=False, default=None)
    mass: np.ndarray = field(repr=False, default=None)


def assemble(mesh: MarkedMesh, lam: float, c: float):
    """Stiffness matrix, lumped mass and load vector of the weak form."""
    V, T = mesh.vertices, mesh.triangles
    p = V[T]
    area = mesh.triangle_areas
    b = np.stack((p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]), axis=1)
    g = np.stack((p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]), axis=1)
    local = (b[:, :, None] * b[:, None, :] + g[:, :, None] * g[:, None, :]) / (4 * area[:, None, None])
    rows = np.repeat(T, 3, axis=1).ravel()
    cols = np.tile(T, (1, 3)).ravel()
    n = len(V)
    K = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mass = np.zeros(n)
    np.add.at(mass, T.ravel(), np.repeat(area / 3, 3))
    E = mesh.boundary_edges
    L = np.linalg.norm(V[E[:, 1]] - V[E[:, 0]], axis=1)
    data = np.where(mesh.edge_markers == GAMMA, -lam, 1.0)
    load = -c * mass
    np.add.at(load, E[:, 0], 0.5 * data * L)
    np.add.at(load, E[:, 1], 0.5 * data * L)
    return K, mass, load


def solve_neumann(mesh: MarkedMesh, lam: float) -> NeumannSolution:
    _check_lambda(lam)
    area = mesh.area
    sigma, gamma = mesh.sigma_length, mesh.gamma_length
    c = (sigma - lam * gamma) / area
    K, mass, load = assemble(mesh, lam, c)
    rhs = load - load.mean()
    diag = K.diagonal()
    precond = sparse.diags(1.0 / diag)
    u, info = cg(K, rhs, rtol=SOLVER_RTOL, atol=0.0, maxiter=20 * len(diag), M=precond)
    if info != 0:
        raise SolverDivergence(f"conjugate gradients stopped with code {info}")
    u = u - np.dot(mass, u) / mass.sum()
    res = K @ u - load
    scale = np.abs(load).max()
    rel = float(np.abs(res).max() / scale)
    if rel > GALERKIN_RTOL:
        raise SolverDivergence(f"relative Galerkin residual {rel:.3e} exceeds {GALERKIN_RTOL}")
    u.setflags(write=False)
    return NeumannSolution(mesh, u, c, float(lam), area, sigma, gamma, rel, K, load, mass)


@dataclass(frozen=True)
class Touch:
    vertex: int
    kind: str
    on_contact_line: bool


def touching_classify(sol: NeumannSolution, xi) -> Touch:
    """Vertex minimizing ``u(y) - xi . y`` (lowest index on ties) and its class."""
    xi = np.asarray(xi, dtype=float)
    score = sol.u - sol.mesh.vertices @ xi
    v = int(np.argmin(score))
    m = int(sol.mesh.vertex_markers[v])
    return Touch(v, CLASS_NAMES[m], m == CONTACT)


class _TouchIndex:
    """Batched argmin of ``u(y) - xi . y`` over a vertex subset.

    Writing the score as ``|xi - y|^2 / 2 + w(y) - |xi|^2 / 2`` with
    ``w = u - |y|^2 / 2``, the argmin is the nearest lifted point
    ``(y, sqrt(2 (w - min w)))`` to ``(xi, 0)``.  The k nearest candidates
    are rescored exactly.
    """

    def __init__(self, Y: np.ndarray, u: np.ndarray, ids: np.ndarray, k: int = 8):
        self.Y, self.u, self.ids = Y[ids], u[ids], ids
        w = self.u - 0.5 * np.einsum("ij,ij->i", self.Y, self.Y)
        lift = np.sqrt(2.0 * (w - w.min()))
        self.tree = cKDTree(np.column_stack((self.Y, lift)))
        self.k = min(k, len(ids))

    def argmin(self, xi: np.ndarray) -> np.ndarray:
        q = np.column_stack((xi, np.zeros(len(xi))))
        _, cand = self.tree.query(q, k=self.k)
        cand = cand.reshape(len(xi), -1)
        score = self.u[cand] - np.einsum("ijk,ik->ij", self.Y[cand], xi)
        best = cand[np.arange(len(xi)), np.argmin(score, axis=1)]
        return self.ids[best]


@dataclass(frozen=True)
class SetEstimates:
    samples: int
    A_hat: float
    A_stderr: float
    B_hat: Optional[float]
    B_stderr: Optional[float]
    violation_fraction: Optional[float]
    violations: int


def _unit_disk_samples(rng, n):
    from .abp import sample_disk

    return sample_disk(rng, n, 1.0)


def estimate_sets(sol: NeumannSolution, samples: int, seed) -> SetEstimates:
    """Monte Carlo measures of the discrete touching sets inside B_1.

    Without Gamma vertices the restricted set is undefined and only A_hat is
    returned.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    mesh = sol.mesh
    rng = np.random.default_rng(seed)
    xi = _unit_disk_samples(rng, samples)
    everything = _TouchIndex(mesh.vertices, np.asarray(sol.u), np.arange(len(sol.u)))
    glob = np.concatenate([everything.argmin(chunk) for chunk in np.array_split(xi, max(1, samples // 65536))])
    interior = mesh.vertex_markers[glob] == INTERIOR
    p = interior.mean()
    A = p * math.pi
    A_err = math.sqrt(p * (1 - p) / samples) * math.pi
    gverts = mesh.gamma_vertices
    if len(gverts) == 0:
        return SetEstimates(samples, A, A_err, None, None, None, 0)
    restricted = _TouchIndex(mesh.vertices, np.asarray(sol.u), gverts)
    ry = np.concatenate([restricted.argmin(chunk) for chunk in np.array_split(xi, max(1, samples // 65536))])
    inB = np.einsum("ij,ij->i", xi, mesh.gamma_normals[ry]) > sol.lam
    q = inB.mean()
    B = q * math.pi
    B_err = math.sqrt(q * (1 - q) / samples) * math.pi
    bad = inB & (mesh.vertex_markers[glob] == SIGMA)
    frac = float(bad.sum() / inB.sum()) if inB.any() else 0.0
    return SetEstimates(samples, A, A_err, B, B_err, frac, int(bad.sum()))


def gamma_touch(sol: NeumannSolution, xi) -> int:
    """Gamma vertex minimizing ``u(y) - xi . y``."""
    g = sol.mesh.gamma_vertices
    if len(g) == 0:
        raise NoGammaVertices("the mesh has no wetted boundary")
    score = sol.u[g] - sol.mesh.vertices[g] @ np.asarray(xi, dtype=float)
    return int(g[np.argmin(score)])


@dataclass(frozen=True)
class ChainReport:
    lam: float
    h: float
    c: float
    area: float
    A_hat: float
    A_stderr: float
    cap: float
    bound: float
    tolerance: float
    upper_ok: bool
    lower_ok: bool
    B_hat: Optional[float]
    violation_fraction: Optional[float]
    note: str = (
        "polygonal obstacle and domain; mesh refinement is numerical evidence, not proof"
    )

    def to_json(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def abp_chain_report(
    sol: NeumannSolution, samples: int, seed, h: float, constant: float = CHAIN_CONSTANT
) -> ChainReport:
    """Endpoints of the chain ``cap <= |A_u ∩ B_1| <= (c/2)^2 |Omega|``."""
    est = estimate_sets(sol, samples, seed)
    cap = cap_volume(2, sol.lam, 1.0)
    bound = (sol.c / 2.0) ** 2 * sol.area
    tol = 3 * est.A_stderr + constant * h
    return ChainReport(
        lam=sol.lam,
        h=float(h),
        c=sol.c,
        area=sol.area,
        A_hat=est.A_hat,
        A_stderr=est.A_stderr,
        cap=cap,
        bound=bound,
        tolerance=tol,
        upper_ok=est.A_hat <= bound + tol,
        lower_ok=est.A_hat >= cap - tol,
        B_hat=est.B_hat,
        violation_fraction=est.violation_fraction,
    )


def cap_domain(lam: float, h: float, boundary_ratio: float = BOUNDARY_RATIO):
    """Polygonal unit cap on ``y = 0`` with arc edges no longer than the boundary spacing."""
    from .capillary import cap_scene

    t0 = math.asin(lam)
    arc = math.pi - 2 * t0
    k = max(64, int(math.ceil(arc / (boundary_ratio * h))))
    scene = cap_scene(lam, k, extent=10.0)
    return scene.droplet, scene.obstacle


def calibrate_chain_constant(lams=(0.0, 0.5), h: float = 0.05, samples: int = 100_000, seed: int = 0) -> float:
    """Largest ``|A_hat - cap| / h`` over cap reference runs."""
    worst = 0.0
    for lam in lams:
        omega, obstacle = cap_domain(lam, h)
        sol = solve_neumann(build_marked_mesh(omega, obstacle, h), lam)
        est = estimate_sets(sol, samples, seed)
        worst = max(worst, abs(est.A_hat - cap_volume(2, lam, 1.0)) / h)
    return worst


def fit_quadratic_error(sol: NeumannSolution) -> tuple[float, np.ndarray]:
    """Max nodal error of u against ``|x - x0|^2 / 2 + const`` with x0, const fitted."""
    Y = sol.mesh.vertices
    r = np.asarray(sol.u) - 0.5 * np.einsum("ij,ij->i", Y, Y)
    A = np.column_stack((-Y, np.ones(len(Y))))
    coef, *_ = np.linalg.lstsq(A, r, rcond=None)
    return float(np.abs(A @ coef - r).max()), coef[:2]
