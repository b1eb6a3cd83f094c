"""Capillary energy of planar polygonal droplets outside convex obstacles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from shapely.geometry import Polygon

from .constants import DEGENERATE_AREA, INEQ_TOL, OVERLAP_TOL, SNAP_TOL
from .convexbody import ConvexSection
from .errors import (
    DegenerateDroplet,
    InvalidSection,
    InvalidVolume,
    NonSimplePolygon,
    OverlappingScene,
)
from .geom2d import _check_lambda, cap_volume


def polygon_area(vertices) -> float:
    V = np.asarray(vertices, dtype=float)
    x, y = V[:, 0], V[:, 1]
    return 0.5 * math.fsum(x * np.roll(y, -1) - np.roll(x, -1) * y)


@dataclass(frozen=True, eq=False)
class CapillaryScene:
    """A convex polygonal obstacle, a simple polygonal droplet and lambda."""

    obstacle: ConvexSection
    droplet: np.ndarray
    lam: float
    snap: float = SNAP_TOL

    def __post_init__(self):
        _check_lambda(self.lam)
        if not self.obstacle.is_polygon:
            raise InvalidSection("capillary obstacles must be polygons")
        D = np.asarray(self.droplet, dtype=float).reshape(-1, 2)
        if len(D) < 3:
            raise DegenerateDroplet("a droplet needs at least 3 vertices")
        if polygon_area(D) < 0:
            D = D[::-1]
        D.setflags(write=False)
        object.__setattr__(self, "droplet", D)
        object.__setattr__(self, "lam", float(self.lam))
        if abs(polygon_area(D)) <= DEGENERATE_AREA:
            raise DegenerateDroplet("droplet area is numerically zero")
        shape = Polygon(D)
        if not shape.is_valid:
            raise NonSimplePolygon("droplet polygon self-intersects")
        overlap = shape.intersection(Polygon(self.obstacle.vertices)).area
        if overlap > OVERLAP_TOL:
            raise OverlappingScene(f"droplet overlaps the obstacle (area {overlap:.3e})")

    def scaled(self, factor: float) -> "CapillaryScene":
        obstacle = ConvexSection.polygon(self.obstacle.vertices * factor)
        return CapillaryScene(obstacle, self.droplet * factor, self.lam, self.snap * factor)

    def to_json(self) -> dict:
        return {
            "obstacle": self.obstacle.to_json(),
            "droplet": self.droplet.tolist(),
            "lambda": self.lam,
            "snap": self.snap,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CapillaryScene":
        return cls(
            ConvexSection.from_json(obj["obstacle"]),
            obj["droplet"],
            obj["lambda"],
            obj.get("snap", SNAP_TOL),
        )


@dataclass(frozen=True)
class EnergyBreakdown:
    free_perimeter: float
    wetted: float
    energy: float
    volume: float
    reference: float
    margin: float
    wetted_edges: tuple


def wetted_edges(scene: CapillaryScene) -> np.ndarray:
    """Boolean per droplet edge ``k -> k+1``: endpoints and midpoint on the obstacle."""
    a = scene.droplet
    b = np.roll(a, -1, axis=0)
    probes = np.concatenate((a, b, 0.5 * (a + b)))
    dist = scene.obstacle.boundary_distance(probes).reshape(3, -1)
    return np.all(dist <= scene.snap, axis=0)


def reference_energy(N: int, lam: float, v: float) -> float:
    """Energy of the cap with volume v on a flat support."""
    if not v > 0:
        raise InvalidVolume(f"volume must be positive, got {v}")
    c0 = cap_volume(N, lam, 1.0)
    r = (v / c0) ** (1.0 / N)
    return N * c0 * r ** (N - 1)


def capillary_energy(scene: CapillaryScene) -> EnergyBreakdown:
    a = scene.droplet
    lengths = np.linalg.norm(np.roll(a, -1, axis=0) - a, axis=1)
    wet = wetted_edges(scene)
    free = math.fsum(lengths[~wet])
    wetted = math.fsum(lengths[wet])
    energy = free - scene.lam * wetted
    volume = polygon_area(a)
    ref = reference_energy(2, scene.lam, volume)
    return EnergyBreakdown(free, wetted, energy, volume, ref, energy - ref, tuple(bool(w) for w in wet))


@dataclass(frozen=True)
class MarginReport:
    margin: float
    energy: float
    reference: float
    violation: bool


def isoperimetric_check(scene: CapillaryScene) -> MarginReport:
    e = capillary_energy(scene)
    return MarginReport(e.margin, e.energy, e.reference, e.margin < -INEQ_TOL)


def strict_concavity_probe(N: int, lam: float, v: float, v1: float) -> bool:
    """Whether splitting volume v into v1 and v - v1 strictly raises the reference."""
    if not 0 < v1 < v:
        raise InvalidVolume(f"need 0 < v1 < v, got v1={v1}, v={v}")
    whole = reference_energy(N, lam, v)
    split = reference_energy(N, lam, v1) + reference_energy(N, lam, v - v1)
    return split > whole + 1e-12


# ---------------------------------------------------------------- generators


def halfplane_obstacle(extent: float = 1e3) -> ConvexSection:
    """The lower half-plane ``{y <= 0}`` truncated to a large box."""
    return ConvexSection.polygon([[-extent, -extent], [extent, -extent], [extent, 0.0], [-extent, 0.0]])


def cap_scene(lam: float, k: int, r: float = 1.0, extent: float = 1e3) -> CapillaryScene:
    """Inscribed k-segment polygon of the cap of radius r on ``y = 0``."""
    t0 = math.asin(lam)
    t = np.linspace(t0, math.pi - t0, k + 1)
    pts = np.column_stack((r * np.cos(t), r * (np.sin(t) - lam)))
    pts[0, 1] = pts[-1, 1] = 0.0
    return CapillaryScene(halfplane_obstacle(extent), pts, lam)


def wedge_obstacle(half_angle: float, extent: float = 50.0) -> ConvexSection:
    """Convex wedge with apex at the origin, opening downward."""
    s, c = math.sin(half_angle), math.cos(half_angle)
    return ConvexSection.polygon([[0.0, 0.0], [-extent * s, -extent * c], [extent * s, -extent * c]])


def wedge_scene(lam: float, k: int, half_angle: float = math.pi / 4, rho: float = 1.0) -> CapillaryScene:
    """Circular sector of radius rho around the apex, wetting both facets."""
    s, c = math.sin(half_angle), math.cos(half_angle)
    start = math.atan2(-c, s)
    sweep = 2 * math.pi - 2 * half_angle
    t = start + np.linspace(0.0, sweep, k + 1)
    arc = rho * np.column_stack((np.cos(t), np.sin(t)))
    arc[0] = rho * np.array([s, -c])
    arc[-1] = rho * np.array([-s, -c])
    pts = np.vstack(([[0.0, 0.0]], arc))
    return CapillaryScene(wedge_obstacle(half_angle), pts, lam)


def _random_obstacle(rng) -> ConvexSection:
    from .convexbody import random_section

    return random_section(rng, "polygon")


def _edge_droplet(rng, body: ConvexSection) -> np.ndarray:
    """x-monotone droplet standing on one obstacle edge (may overhang it)."""
    a, b = body.edges
    e = int(rng.integers(len(a)))
    p, q = a[e], b[e]
    L = float(np.linalg.norm(q - p))
    u = (q - p) / L
    w = body.edge_normals[e]
    s0, s1 = np.sort(rng.uniform(-0.3 * L, 1.3 * L, 2))
    if s1 - s0 < 1e-3 * L:
        s1 = s0 + 0.1 * L
    base = [s0] + [s for s in (0.0, L) if s0 < s < s1] + [s1]
    m = int(rng.integers(1, 12))
    tops = np.sort(rng.uniform(s0, s1, m))
    heights = rng.uniform(0.02, 1.0, m) * (s1 - s0) * rng.uniform(0.2, 2.0)
    local = [(s, 0.0) for s in base] + [(s, h) for s, h in zip(tops[::-1], heights[::-1])]
    return np.array([p + s * u + h * w for s, h in local])


def _vertex_droplet(rng, body: ConvexSection) -> np.ndarray:
    """Star-shaped droplet around an obstacle vertex, wetting both facets."""
    V = body.vertices
    k = len(V)
    i = int(rng.integers(k))
    p = V[i]
    prev_dir = V[i - 1] - p
    next_dir = V[(i + 1) % k] - p
    a_next = math.atan2(next_dir[1], next_dir[0])
    a_prev = math.atan2(prev_dir[1], prev_dir[0])
    # exterior angular range runs counterclockwise from prev_dir to next_dir
    sweep = (a_next - a_prev) % (2 * math.pi)
    d_prev = rng.uniform(0.05, 1.0) * np.linalg.norm(prev_dir)
    d_next = rng.uniform(0.05, 1.0) * np.linalg.norm(next_dir)
    m = max(int(math.ceil(sweep / (0.9 * math.pi))), int(rng.integers(1, 10)))
    angles = a_prev + sweep * (np.arange(1, m + 1) / (m + 1))
    scale = 0.5 * (d_prev + d_next)
    radii = scale * rng.uniform(0.2, 1.5, m)
    star = np.column_stack((radii * np.cos(angles), radii * np.sin(angles))) + p
    pts = [p + d_prev * prev_dir / np.linalg.norm(prev_dir)]
    pts.extend(star)
    pts.append(p + d_next * next_dir / np.linalg.norm(next_dir))
    pts.append(p)
    return np.array(pts)


def _floating_droplet(rng, body: ConvexSection) -> np.ndarray:
    m = int(rng.integers(3, 12))
    angles = np.sort(rng.uniform(0, 2 * math.pi, m))
    radii = rng.uniform(0.3, 1.0, m)
    star = np.column_stack((radii * np.cos(angles), radii * np.sin(angles)))
    V = body.vertices
    center = V.mean(axis=0)
    far = np.max(np.linalg.norm(V - center, axis=1)) + 1.5
    direction = rng.normal(size=2)
    direction /= np.linalg.norm(direction)
    return star * rng.uniform(0.1, 2.0) + center + far * direction * rng.uniform(1.0, 3.0)


def random_scene(rng: np.random.Generator, lam_range=(-0.95, 0.95)) -> CapillaryScene:
    """Random valid scene; retries until the generated droplet is valid."""
    while True:
        body = _random_obstacle(rng)
        kind = rng.choice(3, p=[0.5, 0.35, 0.15])
        maker = (_edge_droplet, _vertex_droplet, _floating_droplet)[int(kind)]
        pts = maker(rng, body)
        lam = float(rng.uniform(*lam_range))
        try:
            return CapillaryScene(body, pts, lam)
        except (NonSimplePolygon, OverlappingScene, DegenerateDroplet):
            continue


def fuzz_capillary(trials: int, seed: int, lam_range=(-0.95, 0.95)) -> dict:
    """Margins of random scenes; any margin below -INEQ_TOL is a violation."""
    if trials < 1:
        raise ValueError("trials must be positive")
    seeds = np.random.SeedSequence(seed).spawn(trials)
    margins = []
    violations = []
    for t, s in enumerate(seeds):
        scene = random_scene(np.random.default_rng(s), lam_range)
        rep = isoperimetric_check(scene)
        margins.append(rep.margin)
        if rep.violation:
            violations.append({"trial": t, "margin": rep.margin, "scene": scene.to_json()})
    return {
        "seed": int(seed),
        "trials": trials,
        "min_margin": float(min(margins)),
        "violations": violations,
    }
