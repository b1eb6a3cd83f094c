"""Planar convex sections and contact configurations on their boundary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import (
    NEAR_BOUNDARY_TOL,
    ON_BOUNDARY_TOL,
    R_BOX,
    SUPPORT_TOL,
    UNIT_TOL,
)
from .errors import InvalidConfig, InvalidSection, NotOnBoundary
from .geom2d import _clip_polygon, _frozen


def _signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * math.fsum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Distances (P, E) from points to segments a[e] -> b[e], plus params t."""
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pej,ej->pe", rel, d) / dd, 0.0, 1.0)
    proj = a[None, :, :] + t[..., None] * d[None, :, :]
    return np.linalg.norm(points[:, None, :] - proj, axis=2), t


@dataclass(frozen=True, eq=False)
class ConvexSection:
    """A planar closed convex set: a polygon or a disk.

    Support-sampled sections are turned into the polygon cut out by their
    supporting lines and keep ``kind == "support_sampled"``.
    """

    kind: str
    vertices: Optional[np.ndarray] = None
    radius: Optional[float] = None
    center: tuple[float, float] = (0.0, 0.0)
    support: tuple = field(default=())

    @classmethod
    def polygon(cls, vertices) -> "ConvexSection":
        V = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(V) < 3:
            raise InvalidSection("a polygon needs at least 3 vertices")
        if _signed_area(V) < 0:
            V = V[::-1]
        _check_convex(V)
        return cls("polygon", _frozen(V))

    @classmethod
    def disk(cls, radius: float = 1.0, center=(0.0, 0.0)) -> "ConvexSection":
        if not radius > 0:
            raise InvalidSection("disk radius must be positive")
        return cls("disk", radius=float(radius), center=(float(center[0]), float(center[1])))

    @classmethod
    def from_support(cls, directions, values) -> "ConvexSection":
        """Polygon ``{z : z.d_k <= h_k}`` from sampled support data."""
        D = np.asarray(directions, dtype=float).reshape(-1, 2)
        D = D / np.linalg.norm(D, axis=1)[:, None]
        H = np.asarray(values, dtype=float).reshape(-1)
        poly = 4 * R_BOX * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
        for d, h in zip(D, H):
            poly = _clip_polygon(poly, -d, -h)
        if len(poly) < 3 or abs(_signed_area(poly)) <= 1e-12:
            raise InvalidSection("support data describe an empty section")
        _check_convex(poly)
        support = tuple((tuple(d), float(h)) for d, h in zip(D, H))
        return cls("support_sampled", _frozen(poly), support=support)

    @property
    def is_polygon(self) -> bool:
        return self.kind in ("polygon", "support_sampled")

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        V = self.vertices
        return V, np.roll(V, -1, axis=0)

    @property
    def edge_normals(self) -> np.ndarray:
        a, b = self.edges
        d = b - a
        n = np.column_stack((d[:, 1], -d[:, 0]))
        return n / np.linalg.norm(n, axis=1)[:, None]

    @property
    def perimeter(self) -> float:
        if self.is_polygon:
            a, b = self.edges
            return math.fsum(np.linalg.norm(b - a, axis=1))
        return 2 * math.pi * self.radius

    @property
    def area(self) -> float:
        if self.is_polygon:
            return _signed_area(self.vertices)
        return math.pi * self.radius**2

    def boundary_distance(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.is_polygon:
            a, b = self.edges
            dist, _ = _segment_distances(P, a, b)
            return dist.min(axis=1)
        return np.abs(np.linalg.norm(P - np.asarray(self.center), axis=1) - self.radius)

    def to_json(self) -> dict:
        if self.kind == "disk":
            return {"type": "disk", "radius": self.radius, "center": list(self.center)}
        return {"type": "polygon", "vertices": self.vertices.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "ConvexSection":
        if obj["type"] == "disk":
            return cls.disk(obj["radius"], obj.get("center", (0.0, 0.0)))
        return cls.polygon(obj["vertices"])


def _check_convex(V: np.ndarray) -> None:
    e = np.roll(V, -1, axis=0) - V
    f = np.roll(e, -1, axis=0)
    cross = e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]
    if np.any(cross < -1e-12):
        raise InvalidSection("polygon is not convex")
    if _signed_area(V) <= 1e-12:
        raise InvalidSection("polygon has empty interior")


@dataclass(frozen=True, eq=False)
class ContactConfig:
    """Finite boundary data: points x_i, outward normals nu_i, values v(x_i)."""

    points: np.ndarray
    normals: np.ndarray
    values: np.ndarray
    source: Optional[ConvexSection] = None

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float).reshape(-1, 2)
        N = np.asarray(self.normals, dtype=float).reshape(-1, 2)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if not (len(P) == len(N) == len(v)) or len(P) == 0:
            raise InvalidConfig("points, normals and values must have equal nonzero length")
        object.__setattr__(self, "points", _frozen(P))
        object.__setattr__(self, "normals", _frozen(N))
        object.__setattr__(self, "values", _frozen(v))

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values) -> "ContactConfig":
        return ContactConfig(self.points, self.normals, values, self.source)

    def subset(self, indices) -> "ContactConfig":
        idx = list(indices)
        return ContactConfig(self.points[idx], self.normals[idx], self.values[idx], self.source)

    def to_json(self) -> dict:
        out = {}
        if self.source is not None:
            out["section"] = self.source.to_json()
        out["contacts"] = [
            {"point": p.tolist(), "normal": n.tolist(), "value": float(v)}
            for p, n, v in zip(self.points, self.normals, self.values)
        ]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ContactConfig":
        section = ConvexSection.from_json(obj["section"]) if "section" in obj else None
        points, normals, values = [], [], []
        for c in obj["contacts"]:
            points.append(c["point"])
            if "normal" in c:
                normals.append(c["normal"])
            elif section is not None:
                normals.append(boundary_normal(section, c["point"]))
            else:
                raise InvalidConfig("contact normal required when no section is given")
            values.append(c.get("value", 0.0))
        return cls(points, normals, values, section)


@dataclass(frozen=True, eq=False)
class CylinderContactConfig:
    """Contacts on ``section x R^(N-2)``: planar data plus heights h_i."""

    planar: ContactConfig
    heights: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.heights, dtype=float)
        if H.ndim == 1:
            H = H[:, None]
        if len(H) != len(self.planar) or H.shape[1] < 1:
            raise InvalidConfig("heights must be an (n, N-2) array with N >= 3")
        object.__setattr__(self, "heights", _frozen(H))

    @property
    def ambient_codim(self) -> int:
        return self.heights.shape[1]

    @property
    def dimension(self) -> int:
        return 2 + self.ambient_codim


@dataclass(frozen=True)
class Violation:
    kind: str
    indices: tuple
    magnitude: float


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def add(self, kind, indices, magnitude) -> None:
        self.violations.append(Violation(kind, tuple(int(i) for i in indices), float(magnitude)))


def validate_contact_config(cfg: ContactConfig) -> ValidationReport:
    """Report every violated invariant; an empty report means valid."""
    report = ValidationReport()
    norms = np.linalg.norm(cfg.normals, axis=1)
    for i in np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL):
        report.add("unit_normal", (i,), abs(norms[i] - 1.0))
    # nu_i . (x_j - x_i) <= tol for all i, j
    S = np.einsum("ik,ijk->ij", cfg.normals, cfg.points[None, :, :] - cfg.points[:, None, :])
    for i, j in zip(*np.nonzero(S > SUPPORT_TOL)):
        report.add("supporting", (i, j), S[i, j])
    body = cfg.source
    if body is not None:
        dist = body.boundary_distance(cfg.points)
        for i in np.flatnonzero(dist > ON_BOUNDARY_TOL):
            report.add("on_boundary", (i,), dist[i])
        for i, (x, nu) in enumerate(zip(cfg.points, cfg.normals)):
            if dist[i] > ON_BOUNDARY_TOL:
                continue
            if body.is_polygon:
                worst = float(np.max((body.vertices - x) @ nu))
            else:
                radial = (x - np.asarray(body.center)) / body.radius
                worst = float(np.linalg.norm(radial - nu))
            if worst > SUPPORT_TOL:
                report.add("outward_normal", (i,), worst)
    return report


def boundary_normal(body: ConvexSection, x) -> np.ndarray:
    """Outward unit normal at the boundary point nearest to ``x``.

    At a polygon vertex the angular midpoint of the normal cone is returned.
    """
    x = np.asarray(x, dtype=float)
    if not body.is_polygon:
        rel = x - np.asarray(body.center)
        r = np.linalg.norm(rel)
        if abs(r - body.radius) > NEAR_BOUNDARY_TOL or r == 0:
            raise NotOnBoundary(f"{x.tolist()} is not on the disk boundary")
        return rel / r
    a, b = body.edges
    dist, t = _segment_distances(x[None, :], a, b)
    dist, t = dist[0], t[0]
    if dist.min() > NEAR_BOUNDARY_TOL:
        raise NotOnBoundary(f"{x.tolist()} is {dist.min():.3e} from the polygon boundary")
    normals = body.edge_normals
    V = body.vertices
    k = len(V)
    near_vertex = np.linalg.norm(V - x, axis=1)
    v = int(np.argmin(near_vertex))
    if near_vertex[v] <= ON_BOUNDARY_TOL:
        n = normals[v - 1] + normals[v]
        return n / np.linalg.norm(n)
    e = int(np.argmin(dist))
    return normals[e % k].copy()


def sample_boundary(body: ConvexSection, n: int, rng_seed) -> ContactConfig:
    """n boundary points uniform in arc length, with outward normals, values 0."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng_seed)
    if not body.is_polygon:
        theta = rng.uniform(0.0, 2 * math.pi, n)
        nu = np.column_stack((np.cos(theta), np.sin(theta)))
        pts = np.asarray(body.center) + body.radius * nu
        return ContactConfig(pts, nu, np.zeros(n), body)
    a, b = body.edges
    lengths = np.linalg.norm(b - a, axis=1)
    cum = np.concatenate(([0.0], np.cumsum(lengths)))
    s = rng.uniform(0.0, cum[-1], n)
    e = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lengths) - 1)
    t = (s - cum[e]) / lengths[e]
    # a sample landing on a vertex is moved into the edge interior
    t = np.clip(t, 1e-9, 1 - 1e-9)
    pts = a[e] + t[:, None] * (b[e] - a[e])
    return ContactConfig(pts, body.edge_normals[e], np.zeros(n), body)


def random_section(rng: np.random.Generator, kind: Optional[str] = None) -> ConvexSection:
    """Random disk or convex polygon, with random scale, offset and aspect."""
    if kind is None:
        kind = "disk" if rng.random() < 0.2 else "polygon"
    scale = math.exp(rng.uniform(math.log(0.2), math.log(3.0)))
    center = rng.uniform(-2.0, 2.0, 2)
    if kind == "disk":
        return ConvexSection.disk(scale, center)
    while True:
        k = int(rng.integers(3, 13))
        theta = np.sort(rng.uniform(0.0, 2 * math.pi, k))
        radius = rng.uniform(0.4, 1.0, k)
        P = np.column_stack((radius * np.cos(theta), radius * np.sin(theta)))
        P[:, 1] *= rng.uniform(0.15, 1.0)
        c, s = math.cos(theta[0]), math.sin(theta[0])
        P = P @ np.array([[c, s], [-s, c]])
        hull = convex_hull(P)
        if len(hull) >= 3 and _signed_area(hull) > 1e-3:
            return ConvexSection.polygon(scale * hull + center)


def convex_hull(points) -> np.ndarray:
    """Counterclockwise hull by monotone chain, collinear points dropped."""
    P = sorted(map(tuple, np.asarray(points, dtype=float)))
    if len(P) < 3:
        return np.array(P)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in P:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(P):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])
