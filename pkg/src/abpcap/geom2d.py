"""Exact planar primitives: half-planes, convex cells, arcs and disk measures.

Cells are stored in H-representation.  Every measure against a disk is
computed from the boundary of ``cell ∩ disk`` with the divergence theorem:
a straight piece on the line ``z.n = c`` of length ``L`` contributes
``-c * L / 2`` and an arc of angle ``dtheta`` contributes ``r**2 * dtheta / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, special

from .constants import EDGE_TOL, FEAS_TOL, NEIGHBOR_TOL, R_BOX, UNIT_TOL
from .errors import EmptyArcSet, InvalidLambda

TWO_PI = 2.0 * math.pi

#: Arcs and gaps shorter than this (radians) are dropped/merged.
ARC_TOL = 1e-12


@dataclass(frozen=True)
class HalfPlane:
    """The open half-plane ``{z : z . normal > offset}``."""

    normal: tuple[float, float]
    offset: float

    def __post_init__(self):
        n = (float(self.normal[0]), float(self.normal[1]))
        if abs(math.hypot(*n) - 1.0) > UNIT_TOL:
            raise ValueError(f"half-plane normal {n} is not a unit vector")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_vector(cls, vector, offset) -> "HalfPlane":
        """Build ``{z : z . vector > offset}`` and rescale to a unit normal."""
        norm = math.hypot(float(vector[0]), float(vector[1]))
        if norm == 0.0:
            raise ValueError("zero normal vector")
        return cls((vector[0] / norm, vector[1] / norm), offset / norm)

    def contains(self, z, tol: float = 0.0) -> bool:
        return z[0] * self.normal[0] + z[1] * self.normal[1] > self.offset - tol


def _canonical_intervals(intervals: Iterable[tuple[float, float]]) -> tuple:
    """Wrap angle intervals into [0, 2pi), split at 0, sort and merge."""
    pieces = []
    for a, b in intervals:
        if b - a >= TWO_PI - ARC_TOL:
            return ((0.0, TWO_PI),)
        if b - a <= ARC_TOL:
            continue
        a0 = a % TWO_PI
        b0 = a0 + (b - a)
        if b0 > TWO_PI:
            pieces.append((a0, TWO_PI))
            pieces.append((0.0, b0 - TWO_PI))
        else:
            pieces.append((a0, b0))
    pieces.sort()
    merged: list[list[float]] = []
    for a, b in pieces:
        if merged and a <= merged[-1][1] + ARC_TOL:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    out = tuple((float(a), float(min(b, TWO_PI))) for a, b in merged if b - a > ARC_TOL)
    if len(out) == 1 and out[0][0] <= ARC_TOL and out[0][1] >= TWO_PI - ARC_TOL:
        return ((0.0, TWO_PI),)
    return out


@dataclass(frozen=True)
class ArcSet:
    """Disjoint angular intervals on the circle of ``radius`` about the origin.

    Intervals live in [0, 2pi); an arc crossing angle 0 is stored as two
    records ``(a, 2pi)`` and ``(0, b)``.  :meth:`components` glues them back.
    """

    radius: float
    arcs: tuple[tuple[float, float], ...] = ()

    @classmethod
    def from_intervals(cls, radius, intervals) -> "ArcSet":
        return cls(float(radius), _canonical_intervals(intervals))

    @classmethod
    def full(cls, radius) -> "ArcSet":
        return cls(float(radius), ((0.0, TWO_PI),))

    @property
    def is_empty(self) -> bool:
        return not self.arcs

    @property
    def is_full(self) -> bool:
        return self.arcs == ((0.0, TWO_PI),)

    @property
    def angular_length(self) -> float:
        return math.fsum(b - a for a, b in self.arcs)

    @property
    def length(self) -> float:
        return self.radius * self.angular_length

    def intersect(self, other: "ArcSet") -> "ArcSet":
        out = []
        i = j = 0
        A, B = self.arcs, other.arcs
        while i < len(A) and j < len(B):
            lo = max(A[i][0], B[j][0])
            hi = min(A[i][1], B[j][1])
            if hi > lo:
                out.append((lo, hi))
            if A[i][1] < B[j][1]:
                i += 1
            else:
                j += 1
        return ArcSet.from_intervals(self.radius, out)

    def components(self) -> list[tuple[float, float]]:
        """Connected components; a wrapped component has ``end > 2pi``."""
        arcs = list(self.arcs)
        if self.is_full or len(arcs) < 2:
            return arcs
        if arcs[0][0] <= ARC_TOL and arcs[-1][1] >= TWO_PI - ARC_TOL:
            first = arcs.pop(0)
            last = arcs.pop()
            arcs.append((last[0], TWO_PI + first[1]))
        return arcs

    def gaps(self) -> list[tuple[float, float]]:
        """Components of the complement (same conventions as components)."""
        comps = self.components()
        if not comps:
            return [(0.0, TWO_PI)]
        if self.is_full:
            return []
        comps = sorted(comps)
        out = []
        for k, (a, b) in enumerate(comps):
            na = comps[(k + 1) % len(comps)][0]
            if k + 1 == len(comps):
                na += TWO_PI
            if b >= TWO_PI:
                b, na = b - TWO_PI, na - TWO_PI
            out.append((b, na))
        return out

    def contains_angle(self, theta: float, tol: float = 0.0) -> bool:
        t = theta % TWO_PI
        for a, b in self.arcs:
            if a - tol <= t <= b + tol:
                return True
        # near the cut at 0 / 2pi
        if tol > 0 and (t < tol or t > TWO_PI - tol):
            return any(a <= tol or b >= TWO_PI - tol for a, b in self.arcs)
        return False

    def endpoints(self) -> list[float]:
        """Angles where the set begins or ends (cut points at 0 excluded)."""
        out = []
        for a, b in self.components():
            out.extend((a % TWO_PI, b % TWO_PI))
        return out


def _constraint_arcs(normals: np.ndarray, offsets: np.ndarray, r: float) -> tuple:
    """Angles on the circle of radius r satisfying every ``z.n > c``."""
    if len(offsets) == 0:
        return ((0.0, TWO_PI),)
    rel = offsets / r
    if np.any(rel >= 1.0):
        return ()
    cutting = rel > -1.0
    if not np.any(cutting):
        return ((0.0, TWO_PI),)
    phi = np.arctan2(normals[cutting, 1], normals[cutting, 0])
    alpha = np.arccos(rel[cutting])
    cuts = np.unique(
        np.concatenate(([0.0, TWO_PI], (phi - alpha) % TWO_PI, (phi + alpha) % TWO_PI))
    )
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    pts = r * np.column_stack((np.cos(mids), np.sin(mids)))
    inside = np.all(pts @ normals.T > offsets, axis=1)
    runs = []
    start = None
    for k, flag in enumerate(inside):
        if flag and start is None:
            start = cuts[k]
        elif not flag and start is not None:
            runs.append((start, cuts[k]))
            start = None
    if start is not None:
        runs.append((start, cuts[-1]))
    # close gaps left by rounding between nearly equal cut angles
    closed = []
    for a, b in runs:
        if closed and a - closed[-1][1] <= ARC_TOL:
            closed[-1] = (closed[-1][0], b)
        else:
            closed.append((a, b))
    return _canonical_intervals(closed)


def _line_intervals(normals: np.ndarray, offsets: np.ndarray, disk_r: float | None = None):
    """Parameter range of each constraint line lying in the closed region.

    Line k is ``c_k n_k + t d_k`` with ``d_k`` chosen so the region is on its
    left.  Returns ``(lo, hi, feasible)``; identical constraints keep only the
    lowest index so that no boundary piece is counted twice.
    """
    m = len(offsets)
    D = np.column_stack((normals[:, 1], -normals[:, 0]))
    NN = normals @ normals.T
    denom = D @ normals.T
    rhs = offsets[None, :] - offsets[:, None] * NN
    par = np.abs(denom) <= FEAS_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = rhs / denom
    lo = np.max(np.where(~par & (denom > 0), ratio, -np.inf), axis=1, initial=-np.inf)
    hi = np.min(np.where(~par & (denom < 0), ratio, np.inf), axis=1, initial=np.inf)
    lower = np.tri(m, k=-1, dtype=bool)
    # rounding in rhs grows with the offsets
    scale = np.maximum(1.0, np.maximum(np.abs(offsets)[:, None], np.abs(offsets)[None, :]))
    tol = FEAS_TOL * scale
    par &= ~np.eye(m, dtype=bool)
    bad = par & (rhs > tol)
    bad |= par & (NN > 0) & (np.abs(rhs) <= tol) & lower
    feasible = ~bad.any(axis=1)
    if disk_r is not None:
        half = np.sqrt(np.maximum(disk_r * disk_r - offsets * offsets, 0.0))
        feasible &= np.abs(offsets) < disk_r
        lo = np.maximum(lo, -half)
        hi = np.minimum(hi, half)
    feasible &= hi > lo
    return lo, hi, feasible


def _disk_area(normals: np.ndarray, offsets: np.ndarray, r: float) -> float:
    if len(offsets) == 0:
        return math.pi * r * r
    lo, hi, ok = _line_intervals(normals, offsets, r)
    terms = [-0.5 * c * (b - a) for c, a, b, f in zip(offsets, lo, hi, ok) if f]
    arcs = _constraint_arcs(normals, offsets, r)
    terms.extend(0.5 * r * r * (b - a) for a, b in arcs)
    area = math.fsum(terms)
    return min(max(area, 0.0), math.pi * r * r)


def _clip_polygon(poly: np.ndarray, normal, offset) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex loop against ``z.n >= c``."""
    if len(poly) == 0:
        return poly
    s = poly @ np.asarray(normal) - offset
    out = []
    k = len(poly)
    for i in range(k):
        j = (i + 1) % k
        if s[i] >= 0:
            out.append(poly[i])
        if (s[i] >= 0) != (s[j] >= 0):
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    out = np.array(out, dtype=float).reshape(-1, 2)
    if len(out) > 1:
        # a cut through a vertex emits it twice
        step = np.linalg.norm(out - np.roll(out, 1, axis=0), axis=1)
        out = out[step > EDGE_TOL]
    return out


def _snap_parallel(N: np.ndarray) -> np.ndarray:
    """Make nearly parallel normals exactly (anti)parallel.

    Directions built from nearly coincident points carry rounding noise that
    would otherwise turn a pair of opposite slabs into a huge thin wedge.
    """
    N = N.copy()
    for k in range(1, len(N)):
        cross = N[:k, 0] * N[k, 1] - N[:k, 1] * N[k, 0]
        hit = np.flatnonzero(np.abs(cross) <= NEIGHBOR_TOL)
        if len(hit):
            j = hit[0]
            N[k] = np.copysign(1.0, N[j] @ N[k]) * N[j]
    return N


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConvexCell:
    """Intersection of half-planes, kept irredundant.

    ``empty`` is True when the region has no interior (including the
    zero-width slab between opposite constraints with equal offsets).
    """

    normals: np.ndarray
    offsets: np.ndarray
    empty: bool = False

    @classmethod
    def plane(cls) -> "ConvexCell":
        return cls(_frozen(np.zeros((0, 2))), _frozen(np.zeros(0)))

    @classmethod
    def nothing(cls) -> "ConvexCell":
        return cls(_frozen(np.zeros((0, 2))), _frozen(np.zeros(0)), empty=True)

    @classmethod
    def from_halfplanes(cls, halfplanes: Sequence[HalfPlane]) -> "ConvexCell":
        if not halfplanes:
            return cls.plane()
        N = np.array([h.normal for h in halfplanes], dtype=float)
        C = np.array([h.offset for h in halfplanes], dtype=float)
        return cls.from_arrays(N, C)

    @classmethod
    def from_arrays(cls, normals, offsets) -> "ConvexCell":
        """Canonicalize: drop redundant constraints, detect empty interior."""
        N = np.asarray(normals, dtype=float).reshape(-1, 2)
        C = np.asarray(offsets, dtype=float).reshape(-1)
        if len(C) == 0:
            return cls.plane()
        N = _snap_parallel(N)
        lo, hi, ok = _line_intervals(N, C)
        keep = ok & (hi - lo > EDGE_TOL)
        if not keep.any():
            return cls.nothing()
        N, C = N[keep], C[keep]
        cross = N[:, None, 0] * N[None, :, 1] - N[:, None, 1] * N[None, :, 0]
        opposite = (np.abs(cross) <= FEAS_TOL) & (N @ N.T < 0)
        if np.any(opposite & (C[:, None] + C[None, :] >= -FEAS_TOL)):
            return cls.nothing()
        return cls(_frozen(N), _frozen(C))

    @property
    def halfplanes(self) -> tuple[HalfPlane, ...]:
        return tuple(HalfPlane(tuple(n), c) for n, c in zip(self.normals, self.offsets))

    @property
    def is_plane(self) -> bool:
        return not self.empty and len(self.offsets) == 0

    def contains(self, z, tol: float = FEAS_TOL) -> bool:
        if self.empty:
            return False
        return bool(np.all(self.normals @ np.asarray(z, dtype=float) >= self.offsets - tol))

    def clip(self, h: HalfPlane) -> "ConvexCell":
        if self.empty:
            return self
        N = np.vstack((self.normals, [h.normal]))
        C = np.append(self.offsets, h.offset)
        return ConvexCell.from_arrays(N, C)

    @cached_property
    def vertices(self) -> np.ndarray:
        """Counterclockwise vertex loop of the cell clipped to the R_BOX square."""
        if self.empty:
            return np.zeros((0, 2))
        poly = R_BOX * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
        for n, c in zip(self.normals, self.offsets):
            poly = _clip_polygon(poly, n, c)
            if len(poly) == 0:
                break
        return poly


def halfplane_circle_arcs(h: HalfPlane, r: float) -> ArcSet:
    """Portion of the circle of radius r strictly inside ``h``."""
    if h.offset >= r:
        return ArcSet(float(r))
    if h.offset <= -r:
        return ArcSet.full(r)
    phi = math.atan2(h.normal[1], h.normal[0])
    alpha = math.acos(h.offset / r)
    return ArcSet.from_intervals(r, [(phi - alpha, phi + alpha)])


def cell_circle_arcs(cell: ConvexCell, r: float) -> ArcSet:
    if cell.empty:
        return ArcSet(float(r))
    return ArcSet(float(r), _constraint_arcs(cell.normals, cell.offsets, r))


def cell_disk_area(cell: ConvexCell, r: float) -> float:
    """Exact area of ``cell ∩ {|z| < r}``."""
    if cell.empty:
        return 0.0
    return _disk_area(cell.normals, cell.offsets, r)


def clipped_disk_area(cell: ConvexCell, h: HalfPlane, r: float) -> float:
    """Area of ``cell ∩ h ∩ {|z| < r}`` without re-canonicalizing the cell."""
    if cell.empty:
        return 0.0
    N = np.vstack((cell.normals, [h.normal]))
    C = np.append(cell.offsets, h.offset)
    return _disk_area(N, C, r)


def linear_range_on_arcs(arcs: ArcSet, nu) -> tuple[float, float]:
    """Exact (min, max) of ``z . nu`` over the closed arcs."""
    if arcs.is_empty:
        raise EmptyArcSet("linear range of an empty arc set")
    r = arcs.radius
    nu = np.asarray(nu, dtype=float)
    ends = np.array([t for arc in arcs.arcs for t in arc])
    vals = r * (np.cos(ends) * nu[0] + np.sin(ends) * nu[1])
    lo, hi = float(vals.min()), float(vals.max())
    phi = math.atan2(nu[1], nu[0])
    if arcs.contains_angle(phi):
        hi = r
    if arcs.contains_angle(phi + math.pi):
        lo = -r
    return lo, hi


def _check_lambda(lam: float) -> None:
    if not (-1.0 < lam < 1.0):
        raise InvalidLambda(f"lambda must lie in (-1, 1), got {lam}")


def unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / special.gamma(k / 2 + 1)


def cap_volume(N: int, lam: float, r: float = 1.0) -> float:
    """Volume of ``r * {x in B_1 : x_N > lam}`` in dimension N."""
    _check_lambda(lam)
    if N < 2:
        raise ValueError("dimension must be at least 2")
    if N == 2:
        unit = math.acos(lam) - lam * math.sqrt(1.0 - lam * lam)
    elif N == 3:
        unit = math.pi * (2.0 / 3.0 - lam + lam**3 / 3.0)
    else:
        w = unit_ball_volume(N - 1)
        unit, _ = integrate.quad(
            lambda t: w * (1.0 - t * t) ** ((N - 1) / 2), lam, 1.0, epsabs=1e-12, epsrel=1e-12
        )
    return r**N * unit


def cap_area_absolute(lam: float, r: float) -> float:
    """Area of ``{z in D_r : z_2 > lam}`` with the cut at absolute height."""
    if lam >= r:
        return 0.0
    if lam <= -r:
        return math.pi * r * r
    return r * r * math.acos(lam / r) - lam * math.sqrt(r * r - lam * lam)
