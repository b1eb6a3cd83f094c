"""Subdifferential cells of discrete boundary data.

For contacts ``x_i`` with values ``v_i`` the cell of ``i`` is

    A_i = {xi : xi . (x_i - x_j) >= v_i - v_j  for all j},

equivalently the set of slopes for which ``i`` maximizes ``xi . x_j - v_j``.
Indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .constants import FEAS_TOL, NEIGHBOR_TOL, R_BOX, RAY_TOL, TIE_TOL
from .convexbody import ContactConfig, CylinderContactConfig, validate_contact_config
from .errors import InvalidConfig, InvalidIndex, PostconditionError, RayPropertyViolation
from .geom2d import ConvexCell, cell_disk_area

#: Points closer than this are treated as the same contact.
COINCIDENT_TOL = 1e-12

#: Radius of the disk used by the delete_cell post-checks.
CHECK_RADIUS = 3.0


@dataclass(frozen=True, eq=False)
class CellPartition:
    """Cells ``A_i`` aligned with the config indices.

    Inactive cells (empty interior, or duplicates merged into an earlier
    contact) are stored as empty cells.  ``merged_into[k] = i`` records that
    contact ``k`` coincides with ``i`` and has the same value.
    """

    cells: tuple
    normals: np.ndarray
    config: ContactConfig
    active: tuple
    merged_into: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    @classmethod
    def from_cells(cls, cells, normals, config=None) -> "CellPartition":
        """Wrap precomputed cells, e.g. a synthetic partition for diagnostics."""
        cells = tuple(cells)
        N = np.asarray(normals, dtype=float).reshape(-1, 2)
        if config is None:
            config = ContactConfig(np.zeros((len(cells), 2)), N, np.zeros(len(cells)))
        active = tuple(i for i, c in enumerate(cells) if not c.empty)
        return cls(cells, N, config, active)

    def to_json(self) -> dict:
        cells = []
        for i, (cell, nu) in enumerate(zip(self.cells, self.normals)):
            cells.append(
                {
                    "index": i,
                    "active": i in self.active,
                    "normal": nu.tolist(),
                    "halfplanes": [
                        {"normal": n.tolist(), "offset": float(c)}
                        for n, c in zip(cell.normals, cell.offsets)
                    ],
                    "vertices": cell.vertices.tolist(),
                }
            )
        return {"box_half_width": R_BOX, "cells": cells}


def _group_coincident(points: np.ndarray) -> list[list[int]]:
    groups: list[list[int]] = []
    for i, p in enumerate(points):
        for g in groups:
            if np.linalg.norm(points[g[0]] - p) <= COINCIDENT_TOL:
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def build_cells(cfg: ContactConfig) -> CellPartition:
    report = validate_contact_config(cfg)
    if not report.ok:
        raise InvalidConfig(f"invalid contact configuration: {report.violations}")
    P, V, nus = cfg.points, cfg.values, cfg.normals
    n = len(cfg)
    reps = []
    merged = {}
    for g in _group_coincident(P):
        best = min(g, key=lambda k: (V[k], k))
        reps.append(best)
        for k in g:
            if k != best and V[k] == V[best]:
                merged[k] = best
    reps.sort()
    cells = [ConvexCell.nothing()] * n
    for i in reps:
        others = [j for j in reps if j != i]
        if not others:
            cells[i] = ConvexCell.plane()
            continue
        diff = P[i] - P[others]
        norm = np.linalg.norm(diff, axis=1)
        cell = ConvexCell.from_arrays(diff / norm[:, None], (V[i] - V[others]) / norm)
        for m, c in zip(cell.normals, cell.offsets):
            value = float(m @ nus[i])
            if value < -RAY_TOL:
                raise RayPropertyViolation(i, tuple(m), float(c), value)
        cells[i] = cell
    active = tuple(i for i in range(n) if not cells[i].empty)
    return CellPartition(tuple(cells), nus, cfg, active, merged)


def scores(cfg: ContactConfig, xi) -> np.ndarray:
    """``xi . x_j - v_j`` for one slope (shape (n,)) or many (shape (m, n))."""
    X = np.asarray(xi, dtype=float)
    return X @ cfg.points.T - cfg.values


def locate(cfg: ContactConfig, xi) -> tuple[int, ...]:
    """Indices whose cells contain ``xi``: the argmax set with a tie tolerance."""
    s = scores(cfg, xi)
    top = float(s.max())
    tol = TIE_TOL * max(1.0, abs(top))
    return tuple(int(k) for k in np.flatnonzero(s >= top - tol))


def locate_first(cfg: ContactConfig, xis) -> np.ndarray:
    """Lowest argmax index for each row of ``xis``."""
    return np.argmax(scores(cfg, xis), axis=1)


class Slice(NamedTuple):
    config: ContactConfig
    partition: CellPartition
    origin: tuple


def slice_cylinder(cfg: CylinderContactConfig, w) -> Slice:
    """Planar partition of the ``w``-slice of a cylinder configuration.

    Adjusted values are ``v_i - w . h_i``; contacts sharing a planar point
    are merged keeping the smallest adjusted value.  ``origin[k]`` is the
    cylinder index that planar contact ``k`` came from.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != cfg.ambient_codim:
        raise InvalidConfig(f"slice vector must have {cfg.ambient_codim} entries")
    planar = cfg.planar
    adjusted = planar.values - cfg.heights @ w
    keep = []
    for g in _group_coincident(planar.points):
        keep.append(min(g, key=lambda k: (adjusted[k], k)))
    keep.sort()
    sliced = ContactConfig(
        planar.points[keep], planar.normals[keep], adjusted[keep], planar.source
    )
    return Slice(sliced, build_cells(sliced), tuple(keep))


def shared_edge_length(part: CellPartition, i: int, j: int) -> float:
    """Length of the common edge of ``A_i`` and ``A_j``; ``inf`` if unbounded."""
    A, B = part.cells[i], part.cells[j]
    if A.empty or B.empty:
        return 0.0
    cfg = part.config
    diff = cfg.points[i] - cfg.points[j]
    norm = float(np.linalg.norm(diff))
    if norm <= COINCIDENT_TOL:
        return 0.0
    n = diff / norm
    c = (cfg.values[i] - cfg.values[j]) / norm
    p0 = c * n
    d = np.array([n[1], -n[0]])
    N = np.vstack((A.normals, B.normals))
    C = np.concatenate((A.offsets, B.offsets))
    lo, hi = -math.inf, math.inf
    slope = N @ d
    gap = C - N @ p0
    for s, g in zip(slope, gap):
        if abs(s) <= FEAS_TOL:
            if g > 1e-9:
                return 0.0
        elif s > 0:
            lo = max(lo, g / s)
        else:
            hi = min(hi, g / s)
    return max(hi - lo, 0.0)


def are_neighbors(part: CellPartition, i: int, j: int) -> bool:
    return shared_edge_length(part, i, j) > NEIGHBOR_TOL


def delete_cell(cfg: ContactConfig, j: int) -> tuple[ContactConfig, CellPartition]:
    """Drop contact ``j`` and rebuild; post-checks the cell monotonicity.

    Cells of the result are indexed like ``cfg`` with ``j`` removed.
    """
    n = len(cfg)
    if not 0 <= j < n:
        raise InvalidIndex(f"index {j} out of range for {n} contacts")
    if n < 2:
        raise InvalidIndex("cannot delete the only contact")
    before = build_cells(cfg)
    rest = [k for k in range(n) if k != j]
    reduced = cfg.subset(rest)
    after = build_cells(reduced)
    for new, old in enumerate(rest):
        a_old = cell_disk_area(before.cells[old], CHECK_RADIUS)
        a_new = cell_disk_area(after.cells[new], CHECK_RADIUS)
        if a_new < a_old - 1e-12:
            raise PostconditionError(f"cell {old} shrank after deleting {j}")
        if old in before.active and not are_neighbors(before, old, j):
            if abs(a_new - a_old) > 1e-9:
                raise PostconditionError(
                    f"cell {old} is not a neighbor of {j} but changed by {a_new - a_old:.3e}"
                )
    return reduced, after


def total_disk_area(part: CellPartition, r: float) -> float:
    return math.fsum(cell_disk_area(c, r) for c in part.cells)
