"""Quantitative checks of the lambda-ABP inequality for cell partitions."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .constants import (
    BREAKPOINT_NUDGE,
    BREAKPOINT_TOL,
    DERIVATIVE_GAP,
    INEQ_TOL,
)
from .convexbody import (
    ContactConfig,
    ConvexSection,
    random_section,
    sample_boundary,
)
from .errors import NearBreakpoint, NoCellMeetsDisk
from .geom2d import (
    TWO_PI,
    ArcSet,
    HalfPlane,
    _check_lambda,
    cap_volume,
    cell_circle_arcs,
    cell_disk_area,
    clipped_disk_area,
    linear_range_on_arcs,
)
from .partition import CellPartition, build_cells, locate_first

log = logging.getLogger(__name__)

MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class AbpMeasureResult:
    value: float
    method: str
    stderr: float
    radius: float
    lam: float
    per_cell: tuple


def abp_measure_exact(part: CellPartition, lam: float, r: float = 1.0) -> AbpMeasureResult:
    """Exact area of ``union_i (A_i ∩ {z.nu_i > lam}) ∩ D_r``."""
    _check_lambda(lam)
    per_cell = tuple(
        0.0 if cell.empty else clipped_disk_area(cell, HalfPlane(tuple(nu), lam), r)
        for cell, nu in zip(part.cells, part.normals)
    )
    return AbpMeasureResult(math.fsum(per_cell), "exact", 0.0, float(r), float(lam), per_cell)


def sample_disk(rng: np.random.Generator, samples: int, r: float) -> np.ndarray:
    """Uniform points in the disk of radius r by rejection from the square."""
    out = []
    have = 0
    while have < samples:
        z = rng.uniform(-r, r, size=(MC_CHUNK, 2))
        z = z[np.einsum("ij,ij->i", z, z) < r * r]
        out.append(z)
        have += len(z)
    return np.concatenate(out)[:samples]


def abp_measure_mc(
    cfg: ContactConfig, lam: float, r: float, samples: int, seed
) -> AbpMeasureResult:
    """Monte Carlo estimate of the same area, assigning slopes by argmax."""
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    counts = np.zeros(len(cfg), dtype=np.int64)
    done = 0
    while done < samples:
        m = min(MC_CHUNK, samples - done)
        xi = sample_disk(rng, m, r)
        idx = locate_first(cfg, xi)
        hit = np.einsum("ij,ij->i", xi, cfg.normals[idx]) > lam
        counts += np.bincount(idx[hit], minlength=len(cfg))
        done += m
    area = math.pi * r * r
    p = counts.sum() / samples
    stderr = math.sqrt(p * (1.0 - p) / samples) * area
    per_cell = tuple(float(c) / samples * area for c in counts)
    return AbpMeasureResult(p * area, "monte_carlo", stderr, float(r), float(lam), per_cell)


def phi_H(lam):
    return 2.0 * np.arccos(np.clip(lam, -1.0, 1.0))


class CircleProfile:
    """Each cell's unit-circle arcs in angles relative to its normal.

    Relative arcs live in [-pi, pi]; the cap ``{z.nu_i > lam}`` is the
    relative interval ``(-alpha, alpha)`` with ``alpha = acos(lam)``.
    """

    def __init__(self, part: CellPartition):
        self.part = part
        self.arcsets = [cell_circle_arcs(c, 1.0) for c in part.cells]
        rel, owner, levels = [], [], []
        for i, (arcs, nu) in enumerate(zip(self.arcsets, part.normals)):
            phi = math.atan2(nu[1], nu[0])
            if arcs.is_full:
                rel.append((-math.pi, math.pi))
                owner.append(i)
                continue
            for a, b in arcs.components():
                span = b - a
                a0 = math.remainder(a - phi, TWO_PI)
                b0 = a0 + span
                levels.extend((math.cos(a0), math.cos(b0)))
                if b0 > math.pi:
                    rel.append((a0, math.pi))
                    rel.append((-math.pi, b0 - TWO_PI))
                    owner.extend((i, i))
                else:
                    rel.append((a0, b0))
                    owner.append(i)
        self.rel = np.array(rel, dtype=float).reshape(-1, 2)
        self.owner = np.array(owner, dtype=int)
        self.levels = np.unique(np.array(levels, dtype=float))

    def phi_K(self, lam) -> np.ndarray:
        alpha = np.arccos(np.clip(np.atleast_1d(np.asarray(lam, dtype=float)), -1.0, 1.0))
        a, b = self.rel[:, 0], self.rel[:, 1]
        over = np.minimum(b, alpha[:, None]) - np.maximum(a, -alpha[:, None])
        return np.sum(np.maximum(over, 0.0), axis=1)

    def distance_to_breakpoint(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if len(self.levels) == 0:
            return np.full(lam.shape, np.inf)
        return np.min(np.abs(lam[:, None] - self.levels[None, :]), axis=1)

    def crossings(self, lam, per_cell: bool = False):
        """Points of ``A_i ∩ ∂D`` on the line ``z.nu_i = lam``, summed over i."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        alpha = np.arccos(lam)
        a, b = self.rel[:, 0], self.rel[:, 1]
        upper = (a <= alpha[:, None]) & (alpha[:, None] <= b)
        lower = (a <= -alpha[:, None]) & (-alpha[:, None] <= b)
        hits = upper.astype(int) + lower.astype(int)
        if per_cell:
            out = np.zeros((len(lam), len(self.part.cells)), dtype=int)
            np.add.at(out.T, self.owner, hits.T)
            return out
        return hits.sum(axis=1)


def phi_K(part: CellPartition, lam):
    """Total arc length of ``A_i ∩ {z.nu_i > lam}`` on the unit circle."""
    vals = CircleProfile(part).phi_K(lam)
    return float(vals[0]) if np.ndim(lam) == 0 else vals


def crossing_count(part: CellPartition, lam: float) -> int:
    _check_lambda(lam)
    prof = CircleProfile(part)
    if prof.distance_to_breakpoint(lam)[0] <= BREAKPOINT_TOL:
        raise NearBreakpoint(f"lambda = {lam} is within {BREAKPOINT_TOL} of an arc endpoint level")
    return int(prof.crossings(lam)[0])


def chebyshev_grid(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.sort(np.cos(math.pi * (2 * k + 1) / (2 * n)))


@dataclass
class ScanTable:
    lam: np.ndarray
    phi_K: np.ndarray
    phi_H: np.ndarray
    margin: np.ndarray
    crossing: np.ndarray
    endpoints: tuple
    derivative: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    @property
    def min_margin(self) -> float:
        return float(self.margin.min())

    @property
    def max_derivative_error(self) -> float:
        return float(self.derivative[:, 3].max()) if len(self.derivative) else 0.0

    def rows(self):
        for row in zip(self.lam, self.phi_K, self.phi_H, self.margin, self.crossing):
            yield (float(row[0]), float(row[1]), float(row[2]), float(row[3]), int(row[4]))


def _nudge(prof: CircleProfile, lam: np.ndarray) -> np.ndarray:
    lam = lam.copy()
    for k in np.flatnonzero(prof.distance_to_breakpoint(lam) <= BREAKPOINT_TOL):
        for step in (BREAKPOINT_NUDGE, -BREAKPOINT_NUDGE, 2 * BREAKPOINT_NUDGE):
            trial = lam[k] + step
            if abs(trial) < 1 and prof.distance_to_breakpoint(trial)[0] > BREAKPOINT_TOL:
                lam[k] = trial
                break
    return lam


def phi_scan(part: CellPartition, grid_size: int = 257) -> ScanTable:
    """phi_K against phi_H on a Chebyshev grid, plus a derivative check.

    Derivative rows are ``(lam, central difference, -count/sqrt(1-lam^2),
    |difference|)`` at grid midpoints at least DERIVATIVE_GAP away from arc
    endpoint levels and from +-1.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    prof = CircleProfile(part)
    lam = _nudge(prof, chebyshev_grid(grid_size))
    pk = prof.phi_K(lam)
    ph = phi_H(lam)
    ends = tuple(float(x) for x in prof.phi_K(np.array([-1.0, 1.0])))
    mids = 0.5 * (lam[:-1] + lam[1:])
    dist = np.minimum(prof.distance_to_breakpoint(mids), 1.0 - np.abs(mids))
    mids, dist = mids[dist >= DERIVATIVE_GAP], dist[dist >= DERIVATIVE_GAP]
    h = np.minimum(1e-6, 0.25 * dist)
    numeric = (prof.phi_K(mids + h) - prof.phi_K(mids - h)) / (2 * h)
    formula = -prof.crossings(mids) / np.sqrt(1.0 - mids * mids)
    deriv = np.column_stack((mids, numeric, formula, np.abs(numeric - formula)))
    return ScanTable(lam, pk, ph, pk - ph, prof.crossings(lam), ends, deriv)


@dataclass
class CellDiagnostics:
    entry: list
    exit: list
    arcs: list
    disconnecting: list
    extremal: list
    Lambda: float
    origin: Optional[int]
    l: Optional[float]
    ordering: list
    M_bar: Optional[float]
    sides: list = field(default_factory=list)

    @property
    def m2(self) -> Optional[float]:
        return self.exit[self.ordering[1]] if len(self.ordering) > 1 else None


def _angle_in(t: float, gap: tuple) -> bool:
    a, b = gap
    t = t % TWO_PI
    return a < t < b or a < t + TWO_PI < b


def _origin_cell(part: CellPartition) -> Optional[int]:
    for i in part.active:
        if part.cells[i].contains((0.0, 0.0)):
            return i
    return None


def _separates_disk(cell, quad_segs: int = 256) -> int:
    """Components of ``D \\ cell`` by polygon clipping (independent check)."""
    from shapely.geometry import Point, Polygon

    disk = Point(0.0, 0.0).buffer(1.0, quad_segs=quad_segs)
    rest = disk.difference(Polygon(cell.vertices))
    rest = rest.buffer(-1e-9)
    if rest.is_empty:
        return 0
    return len(getattr(rest, "geoms", [rest]))


def cell_diagnostics(part: CellPartition, check_pointprop: bool = False) -> CellDiagnostics:
    """Entry/exit values, disconnecting and extremal structure, Lambda, l, M-bar."""
    if not any(cell_disk_area(part.cells[i], 1.0) > 0 for i in part.active):
        raise NoCellMeetsDisk("no cell meets the open unit disk")
    n = len(part.cells)
    arcsets = [cell_circle_arcs(c, 1.0) for c in part.cells]
    entry, exit_ = [None] * n, [None] * n
    comps = [a.components() for a in arcsets]
    for i, arcs in enumerate(arcsets):
        if not arcs.is_empty:
            entry[i], exit_[i] = linear_range_on_arcs(arcs, part.normals[i])
    disconnecting = [len(c) >= 2 for c in comps]
    if check_pointprop:
        for i in part.active:
            if arcsets[i].is_empty or arcsets[i].is_full:
                continue
            pieces = _separates_disk(part.cells[i])
            if (pieces >= 2) != disconnecting[i]:
                log.warning(
                    "cell %d: %d arc components but %d complement regions",
                    i, len(comps[i]), pieces,
                )
    meets = [i for i in range(n) if entry[i] is not None]

    def side_members(j, gap):
        return [k for k in meets if k != j and _angle_in(0.5 * (comps[k][0][0] + comps[k][0][1]), gap)]

    sides = []
    extremal = [False] * n
    for j in range(n):
        if not disconnecting[j]:
            continue
        for gap in arcsets[j].gaps():
            members = side_members(j, gap)
            free = not any(disconnecting[k] for k in members)
            extremal[j] |= free
            if free and members:
                sides.append((j, gap, max(exit_[k] for k in members)))
    M_bar = None
    for s in range(len(sides)):
        for t in range(s + 1, len(sides)):
            val = min(sides[s][2], sides[t][2])
            M_bar = val if M_bar is None else max(M_bar, val)

    Lambda = max(entry[i] for i in meets)
    origin = _origin_cell(part)
    l_val = None
    if origin is not None and not arcsets[origin].is_full and not arcsets[origin].is_empty:
        nu = part.normals[origin]
        ends = arcsets[origin].endpoints()
        l_val = max(math.cos(t) * nu[0] + math.sin(t) * nu[1] for t in ends)
    ordering = sorted(meets, key=lambda i: (i != origin, -exit_[i], i))
    return CellDiagnostics(
        entry, exit_, arcsets, disconnecting, extremal, Lambda, origin, l_val,
        ordering, M_bar, sides,
    )


@dataclass
class StructureCheck:
    m2_minus_l: Optional[float]
    crossing_interval: Optional[tuple]
    min_crossing: Optional[int]
    ok: bool


def check_crossing_structure(part: CellPartition, probes: int = 64) -> StructureCheck:
    """m_2 >= l and at least two crossings on (Lambda, 1) or (Lambda, M-bar)."""
    diag = cell_diagnostics(part)
    ok = True
    gap = None
    if diag.l is not None and diag.m2 is not None:
        gap = diag.m2 - diag.l
        ok &= gap >= -INEQ_TOL
    upper = diag.M_bar if any(diag.disconnecting) else 1.0
    interval = None
    low = None
    if upper is not None and upper > diag.Lambda:
        interval = (diag.Lambda, upper)
        prof = CircleProfile(part)
        t = (np.arange(probes) + 0.5) / probes
        lam = diag.Lambda + t * (upper - diag.Lambda)
        lam = lam[(np.abs(lam) < 1) & (prof.distance_to_breakpoint(lam) > BREAKPOINT_TOL)]
        if len(lam):
            low = int(prof.crossings(lam).min())
            ok &= low >= 2
    return StructureCheck(gap, interval, low, bool(ok))


@dataclass(frozen=True)
class GeneratorSpec:
    """Distribution of random fuzz configurations."""

    kinds: tuple = ("polygon", "disk")
    n_min: int = 1
    n_max: int = 12
    value_range: tuple = (-2.0, 2.0)
    lam_range: tuple = (-0.95, 0.95)
    lam: Optional[float] = None
    equal_normals: bool = False
    vertex_prob: float = 0.0
    phi_grid: int = 0
    structure: bool = False


def _vertex_contact(rng, body: ConvexSection):
    V = body.vertices
    k = int(rng.integers(len(V)))
    normals = body.edge_normals
    a = math.atan2(normals[k - 1][1], normals[k - 1][0])
    b = math.atan2(normals[k][1], normals[k][0])
    sweep = (b - a) % TWO_PI
    t = a + rng.uniform(0.0, 1.0) * sweep
    return V[k], np.array([math.cos(t), math.sin(t)])


def random_config(gen: GeneratorSpec, rng: np.random.Generator) -> ContactConfig:
    kind = gen.kinds[int(rng.integers(len(gen.kinds)))]
    if gen.equal_normals:
        kind = "polygon"
    body = random_section(rng, kind)
    n = int(rng.integers(gen.n_min, gen.n_max + 1))
    if gen.equal_normals:
        a, b = body.edges
        e = int(rng.integers(len(a)))
        t = np.sort(rng.uniform(0.0, 1.0, n))
        pts = a[e] + t[:, None] * (b[e] - a[e])
        nus = np.repeat(body.edge_normals[e][None, :], n, axis=0)
        cfg = ContactConfig(pts, nus, np.zeros(n), body)
    else:
        cfg = sample_boundary(body, n, rng)
    values = rng.uniform(*gen.value_range, size=n)
    P, N = cfg.points.copy(), cfg.normals.copy()
    if gen.vertex_prob > 0 and body.is_polygon and not gen.equal_normals:
        for i in np.flatnonzero(rng.random(n) < gen.vertex_prob):
            P[i], N[i] = _vertex_contact(rng, body)
    return ContactConfig(P, N, values, body)


def _draw_lambda(gen: GeneratorSpec, rng) -> float:
    if gen.lam is not None:
        return float(gen.lam)
    return float(rng.uniform(*gen.lam_range))


def run_trial(gen: GeneratorSpec, seed_seq: np.random.SeedSequence) -> dict:
    rng = np.random.default_rng(seed_seq)
    cfg = random_config(gen, rng)
    lam = _draw_lambda(gen, rng)
    part = build_cells(cfg)
    measure = abp_measure_exact(part, lam, 1.0).value
    out = {
        "lambda": lam,
        "n": len(cfg),
        "measure": measure,
        "margin": measure - cap_volume(2, lam, 1.0),
    }
    if gen.phi_grid:
        scan = phi_scan(part, gen.phi_grid)
        out["phi_margin"] = scan.min_margin
        out["phi_endpoint_error"] = max(abs(scan.endpoints[0] - TWO_PI), abs(scan.endpoints[1]))
        out["derivative_error"] = scan.max_derivative_error
    if gen.structure:
        chk = check_crossing_structure(part)
        out["m2_minus_l"] = chk.m2_minus_l
        out["min_crossing"] = chk.min_crossing
        out["structure_ok"] = chk.ok
    return out


def _violations(res: dict) -> list:
    bad = []
    if res["margin"] < -INEQ_TOL:
        bad.append("abp_measure")
    if res.get("phi_margin", 0.0) < -INEQ_TOL:
        bad.append("phi_slice")
    if res.get("phi_endpoint_error", 0.0) > INEQ_TOL:
        bad.append("phi_endpoints")
    if res.get("structure_ok", True) is False:
        bad.append("crossing_structure")
    return bad


@dataclass
class FuzzReport:
    seed: int
    trials: int
    spec: dict
    min_margin: float
    min_phi_margin: Optional[float]
    max_derivative_error: Optional[float]
    min_m2_minus_l: Optional[float]
    violations: list

    def to_json(self) -> dict:
        return asdict(self)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("ABPCAP_THREADS", "1")))
    except ValueError:
        return 1


def _run_chunk(args):
    gen, seeds = args
    return [run_trial(gen, s) for s in seeds]


def replay_config(gen: GeneratorSpec, seed: int, trial: int) -> tuple[ContactConfig, float]:
    """Regenerate the configuration and lambda of one fuzz trial."""
    seq = np.random.SeedSequence(seed).spawn(trial + 1)[trial]
    rng = np.random.default_rng(seq)
    cfg = random_config(gen, rng)
    return cfg, _draw_lambda(gen, rng)


def fuzz_abp(gen: GeneratorSpec, trials: int, seed: int, workers: Optional[int] = None) -> FuzzReport:
    """Random stress test of the lambda-ABP inequality and its ingredients."""
    if trials < 1:
        raise ValueError("trials must be positive")
    seeds = np.random.SeedSequence(seed).spawn(trials)
    workers = thread_count() if workers is None else workers
    if workers > 1 and trials >= 4 * workers:
        size = math.ceil(trials / workers)
        chunks = [(gen, seeds[k : k + size]) for k in range(0, trials, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_run_chunk, chunks) for r in part]
    else:
        results = [run_trial(gen, s) for s in seeds]
    violations = []
    for t, res in enumerate(results):
        kinds = _violations(res)
        if kinds:
            cfg, lam = replay_config(gen, seed, t)
            violations.append(
                {"trial": t, "kinds": kinds, "lambda": lam, "result": res, "config": cfg.to_json()}
            )

    def extreme(key, fn):
        vals = [r[key] for r in results if r.get(key) is not None]
        return float(fn(vals)) if vals else None

    return FuzzReport(
        seed=int(seed),
        trials=trials,
        spec=asdict(gen),
        min_margin=extreme("margin", min),
        min_phi_margin=extreme("phi_margin", min),
        max_derivative_error=extreme("derivative_error", max),
        min_m2_minus_l=extreme("m2_minus_l", min),
        violations=violations,
    )
