"""Flat SVG rendering with a fixed viewport and a legend."""

from __future__ import annotations

import math

import numpy as np

SIZE = 480
MARGIN = 20
PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1f77b4", "#8c564b",
)


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


class Canvas:
    """Maps the world square ``[-half, half]^2`` (plus offset) onto the page."""

    def __init__(self, half: float, center=(0.0, 0.0)):
        self.half = float(half)
        self.center = np.asarray(center, dtype=float)
        self.items: list[str] = []
        self.legend: list[tuple[str, str]] = []

    def _xy(self, p) -> tuple[str, str]:
        scale = (SIZE - 2 * MARGIN) / (2 * self.half)
        x = MARGIN + (p[0] - self.center[0] + self.half) * scale
        y = MARGIN + (self.half - (p[1] - self.center[1])) * scale
        return _fmt(x), _fmt(y)

    def polygon(self, pts, fill="none", stroke="#000", width=1.0, opacity=1.0):
        if len(pts) < 2:
            return
        coords = " ".join(",".join(self._xy(p)) for p in pts)
        self.items.append(
            f'<polygon points="{coords}" fill="{fill}" fill-opacity="{_fmt(opacity)}" '
            f'stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
        )

    def polyline(self, pts, stroke="#000", width=1.0):
        coords = " ".join(",".join(self._xy(p)) for p in pts)
        self.items.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
        )

    def circle(self, p, radius_px=2.0, fill="#000"):
        x, y = self._xy(p)
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{_fmt(radius_px)}" fill="{fill}"/>')

    def arc(self, r, a, b, stroke="#000", width=2.0, steps=64):
        t = np.linspace(a, b, max(2, int(steps * (b - a) / (2 * math.pi)) + 2))
        self.polyline(np.column_stack((r * np.cos(t), r * np.sin(t))), stroke, width)

    def add_legend(self, label: str, color: str):
        self.legend.append((label, color))

    def render(self) -> str:
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE + 20 * len(self.legend)}">',
            f'<rect x="0" y="0" width="{SIZE}" height="{SIZE + 20 * len(self.legend)}" fill="#fff"/>',
        ]
        parts.extend(self.items)
        for k, (label, color) in enumerate(self.legend):
            y = SIZE + 20 * k + 5
            parts.append(f'<rect x="{MARGIN}" y="{y}" width="12" height="12" fill="{color}"/>')
            parts.append(f'<text x="{MARGIN + 18}" y="{y + 11}" font-size="12">{label}</text>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def render_partition(part, lam=None, half: float = 1.5) -> str:
    """Cells clipped to the view, the unit circle, cell arcs and lambda chords."""
    from .geom2d import _clip_polygon, cell_circle_arcs

    canvas = Canvas(half)
    box = half * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    for i, cell in enumerate(part.cells):
        if cell.empty:
            continue
        poly = box
        for n, c in zip(cell.normals, cell.offsets):
            poly = _clip_polygon(poly, n, c)
        color = PALETTE[i % len(PALETTE)]
        canvas.polygon(poly, fill=color, opacity=0.35, stroke="#333", width=0.8)
        canvas.add_legend(f"cell {i}", color)
    canvas.arc(1.0, 0.0, 2 * math.pi, stroke="#999", width=1.0)
    for i, cell in enumerate(part.cells):
        color = PALETTE[i % len(PALETTE)]
        for a, b in cell_circle_arcs(cell, 1.0).components():
            canvas.arc(1.0, a, b, stroke=color, width=3.0)
        if lam is not None and not cell.empty:
            nu = part.normals[i]
            s = math.sqrt(max(0.0, 1 - lam * lam))
            t = np.array([nu[1], -nu[0]])
            canvas.polyline([lam * nu + s * t, lam * nu - s * t], stroke=color, width=1.0)
    canvas.circle((0.0, 0.0), 2.5)
    return canvas.render()


def render_scene(scene, energy=None) -> str:
    """Obstacle, droplet and wetted edges highlighted."""
    from .capillary import wetted_edges

    D = scene.droplet
    lo, hi = D.min(axis=0), D.max(axis=0)
    center = 0.5 * (lo + hi)
    half = 0.6 * float(max(hi - lo)) + 1e-9
    canvas = Canvas(half, center)
    canvas.polygon(scene.obstacle.vertices, fill="#bbb", stroke="#666")
    canvas.polygon(D, fill="#4e79a7", opacity=0.4, stroke="#4e79a7")
    wet = wetted_edges(scene)
    for k in np.flatnonzero(wet):
        canvas.polyline([D[k], D[(k + 1) % len(D)]], stroke="#e15759", width=3.0)
    canvas.add_legend("obstacle", "#bbb")
    canvas.add_legend("droplet", "#4e79a7")
    canvas.add_legend("wetted edges", "#e15759")
    return canvas.render()


def render_mesh(mesh, touch_counts=None) -> str:
    """Triangles, boundary markers and an optional touching-vertex heatmap."""
    from .neumann import GAMMA

    V = mesh.vertices
    lo, hi = V.min(axis=0), V.max(axis=0)
    canvas = Canvas(0.6 * float(max(hi - lo)), 0.5 * (lo + hi))
    for t in mesh.triangles:
        canvas.polygon(V[t], stroke="#ccc", width=0.3)
    for (a, b), m in zip(mesh.boundary_edges, mesh.edge_markers):
        canvas.polyline([V[a], V[b]], stroke="#e15759" if m == GAMMA else "#4e79a7", width=2.0)
    if touch_counts is not None:
        counts = np.asarray(touch_counts, dtype=float)
        top = counts.max() if counts.max() > 0 else 1.0
        for v in np.flatnonzero(counts):
            level = int(255 * (1 - counts[v] / top))
            canvas.circle(V[v], 1.5, fill=f"#ff{level:02x}00")
    canvas.add_legend("free boundary", "#4e79a7")
    canvas.add_legend("wetted boundary", "#e15759")
    return canvas.render()
