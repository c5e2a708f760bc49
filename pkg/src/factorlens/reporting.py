"""Factor-plane scenes, SVG rendering and extremal-projection reports."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .ca_engine import CaResult, Side, SupplementaryPoint, inertia_percent
from .clustering.ward import Partition

Direction = Literal["positive", "negative"]

VIEWPORT = 1000
MARGIN = 60
PAD = 0.05
SUPPLEMENTARY_COLOR = "red"
ATTRIBUTE_COLOR = "#1f4e9c"
CLUSTER_COLORS = (
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02",
    "#a6761d", "#666666", "#1f78b4", "#b2df8a", "#fb9a99", "#cab2d6",
)


@dataclass(frozen=True)
class ScenePoint:
    label: str
    x: float
    y: float
    style: str = "dot"
    text: str | None = None
    cluster: int | None = None


@dataclass(frozen=True)
class FactorPlaneScene:
    axis_pair: tuple[int, int]
    axis_captions: tuple[str, str]
    entity_points: tuple[ScenePoint, ...]
    supplementary_points: tuple[ScenePoint, ...] = ()
    attribute_points: tuple[ScenePoint, ...] = ()
    origin_cross: bool = True
    title: str = ""

    def __post_init__(self):
        for p in (*self.entity_points, *self.supplementary_points, *self.attribute_points):
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ValueError(f"non-finite coordinate for {p.label!r}")


def _caption(res: CaResult, k: int) -> str:
    pct = inertia_percent(res, k) if k <= res.n_axes else 0.0
    return f"Factor {k} ({pct:.1f}% of inertia)"


def _axis_values(coords: np.ndarray, k: int) -> np.ndarray:
    # axes beyond the solution's dimension are shown at 0
    if k <= coords.shape[1]:
        return coords[:, k - 1]
    return np.zeros(coords.shape[0])


def _check_pair(axis_pair) -> tuple[int, int]:
    k1, k2 = (int(a) for a in axis_pair)
    if k1 < 1 or k2 < 1 or k1 == k2:
        raise ValueError(f"invalid axis pair {axis_pair!r}")
    return k1, k2


def plane_scene(
    res: CaResult,
    axis_pair=(1, 2),
    supplementary: Sequence[SupplementaryPoint] = (),
    entity_labels: bool = False,
    show_attributes: bool = True,
) -> FactorPlaneScene:
    """Scene of active rows (as dots, or short labels), active columns and
    supplementary points on a pair of factors."""
    k1, k2 = _check_pair(axis_pair)
    xs, ys = _axis_values(res.row_coords, k1), _axis_values(res.row_coords, k2)
    ents = tuple(
        ScenePoint(lab, float(x), float(y), "label" if entity_labels else "dot",
                   text=lab if entity_labels else None)
        for lab, x, y in zip(res.row_labels, xs, ys)
    )
    attrs = ()
    if show_attributes:
        ax, ay = _axis_values(res.col_coords, k1), _axis_values(res.col_coords, k2)
        attrs = tuple(
            ScenePoint(lab, float(x), float(y), "attribute", text=lab)
            for lab, x, y in zip(res.col_labels, ax, ay)
        )
    sups = tuple(
        ScenePoint(
            sp.label,
            float(sp.coords[k1 - 1]) if k1 <= len(sp.coords) else 0.0,
            float(sp.coords[k2 - 1]) if k2 <= len(sp.coords) else 0.0,
            "supplementary",
            text=sp.label,
        )
        for sp in supplementary
    )
    return FactorPlaneScene(
        axis_pair=(k1, k2),
        axis_captions=(_caption(res, k1), _caption(res, k2)),
        entity_points=ents,
        supplementary_points=sups,
        attribute_points=attrs,
    )


def cluster_overlay(res: CaResult, part: Partition, axis_pair=(1, 2)) -> FactorPlaneScene:
    """Scene whose entity markers are their cluster numbers."""
    if tuple(part.entity_labels) != tuple(res.row_labels):
        raise ValueError("partition and analysis cover different entities")
    k1, k2 = _check_pair(axis_pair)
    xs, ys = _axis_values(res.row_coords, k1), _axis_values(res.row_coords, k2)
    ents = tuple(
        ScenePoint(lab, float(x), float(y), "cluster", text=str(g), cluster=g)
        for lab, x, y, g in zip(res.row_labels, xs, ys, part.labels)
    )
    return FactorPlaneScene(
        axis_pair=(k1, k2),
        axis_captions=(_caption(res, k1), _caption(res, k2)),
        entity_points=ents,
        title=f"{part.k}-cluster partition",
    )


# -- SVG ---------------------------------------------------------------------


def _f(v: float) -> str:
    return f"{v:.2f}"


def svg_document(scene: FactorPlaneScene) -> str:
    """Self-contained SVG 1.1 text for ``scene``; a pure function of the scene."""
    pts = (*scene.entity_points, *scene.supplementary_points, *scene.attribute_points)
    xs = [p.x for p in pts] + [0.0]
    ys = [p.y for p in pts] + [0.0]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0) or 1.0
    span *= 1.0 + 2 * PAD
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    scale = (VIEWPORT - 2 * MARGIN) / span

    def sx(x):
        return MARGIN + (x - cx) * scale + (VIEWPORT - 2 * MARGIN) / 2

    def sy(y):
        return MARGIN + (cy - y) * scale + (VIEWPORT - 2 * MARGIN) / 2

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{VIEWPORT}" '
        f'height="{VIEWPORT}" viewBox="0 0 {VIEWPORT} {VIEWPORT}">',
        f'<rect x="0" y="0" width="{VIEWPORT}" height="{VIEWPORT}" fill="white"/>',
    ]
    if scene.title:
        out.append(f'<text x="{VIEWPORT // 2}" y="30" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="18">{escape(scene.title)}</text>')
    if scene.origin_cross:
        ox, oy = sx(0.0), sy(0.0)
        out.append(f'<g class="origin" stroke="#999999" stroke-width="1">'
                   f'<line x1="{MARGIN}" y1="{_f(oy)}" x2="{VIEWPORT - MARGIN}" y2="{_f(oy)}"/>'
                   f'<line x1="{_f(ox)}" y1="{MARGIN}" x2="{_f(ox)}" y2="{VIEWPORT - MARGIN}"/></g>')
    out.append(f'<text class="xcaption" x="{VIEWPORT // 2}" y="{VIEWPORT - 20}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="16">{escape(scene.axis_captions[0])}</text>')
    out.append(f'<text class="ycaption" x="20" y="{VIEWPORT // 2}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="16" transform="rotate(-90 20 {VIEWPORT // 2})">'
               f'{escape(scene.axis_captions[1])}</text>')

    out.append('<g class="entities">')
    for p in scene.entity_points:
        x, y = _f(sx(p.x)), _f(sy(p.y))
        title = f"<title>{escape(p.label)}</title>"
        if p.style == "dot":
            out.append(f'<circle cx="{x}" cy="{y}" r="3" fill="black">{title}</circle>')
        else:
            color = "black"
            if p.cluster is not None:
                color = CLUSTER_COLORS[(p.cluster - 1) % len(CLUSTER_COLORS)]
            out.append(f'<text x="{x}" y="{y}" text-anchor="middle" dominant-baseline="middle" '
                       f'font-family="sans-serif" font-size="11" fill="{color}">'
                       f'{escape(p.text or p.label)}{title}</text>')
    out.append("</g>")
    for cls, color, group in (
        ("attributes", ATTRIBUTE_COLOR, scene.attribute_points),
        ("supplementary", SUPPLEMENTARY_COLOR, scene.supplementary_points),
    ):
        if not group:
            continue
        out.append(f'<g class="{cls}" fill="{color}">')
        for p in group:
            x, y = _f(sx(p.x)), _f(sy(p.y))
            out.append(f'<rect x="{_f(sx(p.x) - 3)}" y="{_f(sy(p.y) - 3)}" width="6" height="6"/>'
                       f'<text x="{x}" y="{_f(sy(p.y) - 8)}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="13">{escape(p.text or p.label)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_plane(scene: FactorPlaneScene, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(svg_document(scene), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


# -- extremal reports ----------------------------------------------------------


@dataclass(frozen=True)
class ExtremalEntry:
    label: str
    projection: float
    contribution: float
    cos2: float


@dataclass(frozen=True)
class ExtremalReport:
    axis: int
    direction: Direction
    side: Side
    entries: tuple[ExtremalEntry, ...]
    cutoff: str

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "direction": self.direction,
            "side": self.side,
            "cutoff": self.cutoff,
            "entries": [
                {"label": e.label, "projection": e.projection,
                 "contribution": e.contribution, "cos2": e.cos2}
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def to_markdown(self) -> str:
        lines = [
            f"## Factor {self.axis}, {self.direction} end ({self.side}s)",
            "",
            f"Cutoff: {self.cutoff}",
            "",
            "| rank | label | projection | contribution | cos2 |",
            "|---:|---|---:|---:|---:|",
        ]
        for n, e in enumerate(self.entries, 1):
            label = e.label.replace("|", "\\|")
            lines.append(f"| {n} | {label} | {e.projection!r} | {e.contribution!r} | {e.cos2!r} |")
        return "\n".join(lines) + "\n"


def extremal(
    res: CaResult, k: int, direction: Direction = "positive", top_n: int = 10, side: Side = "row"
) -> ExtremalReport:
    """The ``top_n`` points lying furthest out on one end of axis ``k``.

    Only points strictly on the requested side of the origin qualify; ties
    in projection are ordered by label.
    """
    if not 1 <= k <= res.n_axes:
        raise IndexError(f"axis {k} out of range [1, {res.n_axes}]")
    if res.eigenvalues[k - 1] == 0:
        raise ValueError(f"axis {k} has zero inertia")
    if top_n < 1:
        raise ValueError("top_n must be at least 1")
    if direction not in ("positive", "negative"):
        raise ValueError(f"direction must be 'positive' or 'negative', not {direction!r}")
    labels, coords, ctr, c2 = res._side(side)
    sgn = 1.0 if direction == "positive" else -1.0
    proj = coords[:, k - 1]
    idx = [i for i in range(len(labels)) if sgn * proj[i] > 0]
    idx.sort(key=lambda i: (-abs(proj[i]), labels[i]))
    entries = tuple(
        ExtremalEntry(labels[i], float(proj[i]), float(ctr[i, k - 1]), float(c2[i, k - 1]))
        for i in idx[:top_n]
    )
    return ExtremalReport(axis=k, direction=direction, side=side, entries=entries,
                          cutoff=f"top {top_n} by |projection|")
