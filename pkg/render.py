"""
SVG documents and raster previews of trees and point sets
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
import pygame

from errors import InputError
from geom_tree import GeomTree, as_points

logger = logging.getLogger(__name__)

# Stroke colors per layer kind
LAYER_STYLES = {
    "K": {"color": (150, 150, 150)},
    "tree": {"color": (65, 105, 225)},
    "decorated": {"color": (90, 140, 50)},
    "true": {"color": (200, 40, 40)},
}
DEFAULT_COLOR = (0, 0, 0)
MARGIN = 0.05


@dataclass
class Layer:
    """A tree or a point set drawn in one group"""

    name: str
    data: Union[GeomTree, np.ndarray, Sequence[complex]]
    color: Tuple[int, int, int] = None

    def __post_init__(self):
        if self.color is None:
            self.color = LAYER_STYLES.get(self.name, {}).get("color", DEFAULT_COLOR)

    @property
    def is_tree(self):
        return isinstance(self.data, GeomTree)

    def points(self):
        return self.data.all_points() if self.is_tree else as_points(self.data)

    def polylines(self):
        return [edge.polyline for edge in self.data.edges] if self.is_tree else []


def _as_layers(layers) -> List[Layer]:
    out = []
    for item in layers:
        out.append(item if isinstance(item, Layer) else Layer(*item))
    if not out:
        raise InputError("nothing to draw")
    return out


def _frame(layers: List[Layer]):
    """Joint bounding box with a 5% margin: (x0, y0, width, height)"""
    points = np.concatenate([layer.points() for layer in layers])
    x0, x1 = points.real.min(), points.real.max()
    y0, y1 = points.imag.min(), points.imag.max()
    span = max(x1 - x0, y1 - y0, 1e-12)
    pad = MARGIN * span
    return x0 - pad, y0 - pad, (x1 - x0) + 2 * pad, (y1 - y0) + 2 * pad


def _fmt(value):
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def render_svg(layers, stroke_width=1.5, vertex_radius=2.0) -> str:
    """Deterministic SVG; y points up, one group per layer"""
    layers = _as_layers(layers)
    x0, y0, width, height = _frame(layers)
    top = -(y0 + height)
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_fmt(x0)} {_fmt(top)} {_fmt(width)} {_fmt(height)}">'
    ]
    radius = vertex_radius * max(width, height) / 800.0
    for layer in layers:
        r, g, b = layer.color
        lines.append(f'<g class="layer-{layer.name}" stroke="rgb({r},{g},{b})" fill="none" '
                     f'stroke-width="{_fmt(stroke_width)}">')
        if layer.is_tree:
            for line in layer.polylines():
                path = " L ".join(f"{_fmt(z.real)} {_fmt(-z.imag)}" for z in line)
                lines.append(f'<path vector-effect="non-scaling-stroke" d="M {path}"/>')
        else:
            for z in layer.points():
                lines.append(f'<circle cx="{_fmt(z.real)}" cy="{_fmt(-z.imag)}" r="{_fmt(radius)}" '
                             f'fill="rgb({r},{g},{b})" stroke="none"/>')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(path, layers, **style):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(render_svg(layers, **style))
    logger.debug("wrote %s", path)


def render_png(path, layers, size=800, stroke_width=1.5, vertex_radius=2.0):
    """Raster preview of the same layers through a pygame surface"""
    layers = _as_layers(layers)
    x0, y0, width, height = _frame(layers)
    scale = (size - 1) / max(width, height)

    def pixel(z):
        return (int(round((z.real - x0) * scale)), int(round((y0 + height - z.imag) * scale)))

    surface = pygame.Surface((size, size))
    surface.fill((255, 255, 255))
    thickness = max(1, int(round(stroke_width)))
    for layer in layers:
        if layer.is_tree:
            for line in layer.polylines():
                pygame.draw.lines(surface, layer.color, False, [pixel(z) for z in line], thickness)
        else:
            for z in layer.points():
                pygame.draw.circle(surface, layer.color, pixel(z), max(1, int(round(vertex_radius))))
    pygame.image.save(surface, str(path))
    logger.debug("wrote %s", path)
