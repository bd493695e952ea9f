"""
SVG rendering of soup realizations.

Walk and Brownian loops are drawn as polylines; loops sharing an index
share a stroke colour and uncoupled loops are dashed. Output depends only
on the input documents.
"""

from typing import Dict, Iterable, List, Optional, Tuple

from jinja2 import Template

from ..coupling.soup import BROWNIAN, SoupRealization

PALETTE = [
    '#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd',
    '#8c564b', '#e377c2', '#7f7f7f', '#bcbd22', '#17becf',
]
UNCOUPLED_COLOR = '#999999'

SVG_TEMPLATE = Template("""<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{{ size }}" height="{{ size }}" viewBox="{{ view }}">
  <g id="axes" stroke="#cccccc" stroke-width="{{ axis_width }}">
    <line x1="{{ x_min }}" y1="0" x2="{{ x_max }}" y2="0"/>
    <line x1="0" y1="{{ y_min }}" x2="0" y2="{{ y_max }}"/>
  </g>
{%- for item in items %}
  <polyline class="{{ item.kind }}" data-index="{{ item.index }}" fill="none" stroke="{{ item.color }}" stroke-width="{{ item.width }}"{% if item.dashed %} stroke-dasharray="{{ dash }}"{% endif %} points="{{ item.points }}"/>
{%- endfor %}
</svg>
""")


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _colors(realizations: Iterable[SoupRealization]) -> Dict[Tuple[int, int, int, int], str]:
    indices = sorted({loop.index for r in realizations for loop in r.loops if loop.coupled})
    return {index: PALETTE[i % len(PALETTE)] for i, index in enumerate(indices)}


def render_svg(realizations: List[SoupRealization], size: int = 800,
               bounds: Optional[Tuple[float, float, float, float]] = None) -> str:
    """
    Render one or more realizations into a single SVG document.

    Args:
        realizations: Soups to draw, typically the walk and Brownian soups of one field
        size: Pixel width and height
        bounds: (x_min, x_max, y_min, y_max); defaults to the data extent or [-1, 1]^2

    Returns:
        The SVG text
    """
    if bounds is None:
        xs = [p.real for r in realizations for loop in r.loops for p in loop.loop.points]
        ys = [p.imag for r in realizations for loop in r.loops for p in loop.loop.points]
        if xs:
            bounds = (min(xs + [-1.0]), max(xs + [1.0]), min(ys + [-1.0]), max(ys + [1.0]))
        else:
            bounds = (-1.0, 1.0, -1.0, 1.0)
    x_min, x_max, y_min, y_max = bounds
    span = max(x_max - x_min, y_max - y_min)
    colors = _colors(realizations)

    items = []
    for realization in realizations:
        width = span / 400.0 if realization.kind == BROWNIAN else span / 250.0
        for item in realization.loops:
            # SVG y grows downwards
            points = ' '.join(f"{_fmt(p.real)},{_fmt(-p.imag)}" for p in item.loop.points)
            items.append({
                'kind': realization.kind,
                'index': '{}:{},{}:{}'.format(*item.index),
                'color': colors.get(item.index, UNCOUPLED_COLOR) if item.coupled else UNCOUPLED_COLOR,
                'width': _fmt(width),
                'dashed': not item.coupled,
                'points': points,
            })

    return SVG_TEMPLATE.render(
        size=size,
        view=' '.join(_fmt(v) for v in (x_min, -y_max, span, span)),
        axis_width=_fmt(span / 500.0),
        dash=f"{_fmt(span / 100.0)} {_fmt(span / 200.0)}",
        x_min=_fmt(x_min), x_max=_fmt(x_max), y_min=_fmt(-y_max), y_max=_fmt(-y_min),
        items=items,
    )
