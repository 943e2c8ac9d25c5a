"""Static renderings of flow aggregates and trees.

All output is text written with fixed number formatting ("%.2f" for
coordinates), so identical inputs give byte-identical files.  The
parallel-coordinates plot encodes path counts as line darkness; the
Sankey document embeds the FlowDocument as a JSON data island together
with the interactive viewer bundle and needs no network access; single
trees export as DOT digraphs for external layout tools.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path as _FsPath

from forestflow.path_flow import TERMINUS, TERMINUS_NAME, flow_document

__all__ = [
    "RenderOptions",
    "render_pcp",
    "render_importance_chart",
    "render_sankey_doc",
    "export_tree_graph",
    "format_block_label",
    "sankey_layout",
]

_COLOR_MODES = ("grayscale", "sequential")
_AXIS_ORDERS = ("index", "frequency")

# anchor colours for the perceptual-sequential ramp
_SEQ_ANCHORS = (
    (0.00, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.50, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.00, (253, 231, 37)),
)


@dataclass
class RenderOptions:
    """Appearance knobs shared by the renderers.

    ``min_darkness`` is the darkness floor for the rarest paths so they
    stay visible; ``axis_order`` stacks gradations by covariate index or
    by total path frequency (descending); ``label_format`` builds Sankey
    block labels from {rank} and {label} placeholders.
    """

    width: int = 960
    height: int = 600
    color_mode: str = "grayscale"
    axis_order: str = "index"
    min_darkness: float = 0.15
    label_format: str = "Node.{rank}_{label}"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("width and height must be positive")
        if self.color_mode not in _COLOR_MODES:
            raise ValueError(f"color_mode must be one of {_COLOR_MODES}")
        if self.axis_order not in _AXIS_ORDERS:
            raise ValueError(f"axis_order must be one of {_AXIS_ORDERS}")
        if not 0.0 <= self.min_darkness < 1.0:
            raise ValueError("min_darkness must be in [0, 1)")


def format_block_label(label_format, rank, label):
    """Display label of a ranked group, e.g. "Node.1_x.17"."""
    return label_format.format(rank=rank, label=label)


def _fmt(v):
    return f"{v:.2f}"


def _sequential_color(t):
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(_SEQ_ANCHORS, _SEQ_ANCHORS[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = tuple(round(a + (b - a) * f) for a, b in zip(c0, c1))
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#{:02x}{:02x}{:02x}".format(*_SEQ_ANCHORS[-1][1])


def _edge_color(weight, max_weight, opts):
    t = opts.min_darkness + (1.0 - opts.min_darkness) * (weight / max_weight)
    if opts.color_mode == "grayscale":
        g = round(255 * (1.0 - t))
        return f"#{g:02x}{g:02x}{g:02x}"
    return _sequential_color(t)


def _covariate_order(agg, axis_order):
    p = len(agg.covariate_names)
    if axis_order == "index":
        return list(range(p))
    freq = [0] * p
    for (rank, label), tot in agg.group_totals.items():
        if label != TERMINUS:
            freq[label] += tot
    return sorted(range(p), key=lambda j: (-freq[j], j))


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from None


def render_pcp(agg, opts, path):
    """Parallel-coordinates plot of a flow aggregate.

    One vertical axis per rank 1..max_rank labeled "Node r"; the first
    (bottom) gradation on each axis is Terminus and the rest are the
    covariates; each flow edge becomes one line segment whose darkness is
    min_darkness + (1 - min_darkness) * weight / max weight.
    """
    if not agg.group_totals:
        raise ValueError("empty aggregate: nothing to render")
    order = _covariate_order(agg, opts.axis_order)
    p = len(agg.covariate_names)
    n_grad = p + 1  # gradation 0 is Terminus
    grad_of = {TERMINUS: 0}
    for pos, j in enumerate(order):
        grad_of[j] = pos + 1

    ml, mr, mt, mb = 70.0, 20.0, 20.0, 40.0
    pw = opts.width - ml - mr
    ph = opts.height - mt - mb
    n_axes = agg.max_rank

    def axis_x(rank):
        if n_axes == 1:
            return ml + pw / 2.0
        return ml + (rank - 1) * pw / (n_axes - 1)

    def grad_y(g):
        return mt + ph * (1.0 - g / (n_grad - 1))

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{opts.width}" '
        f'height="{opts.height}" viewBox="0 0 {opts.width} {opts.height}">'
    )
    out.append(f'<rect width="{opts.width}" height="{opts.height}" fill="#ffffff"/>')

    # edges first sorted by weight so the heaviest draw on top
    if agg.edges:
        max_w = max(agg.edges.values())
        ordered = sorted(agg.edges.items(), key=lambda kv: (kv[1], kv[0]))
        for (rank, frm, to), w in ordered:
            x1, y1 = axis_x(rank), grad_y(grad_of[frm])
            x2, y2 = axis_x(rank + 1), grad_y(grad_of[to])
            color = _edge_color(w, max_w, opts)
            out.append(
                f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
                f'y2="{_fmt(y2)}" stroke="{color}" stroke-width="1.50"/>'
            )

    for rank in range(1, n_axes + 1):
        x = axis_x(rank)
        out.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(mt)}" x2="{_fmt(x)}" '
            f'y2="{_fmt(mt + ph)}" stroke="#000000" stroke-width="1.00"/>'
        )
        for g in range(n_grad):
            y = grad_y(g)
            out.append(
                f'<line x1="{_fmt(x - 3)}" y1="{_fmt(y)}" x2="{_fmt(x + 3)}" '
                f'y2="{_fmt(y)}" stroke="#555555" stroke-width="0.50"/>'
            )
        out.append(
            f'<text x="{_fmt(x)}" y="{_fmt(mt + ph + 24)}" font-size="12" '
            f'font-family="sans-serif" text-anchor="middle">Node {rank}</text>'
        )

    # gradation labels in the left gutter of the first axis
    x0 = axis_x(1)
    labels = [(0, TERMINUS_NAME)] + [
        (pos + 1, agg.covariate_names[j]) for pos, j in enumerate(order)
    ]
    for g, name in labels:
        y = grad_y(g)
        out.append(
            f'<text x="{_fmt(x0 - 6)}" y="{_fmt(y)}" font-size="8" '
            f'font-family="sans-serif" text-anchor="end" '
            f'dy="0.32em">{_xml_escape(name)}</text>'
        )
    out.append("</svg>")
    _write_text(path, "\n".join(out) + "\n")


def _xml_escape(s):
    return (
        str(s)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def render_importance_chart(report, opts, path, metric="impurity"):
    """Dot chart of an importance metric, covariates sorted descending
    (ties by covariate index)."""
    values = getattr(report, metric, None)
    if metric not in ("impurity", "permutation"):
        raise ValueError("metric must be 'impurity' or 'permutation'")
    if values is None:
        raise ValueError(f"report carries no {metric} scores")
    names = report.covariate_names
    p = len(names)
    if p == 0:
        raise ValueError("empty importance report")
    order = sorted(range(p), key=lambda j: (-values[j], j))

    ml, mr, mt, mb = 90.0, 20.0, 20.0, 40.0
    pw = opts.width - ml - mr
    ph = opts.height - mt - mb
    lo = min(0.0, float(min(values)))
    hi = max(0.0, float(max(values)))
    if hi == lo:
        hi = lo + 1.0

    def x_of(v):
        return ml + (v - lo) / (hi - lo) * pw

    def y_of(row):
        return mt + (row + 0.5) * ph / p

    dot_fill = "#333333" if opts.color_mode == "grayscale" else "#21918c"
    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{opts.width}" '
        f'height="{opts.height}" viewBox="0 0 {opts.width} {opts.height}">'
    )
    out.append(f'<rect width="{opts.width}" height="{opts.height}" fill="#ffffff"/>')
    for row, j in enumerate(order):
        y = y_of(row)
        out.append(
            f'<line x1="{_fmt(ml)}" y1="{_fmt(y)}" x2="{_fmt(ml + pw)}" '
            f'y2="{_fmt(y)}" stroke="#dddddd" stroke-width="0.50"/>'
        )
        out.append(
            f'<text x="{_fmt(ml - 6)}" y="{_fmt(y)}" font-size="9" '
            f'font-family="sans-serif" text-anchor="end" '
            f'dy="0.32em">{_xml_escape(names[j])}</text>'
        )
        out.append(
            f'<circle cx="{_fmt(x_of(float(values[j])))}" cy="{_fmt(y)}" '
            f'r="3.00" fill="{dot_fill}"/>'
        )
    axis_y = mt + ph
    out.append(
        f'<line x1="{_fmt(ml)}" y1="{_fmt(axis_y)}" x2="{_fmt(ml + pw)}" '
        f'y2="{_fmt(axis_y)}" stroke="#000000" stroke-width="1.00"/>'
    )
    for v in (lo, (lo + hi) / 2.0, hi):
        x = x_of(v)
        out.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(axis_y)}" x2="{_fmt(x)}" '
            f'y2="{_fmt(axis_y + 4)}" stroke="#000000" stroke-width="1.00"/>'
        )
        out.append(
            f'<text x="{_fmt(x)}" y="{_fmt(axis_y + 16)}" font-size="9" '
            f'font-family="sans-serif" text-anchor="middle">{v:.4g}</text>'
        )
    out.append(
        f'<text x="{_fmt(ml + pw / 2)}" y="{_fmt(axis_y + 32)}" font-size="11" '
        f'font-family="sans-serif" text-anchor="middle">'
        f'{metric} importance</text>'
    )
    out.append("</svg>")
    _write_text(path, "\n".join(out) + "\n")


def sankey_layout(groups, max_rank, width, height, block_width=18.0, gap=8.0,
                  margin=(20.0, 20.0, 20.0, 20.0)):
    """Block rectangles for a Sankey view of (rank, label, total) groups.

    Columns sit at equal horizontal spacing by rank; within a column
    blocks sort by descending total (ties by label) with Terminus last;
    one shared vertical scale (the tightest column's pixels-per-path)
    makes every block height proportional to its group total.  Returns
    {(rank, label): (x, y, h)}.  The interactive viewer computes the
    same geometry client-side.
    """
    mt, mr, mb, ml = margin
    inner_w = width - ml - mr
    inner_h = height - mt - mb
    by_rank = {}
    for rank, label, total in groups:
        by_rank.setdefault(rank, []).append((label, total))
    if not by_rank:
        return {}

    def block_order(item):
        label, total = item
        if label is None:
            return (1, 0, 0)
        return (0, -total, label)

    scale = None
    for rank, blocks in by_rank.items():
        col_sum = sum(t for _, t in blocks)
        usable = inner_h - gap * (len(blocks) - 1)
        if usable <= 0 or col_sum <= 0:
            continue
        s = usable / col_sum
        scale = s if scale is None else min(scale, s)
    if scale is None:
        scale = 0.0

    def col_x(rank):
        if max_rank == 1:
            return ml + (inner_w - block_width) / 2.0
        return ml + (rank - 1) * (inner_w - block_width) / (max_rank - 1)

    out = {}
    for rank, blocks in by_rank.items():
        x = col_x(rank)
        y = mt
        for label, total in sorted(blocks, key=block_order):
            h = total * scale
            out[(rank, label)] = (x, y, h)
            y += h + gap
    return out


_HTML_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>forestflow path flows</title>
<style>
body {{ font-family: system-ui, sans-serif; margin: 16px; background: #ffffff; color: #222222; }}
.ff-header h1 {{ font-size: 18px; margin: 0 0 4px 0; }}
.ff-header p {{ font-size: 13px; margin: 0 0 8px 0; color: #555555; }}
.ff-controls {{ display: flex; gap: 18px; align-items: center; flex-wrap: wrap; margin: 8px 0 12px 0; font-size: 13px; }}
.ff-controls label {{ display: flex; gap: 6px; align-items: center; }}
.ff-residual {{ font-size: 12px; color: #774400; margin: 6px 0; min-height: 1em; }}
.ff-tooltip {{ position: fixed; pointer-events: none; background: rgba(20,20,20,0.92); color: #ffffff; padding: 4px 8px; border-radius: 3px; font-size: 12px; display: none; z-index: 10; }}
.ff-error {{ border: 2px solid #bb0000; background: #ffeeee; color: #660000; padding: 12px; font-size: 14px; }}
.ff-block {{ stroke: #ffffff; stroke-width: 1; cursor: pointer; }}
.ff-link {{ fill: none; cursor: pointer; }}
.ff-label {{ font-size: 10px; font-family: sans-serif; pointer-events: none; }}
</style>
</head>
<body>
<div id="app"></div>
<script id="flow-data" type="application/json">{island}</script>
<script type="module">
{bundle}
</script>
</body>
</html>
"""


def _viewer_bundle():
    bundle = _FsPath(__file__).parent / "assets" / "viewer.js"
    if not bundle.is_file():
        raise ValueError(
            "viewer bundle missing from build: expected packaged asset "
            "assets/viewer.js"
        )
    return bundle.read_text(encoding="utf-8")


def render_sankey_doc(agg, opts, path, class_names=(), class_aggregates=None):
    """Self-contained interactive Sankey document.

    Embeds the FlowDocument (plus per-class aggregates when given, so the
    viewer can filter by predicted class without recomputation) as a JSON
    data island with element id "flow-data", and inlines the viewer
    bundle; the file renders offline.  Block labels follow
    ``opts.label_format`` ("Node.1_x.17" style).
    """
    if not agg.group_totals:
        raise ValueError("empty aggregate: nothing to render")
    doc = flow_document(agg, class_names=class_names, class_aggregates=class_aggregates)
    doc["render_options"] = {
        "width": opts.width,
        "height": opts.height,
        "color_mode": opts.color_mode,
        "label_format": opts.label_format,
    }
    island = json.dumps(doc, separators=(",", ":")).replace("</", "<\\/")
    html = _HTML_TEMPLATE.format(island=island, bundle=_viewer_bundle())
    _write_text(path, html)


def export_tree_graph(tree, covariate_names, path):
    """Write one tree as a DOT digraph: internal nodes labeled with their
    covariate name, leaves labeled "Terminus", edges parent -> child."""
    def esc(s):
        return str(s).replace("\\", "\\\\").replace('"', '\\"')

    lines = ["digraph tree {", "  node [shape=box, fontname=\"sans-serif\"];"]
    for i in range(tree.n_nodes):
        if tree.feature[i] >= 0:
            label = esc(covariate_names[tree.feature[i]])
        else:
            label = TERMINUS_NAME
        lines.append(f'  n{i} [label="{label}"];')
    for i in range(tree.n_nodes):
        if tree.feature[i] >= 0:
            lines.append(f"  n{i} -> n{int(tree.left[i])};")
            lines.append(f"  n{i} -> n{int(tree.right[i])};")
    lines.append("}")
    _write_text(path, "\n".join(lines) + "\n")
