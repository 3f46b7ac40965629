"""Minimal SVG figures: heatmaps with optima markers, ICE curves, modality scatter."""
from html import escape

import numpy as np

# viridis anchors
_CMAP = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=float)

_CATEGORY_COLORS = {"unimodal": "#1f77b4", "multimodal": "#d62728", "uncategorized": "#bbbbbb"}


def _color(t):
    t = float(np.clip(t, 0.0, 1.0)) * (len(_CMAP) - 1)
    i = min(int(t), len(_CMAP) - 2)
    c = _CMAP[i] + (t - i) * (_CMAP[i + 1] - _CMAP[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _doc(w, h, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">\n'
            + "\n".join(body) + "\n</svg>\n")


def _triangle(x, y, r, up, fill):
    if up:
        pts = [(x, y - r), (x - r, y + r * 0.8), (x + r, y + r * 0.8)]
    else:
        pts = [(x, y + r), (x - r, y - r * 0.8), (x + r, y - r * 0.8)]
    s = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
    return f'<polygon points="{s}" fill="{fill}" stroke="black" stroke-width="0.8"/>'


def heatmap(grid, optima, title="", xlabel="", ylabel="", size=360):
    """Rect heatmap of ``grid.values``; maxima as upward and minima as
    downward triangles. ``dims[0]`` runs along x, ``dims[1]`` along y."""
    Z = np.asarray(grid.values)
    R, C = Z.shape
    pad_l, pad_t, pad_b = 50, 28, 40
    cw, ch = size / R, size / C
    lo, hi = float(Z.min()), float(Z.max())
    span = hi - lo if hi > lo else 1.0
    body = [f'<text x="{pad_l}" y="16">{escape(title)}</text>']
    for a in range(R):
        for b in range(C):
            x = pad_l + a * cw
            y = pad_t + (C - 1 - b) * ch
            body.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" '
                        f'fill="{_color((Z[a, b] - lo) / span)}"/>')
    r = max(3.0, min(cw, ch) * 1.2)
    for up, nodes in ((True, optima.maxima), (False, optima.minima)):
        for a, b in nodes:
            x = pad_l + (a + 0.5) * cw
            y = pad_t + (C - 1 - b + 0.5) * ch
            body.append(_triangle(x, y, r, up, "white" if up else "black"))
    body.append(f'<text x="{pad_l + size / 2:.1f}" y="{pad_t + size + 28}" text-anchor="middle">{escape(xlabel)}</text>')
    body.append(f'<text x="14" y="{pad_t + size / 2:.1f}" transform="rotate(-90 14 {pad_t + size / 2:.1f})" '
                f'text-anchor="middle">{escape(ylabel)}</text>')
    body.append(f'<text x="{pad_l}" y="{pad_t + size + 14}">0</text>')
    body.append(f'<text x="{pad_l + size - 6}" y="{pad_t + size + 14}">1</text>')
    return _doc(pad_l + size + 10, pad_t + size + pad_b, body)


def curves(ice, title="", xlabel="", width=420, height=300):
    """Polyline per ICE curve."""
    Y = np.asarray(ice.curves)
    lo, hi = float(Y.min()), float(Y.max())
    span = hi - lo if hi > lo else 1.0
    pad_l, pad_t, pw, ph = 50, 28, width - 70, height - 68
    body = [f'<text x="{pad_l}" y="16">{escape(title)}</text>',
            f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for row in Y:
        pts = " ".join(f"{pad_l + g * pw:.2f},{pad_t + ph - (v - lo) / span * ph:.2f}"
                       for g, v in zip(ice.grid, row))
        body.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-opacity="0.35"/>')
    body.append(f'<text x="{pad_l + pw / 2:.1f}" y="{pad_t + ph + 28}" text-anchor="middle">{escape(xlabel)}</text>')
    body.append(f'<text x="4" y="{pad_t + 10}">{hi:.3g}</text>')
    body.append(f'<text x="4" y="{pad_t + ph}">{lo:.3g}</text>')
    return _doc(width, height, body)


def modality_scatter(unit, categories, dims=(0, 1), title="", xlabel="", ylabel="", size=320):
    unit = np.atleast_2d(np.asarray(unit, dtype=float))
    pad_l, pad_t = 50, 28
    body = [f'<text x="{pad_l}" y="16">{escape(title)}</text>',
            f'<rect x="{pad_l}" y="{pad_t}" width="{size}" height="{size}" fill="none" stroke="black"/>']
    for u, cat in zip(unit, categories):
        x = pad_l + u[dims[0]] * size
        y = pad_t + (1 - (u[dims[1]] if unit.shape[1] > 1 else 0.5)) * size
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{_CATEGORY_COLORS[cat]}"/>')
    yl = pad_t + size + 30
    for k, (cat, col) in enumerate(_CATEGORY_COLORS.items()):
        body.append(f'<circle cx="{pad_l + 6 + 100 * k}" cy="{yl - 4}" r="4" fill="{col}"/>')
        body.append(f'<text x="{pad_l + 14 + 100 * k}" y="{yl}">{cat}</text>')
    body.append(f'<text x="{pad_l + size / 2:.1f}" y="{pad_t + size + 14}" text-anchor="middle">{escape(xlabel)}</text>')
    body.append(f'<text x="14" y="{pad_t + size / 2:.1f}" transform="rotate(-90 14 {pad_t + size / 2:.1f})" '
                f'text-anchor="middle">{escape(ylabel)}</text>')
    return _doc(pad_l + size + 20, pad_t + size + 44, body)
