"""Dependency-free SVG chart emission (deterministic byte-for-byte output).

Two chart kinds cover the command-line workflows: overlaid histograms and an
annotated correlation heatmap.  Every numeric attribute is formatted through
one helper so repeated runs produce identical files.
"""

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3")


def _n(x):
    """Deterministic short decimal for SVG coordinates."""
    return "%.2f" % float(x)


def _esc(s):
    return (
        str(s)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def render_histogram_svg(series, title="", x_label="score", y_label="density",
                         width=720, height=440):
    """Overlaid bar histograms.

    ``series`` is a list of (label, bins) pairs where bins is a list of
    (lo, hi, value) triples; all series must share the same bin edges.
    """
    ml, mr, mt, mb = 64, 16, 40, 48
    pw, ph = width - ml - mr, height - mt - mb
    x_max = max(b[-1][1] for _, b in series)
    y_max = max(max(v for _, _, v in b) for _, b in series)
    if y_max <= 0:
        y_max = 1.0
    sx = pw / x_max if x_max > 0 else pw
    sy = ph / (y_max * 1.05)
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'font-family="sans-serif" font-size="12">' % (width, height)
    ]
    if title:
        out.append('<text x="%s" y="20" text-anchor="middle" font-size="14">%s</text>'
                   % (_n(ml + pw / 2), _esc(title)))
    for s, (label, bins) in enumerate(series):
        color = PALETTE[s % len(PALETTE)]
        for lo, hi, v in bins:
            if v <= 0:
                continue
            x = ml + lo * sx
            w = (hi - lo) * sx
            h = v * sy
            out.append(
                '<rect x="%s" y="%s" width="%s" height="%s" fill="%s" fill-opacity="0.55"/>'
                % (_n(x), _n(mt + ph - h), _n(w), _n(h), color)
            )
        out.append(
            '<rect x="%s" y="%s" width="10" height="10" fill="%s" fill-opacity="0.55"/>'
            % (_n(ml + 8), _n(mt + 6 + 16 * s), color)
        )
        out.append('<text x="%s" y="%s">%s</text>'
                   % (_n(ml + 22), _n(mt + 15 + 16 * s), _esc(label)))
    out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="black"/>'
               % (_n(ml), _n(mt + ph), _n(ml + pw), _n(mt + ph)))
    out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="black"/>'
               % (_n(ml), _n(mt), _n(ml), _n(mt + ph)))
    for i in range(5):
        fx = x_max * i / 4
        out.append('<text x="%s" y="%s" text-anchor="middle">%s</text>'
                   % (_n(ml + fx * sx), _n(mt + ph + 16), "%.3g" % fx))
        fy = y_max * i / 4
        out.append('<text x="%s" y="%s" text-anchor="end">%s</text>'
                   % (_n(ml - 6), _n(mt + ph - fy * sy + 4), "%.3g" % fy))
    out.append('<text x="%s" y="%s" text-anchor="middle">%s</text>'
               % (_n(ml + pw / 2), _n(height - 10), _esc(x_label)))
    out.append('<text x="16" y="%s" text-anchor="middle" transform="rotate(-90 16 %s)">%s</text>'
               % (_n(mt + ph / 2), _n(mt + ph / 2), _esc(y_label)))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _lerp(a, b, t):
    return round(a + (b - a) * t)


def _diverging_color(v):
    """Map [-1, 1] to a blue-white-red ramp."""
    v = max(-1.0, min(1.0, float(v)))
    white, red, blue = (255, 255, 255), (180, 4, 38), (59, 76, 192)
    target = red if v >= 0 else blue
    t = abs(v)
    return "#%02x%02x%02x" % tuple(_lerp(w, c, t) for w, c in zip(white, target))


def render_heatmap_svg(matrix, labels, title="", cell=44):
    """Square heatmap with each cell annotated with its value (two decimals)."""
    n = len(labels)
    ml, mt = 56, 56
    width = ml + n * cell + 16
    height = mt + n * cell + 16
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'font-family="sans-serif" font-size="11">' % (width, height)
    ]
    if title:
        out.append('<text x="%s" y="20" text-anchor="middle" font-size="14">%s</text>'
                   % (_n(ml + n * cell / 2), _esc(title)))
    for j, lab in enumerate(labels):
        out.append('<text x="%s" y="%s" text-anchor="middle">%s</text>'
                   % (_n(ml + (j + 0.5) * cell), _n(mt - 8), _esc(lab)))
        out.append('<text x="%s" y="%s" text-anchor="end">%s</text>'
                   % (_n(ml - 8), _n(mt + (j + 0.5) * cell + 4), _esc(lab)))
    for i in range(n):
        for j in range(n):
            v = float(matrix[i][j])
            x, y = ml + j * cell, mt + i * cell
            out.append('<rect x="%s" y="%s" width="%d" height="%d" fill="%s" stroke="white"/>'
                       % (_n(x), _n(y), cell, cell, _diverging_color(v)))
            text_color = "white" if abs(v) > 0.6 else "black"
            out.append('<text x="%s" y="%s" text-anchor="middle" fill="%s">%.2f</text>'
                       % (_n(x + cell / 2), _n(y + cell / 2 + 4), text_color, v))
    out.append("</svg>")
    return "\n".join(out) + "\n"
