"""Per-class F1 bar chart as a self-contained SVG."""

from __future__ import annotations

from xml.sax.saxutils import escape

WIDTH = 640
HEIGHT = 360
MARGIN_LEFT = 50
MARGIN_RIGHT = 20
MARGIN_TOP = 30
MARGIN_BOTTOM = 90


def f1_plot_svg(report) -> str:
    """Bars of per-class F1 in report order with a dashed macro-F1 line."""
    n = len(report.class_names)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    base = MARGIN_TOP + plot_h
    slot = plot_w / max(n, 1)
    bar_w = slot * 0.7

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle" font-size="13">'
        f'Per-class F1 (threshold {report.threshold:g})</text>',
        f'<line x1="{MARGIN_LEFT}" y1="{base}" x2="{WIDTH - MARGIN_RIGHT}" y2="{base}" '
        f'stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{base}" '
        f'stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = base - tick * plot_h
        out.append(f'<text x="{MARGIN_LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">'
                   f'{tick:.2f}</text>')
    for k, name in enumerate(report.class_names):
        f1 = float(report.f1[k])
        h = f1 * plot_h
        x = MARGIN_LEFT + k * slot + (slot - bar_w) / 2
        cx = x + bar_w / 2
        out.append(f'<rect class="bar" x="{x:.2f}" y="{base - h:.2f}" width="{bar_w:.2f}" '
                   f'height="{h:.2f}" fill="#4c72b0"><title>{escape(name)}: {f1:.6f}</title>'
                   f'</rect>')
        out.append(f'<text class="label" x="{cx:.2f}" y="{base + 12}" text-anchor="end" '
                   f'transform="rotate(-45 {cx:.2f} {base + 12})">{escape(name)}</text>')
    y = base - report.macro_f1 * plot_h
    out.append(f'<line class="macro" x1="{MARGIN_LEFT}" y1="{y:.2f}" x2="{WIDTH - MARGIN_RIGHT}" '
               f'y2="{y:.2f}" stroke="#c44e52" stroke-dasharray="6 4"/>')
    out.append(f'<text x="{WIDTH - MARGIN_RIGHT}" y="{y - 4:.2f}" text-anchor="end" '
               f'fill="#c44e52">macro-F1 {report.macro_f1:.4f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_f1_plot(report, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f1_plot_svg(report))
