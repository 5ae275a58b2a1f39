import svgwrite

# Stroke colours per series, cycled
PALETTE = ("black", "firebrick", "steelblue", "darkgreen", "darkorange")


def smile_chart(output_path, series, width=640, height=480, margin=60):
    """
    Draws implied-volatility smiles as polylines. `series` maps a label to
    (strike_mult, implied_vol_x100) points; points with a NaN vol are skipped.
    """
    points = [
        (x, y) for values in series.values() for x, y in values if y == y
    ]
    if not points:
        raise ValueError("Nothing to plot")
    x_min = min(x for x, _ in points)
    x_max = max(x for x, _ in points)
    y_min = min(y for _, y in points)
    y_max = max(y for _, y in points)
    x_span = (x_max - x_min) or 1.0
    y_span = (y_max - y_min) or 1.0

    def to_canvas(x, y):
        return (
            margin + (x - x_min) / x_span * (width - 2 * margin),
            height - margin - (y - y_min) / y_span * (height - 2 * margin),
        )

    output = svgwrite.Drawing(output_path, (width, height), profile="tiny")
    # Axes
    output.add(output.line(to_canvas(x_min, y_min), to_canvas(x_max, y_min), stroke="gray"))
    output.add(output.line(to_canvas(x_min, y_min), to_canvas(x_min, y_max), stroke="gray"))
    for x in sorted({x for x, _ in points}):
        cx, cy = to_canvas(x, y_min)
        output.add(output.text(f"{x:g}", insert=(cx - 8, cy + 18), font_size=11))
    for y in (y_min, y_max):
        cx, cy = to_canvas(x_min, y)
        output.add(output.text(f"{y:.1f}", insert=(cx - 45, cy + 4), font_size=11))
    # One polyline per series, with its label in the legend
    for n, (label, values) in enumerate(series.items()):
        colour = PALETTE[n % len(PALETTE)]
        line = [to_canvas(x, y) for x, y in sorted(values) if y == y]
        output.add(output.polyline(points=line, stroke=colour, fill="none", stroke_width=2))
        output.add(
            output.text(label, insert=(width - margin - 120, margin + 16 * n), fill=colour, font_size=12)
        )
    output.save()
