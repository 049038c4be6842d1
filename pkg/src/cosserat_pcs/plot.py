"""Minimal SVG line plots of a trajectory (axes, ticks, polylines)."""

from __future__ import annotations

import numpy as np

_W, _H = 720, 420
_PAD_L, _PAD_R, _PAD_T, _PAD_B = 70, 20, 30, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** np.floor(np.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + step * 1e-9, step)


def _fmt(v):
    return f"{v:.4g}"


def line_plot(x, series, reference=None, xlabel="", ylabel="", title="") -> str:
    """SVG text; ``series`` is a list of (label, y) drawn dash-dot, ``reference``
    a list of (label, y) drawn solid."""
    reference = reference or []
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(y, dtype=float) for _, y in series + reference]
    lo = min(float(np.min(y)) for y in ys)
    hi = max(float(np.max(y)) for y in ys)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    margin = 0.05 * (hi - lo)
    lo, hi = lo - margin, hi + margin
    x0, x1 = float(x[0]), float(x[-1]) if x[-1] > x[0] else float(x[0]) + 1.0
    pw, ph = _W - _PAD_L - _PAD_R, _H - _PAD_T - _PAD_B

    def px(v):
        return _PAD_L + (v - x0) / (x1 - x0) * pw

    def py(v):
        return _PAD_T + (hi - v) / (hi - lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle">{title}</text>',
        f'<rect x="{_PAD_L}" y="{_PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        out.append(f'<line x1="{px(v):.1f}" y1="{_PAD_T + ph}" x2="{px(v):.1f}" y2="{_PAD_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(v):.1f}" y="{_PAD_T + ph + 18}" text-anchor="middle">{_fmt(v)}</text>')
    for v in _ticks(lo, hi):
        out.append(f'<line x1="{_PAD_L - 5}" y1="{py(v):.1f}" x2="{_PAD_L}" y2="{py(v):.1f}" stroke="black"/>')
        out.append(f'<text x="{_PAD_L - 8}" y="{py(v) + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
    out.append(f'<text x="{_PAD_L + pw / 2}" y="{_H - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(
        f'<text x="16" y="{_PAD_T + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {_PAD_T + ph / 2})">{ylabel}</text>'
    )

    def poly(y, color, dash):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        style = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{style}/>'

    legend = []
    for i, (label, y) in enumerate(reference):
        out.append(poly(y, "black", None))
        legend.append((label, "black", None))
    for i, (label, y) in enumerate(series):
        c = _COLORS[i % len(_COLORS)]
        out.append(poly(y, c, "8,3,2,3"))
        legend.append((label, c, "8,3,2,3"))
    for i, (label, color, dash) in enumerate(legend):
        yy = _PAD_T + 14 + 16 * i
        style = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{_W - 150}" y1="{yy}" x2="{_W - 120}" y2="{yy}" stroke="{color}" stroke-width="1.5"{style}/>')
        out.append(f'<text x="{_W - 114}" y="{yy + 4}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out)


def trajectory_svg(traj, mode, coordinate=None, axis="steps") -> str:
    """Per-section traces of the controlled coordinate against its reference.

    The controlled quantity is q in position mode and qdot in velocity mode.
    ``coordinate`` (1..6) defaults to the one with the largest excursion.  The
    horizontal axis is the cumulative accepted step count or the time.
    """
    n = traj.dof // 6
    y = traj.q if mode == "position" else traj.qdot
    ref = traj.q_ref if mode == "position" else traj.qdot_ref
    if coordinate is None:
        spread = np.ptp(y - ref, axis=0).reshape(n, 6).max(axis=0)
        coordinate = int(np.argmax(spread)) + 1
    k = coordinate - 1
    series = [(f"section {i + 1}", y[:, 6 * i + k]) for i in range(n)]
    refs = {}
    for i in range(n):
        key = tuple(np.round(ref[:, 6 * i + k], 12))
        refs.setdefault(key, []).append(i + 1)
    reference = [
        ("reference" if len(refs) == 1 else f"reference {','.join(map(str, secs))}", np.array(key))
        for key, secs in refs.items()
    ]
    if axis == "steps":
        x = np.cumsum(traj.accepted)
        xlabel = "accepted integration steps"
    else:
        x = traj.t
        xlabel = "time [s]"
    sym = "q" if mode == "position" else "qdot"
    return line_plot(x, series, reference, xlabel, f"{sym}[{coordinate}]", f"{sym} coordinate {coordinate} per section")
