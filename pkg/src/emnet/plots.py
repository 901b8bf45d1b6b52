"""Error-by-sparsity charts as standalone SVG, plus the CSV behind each chart."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

from emnet.sweep import SweepResult

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 30, 50, 60
FLOOR = 1e-40


class MissingDataError(LookupError):
    pass


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def line_chart_svg(title: str, xs: Sequence[float], ys: Sequence[float],
                   lo: Sequence[float] | None = None, hi: Sequence[float] | None = None,
                   x_label: str = "sparsity (fraction nonzero)", y_label: str = "error") -> str:
    """Single-series chart with a log10 y axis. Nonpositive values are drawn at a floor."""
    if not xs:
        raise MissingDataError("no points to plot")
    logs = lambda vs: [math.log10(max(v, FLOOR)) for v in vs]  # noqa: E731
    ly = logs(ys)
    band = ly + (logs(lo) if lo else []) + (logs(hi) if hi else [])
    y_min, y_max = math.floor(min(band)), math.ceil(max(band))
    if y_max == y_min:
        y_max += 1
    x_min, x_max = min(xs), max(xs)
    if x_max == x_min:
        x_min, x_max = x_min - 0.5, x_max + 0.5
    pw, ph = WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x_min) / (x_max - x_min) * pw

    def py(v):
        return MARGIN_T + (y_max - v) / (y_max - y_min) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="16">{_escape(title)}</text>',
           f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    step = max(1, (y_max - y_min) // 8)
    for e in range(y_min, y_max + 1, step):
        y = py(e)
        out.append(f'<line x1="{MARGIN_L}" y1="{y:.1f}" x2="{MARGIN_L + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">1e{e}</text>')
    for x in xs:
        out.append(f'<text x="{px(x):.1f}" y="{MARGIN_T + ph + 18}" text-anchor="middle" font-size="11">{x:g}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">'
               f'{_escape(x_label)}</text>')
    out.append(f'<text x="18" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 18 {MARGIN_T + ph / 2:.1f})">{_escape(y_label)}</text>')
    if lo and hi:
        for x, a, b in zip(xs, logs(lo), logs(hi)):
            out.append(f'<line x1="{px(x):.1f}" y1="{py(a):.1f}" x2="{px(x):.1f}" y2="{py(b):.1f}" '
                       f'stroke="#1f77b4" stroke-opacity="0.5"/>')
    pts = " ".join(f"{px(x):.1f},{py(v):.1f}" for x, v in zip(xs, ly))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    for x, v in zip(xs, ly):
        out.append(f'<circle class="point" cx="{px(x):.1f}" cy="{py(v):.1f}" r="3.5" fill="#1f77b4"/>')
    out.append("</svg>")
    return "\n".join(out)


def emit_plots(results: list[SweepResult], out_dir) -> list[Path]:
    """One chart per (n, condition), drawn from that group's lowest-error converged cell."""
    if not results:
        raise MissingDataError("no sweep results")
    missing = [r for r in results if r.converged and r.status == "ok" and not r.sparsity_rows]
    if missing:
        names = ", ".join(f"(n={r.n}, {r.condition}, e={r.epochs}, m={r.meta_epochs}, rep={r.replicate})"
                          for r in missing)
        raise MissingDataError(f"converged cells without sparsity data: {names}")
    best: dict[tuple[int, str], SweepResult] = {}
    for r in results:
        if not r.sparsity_rows:
            continue
        key = (r.n, r.condition)
        if key not in best or r.error < best[key].error:
            best[key] = r
    if not best:
        raise MissingDataError("no converged cells with sparsity data")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for (n, cond), r in sorted(best.items()):
        rows = sorted(r.sparsity_rows, key=lambda row: row["sparsity"])
        xs = [row["sparsity"] for row in rows]
        means = [row["mean_error"] for row in rows]
        stds = [row["std_error"] for row in rows]
        stem = f"sparsity_n{n}_{cond}"
        with open(out / f"{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "condition", "epochs", "meta_epochs", "sparsity", "mean_error", "std_error"])
            for x, m, s in zip(xs, means, stds):
                w.writerow([n, cond, r.epochs, r.meta_epochs, x, repr(m), repr(s)])
        svg = line_chart_svg(f"n={n}, {cond}, (epochs, meta-epochs)=({r.epochs},{r.meta_epochs})",
                             xs, means, [m - s if m - s > 0 else m for m, s in zip(means, stds)],
                             [m + s for m, s in zip(means, stds)], y_label="mean error (log10)")
        (out / f"{stem}.svg").write_text(svg)
        written.append(out / f"{stem}.svg")
    return written
