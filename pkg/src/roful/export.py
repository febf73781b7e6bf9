"""CSV, SVG and raw-trace output for aggregated experiments."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .analytics import RegretTrace

CSV_HEADER = ("t", "policy", "mean_regret", "sd_regret")

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _g6(x: float) -> str:
    return f"{x:.6g}"


def export_csv(result, path, thin: int = 10) -> Path:
    """Write ``t,policy,mean_regret,sd_regret`` rows for rounds ``thin, 2*thin, ...``.

    Rows are sorted by policy label, then round.
    """
    if thin < 1:
        raise ValueError(f"thin must be positive, got {thin}")
    path = Path(path)
    rounds = np.arange(thin, result.horizon + 1, thin)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for label in sorted(result.labels):
                mean, sd = result.mean[label], result.sd[label]
                for t in rounds:
                    w.writerow((int(t), label, _g6(mean[t - 1]), _g6(sd[t - 1])))
    except OSError as exc:
        raise OSError(f"could not write CSV to {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path) -> dict[str, dict[str, np.ndarray]]:
    """Parse an exported CSV back into ``{label: {"t", "mean", "sd"}}``."""
    out: dict[str, dict[str, list]] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            d = out.setdefault(row["policy"], {"t": [], "mean": [], "sd": []})
            d["t"].append(int(row["t"]))
            d["mean"].append(float(row["mean_regret"]))
            d["sd"].append(float(row["sd_regret"]))
    return {k: {kk: np.asarray(vv) for kk, vv in v.items()} for k, v in out.items()}


# -- SVG ----------------------------------------------------------------------

WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=80, right=160, top=30, bottom=60)


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * span:
        ticks.append(round(v, 12))
        v += step
    return ticks


def render_plot_svg(result, path, max_points: int = 500) -> Path:
    """Mean cumulative regret per policy with a translucent +-2 SD band.

    The plot group carries ``data-x-min/max`` and ``data-y-min/max`` together
    with the pixel box, so coordinates can be mapped back to data units.
    """
    if not result.labels:
        raise ValueError("nothing to plot: the result has no policies")
    T = result.horizon
    stride = max(1, math.ceil(T / max_points))
    idx = np.arange(stride - 1, T, stride)
    if idx[-1] != T - 1:
        idx = np.append(idx, T - 1)
    ts = idx + 1

    lows = [result.mean[l][idx] - 2 * result.sd[l][idx] for l in result.labels]
    highs = [result.mean[l][idx] + 2 * result.sd[l][idx] for l in result.labels]
    y_min = min(0.0, float(min(x.min() for x in lows)))
    y_max = max(float(max(x.max() for x in highs)), y_min + 1.0)
    x_min, x_max = 0.0, float(T)

    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return left + (x - x_min) / (x_max - x_min) * pw

    def py(y):
        return top + ph - (y - y_min) / (y_max - y_min) * ph

    def pts(xs, ys):
        return " ".join(f"{px(x):.3f},{py(y):.3f}" for x, y in zip(xs, ys))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<g id="plot" data-x-min="{x_min!r}" data-x-max="{x_max!r}" data-y-min="{y_min!r}" data-y-max="{y_max!r}" '
        f'data-left="{left}" data-top="{top}" data-width="{pw}" data-height="{ph}">',
    ]
    # axes and ticks
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    for xt in _nice_ticks(x_min, x_max):
        out.append(f'<line x1="{px(xt):.3f}" y1="{top + ph}" x2="{px(xt):.3f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(xt):.3f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{xt:g}</text>')
    for yt in _nice_ticks(y_min, y_max):
        out.append(f'<line x1="{left - 5}" y1="{py(yt):.3f}" x2="{left}" y2="{py(yt):.3f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(yt) + 4:.3f}" font-size="11" text-anchor="end">{yt:g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle">round</text>')
    out.append(
        f'<text x="18" y="{top + ph / 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2})">cumulative regret</text>'
    )

    for j, label in enumerate(result.labels):
        color = PALETTE[j % len(PALETTE)]
        mean = result.mean[label][idx]
        lo, hi = lows[j], highs[j]
        band = pts(ts, hi) + " " + pts(ts[::-1], lo[::-1])
        name = escape(label, {'"': "&quot;"})
        out.append(f'<polygon class="band" data-policy="{name}" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline class="mean" data-policy="{name}" points="{pts(ts, mean)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 15 + 18 * j
        lx = left + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}" font-size="12">{escape(label)}</text>')
    out.append("</g>")
    out.append("</svg>")

    path = Path(path)
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"could not write SVG to {path}: {exc.strerror or exc}") from exc
    return path


# -- raw traces ---------------------------------------------------------------

def write_traces(result, path, config: dict | None = None) -> Path:
    """Line-delimited JSON, one record per (repetition, policy, round).

    An infinite gap is stored as ``null``. An optional first line
    ``{"config": {...}}`` records the experiment settings.
    """
    path = Path(path)
    with path.open("w") as fh:
        if config is not None:
            fh.write(json.dumps({"config": config}, sort_keys=True) + "\n")
        for label in result.labels:
            for tr in result.traces[label]:
                for t in range(tr.horizon):
                    g = float(tr.gap[t])
                    rec = {
                        "t": t + 1,
                        "rep": tr.rep,
                        "policy": label,
                        "chosen": int(tr.chosen[t]),
                        "inst_regret": float(tr.inst_regret[t]),
                        "gap": g if math.isfinite(g) else None,
                        "v": float(tr.uncertainty[t]),
                    }
                    fh.write(json.dumps(rec) + "\n")
    return path


def read_traces(path) -> tuple[dict | None, list[RegretTrace]]:
    """Inverse of :func:`write_traces`."""
    config = None
    rows: dict[tuple[str, int], list[dict]] = {}
    with Path(path).open() as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "config" in rec:
                config = rec["config"]
                continue
            rows.setdefault((rec["policy"], rec["rep"]), []).append(rec)
    traces = []
    for (label, rep), recs in rows.items():
        recs.sort(key=lambda r: r["t"])
        traces.append(
            RegretTrace(
                policy_label=label,
                chosen=np.array([r["chosen"] for r in recs], dtype=np.int64),
                inst_regret=np.array([r["inst_regret"] for r in recs]),
                gap=np.array([math.inf if r["gap"] is None else r["gap"] for r in recs]),
                uncertainty=np.array([r["v"] for r in recs]),
                rep=rep,
            )
        )
    return config, traces
