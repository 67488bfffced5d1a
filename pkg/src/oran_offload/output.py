"""CSV, SVG and manifest writers for experiment results."""
from __future__ import annotations

import json
import logging
import math
import os
import subprocess
import warnings
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .errors import IoFailure
from .experiments import RunResult, summarize

log = logging.getLogger(__name__)

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    lines = [",".join(columns)]
    lines += [",".join(c if isinstance(c, str) else fmt(c) for c in row) for row in rows]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def moving_average(y, window) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if window <= 1 or len(y) < window:
        return y
    c = np.cumsum(np.insert(y, 0, 0.0))
    return (c[window:] - c[:-window]) / window


def line_chart(series: dict, title, xlabel, ylabel, width=640, height=400) -> str:
    """Self-contained SVG line chart; ``series`` maps a label to (x, y)."""
    left, right, top, bottom = 70, 150, 40, 50
    pts = [(np.asarray(x, float), np.asarray(y, float)) for x, y in series.values()]
    finite = [(x[np.isfinite(y)], y[np.isfinite(y)]) for x, y in pts]
    xs = np.concatenate([x for x, _ in finite] or [np.zeros(1)])
    ys = np.concatenate([y for _, y in finite] or [np.zeros(1)])
    if xs.size == 0:
        xs = ys = np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{sx(fx):.1f}" y="{top + ph + 16}" text-anchor="middle">{fmt(float(f"{fx:.4g}"))}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(fy) + 4:.1f}" text-anchor="end">{fmt(float(f"{fy:.4g}"))}</text>')
        out.append(f'<line x1="{left}" x2="{left + pw}" y1="{sy(fy):.1f}" y2="{sy(fy):.1f}" stroke="#ddd"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    for n, (label, (x, y)) in enumerate(zip(series, finite)):
        color = PALETTE[n % len(PALETTE)]
        if len(x):
            coords = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 16 * n
        out.append(f'<line x1="{left + pw + 10}" x2="{left + pw + 30}" y1="{ly}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _mean_curve(results, key):
    """Seed-averaged per-episode series of ``key`` ('reward' or a delay name)."""
    arrs = [r.rewards if key == "reward" else r.delays[key] for r in results]
    n = min(len(a) for a in arrs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN episodes stay NaN
        return np.nanmean(np.stack([np.asarray(a[:n], dtype=float) for a in arrs]), axis=0)


def _curves(results, key, smooth=True) -> dict:
    by_variant: dict = {}
    for r in results:
        by_variant.setdefault(r.variant, []).append(r)
    out = {}
    for v, rs in by_variant.items():
        y = _mean_curve(rs, key)
        w = max(1, len(y) // 50) if smooth else 1
        y = moving_average(y, w)
        out[v] = (np.arange(len(y)) + w, y)
    return out


def _write_svg(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return Path(path)


def _emit_routes(rs, out):
    rows = [row for r in rs for row in r.table]
    files = [write_csv(out / "route_delay.csv",
                       ("seed", "oru", "ec", "sp_delay_s", "sr_delay_s", "selected_delay_s", "sr_share"), rows)]
    pairs = sorted({(row[1], row[2]) for row in rows})
    idx = np.arange(len(pairs))
    series = {}
    for col, label in ((3, "shortest path"), (4, "segment routing"), (5, "selected")):
        series[label] = (idx, [np.mean([row[col] for row in rows if (row[1], row[2]) == p]) for p in pairs])
    files.append(_write_svg(out / "route_delay.svg", line_chart(
        series, "Fronthaul delay per O-RU/EC pair", "pair index (oru * n_ec + ec)", "delay (s)")))
    return files


def _emit_rewards(rs, out):
    rows = [(r.variant, r.seed, *row) for r in rs for row in r.train_log]
    files = [write_csv(out / "reward.csv", ("variant", "seed", "episode", "total_reward", "epsilon",
                                            "td_loss_mean"), rows)]
    files.append(_write_svg(out / "reward.svg", line_chart(
        _curves(rs, "reward"), "Episode reward", "episode", "reward (moving average)")))
    return files


def _emit_placement(rs, out):
    rows = []
    for r in rs:
        for ep in range(len(r.rewards)):
            rows.append((r.variant, r.seed, ep, r.rewards[ep], *(r.delays[k][ep] for k in
                                                                 ("delay", "uplink", "fronthaul", "transfer",
                                                                  "propagation", "compute"))))
    files = [write_csv(out / "placement.csv", ("variant", "seed", "episode", "total_reward", "delay_s",
                                               "uplink_s", "fronthaul_s", "transfer_s", "propagation_s",
                                               "compute_s"), rows)]
    files.append(_write_svg(out / "placement.svg", line_chart(
        _curves(rs, "delay", smooth=False), "Delay of offload-eligible tasks by placement", "episode",
        "mean delay (s)")))
    return files


def _emit_fronthaul(rs, out):
    rows = []
    for r in rs:
        for ep in range(len(r.rewards)):
            rows.append((r.variant, r.seed, ep, r.rewards[ep], r.delays["fronthaul"][ep],
                         r.delays["offload"][ep], r.delays["local"][ep]))
    files = [write_csv(out / "fronthaul.csv", ("variant", "seed", "episode", "total_reward", "fronthaul_s",
                                               "offload_s", "local_s"), rows)]
    files.append(_write_svg(out / "fronthaul.svg", line_chart(
        _curves(rs, "fronthaul"), "Fronthaul delay of offloaded tasks", "episode",
        "delay (s, moving average)")))
    return files


EMITTERS = {"sp_vs_sr": _emit_routes, "dql_vs_ql": _emit_rewards, "placement_delays": _emit_placement,
            "fl_vs_nofl": _emit_fronthaul}


def version_string() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                              capture_output=True, text=True, timeout=10)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def emit_outputs(results: list[RunResult], out_dir, scenario=None, seeds=(), experiment=None) -> list[Path]:
    """Write one CSV and one SVG per experiment, a summary table and a manifest.

    Timings go only into the manifest so CSVs stay byte-identical across reruns.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc
    files = []
    if not results:
        log.warning("no results to write; emitting the manifest only")
    by_exp: dict = {}
    for r in results:
        by_exp.setdefault(r.experiment, []).append(r)
    for name, rs in by_exp.items():
        files += EMITTERS[name](rs, out)
    if results:
        rows = []
        for (exp, var), stats in summarize(results).items():
            n = sum(1 for r in results if r.experiment == exp and r.variant == var)
            for metric, (m, s) in stats.items():
                rows.append((exp, var, metric, m, s, n))
        files.append(write_csv(out / "summary.csv", ("experiment", "variant", "metric", "mean", "std",
                                                      "n_seeds"), rows))
    manifest = {
        "version": version_string(),
        "experiment": experiment,
        "seeds": [int(s) for s in seeds],
        "episodes_per_run": {f"{r.experiment}/{r.variant}/{r.seed}": r.episodes for r in results},
        "seconds_per_run": {f"{r.experiment}/{r.variant}/{r.seed}": round(r.seconds, 3) for r in results},
        "files": [f.name for f in files],
        "scenario": scenario.to_dict() if scenario is not None else None,
    }
    path = out / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return files + [path]
