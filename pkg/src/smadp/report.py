"""Learning-curve CSV files, steady-state summaries and SVG figures."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import LearningCurve  # noqa: E402

CURVE_HEADER = ["algorithm", "iteration", "mse", "msd", "updated_frac"]

_RC = {
    "svg.fonttype": "none",
    "svg.hashsalt": "smadp",
    "font.size": 10,
    "axes.labelsize": 11,
    "legend.fontsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}


def fmt(value: float) -> str:
    """17 significant digits: round-trips every double exactly."""
    return f"{value:.16e}"


def _db(v: float) -> float:
    return 10 * math.log10(v) if v > 0 else -math.inf


def _check(curves):
    curves = list(curves)
    if not curves:
        raise ValueError("no learning curves to write")
    return curves


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_summary{path.suffix or '.csv'}")


def emit_csv(curves: Sequence[LearningCurve], path, db: bool = True) -> tuple[Path, Path]:
    """Write long-format learning curves and a per-phase summary next to them.

    The curve file has one row per (algorithm, iteration) in linear units.
    The summary ``<stem>_summary.csv`` holds steady-state MSE/MSD (in dB when
    ``db``) and update rates per phase.  Returns both paths.
    """
    curves = _check(curves)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for c in curves:
            for i in range(len(c)):
                w.writerow([c.label, i, fmt(c.mse[i]), fmt(c.msd[i]), fmt(c.updated_frac[i])])
    spath = summary_path(path)
    emit_summary(curves, spath, db=db)
    return path, spath


def emit_summary(curves: Sequence[LearningCurve], path, db: bool = True) -> Path:
    curves = _check(curves)
    unit = "db" if db else "lin"
    header = [
        "algorithm", "input", "phase", "system", "start", "stop", "runs_ok", "runs_failed",
        f"ss_mse_{unit}", f"ss_msd_{unit}", "update_rate", "ss_update_rate", "snr_db",
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for c in curves:
            for k, kind in enumerate(c.phase_kinds):
                mse, msd = c.steady_state("mse", k), c.steady_state("msd", k)
                if db:
                    mse, msd = _db(mse), _db(msd)
                w.writerow([
                    c.label, c.input.variant.value, k, kind, c.boundaries[k], c.boundaries[k + 1],
                    c.runs_ok, c.runs_failed, fmt(mse), fmt(msd),
                    fmt(c.update_rate(k)), fmt(c.update_rate(k, steady=True)),
                    fmt(c.snr_db[k]) if c.snr_db else "",
                ])
    return Path(path)


def read_curves_csv(path) -> dict[str, dict[str, np.ndarray]]:
    """Parse a file written by :func:`emit_csv` back into arrays per algorithm."""
    out: dict[str, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CURVE_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for row in reader:
            d = out.setdefault(row["algorithm"], {k: [] for k in CURVE_HEADER[1:]})
            d["iteration"].append(int(row["iteration"]))
            for k in ("mse", "msd", "updated_frac"):
                d[k].append(float(row[k]))
    return {a: {k: np.asarray(v) for k, v in d.items()} for a, d in out.items()}


def learning_curve_figure(curves: Sequence[LearningCurve], metric: str = "mse", db: bool = True, title=None):
    """Line chart of ``metric`` against iteration, one line per curve.

    Phase switches are drawn as dashed vertical lines.  Lines carry the SVG
    ids ``curve0, curve1, ...`` and the markers ``phase-boundary1, ...``.
    """
    curves = _check(curves)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7.0, 4.3))
        for j, c in enumerate(curves):
            y = getattr(c, metric)
            if db:
                with np.errstate(divide="ignore"):
                    y = 10 * np.log10(y)
            ax.plot(np.arange(1, len(c) + 1), y, label=c.label, gid=f"curve{j}")
        for k, b in enumerate(curves[0].boundaries[1:-1], start=1):
            ax.axvline(b, color="0.4", linestyle="--", linewidth=0.8, gid=f"phase-boundary{k}")
        ax.set_xlabel("iteration")
        ax.set_ylabel(f"{metric.upper()} (dB)" if db else metric.upper())
        if not db:
            ax.set_yscale("log")
        ax.set_xlim(1, max(len(c) for c in curves))
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right", frameon=False)
        fig.tight_layout()
    return fig


def emit_svg(curves: Sequence[LearningCurve], path, metric: str = "mse", db: bool = True, title=None) -> Path:
    """Render :func:`learning_curve_figure` to an SVG file."""
    fig = learning_curve_figure(curves, metric=metric, db=db, title=title)
    try:
        with plt.rc_context(_RC):
            fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return Path(path)
