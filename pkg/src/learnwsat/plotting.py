"""Figures written next to the CSV reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
}

# fixed metadata keeps repeated runs byte-comparable
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def training_curves(curves: dict, path, title: str = "") -> None:
    """Validation median flips per epoch, one line per run, log scale."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for label, ys in curves.items():
            ax.plot(range(len(ys)), [max(y, 1) for y in ys], marker="o", ms=3, label=label)
        ax.set_yscale("log")
        ax.set_xlabel("epoch (0 = after warm-up)")
        ax.set_ylabel("median flips (validation)")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        _save(fig, path)


def comparison_bars(comparison, path) -> None:
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 3, figsize=(9, 3))
        names = [r.solver for r in comparison.reports]
        for ax, metric, label in zip(axes, ("m_flips", "a_flips", "solved_pct"), ("m-flips", "a-flips", "solved %")):
            ax.bar(range(len(names)), [getattr(r, metric) for r in comparison.reports], color="0.4")
            ax.set_xticks(range(len(names)))
            ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
            ax.set_title(label)
        if comparison.distribution:
            fig.suptitle(comparison.distribution)
        _save(fig, path)


def flips_cdf(reports: dict, path) -> None:
    """Empirical distribution of per-instance median flips."""
    import statistics

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, report in reports.items():
            xs = sorted(statistics.median_low(f) for f in report.flips)
            ax.step(xs, [(i + 1) / len(xs) for i in range(len(xs))], where="post", label=label)
        ax.set_xscale("symlog", linthresh=10)
        ax.set_xlabel("flips")
        ax.set_ylabel("fraction of instances")
        ax.legend(frameon=False)
        _save(fig, path)


def noise_traces(traces: dict, path) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for label, series in traces.items():
            ax.plot([t for t, _ in series], [p for _, p in series], lw=1, label=label)
        ax.set_ylim(0, 0.5)
        ax.set_xlabel("iteration")
        ax.set_ylabel("noise probability")
        ax.legend(frameon=False, fontsize=8)
        _save(fig, path)


def sweep_plot(report, path) -> None:
    """Median flips with bootstrap band against the swept value, WalkSAT as a grey line."""
    rows = sorted(report.rows, key=lambda r: float(r["value"]))
    xs = [float(r["value"]) for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        ax.fill_between(xs, [r["ci_low"] for r in rows], [r["ci_high"] for r in rows], color="0.85")
        ax.plot(xs, [r["m_flips"] for r in rows], marker="o", color="C0", label="LearnWSAT")
        ax.axhline(report.baseline["m_flips"], color="0.5", lw=1, label="WalkSAT")
        ax.set_xlabel("discount factor" if report.axis == "discount" else "training formulas")
        ax.set_ylabel("median flips (test)")
        ax.legend(frameon=False)
        _save(fig, path)
