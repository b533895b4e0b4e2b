"""Figures of reduction studies, rendered to files from the study CSV and trace archive."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .study import read_study_csv  # noqa: E402

__all__ = ["plot_error_vs_order", "plot_traces", "render_study"]

_TITLES = {
    "stuart-landau": "Stuart-Landau ring",
    "gle": "generalized Langevin dynamics",
    "gbm": "geometric Brownian motion",
}


def plot_error_vs_order(rows: list[dict], ax, title: str = "") -> None:
    """Measured L2 error (with 3 standard errors) and a-priori bound against r."""
    r = np.array([row["r"] for row in rows])
    err = np.array([row["measured_error"] for row in rows])
    se = np.array([row["measured_std_error"] for row in rows])
    bound = np.array([row["bound"] for row in rows])
    cert = np.array([row["certified"] for row in rows])
    ax.semilogy(r, bound, "s--", color="tab:red", label="bound")
    ax.errorbar(r, err, yerr=3 * se, fmt="o-", color="tab:blue", capsize=3, label="measured error")
    if (~cert).any():
        ax.semilogy(r[~cert], bound[~cert], "x", color="k", ms=9, label="not certified")
    ax.set_xlabel("reduced order r")
    ax.set_ylabel("L2 output error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)


def plot_traces(traces, ax, component: int | None = 0) -> None:
    """Full-order output against the stored reduced-order outputs.

    ``component=None`` plots the Euclidean norm of the whole output vector.
    """
    t = traces["t"]
    orders = sorted(int(k[1:]) for k in traces.keys() if k.startswith("r") and k[1:].isdigit())
    if component is None:
        ax.plot(t, traces["norm_full"], color="k", lw=2, label="full")
        for r in orders:
            ax.plot(t, traces[f"norm_r{r}"], "--", lw=1.2, label=f"r = {r}")
        ax.set_ylabel("||y(t)||")
    else:
        ax.plot(t, traces["full"][:, component], color="k", lw=2, label="full")
        for r in orders:
            ax.plot(t, traces[f"r{r}"][:, component], "--", lw=1.2, label=f"r = {r}")
        label = int(traces["outputs"][component]) + 1 if "outputs" in traces else component + 1
        ax.set_ylabel(f"y_{label}")
    ax.set_xlabel("t")
    ax.grid(True, alpha=0.3)
    ax.legend()


def render_study(csv_path, traces_path=None, out_path=None) -> Path:
    """Write a PNG with the error/bound panel and, when traces exist, the trajectory panels.

    ``out_path`` defaults to the CSV path with suffix ``.png``.
    """
    csv_path = Path(csv_path)
    rows = read_study_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path} has no rows")
    example = rows[0]["example"]
    out_path = Path(out_path) if out_path else csv_path.with_suffix(".png")
    traces = None
    if traces_path is not None and Path(traces_path).is_file():
        with np.load(traces_path) as z:
            traces = {k: z[k] for k in z.files}
    panels: list[int | None] = []
    if traces is not None:
        panels = list(range(traces["full"].shape[1]))
        if "norm_full" in traces:
            panels.append(None)
    n = 1 + len(panels)
    fig, axes = plt.subplots(1, n, figsize=(5.2 * n, 4.2), squeeze=False)
    plot_error_vs_order(rows, axes[0, 0], _TITLES.get(example, example))
    for i, c in enumerate(panels):
        plot_traces(traces, axes[0, 1 + i], c)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
