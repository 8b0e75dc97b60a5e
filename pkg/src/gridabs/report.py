"""Figure output for prediction-versus-build comparisons.

Renders the accumulated comparison rows (one marker pair per abstraction) to
an image file next to the CSV; the CSV remains the machine-readable hand-off.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_compare_figure(rows, path) -> None:
    """Predicted (filled) and actual (open) transition counts per abstraction.

    ``rows`` is a sequence of mappings with keys ``predicted`` and ``actual``;
    the x axis is the row index in file order.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to plot")
    idx = range(1, len(rows) + 1)
    predicted = [float(r["predicted"]) for r in rows]
    actual = [float(r["actual"]) for r in rows]
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    ax.semilogy(idx, predicted, "o", color="k", label="predicted")
    ax.semilogy(idx, actual, "o", markerfacecolor="none", color="k", label="actual")
    ax.set_xlabel("abstraction")
    ax.set_ylabel("transitions")
    ax.set_xticks(list(idx))
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
