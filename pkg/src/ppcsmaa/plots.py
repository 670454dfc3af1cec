"""Figure rendering for the report path: NSE-vs-sampling-rate curves.

Figures are written next to the delimited output, one per attribute, with
one line per method. Rendering is headless (Agg backend).
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_MARKERS = {"CS": "o", "PPCS": "s", "PPCS-MAA": "^"}


def render_report_figures(summaries, out_dir) -> list[str]:
    """Plot mean NSE against sampling rate per attribute; returns file paths."""
    attributes = sorted({s.attribute for s in summaries})
    written = []
    for attribute in attributes:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for method in sorted({s.method for s in summaries}):
            points = sorted(
                (s.sampling_rate, s.mean_nse)
                for s in summaries
                if s.attribute == attribute and s.method == method and s.mean_nse is not None
            )
            if not points:
                continue
            xs, ys = zip(*points)
            ax.plot(xs, ys, marker=_MARKERS.get(method, "x"), label=method)
        ax.set_xlabel("sampling rate")
        ax.set_ylabel("mean NSE")
        ax.set_title(f"Recovery error vs sampling rate ({attribute})")
        ax.grid(True, alpha=0.4)
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"nse_vs_sampling_{attribute}.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
