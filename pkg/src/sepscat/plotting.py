"""Static line plots written as SVG next to the CSV series."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed hash salt and no timestamp keep the SVG bytes reproducible
STYLE = {
    "svg.hashsalt": "sepscat",
    "svg.fonttype": "none",
    "figure.figsize": (5.0, 3.2),
    "font.size": 9,
    "axes.grid": True,
    "grid.linestyle": "--",
    "grid.linewidth": 0.4,
    "lines.linewidth": 1.1,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.direction": "in",
    "ytick.direction": "in",
}


def line_plot(path, x, series, title="", xlabel=r"$\lambda$", ylabel=""):
    """series: list of (label, y) or (label, y, style)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for item in series:
            label, y = item[0], item[1]
            fmt = item[2] if len(item) > 2 else "-"
            ax.plot(x, y, fmt, label=label)
        ax.set_xlabel(xlabel)
        if ylabel:
            ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
