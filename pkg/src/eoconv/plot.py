"""SVG rendering of sweep tables (inspection only; the CSV is the data)."""

from __future__ import annotations

import io


def sweep_svg(spec, rows, title="") -> str:
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise RuntimeError("SVG output needs matplotlib (pip install eoconv[plot])") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = [r[spec.variable] for r in rows]
    with matplotlib.rc_context({"svg.hashsalt": "eoconv", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for name in spec.outputs:
            y = [r[name] for r in rows]
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in y):
                ax.plot(x, y, marker=".", lw=1, label=name)
        if any(n.startswith("P_") or n.startswith("eta") for n in spec.outputs):
            ax.set_yscale("log")
        ax.set_xlabel(f"{spec.variable} [{spec.unit}]" if spec.unit else spec.variable)
        ax.set_title(title or spec.name)
        ax.legend()
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()
