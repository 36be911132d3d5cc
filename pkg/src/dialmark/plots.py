"""Bar charts of summarised test rewards."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench import SummaryRow, algorithm_label  # noqa: E402

# Dropping timestamps and version strings keeps the bytes a function of the data alone.
_METADATA = {
    "png": {"Software": None},
    "svg": {"Date": None, "Creator": None},
    "pdf": {"CreationDate": None, "Creator": None, "Producer": None},
}


def _label(row: SummaryRow) -> str:
    return algorithm_label(row.get("algorithm"), row.get("mode"))


def _grouped_bars(ax, groups: Sequence[str], labels: Sequence[str], means: dict, sds: dict) -> None:
    width = 0.8 / max(len(labels), 1)
    x = np.arange(len(groups))
    cmap = plt.get_cmap("tab20")
    for j, lab in enumerate(labels):
        m = [means.get((g, lab), np.nan) for g in groups]
        s = [sds.get((g, lab), 0.0) for g in groups]
        ax.bar(x + (j - (len(labels) - 1) / 2) * width, m, width, yerr=s, label=lab, color=cmap(j % 20), capsize=2)
    ax.set_xticks(x)
    ax.set_xticklabels(groups)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_ylabel("average test reward per dialogue")


def per_environment_figure(summary: Iterable[SummaryRow], envs: Sequence[int] = (1, 3)):
    """One panel per environment with grouped bars per domain; environments without data are skipped."""
    rows = [r for r in summary if r.get("env_id") in envs]
    present = [e for e in envs if any(r.get("env_id") == e for r in rows)]
    if not present:
        return None
    labels = sorted({_label(r) for r in rows})
    domains = sorted({r.get("domain") for r in rows})
    fig, axes = plt.subplots(len(present), 1, figsize=(max(6, 1.2 * len(domains) * max(len(labels), 1) / 3), 3.5 * len(present)), squeeze=False)
    for ax, env in zip(axes[:, 0], present):
        means = {(r.get("domain"), _label(r)): r.mean for r in rows if r.get("env_id") == env}
        sds = {(r.get("domain"), _label(r)): r.sd for r in rows if r.get("env_id") == env}
        _grouped_bars(ax, domains, labels, means, sds)
        ax.set_title(f"environment {env}")
    axes[0, 0].legend(fontsize="small", ncol=min(len(labels), 6))
    fig.tight_layout()
    return fig


def domain_average_figure(summary: Iterable[SummaryRow]):
    """Single panel: per-domain reward averaged over all environments present."""
    acc: dict = {}
    for r in summary:
        acc.setdefault((r.get("domain"), _label(r)), []).append(r.mean)
    if not acc:
        return None
    labels = sorted({k[1] for k in acc})
    domains = sorted({k[0] for k in acc})
    means = {k: float(np.mean(v)) for k, v in acc.items()}
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(domains) * max(len(labels), 1) / 3), 4))
    _grouped_bars(ax, domains, labels, means, {})
    ax.set_title("averaged over environments")
    ax.legend(fontsize="small", ncol=min(len(labels), 6))
    fig.tight_layout()
    return fig


def emit_plots(summary: Sequence[SummaryRow], out_dir, fmt: str = "png") -> list[Path]:
    """Write the per-environment and per-domain figures; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fig in (
        ("rewards_by_environment", per_environment_figure(summary)),
        ("rewards_by_domain", domain_average_figure(summary)),
    ):
        if fig is None:
            continue
        path = out / f"{name}.{fmt}"
        with matplotlib.rc_context({"svg.hashsalt": "dialmark"}):
            fig.savefig(path, format=fmt, dpi=100, metadata=_METADATA.get(fmt, {}))
        plt.close(fig)
        written.append(path)
    return written
