"""Figure rendering for the analyze and wer report paths.

Each function writes one PNG next to the delimited reports: speaking rates
per speaker, fitted duration densities per speech type, and pooled WER per
severity group.
"""

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .rhythm import gamma_pdf
from .segmenter import SpeechType

SEVERITY_ORDER = ("control", "mild", "moderate", "mod-severe", "severe", "unknown")
SEVERITY_COLORS = {
    "control": "#4c72b0",
    "mild": "#55a868",
    "moderate": "#ccb974",
    "mod-severe": "#dd8452",
    "severe": "#c44e52",
    "unknown": "#8c8c8c",
}


def _severity_rank(severity):
    return SEVERITY_ORDER.index(severity) if severity in SEVERITY_ORDER else len(SEVERITY_ORDER)


def plot_speaking_rates(summaries, destination):
    """Bar chart of per-speaker speaking rates, grouped and colored by severity."""
    ordered = sorted(summaries, key=lambda s: (_severity_rank(s.severity), s.speaker))
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(ordered) + 2), 4))
    positions = np.arange(len(ordered))
    colors = [SEVERITY_COLORS.get(s.severity, "#8c8c8c") for s in ordered]
    ax.bar(positions, [s.rate_sps for s in ordered], color=colors)
    ax.set_xticks(positions)
    ax.set_xticklabels([s.speaker for s in ordered], rotation=45, ha="right")
    ax.set_ylabel("sonorant segments / s")
    ax.set_title("Speaking rate by speaker")
    seen = []
    handles = []
    for s in ordered:
        if s.severity not in seen:
            seen.append(s.severity)
            handles.append(plt.Rectangle((0, 0), 1, 1, color=SEVERITY_COLORS.get(s.severity, "#8c8c8c")))
    ax.legend(handles, seen, title="severity", fontsize=8)
    fig.tight_layout()
    fig.savefig(destination, dpi=150)
    plt.close(fig)
    return destination


def plot_duration_distributions(summaries, destination):
    """Fitted gamma densities per speech type, one panel per type."""
    fig, axes = plt.subplots(1, len(SpeechType), figsize=(12, 3.5), sharey=False)
    for ax, speech_type in zip(axes, SpeechType):
        for s in summaries:
            params = s.fine.get(speech_type)
            if params is None:
                continue
            upper = params.mean + 4.0 * params.scale * np.sqrt(params.shape)
            xs = np.linspace(1e-4, max(upper, 0.05), 200)
            ys = [gamma_pdf(params, float(x)) for x in xs]
            ax.plot(xs, ys, label=s.speaker, color=SEVERITY_COLORS.get(s.severity, "#8c8c8c"))
        ax.set_title(speech_type.name.capitalize())
        ax.set_xlabel("duration (s)")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=7)
    axes[0].set_ylabel("density")
    fig.tight_layout()
    fig.savefig(destination, dpi=150)
    plt.close(fig)
    return destination


def plot_wer_by_severity(report, destination):
    """Pooled WER per severity group, with the overall rate as a reference line."""
    groups = [g for g in SEVERITY_ORDER if g in report.by_severity]
    extra = [g for g in report.by_severity if g not in SEVERITY_ORDER]
    groups.extend(sorted(extra))
    fig, ax = plt.subplots(figsize=(max(5, 1.2 * len(groups) + 2), 4))
    positions = np.arange(len(groups))
    values = [report.by_severity[g]["wer"] for g in groups]
    ax.bar(positions, values, color=[SEVERITY_COLORS.get(g, "#8c8c8c") for g in groups])
    ax.axhline(report.overall_wer, color="black", linestyle="--", linewidth=1, label="overall")
    ax.set_xticks(positions)
    ax.set_xticklabels(groups)
    ax.set_ylabel("WER")
    ax.set_title("Word error rate by severity")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(destination, dpi=150)
    plt.close(fig)
    return destination
