"""Report rendering: delimited outputs plus matplotlib figures (SVG).

Every evaluation run writes CSV tables and line plots side by side so the
numbers can be consumed by scripts and eyeballed without extra tooling.
"""

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluate import lowpass  # noqa: E402

FIG_SIZE = (7.0, 3.4)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_report_tables(report, out_dir, prefix="eval"):
    os.makedirs(out_dir, exist_ok=True)
    write_csv(os.path.join(out_dir, f"{prefix}_summary.csv"),
              ["metric", "value"], report.rows())
    write_csv(os.path.join(out_dir, f"{prefix}_per_joint.csv"),
              ["joint", "mpje_tau_am"],
              list(zip(report.joint_names, report.per_joint_tau)))
    write_csv(os.path.join(out_dir, f"{prefix}_per_segment_grf.csv"),
              ["segment", "mpje_grf"],
              list(zip(report.segment_names, report.per_joint_grf)))
    keys = ["seq_id", "category", "n", "mpje_tau", "mpje_grf", "mpje_jt",
            "mpje_grf_lf", "mpje_grf_rf"]
    rows = [[r.get(k, "") for k in keys] for r in report.per_sequence]
    write_csv(os.path.join(out_dir, f"{prefix}_per_sequence.csv"), keys, rows)


def summary_text(report):
    lines = ["metric                          value",
             "-" * 44]
    for name, val in report.rows():
        lines.append(f"{name:32s}{val:.6g}" if isinstance(val, float)
                     else f"{name:32s}{val}")
    return "\n".join(lines)


def plot_timeseries(out_path, times, curves, ylabel, title="",
                    filter_hz=None, fs=30.0):
    """GT-vs-prediction line plot; optionally overlays low-passed variants."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for label, values in curves:
        ax.plot(times, values, label=label, linewidth=1.0, alpha=0.85)
        if filter_hz:
            ax.plot(times, lowpass(values, cutoff=filter_hz, fs=fs),
                    label=f"{label} ({filter_hz:g} Hz)", linewidth=1.6)
    ax.set_xlabel("time [s]")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8, ncol=2)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_timeseries_csv(out_path, times, curves):
    header = ["time"] + [label for label, _ in curves]
    rows = []
    for i, t in enumerate(times):
        rows.append([repr(float(t))] + [repr(float(v[i])) for _, v in curves])
    write_csv(out_path, header, rows)


def plot_per_joint_bars(out_path, names, values, ylabel, title=""):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.bar(range(len(names)), values)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_training_log(out_path, log):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    epochs = [row["epoch"] for row in log]
    for key in sorted(log[0]):
        if key.startswith("loss_") or key.startswith("val_"):
            ax.plot(epochs, [row[key] for row in log], label=key, linewidth=1.2)
    ax.set_xlabel("epoch")
    ax.set_yscale("log")
    ax.legend(fontsize=8, ncol=2)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_scores(out_path, times, scores, title=""):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.plot(times, scores, linewidth=1.2)
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("plausibility")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_work(out_path, names, totals, title="per-joint work [J]"):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    colors = ["tab:green" if v >= 0 else "tab:red" for v in totals]
    ax.bar(range(len(names)), totals, color=colors)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("work [J]")
    ax.set_title(title)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
