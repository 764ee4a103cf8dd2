"""Render evaluation and stitching results to files.

Every entry point writes three kinds of artifact next to each other:
machine-readable JSON, a flat CSV with one row per episode, and PNG
figures for eyeballing. Matplotlib runs on the Agg backend so reports
work headless.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from . import spatial  # noqa: E402
from .metrics import MetricReport  # noqa: E402


def _generator_label(report: MetricReport) -> str:
    gen = report.generator.get("kind", "reference")
    extras = []
    if report.generator.get("p"):
        extras.append(f"p={report.generator['p']}")
    if report.generator.get("q"):
        extras.append(f"q={report.generator['q']}")
    return gen + ("{" + ",".join(extras) + "}" if extras else "")


def write_eval_report(reports, out_dir: str | Path) -> dict:
    """Write report.json, report.csv, and figures for one or more runs."""
    if isinstance(reports, MetricReport):
        reports = [reports]
    if not reports:
        raise ValueError("no reports to write")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    json_path = out_dir / "report.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"reports": [r.to_json() for r in reports]}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")

    csv_path = out_dir / "report.csv"
    fields = ["game", "generator", "episode", "seed", "numcon", "spacon",
              "actacc", "tp", "fp", "fn", "tn", "unreadable", "ambiguous",
              "links", "steps"]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for rep in reports:
            label = _generator_label(rep)
            for row in rep.per_episode:
                writer.writerow({
                    "game": rep.game,
                    "generator": label,
                    "episode": row["index"],
                    "seed": row["seed"],
                    "numcon": row["numcon"],
                    "spacon": row["spacon"],
                    "actacc": row["actacc"],
                    "tp": row["tp"],
                    "fp": row["fp"],
                    "fn": row["fn"],
                    "tn": row["tn"],
                    "unreadable": row["unreadable"],
                    "ambiguous": row["ambiguous"],
                    "links": row["links"],
                    "steps": row["steps"],
                })

    paths = {"json": json_path, "csv": csv_path}
    paths["metrics_png"] = _metrics_figure(reports, out_dir / "metrics.png")
    paths["episodes_png"] = _episodes_figure(reports, out_dir / "episodes.png")
    return paths


def _metrics_figure(reports, path: Path) -> Path:
    labels = [_generator_label(r) for r in reports]
    x = np.arange(len(reports))
    numcon = [r.numcon if r.numcon is not None else np.nan for r in reports]
    actacc = [r.actacc if r.actacc is not None else np.nan for r in reports]
    spacon = [r.spacon if r.spacon is not None else np.nan for r in reports]

    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(reports)), 4.2))
    width = 0.3
    ax.bar(x - width / 2, numcon, width, label="NumCon (F)", color="#4878d0")
    ax.bar(x + width / 2, actacc, width, label="ActAcc", color="#ee854a")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")

    ax2 = ax.twinx()
    ax2.plot(x, spacon, "D-", color="#6acc64", label="SpaCon (dB)")
    ax2.set_ylabel("SpaCon (dB)")
    ax2.set_ylim(0, spatial.PSNR_CAP * 1.05)

    h1, l1 = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(h1 + h2, l1 + l2, loc="lower left", fontsize=8)
    ax.set_title(f"{reports[0].game}: consistency metrics by generator")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _episodes_figure(reports, path: Path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for rep in reports:
        label = _generator_label(rep)
        idx = [row["index"] for row in rep.per_episode]
        axes[0].plot(idx, [row["numcon"] for row in rep.per_episode],
                     alpha=0.8, label=label)
        sp = [row["spacon"] if row["spacon"] is not None else np.nan
              for row in rep.per_episode]
        axes[1].plot(idx, sp, alpha=0.8, label=label)
    axes[0].set_xlabel("episode")
    axes[0].set_ylabel("NumCon (F)")
    axes[0].set_ylim(-0.05, 1.05)
    axes[1].set_xlabel("episode")
    axes[1].set_ylabel("SpaCon (dB)")
    axes[0].legend(fontsize=7)
    fig.suptitle("per-episode consistency")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_stitch_report(results, out_dir: str | Path,
                        save_maps: bool = False) -> dict:
    """Write stitch.json, stitch.csv, a PSNR figure, and optionally maps.

    `results` is a list of (episode id, StitchResult).
    """
    if not results:
        raise ValueError("no stitch results to write")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for ep_id, res in results:
        rows.append({
            "episode": ep_id,
            "psnr_vs_gt": res.psnr_vs_gt,
            "steps": len(res.position_errors),
            "position_errors": sum(1 for e in res.position_errors if e != 0),
            "max_position_error": res.max_position_error,
            "ambiguous_steps": len(res.ambiguous_steps),
        })
    n_steps = sum(r["steps"] for r in rows)
    summary = {
        "episodes": len(rows),
        "mean_psnr_vs_gt": sum(r["psnr_vs_gt"] for r in rows) / len(rows),
        "min_psnr_vs_gt": min(r["psnr_vs_gt"] for r in rows),
        "position_exact_fraction":
            1.0 - sum(r["position_errors"] for r in rows) / n_steps,
        "ambiguous_fraction": sum(r["ambiguous_steps"] for r in rows) / n_steps,
    }

    json_path = out_dir / "stitch.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"summary": summary, "episodes": rows}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")

    csv_path = out_dir / "stitch.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)

    fig, ax = plt.subplots(figsize=(max(6, 0.08 * len(rows) + 4), 4))
    ax.plot([r["psnr_vs_gt"] for r in rows], ".", markersize=4)
    ax.axhline(summary["mean_psnr_vs_gt"], color="#6acc64", lw=1,
               label=f"mean {summary['mean_psnr_vs_gt']:.2f} dB")
    ax.set_xlabel("episode")
    ax.set_ylabel("constructed vs GT (dB)")
    ax.set_title("map construction fidelity")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig_path = out_dir / "stitch_psnr.png"
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)

    paths = {"json": json_path, "csv": csv_path, "psnr_png": fig_path}
    if save_maps:
        maps_dir = out_dir / "maps"
        maps_dir.mkdir(exist_ok=True)
        for ep_id, res in results:
            spatial.save_map(res.constructed, maps_dir / ep_id)
        paths["maps_dir"] = maps_dir
    return paths
