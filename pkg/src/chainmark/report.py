"""Report emission: delimited text, JSON, and matplotlib figures.

Attack and undetectability runs produce three artifacts side by side in
an output directory: a ``key=value`` text summary (one fact per line), a
machine-readable JSON copy, and PNG figures rendered headlessly.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import AttackSummary  # noqa: E402


def format_kv(mapping: Dict) -> str:
    lines = []
    for key, value in mapping.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_kv(path: Path, mapping: Dict) -> Path:
    path = Path(path)
    path.write_text(format_kv(mapping))
    return path


def write_json(path: Path, mapping: Dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(mapping, indent=2, sort_keys=True) + "\n")
    return path


def _cumulative(flags: List[int]) -> List[float]:
    out = []
    acc = 0
    for i, f in enumerate(flags, start=1):
        acc += f
        out.append(acc / i)
    return out


def attack_report(outdir, summary: AttackSummary) -> List[Path]:
    """Write summary.txt, summary.json, and the attack figures."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = [
        write_kv(outdir / "summary.txt", summary.to_dict()),
        write_json(outdir / "summary.json", summary.to_dict()),
    ]

    fig, ax = plt.subplots(figsize=(5, 3.2))
    names = ["accept", "recover_exact", "ebc_close"]
    rates = [summary.accept_rate, summary.recover_exact_rate, summary.ebc_close_rate]
    ax.bar(names, rates, color=["#3465a4", "#4e9a06", "#a40000"])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("rate")
    ax.set_title(f"{summary.spec.kind} ({summary.trials} trials)")
    for i, rate in enumerate(rates):
        ax.text(i, rate + 0.02, f"{rate:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    path = outdir / "attack_rates.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if summary.accept_flags:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(_cumulative(summary.accept_flags), label="accept")
        ax.plot(_cumulative(summary.recover_flags), label="recover_exact")
        ax.set_xlabel("trial")
        ax.set_ylabel("cumulative rate")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(loc="lower right", fontsize=8)
        ax.set_title(f"{summary.spec.kind}: rate convergence")
        fig.tight_layout()
        path = outdir / "attack_trials.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def undetectability_report(outdir, stats: Dict) -> List[Path]:
    """Write undetectability stats plus a histogram of per-response
    ones-fractions with the ideal 0.5 line."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    flat = {k: v for k, v in stats.items() if not isinstance(v, list)}
    written = [
        write_kv(outdir / "undetectability.txt", flat),
        write_json(outdir / "undetectability.json", stats),
    ]
    fractions = stats.get("chunk_fractions") or []
    if fractions:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(fractions, bins=min(30, max(5, len(fractions) // 4)),
                color="#3465a4", edgecolor="white")
        ax.axvline(0.5, color="#a40000", linestyle="--", label="ideal 0.5")
        ax.set_xlabel("ones fraction per response")
        ax.set_ylabel("responses")
        ax.set_title(
            f"bit marginals: p={stats['chi_square_p']:.3g}, "
            f"lag-1 z={stats['autocorr_sigma']:.2f}"
        )
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = outdir / "undetectability.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
