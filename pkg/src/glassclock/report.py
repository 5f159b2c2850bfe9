"""Rendering of experiment outputs: text tables and PNG figures.

Input is a directory produced by write_outputs (results.jsonl plus
manifest.json).  The report step is read-only with respect to the results;
it adds summary.txt and one figure per metric group next to them.
"""

from __future__ import annotations

import json
from pathlib import Path

__all__ = ["load_results", "summarize", "render_figures", "report"]

# Preferred x-axis for figures, tried in order; the first key that varies
# across a group's rows wins.
_AXIS_CANDIDATES = ("N", "x", "theta", "t", "alpha", "rho", "steps", "delta",
                    "d_N", "steps_over_N", "instance", "n")


def load_results(in_dir) -> tuple[dict, list[dict]]:
    """Manifest and result records from a run directory."""
    path = Path(in_dir)
    manifest_file = path / "manifest.json"
    results_file = path / "results.jsonl"
    if not results_file.exists():
        raise FileNotFoundError(f"no results.jsonl under {path}")
    manifest = {}
    if manifest_file.exists():
        manifest = json.loads(manifest_file.read_text())
    records = [
        json.loads(line)
        for line in results_file.read_text().splitlines()
        if line.strip()
    ]
    return manifest, records


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _param_text(params: dict) -> str:
    return " ".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))


def summarize(manifest: dict, records: list[dict]) -> str:
    """Plain-text table, one line per record, aligned by column."""
    lines = []
    if manifest:
        lines.append(
            "experiment {experiment}  seed {master_seed}  config {config_hash}  "
            "version {version}".format(
                **{k: manifest.get(k, "?") for k in (
                    "experiment", "master_seed", "config_hash", "version")}
            )
        )
        lines.append("")
    trials = [r for r in records if r.get("kind") == "trial"]
    ks = [r for r in records if r.get("kind") == "ks"]
    if trials:
        rows = [
            (
                _param_text(r["params"]),
                _fmt(r["estimate"]),
                f"[{_fmt(r['ci_lo'])}, {_fmt(r['ci_hi'])}]",
                str(r.get("truncated_count", 0)),
            )
            for r in trials
        ]
        widths = [max(len(row[i]) for row in rows) for i in range(4)]
        header = ("parameters", "estimate", "95% interval", "truncated")
        widths = [max(w, len(h)) for w, h in zip(widths, header)]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        for row in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        lines.append("")
    if ks:
        rows = [
            (
                _param_text(r["params"]),
                _fmt(r["statistic"]),
                _fmt(r["p_value"]),
                str(r["n"]),
                str(r.get("target", "")),
            )
            for r in ks
        ]
        widths = [max(len(row[i]) for row in rows) for i in range(5)]
        header = ("parameters", "KS statistic", "p-value", "n", "target")
        widths = [max(w, len(h)) for w, h in zip(widths, header)]
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        for row in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        lines.append("")
    return "\n".join(lines)


def _group_key(rec: dict) -> str:
    params = rec["params"]
    label = params.get("metric") or params.get("which") or rec["kind"]
    extras = [
        f"{k}={_fmt(v)}"
        for k, v in sorted(params.items())
        if k in ("backend", "delta", "epsilon") and v is not None
    ]
    return "-".join([str(label), *extras]) if extras else str(label)


def _pick_axis(group: list[dict]) -> str | None:
    for key in _AXIS_CANDIDATES:
        vals = {r["params"].get(key) for r in group}
        vals.discard(None)
        if len(vals) > 1:
            return key
    for key in _AXIS_CANDIDATES:
        if any(r["params"].get(key) is not None for r in group):
            return key
    return None


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in text)


def render_figures(records: list[dict], out_dir, experiment: str = "results"):
    """One PNG per metric group: estimates with intervals, or p-values."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict[str, list[dict]] = {}
    for rec in records:
        groups.setdefault(_group_key(rec), []).append(rec)
    written = []
    for name, group in sorted(groups.items()):
        axis = _pick_axis(group)
        if axis is None:
            continue
        group = [g for g in group if g["params"].get(axis) is not None]
        if not group:
            continue
        group.sort(key=lambda g: g["params"][axis])
        xs = [g["params"][axis] for g in group]
        fig, ax = plt.subplots(figsize=(5.5, 3.6))
        if group[0]["kind"] == "trial":
            ys = [g["estimate"] for g in group]
            lo = [
                (g["estimate"] - g["ci_lo"]) if g["ci_lo"] is not None else 0.0
                for g in group
            ]
            hi = [
                (g["ci_hi"] - g["estimate"]) if g["ci_hi"] is not None else 0.0
                for g in group
            ]
            ax.errorbar(xs, ys, yerr=[lo, hi], fmt="o-", capsize=3)
            targets = {g["params"].get("target") for g in group}
            targets.discard(None)
            for tval in sorted(targets):
                ax.axhline(tval, color="gray", linestyle="--", linewidth=0.8)
            ax.set_ylabel("estimate")
        else:
            ys = [g["p_value"] for g in group]
            ax.plot(xs, ys, "o-")
            ax.axhline(0.01, color="gray", linestyle="--", linewidth=0.8)
            ax.set_yscale("log")
            ax.set_ylabel("KS p-value")
        ax.set_xlabel(axis)
        ax.set_title(name)
        fig.tight_layout()
        target_file = out / f"{_slug(experiment)}_{_slug(name)}.png"
        fig.savefig(target_file, dpi=120)
        plt.close(fig)
        written.append(target_file)
    return written


def report(in_dir, figures: bool = True) -> str:
    """Write summary.txt (and figures) into the run directory; return text."""
    manifest, records = load_results(in_dir)
    text = summarize(manifest, records)
    out = Path(in_dir)
    (out / "summary.txt").write_text(text)
    if figures:
        render_figures(records, out, manifest.get("experiment", "results"))
    return text
