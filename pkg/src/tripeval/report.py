"""Render experiment reports as JSON, Markdown tables or CSV."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

from .errors import DataError


@dataclass(frozen=True)
class Family:
    title: str
    columns: tuple[str, ...]
    scale: float
    decimals: int


FAMILIES = (
    Family("Downstream R² (x100)",
           ("dwn_tr_tr", "dwn_tr_syn", "dwn_tr_te", "dwn_syn_syn", "dwn_syn_tr", "dwn_syn_te"),
           100.0, 2),
    Family("Wasserstein distance", ("w1_tr_te", "w1_tr_syn", "w1_te_syn"), 1.0, 4),
    Family("Graph similarity (x100)", ("G_tr_te", "G_tr_syn", "G_te_syn"), 100.0, 2),
    Family("Coverage (%)", ("cov_tr_te", "cov_tr_syn", "cov_te_syn"), 100.0, 2),
    Family("Privacy: DCR percentiles and ratio",
           ("dcr_rs", "dcr_hs", "rDCR", "dcr_rr", "dcr_ss"), 1.0, 3),
)


def _num(x: float, decimals: int) -> str:
    if x is None:
        return "-"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.{decimals}f}"


def format_cell(mean: float, std: float | None, decimals: int = 2) -> str:
    """``"73.17 (0.00)"`` style cell; a missing std renders as ``(-)``."""
    return f"{_num(mean, decimals)} ({_num(std, decimals)})"


def _cell(stat: dict | None, fam: Family) -> str:
    if stat is None:
        return "N/A"
    mean = stat["mean"] * fam.scale
    std = None if stat["std"] is None else stat["std"] * fam.scale
    return format_cell(mean, std, fam.decimals)


def _family_rows(report: dict, fam: Family):
    rows = []
    ref = report.get("reference", {})
    for name, gen in report["generators"].items():
        if gen.get("error"):
            continue
        metrics = gen["metrics"]
        stats = [metrics.get(c, ref.get(c)) for c in fam.columns]
        if all(s is None for s in stats):
            continue
        rows.append([name] + [_cell(s, fam) for s in stats])
    return rows


def render_markdown(report: dict) -> str:
    out = ["# Synthetic data evaluation report", ""]
    cfg = report.get("config", {})
    out.append(
        f"Runs per model: {cfg.get('fits_per_model')} fits x {cfg.get('samples_per_fit')} samples; "
        f"sample size {cfg.get('sample_size')}; master seed {cfg.get('master_seed')}."
    )
    out.append("Cells are `mean (std)`; `(-)` marks a single value. Reference columns "
               "(`*_tr_te`, `dwn_tr_tr`) use no synthetic data.")
    out.append("")
    for fam in FAMILIES:
        out.append(f"## {fam.title}")
        out.append("")
        rows = _family_rows(report, fam)
        if not rows:
            out.append("_No values for this metric family; table omitted._")
            out.append("")
            continue
        header = ["model", *fam.columns]
        if fam.columns[0] == "dcr_rs":
            header.append("percentile")
            alpha = cfg.get("metrics", {}).get("alpha", 5.0)
            rows = [r + [f"{alpha:g}"] for r in rows]
        out.append("| " + " | ".join(header) + " |")
        out.append("|" + "|".join("---" for _ in header) + "|")
        out += ["| " + " | ".join(r) + " |" for r in rows]
        out.append("")
    errors = {n: g["error"] for n, g in report["generators"].items() if g.get("error")}
    if errors:
        out.append("## Errors")
        out.append("")
        out += [f"- {n}: {e}" for n, e in errors.items()]
        out.append("")
    return "\n".join(out)


def render_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generator", "metric", "mean", "std", "run_count"])
    for metric, s in report.get("reference", {}).items():
        w.writerow(["reference", metric, repr(s["mean"]), "" if s["std"] is None else repr(s["std"]),
                    s["run_count"]])
    for name, gen in report["generators"].items():
        for metric, s in gen["metrics"].items():
            w.writerow([name, metric, repr(s["mean"]), "" if s["std"] is None else repr(s["std"]),
                        s["run_count"]])
    return buf.getvalue()


def render_sweep_csv(report: dict, generator: str) -> str:
    """Mean rDCR sweep of one generator: ``alpha,d_rs,d_hs,ratio``."""
    try:
        sweep = report["generators"][generator]["sweep"]
    except KeyError:
        raise DataError(f"no generator {generator!r} in report") from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "d_rs", "d_hs", "ratio"])
    for e in sweep:
        w.writerow([repr(e["alpha"]), repr(e["d_rs"]), repr(e["d_hs"]), repr(e["ratio"])])
    return buf.getvalue()


def render_report(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    if fmt == "markdown":
        return render_markdown(report)
    if fmt == "csv":
        return render_csv(report)
    raise DataError(f"unknown report format {fmt!r}")
