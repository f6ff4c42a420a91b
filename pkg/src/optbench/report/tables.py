"""Full and summary tables (CSV and LaTeX)."""

from __future__ import annotations

import csv
import io
import statistics
from pathlib import Path
from typing import Sequence

from optbench import metrics
from optbench.errors import ValidationError
from optbench.metrics import fmt_float
from optbench.report.analysis import AnalysisInputs
from optbench.storage import RESULTS_COLUMNS, atomic_write, record_row, results_csv_text

DASH = "—"

LATEX_SPECIAL = {
    "\\": r"\textbackslash{}", "&": r"\&", "%": r"\%", "$": r"\$", "#": r"\#", "_": r"\_",
    "{": r"\{", "}": r"\}", "~": r"\textasciitilde{}", "^": r"\textasciicircum{}",
}


def latex_escape(text: str) -> str:
    return "".join(LATEX_SPECIAL.get(ch, ch) for ch in text)


def _tex_cell(col: str, value: str) -> str:
    if col == "x_best" and value:
        value = "; ".join(f"{float(v):.6g}" for v in value.split(";"))
    elif col in ("cpu_time_s", "wall_time_s", "f_start", "f_best", "f_star", "viol_sum") and value not in ("", "inf"):
        value = f"{float(value):.6g}"
    return latex_escape(value)


def full_table_latex(records) -> str:
    cols = RESULTS_COLUMNS
    lines = [
        "% requires \\usepackage{longtable}",
        "{\\scriptsize",
        "\\begin{longtable}{" + "l" * 6 + "r" * (len(cols) - 7) + "l}",
        "\\hline",
        " & ".join(latex_escape(c) for c in cols) + " \\\\",
        "\\hline",
        "\\endhead",
    ]
    for r in records:
        lines.append(" & ".join(_tex_cell(c, v) for c, v in zip(cols, record_row(r))) + " \\\\")
    lines += ["\\hline", "\\end{longtable}", "}"]
    return "\n".join(lines) + "\n"


def export_full_table(records, out_dir) -> list[Path]:
    """tables/full.csv (runner schema) and tables/full.tex (longtable)."""
    if not records:
        raise ValidationError("cannot export an empty results table")
    out_dir = Path(out_dir)
    csv_path = out_dir / "tables" / "full.csv"
    tex_path = out_dir / "tables" / "full.tex"
    try:
        atomic_write(csv_path, results_csv_text(records))
        atomic_write(tex_path, full_table_latex(records))
    except OSError as exc:
        raise OSError(f"cannot write full table under {out_dir}: {exc}") from exc
    return [csv_path, tex_path]


def _factor_column(label: str) -> str:
    return label.replace(" ", "_") + "_pct"


def summary_rows(inputs: AnalysisInputs, factors: Sequence = metrics.DEFAULT_FACTORS) -> list[dict]:
    """Per solver: success rate, mean/median cost over converged runs, competitive shares."""
    comp = metrics.competitive_summary(inputs.cost, factors)
    rows = []
    for sid in inputs.solvers:
        keys = [k for k in inputs.view if k[1] == sid]
        ok_costs = [inputs.cost[k] for k in keys if inputs.converged[k]]
        row = {
            "solver_id": sid,
            "problems": len(keys),
            "success_rate": sum(1 for k in keys if inputs.converged[k]) / len(keys),
            "cost_measure": inputs.measure_label,
            "mean_cost": statistics.fmean(ok_costs) if ok_costs else None,
            "median_cost": statistics.median(ok_costs) if ok_costs else None,
        }
        for label, _ in factors:
            row[_factor_column(label)] = comp[sid][label]
        rows.append(row)
    return rows


def summary_csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    w.writerow(header)
    for row in rows:
        cells = []
        for col in header:
            v = row[col]
            if v is None:
                cells.append(DASH)
            elif isinstance(v, float):
                cells.append(fmt_float(v))
            else:
                cells.append(str(v))
        w.writerow(cells)
    return buf.getvalue()


def export_summary_table(inputs: AnalysisInputs, out_dir, factors: Sequence = metrics.DEFAULT_FACTORS) -> Path:
    path = Path(out_dir) / "tables" / "summary.csv"
    atomic_write(path, summary_csv_text(summary_rows(inputs, factors)))
    return path
