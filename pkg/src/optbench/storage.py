"""On-disk formats: results.csv, histories/, paths/, plan.json."""

from __future__ import annotations

import csv
import io
import json
import os
import re
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from optbench.errors import ValidationError
from optbench.metrics import fmt_float
from optbench.runner import ResultsTable, RunRecord
from optbench.solvers import STATUSES, IterateTrace

RESULTS_COLUMNS = (
    "problem_id", "solver_id", "start_id", "repeat_index", "seed", "status", "n", "n_feval", "n_geval",
    "n_ceval", "cpu_time_s", "wall_time_s", "f_start", "f_best", "f_star", "viol_sum", "x_best",
)
TIME_COLUMNS = ("cpu_time_s", "wall_time_s")
HISTORY_COLUMNS = ("eval_index", "f_best_so_far")
PATH_COLUMNS = ("eval_index", "x")


class SchemaError(ValidationError):
    """A results file does not follow the expected schema."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


def atomic_write(path, data, mode: str = "w"):
    """Write a file via a temporary sibling and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+#-]", "_", text)


def join_vector(x) -> str:
    if x is None:
        return ""
    return ";".join(fmt_float(v) for v in np.asarray(x, dtype=float))


def record_row(r: RunRecord) -> list[str]:
    return [
        r.problem_id, r.solver_id, r.start_id, str(r.repeat_index), str(r.seed), r.status, str(r.n),
        str(r.n_feval), str(r.n_geval), str(r.n_ceval), fmt_float(r.cpu_time_s), fmt_float(r.wall_time_s),
        fmt_float(r.f_start), fmt_float(r.f_best), fmt_float(r.f_star), fmt_float(r.viol_sum),
        join_vector(r.x_best),
    ]


def results_csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_COLUMNS)
    for r in records:
        w.writerow(record_row(r))
    return buf.getvalue()


def write_results_csv(records, path):
    atomic_write(path, results_csv_text(records))


def _float(text: str, name: str, row: int, optional: bool = False) -> Optional[float]:
    if text == "":
        if optional:
            return None
        raise SchemaError(f"column {name} is empty", row)
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"column {name}: not a number: {text!r}", row) from None


def _int(text: str, name: str, row: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise SchemaError(f"column {name}: not an integer: {text!r}", row) from None


def parse_results_csv(text: str) -> list[RunRecord]:
    """Parse results.csv content. Row numbers in errors count the header as row 1."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("results file is empty", 1) from None
    if tuple(header) != RESULTS_COLUMNS:
        raise SchemaError(f"unexpected header; expected {','.join(RESULTS_COLUMNS)}", 1)
    records = []
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(RESULTS_COLUMNS):
            raise SchemaError(f"expected {len(RESULTS_COLUMNS)} fields, got {len(row)}", rowno)
        d = dict(zip(RESULTS_COLUMNS, row))
        if d["status"] not in STATUSES:
            raise SchemaError(f"unknown status {d['status']!r}", rowno)
        n = _int(d["n"], "n", rowno)
        x_best = None
        if d["x_best"]:
            try:
                x_best = np.array([float(v) for v in d["x_best"].split(";")])
            except ValueError:
                raise SchemaError("column x_best: malformed vector", rowno) from None
            if x_best.size != n:
                raise SchemaError(f"x_best has {x_best.size} entries, expected n={n}", rowno)
        records.append(RunRecord(
            problem_id=d["problem_id"], solver_id=d["solver_id"], start_id=d["start_id"],
            repeat_index=_int(d["repeat_index"], "repeat_index", rowno), seed=_int(d["seed"], "seed", rowno),
            status=d["status"], n=n, n_feval=_int(d["n_feval"], "n_feval", rowno),
            n_geval=_int(d["n_geval"], "n_geval", rowno), n_ceval=_int(d["n_ceval"], "n_ceval", rowno),
            cpu_time_s=_float(d["cpu_time_s"], "cpu_time_s", rowno, optional=True),
            wall_time_s=_float(d["wall_time_s"], "wall_time_s", rowno),
            f_start=_float(d["f_start"], "f_start", rowno), f_best=_float(d["f_best"], "f_best", rowno),
            f_star=_float(d["f_star"], "f_star", rowno, optional=True),
            viol_sum=_float(d["viol_sum"], "viol_sum", rowno, optional=True), x_best=x_best,
        ))
    return records


def read_results_csv(path) -> list[RunRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_results_csv(fh.read())


def write_histories(records, out_dir):
    """One two-column history per traced run, plus the matching iterate path."""
    out_dir = Path(out_dir)
    for r in records:
        if r.trace is None:
            continue
        name = safe_name(r.run_key) + ".csv"
        hist = ["eval_index,f_best_so_far"] + [f"{k},{fmt_float(f)}" for k, _, f in r.trace.entries]
        atomic_write(out_dir / "histories" / name, "\n".join(hist) + "\n")
        path = ["eval_index,x"] + [f"{k},{join_vector(x)}" for k, x, _ in r.trace.entries]
        atomic_write(out_dir / "paths" / name, "\n".join(path) + "\n")


def load_histories(records, out_dir) -> int:
    """Attach traces found under ``out_dir``; returns how many were attached."""
    out_dir = Path(out_dir)
    attached = 0
    for r in records:
        name = safe_name(r.run_key) + ".csv"
        hist = out_dir / "histories" / name
        if not hist.exists():
            continue
        with open(hist, encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != HISTORY_COLUMNS:
            raise SchemaError(f"{hist}: unexpected header", 1)
        points = {}
        path = out_dir / "paths" / name
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                for k, x in list(csv.reader(fh))[1:]:
                    points[int(k)] = np.array([float(v) for v in x.split(";")])
        trace = IterateTrace()
        for k, f in rows[1:]:
            trace.entries.append((int(k), points.get(int(k)), float(f)))
        r.trace = trace
        attached += 1
    return attached


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def write_table(table: ResultsTable, out_dir):
    """Persist a results table: results.csv, plan.json, environment.json, histories/."""
    out_dir = Path(out_dir)
    write_results_csv(table.records, out_dir / "results.csv")
    atomic_write(out_dir / "plan.json", dumps_json({**table.plan, "fingerprint": table.fingerprint}))
    atomic_write(out_dir / "environment.json", dumps_json(table.environment))
    write_histories(table.records, out_dir)


def read_plan(path) -> Optional[dict]:
    path = Path(path)
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def non_time_rows(path) -> list[list[str]]:
    """results.csv rows with the timing columns dropped, for reproducibility checks."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    drop = {RESULTS_COLUMNS.index(c) for c in TIME_COLUMNS}
    return [[v for i, v in enumerate(row) if i not in drop] for row in rows]

