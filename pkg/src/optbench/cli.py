"""Command-line entry point: ``optbench run | report | list | audit``.

Exit codes: 0 success or audit pass, 1 audit fail, 2 usage or validation
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path
from typing import Optional

import jsonschema

from optbench import __version__
from optbench.errors import NotFoundError, OptbenchError, ValidationError
from optbench.metrics import ConvergenceTest
from optbench.problems import TestSet, all_problems, builtin_suite, get_problem, suite_names
from optbench.report import KINDS, build_report
from optbench.runner import (
    STRICT,
    THROUGHPUT,
    ExperimentPlan,
    FixedCost,
    FixedTarget,
    audit_shift_invariance,
    perturbed_starts,
    run_experiment,
)
from optbench.solvers import SOLVERS, SolverConfig, get_solver, solver_names
from optbench.storage import load_histories, read_plan, read_results_csv, write_table

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
SEED_ENV = "OPTBENCH_SEED"

_POS_INT = {"type": "integer", "minimum": 1}

PLAN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["solvers", "mode"],
    "oneOf": [{"required": ["suite"]}, {"required": ["problems"]}],
    "properties": {
        "suite": {"type": "string"},
        "problems": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "solvers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {"type": "string"},
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["algorithm"],
                        "properties": {
                            "id": {"type": "string"},
                            "algorithm": {"type": "string"},
                            "parameters": {"type": "object"},
                            "provenance": {"type": "string"},
                        },
                    },
                ]
            },
        },
        "mode": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "fixed_cost": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["budget"],
                    "properties": {"budget": _POS_INT},
                },
                "fixed_target": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["epsilon", "safety_budget"],
                    "properties": {"epsilon": {"type": "number", "exclusiveMinimum": 0}, "safety_budget": _POS_INT},
                },
            },
        },
        "repeats": _POS_INT,
        "repeat_deterministic": {"type": "boolean"},
        "master_seed": {"type": "integer", "minimum": 0},
        "starting_points": {
            "type": "object",
            "additionalProperties": False,
            "required": ["count"],
            "properties": {
                "radius": {"type": "number", "minimum": 0},
                "count": _POS_INT,
                "master_seed": {"type": "integer", "minimum": 0},
            },
        },
        "timing_mode": {"enum": [STRICT, THROUGHPUT]},
        "workers": _POS_INT,
        "trace": {"type": "boolean"},
        "output": {"type": "string"},
    },
}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


# --- plan files -------------------------------------------------------------

def _line_of(text: str, path) -> int:
    """Best-effort 1-based line of the JSON value at ``path``.

    Walks the path through the raw text by key name; array indices keep the
    current position, so the line points at the enclosing key at worst.
    """
    pos = 0
    for part in path:
        if isinstance(part, str):
            m = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
            if m is None:
                break
            pos = m.start()
    return text.count("\n", 0, pos) + 1


def _schema_message(err: jsonschema.ValidationError, text: str) -> str:
    path = list(err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        key = extra[0] if extra else None
        line = _line_of(text, path + [key] if key else path)
        where = ".".join(str(p) for p in path) or "top level"
        allowed = ", ".join(sorted(err.schema.get("properties", {})))
        return f"line {line}: unknown key {', '.join(repr(k) for k in extra)} at {where} (allowed: {allowed})"
    if err.validator == "oneOf" and not path:
        return "line 1: plan needs exactly one of 'suite' or 'problems'"
    line = _line_of(text, path)
    where = ".".join(str(p) for p in path) or "top level"
    return f"line {line}: {where}: {err.message}"


def load_plan_file(path) -> tuple[dict, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read plan {path}: {exc.strerror or exc}", EXIT_IO) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    errors = sorted(jsonschema.Draft202012Validator(PLAN_SCHEMA).iter_errors(doc),
                    key=lambda e: (_line_of(text, list(e.absolute_path)), list(map(str, e.absolute_path))))
    if errors:
        raise CliError("\n".join(f"{path}: {_schema_message(e, text)}" for e in errors))
    return doc, text


def _solver_configs(entries) -> list[SolverConfig]:
    out = []
    for entry in entries:
        if isinstance(entry, str):
            out.append(SolverConfig.create(entry))
        else:
            out.append(SolverConfig.create(entry["algorithm"], entry.get("parameters"), entry.get("id"),
                                           entry.get("provenance")))
    return out


def _env_seed() -> Optional[int]:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be a nonnegative integer, got {raw!r}") from None
    if seed < 0:
        raise CliError(f"{SEED_ENV} must be a nonnegative integer, got {raw!r}")
    return seed


def _merge(name: str, plan_value, flag_value):
    if plan_value is not None and flag_value is not None and plan_value != flag_value:
        raise CliError(f"--{name.replace('_', '-')} {flag_value!r} conflicts with plan value {plan_value!r}")
    return flag_value if flag_value is not None else plan_value


def build_plan(doc: dict, seed_flag: Optional[int] = None) -> ExperimentPlan:
    """ExperimentPlan from a schema-valid plan document."""
    if "suite" in doc:
        test_set = builtin_suite(doc["suite"])
    else:
        ids = doc["problems"]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise CliError(f"problems listed twice: {', '.join(dupes)}")
        test_set = TestSet("custom", tuple(get_problem(pid) for pid in ids))
    solvers = _solver_configs(doc["solvers"])
    (mode_name, mode_args), = doc["mode"].items()
    mode = FixedCost(mode_args["budget"]) if mode_name == "fixed_cost" else FixedTarget(
        float(mode_args["epsilon"]), mode_args["safety_budget"])
    master_seed = _merge("seed", doc.get("master_seed"), seed_flag)
    if master_seed is None:
        master_seed = _env_seed() or 0
    starts = None
    rule = doc.get("starting_points")
    if rule is not None:
        starts = perturbed_starts(test_set, float(rule.get("radius", 0.0)), rule["count"],
                                  rule.get("master_seed", master_seed))
    return ExperimentPlan(
        test_set=test_set,
        solvers=solvers,
        mode=mode,
        repeats=doc.get("repeats", 1),
        starting_points=starts,
        master_seed=master_seed,
        timing_mode=doc.get("timing_mode", STRICT),
        workers=doc.get("workers", 4),
        capture_trace=doc.get("trace", True),
        repeat_deterministic=doc.get("repeat_deterministic", True),
    )


# --- commands ---------------------------------------------------------------

def cmd_run(args) -> int:
    doc, _ = load_plan_file(args.plan)
    out = _merge("out", doc.get("output"), args.out)
    if out is None:
        raise CliError("no output directory: pass --out or set \"output\" in the plan")
    try:
        plan = build_plan(doc, args.seed)
    except (ValidationError, NotFoundError) as exc:
        raise CliError(f"{args.plan}: {exc}") from None
    warnings = plan.validate()
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    table = run_experiment(plan)
    try:
        write_table(table, out)
    except OSError as exc:
        raise CliError(f"cannot write results under {out}: {exc}", EXIT_IO) from None
    counts: dict = {}
    for r in table.records:
        counts[r.status] = counts.get(r.status, 0) + 1
    summary = {"out": str(out), "records": len(table.records), "statuses": counts, "warnings": warnings,
               "fingerprint": table.fingerprint}
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"{len(table.records)} runs written to {out}")
        for status in sorted(counts):
            print(f"  {status}: {counts[status]}")
    return EXIT_OK


def _split_list(text: Optional[str]) -> Optional[list[str]]:
    if text is None:
        return None
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise CliError("empty list argument")
    return items


def cmd_report(args) -> int:
    results = Path(args.results)
    if results.is_dir():
        results = results / "results.csv"
    try:
        test = ConvergenceTest.parse(args.test)
    except ValidationError as exc:
        raise CliError(f"--test: {exc}") from None
    kinds = _split_list(args.kinds) or list(KINDS)
    subset = _split_list(args.subset)
    try:
        records = read_results_csv(results)
        load_histories(records, results.parent)
        plan = read_plan(results.parent / "plan.json")
    except OSError as exc:
        raise CliError(f"cannot read {results}: {exc.strerror or exc}", EXIT_IO) from None
    except ValidationError as exc:
        raise CliError(f"{results}: {exc}") from None
    info = {"results": str(results), "fingerprint": plan.get("fingerprint") if plan else None}
    try:
        manifest = build_report(records, args.out, test, kinds, plan=plan, measure=args.measure, subset=subset,
                                best_known=args.best_known, M=args.M, inputs_info=info)
    except OSError as exc:
        raise CliError(f"cannot write report under {args.out}: {exc}", EXIT_IO) from None
    if args.json:
        print(json.dumps(manifest, sort_keys=True))
    else:
        print(f"report written to {args.out}: {len(manifest['files'])} files, cost measure "
              f"{manifest['cost_measure']}")
        for w in manifest["warnings"]:
            print(f"  warning: {w}")
    return EXIT_OK


def cmd_list(args) -> int:
    if args.what == "problems":
        if args.suite:
            problems = list(builtin_suite(args.suite))
        else:
            problems = list(all_problems().values())
        if args.json:
            print(json.dumps([p.manifest() for p in problems]))
        else:
            for p in problems:
                fstar = "?" if p.f_star is None else f"{p.f_star:g}"
                print(f"{p.id:24s} n={p.n:<3d} m={p.m:<2d} grad={'yes' if p.has_gradient else 'no ':3s} "
                      f"f*={fstar}")
    elif args.what == "solvers":
        entries = []
        for name in solver_names():
            spec = SOLVERS[name]
            entries.append({"id": name, "deterministic": spec.deterministic, "needs_gradient": spec.needs_gradient,
                            "defaults": dict(spec.defaults)})
        if args.json:
            print(json.dumps(entries))
        else:
            for e in entries:
                params = ", ".join(f"{k}={v}" for k, v in e["defaults"].items())
                kind = "deterministic" if e["deterministic"] else "randomized"
                print(f"{e['id']:18s} {kind:13s} {params}")
    else:
        entries = [{"id": name, "problems": [p.id for p in builtin_suite(name)]} for name in suite_names()]
        if args.json:
            print(json.dumps(entries))
        else:
            for e in entries:
                print(f"{e['id']:18s} {len(e['problems'])} problems")
    return EXIT_OK


def _parse_shift(text: str, n: int) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"--shift: expected comma-separated numbers, got {text!r}") from None
    if len(values) == 1 and n > 1:
        values = values * n
    if len(values) != n:
        raise CliError(f"--shift has {len(values)} components but the problem has n={n}")
    return values


def cmd_audit(args) -> int:
    try:
        problem = get_problem(args.problem)
        get_solver(args.solver)
        cfg = SolverConfig.create(args.solver)
    except NotFoundError as exc:
        raise CliError(str(exc)) from None
    shift = _parse_shift(args.shift, problem.n)
    report = audit_shift_invariance(problem, cfg, shift, args.budget)
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        verdict = "PASS" if report.passed else "FAIL"
        print(f"{verdict}: {cfg.id} on {problem.id} shifted by {report.shift}")
        print(f"  max iterate deviation {report.max_deviation:.3g}, final f gap {report.f_gap:.3g} "
              f"(tolerance {report.tolerance:g})")
        print(f"  improving iterates: {report.n_points} original, {report.n_points_shifted} shifted")
    return EXIT_OK if report.passed else EXIT_FAIL


# --- argument parsing -------------------------------------------------------

def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(text: str) -> int:
    v = _nonneg_int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optbench", description="Benchmark optimization solvers.")
    parser.add_argument("--version", action="version", version=f"optbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute an experiment plan")
    p.add_argument("plan", help="JSON plan file")
    p.add_argument("--out", help="output directory (or \"output\" in the plan)")
    p.add_argument("--seed", type=_nonneg_int, help=f"master seed (default: plan, then ${SEED_ENV}, then 0)")
    p.add_argument("--json", action="store_true", help="print a JSON summary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="build tables, profiles and plots from results.csv")
    p.add_argument("results", help="results.csv or the directory holding it")
    p.add_argument("--test", default="abs_f:1e-6", help="convergence test KIND:EPS, KIND in abs_f, rel_f, x_dist")
    p.add_argument("--kinds", help=f"comma-separated subset of {','.join(KINDS)} (default: all)")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--subset", help="comma-separated solver ids; profiles are recomputed over these only")
    p.add_argument("--best-known", action="store_true",
                   help="use the best value any solver found where the optimum is unknown")
    p.add_argument("--measure", choices=("evals", "cpu", "wall"),
                   help="cost measure for performance profiles (default: cpu for strict fixed-target, else evals)")
    p.add_argument("--M", type=float, default=16.0, help="cap on digits of accuracy (default 16)")
    p.add_argument("--json", action="store_true", help="print the manifest as JSON")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("list", help="list problems, solvers or suites")
    p.add_argument("what", choices=("problems", "solvers", "suites"))
    p.add_argument("--suite", help="with 'problems': only this suite")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("audit", help="shift-invariance audit of a deterministic solver")
    p.add_argument("problem")
    p.add_argument("solver")
    p.add_argument("--shift", required=True, help="comma-separated shift vector (one value is broadcast)")
    p.add_argument("--budget", type=_pos_int, default=2000)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OptbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
