"""Benchmark harness: single runs, parameter sweeps, method comparisons.

The error metric throughout is |sum of generation - sum of load| in pu, also
reported as a percentage of total load.
"""

import csv
import io
import json
import os
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from .alr import AlrParams, run_alr
from .case import CaseValidationError, canonical_case, load_case, make_partition, single_area
from .centralized import solve_centralized
from .lr import LrParams, run_lr

METHODS = ("centralized", "lr", "alr")
SWEEPABLE = {"step_a": "lr", "step_b": "lr", "alpha": "alr", "gamma": "alr", "lambda0": None}

# Initial multipliers of the canonical benchmark runs.
CANONICAL_LAMBDA0 = (3.066, 3.066)


@dataclass
class RunReport:
    method: str
    iterations: int
    wall_time_s: float
    final_error: float
    final_error_pct: float
    objective_cost: float
    converged: bool
    shared_values_per_iteration: int

    @property
    def time_per_iteration_s(self):
        return self.wall_time_s / max(self.iterations, 1)


def shared_values_per_iteration(method, case, part):
    """Scalars exchanged between areas in one iteration.

    LR: one angle per boundary bus plus every multiplier (one lambda per
    boundary balance, two mu per tie-line). ALR: the boundary angles and the
    lambdas, plus the flow of every line incident to a boundary bus.
    Centralized: nothing is exchanged.
    """
    if method == "centralized":
        return 0
    n_boundary = len(part.boundary_buses)
    if method == "lr":
        return n_boundary + n_boundary + 2 * len(part.tie_lines)
    if method == "alr":
        incident = sum(1 for ln in case.lines
                       if ln.from_bus in part.boundary_buses or ln.to_bus in part.boundary_buses)
        return n_boundary + n_boundary + incident
    raise ValueError(f"unknown method {method!r}")


def default_params(method, canonical=False):
    lam0 = CANONICAL_LAMBDA0 if canonical else None
    if method == "lr":
        return LrParams(lambda0=lam0)
    if method == "alr":
        return AlrParams(lambda0=lam0)
    return None


def run_single(case, part, method, params=None, trace_path=None):
    """Run one method; returns (RunReport, trace or None).

    Non-convergence is reported in the report, never raised.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    trace = None
    t0 = time.perf_counter()
    if method == "centralized":
        sol = solve_centralized(case)
        wall = time.perf_counter() - t0
        iterations, converged = 1, True
    else:
        params = params or default_params(method)
        runner = run_lr if method == "lr" else run_alr
        sol, trace = runner(case, part, params)
        wall = time.perf_counter() - t0
        iterations, converged = trace.iterations, trace.converged
        if trace_path:
            trace.to_csv(trace_path)
    # the returned dispatch is the best iterate of a non-converged run; the
    # error column always describes the last iterate of the trace
    err = trace.last.gen_load_error if trace is not None else sol.gen_load_error(case)
    report = RunReport(
        method=method,
        iterations=iterations,
        wall_time_s=wall,
        final_error=err,
        final_error_pct=100.0 * err / case.total_load,
        objective_cost=sol.objective_cost,
        converged=converged,
        shared_values_per_iteration=shared_values_per_iteration(method, case, part),
    )
    return report, trace


def compare_methods(case, part, lr_params=None, alr_params=None, criterion=0.01, fixed_iters=None):
    """LR and ALR side by side under a common stopping tolerance, or for
    exactly ``fixed_iters`` iterations each."""
    lr_params = lr_params or LrParams()
    alr_params = alr_params or AlrParams()
    if fixed_iters is not None:
        if fixed_iters < 1:
            raise ValueError("fixed_iters must be at least 1")
        lr_params = replace(lr_params, criterion="none", max_iter=fixed_iters)
        alr_params = replace(alr_params, criterion="none", max_iter=fixed_iters)
    else:
        lr_params = replace(lr_params, stop_tol=criterion)
        alr_params = replace(alr_params, stop_tol=criterion)
    return [run_single(case, part, "lr", lr_params)[0], run_single(case, part, "alr", alr_params)[0]]


@dataclass
class SweepSpec:
    parameter: str
    values: list
    method: str = ""
    fixed: dict = None
    case: str = "canonical"
    areas: str = None

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.parameter!r}; choose one of {sorted(SWEEPABLE)}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        self.method = self.method or SWEEPABLE[self.parameter]
        if self.method not in ("lr", "alr"):
            raise ValueError("sweep method must be 'lr' or 'alr'")
        if SWEEPABLE[self.parameter] not in (None, self.method):
            raise ValueError(f"{self.parameter} is not a {self.method} parameter")
        self.fixed = dict(self.fixed or {})

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ValueError(f"{path}: sweep spec must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"{path}: unknown sweep keys {sorted(extra)}")
        spec = cls(**data)
        base = os.path.dirname(os.path.abspath(path))
        for attr in ("case", "areas"):
            v = getattr(spec, attr)
            if v and v != "canonical" and not os.path.isabs(v):
                setattr(spec, attr, os.path.join(base, v))
        return spec

    def params_for(self, value):
        cls = LrParams if self.method == "lr" else AlrParams
        kw = dict(self.fixed)
        kw[self.parameter] = value
        return cls(**kw)


@dataclass
class SweepRow:
    value: object
    report: RunReport = None
    error: str = ""


def _sort_key(value):
    return tuple(np.atleast_1d(np.asarray(value, dtype=float)).tolist())


def load_case_and_partition(case_path="canonical", areas_path=None, strict_boundary=False):
    if case_path == "canonical":
        case, part = canonical_case()
        if areas_path is None:
            return case, make_partition(case, case.areas, require_empty_boundary=True) if strict_boundary else part
    else:
        case = load_case(case_path)
    if areas_path is not None:
        try:
            with open(areas_path) as fh:
                area_of = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CaseValidationError(f"{areas_path}: malformed JSON: {exc}") from None
        if not isinstance(area_of, dict):
            raise CaseValidationError(f"{areas_path}: expected an object mapping bus id to area")
        return case, make_partition(case, area_of, require_empty_boundary=strict_boundary)
    if case.areas is not None:
        return case, make_partition(case, case.areas, require_empty_boundary=strict_boundary)
    return case, single_area(case)


def run_sweep(spec, case=None, part=None):
    """One row per value, ordered by value; failures are kept per row."""
    if case is None:
        case, part = load_case_and_partition(spec.case, spec.areas)
    rows = []
    for value in sorted(spec.values, key=_sort_key):
        try:
            report, _ = run_single(case, part, spec.method, spec.params_for(value))
            rows.append(SweepRow(value, report))
        except (ValueError, RuntimeError) as exc:
            rows.append(SweepRow(value, error=str(exc)))
    return rows


REPORT_COLUMNS = ["method", "iterations", "wall_time_s", "time_per_iteration_s", "final_error",
                  "final_error_pct", "objective_cost", "converged", "shared_values_per_iteration"]


def _cell(v):
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(float(x)) for x in v)
    return str(v)


def report_rows(reports, sweep_parameter=None):
    """Header and string cells for reports or sweep rows."""
    header = ([sweep_parameter] if sweep_parameter else []) + REPORT_COLUMNS + (["error"] if sweep_parameter else [])
    rows = []
    for item in reports:
        if isinstance(item, SweepRow):
            r = item.report
            cells = [_cell(item.value)]
            cells += [_cell(getattr(r, c)) for c in REPORT_COLUMNS] if r else [""] * len(REPORT_COLUMNS)
            cells.append(item.error)
        else:
            cells = [_cell(getattr(item, c)) for c in REPORT_COLUMNS]
        rows.append(cells)
    return header, rows


def table_csv(reports, sweep_parameter=None):
    header, rows = report_rows(reports, sweep_parameter)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def table_text(reports, sweep_parameter=None):
    header, rows = report_rows(reports, sweep_parameter)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"
