"""Report assembly and its canonical serialization.

A report pairs each suite verdict with the raw numbers it was judged on and
carries enough to re-derive them: the scenario echo, the budgets, the solved
series coefficients at the base point, and the convention calibration record.
Serialization is canonical (sorted keys, fractions as "p/q" strings, shortest
round-trip floats), so a fixed scenario, seed, and backend produces the same
bytes on every run.  Wall-clock timing therefore stays out of the canonical
file; callers print it to stderr.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction

from .calibration import calibrate
from .jets import jet_u_coefficient


def plain(obj):
    """Recursively rewrite a result tree into canonical JSON-ready values."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return plain(obj.item())
    if hasattr(obj, "to_dict"):
        return plain(obj.to_dict())
    raise TypeError("cannot serialize %r" % type(obj).__name__)


def _coefficient_value(jet, m):
    cm = jet_u_coefficient(jet, m)
    val = cm.value(0)
    if hasattr(val, "flat"):  # float batch: report the first grid node
        val = val.flat[0]
    return plain(val)


def series_coefficients(exp):
    """Solved metric and density u-series evaluated at the base point."""
    n = exp.mm.dim
    metric = {}
    for i in range(n):
        for j in range(i, n):
            metric["%d,%d" % (i, j)] = [
                _coefficient_value(exp.g_u.get(i, j), m) for m in range(exp.order + 1)
            ]
    density = [_coefficient_value(exp.phi_u, m) for m in range(exp.order + 1)]
    return {"metric": metric, "density": density}


@dataclass
class Report:
    scenario: dict
    backend: str
    order: int
    spatial_degree: int
    grid: list | None
    calibration: dict
    coefficients: dict
    suites: list
    passed: bool
    timing: dict | None = None

    def to_dict(self, include_timing=False):
        out = {
            "scenario": self.scenario,
            "backend": self.backend,
            "order": self.order,
            "spatial_degree": self.spatial_degree,
            "grid": self.grid,
            "calibration": self.calibration,
            "coefficients": self.coefficients,
            "suites": self.suites,
            "passed": self.passed,
        }
        if include_timing and self.timing is not None:
            out["timing"] = self.timing
        return out


def build_report(ctx, results, timing=None):
    """Assemble the canonical report for a suite run on a shared context."""
    from .scenarios import scenario_to_dict

    exp = ctx.exp()
    grid = ctx.grid()
    suites = [plain(r.to_dict()) for r in results]
    passed = all(r.passed for r in results)
    return Report(
        scenario=plain(scenario_to_dict(ctx.scenario)),
        backend=ctx.backend,
        order=ctx.order,
        spatial_degree=ctx.spatial_degree,
        grid=list(grid.sizes) if grid is not None else None,
        calibration=plain(calibrate().to_dict()),
        coefficients=series_coefficients(exp),
        suites=suites,
        passed=passed,
        timing=timing,
    )


def dumps_canonical(doc, pretty=False):
    """Canonical bytes for a plain document: sorted keys, stable floats."""
    if pretty:
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def report_json(report, pretty=False, include_timing=False):
    return dumps_canonical(plain(report.to_dict(include_timing=include_timing)),
                           pretty=pretty)


def sign_table_csv(table):
    """Flatten an Einstein sign/monotonicity table to CSV."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "mu", "threshold", "terminates",
                     "k", "v_k", "product", "rate", "sign", "behavior", "predicted"])
    head = [table["n"], str(Fraction(table["mu"])), table["threshold"],
            int(bool(table["terminates"]))]
    for row in table["rows"]:
        writer.writerow(head + [
            row["k"], str(Fraction(row["v_k"])), row["product"],
            str(Fraction(row["rate"])), row["sign"], row["behavior"],
            row["predicted"],
        ])
    return buf.getvalue()


def report_csv(report):
    """Suite numbers in long form: suite, check, value."""
    suites = report["suites"] if isinstance(report, dict) else report.suites
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["suite", "passed", "skipped", "check", "value"])

    def emit(name, passed, skipped, prefix, tree):
        if isinstance(tree, dict):
            for k in sorted(tree):
                emit(name, passed, skipped, prefix + (str(k),), tree[k])
        elif isinstance(tree, (list, tuple)):
            for i, v in enumerate(tree):
                emit(name, passed, skipped, prefix + (str(i),), v)
        else:
            writer.writerow([name, int(passed), int(skipped), ".".join(prefix), tree])

    for s in suites:
        emit(s["name"], s["passed"], s["skipped"], (), s["numbers"])
    return buf.getvalue()
