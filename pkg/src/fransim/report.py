"""CSV output of a ``MetricsReport`` and the plain-text summary.

CSV layout: optional ``# key=value`` metadata lines, a header row with
``CSV_COLUMNS``, then one row per (sweep value, variant, metric). Floats are
written with ``repr`` so reading a file back gives the exact values.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .sim import MetricRow, MetricsReport

CSV_COLUMNS = ("sweep_param", "sweep_value", "variant", "metric", "mean", "std_err", "n_reps")


def format_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    for key, value in report.metadata.items():
        buf.write(f"# {key}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([r.sweep_param, repr(float(r.sweep_value)), r.variant, r.metric,
                    repr(float(r.mean)), repr(float(r.std_err)), str(r.n_reps)])
    return buf.getvalue()


def write_csv(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(format_csv(report), encoding="utf-8")


def parse_csv(text: str) -> MetricsReport:
    lines = text.splitlines()
    metadata = {}
    while lines and lines[0].startswith("#"):
        key, _, value = lines.pop(0)[1:].strip().partition("=")
        metadata[key] = value
    reader = csv.reader(lines)
    header = next(reader, None)
    if tuple(header or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header!r}")
    rows = [MetricRow(p, float(v), var, m, float(mean), float(se), int(n))
            for p, v, var, m, mean, se, n in reader]
    return MetricsReport(rows=rows, metadata=metadata)


def read_csv(path: str | Path) -> MetricsReport:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


# -- summary -------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def _series(report: MetricsReport, variant: str) -> list[MetricRow]:
    return sorted(report.series(variant), key=lambda r: r.sweep_value)


def strictly_increasing(rows: list[MetricRow]) -> bool:
    return all(b.mean > a.mean for a, b in zip(rows, rows[1:]))


def separated(low: MetricRow, high: MetricRow, k: float = 3.0) -> bool:
    """``low`` below ``high`` with disjoint ``k``-SE intervals."""
    return low.mean + k * low.std_err < high.mean - k * high.std_err


def overhead_checks(report: MetricsReport) -> list[Check]:
    checks = []
    variants = report.variants()
    for v in variants:
        checks.append(Check(f"{v} overhead strictly increasing in {report.metadata.get('sweep_param', 'sweep')}",
                            strictly_increasing(_series(report, v))))
    for v in variants:
        if not v.startswith("fran/"):
            continue
        other = "non_fran/" + v.split("/", 1)[1]
        if other not in variants:
            continue
        bad = [a.sweep_value for a, b in zip(_series(report, v), _series(report, other)) if not separated(a, b)]
        checks.append(Check(f"{v} below {other} with disjoint 3-SE intervals", not bad,
                            f"fails at {bad}" if bad else ""))
    return checks


def utility_checks(report: MetricsReport, tolerated_dips: int = 1) -> list[Check]:
    """Scheme ordering and trend checks for variants named ``scheme@n_faps=N``."""
    groups = sorted({v.split("@", 1)[1] for v in report.variants() if "@" in v},
                    key=lambda g: int(g.split("=")[1]))
    checks = []
    for g in groups:
        prop, ex, nf = (_series(report, f"{s}@{g}") for s in ("proposed", "existing_fran", "non_fran"))
        order_bad = [p.sweep_value for p, e, n in zip(prop, ex, nf) if not p.mean >= e.mean >= n.mean]
        sep_bad = [p.sweep_value for p, n in zip(prop, nf) if not separated(n, p)]
        dips = sum(b.mean < a.mean for a, b in zip(prop, prop[1:]))
        checks.append(Check(f"{g}: proposed >= existing_fran >= non_fran", not order_bad,
                            f"fails at {order_bad}" if order_bad else ""))
        checks.append(Check(f"{g}: proposed above non_fran with disjoint 3-SE intervals", not sep_bad,
                            f"fails at {sep_bad}" if sep_bad else ""))
        checks.append(Check(f"{g}: proposed nondecreasing in F-UEs per F-AP (<= {tolerated_dips} dip)",
                            dips <= tolerated_dips, f"{dips} dips"))
    for a, b in zip(groups, groups[1:]):
        pa, pb = _series(report, f"proposed@{a}"), _series(report, f"proposed@{b}")
        bad = [x.sweep_value for x, y in zip(pa, pb) if not y.mean > x.mean]
        checks.append(Check(f"proposed increases from {a} to {b}", not bad, f"fails at {bad}" if bad else ""))
    return checks


def record_checks(report: MetricsReport) -> list[Check]:
    recs = [r for rs in report.records.values() for r in rs]
    checks = []
    if any(r.n_sessions for r in recs):
        bad = sum(r.scenario1 + r.scenario2 != r.total_handovers for r in recs)
        checks.append(Check("scenario 1 + scenario 2 = handovers in every replication", bad == 0,
                            f"{bad} replications differ" if bad else ""))
        fast = sum(r.fast_handovers.get("MRRH->FAP", 0) for r in recs if r.procedure == "fran")
        checks.append(Check("no MRRH->FAP handover by above-threshold F-UEs under fran", fast == 0,
                            f"{fast} found" if fast else ""))
    games = sum(r.games for r in recs)
    if games:
        conv = sum(r.converged for r in recs)
        verified = sum(r.ne_verified for r in recs)
        checks.append(Check("best-response convergence rate >= 95%", conv >= 0.95 * games,
                            f"{conv}/{games} = {conv / games:.4f}"))
        checks.append(Check("every converged profile is an eps-NE", verified == conv,
                            f"{verified}/{conv}"))
    return checks


def summary_checks(report: MetricsReport) -> list[Check]:
    metrics = {r.metric for r in report.rows}
    checks = []
    if "overhead_rate" in metrics:
        checks += overhead_checks(report)
    if "total_net_utility" in metrics:
        checks += utility_checks(report)
    return checks + record_checks(report)


def format_summary(report: MetricsReport, checks: Iterable[Check] | None = None) -> str:
    rows = report.rows
    out = [f"# {k}={v}" for k, v in report.metadata.items()]
    width = max((len(r.variant) for r in rows), default=7)
    out.append(f"{'value':>10}  {'variant':<{width}}  {'metric':<17}  mean +- SE (n)")
    for r in rows:
        se = "nan" if math.isnan(r.std_err) else f"{r.std_err:.6g}"
        out.append(f"{r.sweep_value:>10.6g}  {r.variant:<{width}}  {r.metric:<17}  "
                   f"{r.mean:.6g} +- {se} ({r.n_reps})")
    out.append("")
    recs = [r for rs in report.records.values() for r in rs]
    games = sum(r.games for r in recs)
    if games:
        # reported only: pricing makes powers strategic substitutes, so decreases are expected
        out.append(f"INFO best-response power decreases: {sum(r.monotone_violations for r in recs)} "
                   f"over {games} games")
    out.extend(c.line() for c in (summary_checks(report) if checks is None else checks))
    return "\n".join(out) + "\n"
