"""CSV rendering of run reports and benchmark results. Column layouts are fixed."""

from __future__ import annotations

import csv
import io
import os
from collections import Counter, defaultdict
from pathlib import Path

from .sim import RunReport

REPORT_COLUMNS = ("scope", "vm", "k", "value", "baseline", "relative_throughput")
QOS_COLUMNS = ("time_us", "vm", "l2_accesses", "bus_accesses", "work_us", "qos", "flag")
MODES_COLUMNS = ("time_us", "mode")
TRACE_COLUMNS = ("time_us", "event", "detail")
INSTRUMENTATION_COLUMNS = ("point", "name", "count", "mean_us", "max_us")
OVERHEAD_COLUMNS = ("period_us", "measured_max_us", "measured_overhead_pct",
                    "model_worst_case_us", "model_overhead_pct")

RUN_FILES = ("report.csv", "qos.csv", "modes.csv", "trace.csv")


def _f(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def report_rows(report: RunReport) -> list[tuple]:
    rows = []
    base = report.baseline
    for (vm, k), n in sorted(report.completions.items()):
        b = base.completions[(vm, k)] if base else ""
        rel = _f(report.relative_throughput((vm, k))) if base else ""
        rows.append(("task", vm, k, n, b, rel))
    for vm, work in sorted(report.work.items()):
        b = _f(base.work[vm]) if base else ""
        rel = _f(report.vm_relative_throughput(vm)) if base else ""
        rows.append(("vm", vm, "", _f(work), b, rel))
    return rows


def render_run(report: RunReport) -> dict[str, str]:
    """File name -> CSV text for the four deterministic run outputs."""
    qos_rows = [
        (w.time, w.vm, _f(w.events.l2_accesses), _f(w.events.bus_accesses), _f(w.work),
         _f(w.qos), "" if w.flag is None else w.flag.name)
        for w in report.windows
    ]
    return {
        "report.csv": to_csv(REPORT_COLUMNS, report_rows(report)),
        "qos.csv": to_csv(QOS_COLUMNS, qos_rows),
        "modes.csv": to_csv(MODES_COLUMNS, report.modes),
        "trace.csv": to_csv(TRACE_COLUMNS, report.trace),
    }


def render_instrumentation(rows) -> str:
    return to_csv(INSTRUMENTATION_COLUMNS, [(i, n, c, _f(mean), _f(mx)) for i, n, c, mean, mx in rows])


def write_run(report: RunReport, out_dir: str | os.PathLike) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in render_run(report).items():
        path = out / name
        path.write_text(text, encoding="utf-8", newline="")
        written.append(path)
    # wall-clock timings: not byte-stable, kept apart from the four files above
    path = out / "instrumentation.csv"
    path.write_text(render_instrumentation(report.instrumentation), encoding="utf-8", newline="")
    written.append(path)
    return written


def readto_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summarize(out_dir: str | os.PathLike) -> str:
    """Plain-text summary of a directory written by ``write_run``."""
    out = Path(out_dir)
    lines = []
    rows = readto_csv(out / "report.csv")
    lines.append("task throughput (completions / baseline):")
    for r in rows:
        if r["scope"] == "task":
            rel = r["relative_throughput"]
            rel = f"{float(rel):.3f}" if rel else "n/a"
            lines.append(f"  {r['vm']}:{r['k']:<3} {r['value']:>8} / {r['baseline'] or '-':>8}  {rel}")
    lines.append("vm throughput (work relative to baseline):")
    for r in rows:
        if r["scope"] == "vm":
            rel = r["relative_throughput"]
            lines.append(f"  vm {r['vm']}: {float(rel):.3f}" if rel else f"  vm {r['vm']}: n/a")
    modes = readto_csv(out / "modes.csv")
    if modes:
        counts = Counter(int(r["mode"]) for r in modes)
        lines.append("mode occupancy (fraction of windows):")
        for m in sorted(counts):
            lines.append(f"  mode {m}: {counts[m] / len(modes):.3f}")
    qos = defaultdict(list)
    for r in readto_csv(out / "qos.csv"):
        if r["qos"]:
            qos[int(r["vm"])].append(float(r["qos"]))
    if qos:
        lines.append("mean QoS per monitored VM:")
        for vm in sorted(qos):
            vals = qos[vm]
            lines.append(f"  vm {vm}: mean {sum(vals) / len(vals):.2f}  min {min(vals):.2f}")
    return "\n".join(lines) + "\n"
