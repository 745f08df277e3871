"""JSON-lines trace persistence for solve reports.

One record per iterate plus a header and a summary; traces are
byte-deterministic for a fixed run configuration (timing goes to logs, not
to the trace). A CSV emitter is provided for plotting.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .composite import IterateRecord, SolveReport

__all__ = ["write_trace", "read_trace", "report_to_lines", "lines_to_report", "export_csv"]


def report_to_lines(report: SolveReport) -> list[str]:
    header = {
        "type": "header",
        "problem": report.problem,
        "mode": report.mode,
        "eta": report.eta,
        "l": report.l,
        "beta": report.beta,
        "seed": report.seed,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for rec in report.iterates:
        doc = {"type": "iterate", **rec.to_json_dict()}
        lines.append(json.dumps(doc, sort_keys=True))
    summary = {
        "type": "summary",
        "x_final": np.atleast_1d(report.x_final).tolist(),
        "f_final": report.f_final,
        "f_star_estimate": report.f_star_estimate,
        "cumulative_step_sq": report.cumulative_step_sq,
        "stop_reason": report.stop_reason,
        "iterations": len(report.iterates),
        "final_certificate": report.iterates[-1].certificate.to_json_dict() if report.iterates else None,
    }
    lines.append(json.dumps(summary, sort_keys=True))
    return lines


def lines_to_report(lines: list[str]) -> SolveReport:
    docs = [json.loads(line) for line in lines if line.strip()]
    if not docs or docs[0].get("type") != "header" or docs[-1].get("type") != "summary":
        raise ValueError("malformed trace: expected a header line and a summary line")
    header, summary = docs[0], docs[-1]
    records = []
    for doc in docs[1:-1]:
        if doc.get("type") != "iterate":
            raise ValueError(f"malformed trace: unexpected record type {doc.get('type')!r}")
        records.append(IterateRecord.from_json_dict(doc))
    return SolveReport(
        problem=header["problem"],
        mode=header["mode"],
        eta=header["eta"],
        l=header["l"],
        beta=header["beta"],
        iterates=tuple(records),
        x_final=np.asarray(summary["x_final"], dtype=float),
        f_final=summary["f_final"],
        f_star_estimate=summary["f_star_estimate"],
        cumulative_step_sq=summary["cumulative_step_sq"],
        stop_reason=summary["stop_reason"],
        seed=header.get("seed", 0),
    )


def write_trace(report: SolveReport, path: str) -> None:
    with open(path, "w") as fh:
        for line in report_to_lines(report):
            fh.write(line + "\n")


def read_trace(path: str) -> SolveReport:
    with open(path) as fh:
        return lines_to_report(fh.readlines())


def export_csv(report: SolveReport, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "x", "f", "model_value", "step", "eps", "slope_bound", "ledger_slack"])
        for rec in report.iterates:
            writer.writerow([
                rec.k,
                " ".join(repr(v) for v in np.atleast_1d(rec.x)),
                repr(rec.f),
                repr(rec.model_value),
                repr(rec.step),
                repr(rec.eps),
                repr(rec.certificate.slope_bound),
                repr(rec.ledger_slack),
            ])
