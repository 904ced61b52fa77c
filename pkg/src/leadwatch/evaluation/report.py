"""Render coverage and agreement tables (markdown, CSV or LaTeX rows).

Ratios get 3 decimals and percentages 1, both rounded half up; undefined
values print as ``n/a``.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Mapping

from .kappa import PairwiseKappa
from .metrics import AgreementReport, CoverageReport, round_half_up

COVERAGE_HEADER = ("Model", "TP", "FP", "FN", "FP%", "FN%", "Precision", "Recall", "F1")
AGREEMENT_HEADER = ("Model", "N", "MAE", "RMSE", "R^2", "Pearson r", "Accuracy", "±1 Acc")
NA = "n/a"


def fmt_ratio(x: float | None) -> str:
    return NA if x is None else f"{round_half_up(x, 3):.3f}"


def fmt_pct(x: float | None) -> str:
    return NA if x is None else f"{round_half_up(x, 1):.1f}"


def coverage_row(label: str, r: CoverageReport) -> list[str]:
    return [
        label, str(r.tp), str(r.fp), str(r.fn), fmt_pct(r.fp_pct), fmt_pct(r.fn_pct),
        fmt_ratio(r.precision), fmt_ratio(r.recall), fmt_ratio(r.f1),
    ]


def agreement_row(label: str, r: AgreementReport) -> list[str]:
    return [
        label, str(r.n), fmt_ratio(r.mae), fmt_ratio(r.rmse), fmt_ratio(r.r_squared),
        fmt_ratio(r.pearson_r), fmt_ratio(r.exact_accuracy), fmt_ratio(r.within_one_accuracy),
    ]


def _tex(cell: str) -> str:
    parts = []
    for part in cell.split("\\"):
        for ch in "&%$#_{}":
            part = part.replace(ch, "\\" + ch)
        parts.append(part.replace("^", r"\^{}").replace("~", r"\~{}").replace("±", r"$\pm$"))
    return r"\textbackslash{}".join(parts)


def _render(header: tuple[str, ...], rows: list[list[str]], fmt: str) -> str:
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "latex":
        lines = [" & ".join(map(_tex, header)) + r" \\", r"\hline"]
        lines += [" & ".join(map(_tex, r)) + r" \\" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


def table_report(
    coverage: Mapping[str, CoverageReport] | None = None,
    agreement: Mapping[str, AgreementReport] | None = None,
    fmt: str = "markdown",
) -> str:
    """Coverage table, agreement table, or both (coverage first), one row per model label."""
    parts = []
    if coverage is not None or agreement is None:
        rows = [coverage_row(k, v) for k, v in (coverage or {}).items()]
        parts.append(_render(COVERAGE_HEADER, rows, fmt))
    if agreement is not None:
        rows = [agreement_row(k, v) for k, v in agreement.items()]
        parts.append(_render(AGREEMENT_HEADER, rows, fmt))
    return "\n".join(parts)


def kappa_report(result: PairwiseKappa, fmt: str = "markdown") -> str:
    rows = [[a, b, str(result.overlap[(a, b)]), fmt_ratio(k)] for (a, b), k in result.pairs.items()]
    table = _render(("Annotator A", "Annotator B", "Items", "Kappa"), rows, fmt)
    if fmt == "csv":
        return table
    return table + f"\nmin kappa {fmt_ratio(result.min)}, max kappa {fmt_ratio(result.max)}\n"
