"""Threshold-filtered lead selection and digest rendering (markdown, CSV, JSONL).

CSV columns, in order::

    lead_id, name, newsworthiness_rating, description, ai_model_used,
    strengths, challenges, newsroom_impact, link_to_demo, is_original,
    comparison_to_other_use_cases, source_url, article_summary, run_id,
    first_seen, duplicate_of

Empty cells in the optional columns mean "absent". NUL characters are
dropped. ``is_original`` is
``true``/``false``; ratings are written with full precision so the file
round-trips through ``parse_csv``.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable
from dataclasses import dataclass
from datetime import datetime
from typing import Literal

from .errors import ConfigError
from .models import UseCase
from .store import LeadRecord, LeadStore, _parse_ts, _ts

Format = Literal["markdown", "csv", "jsonl"]
FORMATS: tuple[str, ...] = ("markdown", "csv", "jsonl")

CSV_COLUMNS = (
    "lead_id",
    "name",
    "newsworthiness_rating",
    "description",
    "ai_model_used",
    "strengths",
    "challenges",
    "newsroom_impact",
    "link_to_demo",
    "is_original",
    "comparison_to_other_use_cases",
    "source_url",
    "article_summary",
    "run_id",
    "first_seen",
    "duplicate_of",
)
_USE_CASE_COLUMNS = (
    "name", "description", "ai_model_used", "strengths", "challenges", "newsroom_impact",
    "link_to_demo", "comparison_to_other_use_cases",
)
_OPTIONAL = ("ai_model_used", "link_to_demo", "comparison_to_other_use_cases", "duplicate_of")


@dataclass(frozen=True)
class DigestSpec:
    threshold: float = 4.0
    since: datetime | None = None
    format: Format = "markdown"
    include_duplicates: bool = False

    def __post_init__(self) -> None:
        if not 1.0 <= self.threshold <= 5.0:
            raise ConfigError(f"digest threshold {self.threshold} outside [1, 5]")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown digest format {self.format!r}")


def sort_leads(leads: Iterable[LeadRecord]) -> list[LeadRecord]:
    """Order by rating desc, first_seen desc, then lead_id ascending."""
    ordered = sorted(leads, key=lambda l: l.lead_id)
    ordered.sort(key=lambda l: (l.use_case.newsworthiness_rating, l.first_seen), reverse=True)
    return ordered


def select_leads(store: LeadStore, spec: DigestSpec) -> list[LeadRecord]:
    leads = [
        l
        for l in store.leads(include_duplicates=spec.include_duplicates)
        if l.use_case.newsworthiness_rating >= spec.threshold
        and (spec.since is None or l.first_seen >= spec.since)
    ]
    return sort_leads(leads)


def _md_line(label: str, value: str | None) -> str | None:
    if value is None or not str(value).strip():
        return None
    return f"- **{label}:** {' '.join(str(value).split())}"


def render_markdown(leads: list[LeadRecord]) -> str:
    out = ["# Lead digest", ""]
    if not leads:
        out.append("No leads.")
        return "\n".join(out) + "\n"
    out.append(f"{len(leads)} lead{'s' if len(leads) != 1 else ''}.")
    for i, lead in enumerate(leads, 1):
        u = lead.use_case
        out += ["", f"## {i}. {u.name} ({u.newsworthiness_rating:.1f})", ""]
        lines = [
            _md_line("Newsworthiness", f"{u.newsworthiness_rating:.1f} / 5"),
            _md_line("Source", f"<{lead.source_url}>"),
            _md_line("Description", u.description),
            _md_line("Newsroom impact", u.newsroom_impact),
            _md_line("AI model", u.ai_model_used),
            _md_line("Strengths", u.strengths),
            _md_line("Challenges", u.challenges),
            _md_line("Demo", u.link_to_demo),
            _md_line("Original", "yes" if u.is_original else "no"),
            _md_line("Comparison", u.comparison_to_other_use_cases),
            _md_line("Duplicate of", lead.duplicate_of),
            _md_line("First seen", _ts(lead.first_seen)),
        ]
        out += [l for l in lines if l is not None]
    return "\n".join(out) + "\n"


def _csv_row(lead: LeadRecord) -> list[str]:
    u = lead.use_case
    row = {c: getattr(u, c) or "" for c in _USE_CASE_COLUMNS}
    row.update(
        lead_id=lead.lead_id,
        newsworthiness_rating=repr(u.newsworthiness_rating),
        is_original="true" if u.is_original else "false",
        source_url=lead.source_url,
        article_summary=lead.article_summary,
        run_id=lead.run_id,
        first_seen=_ts(lead.first_seen),
        duplicate_of=lead.duplicate_of or "",
    )
    # the csv module cannot write NUL, so it is dropped
    return [row[c].replace("\x00", "") for c in CSV_COLUMNS]


def render_csv(leads: list[LeadRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_ALL, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for lead in leads:
        writer.writerow(_csv_row(lead))
    return buf.getvalue()


def render_jsonl(leads: list[LeadRecord]) -> str:
    return "".join(json.dumps(l.to_dict(), ensure_ascii=False) + "\n" for l in leads)


def render_digest(leads: list[LeadRecord], format: str) -> str:
    if format == "markdown":
        return render_markdown(leads)
    if format == "csv":
        return render_csv(leads)
    if format == "jsonl":
        return render_jsonl(leads)
    raise ConfigError(f"unknown digest format {format!r}; expected one of {', '.join(FORMATS)}")


def parse_csv(text: str) -> list[LeadRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    leads = []
    for row in reader:
        fields = {c: (row[c] or None) if c in _OPTIONAL else row[c] for c in CSV_COLUMNS}
        use_case = UseCase(
            name=fields["name"],
            description=fields["description"],
            ai_model_used=fields["ai_model_used"],
            strengths=fields["strengths"],
            challenges=fields["challenges"],
            newsroom_impact=fields["newsroom_impact"],
            link_to_demo=fields["link_to_demo"],
            is_original=fields["is_original"] == "true",
            comparison_to_other_use_cases=fields["comparison_to_other_use_cases"],
            newsworthiness_rating=float(fields["newsworthiness_rating"]),
        )
        leads.append(
            LeadRecord(
                lead_id=fields["lead_id"],
                use_case=use_case,
                source_url=fields["source_url"],
                article_summary=fields["article_summary"],
                run_id=fields["run_id"],
                first_seen=_parse_ts(fields["first_seen"]),
                duplicate_of=fields["duplicate_of"],
            )
        )
    return leads


def parse_jsonl(text: str) -> list[LeadRecord]:
    # split on "\n" only: str.splitlines would also break inside strings holding U+0085 or U+2028
    return [LeadRecord.from_dict(json.loads(line)) for line in text.split("\n") if line.strip()]
