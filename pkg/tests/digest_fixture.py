"""Five fixed leads used by the digest golden files."""

from datetime import datetime, timezone

from leadwatch.models import UseCase
from leadwatch.store import LeadRecord

T = datetime(2025, 9, 3, 7, 5, 12, 345678, tzinfo=timezone.utc)


def five_leads() -> list[LeadRecord]:
    specs = [
        ("Council meeting summaries", 4.5, "https://www.niemanlab.org/2025/09/council/", dict(
            description="Drafts summaries of city council meetings for editor review.",
            ai_model_used="GPT-4o", strengths="Saves two hours per meeting",
            challenges="Hallucinated vote counts", newsroom_impact="Frees a reporter for enterprise work",
            is_original=True)),
        ("Archive chatbot", 4.0, "https://press.example.net/chatbot", dict(
            description='Answers reader questions, "grounded" in the archive.',
            link_to_demo="https://press.example.net/ask",
            comparison_to_other_use_cases="Similar to other archive bots, but with citations")),
        ("Automated sports previews", 3.0, "https://example.org/story?id=7", dict(
            description="Writes previews of high-school games, with\nline breaks in the text.")),
        ("Podcast transcription", 4.0, "https://news.example.com/transcripts", dict(
            description="Transcribes shows; adds chapter markers, speaker labels.")),
        ("Café comment moderation", 2.0, "https://news.example.com/caf%C3%A9-ai/", dict(
            description="Flags abusive comments for a human moderator.")),
    ]
    leads = []
    for i, (name, rating, url, kw) in enumerate(specs):
        uc = UseCase(name=name, newsworthiness_rating=rating, **kw)
        leads.append(LeadRecord.create(uc, url, f"Summary of article {i + 1}.", "run-fixture", T.replace(minute=i)))
    return leads
