"""Keyword-alert monitoring with LLM lead extraction, dedup, digests and evaluation."""

__version__ = "0.1.0"
