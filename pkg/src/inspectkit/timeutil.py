"""Canonical timestamp handling: ISO-8601, always UTC, "Z" suffix."""

from __future__ import annotations

from datetime import datetime, timezone


def format_timestamp(dt: datetime) -> str:
    """Canonical wire form. Aware datetimes are converted to UTC."""
    if dt.tzinfo is None:
        raise ValueError("naive datetime (must be UTC-aware)")
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    """Inverse of :func:`format_timestamp`; accepts any ISO-8601 offset."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        raise ValueError(f"naive timestamp: {text!r}")
    return dt.astimezone(timezone.utc)
