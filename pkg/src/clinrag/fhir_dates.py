"""Lenient parsing for FHIR date / dateTime strings."""

from __future__ import annotations

import datetime as dt


def parse(value: str | None) -> dt.datetime | None:
    """Parse a FHIR date(Time) string to an aware UTC datetime, or None.

    Accepts YYYY, YYYY-MM, YYYY-MM-DD and full dateTime with offset or Z.
    Values without an offset are assumed UTC.
    """
    if not value:
        return None
    text = str(value).strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    for candidate in (text, text + "-01-01", text + "-01"):
        try:
            parsed = dt.datetime.fromisoformat(candidate)
            break
        except ValueError:
            continue
    else:
        try:
            parsed = dt.datetime.combine(dt.date.fromisoformat(text), dt.time.min)
        except ValueError:
            return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=dt.timezone.utc)
    return parsed.astimezone(dt.timezone.utc)
