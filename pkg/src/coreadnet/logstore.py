"""Usage-log parsing and per-user read deduplication.

The input is a line-oriented event log (UTF-8, LF line endings) with four
tab-separated fields per record::

    2005-03-14T09:26:53Z<TAB>u_0042<TAB>2003ApJ...591.1220L<TAB>ABSTRACT

Lines starting with ``#`` are comments. Parsing tolerates a bounded fraction
of malformed lines; deduplication collapses repeat accesses of one article by
one user within a log period to a single read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

BIBCODE_LENGTH = 19
BIBCODE_YEAR_RANGE = (1800, 2100)
JOURNAL_TAG_WIDTH = 5

# Core astronomy journals, matched against bibcode columns 5-9.
DEFAULT_JOURNAL_TAGS = ("ApJ..", "ApJL.", "ApJS.", "AJ...", "A&A..", "MNRAS", "PASP.")

DEFAULT_MAX_MALFORMED_FRACTION = 0.10


class LogFormatError(ValueError):
    """Raised when too large a fraction of an event stream is malformed."""


class DedupPeriod(Enum):
    """Log period within which repeat accesses of one article collapse."""

    MONTH = "month"
    FULL_RANGE = "full-range"


@dataclass(frozen=True)
class AccessEvent:
    """One validated usage-log record."""

    timestamp: datetime
    cookie_id: str
    bibcode: str
    access_type: str

    @property
    def journal_tag(self) -> str:
        return self.bibcode[4:9]

    @property
    def month_key(self) -> str:
        """Calendar month of the access in UTC, as ``YYYY-MM``."""
        ts = self.timestamp
        return f"{ts.year:04d}-{ts.month:02d}"


@dataclass(frozen=True)
class JournalFilter:
    """Set of journal tags admitted into the analysis.

    Tags shorter than five characters are right-padded with ``.`` to the
    bibcode column width, so ``"AJ"`` and ``"AJ..."`` are equivalent.
    """

    journal_tags: tuple[str, ...]
    _tag_set: frozenset[str] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.journal_tags:
            raise ValueError("journal filter needs at least one tag")
        normalized = []
        for tag in self.journal_tags:
            if not tag or len(tag) > JOURNAL_TAG_WIDTH:
                raise ValueError(f"journal tag must be 1-{JOURNAL_TAG_WIDTH} characters: {tag!r}")
            padded = tag.ljust(JOURNAL_TAG_WIDTH, ".")
            if padded not in normalized:
                normalized.append(padded)
        object.__setattr__(self, "journal_tags", tuple(normalized))
        object.__setattr__(self, "_tag_set", frozenset(normalized))

    @classmethod
    def default(cls) -> "JournalFilter":
        return cls(DEFAULT_JOURNAL_TAGS)

    def admits(self, bibcode: str) -> bool:
        return bibcode[4:9] in self._tag_set


@dataclass
class ReadProfile:
    """Deduplicated reads of one user.

    ``papers`` is the set of distinct bibcodes read over the whole interval;
    ``monthly_counts`` maps ``YYYY-MM`` to the number of reads credited to
    that month under the active dedup period; ``total_reads`` equals the sum
    of the monthly counts.
    """

    cookie_id: str
    papers: set[str]
    monthly_counts: dict[str, int]
    total_reads: int

    def to_json_dict(self) -> dict:
        return {
            "papers": sorted(self.papers),
            "monthly_counts": dict(sorted(self.monthly_counts.items())),
            "total_reads": self.total_reads,
        }

    @classmethod
    def from_json_dict(cls, cookie_id: str, data: Mapping) -> "ReadProfile":
        return cls(
            cookie_id=cookie_id,
            papers=set(data["papers"]),
            monthly_counts=dict(data["monthly_counts"]),
            total_reads=int(data["total_reads"]),
        )


@dataclass
class ParseResult:
    """Events recovered from a stream plus malformed-line accounting."""

    events: list[AccessEvent]
    malformed_count: int = 0
    first_malformed_line: int | None = None

    def __iter__(self) -> Iterator[AccessEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)


def _parse_timestamp(token: str) -> datetime:
    """Parse an ISO-8601 timestamp, normalizing to UTC.

    Accepts a trailing ``Z`` (Python 3.10's ``fromisoformat`` does not) and
    explicit offsets; naive timestamps are taken as UTC.
    """
    if token.endswith("Z"):
        token = token[:-1] + "+00:00"
    ts = datetime.fromisoformat(token)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _valid_bibcode(token: str) -> bool:
    if len(token) != BIBCODE_LENGTH or any(c.isspace() for c in token):
        return False
    year = token[:4]
    if not year.isdigit():
        return False
    lo, hi = BIBCODE_YEAR_RANGE
    return lo <= int(year) <= hi


def parse_line(line: str) -> AccessEvent | None:
    """Parse one log record, or return None if it is malformed."""
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 4:
        return None
    raw_ts, cookie_id, bibcode, access_type = fields
    try:
        ts = _parse_timestamp(raw_ts)
    except ValueError:
        return None
    if not cookie_id or any(c.isspace() for c in cookie_id):
        return None
    if not _valid_bibcode(bibcode):
        return None
    if not access_type or any(c.isspace() for c in access_type):
        return None
    return AccessEvent(ts, cookie_id, bibcode, access_type)


def parse_events(
    stream: Iterable[str],
    max_malformed_fraction: float = DEFAULT_MAX_MALFORMED_FRACTION,
) -> ParseResult:
    """Parse a line-oriented event stream into AccessEvents, in stream order.

    Malformed lines are counted, not fatal, unless they exceed
    ``max_malformed_fraction`` of the records seen, in which case a
    LogFormatError naming the first offending line is raised. Comment lines
    (``#``) and blank lines are ignored entirely.
    """
    events: list[AccessEvent] = []
    malformed = 0
    first_bad: int | None = None
    total = 0
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        total += 1
        event = parse_line(line)
        if event is None:
            malformed += 1
            if first_bad is None:
                first_bad = lineno
        else:
            events.append(event)
    if total > 0 and malformed / total > max_malformed_fraction:
        raise LogFormatError(
            f"{malformed} of {total} records malformed "
            f"(exceeds {max_malformed_fraction:.0%} tolerance); "
            f"first malformed line: {first_bad}"
        )
    return ParseResult(events, malformed, first_bad)


def parse_log_file(
    path: str | Path,
    max_malformed_fraction: float = DEFAULT_MAX_MALFORMED_FRACTION,
) -> ParseResult:
    """Parse one log file; I/O errors propagate to the caller."""
    with open(path, encoding="utf-8", newline="\n") as handle:
        return parse_events(handle, max_malformed_fraction)


def dedup_reads(
    events: Iterable[AccessEvent],
    journal_filter: JournalFilter | None = None,
    period: DedupPeriod = DedupPeriod.MONTH,
) -> dict[str, ReadProfile]:
    """Collapse events into per-user read profiles.

    Multiple accesses of one article by one user within a dedup bucket count
    as a single read: under MONTH the bucket is the UTC calendar month, under
    FULL_RANGE it is the whole interval (the read is credited to the month of
    the earliest access). Events outside the journal filter are dropped, and
    users left with zero reads are omitted.
    """
    if journal_filter is None:
        journal_filter = JournalFilter.default()

    if period is DedupPeriod.MONTH:
        # user -> month -> set of papers read that month
        by_month: dict[str, dict[str, set[str]]] = {}
        for ev in events:
            if not journal_filter.admits(ev.bibcode):
                continue
            by_month.setdefault(ev.cookie_id, {}).setdefault(ev.month_key, set()).add(ev.bibcode)
        profiles = {}
        for cookie_id in sorted(by_month):
            months = by_month[cookie_id]
            papers: set[str] = set()
            for bucket in months.values():
                papers |= bucket
            monthly = {m: len(months[m]) for m in sorted(months)}
            profiles[cookie_id] = ReadProfile(cookie_id, papers, monthly, sum(monthly.values()))
        return profiles

    # FULL_RANGE: one read per (user, paper); earliest month gets the credit.
    earliest: dict[str, dict[str, str]] = {}
    for ev in events:
        if not journal_filter.admits(ev.bibcode):
            continue
        per_user = earliest.setdefault(ev.cookie_id, {})
        month = ev.month_key
        prev = per_user.get(ev.bibcode)
        if prev is None or month < prev:
            per_user[ev.bibcode] = month
    profiles = {}
    for cookie_id in sorted(earliest):
        first_months = earliest[cookie_id]
        monthly: dict[str, int] = {}
        for month in first_months.values():
            monthly[month] = monthly.get(month, 0) + 1
        monthly = dict(sorted(monthly.items()))
        profiles[cookie_id] = ReadProfile(
            cookie_id, set(first_months), monthly, len(first_months)
        )
    return profiles
