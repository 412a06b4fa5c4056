"""Synthetic usage-log generator with preferential-attachment readership.

Regular users draw a read count, then pick papers one at a time with
probability proportional to (readers so far + 1) ** attachment_bias, so
popular papers accumulate readers the way edges accumulate in a growing
scale-free graph. A configurable batch of one-shot noise users (1-3 uniform
reads) is appended to exercise the population filter. Output is the exact
log format the parser consumes, and the generator keeps the intended
per-user ground truth so the whole pipeline can be checked round-trip.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from datetime import datetime, timedelta, timezone
from typing import Mapping

import numpy as np

from .logstore import DEFAULT_JOURNAL_TAGS, DedupPeriod, dedup_reads, parse_events

ACCESS_TYPES = ("ABSTRACT", "FULLTEXT", "CITATIONS")

MAX_DIFFS_REPORTED = 20


class SynthConfigError(ValueError):
    """Invalid generator configuration."""


@dataclass(frozen=True)
class SynthConfig:
    """Generator knobs; the seed fully determines the output bytes."""

    n_users: int = 2000
    n_papers: int = 5000
    reads_mean: float = 40.0
    reads_dispersion: float = 5.0
    attachment_bias: float = 1.0
    noise_users: int = 100
    months: int = 3
    seed: int = 0
    start_month: str = "2005-01"

    def __post_init__(self) -> None:
        if self.n_users < 1 or self.n_papers < 1:
            raise SynthConfigError("n_users and n_papers must be positive")
        if self.reads_mean < 1:
            raise SynthConfigError(f"reads_mean must be at least 1, got {self.reads_mean}")
        if self.reads_dispersion < 0:
            raise SynthConfigError("reads_dispersion must be nonnegative")
        if self.attachment_bias < 0:
            raise SynthConfigError("attachment_bias must be nonnegative")
        if self.noise_users < 0:
            raise SynthConfigError("noise_users must be nonnegative")
        if self.months < 1:
            raise SynthConfigError("months must be positive")
        try:
            year, month = self.start_month.split("-")
            datetime(int(year), int(month), 1)
        except (ValueError, TypeError) as err:
            raise SynthConfigError(f"start_month must be YYYY-MM: {self.start_month!r}") from err

    def to_json_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SynthConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class SynthUserTruth:
    papers: list[str]
    read_count: int
    is_noise: bool


@dataclass
class SynthTruth:
    """Intended per-user read sets, recorded before serialization."""

    users: dict[str, SynthUserTruth]

    def to_json_dict(self) -> dict:
        return {
            cookie_id: {
                "papers": truth.papers,
                "read_count": truth.read_count,
                "is_noise": truth.is_noise,
            }
            for cookie_id, truth in sorted(self.users.items())
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "SynthTruth":
        return cls(
            users={
                cookie_id: SynthUserTruth(
                    papers=list(entry["papers"]),
                    read_count=int(entry["read_count"]),
                    is_noise=bool(entry["is_noise"]),
                )
                for cookie_id, entry in data.items()
            }
        )


@dataclass
class RoundtripResult:
    ok: bool
    diffs: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _bibcode_for(paper_id: int) -> str:
    # 19 characters: year + 5-char journal tag + zero-padded id + author initial
    tag = DEFAULT_JOURNAL_TAGS[paper_id % len(DEFAULT_JOURNAL_TAGS)]
    return f"2005{tag}{paper_id:09d}R"


def _draw_read_counts(rng: np.random.Generator, config: SynthConfig) -> np.ndarray:
    if config.reads_dispersion == 0:
        counts = np.full(config.n_users, round(config.reads_mean), dtype=np.int64)
    else:
        raw = rng.normal(config.reads_mean, config.reads_dispersion, config.n_users)
        counts = np.maximum(np.rint(raw).astype(np.int64), 1)
    if counts.max() > config.n_papers:
        raise SynthConfigError(
            f"a user drew {counts.max()} reads but only {config.n_papers} papers exist"
        )
    return counts


def _pick_papers(
    rng: np.random.Generator,
    popularity: np.ndarray,
    count: int,
    bias: float,
) -> list[int]:
    """Sequential weighted picks without replacement.

    Weight of paper p is (popularity[p] + 1) ** bias; the +1 keeps unread
    papers reachable. Already-picked papers drop to weight zero.
    """
    if bias == 0.0:
        weights = np.ones(popularity.size, dtype=np.float64)
    elif bias == 1.0:
        weights = popularity + 1.0
    else:
        weights = (popularity + 1.0) ** bias
    chosen: list[int] = []
    for _ in range(count):
        cum = np.cumsum(weights)
        target = rng.random() * cum[-1]
        idx = int(np.searchsorted(cum, target, side="right"))
        idx = min(idx, weights.size - 1)
        assert weights[idx] > 0.0
        chosen.append(idx)
        weights[idx] = 0.0
    return chosen


def _interval_bounds(config: SynthConfig) -> tuple[datetime, int]:
    year, month = (int(x) for x in config.start_month.split("-"))
    start = datetime(year, month, 1, tzinfo=timezone.utc)
    end_ordinal = year * 12 + (month - 1) + config.months
    end = datetime(end_ordinal // 12, end_ordinal % 12 + 1, 1, tzinfo=timezone.utc)
    return start, int((end - start).total_seconds())


def generate(config: SynthConfig) -> tuple[str, SynthTruth]:
    """Emit a parser-ready event log plus its ground truth.

    Deterministic: the same config (seed included) yields byte-identical
    text. Timestamps are spread uniformly over the configured months and the
    log is emitted in time order.
    """
    rng = np.random.default_rng(config.seed)
    start, interval_seconds = _interval_bounds(config)

    popularity = np.zeros(config.n_papers, dtype=np.float64)
    truth: dict[str, SynthUserTruth] = {}
    reads: list[tuple[str, int]] = []  # (cookie_id, paper_id) in generation order

    counts = _draw_read_counts(rng, config)
    for u in range(config.n_users):
        cookie_id = f"u{u + 1:05d}"
        picks = _pick_papers(rng, popularity, int(counts[u]), config.attachment_bias)
        popularity[picks] += 1.0
        truth[cookie_id] = SynthUserTruth(
            papers=sorted(_bibcode_for(p) for p in picks),
            read_count=len(picks),
            is_noise=False,
        )
        reads.extend((cookie_id, p) for p in picks)

    for j in range(config.noise_users):
        cookie_id = f"n{j + 1:05d}"
        k = min(int(rng.integers(1, 4)), config.n_papers)
        picks = _pick_papers(rng, popularity, k, bias=0.0)
        truth[cookie_id] = SynthUserTruth(
            papers=sorted(_bibcode_for(p) for p in picks),
            read_count=len(picks),
            is_noise=True,
        )
        reads.extend((cookie_id, p) for p in picks)

    events = []
    for cookie_id, paper_id in reads:
        offset = int(rng.integers(0, interval_seconds))
        ts = start + timedelta(seconds=offset)
        access = ACCESS_TYPES[int(rng.integers(0, len(ACCESS_TYPES)))]
        events.append((ts, cookie_id, _bibcode_for(paper_id), access))
    events.sort(key=lambda e: (e[0], e[1], e[2]))

    lines = ["# timestamp\tcookie_id\tbibcode\taccess_type"]
    lines.extend(
        f"{ts:%Y-%m-%dT%H:%M:%S}Z\t{cookie}\t{bibcode}\t{access}"
        for ts, cookie, bibcode, access in events
    )
    return "\n".join(lines) + "\n", SynthTruth(truth)


def roundtrip_check(config: SynthConfig) -> RoundtripResult:
    """Generate, re-parse, dedup over the full range, and diff against truth."""
    log_text, truth = generate(config)
    return verify_against_truth(log_text, truth)


def verify_against_truth(log_text: str, truth: SynthTruth) -> RoundtripResult:
    """Check that a serialized log reproduces the generator's ground truth."""
    parsed = parse_events(log_text.splitlines())
    diffs: list[str] = []
    if parsed.malformed_count:
        diffs.append(f"{parsed.malformed_count} malformed line(s) in generated log")
    profiles = dedup_reads(parsed.events, period=DedupPeriod.FULL_RANGE)

    missing = sorted(set(truth.users) - set(profiles))
    extra = sorted(set(profiles) - set(truth.users))
    diffs.extend(f"user {c} missing from parsed log" for c in missing)
    diffs.extend(f"unexpected user {c} in parsed log" for c in extra)
    for cookie_id in sorted(set(truth.users) & set(profiles)):
        expected = set(truth.users[cookie_id].papers)
        got = profiles[cookie_id].papers
        if expected != got:
            gained = sorted(got - expected)
            lost = sorted(expected - got)
            diffs.append(f"user {cookie_id}: papers differ (+{gained} -{lost})")
        elif profiles[cookie_id].total_reads != truth.users[cookie_id].read_count:
            diffs.append(
                f"user {cookie_id}: read count {profiles[cookie_id].total_reads} "
                f"!= intended {truth.users[cookie_id].read_count}"
            )
        if len(diffs) > MAX_DIFFS_REPORTED:
            diffs.append("... diff list truncated")
            break
    return RoundtripResult(ok=not diffs, diffs=diffs)
