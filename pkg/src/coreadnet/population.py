"""Population selection by monthly read rate and ranked sampling.

Users qualify when their monthly read rate falls inside a closed band
(default 10 to 100 reads/month); the analysis sample is the top-N of the
qualifying users ordered by total reads.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping

from .logstore import ReadProfile


class RateBasis(Enum):
    """Denominator used for the reads-per-month rate."""

    MEAN_OVER_ACTIVE_MONTHS = "active"
    MEAN_OVER_FULL_INTERVAL = "full"


@dataclass(frozen=True)
class PopulationRule:
    """Closed monthly-rate band a user must fall in to participate."""

    min_rate: float = 10.0
    max_rate: float = 100.0
    rate_basis: RateBasis = RateBasis.MEAN_OVER_ACTIVE_MONTHS

    def __post_init__(self) -> None:
        if not 0 < self.min_rate < self.max_rate:
            raise ValueError(
                f"need 0 < min_rate < max_rate, got [{self.min_rate}, {self.max_rate}]"
            )


def _month_ordinal(month_key: str) -> int:
    year, month = month_key.split("-")
    return int(year) * 12 + int(month) - 1


def _span_months(month_keys) -> int:
    """Number of calendar months from the earliest to the latest key, inclusive."""
    ordinals = [_month_ordinal(m) for m in month_keys]
    return max(ordinals) - min(ordinals) + 1


def monthly_rate(
    profile: ReadProfile,
    basis: RateBasis,
    interval_months: int | None = None,
) -> float:
    """Reads per month for one profile under the declared basis.

    MEAN_OVER_ACTIVE_MONTHS divides total reads by the number of months with
    at least one read. MEAN_OVER_FULL_INTERVAL divides by ``interval_months``;
    when that is None the profile's own month span is used.
    """
    if basis is RateBasis.MEAN_OVER_ACTIVE_MONTHS:
        active = sum(1 for count in profile.monthly_counts.values() if count > 0)
        if active == 0:
            return 0.0
        return profile.total_reads / active
    if interval_months is None:
        interval_months = _span_months(profile.monthly_counts.keys())
    if interval_months <= 0:
        raise ValueError(f"interval_months must be positive, got {interval_months}")
    return profile.total_reads / interval_months


def filter_population(
    profiles: Mapping[str, ReadProfile],
    rule: PopulationRule | None = None,
    interval_months: int | None = None,
) -> dict[str, ReadProfile]:
    """Retain exactly the users whose monthly rate lies in the rule's band.

    For MEAN_OVER_FULL_INTERVAL the interval defaults to the month span
    covered by the whole input (earliest to latest month across all
    profiles), so sparse readers are averaged over the full observation
    window rather than just their own active stretch.
    """
    if rule is None:
        rule = PopulationRule()
    if interval_months is None and rule.rate_basis is RateBasis.MEAN_OVER_FULL_INTERVAL:
        all_months = [m for p in profiles.values() for m in p.monthly_counts.keys()]
        interval_months = _span_months(all_months) if all_months else 1
    retained = {}
    for cookie_id, profile in profiles.items():
        rate = monthly_rate(profile, rule.rate_basis, interval_months)
        if rule.min_rate <= rate <= rule.max_rate:
            retained[cookie_id] = profile
    if profiles and not retained:
        warnings.warn("population rule retained no users", stacklevel=2)
    return retained


@dataclass
class Sample:
    """Ranked analysis sample with the user-index <-> cookie-ID mapping.

    ``users`` is ordered by total reads descending (ties by cookie ID
    ascending); ``index_of`` maps each cookie ID to its 1-based rank, the
    index used in exported tables. Matrix rows downstream use rank - 1.
    """

    users: list[str]
    index_of: dict[str, int]
    profiles: dict[str, ReadProfile]

    @property
    def size(self) -> int:
        return len(self.users)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["index", "cookie_id", "total_reads"])
            for i, cookie_id in enumerate(self.users, start=1):
                writer.writerow([i, cookie_id, self.profiles[cookie_id].total_reads])

    def to_json_dict(self) -> dict:
        return {
            "users": list(self.users),
            "profiles": {c: self.profiles[c].to_json_dict() for c in self.users},
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Sample":
        users = list(data["users"])
        profiles = {
            c: ReadProfile.from_json_dict(c, data["profiles"][c]) for c in users
        }
        return cls(users, {c: i for i, c in enumerate(users, start=1)}, profiles)


def draw_sample(population: Mapping[str, ReadProfile], n_s: int) -> Sample:
    """Take the top ``n_s`` users by total reads (ties by cookie ID).

    Returns the whole population when it has fewer than ``n_s`` users; the
    actual size is ``sample.size``. Deterministic for identical inputs.
    """
    if n_s < 2:
        raise ValueError(f"sample size must be at least 2, got {n_s}")
    if len(population) < 2:
        raise ValueError(
            f"population has {len(population)} user(s); "
            "spectral analysis needs at least 2"
        )
    ranked = sorted(population.values(), key=lambda p: (-p.total_reads, p.cookie_id))
    chosen = ranked[: min(n_s, len(ranked))]
    users = [p.cookie_id for p in chosen]
    return Sample(
        users=users,
        index_of={c: i for i, c in enumerate(users, start=1)},
        profiles={p.cookie_id: p for p in chosen},
    )
