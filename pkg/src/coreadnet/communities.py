"""Eigenspace projection, sphere neighborhoods, and community paper reports.

Each user's row of the normalized co-read matrix is projected onto the
leading orthonormal eigenvectors, giving a low-dimensional point cloud.
Communities are probed by hand: pick a point, take every user within a
Euclidean radius, and map the neighborhood back to its union of papers,
filtered by citation count.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .coread import CoreadMatrices
from .population import Sample
from .spectra import SpectralSummary

# Above this point count sphere queries go through a k-d tree.
LINEAR_SCAN_LIMIT = 100_000


@dataclass
class ProjectionCloud:
    """Per-user coordinates on the top-k eigenvectors.

    ``coords[u, i]`` is the dot product of user u's row of N with the rank
    i+1 eigenvector; row u belongs to ``users[u]``.
    """

    k: int
    coords: np.ndarray
    users: list[str]
    index_of: dict[str, int]

    @property
    def n_points(self) -> int:
        return len(self.users)


@dataclass
class CitationTable:
    """Bibcode -> citation count; unknown bibcodes count as zero."""

    counts: dict[str, int]

    def __post_init__(self) -> None:
        for bibcode, count in self.counts.items():
            if count < 0:
                raise ValueError(f"negative citation count for {bibcode}: {count}")

    def get(self, bibcode: str) -> int:
        return self.counts.get(bibcode, 0)

    @classmethod
    def from_tsv(cls, path: str | Path) -> "CitationTable":
        """Load a 2-column tab-separated "bibcode<TAB>count" file."""
        counts: dict[str, int] = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split("\t")
                if len(fields) != 2:
                    raise ValueError(
                        f"{path}:{lineno}: expected 'bibcode<TAB>count', got {line!r}"
                    )
                counts[fields[0]] = int(fields[1])
        return cls(counts)


@dataclass
class PaperEntry:
    bibcode: str
    citations: int
    readers: int


@dataclass
class CommunityReport:
    """Papers shared by the users inside one sphere neighborhood."""

    center: tuple[float, ...] | None
    radius: float | None
    member_users: list[str]
    papers: list[PaperEntry]
    min_citations: int

    def to_json_dict(self) -> dict:
        return {
            "center": None if self.center is None else list(self.center),
            "radius": self.radius,
            "members": list(self.member_users),
            "min_citations": self.min_citations,
            "papers": [
                {"bibcode": p.bibcode, "citations": p.citations, "readers": p.readers}
                for p in self.papers
            ],
        }


def project(m: CoreadMatrices, summary: SpectralSummary, k: int = 3) -> ProjectionCloud:
    """Project each user's normalized co-read row onto the top-k eigenvectors."""
    n = m.n_users
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if summary.eigenvectors.shape[1] < k:
        raise ValueError(
            f"summary holds only {summary.eigenvectors.shape[1]} eigenvectors, need {k}"
        )
    basis = summary.eigenvectors[:, :k]
    if m.N is not None:
        coords = m.N @ basis
    else:
        coords = m.normalized_rows() @ basis
    return ProjectionCloud(
        k=k,
        coords=np.asarray(coords, dtype=np.float64),
        users=list(m.users),
        index_of={c: i for i, c in enumerate(m.users, start=1)},
    )


def sphere_query(
    cloud: ProjectionCloud, center: Sequence[float], radius: float
) -> list[int]:
    """All user rows within Euclidean ``radius`` of ``center`` (boundary
    inclusive), sorted by distance ascending, ties by row index."""
    center = np.asarray(center, dtype=np.float64)
    if center.shape != (cloud.k,):
        raise ValueError(
            f"center has dimension {center.size}, cloud has k={cloud.k}"
        )
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    if cloud.n_points <= LINEAR_SCAN_LIMIT:
        dists = np.linalg.norm(cloud.coords - center, axis=1)
        hits = np.flatnonzero(dists <= radius)
    else:
        tree = cKDTree(cloud.coords)
        hits = np.asarray(tree.query_ball_point(center, radius), dtype=np.int64)
        dists = np.linalg.norm(cloud.coords[hits] - center, axis=1) if hits.size else np.array([])
        dists_full = np.empty(cloud.n_points)
        dists_full[hits] = dists
        dists = dists_full
    order = sorted(hits.tolist(), key=lambda i: (dists[i], i))
    return [int(i) for i in order]


def community_report(
    cloud: ProjectionCloud,
    users: Sequence[int],
    sample: Sample,
    citations: CitationTable | None = None,
    min_citations: int = 0,
    *,
    center: Sequence[float] | None = None,
    radius: float | None = None,
) -> CommunityReport:
    """Union the neighborhood's read sets into a citation-filtered paper list.

    Papers are sorted by citation count descending, then by reader count
    within the neighborhood descending, then bibcode ascending. When the
    sphere that produced ``users`` is passed along, membership is re-checked
    against it.
    """
    if not users:
        raise ValueError(
            "no users in the neighborhood: enlarge the radius or move the center"
        )
    if citations is None:
        citations = CitationTable({})
    if center is not None and radius is not None:
        dists = np.linalg.norm(cloud.coords[list(users)] - np.asarray(center), axis=1)
        if (dists > radius).any():
            raise ValueError("a listed user lies outside the stated sphere")
    member_ids = [cloud.users[i] for i in users]
    reader_counts: dict[str, int] = {}
    for cookie_id in member_ids:
        for bibcode in sample.profiles[cookie_id].papers:
            reader_counts[bibcode] = reader_counts.get(bibcode, 0) + 1
    entries = [
        PaperEntry(bibcode, citations.get(bibcode), readers)
        for bibcode, readers in reader_counts.items()
        if citations.get(bibcode) >= min_citations
    ]
    entries.sort(key=lambda p: (-p.citations, -p.readers, p.bibcode))
    return CommunityReport(
        center=None if center is None else tuple(float(c) for c in center),
        radius=None if radius is None else float(radius),
        member_users=member_ids,
        papers=entries,
        min_citations=min_citations,
    )
