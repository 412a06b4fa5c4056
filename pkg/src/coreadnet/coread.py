"""Co-read matrix construction from the user-paper incidence structure.

The co-read matrix R counts, for every user pair, the papers both have read
(the diagonal holds each user's own distinct-read count). The normalized
matrix N divides each row of R by that user's count, giving an asymmetric
matrix with unit diagonal. A brute-force builder over explicit set
intersections is kept as an independent oracle for the sparse path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .population import Sample

# Above this sample size the dense N matrix is not materialized.
DENSE_THRESHOLD = 5000

BRUTE_FORCE_GUARD = 500


@dataclass
class Incidence:
    """Inverted user-paper index for one sample.

    ``reader_lists[j]`` holds the ascending 0-based user rows that read paper
    ``j`` (columns are bibcodes in ascending order); ``user_degrees[k]`` is
    user k's distinct-paper count.
    """

    users: list[str]
    paper_index: dict[str, int]
    reader_lists: list[list[int]]
    user_degrees: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_papers(self) -> int:
        return len(self.paper_index)


@dataclass
class CoreadMatrices:
    """Co-read matrix R, normalized matrix N, and user degrees.

    R is sparse CSR with integer entries; N is a dense float array, or None
    when the sample exceeds the dense threshold (consumers then work from R
    and ``degrees`` directly). Row/column k corresponds to ``users[k]``.
    """

    R: sparse.csr_array
    N: np.ndarray | None
    degrees: np.ndarray
    users: list[str]

    @property
    def n_users(self) -> int:
        return len(self.users)

    def normalized_rows(self) -> sparse.csr_array:
        """Row-normalized co-read matrix as sparse data (rows of N)."""
        inv = sparse.diags_array(1.0 / self.degrees.astype(float))
        return sparse.csr_array(inv @ self.R)


def build_incidence(sample: Sample) -> Incidence:
    """Invert the sample's read sets into per-paper reader lists."""
    if sample.size == 0:
        raise ValueError("sample is empty")
    papers = sorted({b for c in sample.users for b in sample.profiles[c].papers})
    paper_index = {b: j for j, b in enumerate(papers)}
    reader_lists: list[list[int]] = [[] for _ in papers]
    degrees = np.zeros(sample.size, dtype=np.int64)
    for row, cookie_id in enumerate(sample.users):
        profile = sample.profiles[cookie_id]
        if not profile.papers:
            raise ValueError(f"user {cookie_id} has an empty read set")
        degrees[row] = len(profile.papers)
        for bibcode in profile.papers:
            reader_lists[paper_index[bibcode]].append(row)
    for readers in reader_lists:
        readers.sort()
    return Incidence(list(sample.users), paper_index, reader_lists, degrees)


def build_coread(inc: Incidence, dense_threshold: int = DENSE_THRESHOLD) -> CoreadMatrices:
    """Build R = A @ A.T from the binary incidence A, then row-normalize.

    Accumulating co-reads through the sparse product costs the sum of squared
    reader-list lengths, which beats all-pairs set intersection on sparse
    data; the intersection path survives as ``brute_force_coread``.
    """
    lengths = [len(r) for r in inc.reader_lists]
    rows = np.fromiter(
        (u for readers in inc.reader_lists for u in readers),
        dtype=np.int64,
        count=sum(lengths),
    )
    cols = np.repeat(np.arange(inc.n_papers, dtype=np.int64), lengths)
    A = sparse.csr_array(
        (np.ones(rows.size, dtype=np.int64), (rows, cols)),
        shape=(inc.n_users, inc.n_papers),
    )
    R = sparse.csr_array(A @ A.T)
    R.sort_indices()
    degrees = R.diagonal().astype(np.int64)
    if (degrees == 0).any():
        bad = int(np.flatnonzero(degrees == 0)[0])
        raise ValueError(f"zero degree for user row {bad}: upstream invariant violated")
    if not np.array_equal(degrees, inc.user_degrees):
        raise ValueError("co-read diagonal disagrees with incidence degrees")
    N = R.toarray() / degrees[:, None] if inc.n_users <= dense_threshold else None
    return CoreadMatrices(R=R, N=N, degrees=degrees, users=list(inc.users))


def brute_force_coread(sample: Sample, guard: int = BRUTE_FORCE_GUARD) -> CoreadMatrices:
    """Oracle builder: pairwise set intersections over user read sets.

    Refuses samples above ``guard`` users (quadratic cost). Kept free of any
    shared code with ``build_coread`` so the two paths check each other.
    """
    n = sample.size
    if n > guard:
        raise ValueError(
            f"brute-force oracle refused: {n} users exceeds guard of {guard}"
        )
    read_sets = [sample.profiles[c].papers for c in sample.users]
    R = np.zeros((n, n), dtype=np.int64)
    for k in range(n):
        R[k, k] = len(read_sets[k])
        for l in range(k + 1, n):
            common = len(read_sets[k] & read_sets[l])
            R[k, l] = common
            R[l, k] = common
    degrees = np.diag(R).copy()
    if (degrees == 0).any():
        raise ValueError("zero degree in brute-force co-read")
    N = R / degrees[:, None]
    return CoreadMatrices(
        R=sparse.csr_array(R), N=N, degrees=degrees, users=list(sample.users)
    )


def export_coread(m: CoreadMatrices, path: str | Path) -> None:
    """Write R's upper triangle (diagonal included) as "k l r_kl", 1-based."""
    coo = m.R.tocoo()
    entries = sorted(
        (int(i) + 1, int(j) + 1, int(v))
        for i, j, v in zip(coo.row, coo.col, coo.data)
        if j >= i
    )
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for k, l, v in entries:
            handle.write(f"{k} {l} {v}\n")
