"""Spectrum of the normalized co-read matrix and derived metrics.

The asymmetric normalized matrix N = D^-1 R shares its eigenvalues with the
symmetric S = D^-1/2 R D^-1/2 (similarity transform by D^1/2), so the
spectrum is computed from S: guaranteed real, positive semidefinite, with an
orthonormal eigenvector basis. S is assembled entrywise as
r_kl / sqrt(d_k * d_l), which makes it exactly symmetric in floating point.

Derived metrics: the spectral density (normalized eigenvalue histogram), the
separation statistic (eps1 - eps2) / (eps2 - eps_min) measuring how far the
leading eigenvalue sits from the bulk, and the scaling exponent of eps1
against sample size.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .coread import DENSE_THRESHOLD, CoreadMatrices, build_coread, build_incidence
from .population import Sample, draw_sample

TRACE_RTOL = 1e-8
PSD_FLOOR = -1e-10
ORTHO_TOL = 1e-8
RESIDUAL_RTOL = 1e-7
RESIDUAL_PAIRS = 10

DENSITY_MIN_BINS = 10

# Number of leading eigenpairs kept on the iterative (above-threshold) path.
ITERATIVE_TOP_K = 50


class EigensolverError(RuntimeError):
    """Eigensolver failed to converge or produced an invalid spectrum."""


class UndefinedStatisticError(ValueError):
    """The separation statistic is not defined for this spectrum."""


@dataclass
class SpectralSummary:
    """Real spectrum of the normalized co-read matrix.

    ``eigenvalues`` are sorted descending; ``eigenvectors[:, i]`` is the
    orthonormal eigenvector of S paired with ``eigenvalues[i]``, signed so
    its largest-magnitude component is positive. ``full`` is False when only
    the leading part of the spectrum was computed.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_s: int
    epsilon1: float = field(init=False)
    full: bool = True

    def __post_init__(self) -> None:
        self.epsilon1 = float(self.eigenvalues[0])

    @property
    def trace_residual(self) -> float:
        """Relative deviation of the eigenvalue sum from its exact value n_s."""
        return abs(float(self.eigenvalues.sum()) - self.n_s) / self.n_s


@dataclass
class SpectralDensity:
    """Unit-integral histogram of the eigenvalues."""

    bin_edges: np.ndarray
    density: np.ndarray


@dataclass
class ScalingFit:
    """Log-log OLS fit of the leading eigenvalue against sample size."""

    points: list[tuple[int, float]]
    alpha: float
    log_intercept: float
    r_squared: float


def _symmetrized(m: CoreadMatrices, dense: bool):
    """S = D^-1/2 R D^-1/2 with exact floating-point symmetry.

    Each entry is r_kl / sqrt(d_k * d_l); the product d_k * d_l is symmetric
    bit-for-bit, so s_kl == s_lk exactly on both the dense and sparse paths.
    """
    d = m.degrees.astype(np.float64)
    if dense:
        R = m.R.toarray().astype(np.float64)
        return R / np.sqrt(np.outer(d, d))
    coo = m.R.tocoo()
    data = coo.data.astype(np.float64) / np.sqrt(d[coo.row] * d[coo.col])
    return sparse.csr_array(
        sparse.coo_array((data, (coo.row, coo.col)), shape=coo.shape)
    )


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude component is positive."""
    lead = np.abs(vectors).argmax(axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _validate_summary(summary: SpectralSummary, S) -> None:
    eigs = summary.eigenvalues
    vecs = summary.eigenvectors
    if summary.full:
        if summary.trace_residual > TRACE_RTOL:
            raise EigensolverError(
                f"trace not conserved: sum(eig)={eigs.sum()!r} vs n_s={summary.n_s} "
                f"(relative residual {summary.trace_residual:.3e})"
            )
    if eigs.min() < PSD_FLOOR:
        raise EigensolverError(
            f"spectrum not positive semidefinite: min eigenvalue {eigs.min()!r}"
        )
    if summary.epsilon1 < 1.0 - 1e-9:
        raise EigensolverError(
            f"leading eigenvalue {summary.epsilon1!r} below the trace mean of 1"
        )
    gram = vecs.T @ vecs
    ortho_err = np.abs(gram - np.eye(gram.shape[0])).max()
    if ortho_err > ORTHO_TOL:
        raise EigensolverError(f"eigenvectors not orthonormal: max deviation {ortho_err:.3e}")
    s_norm = (
        np.linalg.norm(S) if isinstance(S, np.ndarray) else sparse.linalg.norm(S)
    )
    top = min(RESIDUAL_PAIRS, eigs.size)
    for i in range(top):
        residual = np.linalg.norm(S @ vecs[:, i] - eigs[i] * vecs[:, i])
        if residual > RESIDUAL_RTOL * s_norm:
            raise EigensolverError(
                f"eigenpair {i + 1} residual {residual:.3e} exceeds "
                f"{RESIDUAL_RTOL:.0e} * ||S||_F = {RESIDUAL_RTOL * s_norm:.3e}"
            )


def eigendecompose(
    m: CoreadMatrices,
    dense_threshold: int = DENSE_THRESHOLD,
    top_k: int = ITERATIVE_TOP_K,
) -> SpectralSummary:
    """Compute the (real) spectrum of the normalized co-read matrix.

    Samples up to ``dense_threshold`` get a full dense symmetric eigensolve;
    larger ones fall back to the leading ``top_k`` eigenpairs via Lanczos
    iteration, with a warning because the density and separation metrics
    need the full spectrum.
    """
    if (m.degrees <= 0).any():
        raise ValueError("all user degrees must be positive")
    n = m.n_users
    if n <= dense_threshold:
        S = _symmetrized(m, dense=True)
        assert (S == S.T).all(), "symmetrization must be exact"
        try:
            eigs, vecs = np.linalg.eigh(S)
        except np.linalg.LinAlgError as err:
            raise EigensolverError(f"dense eigensolve failed for n_s={n}: {err}") from err
        order = np.argsort(eigs)[::-1]
        summary = SpectralSummary(
            eigenvalues=eigs[order],
            eigenvectors=_fix_signs(np.ascontiguousarray(vecs[:, order])),
            n_s=n,
            full=True,
        )
    else:
        warnings.warn(
            f"n_s={n} exceeds dense threshold {dense_threshold}: computing only the "
            f"top {top_k} eigenpairs; spectral density and the separation statistic "
            "need the full spectrum",
            stacklevel=2,
        )
        S = _symmetrized(m, dense=False)
        assert (S - S.T).nnz == 0, "symmetrization must be exact"
        k = min(top_k, n - 1)
        try:
            eigs, vecs = eigsh(S, k=k, which="LA")
        except ArpackNoConvergence as err:
            raise EigensolverError(
                f"Lanczos iteration did not converge for n_s={n}, k={k}: "
                f"{len(err.eigenvalues)} of {k} eigenpairs converged"
            ) from err
        order = np.argsort(eigs)[::-1]
        summary = SpectralSummary(
            eigenvalues=eigs[order],
            eigenvectors=_fix_signs(np.ascontiguousarray(vecs[:, order])),
            n_s=n,
            full=False,
        )
    _validate_summary(summary, S)
    return summary


def _freedman_diaconis_bins(values: np.ndarray) -> int:
    q75, q25 = np.percentile(values, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        return DENSITY_MIN_BINS
    width = 2.0 * iqr / values.size ** (1.0 / 3.0)
    span = float(values.max() - values.min())
    return max(DENSITY_MIN_BINS, math.ceil(span / width))


def spectral_density(
    summary: SpectralSummary, bins: int | str = "auto"
) -> SpectralDensity:
    """Histogram the spectrum over [eps_min, eps1], normalized to unit integral.

    ``bins="auto"`` applies the Freedman-Diaconis rule with a floor of 10
    bins. A fully degenerate spectrum collapses to one machine-width bin and
    emits a warning.
    """
    if not summary.full:
        raise ValueError("spectral density needs the full spectrum")
    eigs = summary.eigenvalues
    if eigs.size < 2:
        raise ValueError("spectral density needs at least 2 eigenvalues")
    lo, hi = float(eigs.min()), float(eigs.max())
    if lo == hi:
        warnings.warn(
            "all eigenvalues identical: emitting a single degenerate bin",
            stacklevel=2,
        )
        width = np.spacing(max(abs(lo), 1.0))
        edges = np.array([lo, lo + width])
        return SpectralDensity(bin_edges=edges, density=np.array([1.0 / width]))
    if bins == "auto":
        n_bins = _freedman_diaconis_bins(eigs)
    else:
        n_bins = int(bins)
        if n_bins < 1:
            raise ValueError(f"bin count must be positive, got {bins}")
    density, edges = np.histogram(eigs, bins=n_bins, range=(lo, hi), density=True)
    return SpectralDensity(bin_edges=edges, density=density)


def separation_statistic(summary: SpectralSummary) -> float:
    """(eps1 - eps2) / (eps2 - eps_min): distance of the leading eigenvalue
    from the bulk, in units of the bulk width."""
    if not summary.full:
        raise UndefinedStatisticError("separation statistic needs the full spectrum")
    if summary.n_s < 3:
        raise UndefinedStatisticError(
            f"separation statistic undefined for n_s < 3 (got {summary.n_s})"
        )
    eigs = summary.eigenvalues
    bulk_width = float(eigs[1] - eigs[-1])
    if bulk_width == 0.0:
        raise UndefinedStatisticError("degenerate bulk: eps2 equals eps_min")
    return float(eigs[0] - eigs[1]) / bulk_width


def fit_alpha(runs) -> ScalingFit:
    """OLS fit of log(eps1) against log(n_s); the slope is the exponent.

    Needs at least 3 distinct sample sizes, all with positive eps1.
    """
    points = [(int(n), float(e)) for n, e in runs]
    sizes = [n for n, _ in points]
    if len(set(sizes)) < 3:
        raise ValueError(f"need at least 3 distinct sample sizes, got {sorted(set(sizes))}")
    if any(n <= 0 for n in sizes):
        raise ValueError("sample sizes must be positive")
    if any(e <= 0 for _, e in points):
        raise ValueError("leading eigenvalues must be positive for a log-log fit")
    log_n = np.log([n for n, _ in points])
    log_e = np.log([e for _, e in points])
    slope, intercept = np.polyfit(log_n, log_e, 1)
    predicted = slope * log_n + intercept
    ss_res = float(((log_e - predicted) ** 2).sum())
    ss_tot = float(((log_e - log_e.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return ScalingFit(
        points=points,
        alpha=float(slope),
        log_intercept=float(intercept),
        r_squared=r_squared,
    )


def nested_sweep(
    sample: Sample,
    sizes,
    dense_threshold: int = DENSE_THRESHOLD,
) -> list[SpectralSummary]:
    """Eigendecompose nested prefixes of the ranked sample, one per size.

    Sizes must be strictly ascending, at least 3, and within the sample;
    because ranking is deterministic, each run uses exactly the top-n prefix
    of the next, which makes sweeps reproducible.
    """
    sizes = [int(n) for n in sizes]
    if not sizes:
        raise ValueError("no sweep sizes given")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sweep sizes must be strictly ascending, got {sizes}")
    if sizes[0] < 3:
        raise ValueError(f"smallest sweep size must be at least 3, got {sizes[0]}")
    if sizes[-1] > sample.size:
        raise ValueError(
            f"sweep size {sizes[-1]} exceeds the sample size {sample.size}"
        )
    summaries = []
    for n in sizes:
        sub = draw_sample(sample.profiles, n)
        matrices = build_coread(build_incidence(sub), dense_threshold)
        summaries.append(eigendecompose(matrices, dense_threshold))
    return summaries
