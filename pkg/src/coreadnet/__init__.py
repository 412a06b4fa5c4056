"""Co-readership network analysis toolkit.

Turns raw usage logs into per-user read profiles, builds the co-read and
normalized co-read matrices for a ranked user sample, computes their spectra
and spectral metrics, and extracts candidate communities as paper sets from
sphere neighborhoods in eigenvector space. A deterministic synthetic-log
generator makes the whole pipeline testable end to end.
"""

from .communities import (
    CitationTable,
    CommunityReport,
    ProjectionCloud,
    community_report,
    project,
    sphere_query,
)
from .coread import (
    CoreadMatrices,
    Incidence,
    brute_force_coread,
    build_coread,
    build_incidence,
    export_coread,
)
from .logstore import (
    AccessEvent,
    DedupPeriod,
    JournalFilter,
    LogFormatError,
    ParseResult,
    ReadProfile,
    dedup_reads,
    parse_events,
    parse_log_file,
)
from .population import (
    PopulationRule,
    RateBasis,
    Sample,
    draw_sample,
    filter_population,
    monthly_rate,
)
from .spectra import (
    EigensolverError,
    ScalingFit,
    SpectralDensity,
    SpectralSummary,
    UndefinedStatisticError,
    eigendecompose,
    fit_alpha,
    nested_sweep,
    separation_statistic,
    spectral_density,
)
from .synth import (
    RoundtripResult,
    SynthConfig,
    SynthConfigError,
    SynthTruth,
    generate,
    roundtrip_check,
)

__version__ = "0.1.0"

__all__ = [
    "AccessEvent",
    "CitationTable",
    "CommunityReport",
    "CoreadMatrices",
    "DedupPeriod",
    "EigensolverError",
    "Incidence",
    "JournalFilter",
    "LogFormatError",
    "ParseResult",
    "PopulationRule",
    "ProjectionCloud",
    "RateBasis",
    "ReadProfile",
    "RoundtripResult",
    "Sample",
    "ScalingFit",
    "SpectralDensity",
    "SpectralSummary",
    "SynthConfig",
    "SynthConfigError",
    "SynthTruth",
    "UndefinedStatisticError",
    "brute_force_coread",
    "build_coread",
    "build_incidence",
    "community_report",
    "dedup_reads",
    "draw_sample",
    "eigendecompose",
    "export_coread",
    "filter_population",
    "fit_alpha",
    "generate",
    "monthly_rate",
    "nested_sweep",
    "parse_events",
    "parse_log_file",
    "project",
    "roundtrip_check",
    "separation_statistic",
    "spectral_density",
    "sphere_query",
]
