"""netchar: statistical characterization of darkspace network traffic.

Cross-correlates packet-telescope traffic with honeyfarm enrichment data
under prefix-preserving anonymization, and summarizes the result with
dimensional statistics, exemplar records, and heavy-tail model fits.
"""

__version__ = "0.1.0"

from .assoc import AssocArray, make_col, split_col, variable_of
from .cryptopan import AnonKey, CryptoPan, anonymize_ip, anonymize_stream
from .dimstats import (
    DimStatsRow,
    ExemplarRecord,
    Relevance,
    RelevanceThresholds,
    classify_relevance,
    dim_table,
    exemplar,
)
from .distfit import (
    CauchyFit,
    CauchyParams,
    LogBinnedHistogram,
    ZmFit,
    ZmParams,
    categorical_distribution,
    cauchy_eval,
    fit_cauchy,
    fit_zm,
    hour_histogram,
    log_bin,
    zm_pmf,
    zm_sample,
)
from .ingest import (
    EnrichmentRecord,
    SynthConfig,
    WindowAggregate,
    gen_synthetic,
    parse_enrichment,
    parse_packet_log,
)
from .join import JoinedWindow, join, log2_bin, overlap_fraction

__all__ = [
    "AnonKey",
    "AssocArray",
    "CauchyFit",
    "CauchyParams",
    "CryptoPan",
    "DimStatsRow",
    "EnrichmentRecord",
    "ExemplarRecord",
    "JoinedWindow",
    "LogBinnedHistogram",
    "Relevance",
    "RelevanceThresholds",
    "SynthConfig",
    "WindowAggregate",
    "ZmFit",
    "ZmParams",
    "anonymize_ip",
    "anonymize_stream",
    "categorical_distribution",
    "cauchy_eval",
    "classify_relevance",
    "dim_table",
    "exemplar",
    "fit_cauchy",
    "fit_zm",
    "gen_synthetic",
    "hour_histogram",
    "join",
    "log2_bin",
    "log_bin",
    "make_col",
    "overlap_fraction",
    "parse_enrichment",
    "parse_packet_log",
    "split_col",
    "variable_of",
    "zm_pmf",
    "zm_sample",
    "__version__",
]
