"""Cross-correlation of packet windows with enrichment records.

Splits a window's sources into two associative arrays keyed by anonymized
source IP: ``meta`` for sources carrying enrichment metadata (one column
per variable value) and ``no_grey`` for telescope-only sources (a single
binned packet-count column).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

from .assoc import AssocArray, make_col
from .cryptopan import AnonKey
from .ingest import EnrichmentRecord, WindowAggregate, format_timestamp

logger = logging.getLogger(__name__)

# Canonical per-source variables recorded in the meta array.
META_VARIABLES = ("actor", "asn", "classification", "cve", "last_seen",
                  "os", "protocol_port", "spoofable", "srcPacket")

# Extra columns derived from canonical ones (excluded from variable-level
# summary statistics).
DERIVED_VARIABLES = ("last_seen_hour",)

NOGREY_VARIABLE = "caida_srcPacket"


def log2_bin(d: int) -> int:
    """Lower edge of the power-of-two bin containing d: 2^floor(log2 d)."""
    d = int(d)
    if d < 1:
        raise ValueError(f"packet count must be >= 1, got {d}")
    return 1 << (d.bit_length() - 1)


@dataclass
class JoinedWindow:
    window_id: str
    meta: AssocArray
    no_grey: AssocArray
    nv: int = 0
    partial: bool = False


def dedupe_enrichment(records: Iterable[EnrichmentRecord]) -> dict[str, EnrichmentRecord]:
    """Index records by source IP; for duplicates the latest last_seen wins."""
    oldest = datetime.min.replace(tzinfo=timezone.utc)
    by_src: dict[str, EnrichmentRecord] = {}
    duplicates = 0
    for rec in records:
        existing = by_src.get(rec.src)
        if existing is None:
            by_src[rec.src] = rec
            continue
        duplicates += 1
        if (rec.last_seen or oldest) >= (existing.last_seen or oldest):
            by_src[rec.src] = rec
    if duplicates:
        logger.warning("%d duplicate enrichment records resolved by latest last_seen",
                       duplicates)
    return by_src


def join(window: WindowAggregate, enrichment: Iterable[EnrichmentRecord],
         key: AnonKey | None = None, anonymize_inputs: bool = True) -> JoinedWindow:
    """Correlate one window with enrichment records by source IP.

    With anonymize_inputs=True (the default) both inputs are raw and row
    keys are anonymized here; pass False when both inputs were already
    anonymized under the same key.  The mapping is injective, so the two
    paths produce identical arrays.  Enrichment-only sources are dropped:
    every row is keyed by a source the telescope saw.
    """
    by_src = dedupe_enrichment(enrichment)
    if anonymize_inputs:
        if key is None:
            raise ValueError("an AnonKey is required when anonymize_inputs=True")
        mapper = key.mapper()
        row_of = mapper.anonymize
    else:
        row_of = lambda src: src  # noqa: E731

    meta_triples: list[tuple[str, str, int]] = []
    nogrey_triples: list[tuple[str, str, int]] = []
    for src, count in window.counts.items():
        row = row_of(src)
        bin_label = str(log2_bin(count))
        rec = by_src.get(src)
        if rec is None:
            nogrey_triples.append((row, make_col(NOGREY_VARIABLE, bin_label), 1))
            continue
        meta_triples.append((row, make_col("srcPacket", bin_label), 1))
        meta_triples.append((row, make_col("actor", rec.actor), 1))
        meta_triples.append((row, make_col("classification", rec.classification), 1))
        meta_triples.append((row, make_col("os", rec.os), 1))
        meta_triples.append((row, make_col("asn", rec.asn), 1))
        if rec.last_seen is not None:
            meta_triples.append((row, make_col("last_seen", format_timestamp(rec.last_seen)), 1))
            meta_triples.append((row, make_col("last_seen_hour", f"{rec.last_seen.hour:02d}"), 1))
        for cve in rec.cves:
            meta_triples.append((row, make_col("cve", cve), 1))
        for port in rec.ports:
            meta_triples.append((row, make_col("protocol_port", port), 1))
        if rec.spoofable:
            meta_triples.append((row, make_col("spoofable", "1"), 1))

    return JoinedWindow(
        window_id=window.window_id,
        meta=AssocArray.build(meta_triples),
        no_grey=AssocArray.build(nogrey_triples),
        nv=window.nv,
        partial=window.partial,
    )


def overlap_fraction(window: WindowAggregate,
                     enrichment: Iterable[EnrichmentRecord] | Sequence[EnrichmentRecord],
                     key: AnonKey | None = None,
                     threshold: float | None = None) -> float | None:
    """Fraction of high-frequency window sources present in the enrichment set.

    High-frequency means a per-source packet count d > sqrt(nv) (threshold
    overridable).  Returns None when no source exceeds the threshold: an
    undefined ratio, deliberately distinct from 0.0.  Both inputs must share
    an address space; when a key is given both sides are mapped through it
    first, which cannot change the result (the mapping is injective).
    """
    if window.nv <= 0:
        raise ValueError("window has no packets")
    cutoff = math.sqrt(window.nv) if threshold is None else threshold
    high = [src for src, count in window.counts.items() if count > cutoff]
    if not high:
        return None
    enriched = {rec.src for rec in enrichment}
    if key is not None:
        mapper = key.mapper()
        high = [mapper.anonymize(src) for src in high]
        enriched = {mapper.anonymize(src) for src in enriched}
    hits = sum(1 for src in high if src in enriched)
    return hits / len(high)
