"""Input parsing and synthetic dataset generation.

Packet logs are TSV lines ``epoch_ns<TAB>dotted_quad`` aggregated into
constant-packet-count windows.  Enrichment data is JSON-lines, one record
per source IP.  The synthetic generator produces both files plus a ground
truth file with the drawn parameters, for desk-scale end-to-end runs with
known statistics.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cryptopan import int_to_ip, ip_to_int
from .distfit import ZmParams, zm_sample
from .errors import ParseError

logger = logging.getLogger(__name__)

CLASSIFICATIONS = ("benign", "malicious", "unknown")

# Port lists are truncated to this many entries to keep the per-record
# port dimension bounded.
MAX_PORTS = 5


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp ('Z' suffix or offset; naive = UTC)."""
    t = text.strip()
    if t.endswith(("Z", "z")):
        t = t[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(t)
    except ValueError:
        raise ValueError(f"unparseable timestamp {text!r}") from None
    if parsed.tzinfo is None:
        return parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def format_timestamp(value: datetime) -> str:
    value = value.astimezone(timezone.utc)
    if value.microsecond:
        return value.isoformat().replace("+00:00", "Z")
    return value.strftime("%Y-%m-%dT%H:%M:%SZ")


def window_label(start_ns: int) -> str:
    """Window id from its first packet timestamp, e.g. '20200617-120000'."""
    stamp = datetime.fromtimestamp(start_ns // 10**9, tz=timezone.utc)
    return stamp.strftime("%Y%m%d-%H%M%S")


@dataclass
class WindowAggregate:
    """Per-source packet counts for one constant-packet-count window."""

    window_id: str
    nv: int
    counts: dict[str, int]
    duration_sec: float
    partial: bool = False
    start_ns: int = 0


def parse_packet_log(stream: Iterable[str], nv: int) -> list[WindowAggregate]:
    """Aggregate a packet log into consecutive windows of exactly nv packets.

    The trailing window is kept but flagged partial when the log does not
    divide evenly.  Malformed rows raise; timestamps running backwards only
    log a warning.
    """
    if nv < 1:
        raise ValueError(f"window size must be >= 1, got {nv}")
    windows: list[WindowAggregate] = []
    counts: dict[str, int] = {}
    first_ns = last_ns = 0
    filled = 0
    prev_ts = None
    warned_monotonic = False

    def close(partial: bool) -> None:
        windows.append(WindowAggregate(
            window_id=window_label(first_ns),
            nv=filled,
            counts=counts,
            duration_sec=(last_ns - first_ns) / 1e9,
            partial=partial,
            start_ns=first_ns,
        ))

    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected 'epoch_ns<TAB>src_ip', got {line!r}", lineno)
        try:
            ts = int(parts[0])
        except ValueError:
            raise ParseError(f"bad timestamp {parts[0]!r}", lineno) from None
        if ts < 0:
            raise ParseError(f"negative timestamp {ts}", lineno)
        src = parts[1]
        try:
            ip_to_int(src)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if prev_ts is not None and ts < prev_ts and not warned_monotonic:
            logger.warning("non-monotonic timestamp at line %d", lineno)
            warned_monotonic = True
        prev_ts = ts
        if filled == 0:
            first_ns = ts
        counts[src] = counts.get(src, 0) + 1
        last_ns = ts
        filled += 1
        if filled == nv:
            close(partial=False)
            counts = {}
            filled = 0
    if filled:
        close(partial=True)
    return windows


@dataclass(frozen=True)
class EnrichmentRecord:
    """One honeyfarm-style metadata record for a source IP."""

    src: str
    classification: str
    actor: str = "unknown"
    cves: tuple[str, ...] = ()
    os: str = "unknown"
    asn: str = "unknown"
    last_seen: datetime | None = None
    ports: tuple[str, ...] = ()
    spoofable: bool = False

    def __post_init__(self):
        if self.classification not in CLASSIFICATIONS:
            raise ValueError(f"unknown classification {self.classification!r}")
        if self.cves and self.classification != "malicious":
            raise ValueError("only malicious records may carry CVEs")
        if len(self.ports) > MAX_PORTS:
            raise ValueError(f"ports must be truncated to {MAX_PORTS}")


def parse_enrichment(stream: Iterable[str]) -> list[EnrichmentRecord]:
    """Parse JSON-lines enrichment records.

    Ports are truncated to the first five; missing actor/os/asn normalize
    to "unknown".  Unknown classifications and unparseable timestamps are
    errors carrying the line number.
    """
    records = []
    for lineno, line in enumerate(stream, 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("record must be a JSON object", lineno)
        src = obj.get("ip")
        if not src:
            raise ParseError("missing 'ip' field", lineno)
        try:
            ip_to_int(src)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        classification = obj.get("classification")
        if classification not in CLASSIFICATIONS:
            raise ParseError(f"unknown classification {classification!r}", lineno)
        cves = tuple(obj.get("cve") or ())
        if cves and classification != "malicious":
            raise ParseError(
                f"classification {classification!r} must not carry CVEs", lineno)
        raw_last_seen = obj.get("last_seen")
        last_seen = None
        if raw_last_seen is not None:
            try:
                last_seen = parse_timestamp(str(raw_last_seen))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
        ports = tuple(obj.get("ports") or ())[:MAX_PORTS]
        records.append(EnrichmentRecord(
            src=src,
            classification=classification,
            actor=obj.get("actor") or "unknown",
            cves=cves,
            os=obj.get("os") or "unknown",
            asn=obj.get("asn") or "unknown",
            last_seen=last_seen,
            ports=ports,
            spoofable=bool(obj.get("spoofable", False)),
        ))
    return records


def emit_enrichment(records: Iterable[EnrichmentRecord], fh) -> None:
    """Write records as JSON-lines; inverse of parse_enrichment."""
    for rec in records:
        obj = {
            "ip": rec.src,
            "actor": rec.actor,
            "classification": rec.classification,
            "cve": list(rec.cves),
            "os": rec.os,
            "asn": rec.asn,
            "last_seen": format_timestamp(rec.last_seen) if rec.last_seen else None,
            "ports": list(rec.ports),
            "spoofable": rec.spoofable,
        }
        fh.write(json.dumps(obj, separators=(", ", ": ")) + "\n")


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

DEFAULT_START = datetime(2020, 6, 17, 12, 0, 0, tzinfo=timezone.utc)

# Default categorical frequency tables for generated enrichment records;
# override any of them through SynthConfig.tables.
DEFAULT_TABLES: dict[str, list[tuple[str, float]]] = {
    "classification": [("malicious", 0.59), ("unknown", 0.40), ("benign", 0.01)],
    "actor": [("unknown", 0.993), ("ShadowServer.org", 0.003),
              ("Censys", 0.002), ("Shodan.io", 0.002)],
    "os": [("Windows 7/8", 0.40), ("unknown", 0.22), ("Linux 2.2-3.x", 0.12),
           ("Windows XP", 0.08), ("Linux 3.11+", 0.07), ("Mac OS X", 0.05),
           ("embedded", 0.04), ("FreeBSD", 0.02)],
    "cve": [("CVE-2017-0144", 0.90), ("CVE-2019-0708", 0.04), ("CVE-2014-0160", 0.03),
            ("CVE-2017-5638", 0.02), ("CVE-2018-10561", 0.01)],
    "ports": [("TCP/445", 0.30), ("TCP/23", 0.20), ("TCP/22", 0.12), ("TCP/80", 0.10),
              ("TCP/443", 0.08), ("TCP/3389", 0.07), ("UDP/5060", 0.05),
              ("TCP/8080", 0.04), ("TCP/21", 0.02), ("UDP/53", 0.02)],
    "asn": [(f"AS{n}", 1.0 / (rank + 1) ** 1.2) for rank, n in enumerate(
        [4134, 4837, 3462, 17488, 9121, 8151, 45090, 4766, 7922, 3320] +
        list(range(9000, 9030)))],
}

_CVE_COUNT_WEIGHTS = ([0, 1, 2, 3], [0.35, 0.55, 0.07, 0.03])
_PORT_COUNT_WEIGHTS = ([1, 2, 3, 4, 5], [0.45, 0.25, 0.15, 0.10, 0.05])


@dataclass(frozen=True)
class SynthConfig:
    n_sources: int = 2000
    nv: int = 1 << 20
    alpha: float = 1.8
    delta: float = 0.0
    overlap_frac: float = 0.7
    seed: int = 0
    time_window_sec: float = 1200.0
    start: datetime = DEFAULT_START
    dmax: int | None = None  # sampler support cap; defaults to nv
    spoofable_prob: float = 0.35
    tables: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_sources < 1:
            raise ValueError("n_sources must be >= 1")
        if self.nv < 2:
            raise ValueError("nv must be >= 2")
        if not 0 <= self.overlap_frac <= 1:
            raise ValueError("overlap_frac must be in [0, 1]")
        if self.alpha <= 1:
            raise ValueError("alpha must be > 1")
        if self.delta <= -1:
            raise ValueError("delta must be > -1")
        if self.time_window_sec <= 0:
            raise ValueError("time_window_sec must be positive")

    def table(self, name: str) -> list[tuple[str, float]]:
        return self.tables.get(name, DEFAULT_TABLES[name])


@dataclass
class GroundTruth:
    """Drawn parameters and overlap set of a synthetic dataset."""

    config: dict
    total_packets: int
    threshold: float
    n_high: int
    overlap_size: int
    overlap_sources: list[str]
    counts_by_source: dict[str, int]

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "totalPackets": self.total_packets,
            "threshold": self.threshold,
            "nHigh": self.n_high,
            "overlapSize": self.overlap_size,
            "overlapSources": self.overlap_sources,
            "countsBySource": self.counts_by_source,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@dataclass
class SyntheticDataset:
    config: SynthConfig
    sources: list[str]
    counts: np.ndarray
    records: list[EnrichmentRecord]
    ground_truth: GroundTruth

    def packet_lines(self) -> Iterable[str]:
        """Deterministic packet log lines, timestamps nondecreasing."""
        rng = np.random.default_rng(self.config.seed + 1)
        order = np.repeat(np.arange(len(self.sources)), self.counts)
        rng.shuffle(order)
        total = order.size
        start_ns = int(self.config.start.timestamp() * 1e9)
        span_ns = int(self.config.time_window_sec * 1e9)
        for i, idx in enumerate(order):
            ts = start_ns + (i * span_ns) // total
            yield f"{ts}\t{self.sources[idx]}\n"

    def as_single_window(self) -> WindowAggregate:
        """The whole log viewed as one window (what parsing with a window
        size >= total packets would produce)."""
        total = int(self.counts.sum())
        start_ns = int(self.config.start.timestamp() * 1e9)
        return WindowAggregate(
            window_id=window_label(start_ns),
            nv=total,
            counts={src: int(c) for src, c in zip(self.sources, self.counts)},
            duration_sec=self.config.time_window_sec,
            partial=total != self.config.nv,
            start_ns=start_ns,
        )

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "packets": out / "packets.tsv",
            "enrichment": out / "enrichment.jsonl",
            "ground_truth": out / "ground_truth.json",
        }
        with open(paths["packets"], "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(self.packet_lines())
        with open(paths["enrichment"], "w", encoding="utf-8", newline="\n") as fh:
            emit_enrichment(self.records, fh)
        paths["ground_truth"].write_text(self.ground_truth.to_json(), encoding="utf-8")
        return paths


def _draw_sources(rng: np.random.Generator, n: int) -> list[str]:
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < n:
        batch = rng.integers(1, 0xFFFFFFFE, size=n - len(chosen) + 16, dtype=np.int64)
        for value in batch.tolist():
            if value not in seen:
                seen.add(value)
                chosen.append(value)
                if len(chosen) == n:
                    break
    return [int_to_ip(v) for v in chosen]


def _weighted_values(table: Sequence[tuple[str, float]]) -> tuple[list[str], np.ndarray]:
    values = [v for v, _ in table]
    weights = np.array([w for _, w in table], dtype=float)
    return values, weights / weights.sum()


def gen_synthetic(cfg: SynthConfig) -> SyntheticDataset:
    """Generate a packet log + enrichment log pair with known ground truth.

    Per-source packet counts come from the Zipf-Mandelbrot sampler.  The
    enrichment subset has exactly round(overlap_frac * n_sources) sources,
    selected stratified around the high-frequency threshold sqrt(total
    packets) so the enriched fraction of high-frequency sources equals
    overlap_frac up to rounding, not just in expectation.
    """
    rng = np.random.default_rng(cfg.seed)
    params = ZmParams(cfg.alpha, cfg.delta, cfg.dmax or cfg.nv)
    counts = zm_sample(cfg.n_sources, params, rng)
    sources = _draw_sources(rng, cfg.n_sources)

    total = int(counts.sum())
    threshold = math.sqrt(total)
    high = np.flatnonzero(counts > threshold)
    low = np.flatnonzero(counts <= threshold)

    k_total = round(cfg.overlap_frac * cfg.n_sources)
    k_high = round(cfg.overlap_frac * len(high))
    k_high = min(k_high, k_total, len(high))
    k_high = max(k_high, k_total - len(low))
    k_low = k_total - k_high
    chosen = np.concatenate([
        rng.choice(high, size=k_high, replace=False) if k_high else np.array([], dtype=int),
        rng.choice(low, size=k_low, replace=False) if k_low else np.array([], dtype=int),
    ]).astype(int)
    chosen.sort()

    classification_v, classification_w = _weighted_values(cfg.table("classification"))
    actor_v, actor_w = _weighted_values(cfg.table("actor"))
    os_v, os_w = _weighted_values(cfg.table("os"))
    asn_v, asn_w = _weighted_values(cfg.table("asn"))
    cve_v, cve_w = _weighted_values(cfg.table("cve"))
    port_v, port_w = _weighted_values(cfg.table("ports"))

    records = []
    for idx in chosen.tolist():
        classification = str(rng.choice(classification_v, p=classification_w))
        cves: tuple[str, ...] = ()
        if classification == "malicious":
            n_cves = int(rng.choice(_CVE_COUNT_WEIGHTS[0], p=_CVE_COUNT_WEIGHTS[1]))
            n_cves = min(n_cves, len(cve_v))
            if n_cves:
                cves = tuple(str(v) for v in rng.choice(cve_v, size=n_cves, replace=False, p=cve_w))
        n_ports = min(int(rng.choice(_PORT_COUNT_WEIGHTS[0], p=_PORT_COUNT_WEIGHTS[1])), len(port_v))
        ports = tuple(str(v) for v in rng.choice(port_v, size=n_ports, replace=False, p=port_w))
        offset = int(rng.integers(-12 * 3600, 12 * 3600))
        records.append(EnrichmentRecord(
            src=sources[idx],
            classification=classification,
            actor=str(rng.choice(actor_v, p=actor_w)),
            cves=cves,
            os=str(rng.choice(os_v, p=os_w)),
            asn=str(rng.choice(asn_v, p=asn_w)),
            last_seen=cfg.start + timedelta(seconds=offset),
            ports=ports,
            spoofable=bool(rng.random() < cfg.spoofable_prob),
        ))

    overlap_sources = sorted(sources[i] for i in chosen.tolist())
    ground_truth = GroundTruth(
        config={
            "nSources": cfg.n_sources,
            "nv": cfg.nv,
            "alpha": cfg.alpha,
            "delta": cfg.delta,
            "dmax": cfg.dmax or cfg.nv,
            "overlapFrac": cfg.overlap_frac,
            "seed": cfg.seed,
            "timeWindowSec": cfg.time_window_sec,
            "start": format_timestamp(cfg.start),
        },
        total_packets=total,
        threshold=threshold,
        n_high=int(len(high)),
        overlap_size=int(k_total),
        overlap_sources=overlap_sources,
        counts_by_source={src: int(c) for src, c in zip(sources, counts)},
    )
    return SyntheticDataset(config=cfg, sources=sources, counts=counts,
                            records=records, ground_truth=ground_truth)
