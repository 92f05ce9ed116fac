import io
import json
import logging
from datetime import datetime, timezone

import numpy as np
import pytest

from netchar.distfit import ZmParams, binned_model_fractions, log_bin
from util import chisquare_pvalue
from netchar.errors import ParseError
from netchar.ingest import (
    DEFAULT_START,
    EnrichmentRecord,
    SynthConfig,
    emit_enrichment,
    format_timestamp,
    gen_synthetic,
    parse_enrichment,
    parse_packet_log,
    parse_timestamp,
    window_label,
)


def _log(rows):
    return io.StringIO("".join(f"{ts}\t{src}\n" for ts, src in rows))


def test_two_window_hand_count():
    rows = [(i * 1000, src) for i, src in enumerate(
        ["1.1.1.1", "1.1.1.1", "2.2.2.2", "3.3.3.3",
         "1.1.1.1", "4.4.4.4", "4.4.4.4", "4.4.4.4"])]
    windows = parse_packet_log(_log(rows), nv=4)
    assert len(windows) == 2
    assert windows[0].counts == {"1.1.1.1": 2, "2.2.2.2": 1, "3.3.3.3": 1}
    assert windows[1].counts == {"1.1.1.1": 1, "4.4.4.4": 3}
    assert windows[0].nv == windows[1].nv == 4
    assert not windows[0].partial and not windows[1].partial
    assert windows[0].duration_sec == pytest.approx(3000 / 1e9)


def test_empty_stream():
    assert parse_packet_log(io.StringIO(""), nv=4) == []


def test_degenerate_window_size_one():
    rows = [(0, "1.1.1.1"), (1, "2.2.2.2"), (2, "1.1.1.1")]
    windows = parse_packet_log(_log(rows), nv=1)
    assert len(windows) == 3
    assert all(w.nv == 1 and len(w.counts) == 1 for w in windows)
    assert all(list(w.counts.values()) == [1] for w in windows)


def test_partial_final_window_flagged():
    rows = [(i, "9.9.9.9") for i in range(5)]
    windows = parse_packet_log(_log(rows), nv=4)
    assert [w.partial for w in windows] == [False, True]
    assert windows[1].nv == 1
    assert sum(w.nv for w in windows) == 5


def test_malformed_rows_report_line_numbers():
    with pytest.raises(ParseError, match="line 2"):
        parse_packet_log(io.StringIO("0\t1.1.1.1\nbroken\n"), nv=4)
    with pytest.raises(ParseError, match="line 1"):
        parse_packet_log(io.StringIO("xx\t1.1.1.1\n"), nv=4)
    with pytest.raises(ParseError, match="line 1"):
        parse_packet_log(io.StringIO("0\t999.1.1.1\n"), nv=4)
    with pytest.raises(ValueError):
        parse_packet_log(io.StringIO(""), nv=0)


def test_non_monotonic_is_warning_not_error(caplog):
    rows = [(1000, "1.1.1.1"), (500, "2.2.2.2")]
    with caplog.at_level(logging.WARNING):
        windows = parse_packet_log(_log(rows), nv=10)
    assert len(windows) == 1
    assert any("non-monotonic" in r.message for r in caplog.records)


def test_window_conservation_against_single_pass():
    rng = np.random.default_rng(4)
    srcs = [f"10.0.{i // 256}.{i % 256}" for i in range(50)]
    rows = [(int(i), srcs[int(rng.integers(0, 50))]) for i in range(997)]
    windows = parse_packet_log(_log(rows), nv=64)
    merged: dict[str, int] = {}
    for w in windows:
        for src, count in w.counts.items():
            merged[src] = merged.get(src, 0) + count
    single_pass: dict[str, int] = {}
    for _, src in rows:
        single_pass[src] = single_pass.get(src, 0) + 1
    assert merged == single_pass
    assert sum(w.nv for w in windows) == len(rows)


def test_window_label():
    ns = int(datetime(2020, 6, 17, 12, 0, 0, tzinfo=timezone.utc).timestamp() * 1e9)
    assert window_label(ns) == "20200617-120000"


def test_timestamp_parsing_variants():
    want = datetime(2020, 6, 23, 23, 20, 0, tzinfo=timezone.utc)
    assert parse_timestamp("2020-06-23T23:20:00Z") == want
    assert parse_timestamp("2020-06-23T23:20:00+00:00") == want
    assert parse_timestamp("2020-06-23 23:20:00") == want
    assert parse_timestamp("2020-06-24T01:20:00+02:00") == want
    with pytest.raises(ValueError):
        parse_timestamp("not a time")
    assert format_timestamp(want) == "2020-06-23T23:20:00Z"


def test_ports_truncated_at_five():
    line = json.dumps({
        "ip": "1.2.3.4", "classification": "unknown",
        "ports": ["TCP/1", "TCP/2", "TCP/3", "TCP/4", "TCP/5", "TCP/6", "TCP/7"],
    })
    (rec,) = parse_enrichment(io.StringIO(line + "\n"))
    assert rec.ports == ("TCP/1", "TCP/2", "TCP/3", "TCP/4", "TCP/5")


def test_cve_on_benign_rejected():
    line = json.dumps({"ip": "1.2.3.4", "classification": "benign",
                       "cve": ["CVE-2017-0144"]})
    with pytest.raises(ParseError, match="line 1"):
        parse_enrichment(io.StringIO(line + "\n"))
    with pytest.raises(ValueError):
        EnrichmentRecord(src="1.2.3.4", classification="unknown", cves=("CVE-1",))


def test_minimal_row_default_fill():
    (rec,) = parse_enrichment(io.StringIO('{"ip": "1.2.3.4", "classification": "unknown"}\n'))
    assert rec.actor == "unknown"
    assert rec.os == "unknown"
    assert rec.cves == ()
    assert rec.ports == ()
    assert rec.spoofable is False


def test_enrichment_error_cases():
    with pytest.raises(ParseError, match="classification"):
        parse_enrichment(io.StringIO('{"ip": "1.2.3.4", "classification": "hostile"}\n'))
    with pytest.raises(ParseError, match="line 2"):
        parse_enrichment(io.StringIO(
            '{"ip": "1.2.3.4", "classification": "unknown"}\n'
            '{"ip": "1.2.3.5", "classification": "unknown", "last_seen": "junk"}\n'))
    with pytest.raises(ParseError, match="ip"):
        parse_enrichment(io.StringIO('{"classification": "unknown"}\n'))
    with pytest.raises(ParseError, match="JSON"):
        parse_enrichment(io.StringIO("{oops\n"))


def test_enrichment_round_trip():
    records = [
        EnrichmentRecord(src="1.2.3.4", classification="malicious", actor="unknown",
                         cves=("CVE-2017-0144", "CVE-2019-0708"), os="Windows 7/8",
                         asn="AS4134",
                         last_seen=datetime(2020, 6, 23, 23, 20, tzinfo=timezone.utc),
                         ports=("TCP/445",), spoofable=True),
        EnrichmentRecord(src="5.6.7.8", classification="unknown"),
    ]
    buf = io.StringIO()
    emit_enrichment(records, buf)
    assert parse_enrichment(io.StringIO(buf.getvalue())) == records


# -- synthetic generator ------------------------------------------------

def test_synth_overlap_extremes(tmp_path):
    none = gen_synthetic(SynthConfig(n_sources=50, nv=1 << 12, seed=1, overlap_frac=0.0))
    assert none.records == []
    full = gen_synthetic(SynthConfig(n_sources=50, nv=1 << 12, seed=1, overlap_frac=1.0))
    assert {r.src for r in full.records} == set(full.sources)


def test_synth_deterministic(tmp_path):
    cfg = SynthConfig(n_sources=120, nv=1 << 12, seed=77)
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    gen_synthetic(cfg).write(a_dir)
    gen_synthetic(cfg).write(b_dir)
    for name in ("packets.tsv", "enrichment.jsonl", "ground_truth.json"):
        assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()


def test_synth_overlap_size_exact():
    cfg = SynthConfig(n_sources=1000, nv=1 << 12, seed=3, overlap_frac=0.7)
    ds = gen_synthetic(cfg)
    assert len(ds.records) == round(0.7 * 1000) == ds.ground_truth.overlap_size
    assert len(set(ds.sources)) == 1000
    assert ds.ground_truth.total_packets == int(ds.counts.sum())


def test_synth_packet_log_parses_back_to_counts(tmp_path):
    cfg = SynthConfig(n_sources=80, nv=1 << 14, seed=5, time_window_sec=60.0)
    ds = gen_synthetic(cfg)
    ds.write(tmp_path)
    with open(tmp_path / "packets.tsv", encoding="utf-8") as fh:
        windows = parse_packet_log(fh, nv=1 << 14)
    assert len(windows) == 1
    assert windows[0].counts == {s: int(c) for s, c in zip(ds.sources, ds.counts)}
    assert windows[0].window_id == ds.as_single_window().window_id
    assert windows[0].window_id == "20200617-120000"
    assert DEFAULT_START == datetime(2020, 6, 17, 12, 0, tzinfo=timezone.utc)


def test_synth_counts_follow_sampler_pmf():
    # chi-square sanity: binned synthetic counts vs the analytic pmf
    cfg = SynthConfig(n_sources=100_000, nv=1 << 16, alpha=1.9, delta=2.0, seed=11)
    ds = gen_synthetic(cfg)
    hist = log_bin(ds.counts)
    params = ZmParams(cfg.alpha, cfg.delta, cfg.nv)
    model = binned_model_fractions(params, hist.labels)
    assert chisquare_pvalue(hist.fractions * hist.n, model * hist.n) > 0.01


def test_synth_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(overlap_frac=1.5)
    with pytest.raises(ValueError):
        SynthConfig(alpha=1.0)
    with pytest.raises(ValueError):
        SynthConfig(delta=-1.5)
    with pytest.raises(ValueError):
        SynthConfig(n_sources=0)
