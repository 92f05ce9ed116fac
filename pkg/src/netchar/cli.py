"""Command-line interface.

Subcommands mirror the pipeline stages so each is independently runnable:

  synth      generate a synthetic packet log + enrichment log + ground truth
  anon       rewrite the source-IP field of a log under a key
  correlate  window a packet log and join it with enrichment records
  stats      dimensional statistics tables + exemplar records
  fit        heavy-tail fits and plot-ready distribution files
  run        the full pipeline into one report bundle

Exit codes: 0 success, 1 stage failure (partial outputs removed),
2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, report
from .assoc import AssocArray, split_col
from .cryptopan import AnonKey
from .dimstats import (
    Relevance,
    RelevanceThresholds,
    all_variables,
    classify_relevance,
    dim_table,
    dim_table_from_array,
    exemplar,
    exemplar_eligible,
)
from .distfit import (
    binned_model_fractions,
    categorical_distribution,
    fit_zm,
    hist_from_binned,
    hour_histogram,
    log_bin,
)
from .errors import ConfigError, FitError, NetcharError, ParseError
from .ingest import (
    SynthConfig,
    gen_synthetic,
    parse_enrichment,
    parse_packet_log,
    parse_timestamp,
)
from .join import NOGREY_VARIABLE, JoinedWindow, join, overlap_fraction

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_USAGE = 2

CATEGORICAL_VARIABLES = ("classification", "os", "cve")

# (variable, which array, how to turn it into count values for binning)
FIT_CANDIDATES = (
    ("srcPacket", "meta", "binned"),
    (NOGREY_VARIABLE, "nogrey", "binned"),
    ("protocol_port", "meta", "degrees"),
    ("asn", "meta", "degrees"),
)


@dataclass
class RunConfig:
    key_file: Path
    packet_log: Path
    enrichment_log: Path
    out_dir: Path
    nv: int
    seed: int = 0
    thresholds: RelevanceThresholds = field(default_factory=RelevanceThresholds)
    alpha_grid: list[float] | None = None
    delta_grid: list[float] | None = None
    include_partial: bool = False

    @classmethod
    def load(cls, args) -> "RunConfig":
        raw = {}
        if args.config:
            config_path = Path(args.config)
            if not config_path.exists():
                raise ConfigError(f"config file not found: {config_path}")
            try:
                raw = json.loads(config_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid config JSON: {exc}") from None
        key_file = args.key or raw.get("keyFile")
        packet_log = getattr(args, "packets", None) or raw.get("packetLog")
        enrichment_log = getattr(args, "enrichment", None) or raw.get("enrichmentLog")
        out_dir = args.out or raw.get("outDir")
        nv = args.nv if args.nv is not None else raw.get("nv")
        seed = args.seed if args.seed is not None else raw.get("seed", 0)
        for name, value in (("keyFile", key_file), ("packetLog", packet_log),
                            ("enrichmentLog", enrichment_log), ("outDir", out_dir),
                            ("nv", nv)):
            if value is None:
                raise ConfigError(f"missing required config field {name!r}")
        thresholds_raw = raw.get("thresholds", {})
        thresholds = RelevanceThresholds(
            irrelevance=float(thresholds_raw.get("irrelevance", 0.98)),
            high_cardinality=int(thresholds_raw.get("highCardinality", 1000)),
        )
        grids = raw.get("fitGrids", {})
        alpha_grid = None
        if "alpha" in grids:
            lo, hi, step = grids["alpha"]
            alpha_grid = list(np.arange(lo, hi + 1e-9, step))
        delta_grid = list(grids["delta"]) if "delta" in grids else None
        cfg = cls(
            key_file=Path(key_file),
            packet_log=Path(packet_log),
            enrichment_log=Path(enrichment_log),
            out_dir=Path(out_dir),
            nv=int(nv),
            seed=int(seed),
            thresholds=thresholds,
            alpha_grid=alpha_grid,
            delta_grid=delta_grid,
            include_partial=bool(raw.get("includePartialWindows", False)),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.key_file.exists():
            raise ConfigError(f"key file not found: {self.key_file}")
        if not self.packet_log.exists():
            raise ConfigError(f"packet log not found: {self.packet_log}")
        if not self.enrichment_log.exists():
            raise ConfigError(f"enrichment log not found: {self.enrichment_log}")
        if self.nv < 2:
            raise ConfigError(f"nv must be >= 2, got {self.nv}")

    def manifest_dict(self) -> dict:
        # Content-relevant settings only: outDir deliberately excluded so
        # the same inputs produce the same manifest anywhere.
        return {
            "keyFile": str(self.key_file),
            "packetLog": str(self.packet_log),
            "enrichmentLog": str(self.enrichment_log),
            "nv": self.nv,
            "seed": self.seed,
            "thresholds": {
                "irrelevance": self.thresholds.irrelevance,
                "highCardinality": self.thresholds.high_cardinality,
            },
            "fitGrids": {
                "alpha": self.alpha_grid,
                "delta": self.delta_grid,
            },
            "includePartialWindows": self.include_partial,
        }


def _dedupe_window_ids(windows) -> None:
    seen: dict[str, int] = {}
    for window in windows:
        n = seen.get(window.window_id, 0) + 1
        seen[window.window_id] = n
        if n > 1:
            window.window_id = f"{window.window_id}-{n}"


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------

def _stage_correlate(windows, records, key, tracker, anonymize=True):
    joined_windows = []
    window_info = {}
    overlap_info = {}
    for window in windows:
        joined = join(window, records, key=key, anonymize_inputs=anonymize)
        joined_windows.append(joined)
        with tracker.open(f"{joined.window_id}.meta.tsv") as fh:
            joined.meta.to_tsv(fh)
        with tracker.open(f"{joined.window_id}.nogrey.tsv") as fh:
            joined.no_grey.to_tsv(fh)
        window_info[joined.window_id] = {
            "nv": window.nv,
            "durationSec": window.duration_sec,
            "partial": window.partial,
        }
        threshold = float(np.sqrt(window.nv))
        high = [src for src, count in window.counts.items() if count > threshold]
        fraction = overlap_fraction(window, records)
        overlap_info[joined.window_id] = {
            "threshold": threshold,
            "nHigh": len(high),
            "fraction": fraction,
        }
    tracker.write_text("windows.json", report.canonical_json(window_info))
    tracker.write_text("overlap.json", report.canonical_json(overlap_info))
    return joined_windows


def _stage_stats(joined_windows, tracker, thresholds):
    rows = []
    for joined in joined_windows:
        for variable in all_variables(joined):
            rows.append(dim_table(joined, variable))
    with tracker.open("dimstats.tsv") as fh:
        report.write_dimstats(rows, fh)
    exemplars = exemplar(row for row in rows if exemplar_eligible(row))
    with tracker.open("exemplar.tsv") as fh:
        report.write_exemplars(exemplars, fh)
    with tracker.open("exemplar.txt") as fh:
        report.write_exemplar_narratives(exemplars, fh)
    return rows


def _fit_histogram(joined, variable, source, mode):
    array = joined.no_grey if source == "nogrey" else joined.meta
    sliced = array.select_cols(variable + "|")
    if sliced.nnz == 0:
        return None
    if mode == "binned":
        label_counts = {int(split_col(col)[1]): count
                        for col, count in sliced.col_sums().items()}
        return hist_from_binned(label_counts)
    return log_bin(np.array(sorted(sliced.col_degrees().values()), dtype=np.int64))


def _stage_fit(joined_windows, tracker, thresholds, alpha_grid=None,
               delta_grid=None, include_partial=False):
    fits = []
    for joined in joined_windows:
        # Distribution summaries cover every window; model fits skip
        # partial windows unless asked otherwise.
        for variable in CATEGORICAL_VARIABLES:
            entries = categorical_distribution(joined.meta, variable)
            if entries:
                with tracker.open(f"cat_{joined.window_id}_{variable}.tsv") as fh:
                    report.write_categorical(entries, fh)
        last_seen = joined.meta.select_cols("last_seen|")
        if last_seen.nnz:
            values = []
            for col, count in last_seen.col_sums().items():
                values.extend([parse_timestamp(split_col(col)[1])] * count)
            with tracker.open(f"hours_{joined.window_id}.tsv") as fh:
                report.write_hours(hour_histogram(values), fh)

        if joined.partial and not include_partial:
            fits.append({"date": joined.window_id, "skipped": "partial window"})
            continue
        for variable, source, mode in FIT_CANDIDATES:
            entry = {"date": joined.window_id, "variable": variable}
            array = joined.no_grey if source == "nogrey" else joined.meta
            row = dim_table_from_array(joined.window_id, variable, array)
            if row.nnz == 0:
                fits.append({**entry, "skipped": "no data"})
                continue
            if classify_relevance(row, thresholds) is Relevance.IRRELEVANT:
                fits.append({**entry, "skipped": "classified irrelevant"})
                continue
            hist = _fit_histogram(joined, variable, source, mode)
            try:
                fit = fit_zm(hist, alpha_grid=alpha_grid, delta_grid=delta_grid)
            except FitError as exc:
                fits.append({**entry, "skipped": str(exc)})
                continue
            model = binned_model_fractions(fit.params, hist.labels)
            with tracker.open(f"dist_{joined.window_id}_{variable}.tsv") as fh:
                report.write_distribution(hist.labels, hist.fractions, model, fh)
            fits.append({**entry, "alpha": fit.params.alpha, "delta": fit.params.delta,
                         "dmax": fit.params.dmax, "mse": fit.mse})
    tracker.write_text("fits.json", report.canonical_json(fits))
    return fits


def _load_joined(in_dir: Path) -> list[JoinedWindow]:
    info_path = in_dir / "windows.json"
    window_info = {}
    if info_path.exists():
        window_info = json.loads(info_path.read_text(encoding="utf-8"))
    joined = []
    for meta_path in sorted(in_dir.glob("*.meta.tsv")):
        window_id = meta_path.name[: -len(".meta.tsv")]
        with open(meta_path, encoding="utf-8") as fh:
            meta = AssocArray.from_tsv(fh)
        nogrey_path = in_dir / f"{window_id}.nogrey.tsv"
        if nogrey_path.exists():
            with open(nogrey_path, encoding="utf-8") as fh:
                no_grey = AssocArray.from_tsv(fh)
        else:
            no_grey = AssocArray.empty()
        info = window_info.get(window_id, {})
        joined.append(JoinedWindow(window_id=window_id, meta=meta, no_grey=no_grey,
                                   nv=int(info.get("nv", 0)),
                                   partial=bool(info.get("partial", False))))
    if not joined:
        raise ConfigError(f"no *.meta.tsv window files found in {in_dir}")
    return joined


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    raw = {}
    if args.config:
        config_path = Path(args.config)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    kwargs = {
        "n_sources": args.sources if args.sources is not None else raw.get("nSources", 2000),
        "nv": args.nv if args.nv is not None else raw.get("nv", 1 << 20),
        "alpha": args.alpha if args.alpha is not None else raw.get("alpha", 1.8),
        "delta": args.delta if args.delta is not None else raw.get("delta", 0.0),
        "overlap_frac": args.overlap if args.overlap is not None else raw.get("overlapFrac", 0.7),
        "seed": args.seed if args.seed is not None else raw.get("seed", 0),
        "time_window_sec": (args.time_window if args.time_window is not None
                            else raw.get("timeWindowSec", 1200.0)),
    }
    if raw.get("dmax") is not None:
        kwargs["dmax"] = int(raw["dmax"])
    if raw.get("start"):
        kwargs["start"] = parse_timestamp(raw["start"])
    if raw.get("tables"):
        kwargs["tables"] = {k: [(str(v), float(w)) for v, w in rows]
                            for k, rows in raw["tables"].items()}
    try:
        cfg = SynthConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dataset = gen_synthetic(cfg)
    paths = dataset.write(args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def _sniff_enrichment(path: Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                return line.startswith("{")
    return False


def cmd_anon(args) -> int:
    key_path = Path(args.key)
    if not key_path.exists():
        raise ConfigError(f"key file not found: {key_path}")
    in_path = Path(args.infile)
    if not in_path.exists():
        raise ConfigError(f"input file not found: {in_path}")
    mapper = AnonKey.load(key_path).mapper()
    out_path = Path(args.outfile)
    is_enrichment = _sniff_enrichment(in_path)
    try:
        with open(in_path, encoding="utf-8") as src, \
                open(out_path, "w", encoding="utf-8", newline="\n") as dst:
            for lineno, line in enumerate(src, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if is_enrichment:
                    try:
                        obj = json.loads(line)
                        obj["ip"] = mapper.anonymize(obj["ip"])
                    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                        raise ParseError(f"cannot rewrite record ({exc})", lineno) from None
                    dst.write(json.dumps(obj, separators=(", ", ": ")) + "\n")
                else:
                    parts = line.split("\t")
                    if len(parts) != 2:
                        raise ParseError(f"expected 'epoch_ns<TAB>src_ip', got {line!r}", lineno)
                    try:
                        anon = mapper.anonymize(parts[1])
                    except ValueError as exc:
                        raise ParseError(str(exc), lineno) from None
                    dst.write(f"{parts[0]}\t{anon}\n")
    except NetcharError as exc:
        out_path.unlink(missing_ok=True)
        print(f"error: anonymization failed: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    return EXIT_OK


def cmd_correlate(args) -> int:
    key_path = Path(args.key)
    if not key_path.exists():
        raise ConfigError(f"key file not found: {key_path}")
    for path in (args.packets, args.enrichment):
        if not Path(path).exists():
            raise ConfigError(f"input file not found: {path}")
    if args.nv < 2:
        raise ConfigError(f"nv must be >= 2, got {args.nv}")
    key = AnonKey.load(key_path)
    tracker = report.OutputTracker(Path(args.out))
    stage = "parse"
    try:
        with open(args.packets, encoding="utf-8") as fh:
            windows = parse_packet_log(fh, args.nv)
        _dedupe_window_ids(windows)
        with open(args.enrichment, encoding="utf-8") as fh:
            records = parse_enrichment(fh)
        stage = "correlate"
        _stage_correlate(windows, records, key, tracker,
                         anonymize=not args.pre_anonymized)
    except NetcharError as exc:
        tracker.cleanup()
        print(f"error: stage {stage} failed: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    return EXIT_OK


def cmd_stats(args) -> int:
    in_dir = Path(args.indir)
    if not in_dir.is_dir():
        raise ConfigError(f"input directory not found: {in_dir}")
    thresholds = RelevanceThresholds(irrelevance=args.irrelevance_threshold,
                                     high_cardinality=args.high_card_threshold)
    tracker = report.OutputTracker(Path(args.out))
    try:
        joined_windows = _load_joined(in_dir)
        _stage_stats(joined_windows, tracker, thresholds)
    except NetcharError as exc:
        tracker.cleanup()
        print(f"error: stage stats failed: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    return EXIT_OK


def cmd_fit(args) -> int:
    in_dir = Path(args.indir)
    if not in_dir.is_dir():
        raise ConfigError(f"input directory not found: {in_dir}")
    thresholds = RelevanceThresholds(irrelevance=args.irrelevance_threshold,
                                     high_cardinality=args.high_card_threshold)
    tracker = report.OutputTracker(Path(args.out))
    try:
        joined_windows = _load_joined(in_dir)
        _stage_fit(joined_windows, tracker, thresholds,
                   include_partial=args.include_partial)
    except NetcharError as exc:
        tracker.cleanup()
        print(f"error: stage fit failed: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    return EXIT_OK


def cmd_run(args) -> int:
    config = RunConfig.load(args)
    key = AnonKey.load(config.key_file)
    tracker = report.OutputTracker(config.out_dir)
    stage = "parse"
    try:
        with open(config.packet_log, encoding="utf-8") as fh:
            windows = parse_packet_log(fh, config.nv)
        if not windows:
            raise ParseError("packet log contains no packets")
        _dedupe_window_ids(windows)
        with open(config.enrichment_log, encoding="utf-8") as fh:
            records = parse_enrichment(fh)

        stage = "correlate"
        joined_windows = _stage_correlate(windows, records, key, tracker)

        stage = "stats"
        _stage_stats(joined_windows, tracker, config.thresholds)

        stage = "fit"
        _stage_fit(joined_windows, tracker, config.thresholds,
                   alpha_grid=config.alpha_grid, delta_grid=config.delta_grid,
                   include_partial=config.include_partial)

        stage = "manifest"
        manifest = report.build_manifest(
            version=__version__,
            config=config.manifest_dict(),
            inputs={
                "keyFile": config.key_file,
                "packetLog": config.packet_log,
                "enrichmentLog": config.enrichment_log,
            },
            outputs=dict(tracker.files),
        )
        tracker.write_text("manifest.json", report.canonical_json(manifest))
    except NetcharError as exc:
        tracker.cleanup()
        print(f"error: stage {stage} failed: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netchar",
        description="Statistical characterization of darkspace network traffic",
    )
    parser.add_argument("--version", action="version", version=f"netchar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--config", help="JSON config file")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--sources", type=int, help="number of distinct sources")
    p_synth.add_argument("--nv", type=int, help="window size / sampler support")
    p_synth.add_argument("--alpha", type=float)
    p_synth.add_argument("--delta", type=float)
    p_synth.add_argument("--overlap", type=float, help="fraction of sources enriched")
    p_synth.add_argument("--seed", type=int)
    p_synth.add_argument("--time-window", type=float, dest="time_window",
                         help="packet log time span in seconds")
    p_synth.set_defaults(func=cmd_synth)

    p_anon = sub.add_parser("anon", help="anonymize the source-IP field of a log")
    p_anon.add_argument("--key", required=True, help="key file (64 hex chars)")
    p_anon.add_argument("--in", dest="infile", required=True)
    p_anon.add_argument("--out", dest="outfile", required=True)
    p_anon.set_defaults(func=cmd_anon)

    p_corr = sub.add_parser("correlate", help="window a packet log and join enrichment")
    p_corr.add_argument("--key", required=True)
    p_corr.add_argument("--packets", required=True)
    p_corr.add_argument("--enrichment", required=True)
    p_corr.add_argument("--nv", type=int, required=True, help="packets per window")
    p_corr.add_argument("--out", required=True)
    p_corr.add_argument("--pre-anonymized", action="store_true",
                        help="inputs are already anonymized under the key")
    p_corr.set_defaults(func=cmd_correlate)

    p_stats = sub.add_parser("stats", help="dimensional statistics + exemplars")
    p_stats.add_argument("--in", dest="indir", required=True,
                         help="directory with *.meta.tsv / *.nogrey.tsv")
    p_stats.add_argument("--out", required=True)
    p_stats.add_argument("--irrelevance-threshold", type=float, default=0.98)
    p_stats.add_argument("--high-card-threshold", type=int, default=1000)
    p_stats.set_defaults(func=cmd_stats)

    p_fit = sub.add_parser("fit", help="heavy-tail fits and distributions")
    p_fit.add_argument("--in", dest="indir", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--include-partial", action="store_true",
                       help="fit partial windows too")
    p_fit.add_argument("--irrelevance-threshold", type=float, default=0.98)
    p_fit.add_argument("--high-card-threshold", type=int, default=1000)
    p_fit.set_defaults(func=cmd_fit)

    p_run = sub.add_parser("run", help="full pipeline")
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument("--key", help="key file (overrides config)")
    p_run.add_argument("--nv", type=int, help="packets per window (overrides config)")
    p_run.add_argument("--seed", type=int, help="run seed (overrides config)")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
