"""idsctl: command-line entry point for the detection toolkit.

One verb per pipeline stage: ingest | train | evaluate | screen | detect.
Data goes to files and standard output; diagnostics and timings go to the
error stream. Exit code 0 on success, 2 for empty input, 1 otherwise.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

from . import entropy as ent
from . import flow as fl
from . import metrics as mt
from . import pipeline as pl
from .config import DEFAULT_REBALANCE_TARGETS, RunConfig, load_config
from .dataset import (
    ClassLabel,
    apply_encode,
    fit_encode,
    load_dataset,
    load_encoding,
    parse_kdd,
    save_dataset,
    save_encoding,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2


def _err(msg: str) -> None:
    print(f"idsctl: {msg}", file=sys.stderr)


def _build_config(args) -> RunConfig:
    """Defaults < IDS_SEED env < config file < command-line flags."""
    cfg = RunConfig()
    env_seed = os.environ.get("IDS_SEED")
    if env_seed is not None:
        cfg = replace(cfg, master_seed=int(env_seed))
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "features", None) is not None:
        overrides["feature_count"] = args.features
    if getattr(args, "trees", None) is not None:
        overrides["nt"] = args.trees
    if getattr(args, "forest_size", None) is not None:
        overrides["forest_size"] = args.forest_size
    if getattr(args, "clusters", None) is not None:
        overrides["clusters"] = args.clusters
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if getattr(args, "window", None) is not None:
        overrides["entropy_window"] = args.window
    if getattr(args, "interval", None) is not None:
        overrides["interval_seconds"] = args.interval
    if getattr(args, "rebalance_targets", None):
        from .config import _targets_from_text

        overrides["rebalance_targets"] = _targets_from_text(args.rebalance_targets)
    elif getattr(args, "rebalance", False):
        overrides["rebalance_targets"] = dict(DEFAULT_REBALANCE_TARGETS)
    return replace(cfg, **overrides) if overrides else cfg


def _read_text(path: str) -> str:
    with open(path, "r") as fh:
        return fh.read()


def _histogram_table(hist: dict[ClassLabel, int]) -> str:
    total = sum(hist.values())
    lines = [f"{'Class':<8} {'Samples':>10} {'Percentage':>11}"]
    for cls in ClassLabel:
        n = hist[cls]
        pct = 100.0 * n / total if total else 0.0
        lines.append(f"{cls.display:<8} {n:>10} {pct:>10.2f}%")
    lines.append(f"{'Total':<8} {total:>10}")
    return "\n".join(lines)


def cmd_ingest(args) -> int:
    cfg = _build_config(args)
    try:
        text = _read_text(args.input)
    except OSError as exc:
        _err(f"cannot read {args.input}: {exc}")
        return EXIT_ERROR
    if not text.strip():
        _err("empty input")
        return EXIT_EMPTY
    first_line = text.splitlines()[0]
    if first_line.split(",")[0].strip() == "timestamp":
        packets = fl.parse_packet_log(text)
        if not packets:
            _err("empty input")
            return EXIT_EMPTY
        flows = fl.partition(packets, cfg.interval_seconds)
        data = fl.flows_to_dataset(flows)
        save_dataset(data, args.output)
        intervals = {f.interval_index for f in flows}
        print(f"packets   {len(packets)}")
        print(f"flows     {len(flows)}")
        print(f"intervals {len(intervals)}")
        return EXIT_OK
    data = parse_kdd(text)
    encoded = fit_encode(data)
    save_dataset(encoded, args.output)
    save_encoding(encoded.encoding, args.output + ".encoding")
    print(_histogram_table(encoded.class_histogram()))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _build_config(args)
    encoding = None
    enc_path = args.input + ".encoding"
    if os.path.exists(enc_path):
        encoding = load_encoding(enc_path)
    data = load_dataset(args.input, encoding=encoding)
    if data.labels is None:
        _err("training data has no labels")
        return EXIT_ERROR
    start = time.perf_counter()
    model = pl.train(data, cfg)
    elapsed = time.perf_counter() - start
    pl.save_model(model, args.model)
    if model.importance is not None:
        names = model.schema.names
        scores = model.importance
        print("feature_index,feature_name,score")
        for idx in sorted(
            model.selected_features, key=lambda i: -scores[i]
        ):
            print(f"{idx},{names[idx]},{float(scores[idx])!r}")
    else:
        print("feature selection: identity (all features kept)")
    _err(f"trained in {elapsed:.1f}s; bundle written to {args.model}")
    return EXIT_OK


def _load_test_data(path: str, model: pl.HybridModel):
    text_head = open(path).readline()
    if text_head.startswith("#schema"):
        data = load_dataset(path, encoding=model.encoding)
        if data.schema.names != model.schema.names:
            raise ValueError("model/data schema mismatch")
        return data
    raw = parse_kdd(_read_text(path))
    if model.encoding is None:
        raise ValueError("model bundle lacks an encoding state for raw input")
    return apply_encode(raw, model.encoding)


def cmd_evaluate(args) -> int:
    model = pl.load_model(args.model)
    data = _load_test_data(args.input, model)
    if data.labels is None:
        _err("evaluation data has no labels")
        return EXIT_ERROR
    cost_matrix = mt.load_cost_matrix(args.cost_matrix) if args.cost_matrix else None
    start = time.perf_counter()
    preds = pl.classify_many(model, data.matrix)
    elapsed = time.perf_counter() - start
    cm = mt.confusion(data.labels, preds)
    report = mt.macro_report(cm, cost_matrix, time_seconds=elapsed)
    with open(args.report, "w") as fh:
        fh.write(report.to_csv())
        for cls in ClassLabel:
            row = ",".join(str(int(v)) for v in cm.counts[cls])
            fh.write(f"confusion_{cls.display},{row}\n")
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_screen(args) -> int:
    cfg = _build_config(args)
    text = _read_text(args.input)
    if not text.strip():
        _err("empty input")
        return EXIT_EMPTY
    packets = fl.parse_packet_log(text)
    flows = fl.partition(packets, cfg.interval_seconds)
    windows = ent.make_windows(window=cfg.entropy_window, warmup=cfg.entropy_warmup)
    lines = [ent.REPORT_HEADER]
    suspicious = 0
    for interval_index, members in fl.group_by_interval(flows):
        result = ent.screen_interval(members, windows, interval_index)
        suspicious += result.verdict == ent.SUSPICIOUS
        lines.append(result.report_line())
    with open(args.report, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"intervals  {max(len(lines) - 1, 0)}")
    print(f"suspicious {suspicious}")
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _build_config(args)
    model = pl.load_model(args.model)
    model.config = replace(
        model.config,
        entropy_window=cfg.entropy_window,
        entropy_warmup=cfg.entropy_warmup,
    )
    text = _read_text(args.input)
    if not text.strip():
        _err("empty input")
        return EXIT_EMPTY
    packets = fl.parse_packet_log(text)
    flows = fl.partition(packets, cfg.interval_seconds)
    result = pl.detect_stream(model, flows, gate=(args.gate == "on"))
    with open(args.report, "w") as fh:
        fh.write(ent.REPORT_HEADER + "\n")
        for interval in result.intervals:
            fh.write(interval.report_line() + "\n")
    with open(args.output, "w") as fh:
        fh.write(
            "interval_index,src_ip,dst_ip,src_port,dst_port,protocol,"
            "duration_ms,packet_count,verdict\n"
        )
        for f, verdict in zip(flows, result.verdicts):
            fh.write(
                f"{f.interval_index},{f.id.src_ip},{f.id.dst_ip},"
                f"{f.id.src_port},{f.id.dst_port},{f.id.protocol},"
                f"{f.id.duration_ms},{f.packet_count},{verdict.display}\n"
            )
    n_suspicious = sum(i.verdict == ent.SUSPICIOUS for i in result.intervals)
    print(f"flows      {len(flows)}")
    print(f"intervals  {len(result.intervals)}")
    print(f"suspicious {n_suspicious}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="line-oriented key = value config file")
    p.add_argument("--seed", type=int, help="master seed (overrides config/IDS_SEED)")
    p.add_argument("--features", type=int, help="selected feature count k")
    p.add_argument("--trees", type=int, help="boosting rounds NT")
    p.add_argument("--forest-size", dest="forest_size", type=int,
                   help="trees in the feature-ranking forest")
    p.add_argument("--clusters", type=int, help="k-means cluster count K")
    p.add_argument("--threads", type=int, help="worker thread cap")
    p.add_argument("--window", type=int, help="entropy history window W")
    p.add_argument("--interval", type=float, help="collection interval seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idsctl", description="flow intrusion-detection toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse + encode a KDD CSV or packet log")
    p.add_argument("input")
    p.add_argument("output")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a hybrid model bundle")
    p.add_argument("input", help="encoded dataset from ingest")
    p.add_argument("model", help="output bundle directory")
    p.add_argument("--rebalance", action="store_true",
                   help="rebalance classes with the default targets")
    p.add_argument("--rebalance-targets", dest="rebalance_targets",
                   help="per-class targets, e.g. Normal:20000,U2R:4000")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="classify a test set and report metrics")
    p.add_argument("model", help="model bundle directory")
    p.add_argument("input", help="raw KDD CSV or encoded dataset")
    p.add_argument("report", help="output report CSV")
    p.add_argument("--cost-matrix", dest="cost_matrix",
                   help="override the default cost matrix (5x5 CSV)")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("screen", help="entropy-screen a packet log")
    p.add_argument("input", help="packet log CSV")
    p.add_argument("report", help="output screening report CSV")
    _add_common(p)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("detect", help="screen + classify a packet log")
    p.add_argument("model", help="model bundle directory")
    p.add_argument("input", help="packet log CSV")
    p.add_argument("output", help="per-flow verdict CSV")
    p.add_argument("report", help="interval screening report CSV")
    p.add_argument("--gate", choices=("on", "off"), default="on",
                   help="classify only suspicious intervals (default on)")
    _add_common(p)
    p.set_defaults(func=cmd_detect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except (ValueError, OSError) as exc:
        _err(str(exc))
        code = EXIT_ERROR
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
