"""Command-line entry point: ``bufferdet {synth,simulate,eval,sweep,train-head}``.

Exit codes: 0 success, 2 validation error, 3 causality audit failure,
4 I/O error. Every command writes a ``manifest.json`` next to its outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Sequence

from . import __version__
from .annotations import load_annotations
from .engine import (
    BufferConfig,
    HeadScorer,
    buffer_budget,
    passthrough_scorer,
    read_detections,
    run_videos,
    write_detections,
)
from .errors import BufferDetError, SchemaViolation, ValidationError
from .evaluate import DEFAULT_OFFSETS, EvalConfig, p_map, sweep_csv
from .head import KINDS, HeadWeights, accuracy, synth_boundary_task, train_head, write_loss_trace
from .kernels import BACKEND
from .streams import (
    SynthConfig,
    feature_filename,
    parse_feature_stream,
    parse_score_stream,
    stream_filename,
    synth_scores,
    validate_stream_against_video,
    write_score_stream,
)

log = logging.getLogger("bufferdet")

EXIT_OK, EXIT_VALIDATION, EXIT_CAUSALITY, EXIT_IO = 0, 2, 3, 4


class CausalityFailure(BufferDetError):
    pass


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, inputs: Sequence[Path], outputs: Sequence[Path]) -> None:
    manifest = {
        "tool": "bufferdet",
        "version": __version__,
        "command": command,
        "kernel_backend": BACKEND,
        "config": config,
        "inputs": {str(p): _digest(p) for p in sorted(inputs, key=str)},
        "outputs": [str(p) for p in outputs],
    }
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# -- synth -----------------------------------------------------------------

def cmd_synth(args) -> int:
    aset = load_annotations(args.annotations)
    cfg = SynthConfig(
        kernel=args.kernel,
        kernel_width=args.kernel_width,
        plateau_halfwidth=args.plateau_halfwidth,
        peak_amplitude=args.peak,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    out_dir = Path(args.out_dir)
    outputs = []
    for stream in synth_scores(aset, args.task, cfg, args.stride):
        path = out_dir / stream_filename(stream.video_id, args.task)
        _atomic_write(path, write_score_stream(stream))
        outputs.append(path)
    _write_manifest(
        out_dir,
        "synth",
        {"task": args.task, "stride": args.stride, "synth": asdict(cfg), "seed": args.seed},
        [Path(args.annotations)],
        outputs,
    )
    return EXIT_OK


# -- simulate --------------------------------------------------------------

def _buffer_config(args, **override) -> BufferConfig:
    values = dict(
        clip_len=args.clip_len,
        lookahead_ratio=args.ratio,
        wbs_window=args.wbs_window,
        stride=args.stride,
    )
    values.update(override)
    return BufferConfig(**values)


def _load_payloads(args, aset):
    """Return (streams by video, scorer, input paths)."""
    streams: Dict[str, object] = {}
    inputs: List[Path] = []
    if args.features:
        if not args.weights:
            raise SchemaViolation("--features requires --weights")
        weights = HeadWeights.from_json(Path(args.weights).read_text())
        inputs.append(Path(args.weights))
        scorer = HeadScorer(weights)
        for v in aset.videos:
            path = Path(args.features) / feature_filename(v.id)
            if not path.exists():
                raise FileNotFoundError(f"no feature file for video {v.id!r}: {path}")
            streams[v.id] = parse_feature_stream(path.read_text(), v.id)
            inputs.append(path)
    else:
        scorer = passthrough_scorer
        for v in aset.videos:
            path = Path(args.scores) / stream_filename(v.id, args.task)
            if not path.exists():
                raise FileNotFoundError(f"no score file for video {v.id!r}: {path}")
            stream = parse_score_stream(path.read_text(), v.id, args.task)
            if stream.num_classes != aset.num_classes:
                raise SchemaViolation(
                    f"video {v.id!r}: score file has {stream.num_classes} action classes, "
                    f"annotations have {aset.num_classes}"
                )
            streams[v.id] = stream
            inputs.append(path)
    for v in aset.videos:
        validate_stream_against_video(streams[v.id], v)
    return streams, scorer, inputs


def _audit_summary(audits, cfg, fps) -> dict:
    frames, seconds = buffer_budget(cfg, fps)
    keys = ("scorer_calls", "finalizations", "causality_violations", "latency_violations",
            "duplicate_finalizations", "warmup_detections", "detections")
    out = {k: sum(getattr(a, k) for a in audits) for k in keys}
    out.update(
        buffer_frames=frames,
        buffer_seconds=seconds,
        lookahead=cfg.lookahead,
        per_video=[a.to_dict() for a in audits],
    )
    return out


def cmd_simulate(args) -> int:
    if not args.scores and not args.features:
        raise SchemaViolation("one of --scores or --features is required")
    aset = load_annotations(args.annotations)
    cfg = _buffer_config(args)
    streams, scorer, inputs = _load_payloads(args, aset)
    dets, audits = run_videos(aset, streams, scorer, cfg, args.task, args.min_score, args.workers)

    out_dir = Path(args.out)
    det_path, audit_path = out_dir / "detections.jsonl", out_dir / "audit.json"
    summary = _audit_summary(audits, cfg, aset.fps)
    _atomic_write(det_path, write_detections(dets, aset))
    _atomic_write(audit_path, json.dumps(summary, indent=2) + "\n")
    _write_manifest(
        out_dir,
        "simulate",
        {"task": args.task, "buffer": asdict(cfg), "min_score": args.min_score, "workers": args.workers},
        [Path(args.annotations)] + inputs,
        [det_path, audit_path],
    )
    if summary["causality_violations"] or summary["latency_violations"] or summary["duplicate_finalizations"]:
        raise CausalityFailure(f"audit failed: {summary['causality_violations']} causality violations")
    return EXIT_OK


# -- eval ------------------------------------------------------------------

def cmd_eval(args) -> int:
    aset = load_annotations(args.annotations)
    dets = read_detections(Path(args.detections).read_text(), aset)
    report = p_map(dets, aset, EvalConfig(tuple(args.offsets), args.task))
    out_dir = Path(args.out)
    report_path, sweep_path = out_dir / "report.json", out_dir / "sweep.csv"
    _atomic_write(report_path, report.to_json())
    _atomic_write(sweep_path, sweep_csv([(o, report.map[o]) for o in report.offsets]))
    _write_manifest(
        out_dir,
        "eval",
        {"task": args.task, "offsets": list(report.offsets)},
        [Path(args.annotations), Path(args.detections)],
        [report_path, sweep_path],
    )
    return EXIT_OK


# -- sweep -----------------------------------------------------------------

_AXES = {"ratio": "lookahead_ratio", "clip-len": "clip_len", "wbs-window": "wbs_window"}


def cmd_sweep(args) -> int:
    if not args.scores and not args.features:
        raise SchemaViolation("one of --scores or --features is required")
    aset = load_annotations(args.annotations)
    streams, scorer, inputs = _load_payloads(args, aset)
    ecfg = EvalConfig(tuple(args.offsets), args.task)
    field_name = _AXES[args.axis]
    rows = ["value,offset,map\n"]
    for value in args.values:
        v = value if field_name == "lookahead_ratio" else int(value)
        cfg = _buffer_config(args, **{field_name: v})
        dets, audits = run_videos(aset, streams, scorer, cfg, args.task, args.min_score, args.workers)
        if any(not a.ok for a in audits):
            raise CausalityFailure(f"audit failed at {args.axis}={value}")
        report = p_map(dets, aset, ecfg)
        for o in ecfg.offsets:
            m = report.map[o]
            rows.append(f"{value:g},{o},{'' if m is None else format(m, '.12g')}\n")
    out_dir = Path(args.out)
    path = out_dir / "sweep.csv"
    _atomic_write(path, "".join(rows))
    _write_manifest(
        out_dir,
        "sweep",
        {
            "axis": args.axis,
            "values": list(args.values),
            "task": args.task,
            "base": asdict(_buffer_config(args)),
            "offsets": list(ecfg.offsets),
            "min_score": args.min_score,
        },
        [Path(args.annotations)] + inputs,
        [path],
    )
    return EXIT_OK


# -- train-head ------------------------------------------------------------

def cmd_train_head(args) -> int:
    examples = synth_boundary_task(
        args.T, args.D, args.n_examples, args.seed, args.num_classes, args.noise_sigma
    )
    n_test = int(round(len(examples) * args.holdout))
    train, test = examples[: len(examples) - n_test], examples[len(examples) - n_test:]
    result = train_head(
        train, args.kind, args.num_classes, args.epochs, args.lr, args.batch_size, args.seed
    )
    out_dir = Path(args.out)
    w_path, loss_path, metrics_path = out_dir / "weights.json", out_dir / "loss.csv", out_dir / "metrics.csv"
    _atomic_write(w_path, result.weights.to_json() + "\n")
    _atomic_write(loss_path, write_loss_trace(result.losses))
    metrics = "split,accuracy\n" + "".join(
        f"{name},{accuracy(result.weights, part):.12g}\n" for name, part in (("train", train), ("test", test))
    )
    _atomic_write(metrics_path, metrics)
    cfg = {k: getattr(args, k) for k in (
        "kind", "T", "D", "n_examples", "num_classes", "noise_sigma", "holdout",
        "epochs", "lr", "batch_size", "seed")}
    _write_manifest(out_dir, "train-head", cfg, [], [w_path, loss_path, metrics_path])
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _add_buffer_flags(p) -> None:
    p.add_argument("--annotations", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scores", help="directory of <video>.<task>.csv score files")
    src.add_argument("--features", help="directory of <video>.features.csv feature files")
    p.add_argument("--weights", help="head weights JSON (with --features)")
    p.add_argument("--task", choices=("start", "end"), default="start")
    p.add_argument("--clip-len", type=int, default=64)
    p.add_argument("--ratio", type=float, default=0.75)
    p.add_argument("--wbs-window", type=int, default=30)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--min-score", type=float, default=0.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bufferdet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize score streams from annotations")
    p.add_argument("--annotations", required=True)
    p.add_argument("--task", choices=("start", "end"), default="start")
    p.add_argument("--kernel", choices=("triangular", "plateau"), default="triangular")
    p.add_argument("--kernel-width", type=int, default=8)
    p.add_argument("--plateau-halfwidth", type=int, default=15)
    p.add_argument("--peak", type=float, default=0.8)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run the buffered stream and emit detections")
    _add_buffer_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="point-level mAP of a detections file")
    p.add_argument("--detections", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--task", choices=("start", "end"), default="start")
    p.add_argument("--offsets", type=_int_list, default=list(DEFAULT_OFFSETS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="mAP over one buffer parameter")
    p.add_argument("--axis", choices=tuple(_AXES), required=True)
    p.add_argument("--values", type=_float_list, required=True)
    p.add_argument("--offsets", type=_int_list, default=list(DEFAULT_OFFSETS))
    _add_buffer_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train-head", help="train a toy flattened or pooled head")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--D", type=int, default=4)
    p.add_argument("--n-examples", type=int, default=2000)
    p.add_argument("--num-classes", type=int, default=2)
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_head)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CausalityFailure as exc:
        print(f"bufferdet: {exc}", file=sys.stderr)
        return EXIT_CAUSALITY
    except ValidationError as exc:
        print(f"bufferdet: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"bufferdet: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BufferDetError as exc:
        print(f"bufferdet: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
