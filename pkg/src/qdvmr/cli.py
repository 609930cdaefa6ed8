"""Command-line entry point: gen-synth, train, eval, predict, ablate, visualize.

Every command validates its inputs before touching the filesystem and exits
0 on success, 2 on usage errors, 3 on validation/schema errors, and 4 on
runtime failures. Flags mirror the JSON config keys one-to-one; a flag
always wins over the config file.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import torch

from . import featurestore as fs
from . import trainer
from .metrics import MetricError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

SVG_WIDTH = 800
SVG_MARGIN = 40
PLOT_WIDTH = SVG_WIDTH - 2 * SVG_MARGIN


def _time_to_x(t: float, duration: float) -> float:
    return SVG_MARGIN + (t / duration) * PLOT_WIDTH


def render_timeline_svg(
    sample_id: str,
    duration: float,
    gt_moments: Sequence[Sequence[float]],
    predictions: Sequence[Sequence[float]],
    saliency: Sequence[float],
    clip_len: float,
    max_rows: int = 5,
) -> str:
    """Self-contained SVG: ground-truth bars, scored prediction bars, saliency curve."""
    pred_rows = min(max_rows, len(predictions))
    height = 120 + 24 * pred_rows + 80
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{height}" viewBox="0 0 {SVG_WIDTH} {height}">',
        f'<text x="{SVG_MARGIN}" y="20" font-size="14" font-family="sans-serif">'
        f"sample {sample_id} ({duration:g}s)</text>",
        f'<line x1="{SVG_MARGIN}" y1="40" x2="{SVG_MARGIN + PLOT_WIDTH}" y2="40" '
        'stroke="#999" stroke-width="1"/>',
    ]
    for tick in range(0, int(duration) + 1, max(1, int(duration // 8) or 1)):
        x = _time_to_x(tick, duration)
        lines.append(
            f'<line x1="{x:.2f}" y1="36" x2="{x:.2f}" y2="44" stroke="#999"/>'
            f'<text x="{x:.2f}" y="58" font-size="9" text-anchor="middle" '
            f'font-family="sans-serif">{tick}</text>'
        )
    y = 70
    lines.append(
        f'<text x="{SVG_MARGIN}" y="{y - 4}" font-size="10" font-family="sans-serif">'
        "ground truth</text>"
    )
    for start, end in gt_moments:
        x0 = _time_to_x(start, duration)
        x1 = _time_to_x(end, duration)
        lines.append(
            f'<rect class="gt" x="{x0:.3f}" y="{y}" width="{x1 - x0:.3f}" height="14" '
            'fill="#2a9d8f" fill-opacity="0.85"/>'
        )
    y += 30
    for rank, (start, end, score) in enumerate(predictions[:pred_rows]):
        x0 = _time_to_x(start, duration)
        x1 = _time_to_x(end, duration)
        lines.append(
            f'<rect class="pred" x="{x0:.3f}" y="{y}" width="{max(x1 - x0, 0.5):.3f}" '
            f'height="12" fill="#e76f51" fill-opacity="{0.35 + 0.6 * score:.2f}"/>'
            f'<text x="{x1 + 4:.2f}" y="{y + 10}" font-size="9" '
            f'font-family="sans-serif">#{rank + 1} {score:.2f}</text>'
        )
        y += 24
    if saliency:
        y += 14
        lines.append(
            f'<text x="{SVG_MARGIN}" y="{y - 4}" font-size="10" font-family="sans-serif">'
            "saliency</text>"
        )
        lo = min(saliency)
        hi = max(saliency)
        span = (hi - lo) or 1.0
        points = []
        for i, s in enumerate(saliency):
            cx = _time_to_x((i + 0.5) * clip_len, duration)
            cy = y + 40 - 36 * (s - lo) / span
            points.append(f"{cx:.2f},{cy:.2f}")
        lines.append(
            f'<polyline class="saliency" points="{" ".join(points)}" fill="none" '
            'stroke="#264653" stroke-width="1.5"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines)


def _write_json(path: Path, payload: Dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_from_args(args: argparse.Namespace) -> trainer.TrainConfig:
    """Profile defaults, then config file, then explicit flags."""
    file_overrides: Dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise fs.ValidationError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            file_overrides = json.load(fh)
    profile = getattr(args, "profile", None) or file_overrides.pop("profile", "desk")
    file_overrides.pop("profile", None)
    config = trainer.make_config(profile, **file_overrides)
    flag_overrides: Dict = {}
    for key in (
        "epochs",
        "batch_size",
        "lr",
        "seed",
        "hidden_dim",
        "validate_every",
        "top_k",
        "nms_iou",
    ):
        value = getattr(args, key, None)
        if value is not None:
            flag_overrides[key] = value
    if getattr(args, "toggles", None) is not None:
        names = [t for t in args.toggles.split(",") if t]
        flag_overrides["toggles"] = tuple(names)
    config = replace(config, **flag_overrides)
    config.validate()
    return config


def _add_common_train_flags(parser: argparse.ArgumentParser) -> None:
    skip = argparse.SUPPRESS  # profile/config supply the default
    parser.add_argument("--profile", choices=("desk", "paper"), default=skip,
                        help="hyperparameter profile (default: desk)")
    parser.add_argument("--config", default=skip, help="JSON config file")
    parser.add_argument("--seed", type=int, default=skip,
                        help="RNG seed (profile default: 0)")
    parser.add_argument("--epochs", type=int, default=skip,
                        help="training epochs (profile default: 200)")
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=skip,
                        help="samples per step (desk 8, paper 256)")
    parser.add_argument("--lr", type=float, default=skip,
                        help="learning rate (desk 1e-3, paper 2e-4)")
    parser.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=skip,
                        help="shared hidden size (desk 64, paper 256)")
    parser.add_argument("--validate-every", dest="validate_every", type=int,
                        default=skip, help="epochs between validation passes")
    parser.add_argument("--toggles", default=skip,
                        help="comma list from gpa,ve,qe,cue (profile default: all)")
    parser.add_argument("--topk", dest="top_k", type=int, default=skip,
                        help="ranked moments kept per sample (profile default: 10)")
    parser.add_argument("--nms-iou", dest="nms_iou", type=float, default=skip,
                        help="suppress overlaps above this IoU; 1.0 disables "
                             "(profile default: 1.0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdvmr",
        description="Video moment retrieval and highlight detection on feature files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fmt = argparse.ArgumentDefaultsHelpFormatter

    gen = sub.add_parser("gen-synth", help="generate a synthetic dataset",
                         formatter_class=fmt)
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--n", type=int, default=64, help="training samples")
    gen.add_argument("--n-val", type=int, default=16, help="validation samples")
    gen.add_argument("--clips", type=int, default=20, help="clips per video")
    gen.add_argument("--tokens", type=int, default=8, help="query tokens")
    gen.add_argument("--d-video", type=int, default=32, help="video feature dim")
    gen.add_argument("--d-text", type=int, default=32, help="text feature dim")
    gen.add_argument("--d-audio", type=int, default=0, help="audio feature dim (0 = none)")
    gen.add_argument("--vocab", type=int, default=32, help="vocabulary size incl. sentinel")
    gen.add_argument("--concepts", type=int, default=8, help="planted concept count")
    gen.add_argument("--clip-len", type=float, default=2.0, help="seconds per clip")
    gen.add_argument("--seed", type=int, default=0, help="RNG seed")

    tr = sub.add_parser("train", help="train a model", formatter_class=fmt)
    tr.add_argument("--data", required=True, help="dataset directory")
    tr.add_argument("--out", required=True, help="run output directory")
    _add_common_train_flags(tr)

    ev = sub.add_parser("eval", help="evaluate a checkpoint", formatter_class=fmt)
    ev.add_argument("--ckpt", required=True, help="checkpoint directory")
    ev.add_argument("--data", required=True, help="dataset directory")
    ev.add_argument("--split", default="val", help="manifest split name")
    ev.add_argument("--out", default=None, help="report JSON path (default: stdout only)")

    pr = sub.add_parser("predict", help="write ranked moments as JSONL",
                        formatter_class=fmt)
    pr.add_argument("--ckpt", required=True, help="checkpoint directory")
    pr.add_argument("--data", required=True, help="dataset directory")
    pr.add_argument("--split", default="val", help="manifest split name")
    pr.add_argument("--out", required=True, help="predictions JSONL path")
    pr.add_argument("--topk", dest="top_k", type=int, default=argparse.SUPPRESS,
                    help="ranked moments kept per sample (checkpoint default)")
    pr.add_argument("--nms-iou", dest="nms_iou", type=float, default=argparse.SUPPRESS,
                    help="suppress overlaps above this IoU; 1.0 disables "
                         "(checkpoint default)")

    ab = sub.add_parser("ablate", help="train/evaluate a toggle grid",
                        formatter_class=fmt)
    ab.add_argument("--data", required=True, help="dataset directory")
    ab.add_argument("--out", required=True, help="output directory for runs and table")
    ab.add_argument("--settings", default=",".join(trainer.ABLATION_GRID),
                    help="comma list of setting letters a..j")
    ab.add_argument("--split", default="val", help="evaluation split")
    _add_common_train_flags(ab)

    vz = sub.add_parser("visualize", help="render timeline SVGs from predictions",
                        formatter_class=fmt)
    vz.add_argument("--pred", required=True, help="predictions JSONL")
    vz.add_argument("--data", required=True, help="dataset directory")
    vz.add_argument("--split", default="val", help="manifest split the predictions cover")
    vz.add_argument("--sample", default=None, help="render only this sample id")
    vz.add_argument("--out", required=True, help="output directory for SVG files")

    return parser


def cmd_gen_synth(args: argparse.Namespace) -> int:
    config = fs.SyntheticConfig(
        n_train=args.n,
        n_val=args.n_val,
        n_clips=args.clips,
        n_tokens=args.tokens,
        d_video=args.d_video,
        d_text=args.d_text,
        d_audio=args.d_audio,
        vocab_size=args.vocab,
        n_concepts=args.concepts,
        clip_len=args.clip_len,
        seed=args.seed,
    )
    out = fs.generate_synthetic(config, args.out)
    print(f"wrote synthetic dataset to {out} ({args.n} train / {args.n_val} val)")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = trainer.train(config, args.data, args.out)
    final = result.history[-1]
    print(
        f"trained {config.epochs} epochs; final total loss {final['total']:.4f}; "
        f"best epoch {result.best_epoch} (val R1@0.7 {result.best_r1_07:.4f}); "
        f"checkpoint at {result.checkpoint_dir}"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    report = trainer.evaluate_checkpoint(args.ckpt, args.data, args.split)
    print(report.summary())
    if args.out:
        _write_json(Path(args.out), report.to_json())
        print(f"report written to {args.out}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    model, config, _ = trainer.load_checkpoint(args.ckpt)
    if getattr(args, "top_k", None) is not None:
        config = replace(config, top_k=args.top_k)
    if getattr(args, "nms_iou", None) is not None:
        config = replace(config, nms_iou=args.nms_iou)
    torch.set_num_threads(config.num_threads)
    dataset = fs.FeatureDataset(args.data, args.split, mask_seed=config.seed)
    records = trainer.predict_dataset(model, dataset, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"wrote {len(records)} prediction records to {out}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    settings = [s for s in args.settings.split(",") if s]
    rows = trainer.ablate(config, args.data, args.out, settings, eval_split=args.split)
    table_path = Path(args.out) / "ablation.json"
    _write_json(table_path, {"settings": rows})
    header = f"{'setting':8} {'toggles':20} {'params':>9} {'R1@0.7':>8} {'mAP avg':>8}"
    print(header)
    for row in rows:
        report = row["report"]
        print(
            f"{row['setting']:8} {','.join(row['toggles']) or '-':20} "
            f"{row['param_count']:>9} {report['r1_07']:>8.4f} {report['map_avg']:>8.4f}"
        )
    print(f"table written to {table_path}")
    return EXIT_OK


def cmd_visualize(args: argparse.Namespace) -> int:
    pred_path = Path(args.pred)
    if not pred_path.is_file():
        raise fs.ValidationError(f"predictions file not found: {pred_path}")
    predictions: Dict[str, Dict] = {}
    with open(pred_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise fs.ManifestError(f"{pred_path}:{lineno}: malformed JSON ({exc.msg})")
            for key in ("sample_id", "moments", "saliency"):
                if key not in record:
                    raise fs.ValidationError(
                        f"{pred_path}:{lineno}: prediction record missing '{key}'"
                    )
            predictions[record["sample_id"]] = record

    dataset_dir = Path(args.data)
    meta = fs.load_dataset_meta(dataset_dir) or {}
    clip_len = meta.get("clip_len", 2.0)
    manifest = fs.load_manifest(dataset_dir / f"{args.split}.jsonl", clip_len)
    records = {r.sample_id: r for r in manifest.records}

    targets: List[str]
    if args.sample is not None:
        if args.sample not in predictions:
            raise fs.ValidationError(f"sample '{args.sample}' not in {pred_path}")
        targets = [args.sample]
    else:
        targets = [sid for sid in predictions if sid in records]
        if not targets:
            raise fs.ValidationError("no predicted sample ids found in the manifest")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for sid in targets:
        if sid not in records:
            raise fs.ValidationError(f"sample '{sid}' not in split '{args.split}'")
        record = records[sid]
        svg = render_timeline_svg(
            sid,
            record.duration,
            [list(m) for m in record.moments],
            predictions[sid]["moments"],
            predictions[sid]["saliency"],
            clip_len,
        )
        (out_dir / f"{sid}.svg").write_text(svg, encoding="utf-8")
    print(f"wrote {len(targets)} SVG file(s) to {out_dir}")
    return EXIT_OK


COMMANDS = {
    "gen-synth": cmd_gen_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "ablate": cmd_ablate,
    "visualize": cmd_visualize,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (fs.ManifestError, fs.TensorFormatError, fs.ValidationError, MetricError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
