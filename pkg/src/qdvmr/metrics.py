"""Moment-retrieval and highlight-detection evaluation.

Retrieval metrics follow the detection convention: ranked predictions are
greedily matched to unmatched ground truths at an IoU threshold and average
precision integrates the all-point interpolated precision over recall.
Highlight detection ranks clips by saliency score against binary "very
good" labels and uses the classic ranking AP (mean precision at positive
ranks). Ties in scores break by original index everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

MAP_THRESHOLDS = tuple(np.linspace(0.5, 0.95, 10).round(2).tolist())

# QVHighlights label scale 0..4; >= 4 counts as a highlight positive.
VERY_GOOD = 4

Interval = Tuple[float, float]
ScoredInterval = Tuple[float, float, float]


class MetricError(ValueError):
    pass


def iou_1d(a: Interval, b: Interval) -> float:
    """Intersection over union of two non-degenerate intervals; 0 when disjoint."""
    if a[1] <= a[0] or b[1] <= b[0]:
        raise MetricError(f"degenerate interval: {a} vs {b}")
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold <= 1.0:
        raise MetricError(f"IoU threshold must lie in (0, 1], got {threshold}")


def _rank_by_score(predictions: Sequence[ScoredInterval]) -> List[int]:
    return sorted(range(len(predictions)), key=lambda i: (-predictions[i][2], i))


def recall1_hit(
    predictions: Sequence[ScoredInterval],
    gts: Sequence[Interval],
    threshold: float,
) -> float:
    """1.0 iff the top-scored prediction reaches the threshold against any GT."""
    _check_threshold(threshold)
    if not predictions:
        raise MetricError("recall@1 needs a non-empty prediction list")
    top = predictions[_rank_by_score(predictions)[0]]
    best = max((iou_1d((top[0], top[1]), gt) for gt in gts), default=0.0)
    return 1.0 if best >= threshold else 0.0


def recall1_at_iou(
    predictions_per_sample: Sequence[Sequence[ScoredInterval]],
    gts_per_sample: Sequence[Sequence[Interval]],
    threshold: float,
) -> float:
    """Dataset mean of per-sample top-1 hits."""
    hits = [
        recall1_hit(preds, gts, threshold)
        for preds, gts in zip(predictions_per_sample, gts_per_sample)
    ]
    return float(np.mean(hits)) if hits else 0.0


def _match_ranked(
    predictions: Sequence[ScoredInterval],
    gts: Sequence[Interval],
    threshold: float,
) -> List[bool]:
    """Greedy TP flags in rank order: each prediction takes the best unmatched GT."""
    matched = [False] * len(gts)
    flags: List[bool] = []
    for i in _rank_by_score(predictions):
        start, end, _ = predictions[i]
        best_iou, best_g = 0.0, -1
        for g, gt in enumerate(gts):
            if matched[g]:
                continue
            iou = iou_1d((start, end), gt)
            if iou > best_iou:
                best_iou, best_g = iou, g
        if best_g >= 0 and best_iou >= threshold:
            matched[best_g] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def ap_at_iou(
    predictions: Sequence[ScoredInterval],
    gts: Sequence[Interval],
    threshold: float,
) -> float:
    """Per-sample detection AP with all-point interpolated precision."""
    _check_threshold(threshold)
    if not gts:
        raise MetricError("AP is undefined without ground truths")
    if not predictions:
        return 0.0
    flags = _match_ranked(predictions, gts, threshold)
    tp = np.cumsum([1.0 if f else 0.0 for f in flags])
    ranks = np.arange(1, len(flags) + 1)
    precision = tp / ranks
    recall = tp / len(gts)
    # Interpolate: precision at recall r = max precision at any rank with recall >= r.
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_recall = 0.0
    for k, f in enumerate(flags):
        if f:
            ap += (recall[k] - prev_recall) * interp[k]
            prev_recall = recall[k]
    return float(ap)


def map_at_iou(
    predictions_per_sample: Sequence[Sequence[ScoredInterval]],
    gts_per_sample: Sequence[Sequence[Interval]],
    threshold: float,
) -> float:
    """Mean of per-sample AP, skipping samples with no ground truth."""
    values = [
        ap_at_iou(preds, gts, threshold)
        for preds, gts in zip(predictions_per_sample, gts_per_sample)
        if gts
    ]
    return float(np.mean(values)) if values else 0.0


def map_avg(
    predictions_per_sample: Sequence[Sequence[ScoredInterval]],
    gts_per_sample: Sequence[Sequence[Interval]],
    thresholds: Sequence[float] = MAP_THRESHOLDS,
) -> float:
    """Mean of mAP over the ten uniformly spaced IoU thresholds."""
    return float(
        np.mean([map_at_iou(predictions_per_sample, gts_per_sample, t) for t in thresholds])
    )


# ---------------------------------------------------------------------------
# Highlight detection
# ---------------------------------------------------------------------------


def ranking_ap(scores: Sequence[float], positives: Sequence[bool]) -> Optional[float]:
    """Mean precision at positive ranks (score-desc order, index tie-break).

    Returns None when the sample has no positive clip (AP undefined).
    """
    n_pos = sum(1 for p in positives if p)
    if n_pos == 0:
        return None
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits = 0
    total = 0.0
    for rank, i in enumerate(order, start=1):
        if positives[i]:
            hits += 1
            total += hits / rank
    return total / n_pos


def hd_positives(labels: Sequence[int], threshold: int = VERY_GOOD) -> List[bool]:
    return [lab >= threshold for lab in labels]


def hd_map(
    scores_per_sample: Sequence[Sequence[float]],
    labels_per_sample: Sequence[Sequence[int]],
    label_threshold: int = VERY_GOOD,
) -> float:
    """Per-sample ranking AP against >= very-good clips, averaged over samples."""
    if not any(labels for labels in labels_per_sample):
        raise MetricError("highlight metrics need at least one labeled sample")
    values = []
    for scores, labels in zip(scores_per_sample, labels_per_sample):
        if not labels:
            continue
        ap = ranking_ap(list(scores), hd_positives(labels, label_threshold))
        if ap is not None:
            values.append(ap)
    return float(np.mean(values)) if values else 0.0


def hit_at_1(
    scores_per_sample: Sequence[Sequence[float]],
    labels_per_sample: Sequence[Sequence[int]],
    label_threshold: int = VERY_GOOD,
) -> float:
    """Fraction of samples whose top-scored clip is a positive."""
    if not any(labels for labels in labels_per_sample):
        raise MetricError("highlight metrics need at least one labeled sample")
    hits = []
    for scores, labels in zip(scores_per_sample, labels_per_sample):
        if not labels:
            continue
        top = min(range(len(scores)), key=lambda i: (-scores[i], i))
        hits.append(1.0 if labels[top] >= label_threshold else 0.0)
    return float(np.mean(hits)) if hits else 0.0


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    """The seven headline numbers plus a per-sample breakdown."""

    r1_05: float
    r1_07: float
    map_05: float
    map_075: float
    map_avg: float
    hd_map: float
    hit1: float
    per_sample: List[Dict] = field(default_factory=list)

    def to_json(self) -> Dict:
        return {
            "r1_05": self.r1_05,
            "r1_07": self.r1_07,
            "map_05": self.map_05,
            "map_075": self.map_075,
            "map_avg": self.map_avg,
            "hd_map": self.hd_map,
            "hit1": self.hit1,
            "per_sample": self.per_sample,
        }

    def summary(self) -> str:
        return (
            f"R1@0.5 {self.r1_05:.4f} | R1@0.7 {self.r1_07:.4f} | "
            f"mAP@0.5 {self.map_05:.4f} | mAP@0.75 {self.map_075:.4f} | "
            f"mAP avg {self.map_avg:.4f} | HD mAP {self.hd_map:.4f} | "
            f"HIT@1 {self.hit1:.4f}"
        )


def evaluate_predictions(
    sample_ids: Sequence[str],
    predictions_per_sample: Sequence[Sequence[ScoredInterval]],
    gts_per_sample: Sequence[Sequence[Interval]],
    saliency_per_sample: Optional[Sequence[Sequence[float]]] = None,
    labels_per_sample: Optional[Sequence[Optional[Sequence[int]]]] = None,
) -> EvalReport:
    """Aggregate every metric over a split; HD metrics are 0 without labels."""
    preds = list(predictions_per_sample)
    gts = list(gts_per_sample)
    have_labels = labels_per_sample is not None and any(
        labels for labels in labels_per_sample
    )
    if have_labels:
        scores = [list(s) for s in saliency_per_sample]
        labels = [list(lab) if lab else [] for lab in labels_per_sample]
        hd = hd_map(scores, labels)
        hit = hit_at_1(scores, labels)
    else:
        hd, hit = 0.0, 0.0

    per_sample = []
    for i, sid in enumerate(sample_ids):
        top_iou = 0.0
        if preds[i] and gts[i]:
            top = preds[i][_rank_by_score(preds[i])[0]]
            top_iou = max(iou_1d((top[0], top[1]), gt) for gt in gts[i])
        row = {
            "sample_id": sid,
            "top1_iou": top_iou,
            "r1_05": 1.0 if top_iou >= 0.5 else 0.0,
            "r1_07": 1.0 if top_iou >= 0.7 else 0.0,
            "ap_avg": float(
                np.mean([ap_at_iou(preds[i], gts[i], t) for t in MAP_THRESHOLDS])
            )
            if gts[i]
            else None,
        }
        if have_labels and labels[i]:
            row["hd_ap"] = ranking_ap(scores[i], hd_positives(labels[i]))
        per_sample.append(row)

    return EvalReport(
        r1_05=recall1_at_iou(preds, gts, 0.5),
        r1_07=recall1_at_iou(preds, gts, 0.7),
        map_05=map_at_iou(preds, gts, 0.5),
        map_075=map_at_iou(preds, gts, 0.75),
        map_avg=map_avg(preds, gts),
        hd_map=hd,
        hit1=hit,
        per_sample=per_sample,
    )


def evaluate_prediction_file(pred_path: Path | str, manifest) -> EvalReport:
    """Score a prediction JSONL (sample_id/moments/saliency records) against a manifest.

    Lets externally produced predictions be evaluated without a checkpoint.
    """
    pred_path = Path(pred_path)
    by_id: Dict[str, Dict] = {}
    with open(pred_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            for key in ("sample_id", "moments", "saliency"):
                if key not in record:
                    raise MetricError(f"{pred_path}:{lineno}: record missing '{key}'")
            by_id[record["sample_id"]] = record
    missing = [r.sample_id for r in manifest.records if r.sample_id not in by_id]
    if missing:
        raise MetricError(f"predictions missing for samples: {missing[:5]}")
    sample_ids = [r.sample_id for r in manifest.records]
    predictions = [
        [tuple(m) for m in by_id[sid]["moments"]] for sid in sample_ids
    ]
    gts = [list(r.moments) for r in manifest.records]
    saliency = [by_id[sid]["saliency"] for sid in sample_ids]
    labels = [r.saliency_labels for r in manifest.records]
    return evaluate_predictions(sample_ids, predictions, gts, saliency, labels)
