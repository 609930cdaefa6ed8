"""Set-prediction head: transformer encoder-decoder, matching, and span losses.

Enhanced clip and query features are concatenated into one sequence,
distinguished by learned segment embeddings (sinusoidal positions are added
to clips only). A fixed set of learnable queries decodes normalized
(center, width) spans plus foreground logits, matched to ground truth with
a minimum-cost injective assignment before the losses apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch
from scipy.optimize import linear_sum_assignment
from torch import nn

SEG_VIDEO, SEG_EXPANSION, SEG_TEXT = 0, 1, 2


@dataclass
class SpanWeights:
    """Cost/loss weights for the span matcher and criterion."""

    l1: float = 10.0
    iou: float = 1.0
    ce: float = 4.0
    eos_coef: float = 0.1


@dataclass
class PredictionSet:
    """Per-sample decoder output: spans in (center, width), probabilities, saliency."""

    spans: torch.Tensor  # M x 2, normalized (center, width) in (0, 1)
    fg_prob: torch.Tensor  # M
    saliency: torch.Tensor  # L


@dataclass
class MatchResult:
    pred_indices: List[int]
    gt_indices: List[int]
    cost: float


def sinusoidal_positions(length: int, dim: int, dtype=torch.float32) -> torch.Tensor:
    """Fixed sine/cosine position table of shape (length, dim)."""
    position = torch.arange(length, dtype=dtype).unsqueeze(1)
    div = torch.exp(
        torch.arange(0, dim, 2, dtype=dtype) * (-math.log(10000.0) / dim)
    )
    table = torch.zeros(length, dim, dtype=dtype)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div[: dim // 2])
    return table


class MlpHead(nn.Module):
    """Small feed-forward stack used for span regression."""

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int, num_layers: int = 3):
        super().__init__()
        dims = [in_dim] + [hidden_dim] * (num_layers - 1) + [out_dim]
        self.layers = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1]) for i in range(num_layers)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = torch.relu(x)
        return x


class MomentTransformer(nn.Module):
    """Encoder over clip+query tokens and decoder producing candidate spans."""

    def __init__(
        self,
        hidden_dim: int = 256,
        num_heads: int = 4,
        num_encoder_layers: int = 2,
        num_decoder_layers: int = 2,
        num_queries: int = 10,
        ffn_dim: Optional[int] = None,
        dropout: float = 0.1,
        saliency_mode: str = "gpa",
    ):
        super().__init__()
        if saliency_mode not in ("gpa", "head"):
            raise ValueError(f"unknown saliency mode: {saliency_mode}")
        ffn_dim = ffn_dim or 4 * hidden_dim
        self.hidden_dim = hidden_dim
        self.num_queries = num_queries
        self.saliency_mode = saliency_mode
        self.encoder_layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                hidden_dim, num_heads, ffn_dim, dropout, batch_first=True
            )
            for _ in range(num_encoder_layers)
        )
        self.decoder_layers = nn.ModuleList(
            nn.TransformerDecoderLayer(
                hidden_dim, num_heads, ffn_dim, dropout, batch_first=True
            )
            for _ in range(num_decoder_layers)
        )
        self.segment_embed = nn.Embedding(3, hidden_dim)
        self.query_embed = nn.Embedding(num_queries, hidden_dim)
        self.span_head = MlpHead(hidden_dim, hidden_dim, 2)
        self.class_head = nn.Linear(hidden_dim, 2)
        self.saliency_head = nn.Linear(hidden_dim, 1) if saliency_mode == "head" else None

    def run_encoder(
        self, tokens: torch.Tensor, valid_mask: Optional[torch.Tensor] = None
    ) -> torch.Tensor:
        """Raw encoder stack; also the shared encoder for query expansion."""
        padding = None if valid_mask is None else ~valid_mask
        out = tokens
        for layer in self.encoder_layers:
            out = layer(out, src_key_padding_mask=padding)
        return out

    def encode(
        self,
        video: torch.Tensor,
        text: torch.Tensor,
        clip_mask: Optional[torch.Tensor] = None,
        text_mask: Optional[torch.Tensor] = None,
        num_expansion: int = 0,
    ) -> torch.Tensor:
        """Fuse clip and query tokens into one memory sequence.

        Sinusoidal positions are added to clips; segment embeddings mark
        video, expansion, and text stretches. Returns (B, L + N', H).
        """
        squeeze = video.dim() == 2
        if squeeze:
            video = video.unsqueeze(0)
            text = text.unsqueeze(0)
            clip_mask = None if clip_mask is None else clip_mask.unsqueeze(0)
            text_mask = None if text_mask is None else text_mask.unsqueeze(0)
        B, L, H = video.shape
        Nt = text.shape[1]
        pos = sinusoidal_positions(L, H, dtype=video.dtype).to(video.device)
        seg = self.segment_embed.weight.to(video.dtype)
        video_tokens = video + pos + seg[SEG_VIDEO]
        seg_ids = torch.full((Nt,), SEG_TEXT, device=video.device)
        seg_ids[:num_expansion] = SEG_EXPANSION
        text_tokens = text + seg[seg_ids]
        tokens = torch.cat([video_tokens, text_tokens], dim=1)
        if clip_mask is None and text_mask is None:
            valid = None
        else:
            cm = (
                clip_mask
                if clip_mask is not None
                else torch.ones(B, L, dtype=torch.bool, device=video.device)
            )
            tm = (
                text_mask
                if text_mask is not None
                else torch.ones(B, Nt, dtype=torch.bool, device=video.device)
            )
            valid = torch.cat([cm, tm], dim=1)
        memory = self.run_encoder(tokens, valid)
        return memory.squeeze(0) if squeeze else memory

    def decode(
        self,
        video_memory: torch.Tensor,
        clip_mask: Optional[torch.Tensor] = None,
        return_layers: bool = False,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Cross-attend learnable queries over clip memory.

        Returns spans (B, M, 2) squashed into (0, 1) and foreground logits
        (B, M, 2). With ``return_layers`` every decoder layer's heads are
        stacked along a leading axis (for per-layer auxiliary supervision).
        """
        squeeze = video_memory.dim() == 2
        if squeeze:
            video_memory = video_memory.unsqueeze(0)
            clip_mask = None if clip_mask is None else clip_mask.unsqueeze(0)
        B = video_memory.shape[0]
        queries = (
            self.query_embed.weight.to(video_memory.dtype)
            .unsqueeze(0)
            .expand(B, -1, -1)
        )
        padding = None if clip_mask is None else ~clip_mask
        out = queries
        layer_outputs = []
        for layer in self.decoder_layers:
            out = layer(out, video_memory, memory_key_padding_mask=padding)
            layer_outputs.append(out)
        hidden = torch.stack(layer_outputs) if return_layers else out
        spans = torch.sigmoid(self.span_head(hidden))
        logits = self.class_head(hidden)
        if squeeze:
            return spans.squeeze(int(return_layers)), logits.squeeze(int(return_layers))
        return spans, logits

    def saliency_scores(
        self,
        clip_similarity: Optional[torch.Tensor] = None,
        video_memory: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Per-clip saliency: the trained clip similarity, or a learned head."""
        if self.saliency_mode == "gpa":
            if clip_similarity is None:
                raise ValueError("gpa saliency mode needs the clip similarity")
            return clip_similarity
        if video_memory is None:
            raise ValueError("head saliency mode needs encoder clip memory")
        return self.saliency_head(video_memory).squeeze(-1)


# ---------------------------------------------------------------------------
# Spans, IoU, matching, and losses
# ---------------------------------------------------------------------------


def span_to_interval(spans: torch.Tensor) -> torch.Tensor:
    """(center, width) -> (start, end) on the same normalized axis."""
    center, width = spans[..., 0], spans[..., 1]
    return torch.stack([center - width / 2, center + width / 2], dim=-1)


def interval_giou(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Generalized IoU of 1-D intervals, elementwise over matching shapes."""
    inter = (torch.min(a[..., 1], b[..., 1]) - torch.max(a[..., 0], b[..., 0])).clamp_min(0)
    len_a = a[..., 1] - a[..., 0]
    len_b = b[..., 1] - b[..., 0]
    union = len_a + len_b - inter
    hull = torch.max(a[..., 1], b[..., 1]) - torch.min(a[..., 0], b[..., 0])
    iou = inter / union.clamp_min(1e-12)
    return iou - (hull - union) / hull.clamp_min(1e-12)


def span_l1(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """L1 distance between (center, width) pairs, summed over the two coords."""
    return (pred - gt).abs().sum(dim=-1)


def giou_loss(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """1 - gIoU of the derived intervals."""
    return 1.0 - interval_giou(span_to_interval(pred), span_to_interval(gt))


def hungarian_match(
    pred_spans: torch.Tensor,
    fg_prob: torch.Tensor,
    gt_spans: torch.Tensor,
    weights: SpanWeights,
) -> MatchResult:
    """Minimum-cost injective assignment of ground truths to prediction slots.

    Pair cost is l1 * L1 + iou * (1 - gIoU) - ce * fg_prob. Requires at most
    as many ground truths as queries.
    """
    M = pred_spans.shape[0]
    G = gt_spans.shape[0]
    if G > M:
        raise ValueError(f"{G} ground truths exceed {M} prediction slots")
    if G == 0:
        return MatchResult([], [], 0.0)
    with torch.no_grad():
        p = pred_spans.unsqueeze(1)  # M x 1 x 2
        g = gt_spans.unsqueeze(0)  # 1 x G x 2
        cost = (
            weights.l1 * span_l1(p, g)
            + weights.iou * giou_loss(p, g)
            - weights.ce * fg_prob.unsqueeze(1)
        )
        rows, cols = linear_sum_assignment(cost.cpu().double().numpy())
        total = float(cost.cpu().numpy()[rows, cols].sum())
    return MatchResult([int(r) for r in rows], [int(c) for c in cols], total)


def vmr_loss(
    pred_spans: torch.Tensor,
    fg_logits: torch.Tensor,
    gt_spans: torch.Tensor,
    match: MatchResult,
    weights: SpanWeights,
) -> torch.Tensor:
    """Span regression plus foreground classification for one sample.

    L1 and gIoU terms average over matched pairs; the cross-entropy runs
    over every query with unmatched queries as background, the background
    class down-weighted by the eos coefficient.
    """
    M = pred_spans.shape[0]
    device = pred_spans.device
    dtype = pred_spans.dtype
    targets = torch.zeros(M, dtype=torch.long, device=device)
    if match.pred_indices:
        pred_idx = torch.as_tensor(match.pred_indices, device=device)
        gt_idx = torch.as_tensor(match.gt_indices, device=device)
        targets[pred_idx] = 1
        matched_pred = pred_spans[pred_idx]
        matched_gt = gt_spans[gt_idx]
        l1_term = span_l1(matched_pred, matched_gt).mean()
        iou_term = giou_loss(matched_pred, matched_gt).mean()
    else:
        l1_term = torch.zeros((), dtype=dtype, device=device)
        iou_term = torch.zeros((), dtype=dtype, device=device)
    class_weight = torch.tensor([weights.eos_coef, 1.0], dtype=dtype, device=device)
    ce_term = nn.functional.cross_entropy(fg_logits, targets, weight=class_weight)
    return weights.l1 * l1_term + weights.iou * iou_term + weights.ce * ce_term


# ---------------------------------------------------------------------------
# Prediction post-processing
# ---------------------------------------------------------------------------


def _overlap_ratio(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def predict(
    pred: PredictionSet,
    duration: float,
    top_k: int = 10,
    nms_iou: float = 1.0,
) -> List[Tuple[float, float, float]]:
    """Ranked (start_s, end_s, score) moments in seconds.

    Spans are de-normalized and clamped to the video, sorted by foreground
    probability (ties broken by slot index), then filtered by 1-D NMS: a
    moment is dropped when it overlaps an already kept one with IoU
    strictly above ``nms_iou``, so 1.0 disables suppression.
    """
    intervals = span_to_interval(pred.spans).clamp(0.0, 1.0) * duration
    scores = pred.fg_prob
    order = sorted(range(len(scores)), key=lambda i: (-float(scores[i]), i))
    kept: List[Tuple[float, float, float]] = []
    for i in order:
        start, end = float(intervals[i, 0]), float(intervals[i, 1])
        candidate = (start, end)
        if any(_overlap_ratio(candidate, (s, e)) > nms_iou for s, e, _ in kept):
            continue
        kept.append((start, end, float(scores[i])))
        if len(kept) >= top_k:
            break
    return kept


def predictions_to_json(
    sample_id: str,
    moments: Sequence[Tuple[float, float, float]],
    saliency: Sequence[float],
) -> dict:
    """The documented prediction JSONL record."""
    return {
        "sample_id": sample_id,
        "moments": [[float(s), float(e), float(p)] for s, e, p in moments],
        "saliency": [float(x) for x in saliency],
    }
