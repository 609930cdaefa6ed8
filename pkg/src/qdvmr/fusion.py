"""Query-conditioned visual enhancement via co-attention over the similarity matrix.

The word/clip similarity matrix is transposed to video-major form and
normalized two ways: per clip over words (row) and per word over clips
(column). The normalized maps pull clip-level text features and word-level
visual context into each clip, which a linear layer fuses with the original
clip features and the pooled sentence feature.
"""

from __future__ import annotations

from typing import Optional, Tuple

import torch
from torch import nn

from .alignment import masked_mean


def _masked_softmax(
    scores: torch.Tensor, mask: Optional[torch.Tensor], dim: int
) -> torch.Tensor:
    """Softmax with invalid positions excluded; all-invalid slices become zero."""
    if mask is None:
        return scores.softmax(dim=dim)
    neg = scores.masked_fill(~mask, float("-inf"))
    all_invalid = ~mask.any(dim=dim, keepdim=True)
    neg = neg.masked_fill(all_invalid, 0.0)
    out = neg.softmax(dim=dim)
    out = out.masked_fill(all_invalid, 0.0)
    return out.masked_fill(~mask, 0.0)


def normalize_similarity(
    similarity: torch.Tensor,
    token_mask: Optional[torch.Tensor] = None,
    clip_mask: Optional[torch.Tensor] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Row- and column-normalize the video-major similarity matrix.

    Input is the word/clip similarity (..., N, L). Both outputs are
    (..., L, N): rows of the first sum to 1 over valid words per clip,
    columns of the second sum to 1 over valid clips per word.
    """
    video_major = similarity.transpose(-1, -2)
    if token_mask is not None or clip_mask is not None:
        tmask = (
            token_mask.unsqueeze(-2).expand(*video_major.shape)
            if token_mask is not None
            else torch.ones_like(video_major, dtype=torch.bool)
        )
        cmask = (
            clip_mask.unsqueeze(-1).expand(*video_major.shape)
            if clip_mask is not None
            else torch.ones_like(video_major, dtype=torch.bool)
        )
        valid = tmask & cmask
        s_rows = _masked_softmax(video_major, valid, dim=-1)
        s_cols = _masked_softmax(video_major, valid, dim=-2)
    else:
        s_rows = video_major.softmax(dim=-1)
        s_cols = video_major.softmax(dim=-2)
    return s_rows, s_cols


def clip_level_text(s_rows: torch.Tensor, text: torch.Tensor) -> torch.Tensor:
    """Per-clip mixture of word features: (..., L, N) @ (..., N, H) -> (..., L, H)."""
    return s_rows @ text


def query_aware_video(
    s_rows: torch.Tensor, s_cols: torch.Tensor, video: torch.Tensor
) -> torch.Tensor:
    """Clip features routed through word space: S_r S_c^T video, shape (..., L, H)."""
    return s_rows @ (s_cols.transpose(-1, -2) @ video)


class VisualFusion(nn.Module):
    """Fuse a clip with its text mixture, gated interactions, and the sentence mean.

    Concatenates [video, v2q, video*v2q, video*q2v, sentence] along features
    (L x 5H) and projects back to the hidden size with a biased linear map.
    """

    def __init__(self, hidden_dim: int):
        super().__init__()
        self.hidden_dim = hidden_dim
        self.proj = nn.Linear(5 * hidden_dim, hidden_dim)

    def forward(
        self,
        video: torch.Tensor,
        v2q: torch.Tensor,
        q2v: torch.Tensor,
        sentence: torch.Tensor,
    ) -> torch.Tensor:
        if video.shape[-1] != self.hidden_dim:
            raise ValueError(
                f"expected hidden dim {self.hidden_dim}, got {video.shape[-1]}"
            )
        broadcast = sentence.unsqueeze(-2).expand_as(video)
        stacked = torch.cat(
            [video, v2q, video * v2q, video * q2v, broadcast], dim=-1
        )
        return self.proj(stacked)

    def enhance(
        self,
        video: torch.Tensor,
        similarity: torch.Tensor,
        text: torch.Tensor,
        token_mask: Optional[torch.Tensor] = None,
        clip_mask: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Full path from the similarity matrix to enhanced clip features."""
        s_rows, s_cols = normalize_similarity(similarity, token_mask, clip_mask)
        v2q = clip_level_text(s_rows, text)
        q2v = query_aware_video(s_rows, s_cols, video)
        sentence = masked_mean(text, token_mask)
        return self.forward(video, v2q, q2v, sentence)
