"""Shared-space feature projection and video/query alignment losses.

Video clips and query words are projected into one hidden space, compared
with a per-pair cosine similarity matrix, and supervised two ways: a clip
level binary cross-entropy against relevance labels (part-aware) and a batch
level InfoNCE over pooled features (global). All functions accept optional
validity masks and keep padded positions out of every mean and softmax.
"""

from __future__ import annotations

from typing import Optional, Tuple

import torch
from torch import nn

EPS = 1e-6


class FeatureProjection(nn.Module):
    """MLP mapping raw modality features into the shared hidden space.

    With ``num_layers=1`` this is a single linear map, so an identity
    initialization reproduces its input when in_dim == hidden_dim.
    """

    def __init__(
        self, in_dim: int, hidden_dim: int, num_layers: int = 2, dropout: float = 0.1
    ):
        super().__init__()
        if num_layers < 1:
            raise ValueError("projection needs at least one layer")
        layers = []
        d = in_dim
        for _ in range(num_layers - 1):
            layers += [nn.Linear(d, hidden_dim), nn.ReLU(), nn.Dropout(dropout)]
            d = hidden_dim
        layers.append(nn.Linear(d, hidden_dim))
        self.net = nn.Sequential(*layers)
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        if features.shape[-1] != self.in_dim:
            raise ValueError(
                f"expected trailing dim {self.in_dim}, got {features.shape[-1]}"
            )
        return self.net(features)


def cosine_similarity(
    text: torch.Tensor, video: torch.Tensor, eps: float = EPS
) -> torch.Tensor:
    """Per-word, per-clip cosine similarity: (..., N, H) x (..., L, H) -> (..., N, L).

    Row norms are floored at eps so zero rows stay finite.
    """
    t_norm = text / text.norm(dim=-1, keepdim=True).clamp_min(eps)
    v_norm = video / video.norm(dim=-1, keepdim=True).clamp_min(eps)
    return t_norm @ v_norm.transpose(-1, -2)


def clipwise_similarity(
    similarity: torch.Tensor, token_mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Mean over the word axis of an (..., N, L) similarity, skipping padded words."""
    if token_mask is None:
        return similarity.mean(dim=-2)
    weights = token_mask.to(similarity.dtype).unsqueeze(-1)
    total = (similarity * weights).sum(dim=-2)
    count = weights.sum(dim=-2).clamp_min(1.0)
    return total / count


def masked_mean(
    features: torch.Tensor, mask: Optional[torch.Tensor] = None, dim: int = -2
) -> torch.Tensor:
    """Mean over one axis restricted to valid positions."""
    if mask is None:
        return features.mean(dim=dim)
    weights = mask.to(features.dtype).unsqueeze(-1)
    total = (features * weights).sum(dim=dim)
    count = weights.sum(dim=dim).clamp_min(1.0)
    return total / count


def part_aware_loss(
    clip_similarity: torch.Tensor,
    clip_labels: torch.Tensor,
    clip_mask: Optional[torch.Tensor] = None,
    eps: float = EPS,
) -> torch.Tensor:
    """Binary cross-entropy between per-clip similarity and relevance labels.

    The cosine-derived score in [-1, 1] is mapped to a probability via
    p = (s + 1) / 2, clamped to (eps, 1 - eps). The BCE is summed over valid
    clips per sample and averaged over the batch.
    """
    if clip_similarity.shape != clip_labels.shape:
        raise ValueError(
            f"similarity shape {tuple(clip_similarity.shape)} != labels "
            f"{tuple(clip_labels.shape)}"
        )
    p = ((clip_similarity + 1.0) / 2.0).clamp(eps, 1.0 - eps)
    labels = clip_labels.to(p.dtype)
    bce = -(labels * torch.log(p) + (1.0 - labels) * torch.log(1.0 - p))
    if clip_mask is not None:
        bce = bce * clip_mask.to(bce.dtype)
    per_sample = bce.sum(dim=-1)
    return per_sample.mean()


def global_contrastive_loss(
    video_means: torch.Tensor,
    text_means: torch.Tensor,
    temperature: float = 0.07,
    symmetric: bool = False,
) -> torch.Tensor:
    """InfoNCE over pooled per-sample features with positives on the diagonal.

    Logits are raw pairwise dot products divided by the temperature. The
    default contrasts each video against all texts in the batch; the
    symmetric flag averages in the text-to-video direction as well.
    """
    if not 0.0 < temperature <= 1.0:
        raise ValueError("temperature must lie in (0, 1]")
    logits = video_means @ text_means.transpose(-1, -2) / temperature
    targets = torch.arange(logits.shape[0], device=logits.device)
    loss = nn.functional.cross_entropy(logits, targets)
    if symmetric:
        loss = (loss + nn.functional.cross_entropy(logits.t(), targets)) / 2.0
    return loss


def gpa_loss(part_loss: torch.Tensor, global_loss: torch.Tensor) -> torch.Tensor:
    """Average of the part-aware and global contrastive terms."""
    return (part_loss + global_loss) / 2.0


def align_features(
    text: torch.Tensor,
    video: torch.Tensor,
    token_mask: Optional[torch.Tensor] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Similarity matrix plus its clip-level mean, the two alignment signals."""
    similarity = cosine_similarity(text, video)
    return similarity, clipwise_similarity(similarity, token_mask)
