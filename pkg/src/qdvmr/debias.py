"""Query debiasing: learnable expansion tokens and masked-word prediction.

Expansion tokens are prepended to the projected query, refined by the same
transformer encoder the span predictor uses, and concatenated back onto the
query features. Separately, masked-query word features attend over video
clips and a vocabulary head predicts the hidden words, forcing the model to
ground query context in the video.
"""

from __future__ import annotations

from typing import Callable, List, Optional, Sequence, Tuple

import torch
from torch import nn


class QueryExpander(nn.Module):
    """Holds the learnable expansion tokens and builds the expanded query.

    The encoder is passed in at call time so its weights stay shared with
    the downstream span predictor. By default the first ``num_tokens``
    encoder outputs (the slots seeded by the learnable tokens) become the
    expansion features; ``score_select`` instead keeps the ``num_tokens``
    refined text positions with the largest norm-weighted attention mass.
    """

    def __init__(self, num_tokens: int, hidden_dim: int, score_select: bool = False):
        super().__init__()
        if num_tokens < 1:
            raise ValueError("need at least one expansion token")
        self.num_tokens = num_tokens
        self.tokens = nn.Parameter(torch.randn(num_tokens, hidden_dim) * 0.02)
        self.score_select = score_select

    def forward(
        self,
        text: torch.Tensor,
        encoder: Callable[[torch.Tensor, Optional[torch.Tensor]], torch.Tensor],
        token_mask: Optional[torch.Tensor] = None,
    ) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        """Return (expanded text (B, N_e + N, H), expanded mask)."""
        if text.dim() == 2:
            expanded, mask = self.forward(
                text.unsqueeze(0),
                encoder,
                None if token_mask is None else token_mask.unsqueeze(0),
            )
            return expanded.squeeze(0), None if mask is None else mask.squeeze(0)

        B, N, H = text.shape
        if H != self.tokens.shape[1]:
            raise ValueError(f"hidden dim mismatch: text {H} vs tokens {self.tokens.shape[1]}")
        seed = self.tokens.to(text.dtype).unsqueeze(0).expand(B, -1, -1)
        stacked = torch.cat([seed, text], dim=1)
        if token_mask is None:
            full_mask = None
        else:
            ones = torch.ones(B, self.num_tokens, dtype=torch.bool, device=text.device)
            full_mask = torch.cat([ones, token_mask], dim=1)
        refined = encoder(stacked, full_mask)
        if self.score_select:
            scores = refined.norm(dim=-1)
            if full_mask is not None:
                scores = scores.masked_fill(~full_mask, float("-inf"))
            top = scores.topk(self.num_tokens, dim=1).indices.sort(dim=1).values
            expansion = torch.gather(
                refined, 1, top.unsqueeze(-1).expand(-1, -1, H)
            )
        else:
            expansion = refined[:, : self.num_tokens]
        expanded = torch.cat([expansion, text], dim=1)
        if token_mask is None:
            return expanded, None
        ones = torch.ones(B, self.num_tokens, dtype=torch.bool, device=text.device)
        return expanded, torch.cat([ones, token_mask], dim=1)


class WordContextAttention(nn.Module):
    """Ground masked-word features in the video via cross-attention.

    Words act as attention queries over clip keys/values (multi-head scaled
    dot product on split feature slices), and an MLP of the attended context
    is added back residually. A word whose every key is invalid receives a
    zero context rather than NaN, so padding-only edges stay trainable.
    """

    def __init__(self, hidden_dim: int, num_heads: int = 4):
        super().__init__()
        if hidden_dim % num_heads != 0:
            raise ValueError("hidden_dim must be divisible by num_heads")
        self.num_heads = num_heads
        self.head_dim = hidden_dim // num_heads
        self.mlp = nn.Sequential(
            nn.Linear(hidden_dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, hidden_dim),
        )

    def forward(
        self,
        words: torch.Tensor,
        clips: torch.Tensor,
        clip_mask: Optional[torch.Tensor] = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Return (enhanced words (..., N, H), attention weights (..., heads, N, L))."""
        squeeze = words.dim() == 2
        if squeeze:
            words = words.unsqueeze(0)
            clips = clips.unsqueeze(0)
            clip_mask = None if clip_mask is None else clip_mask.unsqueeze(0)
        B, N, H = words.shape
        L = clips.shape[1]

        def split(x: torch.Tensor) -> torch.Tensor:
            return x.reshape(B, -1, self.num_heads, self.head_dim).transpose(1, 2)

        q, k, v = split(words), split(clips), split(clips)
        scores = q @ k.transpose(-1, -2) / (self.head_dim**0.5)
        if clip_mask is not None:
            invalid = ~clip_mask.reshape(B, 1, 1, L)
            scores = scores.masked_fill(invalid, float("-inf"))
            all_invalid = invalid.all(dim=-1, keepdim=True)
            scores = scores.masked_fill(all_invalid, 0.0)
            weights = scores.softmax(dim=-1)
            weights = weights.masked_fill(all_invalid, 0.0)
            weights = weights.masked_fill(invalid, 0.0)
        else:
            weights = scores.softmax(dim=-1)
        context = weights @ v
        context = context.transpose(1, 2).reshape(B, N, H)
        enhanced = words + self.mlp(context)
        if squeeze:
            return enhanced.squeeze(0), weights.squeeze(0)
        return enhanced, weights


class MlmHead(nn.Module):
    """MLP from the hidden space to vocabulary logits with softmax normalization."""

    def __init__(self, hidden_dim: int, vocab_size: int):
        super().__init__()
        self.vocab_size = vocab_size
        self.net = nn.Sequential(
            nn.Linear(hidden_dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, vocab_size),
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features)

    def log_probs(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features).log_softmax(dim=-1)

    def probs(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features).softmax(dim=-1)


def mlm_loss(
    word_features: torch.Tensor,
    mask_positions: Sequence[int],
    gold_ids: Sequence[int],
    head: MlmHead,
    all_positions: bool = False,
    all_gold_ids: Optional[Sequence[int]] = None,
) -> torch.Tensor:
    """Mean negative log-likelihood of the hidden words for one query.

    By default only masked positions are scored. ``all_positions`` averages
    over every word instead (gold ids for the full query are then required),
    which makes unmasked tokens part of the objective.
    """
    if word_features.dim() != 2:
        raise ValueError("expected an (N, H) feature matrix for a single query")
    log_probs = head.log_probs(word_features)
    if all_positions:
        if all_gold_ids is None:
            raise ValueError("all_positions=True needs gold ids for every word")
        targets = torch.as_tensor(list(all_gold_ids), device=log_probs.device)
        return -log_probs[torch.arange(len(all_gold_ids)), targets].mean()
    if len(mask_positions) == 0:
        raise ValueError("mask_positions is empty")
    positions = torch.as_tensor(list(mask_positions), device=log_probs.device)
    targets = torch.as_tensor(list(gold_ids), device=log_probs.device)
    return -log_probs[positions, targets].mean()


def batch_mlm_loss(
    word_features: torch.Tensor,
    mask_positions: List[List[int]],
    gold_ids: List[List[int]],
    head: MlmHead,
    all_positions: bool = False,
    token_ids: Optional[torch.Tensor] = None,
    token_mask: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Pool the NLL over every scored token in the batch with equal weight.

    Masked positions by default; ``all_positions`` scores every valid word
    against the original token ids instead.
    """
    log_probs = head.log_probs(word_features)
    if all_positions:
        if token_ids is None:
            raise ValueError("all_positions=True needs the original token ids")
        gathered = log_probs.gather(-1, token_ids.unsqueeze(-1)).squeeze(-1)
        if token_mask is not None:
            valid = token_mask.to(gathered.dtype)
            return -(gathered * valid).sum() / valid.sum().clamp_min(1.0)
        return -gathered.mean()
    terms = []
    for b, (positions, golds) in enumerate(zip(mask_positions, gold_ids)):
        for p, g in zip(positions, golds):
            terms.append(-log_probs[b, p, g])
    if not terms:
        raise ValueError("no masked positions in batch")
    return torch.stack(terms).mean()
