"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way (scalar loops,
exhaustive search, explicit curve construction) and must stay decoupled from
the code paths it verifies.
"""

from __future__ import annotations

from itertools import permutations
from typing import Callable, List, Sequence, Tuple

import numpy as np
import torch


def finite_difference(f: Callable[[torch.Tensor], float], x: torch.Tensor,
                      h: float = 1e-5) -> torch.Tensor:
    """Central-difference gradient of a scalar function, element by element."""
    x = x.detach().clone()
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        flat[i] = orig + h
        fp = float(f(x).detach())
        flat[i] = orig - h
        fm = float(f(x).detach())
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    na = float(a.norm())
    nb = float(b.norm())
    denom = max(na, nb, 1e-12)
    return float((a - b).norm()) / denom


def check_gradient(loss_fn: Callable[..., torch.Tensor], inputs: Sequence[torch.Tensor],
                   h: float = 1e-5, tol: float = 1e-3) -> float:
    """Compare autograd against central differences for every input tensor.

    Returns the worst relative error observed; asserts it is within tol.
    """
    leaves = [x.detach().clone().double().requires_grad_(True) for x in inputs]
    loss = loss_fn(*leaves)
    analytic = torch.autograd.grad(loss, leaves, allow_unused=False)
    worst = 0.0
    for idx, leaf in enumerate(leaves):
        def partial(x, idx=idx):
            probe = [l.detach() for l in leaves]
            probe[idx] = x
            return loss_fn(*probe)

        numeric = finite_difference(partial, leaf.detach(), h)
        err = relative_error(analytic[idx].detach(), numeric)
        worst = max(worst, err)
    assert worst <= tol, f"gradient mismatch: relative error {worst:.3e} > {tol}"
    return worst


def brute_force_assignment(cost: np.ndarray) -> Tuple[List[int], float]:
    """Exhaustive minimum-cost injective assignment of columns to rows.

    Returns (row index per column, total cost). Only viable for tiny inputs.
    """
    M, G = cost.shape
    assert G <= M
    best_perm: Tuple[int, ...] = ()
    best_total = float("inf")
    for perm in permutations(range(M), G):
        total = sum(float(cost[perm[g], g]) for g in range(G))
        if total < best_total:
            best_total = total
            best_perm = perm
    return list(best_perm), best_total


def _iou(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def detection_ap_oracle(predictions: Sequence[Tuple[float, float, float]],
                        gts: Sequence[Tuple[float, float]],
                        threshold: float) -> float:
    """AP via explicit PR-curve construction and recall-grid integration.

    Builds the full (recall, precision) curve point by point, then sums the
    interpolated precision at each reachable recall level r = j / n_gt.
    """
    n_gt = len(gts)
    assert n_gt > 0
    order = sorted(range(len(predictions)), key=lambda i: (-predictions[i][2], i))
    matched = [False] * n_gt
    curve: List[Tuple[float, float]] = []
    tp = 0
    for rank, i in enumerate(order, start=1):
        pred_interval = (predictions[i][0], predictions[i][1])
        best_iou = 0.0
        best_g = -1
        for g, gt in enumerate(gts):
            if matched[g]:
                continue
            iou = _iou(pred_interval, gt)
            if iou > best_iou:
                best_iou, best_g = iou, g
        if best_g >= 0 and best_iou >= threshold:
            matched[best_g] = True
            tp += 1
        curve.append((tp / n_gt, tp / rank))
    ap = 0.0
    for j in range(1, n_gt + 1):
        level = j / n_gt
        at_level = [p for r, p in curve if r >= level - 1e-12]
        ap += (max(at_level) if at_level else 0.0) / n_gt
    return ap


def ranking_ap_oracle(scores: Sequence[float], positives: Sequence[bool]) -> float:
    """Mean precision over positive ranks, recomputed rank by rank."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    n_pos = sum(positives)
    assert n_pos > 0
    total = 0.0
    for rank in range(1, len(order) + 1):
        i = order[rank - 1]
        if positives[i]:
            seen_pos = sum(1 for j in order[:rank] if positives[j])
            total += seen_pos / rank
    return total / n_pos


def cosine_matrix_oracle(text: np.ndarray, video: np.ndarray,
                         eps: float = 1e-6) -> np.ndarray:
    """Per-pair cosine with an explicit double loop."""
    N, L = text.shape[0], video.shape[0]
    out = np.zeros((N, L))
    for j in range(N):
        for i in range(L):
            dot = float(np.dot(text[j], video[i]))
            denom = max(np.linalg.norm(text[j]), eps) * max(np.linalg.norm(video[i]), eps)
            out[j, i] = dot / denom
    return out


def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop matrix product."""
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += float(a[i, k]) * float(b[k, j])
            out[i, j] = acc
    return out


def clip_overlap_oracle(moments: Sequence[Tuple[float, float]], duration: float,
                        clip_len: float) -> List[int]:
    """Per-clip relevance by direct interval arithmetic."""
    import math

    labels = []
    for i in range(int(math.ceil(duration / clip_len))):
        lo = i * clip_len
        hi = min((i + 1) * clip_len, duration)
        hit = 0
        for s, e in moments:
            overlap = max(0.0, min(hi, e) - max(lo, s))
            if (s <= lo and e >= hi) or overlap > clip_len / 2:
                hit = 1
        labels.append(hit)
    return labels
