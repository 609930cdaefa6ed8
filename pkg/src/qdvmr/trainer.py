"""Model assembly, optimization, evaluation, and the ablation harness.

The model wires the projection, alignment, debiasing, fusion, and span
prediction pieces behind four independent toggles (gpa, ve, qe, cue); with
all four off it degrades to the plain encoder-decoder baseline. A trainable
token-embedding table stands in for a pretrained text encoder on synthetic
data; real runs consume precomputed text features from files instead.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from . import featurestore as fs
from .alignment import (
    FeatureProjection,
    align_features,
    global_contrastive_loss,
    gpa_loss,
    masked_mean,
    part_aware_loss,
)
from .debias import MlmHead, QueryExpander, WordContextAttention, batch_mlm_loss
from .detrhead import (
    MomentTransformer,
    PredictionSet,
    SpanWeights,
    hungarian_match,
    predict,
    predictions_to_json,
    vmr_loss,
)
from .fusion import VisualFusion
from .metrics import EvalReport, evaluate_predictions

ALL_TOGGLES = ("gpa", "ve", "qe", "cue")

# Table-style ablation grid: one letter per toggle combination.
ABLATION_GRID: Dict[str, Tuple[str, ...]] = {
    "a": (),
    "b": ("gpa",),
    "c": ("ve",),
    "d": ("qe",),
    "e": ("cue",),
    "f": ("qe", "cue"),
    "g": ("gpa", "ve"),
    "h": ("gpa", "qe", "cue"),
    "i": ("ve", "qe", "cue"),
    "j": ("gpa", "ve", "qe", "cue"),
}

SEED_ENV_VAR = "QDVMR_SEED"


@dataclass
class LossWeights:
    """Scalar weights of the composite objective."""

    lambda_gpa: float = 0.2
    lambda_w: float = 0.4
    lambda_l1: float = 10.0
    lambda_iou: float = 1.0
    lambda_ce: float = 4.0
    eos_coef: float = 0.1
    temperature: float = 0.07
    eps: float = 1e-6

    def validate(self) -> None:
        for name in ("lambda_gpa", "lambda_w", "lambda_l1", "lambda_iou", "lambda_ce"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0")
        if not 0.0 < self.temperature <= 1.0:
            raise ValueError("temperature must lie in (0, 1]")

    def span_weights(self) -> SpanWeights:
        return SpanWeights(
            l1=self.lambda_l1, iou=self.lambda_iou, ce=self.lambda_ce, eos_coef=self.eos_coef
        )


@dataclass
class TrainConfig:
    """Everything a run needs; serialized verbatim into checkpoints."""

    profile: str = "desk"
    epochs: int = 200
    batch_size: int = 8
    lr: float = 1e-3
    weight_decay: float = 1e-4
    grad_clip: float = 0.1
    seed: int = 0
    num_threads: int = 1
    validate_every: int = 25
    toggles: Tuple[str, ...] = ALL_TOGGLES
    # model dims
    hidden_dim: int = 64
    num_heads: int = 4
    enc_layers: int = 1
    dec_layers: int = 1
    num_queries: int = 10
    n_expansion: int = 3
    ffn_dim: Optional[int] = None
    dropout: float = 0.0
    proj_layers: int = 2
    # data-dependent dims, resolved from the dataset when left at 0
    d_video: int = 0
    d_text: int = 0
    vocab_size: int = 0
    clip_len: float = 2.0
    # behavior flags
    text_mode: str = "toy"
    saliency_mode: str = "gpa"
    symmetric_contrastive: bool = False
    mlm_all_positions: bool = False
    aux_decoder_losses: bool = False
    top_k: int = 10
    nms_iou: float = 1.0
    weights: LossWeights = field(default_factory=LossWeights)

    def validate(self) -> None:
        if self.text_mode not in ("toy", "files"):
            raise ValueError(f"unknown text_mode: {self.text_mode}")
        unknown = set(self.toggles) - set(ALL_TOGGLES)
        if unknown:
            raise ValueError(f"unknown toggles: {sorted(unknown)}")
        self.weights.validate()

    def enabled(self, toggle: str) -> bool:
        return toggle in self.toggles

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["toggles"] = list(self.toggles)
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> "TrainConfig":
        data = dict(data)
        weights = data.pop("weights", {})
        data["toggles"] = tuple(data.get("toggles", ALL_TOGGLES))
        cfg = cls(**data, weights=LossWeights(**weights)) if weights else cls(**data)
        cfg.validate()
        return cfg


def desk_profile(**overrides) -> TrainConfig:
    """Small single-core profile for synthetic data."""
    return replace(TrainConfig(), **overrides)


def paper_profile(**overrides) -> TrainConfig:
    """Benchmark-scale hyperparameters for precomputed-feature runs."""
    base = TrainConfig(
        profile="paper",
        epochs=200,
        batch_size=256,
        lr=2e-4,
        hidden_dim=256,
        enc_layers=2,
        dec_layers=2,
        ffn_dim=1024,
        dropout=0.1,
        text_mode="files",
        validate_every=5,
    )
    return replace(base, **overrides)


PROFILES = {"desk": desk_profile, "paper": paper_profile}


def make_config(profile: str = "desk", **overrides) -> TrainConfig:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile: {profile} (expected desk or paper)")
    known = set(TrainConfig.__dataclass_fields__)
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if isinstance(overrides.get("weights"), dict):
        overrides["weights"] = LossWeights(**overrides["weights"])
    if "toggles" in overrides:
        overrides["toggles"] = tuple(overrides["toggles"])
    cfg = PROFILES[profile](**overrides)
    cfg.validate()
    return cfg


def resolve_seed(config: TrainConfig) -> int:
    """The environment variable wins over the configured seed."""
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else config.seed


# ---------------------------------------------------------------------------
# Model assembly
# ---------------------------------------------------------------------------


@dataclass
class ModelOutput:
    spans: torch.Tensor  # B x M x 2
    fg_logits: torch.Tensor  # B x M x 2
    fg_prob: torch.Tensor  # B x M
    saliency: torch.Tensor  # B x L
    clip_similarity: torch.Tensor  # B x L
    losses: Dict[str, torch.Tensor]


class ToyTextEncoder(nn.Module):
    """Trainable token-embedding table; the mask sentinel row trains too."""

    def __init__(self, vocab_size: int, d_text: int):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, d_text)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        return self.embed(token_ids)


class MomentRetrievalModel(nn.Module):
    """Full retrieval/highlight network assembled from the module toggles."""

    def __init__(self, config: TrainConfig):
        super().__init__()
        config.validate()
        if config.d_video <= 0 or config.d_text <= 0:
            raise ValueError("d_video and d_text must be resolved before building the model")
        self.config = config
        H = config.hidden_dim
        if config.text_mode == "toy":
            if config.vocab_size <= 1:
                raise ValueError("toy text mode needs a vocabulary size")
            self.toy_text = ToyTextEncoder(config.vocab_size, config.d_text)
        else:
            self.toy_text = None
        self.video_proj = FeatureProjection(
            config.d_video, H, config.proj_layers, config.dropout
        )
        self.text_proj = FeatureProjection(
            config.d_text, H, config.proj_layers, config.dropout
        )
        self.transformer = MomentTransformer(
            hidden_dim=H,
            num_heads=config.num_heads,
            num_encoder_layers=config.enc_layers,
            num_decoder_layers=config.dec_layers,
            num_queries=config.num_queries,
            ffn_dim=config.ffn_dim,
            dropout=config.dropout,
            saliency_mode=config.saliency_mode,
        )
        self.expander = (
            QueryExpander(config.n_expansion, H) if config.enabled("qe") else None
        )
        if config.enabled("cue"):
            if config.vocab_size <= 1:
                raise ValueError("cue needs a vocabulary size for the word head")
            self.word_attention = WordContextAttention(H, config.num_heads)
            self.mlm_head = MlmHead(H, config.vocab_size)
        else:
            self.word_attention = None
            self.mlm_head = None
        self.visual_fusion = VisualFusion(H) if config.enabled("ve") else None

    def loss_term_names(self) -> List[str]:
        names = ["vmr"]
        if self.config.enabled("gpa"):
            names.append("gpa")
        if self.config.enabled("cue"):
            names.append("mlm")
        return names

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def _text_features(self, batch: fs.Batch) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
        if self.config.text_mode == "toy":
            text = self.toy_text(batch.token_ids)
            masked = (
                self.toy_text(batch.masked_token_ids)
                if self.config.enabled("cue")
                else None
            )
            return text, masked
        if batch.text is None:
            raise ValueError("files text mode needs text features in the batch")
        if self.config.enabled("cue") and batch.masked_text is None:
            raise ValueError("cue in files mode needs masked text features")
        return batch.text, batch.masked_text

    def forward(self, batch: fs.Batch, compute_losses: bool = True) -> ModelOutput:
        cfg = self.config
        w = cfg.weights
        text_raw, masked_raw = self._text_features(batch)
        video = self.video_proj(batch.video)
        text = self.text_proj(text_raw)
        similarity, clip_sim = align_features(text, video, batch.token_mask)

        losses: Dict[str, torch.Tensor] = {}
        if compute_losses and cfg.enabled("gpa"):
            part = part_aware_loss(clip_sim, batch.clip_labels, batch.clip_mask, w.eps)
            video_mean = masked_mean(video, batch.clip_mask)
            text_mean = masked_mean(text, batch.token_mask)
            glob = global_contrastive_loss(
                video_mean, text_mean, w.temperature, cfg.symmetric_contrastive
            )
            losses["gpa"] = gpa_loss(part, glob)

        if compute_losses and cfg.enabled("cue"):
            words = self.text_proj(masked_raw)
            grounded, _ = self.word_attention(words, video, batch.clip_mask)
            losses["mlm"] = batch_mlm_loss(
                grounded,
                batch.mask_positions,
                batch.gold_ids,
                self.mlm_head,
                all_positions=cfg.mlm_all_positions,
                token_ids=batch.token_ids,
                token_mask=batch.token_mask,
            )

        if cfg.enabled("ve"):
            enhanced_video = self.visual_fusion.enhance(
                video, similarity, text, batch.token_mask, batch.clip_mask
            )
        else:
            enhanced_video = video

        if cfg.enabled("qe"):
            enhanced_text, text_mask = self.expander(
                text, self.transformer.run_encoder, batch.token_mask
            )
            n_expansion = cfg.n_expansion
        else:
            enhanced_text, text_mask = text, batch.token_mask
            n_expansion = 0

        memory = self.transformer.encode(
            enhanced_video,
            enhanced_text,
            batch.clip_mask,
            text_mask,
            num_expansion=n_expansion,
        )
        L = batch.video.shape[1]
        video_memory = memory[:, :L]
        use_aux = compute_losses and cfg.aux_decoder_losses
        spans, fg_logits = self.transformer.decode(
            video_memory, batch.clip_mask, return_layers=use_aux
        )
        if use_aux:
            layer_spans, layer_logits = spans, fg_logits
            spans, fg_logits = spans[-1], fg_logits[-1]
        fg_prob = fg_logits.softmax(dim=-1)[..., 1]
        saliency = self.transformer.saliency_scores(clip_sim, video_memory)

        if compute_losses:
            if not torch.isfinite(spans).all() or not torch.isfinite(fg_logits).all():
                raise RuntimeError(
                    "non-finite 'vmr' span predictions (the span head diverged)"
                )
            span_w = w.span_weights()
            gt_spans = batch.gt_spans()

            def matched_loss(layer_sp, layer_lg):
                per_sample = []
                probs = layer_lg.softmax(dim=-1)[..., 1]
                for b in range(len(batch)):
                    gts = gt_spans[b].to(layer_sp.device)
                    match = hungarian_match(
                        layer_sp[b].detach(), probs[b].detach(), gts, span_w
                    )
                    per_sample.append(
                        vmr_loss(layer_sp[b], layer_lg[b], gts, match, span_w)
                    )
                return torch.stack(per_sample).mean()

            if use_aux:
                losses["vmr"] = torch.stack(
                    [matched_loss(s, g) for s, g in zip(layer_spans, layer_logits)]
                ).mean()
            else:
                losses["vmr"] = matched_loss(spans, fg_logits)

        return ModelOutput(
            spans=spans,
            fg_logits=fg_logits,
            fg_prob=fg_prob,
            saliency=saliency,
            clip_similarity=clip_sim,
            losses=losses,
        )


def total_loss(
    components: Dict[str, torch.Tensor], weights: LossWeights
) -> torch.Tensor:
    """Weighted sum: lambda_gpa * gpa + lambda_w * mlm + vmr; absent terms are 0."""
    total = components["vmr"]
    if "gpa" in components:
        total = total + weights.lambda_gpa * components["gpa"]
    if "mlm" in components:
        total = total + weights.lambda_w * components["mlm"]
    return total


# ---------------------------------------------------------------------------
# Checkpoints: a directory of QDT tensors plus a JSON index
# ---------------------------------------------------------------------------


def save_checkpoint(
    out_dir: Path | str,
    model: MomentRetrievalModel,
    optimizer: Optional[torch.optim.Optimizer] = None,
    epoch: int = 0,
) -> Path:
    out_dir = Path(out_dir)
    (out_dir / "params").mkdir(parents=True, exist_ok=True)
    index: Dict = {
        "config": model.config.to_dict(),
        "epoch": epoch,
        "params": {},
        "optimizer": None,
    }
    for name, tensor in model.state_dict().items():
        fname = name.replace(".", "__") + ".qdt"
        fs.write_tensor(out_dir / "params" / fname, tensor.detach().cpu().numpy())
        index["params"][name] = fname
    if optimizer is not None:
        (out_dir / "optim").mkdir(exist_ok=True)
        state = optimizer.state_dict()
        opt_index: Dict = {"steps": {}, "tensors": {}, "param_groups": state["param_groups"]}
        for pid, entry in state["state"].items():
            for key, value in entry.items():
                if torch.is_tensor(value) and value.dim() > 0:
                    fname = f"{pid}__{key}.qdt"
                    fs.write_tensor(out_dir / "optim" / fname, value.cpu().numpy())
                    opt_index["tensors"][f"{pid}/{key}"] = fname
                else:
                    opt_index["steps"][f"{pid}/{key}"] = float(value)
        index["optimizer"] = opt_index
    with open(out_dir / "index.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def load_checkpoint(
    ckpt_dir: Path | str,
) -> Tuple[MomentRetrievalModel, TrainConfig, int]:
    ckpt_dir = Path(ckpt_dir)
    index_path = ckpt_dir / "index.json"
    if not index_path.is_file():
        raise fs.ValidationError(f"not a checkpoint directory: {ckpt_dir}")
    with open(index_path, "r", encoding="utf-8") as fh:
        index = json.load(fh)
    config = TrainConfig.from_dict(index["config"])
    model = MomentRetrievalModel(config)
    state = {}
    for name, fname in index["params"].items():
        array = fs.read_tensor(ckpt_dir / "params" / fname)
        state[name] = torch.from_numpy(array)
    model.load_state_dict(state)
    model.eval()
    return model, config, int(index.get("epoch", 0))


def load_optimizer_state(
    ckpt_dir: Path | str, optimizer: torch.optim.Optimizer
) -> bool:
    """Restore saved moments into a freshly built optimizer; False if absent."""
    ckpt_dir = Path(ckpt_dir)
    with open(ckpt_dir / "index.json", "r", encoding="utf-8") as fh:
        index = json.load(fh)
    opt_index = index.get("optimizer")
    if not opt_index:
        return False
    state: Dict[int, Dict] = {}
    for key, fname in opt_index["tensors"].items():
        pid, name = key.split("/")
        array = fs.read_tensor(ckpt_dir / "optim" / fname)
        state.setdefault(int(pid), {})[name] = torch.from_numpy(array)
    for key, value in opt_index["steps"].items():
        pid, name = key.split("/")
        state.setdefault(int(pid), {})[name] = torch.tensor(value)
    optimizer.load_state_dict(
        {"state": state, "param_groups": opt_index["param_groups"]}
    )
    return True


# ---------------------------------------------------------------------------
# Training, evaluation, ablation
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    checkpoint_dir: Path
    history: List[Dict[str, float]]
    best_epoch: int
    best_r1_07: float


def resolve_data_dims(config: TrainConfig, dataset: fs.FeatureDataset) -> TrainConfig:
    """Fill dimension fields from the dataset when the config leaves them 0."""
    updates: Dict = {}
    if config.d_video <= 0:
        updates["d_video"] = dataset.d_video
    if config.d_text <= 0:
        d_text = dataset.d_text if config.text_mode == "files" else None
        if d_text is None:
            d_text = dataset.meta.get("d_text", 0) or dataset.d_text or 0
        if not d_text:
            raise fs.ValidationError("cannot infer text dimension from dataset")
        updates["d_text"] = int(d_text)
    if config.vocab_size <= 0:
        updates["vocab_size"] = int(dataset.vocab_size)
    updates["clip_len"] = dataset.clip_len
    return replace(config, **updates)


def iter_batches(
    dataset: fs.FeatureDataset,
    batch_size: int,
    shuffle: bool = False,
    rng: Optional[np.random.Generator] = None,
):
    indices = np.arange(len(dataset))
    if shuffle:
        assert rng is not None
        rng.shuffle(indices)
    for start in range(0, len(indices), batch_size):
        chunk = indices[start : start + batch_size]
        yield fs.collate([dataset[int(i)] for i in chunk])


def train(
    config: TrainConfig,
    data_dir: Path | str,
    out_dir: Path | str,
    train_split: str = "train",
    val_split: str = "val",
) -> TrainResult:
    """Optimize the model, tracking per-epoch loss components.

    Deterministic given the seed at a fixed thread count. The best
    checkpoint is chosen by validation R1@0.7 (falling back to the final
    epoch when no validation split exists), and a loss CSV is written next
    to the checkpoint.
    """
    config.validate()
    seed = resolve_seed(config)
    torch.set_num_threads(config.num_threads)
    torch.manual_seed(seed)

    data_dir = Path(data_dir)
    out_dir = Path(out_dir)
    dataset = fs.FeatureDataset(data_dir, train_split, mask_seed=seed)
    config = resolve_data_dims(config, dataset)
    val_dataset = None
    if (data_dir / f"{val_split}.jsonl").is_file():
        val_dataset = fs.FeatureDataset(data_dir, val_split, mask_seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = MomentRetrievalModel(config)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.lr, weight_decay=config.weight_decay
    )

    ckpt_dir = out_dir / "checkpoint"
    history: List[Dict[str, float]] = []
    best_r1 = -1.0
    best_epoch = 0
    for epoch in range(1, config.epochs + 1):
        model.train()
        rng = np.random.default_rng(seed * 1_000_003 + epoch)
        sums: Dict[str, float] = {}
        batches = 0
        for batch in iter_batches(dataset, config.batch_size, shuffle=True, rng=rng):
            try:
                output = model(batch)
            except RuntimeError as exc:
                raise RuntimeError(f"epoch {epoch}: {exc}") from exc
            for name, value in output.losses.items():
                if not torch.isfinite(value):
                    raise RuntimeError(
                        f"non-finite '{name}' loss at epoch {epoch}; aborting"
                    )
            loss = total_loss(output.losses, config.weights)
            optimizer.zero_grad()
            loss.backward()
            if config.grad_clip > 0:
                nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            optimizer.step()
            sums["total"] = sums.get("total", 0.0) + float(loss.detach())
            for name, value in output.losses.items():
                sums[name] = sums.get(name, 0.0) + float(value.detach())
            batches += 1
        epoch_row = {"epoch": float(epoch)}
        epoch_row.update({k: v / batches for k, v in sums.items()})
        history.append(epoch_row)

        is_last = epoch == config.epochs
        if val_dataset is not None and (epoch % config.validate_every == 0 or is_last):
            report = evaluate_model(model, val_dataset, config)
            if report.r1_07 > best_r1:
                best_r1 = report.r1_07
                best_epoch = epoch
                save_checkpoint(ckpt_dir, model, optimizer, epoch)
        elif is_last and val_dataset is None:
            best_epoch = epoch
            save_checkpoint(ckpt_dir, model, optimizer, epoch)

    loss_names = ["total"] + model.loss_term_names()
    with open(out_dir / "loss_curve.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch"] + loss_names)
        for row in history:
            writer.writerow(
                [int(row["epoch"])] + [f"{row.get(name, 0.0):.6f}" for name in loss_names]
            )
    return TrainResult(
        checkpoint_dir=ckpt_dir,
        history=history,
        best_epoch=best_epoch,
        best_r1_07=max(best_r1, 0.0),
    )


def predict_dataset(
    model: MomentRetrievalModel,
    dataset: fs.FeatureDataset,
    config: Optional[TrainConfig] = None,
    batch_size: int = 32,
) -> List[Dict]:
    """Ranked moments and saliency per sample as documented JSONL records."""
    config = config or model.config
    model.eval()
    records: List[Dict] = []
    with torch.no_grad():
        for batch in iter_batches(dataset, batch_size):
            output = model(batch, compute_losses=False)
            for b, sid in enumerate(batch.sample_ids):
                L = int(batch.clip_mask[b].sum())
                pred = PredictionSet(
                    spans=output.spans[b],
                    fg_prob=output.fg_prob[b],
                    saliency=output.saliency[b, :L],
                )
                moments = predict(
                    pred, batch.durations[b], config.top_k, config.nms_iou
                )
                records.append(
                    predictions_to_json(sid, moments, pred.saliency.tolist())
                )
    return records


def evaluate_model(
    model: MomentRetrievalModel,
    dataset: fs.FeatureDataset,
    config: Optional[TrainConfig] = None,
) -> EvalReport:
    """Predict the split and score it; pure with respect to model parameters."""
    records = predict_dataset(model, dataset, config)
    by_id = {r["sample_id"]: r for r in records}
    sample_ids = [s.record.sample_id for s in dataset.samples]
    predictions = [
        [tuple(m) for m in by_id[sid]["moments"]] for sid in sample_ids
    ]
    gts = [list(s.record.moments) for s in dataset.samples]
    saliency = [by_id[sid]["saliency"] for sid in sample_ids]
    labels = [s.record.saliency_labels for s in dataset.samples]
    return evaluate_predictions(sample_ids, predictions, gts, saliency, labels)


def evaluate_checkpoint(
    ckpt_dir: Path | str, data_dir: Path | str, split: str
) -> EvalReport:
    model, config, _ = load_checkpoint(ckpt_dir)
    torch.set_num_threads(config.num_threads)
    dataset = fs.FeatureDataset(data_dir, split, mask_seed=resolve_seed(config))
    return evaluate_model(model, dataset, config)


def ablate(
    config: TrainConfig,
    data_dir: Path | str,
    out_dir: Path | str,
    settings: Sequence[str],
    eval_split: str = "val",
) -> List[Dict]:
    """Train and evaluate one model per toggle setting; returns table rows."""
    rows: List[Dict] = []
    out_dir = Path(out_dir)
    for setting in settings:
        if setting not in ABLATION_GRID:
            raise ValueError(f"unknown ablation setting: {setting}")
        toggles = ABLATION_GRID[setting]
        run_config = replace(config, toggles=toggles)
        run_dir = out_dir / f"setting_{setting}"
        result = train(run_config, data_dir, run_dir)
        model, _, _ = load_checkpoint(result.checkpoint_dir)
        split = eval_split if (Path(data_dir) / f"{eval_split}.jsonl").is_file() else "train"
        dataset = fs.FeatureDataset(data_dir, split, mask_seed=resolve_seed(run_config))
        report = evaluate_model(model, dataset, model.config)
        rows.append(
            {
                "setting": setting,
                "toggles": list(toggles),
                "param_count": model.parameter_count(),
                "loss_terms": model.loss_term_names(),
                "report": report.to_json(),
            }
        )
    return rows
