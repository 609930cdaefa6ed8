"""Dataset manifests, feature tensor files, query masking, and batch collation.

A dataset is a directory holding JSONL manifests (one record per line), a
``features/`` directory of QDT tensor files, and an optional ``meta.json``
describing dimensions shared by every sample. Manifests accept both the
native field names and the QVHighlights-style names (``qid``, ``vid``,
``relevant_windows``, ``relevant_clip_ids``, ``saliency_scores``).
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

QDT_MAGIC = b"QDT1"

# QVHighlights saliency scale; clips rated >= 4 ("Very Good") are HD positives.
SALIENCY_MAX = 4


class ManifestError(ValueError):
    """Malformed manifest file (bad JSON, unknown schema)."""


class ValidationError(ValueError):
    """A record or configuration violates a documented invariant."""


class TensorFormatError(ValueError):
    """A QDT tensor file is corrupt or holds non-finite values."""


# ---------------------------------------------------------------------------
# Records and manifests
# ---------------------------------------------------------------------------


@dataclass
class SampleRecord:
    """One video/query pair with ground-truth moments and clip labels."""

    sample_id: str
    video_id: str
    query_text: str
    query_token_ids: List[int]
    duration: float
    moments: List[Tuple[float, float]]
    clip_relevance: List[int]
    saliency_labels: Optional[List[int]] = None
    video_path: Optional[str] = None
    text_path: Optional[str] = None
    masked_text_path: Optional[str] = None
    audio_path: Optional[str] = None
    mask_positions: Optional[List[int]] = None
    concept_id: Optional[int] = None

    def num_clips(self, clip_len: float) -> int:
        return int(math.ceil(self.duration / clip_len))

    def validate(self, clip_len: float, vocab_size: Optional[int] = None) -> None:
        if self.duration <= 0:
            raise ValidationError(f"sample {self.sample_id}: duration must be > 0")
        for start, end in self.moments:
            if not (0 <= start < end <= self.duration + 1e-6):
                raise ValidationError(
                    f"sample {self.sample_id}: moment ({start}, {end}) outside "
                    f"[0, {self.duration}]"
                )
        expected = self.num_clips(clip_len)
        if len(self.clip_relevance) != expected:
            raise ValidationError(
                f"sample {self.sample_id}: clip_relevance has length "
                f"{len(self.clip_relevance)}, expected {expected}"
            )
        if any(c not in (0, 1) for c in self.clip_relevance):
            raise ValidationError(f"sample {self.sample_id}: clip_relevance must be 0/1")
        if vocab_size is not None:
            if any(not (0 <= t < vocab_size) for t in self.query_token_ids):
                raise ValidationError(
                    f"sample {self.sample_id}: token id out of range [0, {vocab_size})"
                )
        if self.saliency_labels is not None:
            if len(self.saliency_labels) != expected:
                raise ValidationError(
                    f"sample {self.sample_id}: saliency_labels has length "
                    f"{len(self.saliency_labels)}, expected {expected}"
                )
            if any(not (0 <= s <= SALIENCY_MAX) for s in self.saliency_labels):
                raise ValidationError(
                    f"sample {self.sample_id}: saliency labels must lie in 0..{SALIENCY_MAX}"
                )

    def to_json(self) -> Dict:
        out: Dict = {
            "sample_id": self.sample_id,
            "video_id": self.video_id,
            "query_text": self.query_text,
            "query_token_ids": list(self.query_token_ids),
            "duration": self.duration,
            "moments": [[s, e] for s, e in self.moments],
            "clip_relevance": list(self.clip_relevance),
        }
        if self.saliency_labels is not None:
            out["saliency_labels"] = list(self.saliency_labels)
        for key in ("video_path", "text_path", "masked_text_path", "audio_path"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.mask_positions is not None:
            out["mask_positions"] = list(self.mask_positions)
        if self.concept_id is not None:
            out["concept_id"] = self.concept_id
        return out


@dataclass
class DatasetManifest:
    split: str
    records: List[SampleRecord]
    clip_len: float

    def __len__(self) -> int:
        return len(self.records)


def tokenize_text(text: str, vocab_size: int) -> List[int]:
    """Map raw words to stable token ids below the mask sentinel.

    Uses crc32 so ids do not depend on the interpreter's hash seed.
    """
    words = [w for w in "".join(c if c.isalnum() else " " for c in text.lower()).split() if w]
    content = max(1, vocab_size - 1)
    return [zlib.crc32(w.encode("utf-8")) % content for w in words]


def _median_int(values: Sequence[int]) -> int:
    ordered = sorted(values)
    return int(ordered[len(ordered) // 2]) if ordered else 0


def _record_from_json(
    obj: Dict, clip_len: float, vocab_size: Optional[int]
) -> SampleRecord:
    """Build a SampleRecord from either native or QVHighlights field names."""
    sample_id = str(obj.get("sample_id", obj.get("qid", "")))
    if not sample_id:
        raise ManifestError("record missing sample_id/qid")
    video_id = str(obj.get("video_id", obj.get("vid", sample_id)))
    query_text = obj.get("query_text", obj.get("query", ""))
    duration = float(obj["duration"])
    moments = [
        (float(s), float(e))
        for s, e in obj.get("moments", obj.get("relevant_windows", []))
    ]
    num_clips = int(math.ceil(duration / clip_len))

    if "query_token_ids" in obj:
        token_ids = [int(t) for t in obj["query_token_ids"]]
    else:
        token_ids = tokenize_text(query_text, vocab_size if vocab_size else 1024)

    if "clip_relevance" in obj:
        relevance = [int(c) for c in obj["clip_relevance"]]
    elif "relevant_clip_ids" in obj:
        relevance = [0] * num_clips
        for cid in obj["relevant_clip_ids"]:
            cid = int(cid)
            if not 0 <= cid < num_clips:
                raise ValidationError(
                    f"sample {sample_id}: relevant clip id {cid} outside 0..{num_clips - 1}"
                )
            relevance[cid] = 1
    else:
        relevance = clip_labels_from_moments(moments, duration, clip_len)

    saliency: Optional[List[int]] = None
    if "saliency_labels" in obj:
        saliency = [int(s) for s in obj["saliency_labels"]]
    elif "saliency_scores" in obj and "relevant_clip_ids" in obj:
        # QVHighlights stores per-annotator scores for relevant clips only;
        # collapse each clip to the annotator median.
        saliency = [0] * num_clips
        for cid, scores in zip(obj["relevant_clip_ids"], obj["saliency_scores"]):
            cid = int(cid)
            if 0 <= cid < num_clips:
                saliency[cid] = _median_int([int(s) for s in scores])

    record = SampleRecord(
        sample_id=sample_id,
        video_id=video_id,
        query_text=query_text,
        query_token_ids=token_ids,
        duration=duration,
        moments=moments,
        clip_relevance=relevance,
        saliency_labels=saliency,
        video_path=obj.get("video_path"),
        text_path=obj.get("text_path"),
        masked_text_path=obj.get("masked_text_path"),
        audio_path=obj.get("audio_path"),
        mask_positions=[int(p) for p in obj["mask_positions"]]
        if "mask_positions" in obj
        else None,
        concept_id=int(obj["concept_id"]) if "concept_id" in obj else None,
    )
    record.validate(clip_len, vocab_size)
    return record


def load_manifest(
    path: Path | str,
    clip_len: float = 2.0,
    vocab_size: Optional[int] = None,
) -> DatasetManifest:
    """Load a JSONL manifest, preserving record order.

    Raises ManifestError naming the offending line for malformed JSON, and
    ValidationError naming the sample for invariant violations.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    records: List[SampleRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            records.append(_record_from_json(obj, clip_len, vocab_size))
    return DatasetManifest(split=path.stem, records=records, clip_len=clip_len)


# ---------------------------------------------------------------------------
# QDT tensor files
# ---------------------------------------------------------------------------


def write_tensor(path: Path | str, array: np.ndarray) -> None:
    """Write a float array as little-endian QDT: magic, u32 ndim, u32 dims, f32 payload."""
    array = np.ascontiguousarray(array, dtype=np.float32)
    if not np.isfinite(array).all():
        raise TensorFormatError(f"refusing to write non-finite values to {path}")
    with open(path, "wb") as fh:
        fh.write(QDT_MAGIC)
        fh.write(struct.pack("<I", array.ndim))
        fh.write(struct.pack(f"<{array.ndim}I", *array.shape))
        fh.write(array.astype("<f4").tobytes(order="C"))


def read_tensor(path: Path | str) -> np.ndarray:
    """Read a QDT tensor file, checking magic, size, and finiteness."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 8 or data[:4] != QDT_MAGIC:
        raise TensorFormatError(f"{path}: bad magic (expected {QDT_MAGIC!r})")
    (ndim,) = struct.unpack_from("<I", data, 4)
    header_end = 8 + 4 * ndim
    if ndim == 0 or len(data) < header_end:
        raise TensorFormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}I", data, 8)
    count = int(np.prod(dims, dtype=np.int64))
    payload = data[header_end:]
    if len(payload) != 4 * count:
        raise TensorFormatError(
            f"{path}: payload holds {len(payload) // 4} floats, dims {dims} need {count}"
        )
    array = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    if not np.isfinite(array).all():
        raise TensorFormatError(f"{path}: payload contains NaN/Inf")
    return array


# ---------------------------------------------------------------------------
# Query masking and clip labels
# ---------------------------------------------------------------------------


@dataclass
class MaskedQuery:
    token_ids_with_mask: List[int]
    mask_positions: List[int]
    gold_ids: List[int]


def mask_query(
    token_ids: Sequence[int],
    vocab_size: int,
    ratio: float = 1.0 / 3.0,
    seed: int = 0,
) -> MaskedQuery:
    """Mask max(1, floor(N*ratio)) distinct positions with the sentinel id.

    The sentinel is the last vocabulary id. Positions are drawn uniformly
    without replacement; the draw is deterministic given the seed.
    """
    n = len(token_ids)
    if n < 1:
        raise ValidationError("cannot mask an empty query")
    mask_id = vocab_size - 1
    count = max(1, math.floor(n * ratio))
    rng = np.random.default_rng(seed)
    positions = sorted(int(p) for p in rng.choice(n, size=count, replace=False))
    masked = list(token_ids)
    gold = [int(masked[p]) for p in positions]
    for p in positions:
        masked[p] = mask_id
    return MaskedQuery(token_ids_with_mask=masked, mask_positions=positions, gold_ids=gold)


def clip_labels_from_moments(
    moments: Sequence[Tuple[float, float]], duration: float, clip_len: float
) -> List[int]:
    """Mark clip i relevant when a moment covers it fully or by more than half a clip."""
    if clip_len <= 0:
        raise ValidationError("clip_len must be > 0")
    num_clips = int(math.ceil(duration / clip_len))
    labels = [0] * num_clips
    for i in range(num_clips):
        clip_start = i * clip_len
        clip_end = min((i + 1) * clip_len, duration)
        for start, end in moments:
            overlap = min(clip_end, end) - max(clip_start, start)
            contained = start <= clip_start and end >= clip_end
            if contained or overlap > clip_len / 2:
                labels[i] = 1
                break
    return labels


# ---------------------------------------------------------------------------
# Synthetic dataset generation
# ---------------------------------------------------------------------------


@dataclass
class SyntheticConfig:
    n_train: int = 64
    n_val: int = 16
    n_clips: int = 20
    n_tokens: int = 8
    d_video: int = 32
    d_text: int = 32
    d_audio: int = 0
    vocab_size: int = 32
    n_concepts: int = 8
    clip_len: float = 2.0
    concept_scale: float = 2.0
    noise_scale: float = 0.3
    seed: int = 0

    def validate(self) -> None:
        if min(self.d_video, self.d_text) < 4:
            raise ValidationError("feature dims must be >= 4")
        if self.n_train < 1:
            raise ValidationError("need at least one training sample")
        if self.n_clips < 4 or self.n_tokens < 1:
            raise ValidationError("need at least 4 clips and 1 query token per sample")
        if self.vocab_size < self.n_concepts + 1:
            raise ValidationError("vocab must hold one token group per concept plus the sentinel")


def generate_synthetic(config: SyntheticConfig, out_dir: Path | str) -> Path:
    """Write a small learnable dataset: manifests, meta.json, and QDT features.

    Each sample carries one target moment whose clips (and query tokens) share
    a planted concept direction, plus a distractor moment from a different
    concept, so retrieval requires reading the query. Deterministic per seed.
    """
    config.validate()
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)

    video_concepts = rng.normal(size=(config.n_concepts, config.d_video))
    video_concepts /= np.linalg.norm(video_concepts, axis=1, keepdims=True)
    # Token embedding table used to materialize text feature files; token ids
    # are grouped per concept, the last id is reserved for the mask sentinel.
    token_table = rng.normal(size=(config.vocab_size, config.d_text)).astype(np.float32)
    content = config.vocab_size - 1
    tokens_per_concept = max(1, content // config.n_concepts)

    meta = {
        "clip_len": config.clip_len,
        "d_video": config.d_video + config.d_audio,
        "d_text": config.d_text,
        "d_audio": config.d_audio,
        "vocab_size": config.vocab_size,
        "n_concepts": config.n_concepts,
        "seed": config.seed,
        "n_train": config.n_train,
        "n_val": config.n_val,
    }
    with open(out_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    def make_record(split: str, index: int) -> SampleRecord:
        sample_id = f"{split}{index:04d}"
        concept = int(rng.integers(config.n_concepts))
        length = int(rng.integers(3, min(7, config.n_clips)))
        start_clip = int(rng.integers(0, config.n_clips - length + 1))
        target = (start_clip, start_clip + length)

        distractor_concept = int(rng.integers(config.n_concepts))
        if config.n_concepts > 1:
            while distractor_concept == concept:
                distractor_concept = int(rng.integers(config.n_concepts))
        free = [
            s
            for s in range(config.n_clips - 2)
            if s + 3 <= target[0] or s >= target[1]
        ]
        distractor = None
        if free and config.n_concepts > 1:
            ds = int(rng.choice(free))
            de = min(ds + 3, target[0] if ds < target[0] else config.n_clips)
            if de - ds >= 2:
                distractor = (ds, de)

        duration = config.n_clips * config.clip_len
        moments = [(target[0] * config.clip_len, target[1] * config.clip_len)]
        relevance = [1 if target[0] <= i < target[1] else 0 for i in range(config.n_clips)]
        saliency = [0] * config.n_clips
        for i in range(target[0], target[1]):
            saliency[i] = SALIENCY_MAX
        if distractor is not None:
            for i in range(distractor[0], distractor[1]):
                saliency[i] = 2

        video = rng.normal(size=(config.n_clips, config.d_video)) * config.noise_scale
        video[target[0] : target[1]] += config.concept_scale * video_concepts[concept]
        if distractor is not None:
            video[distractor[0] : distractor[1]] += (
                config.concept_scale * video_concepts[distractor_concept]
            )

        group = np.arange(
            concept * tokens_per_concept, (concept + 1) * tokens_per_concept
        ) % content
        token_ids = [int(rng.choice(group)) for _ in range(config.n_tokens)]
        text = token_table[token_ids].astype(np.float32)

        split_tag = zlib.crc32(split.encode("utf-8")) % 1000
        masked = mask_query(
            token_ids, config.vocab_size, seed=config.seed * 100003 + index * 7 + split_tag
        )
        masked_text = text.copy()
        masked_text[masked.mask_positions] = 0.0

        paths = {
            "video": f"features/{sample_id}_video.qdt",
            "text": f"features/{sample_id}_text.qdt",
            "masked": f"features/{sample_id}_masked.qdt",
        }
        write_tensor(out_dir / paths["video"], video.astype(np.float32))
        write_tensor(out_dir / paths["text"], text)
        write_tensor(out_dir / paths["masked"], masked_text)
        audio_path = None
        if config.d_audio > 0:
            audio = rng.normal(size=(config.n_clips, config.d_audio)) * config.noise_scale
            audio_path = f"features/{sample_id}_audio.qdt"
            write_tensor(out_dir / audio_path, audio.astype(np.float32))

        return SampleRecord(
            sample_id=sample_id,
            video_id=f"vid_{sample_id}",
            query_text=" ".join(f"tok{t}" for t in token_ids),
            query_token_ids=token_ids,
            duration=duration,
            moments=moments,
            clip_relevance=relevance,
            saliency_labels=saliency,
            video_path=paths["video"],
            text_path=paths["text"],
            masked_text_path=paths["masked"],
            audio_path=audio_path,
            mask_positions=masked.mask_positions,
            concept_id=concept,
        )

    for split, count in (("train", config.n_train), ("val", config.n_val)):
        if count <= 0:
            continue
        with open(out_dir / f"{split}.jsonl", "w", encoding="utf-8") as fh:
            for i in range(count):
                record = make_record(split, i)
                record.validate(config.clip_len, config.vocab_size)
                fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
    return out_dir


def load_dataset_meta(data_dir: Path | str) -> Optional[Dict]:
    path = Path(data_dir) / "meta.json"
    if not path.is_file():
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Feature loading and batch collation
# ---------------------------------------------------------------------------


@dataclass
class FeatureBundle:
    """Raw per-sample feature arrays; audio is already folded into video."""

    video: np.ndarray
    text: Optional[np.ndarray] = None
    masked_text: Optional[np.ndarray] = None


def load_features(record: SampleRecord, root: Path | str) -> FeatureBundle:
    """Read a sample's tensors; audio rows are length-aligned then concatenated."""
    root = Path(root)
    if record.video_path is None:
        raise ValidationError(f"sample {record.sample_id}: no video feature path")
    video = read_tensor(root / record.video_path)
    if record.audio_path is not None:
        audio = read_tensor(root / record.audio_path)
        L = video.shape[0]
        if audio.shape[0] >= L:
            audio = audio[:L]
        else:
            audio = np.concatenate(
                [audio, np.zeros((L - audio.shape[0], audio.shape[1]), dtype=audio.dtype)]
            )
        video = np.concatenate([video, audio], axis=1)
    text = read_tensor(root / record.text_path) if record.text_path else None
    masked = (
        read_tensor(root / record.masked_text_path) if record.masked_text_path else None
    )
    if text is not None and masked is not None and masked.shape != text.shape:
        raise ValidationError(
            f"sample {record.sample_id}: masked text shape {masked.shape} "
            f"differs from text {text.shape}"
        )
    return FeatureBundle(video=video, text=text, masked_text=masked)


def _fit_length(values: Optional[List[int]], length: int) -> Optional[List[int]]:
    if values is None:
        return None
    if len(values) >= length:
        return values[:length]
    return values + [0] * (length - len(values))


@dataclass
class Sample:
    """A record plus everything the model consumes for it."""

    record: SampleRecord
    video: np.ndarray
    text: Optional[np.ndarray]
    masked_text: Optional[np.ndarray]
    masked_query: MaskedQuery


@dataclass
class Batch:
    """Padded tensors plus validity masks; padding never reaches a loss."""

    sample_ids: List[str]
    video: torch.Tensor  # B x L x D_v
    clip_mask: torch.Tensor  # B x L bool, True = valid
    token_ids: torch.Tensor  # B x N long
    masked_token_ids: torch.Tensor  # B x N long
    token_mask: torch.Tensor  # B x N bool
    clip_labels: torch.Tensor  # B x L float
    text: Optional[torch.Tensor]  # B x N x D_t
    masked_text: Optional[torch.Tensor]
    mask_positions: List[List[int]]
    gold_ids: List[List[int]]
    durations: List[float]
    moments: List[List[Tuple[float, float]]]
    saliency_labels: List[Optional[List[int]]]

    def __len__(self) -> int:
        return len(self.sample_ids)

    def gt_spans(self) -> List[torch.Tensor]:
        """Ground-truth moments as normalized (center, width) tensors."""
        spans = []
        for sample_moments, duration in zip(self.moments, self.durations):
            cw = [
                ((s + e) / (2 * duration), (e - s) / duration)
                for s, e in sample_moments
            ]
            spans.append(torch.tensor(cw, dtype=self.video.dtype).reshape(-1, 2))
        return spans


class FeatureDataset:
    """Manifest plus eagerly loaded features for desk-scale datasets."""

    def __init__(
        self,
        data_dir: Path | str,
        split: str,
        clip_len: Optional[float] = None,
        vocab_size: Optional[int] = None,
        mask_seed: int = 0,
    ):
        self.root = Path(data_dir)
        meta = load_dataset_meta(self.root) or {}
        self.clip_len = clip_len if clip_len is not None else meta.get("clip_len", 2.0)
        self.vocab_size = vocab_size if vocab_size is not None else meta.get("vocab_size", 1024)
        self.meta = meta
        manifest_path = self.root / f"{split}.jsonl"
        self.manifest = load_manifest(manifest_path, self.clip_len, self.vocab_size)
        self.samples: List[Sample] = []
        for index, record in enumerate(self.manifest.records):
            bundle = load_features(record, self.root)
            # External feature files may disagree with the manifest-derived
            # lengths (off-by-one clips, tokenizer specials); clip metadata and
            # token ids are aligned to the feature rows by truncation/zero-pad.
            n_clips = bundle.video.shape[0]
            if len(record.clip_relevance) != n_clips:
                record.clip_relevance = _fit_length(record.clip_relevance, n_clips)
                record.saliency_labels = _fit_length(record.saliency_labels, n_clips)
            if bundle.text is not None and bundle.text.shape[0] != len(
                record.query_token_ids
            ):
                n_tokens = bundle.text.shape[0]
                record.query_token_ids = _fit_length(record.query_token_ids, n_tokens)
                if record.mask_positions is not None:
                    record.mask_positions = [
                        p for p in record.mask_positions if p < n_tokens
                    ]
            if record.mask_positions:
                gold = [record.query_token_ids[p] for p in record.mask_positions]
                masked_ids = list(record.query_token_ids)
                for p in record.mask_positions:
                    masked_ids[p] = self.vocab_size - 1
                masked = MaskedQuery(masked_ids, list(record.mask_positions), gold)
            else:
                masked = mask_query(
                    record.query_token_ids, self.vocab_size, seed=mask_seed + index
                )
            self.samples.append(
                Sample(
                    record=record,
                    video=bundle.video,
                    text=bundle.text,
                    masked_text=bundle.masked_text,
                    masked_query=masked,
                )
            )

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    @property
    def d_video(self) -> int:
        return self.samples[0].video.shape[1]

    @property
    def d_text(self) -> Optional[int]:
        text = self.samples[0].text
        return None if text is None else text.shape[1]


def collate(samples: Sequence[Sample]) -> Batch:
    """Pad a list of samples to common clip/token lengths with validity masks."""
    if not samples:
        raise ValidationError("cannot collate an empty sample list")
    d_video = samples[0].video.shape[1]
    for s in samples:
        if s.video.shape[1] != d_video:
            raise ValidationError(
                f"sample {s.record.sample_id}: video dim {s.video.shape[1]} != {d_video}"
            )
    has_text = samples[0].text is not None
    if has_text:
        d_text = samples[0].text.shape[1]
        for s in samples:
            if s.text is None or s.text.shape[1] != d_text:
                raise ValidationError(
                    f"sample {s.record.sample_id}: inconsistent text features"
                )

    max_clips = max(s.video.shape[0] for s in samples)
    max_tokens = max(len(s.record.query_token_ids) for s in samples)
    B = len(samples)

    video = torch.zeros(B, max_clips, d_video)
    clip_mask = torch.zeros(B, max_clips, dtype=torch.bool)
    clip_labels = torch.zeros(B, max_clips)
    token_ids = torch.zeros(B, max_tokens, dtype=torch.long)
    masked_token_ids = torch.zeros(B, max_tokens, dtype=torch.long)
    token_mask = torch.zeros(B, max_tokens, dtype=torch.bool)
    text = torch.zeros(B, max_tokens, d_text) if has_text else None
    masked_text = torch.zeros(B, max_tokens, d_text) if has_text else None

    for b, s in enumerate(samples):
        L = s.video.shape[0]
        N = len(s.record.query_token_ids)
        video[b, :L] = torch.from_numpy(np.ascontiguousarray(s.video, dtype=np.float32))
        clip_mask[b, :L] = True
        clip_labels[b, :L] = torch.tensor(s.record.clip_relevance, dtype=torch.float32)
        token_ids[b, :N] = torch.tensor(s.record.query_token_ids, dtype=torch.long)
        masked_token_ids[b, :N] = torch.tensor(
            s.masked_query.token_ids_with_mask, dtype=torch.long
        )
        token_mask[b, :N] = True
        if has_text:
            text[b, :N] = torch.from_numpy(np.ascontiguousarray(s.text, dtype=np.float32))
            if s.masked_text is not None:
                masked_text[b, :N] = torch.from_numpy(
                    np.ascontiguousarray(s.masked_text, dtype=np.float32)
                )

    return Batch(
        sample_ids=[s.record.sample_id for s in samples],
        video=video,
        clip_mask=clip_mask,
        token_ids=token_ids,
        masked_token_ids=masked_token_ids,
        token_mask=token_mask,
        clip_labels=clip_labels,
        text=text,
        masked_text=masked_text,
        mask_positions=[list(s.masked_query.mask_positions) for s in samples],
        gold_ids=[list(s.masked_query.gold_ids) for s in samples],
        durations=[s.record.duration for s in samples],
        moments=[list(s.record.moments) for s in samples],
        saliency_labels=[
            list(s.record.saliency_labels) if s.record.saliency_labels is not None else None
            for s in samples
        ],
    )
