"""Transformer fine-tuning harness: pluggable encoder, two-class head,
partial block freezing, class-weighted cross-entropy, k-fold tuning, and
inference.

The encoder interface is (tokenize, forward, parameter_groups); a tiny
randomly initialized encoder ships for desk-scale runs and tests.  Adapters
for full pretrained multilingual encoders can implement the same interface
and load external weight files.
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .corpus import Sentence
from .datasets import LabeledExample
from .evaluation import confusion, f_beta

SentenceKey = tuple[str, int, int]

# Reference geometry of the full-scale multilingual encoder.
REFERENCE_SPEC_NAME = "multilingual-base"
REFERENCE_N_BLOCKS = 12
REFERENCE_HIDDEN = 768
REFERENCE_N_HEADS = 12


class ModelError(Exception):
    pass


class ConfigError(ModelError):
    pass


class TrainingDegenerateError(ModelError):
    pass


@dataclass(frozen=True)
class EncoderSpec:
    name: str
    n_blocks: int
    hidden_size: int
    n_heads: int
    vocab_size: int = 4096

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ConfigError("n_blocks must be >= 1")
        if self.hidden_size % self.n_heads != 0:
            raise ConfigError("hidden_size must be divisible by n_heads")


TINY_SPEC = EncoderSpec("tiny", n_blocks=2, hidden_size=32, n_heads=2, vocab_size=1024)
REFERENCE_SPEC = EncoderSpec(
    REFERENCE_SPEC_NAME,
    n_blocks=REFERENCE_N_BLOCKS,
    hidden_size=REFERENCE_HIDDEN,
    n_heads=REFERENCE_N_HEADS,
    vocab_size=105879,
)


@dataclass
class TrainingConfig:
    learning_rate: float = 5e-5
    epochs: int = 5
    class_weights: tuple[float, float] = (0.17, 0.83)
    n_freeze: int = 6
    k_folds: int = 5
    batch_size: int = 16
    max_seq_len: int = 128
    seed: int = 0
    weight_decay: float = 0.01
    decision_threshold: float = 0.5

    def __post_init__(self):
        if abs(sum(self.class_weights) - 1.0) > 1e-9:
            raise ConfigError("class weights must sum to 1")
        if min(self.class_weights) <= 0:
            raise ConfigError("class weights must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.n_freeze < 0:
            raise ConfigError("n_freeze must be >= 0")


@dataclass
class PredictionRecord:
    key: SentenceKey
    prob_hrv: float
    label: int
    truncated: bool = False


# ---------------------------------------------------------------------------
# Weighted cross-entropy with analytic gradient (numpy reference path)

def weighted_ce_loss(
    logits: np.ndarray,
    labels: np.ndarray,
    weights: Sequence[float],
    return_grad: bool = False,
):
    """Mean over the batch of w[label_i] * (-log softmax(logits_i)[label_i]).

    Plain mean, not normalized by the weight sum.  With return_grad, also
    returns d(loss)/d(logits) in closed form.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not np.all(np.isfinite(logits)):
        raise ModelError("non-finite logits")
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    w = np.asarray(weights, dtype=np.float64)[labels]
    nll = -np.log(probs[np.arange(n), labels])
    loss = float(np.mean(w * nll))
    if not return_grad:
        return loss
    one_hot = np.zeros_like(probs)
    one_hot[np.arange(n), labels] = 1.0
    grad = (w[:, None] * (probs - one_hot)) / n
    return loss, grad


def _torch_weighted_ce(
    logits: torch.Tensor, labels: torch.Tensor, weights: Sequence[float]
) -> torch.Tensor:
    log_probs = torch.log_softmax(logits, dim=1)
    nll = -log_probs.gather(1, labels.unsqueeze(1)).squeeze(1)
    w = torch.as_tensor(weights, dtype=logits.dtype, device=logits.device)[labels]
    return (w * nll).mean()


# ---------------------------------------------------------------------------
# Tokenizer and tiny encoder

PAD_ID = 0
CLS_ID = 1
_RESERVED = 2


class HashTokenizer:
    """Stable hashing tokenizer: no vocabulary files, same ids across runs."""

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def encode(self, text: str, max_len: int) -> tuple[list[int], bool]:
        ids = [CLS_ID]
        for tok in text.casefold().split():
            h = zlib.crc32(tok.encode("utf-8"))
            ids.append(_RESERVED + h % (self.vocab_size - _RESERVED))
        truncated = len(ids) > max_len
        return ids[:max_len], truncated


class TransformerBlock(nn.Module):
    def __init__(self, hidden: int, n_heads: int):
        super().__init__()
        self.attn = nn.MultiheadAttention(hidden, n_heads, batch_first=True)
        self.norm1 = nn.LayerNorm(hidden)
        self.ffn = nn.Sequential(
            nn.Linear(hidden, hidden * 4), nn.GELU(), nn.Linear(hidden * 4, hidden)
        )
        self.norm2 = nn.LayerNorm(hidden)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        attn_out, _ = self.attn(x, x, x, key_padding_mask=pad_mask, need_weights=False)
        x = self.norm1(x + attn_out)
        return self.norm2(x + self.ffn(x))


class TinyEncoder(nn.Module):
    """Randomly initialized encoder implementing the pluggable interface:
    tokenize via HashTokenizer, forward to token states, and parameter
    groups keyed "embeddings", "block_1".."block_n"."""

    def __init__(self, spec: EncoderSpec, max_seq_len: int = 128):
        super().__init__()
        self.spec = spec
        self.tokenizer = HashTokenizer(spec.vocab_size)
        self.token_emb = nn.Embedding(spec.vocab_size, spec.hidden_size, padding_idx=PAD_ID)
        self.pos_emb = nn.Embedding(max_seq_len, spec.hidden_size)
        self.blocks = nn.ModuleList(
            TransformerBlock(spec.hidden_size, spec.n_heads)
            for _ in range(spec.n_blocks)
        )

    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        groups = {
            "embeddings": list(self.token_emb.parameters())
            + list(self.pos_emb.parameters())
        }
        for i, block in enumerate(self.blocks, start=1):
            groups[f"block_{i}"] = list(block.parameters())
        return groups

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        pad_mask = ids == PAD_ID
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_emb(ids) + self.pos_emb(positions)[None, :, :]
        for block in self.blocks:
            x = block(x, pad_mask)
        return x


@dataclass
class ClassifierModel:
    encoder: TinyEncoder
    head: nn.Linear
    config: TrainingConfig
    frozen_groups: set[str] = field(default_factory=set)
    history: list[float] = field(default_factory=list)
    trained: bool = False

    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        groups = self.encoder.parameter_groups()
        groups["head"] = list(self.head.parameters())
        return groups

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [
            p
            for name, params in self.parameter_groups().items()
            if name not in self.frozen_groups
            for p in params
        ]

    def encode_batch(
        self, texts: Sequence[str]
    ) -> tuple[torch.Tensor, list[bool]]:
        max_len = self.config.max_seq_len
        encoded = [self.encoder.tokenizer.encode(t, max_len) for t in texts]
        width = max(len(ids) for ids, _ in encoded)
        batch = torch.full((len(encoded), width), PAD_ID, dtype=torch.long)
        for i, (ids, _) in enumerate(encoded):
            batch[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        return batch, [trunc for _, trunc in encoded]

    def logits(self, texts: Sequence[str]) -> tuple[torch.Tensor, list[bool]]:
        ids, truncated = self.encode_batch(texts)
        states = self.encoder(ids)
        return self.head(states[:, 0, :]), truncated  # first-token pooling


def build_classifier(spec: EncoderSpec, config: TrainingConfig) -> ClassifierModel:
    """Fresh classifier: encoder + small-random head, freeze mask applied.

    Freezing covers the embeddings plus the first n_freeze blocks; the head
    is always trainable.
    """
    if config.n_freeze > spec.n_blocks:
        raise ConfigError(
            f"n_freeze={config.n_freeze} exceeds encoder blocks ({spec.n_blocks})"
        )
    torch.manual_seed(config.seed)
    encoder = TinyEncoder(spec, max_seq_len=config.max_seq_len)
    head = nn.Linear(spec.hidden_size, 2)
    nn.init.normal_(head.weight, std=0.02)
    nn.init.zeros_(head.bias)
    frozen: set[str] = set()
    if config.n_freeze > 0:
        frozen.add("embeddings")
        frozen.update(f"block_{i}" for i in range(1, config.n_freeze + 1))
    model = ClassifierModel(encoder, head, config, frozen_groups=frozen)
    for name, params in model.parameter_groups().items():
        for p in params:
            p.requires_grad_(name not in frozen)
    return model


def train(
    model: ClassifierModel,
    examples: Sequence[LabeledExample],
    config: TrainingConfig | None = None,
) -> ClassifierModel:
    """Mini-batch AdamW fine-tuning; records per-epoch mean loss in
    model.history.  Deterministic for a fixed seed."""
    if config is None:
        config = model.config
    if not examples:
        raise ModelError("empty training set")
    labels = [ex.label for ex in examples]
    if len(set(labels)) < 2:
        raise TrainingDegenerateError("training set contains a single class")

    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    optimizer = torch.optim.AdamW(
        model.trainable_parameters(),
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
    )
    texts = [ex.sentence.text for ex in examples]
    indices = list(range(len(examples)))
    for _ in range(config.epochs):
        rng.shuffle(indices)
        losses = []
        for start in range(0, len(indices), config.batch_size):
            batch_idx = indices[start : start + config.batch_size]
            batch_texts = [texts[i] for i in batch_idx]
            batch_labels = torch.tensor([labels[i] for i in batch_idx])
            logits, _ = model.logits(batch_texts)
            loss = _torch_weighted_ce(logits, batch_labels, config.class_weights)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        model.history.append(sum(losses) / len(losses))
    model.trained = True
    return model


@torch.no_grad()
def predict(
    model: ClassifierModel,
    sentences: Sequence[Sentence],
    allow_untrained: bool = False,
) -> list[PredictionRecord]:
    """One record per sentence: softmax HRV probability from the pooled
    representation, thresholded at config.decision_threshold (>= rule)."""
    if not model.trained and not allow_untrained:
        raise ModelError("model is untrained; pass allow_untrained=True to override")
    if not sentences:
        return []
    records: list[PredictionRecord] = []
    threshold = model.config.decision_threshold
    for start in range(0, len(sentences), model.config.batch_size):
        batch = sentences[start : start + model.config.batch_size]
        logits, truncated = model.logits([s.text for s in batch])
        probs = torch.softmax(logits, dim=1)[:, 1]
        for sent, prob, trunc in zip(batch, probs.tolist(), truncated):
            records.append(
                PredictionRecord(
                    key=sent.key,
                    prob_hrv=prob,
                    label=int(prob >= threshold),
                    truncated=trunc,
                )
            )
    return records


# ---------------------------------------------------------------------------
# k-fold cross-validation at post granularity

def make_folds(
    examples: Sequence[LabeledExample], k: int, seed: int
) -> list[list[int]]:
    """k disjoint covering folds of example indices; no post straddles
    folds and fold sizes (in posts) differ by at most one."""
    if k < 2:
        raise ModelError("k must be >= 2")
    by_post: dict[tuple[str, int], list[int]] = {}
    for i, ex in enumerate(examples):
        by_post.setdefault(ex.sentence.post_key, []).append(i)
    posts = sorted(by_post)
    if len(posts) < k:
        raise ModelError(f"need at least {k} posts for {k} folds")
    rng = random.Random(seed)
    rng.shuffle(posts)
    folds: list[list[int]] = [[] for _ in range(k)]
    for j, post in enumerate(posts):
        folds[j % k].extend(by_post[post])
    return folds


@dataclass
class CrossValidationResult:
    best_config: TrainingConfig
    fold_scores: dict[int, list[float]]  # grid index -> per-fold F2
    mean_scores: list[float]


def cross_validate(
    examples: Sequence[LabeledExample],
    spec: EncoderSpec,
    grid: Sequence[TrainingConfig],
    k: int = 5,
) -> CrossValidationResult:
    """Mean validation F2 over k post-level folds per grid point; returns the
    argmax (ties break toward lower learning rate, then fewer epochs)."""
    if not grid:
        raise ModelError("empty config grid")
    pos_posts = {ex.sentence.post_key for ex in examples if ex.label == 1}
    neg_posts = {ex.sentence.post_key for ex in examples if ex.label == 0}
    if min(len(pos_posts), len(neg_posts)) < k:
        raise ModelError(f"need at least {k} posts per class for {k} folds")

    folds = make_folds(examples, k, grid[0].seed)
    fold_scores: dict[int, list[float]] = {}
    for gi, config in enumerate(grid):
        scores = []
        for fi in range(k):
            val_idx = set(folds[fi])
            train_ex = [ex for i, ex in enumerate(examples) if i not in val_idx]
            val_ex = [examples[i] for i in sorted(val_idx)]
            model = build_classifier(spec, config)
            train(model, train_ex, config)
            preds = predict(model, [ex.sentence for ex in val_ex])
            counts = confusion(
                [p.label for p in preds], [ex.label for ex in val_ex]
            )
            scores.append(f_beta(counts, 2.0))
        fold_scores[gi] = scores
    means = [sum(fold_scores[gi]) / k for gi in range(len(grid))]
    best_gi = min(
        range(len(grid)),
        key=lambda gi: (-means[gi], grid[gi].learning_rate, grid[gi].epochs),
    )
    return CrossValidationResult(grid[best_gi], fold_scores, means)


# ---------------------------------------------------------------------------
# Model artifact (versioned directory: weights + config + history)

ARTIFACT_VERSION = 1


def save_model(model: ClassifierModel, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(
        {"encoder": model.encoder.state_dict(), "head": model.head.state_dict()},
        directory / "weights.pt",
    )
    meta = {
        "version": ARTIFACT_VERSION,
        "spec": asdict(model.encoder.spec),
        "config": asdict(model.config),
        "frozen_groups": sorted(model.frozen_groups),
        "history": model.history,
        "trained": model.trained,
    }
    (directory / "model.json").write_text(
        json.dumps(meta, indent=2), encoding="utf-8"
    )


def load_model(directory: str | Path) -> ClassifierModel:
    directory = Path(directory)
    meta = json.loads((directory / "model.json").read_text(encoding="utf-8"))
    if meta["version"] != ARTIFACT_VERSION:
        raise ModelError(f"unsupported artifact version {meta['version']}")
    spec = EncoderSpec(**meta["spec"])
    config_dict = dict(meta["config"])
    config_dict["class_weights"] = tuple(config_dict["class_weights"])
    config = TrainingConfig(**config_dict)
    model = build_classifier(spec, config)
    state = torch.load(directory / "weights.pt", weights_only=True)
    model.encoder.load_state_dict(state["encoder"])
    model.head.load_state_dict(state["head"])
    model.frozen_groups = set(meta["frozen_groups"])
    model.history = list(meta["history"])
    model.trained = bool(meta["trained"])
    return model
