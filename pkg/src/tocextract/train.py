"""Supervised training of the scorer on labelled node-centric subtrees."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .context import ContextGraph
from .doc import Document, load_document
from .editor import derive_labels
from .pipeline import NodeInputs, PipelineConfig, prepare
from .scorer import Batch, ScorerConfig, ScorerParams, TrainingError, forward, init_params, loss_and_grad
from .scorer.model import default_embedder

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    epochs: int = 20
    lr: float = 1e-3
    batch_size: int = 32
    n_d: int = 2
    d_h: int = 128
    heads: int = 2
    class_weight_cap: float = 10.0
    clip: float = 5.0
    use_gru: bool = True
    use_gnn: bool = True
    text_buckets: int = 64
    gap_threshold: float = 4.0
    disambiguate_fonts: bool = True

    @property
    def scorer(self) -> ScorerConfig:
        return ScorerConfig(
            d_h=self.d_h, heads=self.heads, n_d=self.n_d, text_buckets=self.text_buckets,
            use_gru=self.use_gru, use_gnn=self.use_gnn,
        )

    @property
    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(n_d=self.n_d, gap_threshold=self.gap_threshold, disambiguate_fonts=self.disambiguate_fonts)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown training settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Sample:
    graph: ContextGraph
    x: np.ndarray
    label: int


@dataclass
class History:
    loss: list[float] = field(default_factory=list)
    dev_macro_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    class_weights: list[float] = field(default_factory=list)


def load_corpus(directory) -> list[Document]:
    """All ``*.jsonl`` documents of a directory that carry a gold ToC, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    docs = []
    for path in sorted(directory.glob("*.jsonl")):
        doc = load_document(path)
        if doc.gold is not None:
            docs.append(doc)
    return docs


def make_samples(docs: Sequence[Document], scorer: ScorerConfig, pcfg: PipelineConfig) -> list[Sample]:
    embedder = default_embedder(init_params(dataclasses.replace(scorer, d_h=1, use_gru=False, use_gnn=False)))
    samples = []
    for doc in docs:
        if doc.gold is None:
            raise TrainingError(f"document {doc.doc_id} has no gold ToC")
        prep = prepare(doc, pcfg)
        labels = derive_labels(prep.tree, doc.gold)
        inputs = NodeInputs(prep, embedder, capacity=len(prep.tree) + 1)
        x_all = inputs.rows(np.arange(len(prep.tree)))
        for g in prep.graphs(pcfg.n_d):
            samples.append(Sample(g, x_all[g.nodes], int(labels[prep.tree.blocks[g.center].id])))
    return samples


def class_weights(labels: np.ndarray, cap: float) -> np.ndarray:
    """Inverse frequency relative to the majority class, capped."""
    counts = np.bincount(labels, minlength=3).astype(float)
    w = np.full(3, float(cap))
    seen = counts > 0
    w[seen] = np.minimum(counts.max() / counts[seen], cap)
    return w


def _batch(samples: Sequence[Sample]) -> tuple[Batch, np.ndarray]:
    return Batch.build([s.graph for s in samples], [s.x for s in samples]), np.array([s.label for s in samples])


def evaluate_samples(params: ScorerParams, samples: Sequence[Sample], batch_size: int = 256) -> np.ndarray:
    preds = []
    for k in range(0, len(samples), batch_size):
        b, _ = _batch(samples[k : k + batch_size])
        preds.append(np.argmax(forward(params, b)[0], axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=int)


def macro_f1(y: np.ndarray, pred: np.ndarray) -> float:
    """Mean per-class F1 over classes present in gold or prediction."""
    scores = []
    for c in range(3):
        tp = np.sum((pred == c) & (y == c))
        fp = np.sum((pred == c) & (y != c))
        fn = np.sum((pred != c) & (y == c))
        if tp + fp + fn:
            scores.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores)) if scores else 1.0


class Adam:
    def __init__(self, arrays: dict[str, np.ndarray], lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.t = 0

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            # in place so 0-d arrays stay arrays
            arrays[k][...] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_grads(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def train_samples(
    train: Sequence[Sample],
    dev: Sequence[Sample],
    cfg: TrainConfig,
    on_epoch: Callable[[int, float, float], None] | None = None,
) -> tuple[ScorerParams, History]:
    if not train:
        raise TrainingError("empty training corpus")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.scorer, cfg.seed)
    y = np.array([s.label for s in train])
    hist = History(class_weights=class_weights(y, cfg.class_weight_cap).tolist())
    w = np.array(hist.class_weights)
    opt = Adam(params.arrays, cfg.lr)
    best, best_score = params.copy(), -1.0
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train))
        total, n = 0.0, 0
        for k in range(0, len(order), cfg.batch_size):
            chunk = [train[i] for i in order[k : k + cfg.batch_size]]
            batch, labels = _batch(chunk)
            loss, grads = loss_and_grad(params, batch, labels, w, batch_id=step)
            clip_grads(grads, cfg.clip)
            opt.step(params.arrays, grads)
            total += loss * len(chunk)
            n += len(chunk)
            step += 1
        hist.loss.append(total / n)
        eval_on = dev if dev else train
        score = macro_f1(np.array([s.label for s in eval_on]), evaluate_samples(params, eval_on))
        hist.dev_macro_f1.append(score)
        if score > best_score:
            best, best_score, hist.best_epoch = params.copy(), score, epoch
        log.info("epoch %d loss %.4f dev macro-F1 %.4f", epoch, hist.loss[-1], score)
        if on_epoch:
            on_epoch(epoch, hist.loss[-1], score)
        if not np.isfinite(hist.loss[-1]):
            raise TrainingError(f"loss diverged in epoch {epoch}")
    return best, hist


def train(
    train_docs: Sequence[Document],
    dev_docs: Sequence[Document],
    cfg: TrainConfig = TrainConfig(),
    on_epoch=None,
) -> tuple[ScorerParams, History]:
    """Train from documents with gold ToCs; returns the best params by dev macro-F1."""
    if not train_docs:
        raise TrainingError("empty training corpus")
    tr = make_samples(train_docs, cfg.scorer, cfg.pipeline)
    dv = make_samples(dev_docs, cfg.scorer, cfg.pipeline)
    return train_samples(tr, dv, cfg, on_epoch)
