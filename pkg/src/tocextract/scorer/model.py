"""Batched scorer forward/backward over merged node-centric subtrees."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..context import ContextGraph
from ..embed import HashedTrigramEmbedder
from ..ops import Op  # noqa: F401  re-exported
from . import layers
from .params import ConfigError, ScorerParams


class TrainingError(RuntimeError):
    pass


def transform_node_features(f: np.ndarray) -> np.ndarray:
    """Fixed rescaling of raw node features into a well-conditioned range."""
    f = np.array(f, dtype=float, copy=True)
    f[..., 0] = np.log1p(f[..., 0])
    f[..., 9] = f[..., 9] / 10.0
    f[..., 13] = np.log1p(f[..., 13])
    f[..., 14] = np.log1p(f[..., 14])
    return f


def transform_edge_features(f: np.ndarray) -> np.ndarray:
    f = np.array(f, dtype=float, copy=True)
    f[..., 3] = f[..., 3] / 4.0
    f[..., 6] = np.sign(f[..., 6]) * np.log1p(np.abs(f[..., 6]))
    return f


class EmbeddingCache:
    """Bounded LRU of text embeddings keyed by node index."""

    def __init__(self, texts: Sequence[str], embedder, capacity: int = 8192):
        self.texts = texts
        self.embedder = embedder
        self.capacity = capacity
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()

    def get(self, i: int) -> np.ndarray:
        v = self._cache.get(i)
        if v is None:
            v = self.embedder(self.texts[i])
            self._cache[i] = v
            if len(self._cache) > self.capacity:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(i)
        return v

    def rows(self, idx) -> np.ndarray:
        return np.stack([self.get(int(i)) for i in idx])


def node_inputs(graph: ContextGraph, text_vectors: np.ndarray) -> np.ndarray:
    """Model inputs [text embedding, transformed features] for the graph's nodes."""
    return np.concatenate([text_vectors, transform_node_features(graph.node_feats)], axis=1)


@dataclass
class Batch:
    """Disjoint union of context graphs.

    Edges include one self-loop per node and are sorted by target so that
    ``seg`` gives each node's contiguous run of incoming edges.
    """

    x: np.ndarray
    seq: np.ndarray
    rev: np.ndarray
    lengths: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    efeat: np.ndarray
    seg: np.ndarray
    sum_by_src: sp.csr_matrix
    centers: np.ndarray
    prs: np.ndarray
    prs_mask: np.ndarray

    @classmethod
    def build(cls, graphs: Sequence[ContextGraph], inputs: Sequence[np.ndarray]) -> Batch:
        sizes = np.array([len(g.nodes) for g in graphs])
        offs = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.intp)
        n = int(sizes.sum())
        L = int(sizes.max())
        G = len(graphs)
        seq = np.zeros((G, L), dtype=np.intp)
        rev = np.zeros((G, L), dtype=np.intp)
        for k, (o, s) in enumerate(zip(offs, sizes)):
            seq[k, :s] = o + np.arange(s)
            rev[k, :s] = o + np.arange(s)[::-1]
        loops = np.arange(n, dtype=np.intp)
        src = np.concatenate([g.src + o for g, o in zip(graphs, offs)] + [loops])
        dst = np.concatenate([g.dst + o for g, o in zip(graphs, offs)] + [loops])
        d_e = graphs[0].edge_feats.shape[1]
        efeat = np.concatenate(
            [transform_edge_features(g.edge_feats.reshape(-1, d_e)) for g in graphs] + [np.zeros((n, d_e))]
        )
        order = np.lexsort((src, dst))
        src, dst, efeat = src[order], dst[order], efeat[order]
        seg = np.searchsorted(dst, np.arange(n))
        E = len(src)
        sum_by_src = sp.csr_matrix((np.ones(E), (src, np.arange(E))), shape=(n, E))
        S = max((len(g.prs) for g in graphs), default=0)
        prs = np.zeros((G, S), dtype=np.intp)
        mask = np.zeros((G, S), dtype=bool)
        for k, (g, o) in enumerate(zip(graphs, offs)):
            prs[k, : len(g.prs)] = g.prs + o
            mask[k, : len(g.prs)] = True
        return cls(
            x=np.concatenate(inputs),
            seq=seq,
            rev=rev,
            lengths=sizes,
            src=src,
            dst=dst,
            efeat=efeat,
            seg=seg,
            sum_by_src=sum_by_src,
            centers=np.array([o + g.center_pos for g, o in zip(graphs, offs)], dtype=np.intp),
            prs=prs,
            prs_mask=mask,
        )


def forward(params: ScorerParams, batch: Batch):
    """Scores (G, 3) in Keep/Delete/Move order plus a cache for :func:`backward`."""
    P, cfg = params.arrays, params.config
    if batch.x.shape[1] != cfg.d_in:
        raise ConfigError(f"node inputs have width {batch.x.shape[1]}, params expect {cfg.d_in}")
    b, c_mlp = layers.mlp_forward(P, batch.x)
    h, c_gru = b, None
    if cfg.use_gru:
        h, c_gru = layers.bigru_forward(P, b, batch.seq, batch.rev, batch.lengths)
    c_gat = []
    for layer in range(cfg.gat_layers):
        h, c = layers.gat_forward(P, layer, h, batch)
        c_gat.append(c)
    o, c_head = layers.heads_forward(P, h, batch.centers, batch.prs, batch.prs_mask)
    return o, (c_mlp, c_gru, c_gat, c_head, len(h))


def backward(params: ScorerParams, batch: Batch, do: np.ndarray, cache) -> dict[str, np.ndarray]:
    P, cfg = params.arrays, params.config
    c_mlp, c_gru, c_gat, c_head, n_rows = cache
    dh, grads = layers.heads_backward(P, do, c_head, n_rows, batch.centers, batch.prs, batch.prs_mask)
    for layer in reversed(range(cfg.gat_layers)):
        dh, g = layers.gat_backward(P, layer, dh, c_gat[layer], batch)
        grads.update(g)
    if cfg.use_gru:
        dh, g = layers.bigru_backward(P, dh, c_gru)
        grads.update(g)
    _, g = layers.mlp_backward(P, dh, c_mlp)
    grads.update(g)
    return grads


def softmax(o: np.ndarray) -> np.ndarray:
    z = o - o.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict(scores) -> tuple[np.ndarray, np.ndarray]:
    """Softmax probabilities and argmax ops; ties go to Keep, then Delete."""
    scores = np.asarray(scores, dtype=float)
    p = softmax(scores)
    return p, np.argmax(scores, axis=-1)


def cross_entropy(o: np.ndarray, y: np.ndarray, class_weights=None):
    """Weighted mean cross-entropy and its gradient w.r.t. the scores."""
    w = np.ones(3) if class_weights is None else np.asarray(class_weights, dtype=float)
    z = o - o.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    wy = w[y]
    total = wy.sum()
    loss = -(wy * logp[np.arange(len(y)), y]).sum() / total
    do = np.exp(logp)
    do[np.arange(len(y)), y] -= 1.0
    do *= (wy / total)[:, None]
    return loss, do


def loss_and_grad(params: ScorerParams, batch: Batch, labels, class_weights=None, batch_id=None):
    o, cache = forward(params, batch)
    loss, do = cross_entropy(o, np.asarray(labels, dtype=np.intp), class_weights)
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss} in batch {batch_id}")
    return loss, backward(params, batch, do, cache)


# -- single-graph views of the pipeline stages --------------------------------


def _single_batch(graph: ContextGraph, x: np.ndarray) -> Batch:
    return Batch.build([graph], [x])


def encode_node(text_vector: np.ndarray, raw_features: np.ndarray, params: ScorerParams) -> np.ndarray:
    x = np.concatenate([text_vector, transform_node_features(raw_features)])
    if x.shape[0] != params.config.d_in:
        raise ConfigError(f"node input width {x.shape[0]}, params expect {params.config.d_in}")
    return layers.mlp_forward(params.arrays, x[None])[0][0]


def encode_sequence(graph: ContextGraph, b: np.ndarray, params: ScorerParams) -> np.ndarray:
    batch = _single_batch(graph, np.zeros((len(b), params.config.d_in)))
    return layers.bigru_forward(params.arrays, b, batch.seq, batch.rev, batch.lengths)[0]


def gnn_forward(graph: ContextGraph, v: np.ndarray, params: ScorerParams, return_attention=False):
    batch = _single_batch(graph, np.zeros((len(v), params.config.d_in)))
    h, attn = v, []
    for layer in range(params.config.gat_layers):
        h, cache = layers.gat_forward(params.arrays, layer, h, batch)
        attn.append((batch.src, batch.dst, cache[2]))
    return (h, attn) if return_attention else h


def score_ops(graph: ContextGraph, h: np.ndarray, params: ScorerParams) -> np.ndarray:
    batch = _single_batch(graph, np.zeros((len(h), params.config.d_in)))
    return layers.heads_forward(params.arrays, h, batch.centers, batch.prs, batch.prs_mask)[0][0]


def default_embedder(params: ScorerParams) -> HashedTrigramEmbedder:
    return HashedTrigramEmbedder(params.config.text_buckets)
