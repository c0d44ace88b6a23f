"""End-to-end extraction: order, build, score every node, modify."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .context import ContextGraph, FeatureTable, extract_subtree
from .doc import Document, SizeNormPolicy, TocNode, normalize_sizes
from .editor import drop_tiny_text, modify_tree
from .ops import Op
from .reading_order import order_document
from .scorer import Batch, EmbeddingCache, ScorerParams, forward, predict
from .scorer.model import default_embedder, transform_node_features
from .tree import DocTree, build_tree


@dataclass(frozen=True)
class PipelineConfig:
    n_d: int = 2
    gap_threshold: float = 4.0
    tiny_threshold: float = 6.0
    tiny_relative: bool = False
    grid: float = 0.25
    disambiguate_fonts: bool = True
    node_budget: int = 2048
    cache_size: int = 8192

    @property
    def size_policy(self) -> SizeNormPolicy:
        return SizeNormPolicy(grid=self.grid, disambiguate_fonts=self.disambiguate_fonts)


@dataclass
class PreparedDoc:
    doc: Document
    tree: DocTree
    table: FeatureTable

    def graphs(self, n_d: int) -> Iterator[ContextGraph]:
        for i in range(len(self.tree)):
            yield extract_subtree(self.tree, i, n_d, table=self.table)


def prepare(doc: Document, cfg: PipelineConfig = PipelineConfig()) -> PreparedDoc:
    """Normalize sizes, order blocks and build the full tree."""
    doc = normalize_sizes(doc, cfg.size_policy)
    tree = build_tree(order_document(doc, cfg.gap_threshold))
    return PreparedDoc(doc, tree, FeatureTable.from_blocks(tree.blocks, doc.page_dims))


class NodeInputs:
    """Model input rows for tree nodes, text embeddings behind an LRU."""

    def __init__(self, prep: PreparedDoc, embedder, capacity: int = 8192):
        self.cache = EmbeddingCache([b.text for b in prep.tree.blocks], embedder, capacity)
        self.feats = prep.table.node

    def rows(self, nodes: np.ndarray) -> np.ndarray:
        return np.concatenate([self.cache.rows(nodes), transform_node_features(self.feats[nodes])], axis=1)


def _batches(graphs: Iterator[ContextGraph], budget: int) -> Iterator[list[ContextGraph]]:
    """Group graphs so that count x longest graph stays within ``budget``.

    The padded size is what the recurrent pass allocates, so peak memory is
    set by the budget and the largest context graph, not the document.
    """
    cur: list[ContextGraph] = []
    longest = 0
    for g in graphs:
        n = len(g.nodes)
        if cur and max(longest, n) * (len(cur) + 1) > budget:
            yield cur
            cur, longest = [], 0
        cur.append(g)
        longest = max(longest, n)
    if cur:
        yield cur


def score_document(prep: PreparedDoc, params: ScorerParams, cfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """Scores (n, 3) for every node, centers processed in reading order."""
    inputs = NodeInputs(prep, default_embedder(params), cfg.cache_size)
    out = np.zeros((len(prep.tree), 3))
    for graphs in _batches(prep.graphs(cfg.n_d), cfg.node_budget):
        batch = Batch.build(graphs, [inputs.rows(g.nodes) for g in graphs])
        o, _ = forward(params, batch)
        out[[g.center for g in graphs]] = o
    return out


def predict_labels(prep: PreparedDoc, params: ScorerParams, cfg: PipelineConfig = PipelineConfig()) -> dict[str, Op]:
    if len(prep.tree) == 0:
        return {}
    _, ops = predict(score_document(prep, params, cfg))
    labels = {b.id: Op(int(k)) for b, k in zip(prep.tree.blocks, ops)}
    return drop_tiny_text(prep.tree, labels, cfg.tiny_threshold, cfg.tiny_relative)


def extract_toc(doc: Document, params: ScorerParams, cfg: PipelineConfig = PipelineConfig()) -> TocNode:
    prep = prepare(doc, cfg)
    return modify_tree(prep.tree, predict_labels(prep, params, cfg))


def extract_many(docs: Sequence[Document], params: ScorerParams, cfg: PipelineConfig, jobs: int = 1) -> list[TocNode]:
    """Extract in parallel; results keep the input order whatever ``jobs`` is."""
    if jobs <= 1 or len(docs) <= 1:
        return [extract_toc(d, params, cfg) for d in docs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(extract_toc, docs, [params] * len(docs), [cfg] * len(docs)))


def with_overrides(cfg: PipelineConfig, **kw) -> PipelineConfig:
    return dataclasses.replace(cfg, **{k: v for k, v in kw.items() if v is not None})
