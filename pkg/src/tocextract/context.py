"""Node-centric subtrees and their node/edge feature vectors."""

from __future__ import annotations

import json
import zlib
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .doc import Block
from .tree import ROOT, DocTree

FONT_BUCKETS = 8
NODE_DIM = 1 + FONT_BUCKETS + 1 + 3 + 1 + 1 + 4
EDGE_DIM = 3 + 1 + 1 + 1 + 1 + 4


class EdgeType(IntEnum):
    """Relation of an edge's source as seen from its target."""

    PARENT = 0  # source is the target's parent
    CHILD = 1  # source is a child of the target
    SIBLING = 2  # adjacent siblings


def font_bucket(font: str) -> int:
    return zlib.crc32(font.encode("utf-8")) % FONT_BUCKETS


def _norm_bbox(block: Block, page_dims) -> np.ndarray:
    w, h = page_dims[block.page - 1]
    x0, y0, x1, y1 = block.bbox
    return np.array([x0 / w, y0 / h, x1 / w, y1 / h])


def node_features(block: Block, page_dims: Sequence[tuple[float, float]]) -> np.ndarray:
    """Raw per-block features.

    Layout: page, one-hot font bucket (8), size, RGB in [0, 1], line count,
    text length, bbox corners normalized by the page size.
    """
    f = np.zeros(NODE_DIM)
    f[0] = block.page
    f[1 + font_bucket(block.font)] = 1.0
    f[9] = block.size
    f[10:13] = np.asarray(block.colour, dtype=float) / 255.0
    f[13] = block.line_count
    f[14] = block.text_length
    f[15:19] = _norm_bbox(block, page_dims)
    return f


def edge_features(src: Block, dst: Block, edge_type: EdgeType, page_dims) -> np.ndarray:
    """Features of the edge ``src -> dst``; differences are ``src - dst``."""
    f = np.zeros(EDGE_DIM)
    f[int(edge_type)] = 1.0
    f[3] = src.size - dst.size
    f[4] = float(src.font == dst.font)
    f[5] = float(tuple(src.colour) == tuple(dst.colour))
    f[6] = src.page - dst.page
    f[7:11] = _norm_bbox(src, page_dims) - _norm_bbox(dst, page_dims)
    return f


@dataclass
class ContextGraph:
    """Subtree around ``center`` with nodes in reading order.

    Edge arrays hold local positions into ``nodes``. ``prs`` lists the local
    positions of the center's preceding siblings that made it into the graph.
    """

    center: int
    nodes: np.ndarray
    center_pos: int
    src: np.ndarray
    dst: np.ndarray
    etype: np.ndarray
    node_feats: np.ndarray
    edge_feats: np.ndarray
    prs: np.ndarray

    @property
    def traversal(self) -> list[int]:
        return self.nodes.tolist()

    def to_json(self, tree: DocTree | None = None) -> str:
        ids = [tree.blocks[i].id for i in self.nodes] if tree is not None else self.nodes.tolist()
        out = {
            "center": ids[self.center_pos],
            "nodes": [
                {"id": ids[k], "features": self.node_feats[k].tolist()} for k in range(len(ids))
            ],
            "edges": [
                {
                    "src": ids[s],
                    "dst": ids[d],
                    "type": EdgeType(t).name.lower(),
                    "features": self.edge_feats[e].tolist(),
                }
                for e, (s, d, t) in enumerate(zip(self.src, self.dst, self.etype))
            ],
            "preceding_siblings": [ids[k] for k in self.prs],
        }
        return json.dumps(out, indent=1)


def _neighbours(tree: DocTree, i: int):
    p = tree.parent[i]
    if p != ROOT:
        yield p
    yield from tree.children(i)
    for s in (tree.pr(i), tree.su(i)):
        if s is not None:
            yield s


def subtree_nodes(tree: DocTree, center: int, n_d: int) -> list[int]:
    """BFS over parent/children/adjacent siblings up to ``n_d`` hops, sorted."""
    seen = {center}
    frontier = deque([(center, 0)])
    while frontier:
        i, d = frontier.popleft()
        if d == n_d:
            continue
        for j in _neighbours(tree, i):
            if j not in seen:
                seen.add(j)
                frontier.append((j, d + 1))
    return sorted(seen)


def extract_subtree(tree: DocTree, center, n_d: int = 2, page_dims=None, table=None) -> ContextGraph:
    """Node-centric subtree of ``center`` (index or block id) as a typed graph.

    ``table`` is an optional :class:`FeatureTable` for the tree; without it
    features are computed per block from ``page_dims``.
    """
    if isinstance(center, str):
        if center not in tree.index:
            raise KeyError(f"unknown block id {center!r}")
        center = tree.index[center]
    elif not 0 <= center < len(tree):
        raise KeyError(f"node index {center} out of range")
    if n_d < 1:
        raise ValueError("n_d must be >= 1")
    nodes = subtree_nodes(tree, center, n_d)
    local = {g: k for k, g in enumerate(nodes)}

    src, dst, et = [], [], []
    for k, g in enumerate(nodes):
        p = tree.parent[g]
        if p != ROOT and p in local:
            src += [local[p], k]
            dst += [k, local[p]]
            et += [EdgeType.PARENT, EdgeType.CHILD]
        s = tree.su(g)
        if s is not None and s in local:
            src += [k, local[s]]
            dst += [local[s], k]
            et += [EdgeType.SIBLING, EdgeType.SIBLING]

    if table is None:
        table = FeatureTable.from_blocks([tree.blocks[g] for g in nodes], page_dims)
        rows = np.arange(len(nodes))
    else:
        rows = np.asarray(nodes)
    node_feats = table.node[rows]
    src_a = np.asarray(src, dtype=np.intp)
    dst_a = np.asarray(dst, dtype=np.intp)
    et_a = np.asarray(et, dtype=np.intp)
    edge_feats = table.edges(rows[src_a], rows[dst_a], et_a)
    prs = np.asarray([local[j] for j in tree.prs(center) if j in local], dtype=np.intp)
    return ContextGraph(
        center=center,
        nodes=np.asarray(nodes, dtype=np.intp),
        center_pos=local[center],
        src=src_a,
        dst=dst_a,
        etype=et_a,
        node_feats=node_feats,
        edge_feats=edge_feats,
        prs=prs,
    )


class FeatureTable:
    """Per-block feature arrays for vectorized node and edge features."""

    def __init__(self, node: np.ndarray, font_id: np.ndarray, colour_id: np.ndarray):
        self.node = node
        self.font_id = font_id
        self.colour_id = colour_id

    @classmethod
    def from_blocks(cls, blocks: Sequence[Block], page_dims) -> FeatureTable:
        if page_dims is None:
            raise ValueError("page_dims required to compute features")
        node = np.stack([node_features(b, page_dims) for b in blocks]) if blocks else np.zeros((0, NODE_DIM))
        fonts: dict[str, int] = {}
        colours: dict[tuple, int] = {}
        font_id = np.array([fonts.setdefault(b.font, len(fonts)) for b in blocks], dtype=np.intp)
        colour_id = np.array([colours.setdefault(tuple(b.colour), len(colours)) for b in blocks], dtype=np.intp)
        return cls(node, font_id, colour_id)

    def edges(self, src: np.ndarray, dst: np.ndarray, etype: np.ndarray) -> np.ndarray:
        f = np.zeros((len(src), EDGE_DIM))
        f[np.arange(len(src)), etype] = 1.0
        a, b = self.node[src], self.node[dst]
        f[:, 3] = a[:, 9] - b[:, 9]
        f[:, 4] = self.font_id[src] == self.font_id[dst]
        f[:, 5] = self.colour_id[src] == self.colour_id[dst]
        f[:, 6] = a[:, 0] - b[:, 0]
        f[:, 7:11] = a[:, 15:19] - b[:, 15:19]
        return f
