"""Recursive XY-cut reading order."""

from __future__ import annotations

from itertools import groupby
from typing import Sequence

from .doc import Block, Document

MAX_DEPTH = 32


def _leaf_key(b: Block):
    return (b.bbox[1], b.bbox[0], b.id)


def _split(blocks: list[Block], axis: int, gap_threshold: float) -> list[list[Block]]:
    """Group blocks by whitespace gaps >= ``gap_threshold`` in one projection.

    ``axis`` 0 projects onto x (columns), 1 onto y (bands). Groups come back
    in ascending coordinate order.
    """
    lo, hi = axis, axis + 2
    order = sorted(blocks, key=lambda b: (b.bbox[lo], b.bbox[hi], b.id))
    groups = [[order[0]]]
    reach = order[0].bbox[hi]
    for b in order[1:]:
        if b.bbox[lo] - reach >= gap_threshold:
            groups.append([b])
        else:
            groups[-1].append(b)
        reach = max(reach, b.bbox[hi])
    return groups


def _cut(blocks: list[Block], gap_threshold: float, depth: int) -> list[Block]:
    if len(blocks) <= 1 or depth >= MAX_DEPTH:
        return sorted(blocks, key=_leaf_key)
    for axis in (1, 0):
        groups = _split(blocks, axis, gap_threshold)
        if len(groups) > 1:
            out = []
            for g in groups:
                out.extend(_cut(g, gap_threshold, depth + 1))
            return out
    return sorted(blocks, key=_leaf_key)


def xy_cut(blocks: Sequence[Block], gap_threshold: float = 4.0) -> list[Block]:
    """Order the blocks of one page: bands top-to-bottom, then columns left-to-right."""
    if gap_threshold < 0:
        raise ValueError("gap_threshold must be >= 0")
    return _cut(list(blocks), gap_threshold, 0)


def order_document(doc: Document, gap_threshold: float = 4.0) -> list[Block]:
    by_page = sorted(doc.blocks, key=lambda b: b.page)
    out: list[Block] = []
    for _, page_blocks in groupby(by_page, key=lambda b: b.page):
        out.extend(xy_cut(list(page_blocks), gap_threshold))
    return out
