"""Operation labels from gold ToCs and tree modification into a ToC."""

from __future__ import annotations

import statistics
from typing import Mapping, Sequence

from .doc import Block, TocNode
from .ops import Op
from .tree import ROOT, DocTree, build_tree


class LabelError(ValueError):
    pass


def derive_labels(tree: DocTree, gold: TocNode) -> dict[str, Op]:
    """Training labels for every block of ``tree``.

    Non-headings are Delete. A heading is Move when its gold parent is one of
    its preceding siblings in the tree rebuilt over heading blocks only;
    other headings are Keep.
    """
    gold_parent = gold.parent_map()
    missing = sorted(set(gold_parent) - set(tree.index))
    if missing:
        raise LabelError(f"gold ToC ids missing from the document tree: {missing}")
    labels = {b.id: Op.DELETE for b in tree.blocks}
    headings = [b for b in tree.blocks if b.id in gold_parent]
    htree = build_tree(headings)
    for i, b in enumerate(htree.blocks):
        before = {htree.blocks[j].id for j in htree.prs(i)}
        labels[b.id] = Op.MOVE if gold_parent[b.id] in before else Op.KEEP
    return labels


def drop_tiny_text(
    blocks: Sequence[Block] | DocTree,
    labels: Mapping[str, Op],
    threshold: float = 6.0,
    relative: bool = False,
) -> dict[str, Op]:
    """Force Delete on blocks smaller than ``threshold``.

    With ``relative=True`` the threshold is a fraction of the median size.
    """
    if isinstance(blocks, DocTree):
        blocks = blocks.blocks
    cutoff = threshold
    if relative and blocks:
        cutoff = threshold * statistics.median(b.size for b in blocks)
    out = dict(labels)
    for b in blocks:
        if b.size < cutoff:
            out[b.id] = Op.DELETE
    return out


def modify_tree(tree: DocTree, labels: Mapping[str, Op]) -> TocNode:
    """Delete, rebuild over survivors, then re-parent Move nodes.

    Moves are applied in reading order against the current tree, so a Move
    node lands under whatever its preceding sibling is after earlier moves.
    A Move node without a preceding sibling stays where it is.
    """
    survivors = [b for b in tree.blocks if labels[b.id] != Op.DELETE]
    t = build_tree(survivors)
    parent = list(t.parent)
    children = {i: list(t.children(i)) for i in range(len(t))}
    children[ROOT] = list(t.root_children)
    for i, b in enumerate(survivors):
        if labels[b.id] != Op.MOVE:
            continue
        sibs = children[parent[i]]
        k = sibs.index(i)
        if k == 0:
            continue
        prev = sibs[k - 1]
        del sibs[k]
        parent[i] = prev
        # i follows prev's whole subtree in reading order
        children[prev].append(i)

    root = TocNode(None, "")
    nodes = {ROOT: root}
    stack = [ROOT]
    while stack:
        i = stack.pop()
        for c in children[i]:
            nodes[c] = TocNode(survivors[c].id, survivors[c].text)
            nodes[i].children.append(nodes[c])
            stack.append(c)
    return root
