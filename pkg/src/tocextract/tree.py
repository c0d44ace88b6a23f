"""Full document tree from reading order and font sizes.

Each block's parent is the nearest preceding block with a strictly larger
size, or the pseudo root when there is none. Nodes are addressed by their
reading-order index; ``ROOT`` (-1) stands for the pseudo root, whose size
is +inf.
"""

from __future__ import annotations

import math
from typing import Sequence

from .doc import Block

ROOT = -1
ROOT_SIZE = math.inf


class DocTree:
    """Rooted ordered tree over blocks in reading order.

    ``parent[i]`` is ``ROOT`` or an index ``< i``; children lists are kept
    in reading order, so pre-order traversal reproduces the block order.
    """

    def __init__(self, blocks: Sequence[Block], parent: Sequence[int]):
        self.blocks = list(blocks)
        self.parent = list(parent)
        n = len(self.blocks)
        self._children: list[list[int]] = [[] for _ in range(n)]
        self.root_children: list[int] = []
        self.sib_pos = [0] * n
        for i, p in enumerate(self.parent):
            lst = self.root_children if p == ROOT else self._children[p]
            self.sib_pos[i] = len(lst)
            lst.append(i)
        self.index = {b.id: i for i, b in enumerate(self.blocks)}

    def __len__(self) -> int:
        return len(self.blocks)

    def size(self, i: int) -> float:
        return ROOT_SIZE if i == ROOT else self.blocks[i].size

    def children(self, i: int) -> list[int]:
        return self.root_children if i == ROOT else self._children[i]

    def siblings(self, i: int) -> list[int]:
        return self.children(self.parent[i])

    def pa(self, i: int) -> int:
        return self.parent[i]

    def pr(self, i: int) -> int | None:
        k = self.sib_pos[i]
        return self.siblings(i)[k - 1] if k > 0 else None

    def su(self, i: int) -> int | None:
        sibs = self.siblings(i)
        k = self.sib_pos[i]
        return sibs[k + 1] if k + 1 < len(sibs) else None

    def prs(self, i: int) -> list[int]:
        return self.siblings(i)[: self.sib_pos[i]]

    def depth(self, i: int) -> int:
        d = 0
        while i != ROOT:
            i = self.parent[i]
            d += 1
        return d

    def preorder(self) -> list[int]:
        out = []
        stack = list(reversed(self.root_children))
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(reversed(self._children[i]))
        return out


def nearest_larger_predecessor(sizes: Sequence[float], i: int) -> int:
    """Index of the nearest ``j < i`` with ``sizes[j] > sizes[i]``, else ``ROOT``."""
    for j in range(i - 1, -1, -1):
        if sizes[j] > sizes[i]:
            return j
    return ROOT


def parents_from_sizes(sizes: Sequence[float]) -> list[int]:
    # monotonic stack of strictly decreasing sizes
    parent = [ROOT] * len(sizes)
    stack: list[int] = []
    for i, s in enumerate(sizes):
        while stack and sizes[stack[-1]] <= s:
            stack.pop()
        parent[i] = stack[-1] if stack else ROOT
        stack.append(i)
    return parent


def build_tree(ordered: Sequence[Block]) -> DocTree:
    return DocTree(ordered, parents_from_sizes([b.size for b in ordered]))
