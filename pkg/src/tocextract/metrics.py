"""ToC evaluation: tree edit distance, TEDS, heading F1, assumption audit."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .doc import Block, TocNode, quantize


def _postorder(root: TocNode, label: Callable[[TocNode], str]):
    """Labels, leftmost-leaf indices and keyroots of a tree in postorder."""
    labels: list[str] = []
    lml: list[int] = []
    stack = [(root, False)]
    first_leaf: dict[int, int] = {}
    while stack:
        node, done = stack.pop()
        if not done:
            stack.append((node, True))
            for c in reversed(node.children):
                stack.append((c, False))
            continue
        idx = len(labels)
        labels.append(label(node))
        lml.append(first_leaf[id(node.children[0])] if node.children else idx)
        first_leaf[id(node)] = lml[-1]
    keyroots = sorted({l: i for i, l in enumerate(lml)}.values())
    return labels, lml, keyroots


def tree_edit_distance(t1: TocNode, t2: TocNode, label: Callable[[TocNode], str] = lambda n: n.text) -> int:
    """Unit-cost ordered tree edit distance (Zhang-Shasha)."""
    l1, lml1, kr1 = _postorder(t1, label)
    l2, lml2, kr2 = _postorder(t2, label)
    td = [[0] * len(l2) for _ in l1]
    for i in kr1:
        for j in kr2:
            li, lj = lml1[i], lml2[j]
            m, n = i - li + 2, j - lj + 2
            fd = [[0] * n for _ in range(m)]
            for x in range(1, m):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, n):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, m):
                di = li + x - 1
                for y in range(1, n):
                    dj = lj + y - 1
                    if lml1[di] == li and lml2[dj] == lj:
                        cost = 0 if l1[di] == l2[dj] else 1
                        fd[x][y] = min(fd[x - 1][y] + 1, fd[x][y - 1] + 1, fd[x - 1][y - 1] + cost)
                        td[di][dj] = fd[x][y]
                    else:
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[lml1[di] - li][lml2[dj] - lj] + td[di][dj],
                        )
    return td[-1][-1]


def teds(pred: TocNode, gold: TocNode) -> float:
    """1 - TED / max node count, pseudo roots excluded from the counts.

    Two root-only trees score 1.0; the result is clipped at 0.
    """
    n = max(pred.size(), gold.size())
    if n == 0:
        return 1.0
    return max(0.0, 1.0 - tree_edit_distance(pred, gold) / n)


@dataclass
class F1:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, pred: Iterable[str], gold: Iterable[str]) -> F1:
        pred, gold = set(pred), set(gold)
        self.tp += len(pred & gold)
        self.fp += len(pred - gold)
        self.fn += len(gold - pred)
        return self

    @property
    def precision(self) -> float:
        if self.tp + self.fp == 0:
            return 1.0 if self.fn == 0 else 0.0
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        if self.tp + self.fn == 0:
            return 1.0 if self.fp == 0 else 0.0
        return self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def heading_f1(pred: Iterable[str], gold: Iterable[str]) -> tuple[float, float, float]:
    s = F1().add(pred, gold)
    return s.precision, s.recall, s.f1


@dataclass
class CorpusScores:
    """Mean TEDS over documents and micro-averaged heading F1."""

    teds: list[float] = field(default_factory=list)
    hd: F1 = field(default_factory=F1)
    doc_ids: list[str] = field(default_factory=list)

    def add(self, doc_id: str, pred: TocNode, gold: TocNode) -> None:
        self.doc_ids.append(doc_id)
        self.teds.append(teds(pred, gold))
        self.hd.add(pred.ids(), gold.ids())

    @property
    def mean_teds(self) -> float:
        return sum(self.teds) / len(self.teds) if self.teds else 1.0

    def report(self) -> dict:
        return {
            "documents": len(self.teds),
            "toc_teds": self.mean_teds,
            "hd_precision": self.hd.precision,
            "hd_recall": self.hd.recall,
            "hd_f1": self.hd.f1,
            "per_document": {d: t for d, t in zip(self.doc_ids, self.teds)},
        }


# -- assumption violations ---------------------------------------------------

ASSUMPTIONS = ("A1", "A2", "A3")


def heading_violations(ordered: Sequence[Block], gold: TocNode, grid: float = 0.25) -> dict[str, list[bool]]:
    """Per-heading (A1, A2, A3) violation flags.

    A1: the heading is read after one of its gold descendants.
    A2: some gold descendant has a larger (quantized) size.
    A3: its gold sibling group has mixed sizes and its size differs from the
    group's most common size (ties go to the size read first).
    """
    pos = {b.id: k for k, b in enumerate(ordered)}
    size = {b.id: quantize(b.size, grid) for b in ordered}
    flags: dict[str, list[bool]] = {}

    def descendants(node: TocNode) -> list[str]:
        return [n.id for n in node.walk() if n is not node]

    for node in gold.walk():
        if node.id is None:
            continue
        desc = descendants(node)
        flags[node.id] = [
            any(pos[d] < pos[node.id] for d in desc),
            any(size[d] > size[node.id] for d in desc),
            False,
        ]
    for node in gold.walk():
        group = sorted((c.id for c in node.children), key=pos.__getitem__)
        if len(group) < 2:
            continue
        counts = Counter(size[g] for g in group)
        top = max(counts.values())
        ref = next(size[g] for g in group if counts[size[g]] == top)
        for g in group:
            if size[g] != ref:
                flags[g][2] = True
    return flags


@dataclass
class AssumptionStats:
    headings: int = 0
    counts: dict[str, int] = field(default_factory=lambda: {k: 0 for k in (*ASSUMPTIONS, "Any")})
    flags: dict[str, dict[str, list[bool]]] = field(default_factory=dict)

    def add(self, doc_id: str, ordered: Sequence[Block], gold: TocNode) -> None:
        f = heading_violations(ordered, gold)
        self.flags[doc_id] = f
        self.headings += len(f)
        for v in f.values():
            for name, bit in zip(ASSUMPTIONS, v):
                self.counts[name] += bit
            self.counts["Any"] += any(v)

    def percentages(self) -> dict[str, float]:
        n = self.headings
        return {k: (100.0 * c / n if n else 0.0) for k, c in self.counts.items()}

    def report(self) -> dict:
        return {"headings": self.headings, "percent": self.percentages(), "counts": dict(self.counts)}


def assumption_stats(docs: Iterable[tuple[str, Sequence[Block], TocNode]]) -> AssumptionStats:
    stats = AssumptionStats()
    for doc_id, ordered, gold in docs:
        stats.add(doc_id, ordered, gold)
    return stats


# -- reports -----------------------------------------------------------------


def format_table(header: Sequence[str], rows: Sequence[Sequence], digits: int = 1) -> str:
    def cell(v):
        return f"{v:.{digits}f}" if isinstance(v, float) else str(v)

    cells = [list(map(str, header))] + [[cell(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = []
    for n, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if k == 0 else c.rjust(w) for k, (c, w) in enumerate(zip(r, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def violation_table(rows: dict[str, AssumptionStats]) -> str:
    """Aligned text table: dataset, A1, A2, A3, Any (percent)."""
    body = []
    for name, st in rows.items():
        p = st.percentages()
        body.append([name, p["A1"], p["A2"], p["A3"], p["Any"]])
    return format_table(["Dataset", "A1", "A2", "A3", "Any"], body)


def dumps_report(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
