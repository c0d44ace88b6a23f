"""Slow reference implementations used to cross-check the fast paths."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .doc import TocNode
from .tree import ROOT


def build_parents_reference(sizes: Sequence[float]) -> list[int]:
    """Quadratic parent scan, transcribed with 1-based blocks and 0 = root."""
    n = len(sizes)
    s = [None, *sizes]
    pa = [None] * (n + 1)
    for i in range(1, n + 1):
        j = i - 1
        while j >= 0:
            if j == 0:
                pa[i] = 0
                break
            elif s[j] > s[i]:
                pa[i] = j
                break
            j -= 1
    return [ROOT if p == 0 else p - 1 for p in pa[1:]]


def _flatten(root: TocNode, label):
    """Preorder labels, parent indices and postorder ranks."""
    labels, parent, pre_nodes = [], [], []
    stack = [(root, -1)]
    while stack:
        node, p = stack.pop()
        parent.append(p)
        labels.append(label(node))
        pre_nodes.append(node)
        idx = len(labels) - 1
        for c in reversed(node.children):
            stack.append((c, idx))
    post = {}
    order = []

    def visit(node):
        for c in node.children:
            visit(c)
        order.append(id(node))

    visit(root)
    for rank, key in enumerate(order):
        post[key] = rank
    return labels, parent, [post[id(n)] for n in pre_nodes]


def ted_brute_force(t1: TocNode, t2: TocNode, label: Callable[[TocNode], str] = lambda n: n.text) -> int:
    """Minimum unit-cost edit script by enumerating every valid ordered mapping.

    A mapping is a partial matching that preserves both preorder and
    postorder ranks (hence ancestry and sibling order). Its cost is
    deletions + insertions + relabels. Exponential; keep trees tiny.
    """
    la, _, posta = _flatten(t1, label)
    lb, _, postb = _flatten(t2, label)
    na, nb = len(la), len(lb)
    best = na + nb

    def search(i: int, last_j: int, pairs: list[tuple[int, int]], renames: int):
        nonlocal best
        if i == na:
            cost = na + nb - 2 * len(pairs) + renames
            best = min(best, cost)
            return
        # lower bound: remaining nodes can at best all match for free
        lower = na + nb - 2 * (len(pairs) + min(na - i, nb - last_j - 1)) + renames
        if lower >= best:
            return
        search(i + 1, last_j, pairs, renames)
        for j in range(last_j + 1, nb):
            if all((posta[a] < posta[i]) == (postb[b] < postb[j]) for a, b in pairs):
                pairs.append((i, j))
                search(i + 1, j, pairs, renames + (la[i] != lb[j]))
                pairs.pop()

    search(0, -1, [], 0)
    return best


def finite_difference_check(
    loss_fn: Callable[[], float],
    arrays: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    step: float = 1e-4,
    floor: float = 1e-6,
) -> float:
    """Largest relative error between ``grads`` and central differences.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``; ``floor`` only
    guards components whose true gradient is numerically zero.
    """
    worst = 0.0
    for name, arr in arrays.items():
        flat = arr.reshape(-1)
        g = np.asarray(grads[name]).reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + step
            up = loss_fn()
            flat[k] = old - step
            down = loss_fn()
            flat[k] = old
            num = (up - down) / (2 * step)
            rel = abs(num - g[k]) / max(abs(num), abs(g[k]), floor)
            worst = max(worst, rel)
    return worst


# -- random instances shared by the oracle suites ------------------------------


def random_sizes(rng: np.random.Generator, max_len: int = 200) -> list[float]:
    """Size sequences with many ties, the hard case for the parent rule."""
    n = int(rng.integers(0, max_len + 1))
    palette = rng.choice([6.0, 8.0, 9.5, 10.0, 11.0, 12.0, 14.0, 16.0, 18.0, 24.0], size=int(rng.integers(1, 8)))
    return [float(s) for s in rng.choice(palette, size=n)]


def random_toc(rng: np.random.Generator, max_nodes: int = 8, alphabet: str = "abc") -> TocNode:
    """Random ordered tree with 1..max_nodes nodes including the root."""
    n = int(rng.integers(1, max_nodes + 1))
    nodes = [TocNode(None, "")]
    for k in range(1, n):
        node = TocNode(f"n{k}", str(rng.choice(list(alphabet))))
        nodes[int(rng.integers(0, k))].children.append(node)
        nodes.append(node)
    return nodes[0]


def random_blocks(rng: np.random.Generator, n: int):
    from .doc import Block

    fonts = ["Helvetica", "Times-Roman", "Arial-BoldMT"]
    blocks = []
    for k in range(n):
        y = 40.0 + 30.0 * k
        blocks.append(
            Block(
                id=f"r{k}",
                text=" ".join(rng.choice(["alpha", "Beta", "3.2", "GAMMA", "$5,300m", "delta"], size=int(rng.integers(1, 4)))),
                font=str(rng.choice(fonts)),
                size=float(rng.choice([9.0, 10.0, 12.0, 14.0, 18.0])),
                colour=tuple(int(c) for c in rng.integers(0, 256, 3)),
                page=1 + k // 20,
                bbox=(50.0, y % 700, 300.0, y % 700 + 20.0),
                line_count=int(rng.integers(1, 4)),
            )
        )
    return blocks


def gradient_check(rng: np.random.Generator, n_graphs: int = 2, d_h: int = 5, step: float = 1e-4) -> float:
    """Worst relative error of the scorer gradient on random small graphs.

    Each graph covers a random 3-10 block tree in full; labels and class
    weights are random too.
    """
    from .context import extract_subtree
    from .scorer import Batch, ScorerConfig, init_params, loss_and_grad
    from .scorer.model import cross_entropy, default_embedder, forward, node_inputs
    from .tree import build_tree

    cfg = ScorerConfig(d_h=d_h, heads=2, n_d=2, text_buckets=4)
    params = init_params(cfg, int(rng.integers(2**31)))
    for v in params.arrays.values():
        v += rng.normal(0.0, 0.1, v.shape)  # non-zero biases too
    embed = default_embedder(params)
    graphs, inputs = [], []
    for _ in range(n_graphs):
        n = int(rng.integers(3, 11))
        blocks = random_blocks(rng, n)
        tree = build_tree(blocks)
        dims = [(612.0, 792.0)] * (blocks[-1].page)
        g = extract_subtree(tree, int(rng.integers(n)), n_d=n, page_dims=dims)
        graphs.append(g)
        inputs.append(node_inputs(g, np.stack([embed(tree.blocks[i].text) for i in g.nodes])))
    batch = Batch.build(graphs, inputs)
    labels = rng.integers(0, 3, n_graphs)
    weights = rng.uniform(0.5, 2.0, 3)

    def loss() -> float:
        return cross_entropy(forward(params, batch)[0], labels, weights)[0]

    _, grads = loss_and_grad(params, batch, labels, weights)
    return finite_difference_check(loss, params.arrays, grads, step=step)
