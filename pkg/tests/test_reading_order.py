import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import mk
from tocextract.doc import Block, Document
from tocextract.reading_order import xy_cut, order_document
from tocextract.synth import GenConfig, generate


def ids(blocks):
    return [b.id for b in blocks]


def box(id, x0, y0, x1, y1, page=1):
    return Block(id, id, "T", 10.0, (0, 0, 0), page, (float(x0), float(y0), float(x1), float(y1)))


def test_vertical_stack():
    a, b = box("a", 10, 10, 100, 20), box("b", 10, 30, 100, 40)
    assert ids(xy_cut([b, a])) == ["a", "b"]


def test_single_and_empty():
    a = box("a", 10, 10, 100, 20)
    assert xy_cut([a]) == [a]
    assert xy_cut([]) == []


def test_negative_gap_rejected():
    with pytest.raises(ValueError):
        xy_cut([box("a", 0, 0, 1, 1)], gap_threshold=-1)


def test_two_columns_left_before_right():
    rng = np.random.default_rng(0)
    left = [box(f"L{k}", 0, 10 + 30 * k, 200, 30 + 30 * k + 2) for k in range(10)]  # rows touch: no y-gap
    right = [box(f"R{k}", 300, 15 + 30 * k, 500, 37 + 30 * k) for k in range(10)]
    blocks = [*left, *right]
    out = ids(xy_cut([blocks[i] for i in rng.permutation(len(blocks))]))
    pos = {b: k for k, b in enumerate(out)}
    assert all(pos[l.id] < pos[r.id] for l in left for r in right)
    assert out[:10] == ids(left)


def test_header_band_then_columns():
    head = box("h", 0, 0, 500, 20)
    cols = [box("l", 0, 40, 200, 400), box("r", 300, 40, 500, 400)]
    assert ids(xy_cut([cols[1], head, cols[0]])) == ["h", "l", "r"]


def test_pages_ascending(make_doc):
    doc = make_doc([box("p2", 10, 10, 50, 20, page=2), box("p1", 10, 500, 50, 520, page=1)])
    assert ids(order_document(doc)) == ["p1", "p2"]


def test_single_column_matches_sort():
    rng = np.random.default_rng(1)
    blocks = []
    for page in (1, 2, 3):
        for k in range(12):
            blocks.append(box(f"p{page}b{k}", 50 + rng.integers(0, 20), 40 + 40 * k, 500, 40 + 40 * k + 25, page))
    doc = Document("d", tuple(blocks[i] for i in rng.permutation(len(blocks))), ((612.0, 792.0),) * 3)
    expect = sorted(blocks, key=lambda b: (b.page, b.bbox[1], b.bbox[0]))
    assert ids(order_document(doc)) == ids(expect)


@pytest.mark.parametrize("seed", range(8))
def test_generator_order_recovered(seed):
    gen = generate(GenConfig(seed=seed, columns=(2,)))
    assert ids(order_document(gen.document)) == gen.order


@st.composite
def pages(draw):
    # half-point grid: translations stay exact in floating point
    n = draw(st.integers(0, 25))
    out = []
    for k in range(n):
        x0 = draw(st.integers(0, 1000)) / 2
        y0 = draw(st.integers(0, 1400)) / 2
        w = draw(st.integers(1, 400)) / 2
        h = draw(st.integers(1, 160)) / 2
        out.append(box(f"b{k}", x0, y0, x0 + w, y0 + h))
    return out


@given(pages())
def test_permutation(blocks):
    assert sorted(ids(xy_cut(blocks))) == sorted(ids(blocks))


@given(pages(), st.integers(-50, 50), st.integers(-50, 50))
def test_translation_invariance(blocks, dx, dy):
    moved = [dataclasses.replace(b, bbox=(b.bbox[0] + dx, b.bbox[1] + dy, b.bbox[2] + dx, b.bbox[3] + dy)) for b in blocks]
    assert ids(xy_cut(moved)) == ids(xy_cut(blocks))


@given(st.lists(st.tuples(st.floats(0, 40), st.floats(0, 40)), min_size=1, max_size=15))
def test_overlapping_blocks_leaf_sort(corners):
    # every box covers [50, 100] on both axes, so no projection has a gap
    blocks = [box(f"b{k}", x, y, 100 + x, 100 + y) for k, (x, y) in enumerate(corners)]
    expect = sorted(blocks, key=lambda b: (b.bbox[1], b.bbox[0], b.id))
    assert ids(xy_cut(blocks)) == ids(expect)


def test_deep_recursion_falls_back():
    # staircase: every cut yields a new level, far deeper than the cap
    blocks = [box(f"s{k:03d}", 10 * k, 10 * k, 10 * k + 8, 10 * k + 8) for k in range(200)]
    out = xy_cut(blocks, gap_threshold=1.0)
    assert sorted(ids(out)) == ids(blocks)
