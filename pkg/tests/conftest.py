import os

import pytest
from hypothesis import HealthCheck, settings

from tocextract.doc import Block, Document, TocNode

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def mk(id, size=10.0, y=0.0, x=0.0, page=1, text=None, font="Times", colour=(0, 0, 0), w=100.0, h=10.0, lines=1):
    return Block(id, text if text is not None else id, font, float(size), colour, page, (x, y, x + w, y + h), lines)


def stacked(sizes, font="Times", prefix="x"):
    """Single-column page of blocks read top to bottom, one per size."""
    return [mk(f"{prefix}{k}", s, y=10.0 + 20.0 * k, font=font) for k, s in enumerate(sizes)]


def toc(layout, text=None):
    """Build a TocNode from nested tuples ``(id, [children...])``; root id None."""
    def node(item):
        if isinstance(item, str):
            return TocNode(item, text(item) if text else item)
        ident, kids = item
        n = TocNode(ident, (text(ident) if text else ident) if ident is not None else "")
        n.children = [node(k) for k in kids]
        return n

    return node((None, layout))


@pytest.fixture
def page():
    return [(612.0, 792.0)]


@pytest.fixture
def make_doc():
    def build(blocks, pages=None, gold=None, doc_id="d"):
        n = max((b.page for b in blocks), default=1)
        return Document(doc_id, tuple(blocks), tuple(pages or [(612.0, 792.0)] * n), gold)

    return build


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
