"""Synthetic documents with known ToCs, reading order and violation ledgers."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .context import font_bucket
from .doc import Block, Document, TocNode, save_document

WORDS = (
    "annual sustainability report energy carbon emissions water waste supply chain "
    "community people safety governance risk strategy climate impact value growth "
    "performance target progress investment innovation health wellbeing diversity "
    "inclusion training ethics compliance board oversight stakeholder engagement "
    "material topics human rights product quality customer responsible sourcing "
    "renewable efficiency reduction transition biodiversity land use packaging "
    "recycling circular economy employee volunteering partnership education digital "
    "data privacy security resilience infrastructure operations financial overview "
    "highlights message chair chief executive approach commitment framework policy "
    "management system assurance disclosure index goals outlook future review"
).split()


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    pages: tuple[int, int] = (2, 4)
    columns: tuple[int, ...] = (1, 2)
    depth: int = 3
    level_sizes: tuple[float, ...] = (20.0, 16.0, 13.0, 11.5)
    body_size: float = 10.0
    bodies_per_heading: tuple[int, int] = (1, 3)
    children_per_heading: tuple[int, int] = (0, 3)
    body_lines: tuple[int, int] = (2, 6)
    a1_rate: float = 0.0
    a2_rate: float = 0.0
    a3_rate: float = 0.0
    decoy_rate: float = 0.1
    tiny_rate: float = 0.05
    numbering: bool = False
    landscape_rate: float = 0.2
    variant: str = "standard"  # or "context"

    def validate(self) -> None:
        for name in ("a1_rate", "a2_rate", "a3_rate", "decoy_rate", "tiny_rate", "landscape_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise GenerationError(f"{name} must be in [0, 1], got {v}")
        if not 1 <= self.depth <= 4 or self.depth > len(self.level_sizes):
            raise GenerationError(f"depth must be in 1..4 with a size per level, got {self.depth}")
        sizes = list(self.level_sizes[: self.depth]) + [self.body_size]
        if any(a <= b for a, b in zip(sizes, sizes[1:])):
            raise GenerationError("level sizes must be strictly decreasing and above the body size")
        if any(c not in (1, 2) for c in self.columns):
            raise GenerationError("columns must be 1 or 2")
        if self.pages[0] < 1 or self.pages[1] < self.pages[0]:
            raise GenerationError(f"bad page range {self.pages}")
        if self.variant not in ("standard", "context"):
            raise GenerationError(f"unknown variant {self.variant!r}")

    @classmethod
    def from_dict(cls, d: dict) -> GenConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise GenerationError(f"unknown generator settings: {sorted(unknown)}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)


@dataclass
class Item:
    """A block in logical (true reading) order before layout."""

    kind: str  # heading | body | decoy | tiny | pseudo
    text: str
    font: str
    size: float
    colour: tuple[int, int, int]
    lines: int
    level: int = 0
    parent: int | None = None  # logical parent heading (item index)
    children: list[int] = field(default_factory=list)


@dataclass
class Generated:
    document: Document
    gold: TocNode
    order: list[str]
    ledger: dict

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{self.document.doc_id}.jsonl"
        save_document(self.document, path)
        (directory / f"{self.document.doc_id}.order.json").write_text(json.dumps(self.order) + "\n")
        (directory / f"{self.document.doc_id}.ledger.json").write_text(
            json.dumps(self.ledger, indent=1, sort_keys=True) + "\n"
        )
        return path


# -- text --------------------------------------------------------------------


def _words(rng, lo, hi) -> list[str]:
    return [WORDS[i] for i in rng.integers(0, len(WORDS), int(rng.integers(lo, hi + 1)))]


def _title(rng) -> str:
    return " ".join(w.capitalize() for w in _words(rng, 1, 5))


def _body(rng, lines: int) -> str:
    sentences = []
    for _ in range(lines):
        w = _words(rng, 8, 14)
        sentences.append(" ".join(w).capitalize() + ".")
    return " ".join(sentences)


def _decoy(rng) -> str:
    n = int(rng.integers(1, 100000))
    forms = [f"${n:,}m", f"{n:,}", f"{n % 100}%", f"{n:,} {WORDS[int(rng.integers(len(WORDS)))]}", f"{n % 1000}kt"]
    return forms[int(rng.integers(len(forms)))]


def _sround(rng, x: float) -> int:
    """Stochastic rounding: unbiased integer with at most unit error."""
    base = int(np.floor(x))
    return base + int(rng.random() < x - base)


# -- logical structure -------------------------------------------------------


class _Builder:
    def __init__(self, cfg: GenConfig, rng):
        self.cfg = cfg
        self.rng = rng
        self.items: list[Item] = []
        accent = [(20, 40, 120), (0, 90, 60), (140, 20, 20), (0, 0, 0)]
        self.heading_colour = accent[int(rng.integers(len(accent)))]
        self.heading_font = ["Helvetica-Bold", "Arial-BoldMT", "Times-Roman"][int(rng.integers(3))]
        self.body_font = "Times-Roman" if self.heading_font != "Times-Roman" else "Georgia"
        if rng.random() < 0.3:
            # headings told apart from body text by size alone
            self.heading_font = self.body_font
        self.counters = [0] * 5

    def add(self, item: Item) -> int:
        self.items.append(item)
        return len(self.items) - 1

    def filler(self) -> None:
        cfg, rng = self.cfg, self.rng
        if rng.random() < cfg.decoy_rate:
            size = float(rng.integers(22, 49)) / 2
            self.add(Item("decoy", _decoy(rng), "Helvetica", size, (90, 90, 90), 1))
        if rng.random() < cfg.tiny_rate:
            self.add(Item("tiny", "Source: " + " ".join(_words(self.rng, 3, 8)), "Arial", 5.0, (0, 0, 0), 1))

    def section(self, level: int, parent: int | None) -> int:
        cfg, rng = self.cfg, self.rng
        self.counters[level - 1] += 1
        for k in range(level, 5):
            self.counters[k] = 0
        text = _title(rng)
        if cfg.numbering:
            text = ".".join(str(c) for c in self.counters[:level]) + " " + text
        h = self.add(Item("heading", text, self.heading_font, cfg.level_sizes[level - 1],
                          self.heading_colour, 1, level, parent))
        if parent is not None:
            self.items[parent].children.append(h)
        for _ in range(int(rng.integers(cfg.bodies_per_heading[0], cfg.bodies_per_heading[1] + 1))):
            lines = int(rng.integers(cfg.body_lines[0], cfg.body_lines[1] + 1))
            self.add(Item("body", _body(rng, lines), self.body_font, cfg.body_size, (0, 0, 0), lines))
            self.filler()
        if level < cfg.depth:
            lo, hi = cfg.children_per_heading
            n = int(rng.integers(lo, hi + 1))
            if level == 1:
                n = max(n, 1)
            for _ in range(n):
                self.section(level + 1, h)
        return h


# -- violations --------------------------------------------------------------


def _groups(items: list[Item], tops: list[int]) -> list[list[int]]:
    groups = [tops]
    for k, it in enumerate(items):
        if it.kind == "heading" and it.children:
            groups.append(it.children)
    return groups


def _inject(items: list[Item], tops: list[int], sequence: list[int], cfg: GenConfig, rng) -> dict[int, list[bool]]:
    """Apply violations in place; returns intended (A1, A2, A3) flags per heading."""
    headings = [k for k, it in enumerate(items) if it.kind == "heading"]
    n = len(headings)
    flags = {h: [False, False, False] for h in headings}
    group_of: dict[int, list[int]] = {}
    for g in _groups(items, tops):
        for m in g:
            group_of[m] = g
    modified_groups: set[int] = set()

    # A1: read the first sub-heading right before its parent heading
    cands = [h for h in headings if items[h].children]
    k1 = min(_sround(rng, cfg.a1_rate * n), len(cands))
    chosen = sorted(rng.choice(cands, size=k1, replace=False).tolist()) if k1 else []
    for h in chosen:
        c = items[h].children[0]
        sequence.remove(c)
        sequence.insert(sequence.index(h), c)
        flags[h][0] = True

    def size_modifiable(h) -> bool:
        g = group_of[h]
        return id(g) not in modified_groups and (len(g) == 1 or g[0] != h)

    # A2: shrink a heading below its sub-headings
    cands = [h for h in headings if items[h].children and size_modifiable(h)]
    k2 = min(_sround(rng, cfg.a2_rate * n), len(cands))
    a3_from_a2 = 0
    # a shrunk parent and a shrunk child could cancel each other out
    blocked: set[int] = set()
    for h in rng.permutation(cands).tolist():
        if k2 == 0:
            break
        if not size_modifiable(h) or h in blocked:
            continue
        blocked.update(items[h].children)
        if items[h].parent is not None:
            blocked.add(items[h].parent)
        child_size = cfg.level_sizes[items[h].level]
        items[h].size = child_size - 1.5
        flags[h][1] = True
        g = group_of[h]
        modified_groups.add(id(g))
        if len(g) > 1:
            flags[h][2] = True
            a3_from_a2 += 1
        k2 -= 1

    # A3: nudge one non-first sibling of a group by one point
    k3 = max(0, _sround(rng, cfg.a3_rate * n) - a3_from_a2)
    cands = [h for h in headings if len(group_of[h]) > 1 and size_modifiable(h)]
    for h in rng.permutation(cands).tolist():
        if k3 == 0:
            break
        if not size_modifiable(h):
            continue
        items[h].size += 1.0 if rng.random() < 0.5 else -1.0
        flags[h][2] = True
        modified_groups.add(id(group_of[h]))
        k3 -= 1
    return flags


# -- layout ------------------------------------------------------------------

PORTRAIT = (612.0, 792.0)
LANDSCAPE = (792.0, 612.0)
MARGIN = 40.0
COL_GAP = 24.0
SPACING = 2.0
BAND_GAP = 12.0


class _Layout:
    """Flows items top-to-bottom through columns and pages."""

    def __init__(self, n_cols: int, cfg: GenConfig, rng):
        self.n_cols = n_cols
        self.cfg = cfg
        self.rng = rng
        self.pages: list[tuple[float, float]] = []
        self.placed: list[tuple[int, tuple[float, float, float, float]]] = []
        self._new_page()

    def _new_page(self):
        dims = LANDSCAPE if self.rng.random() < self.cfg.landscape_rate else PORTRAIT
        self.pages.append(dims)
        w, h = dims
        self.col = 0
        self.top = MARGIN
        self.y = MARGIN
        self.col_w = (w - 2 * MARGIN - (self.n_cols - 1) * COL_GAP) / self.n_cols

    def _col_x(self, col):
        return MARGIN + col * (self.col_w + COL_GAP)

    @staticmethod
    def _height(it: Item) -> float:
        return round(it.lines * it.size * 1.25, 2)

    def _width(self, it: Item, full: float) -> float:
        if it.kind in ("body", "tiny"):
            return full
        return round(min(full, 10 + 0.5 * it.size * len(it.text)), 2)

    def place(self, it: Item) -> tuple[int, tuple[float, float, float, float]]:
        w_page, h_page = self.pages[-1]
        height = self._height(it)
        bottom = h_page - MARGIN
        at_page_top = self.col == 0 and self.y == MARGIN
        if self.n_cols > 1 and at_page_top and it.kind == "heading" and it.level == 1:
            full = w_page - 2 * MARGIN
            box = (MARGIN, self.y, MARGIN + self._width(it, full), self.y + height)
            self.top = self.y = box[3] + BAND_GAP
            return len(self.pages), box
        if self.y + height > bottom and self.y > self.top:
            if self.col + 1 < self.n_cols:
                self.col += 1
                self.y = self.top
            else:
                self._new_page()
                return self.place(it)
        if self.y + height > bottom:
            raise GenerationError(f"block of height {height} does not fit on a page")
        x0 = self._col_x(self.col)
        box = (round(x0, 2), round(self.y, 2), round(x0 + self._width(it, self.col_w), 2), round(self.y + height, 2))
        self.y = box[3] + SPACING
        return len(self.pages), box


def _context_items(cfg: GenConfig, rng, builder: _Builder, target_blocks: int) -> list[int]:
    """Flat candidates of one size: headings share one font, each non-heading
    candidate gets its own font from the same hash bucket."""
    size = 14.0
    h_font = f"Sans-{int(rng.integers(10**6))}"
    bucket = font_bucket(h_font)
    next_font = int(rng.integers(10**6))
    tops = []
    kind = "heading" if rng.random() < 0.5 else "pseudo"
    first = True
    while len(builder.items) < target_blocks or len(tops) < 4:
        run = int(rng.integers(2, 4)) if kind == "heading" else int(rng.integers(2, 5))
        for _ in range(run):
            if kind == "heading":
                font = h_font
            else:
                while True:
                    font = f"Serif-{next_font}"
                    next_font += 1
                    if font_bucket(font) == bucket and font != h_font:
                        break
            k = builder.add(Item(kind, _title(rng), font, size, (0, 0, 0), 1, 1 if kind == "heading" else 0))
            if kind == "heading":
                tops.append(k)
            for _ in range(int(rng.integers(1, 4))):
                lines = int(rng.integers(1, 3))
                builder.add(Item("body", _body(rng, lines), "Times-Roman", cfg.body_size, (0, 0, 0), lines))
        kind = "pseudo" if kind == "heading" else "heading"
        first = False
    del first
    return tops


def _estimate_pages(items: list[Item], n_cols: int, cfg: GenConfig) -> int:
    lay = _Layout(n_cols, dataclasses.replace(cfg, landscape_rate=0.0), np.random.default_rng(0))
    for it in items:
        lay.place(it)
    return len(lay.pages)


def generate(cfg: GenConfig, doc_id: str = "doc") -> Generated:
    """Build one synthetic document; deterministic given ``cfg.seed``."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_pages = int(rng.integers(cfg.pages[0], cfg.pages[1] + 1))
    n_cols = int(cfg.columns[int(rng.integers(len(cfg.columns)))])
    b = _Builder(cfg, rng)

    if cfg.variant == "context":
        per_page = 26 * n_cols
        tops = _context_items(cfg, rng, b, n_pages * per_page)
    else:
        tops = []
        while True:
            tops.append(b.section(1, None))
            if _estimate_pages(b.items, n_cols, cfg) >= n_pages:
                break
    items = b.items
    sequence = list(range(len(items)))
    flags = _inject(items, tops, sequence, cfg, rng) if cfg.variant == "standard" else {
        h: [False, False, False] for h in tops
    }

    lay = _Layout(n_cols, cfg, rng)
    placed = {k: lay.place(items[k]) for k in sequence}
    id_perm = rng.permutation(len(items))
    ids = [f"b{int(p):05d}" for p in id_perm]
    blocks = [
        Block(
            id=ids[k],
            text=items[k].text,
            font=items[k].font,
            size=float(items[k].size),
            colour=items[k].colour,
            page=placed[k][0],
            bbox=placed[k][1],
            line_count=items[k].lines,
        )
        for k in sequence
    ]
    order = [b.id for b in blocks]
    # dump order: shuffled so consumers cannot rely on it
    shuffled = [blocks[k] for k in rng.permutation(len(blocks))]

    gold = TocNode(None, "")
    nodes = {None: gold}
    pos = {k: n for n, k in enumerate(sequence)}
    heading_ids = [k for k in range(len(items)) if items[k].kind == "heading"]
    for k in sorted(heading_ids, key=lambda k: (items[k].level, pos[k])):
        node = TocNode(ids[k], items[k].text)
        nodes[k] = node
        nodes[items[k].parent].children.append(node)
    for node in gold.walk():
        node.children.sort(key=lambda n: order.index(n.id))

    ledger = {
        "headings": {ids[h]: dict(zip(("A1", "A2", "A3"), f)) for h, f in flags.items()},
        "rates": {"a1": cfg.a1_rate, "a2": cfg.a2_rate, "a3": cfg.a3_rate},
        "kinds": {ids[k]: items[k].kind for k in range(len(items))},
    }
    doc = Document(doc_id, tuple(shuffled), tuple(lay.pages), gold)
    doc.validate()
    return Generated(doc, gold, order, ledger)


# -- corpora -----------------------------------------------------------------


def split_sizes(n: int, split=(0.8, 0.1, 0.1)) -> tuple[int, int, int]:
    if n < 3:
        raise GenerationError("a corpus needs at least 3 documents")
    n_dev = max(1, round(n * split[1]))
    n_test = max(1, round(n * split[2]))
    return n - n_dev - n_test, n_dev, n_test


def doc_seeds(master_seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(master_seed)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(n)]


def make_corpus(template: GenConfig, n_docs: int, seed: int, out_dir, split=(0.8, 0.1, 0.1)) -> dict:
    """Write train/dev/test directories plus ``manifest.json``; returns the manifest."""
    out = Path(out_dir)
    sizes = split_sizes(n_docs, split)
    seeds = doc_seeds(seed, n_docs)
    names = ["train"] * sizes[0] + ["dev"] * sizes[1] + ["test"] * sizes[2]
    manifest = {
        "seed": seed,
        "config": dataclasses.asdict(template),
        "splits": {"train": [], "dev": [], "test": []},
        "doc_seeds": {},
    }
    for k, (s, name) in enumerate(zip(seeds, names)):
        doc_id = f"doc{k:04d}"
        gen = generate(dataclasses.replace(template, seed=s), doc_id)
        gen.save(out / name)
        manifest["splits"][name].append(doc_id)
        manifest["doc_seeds"][doc_id] = s
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest
