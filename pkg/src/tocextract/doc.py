"""Blocks, documents and ToC trees, plus the JSONL block-dump format.

A block dump is one JSON object per line::

    {"id": "b1", "text": "...", "font": "Helvetica", "size": 12.0,
     "color": [0, 0, 0], "page": 1, "bbox": [x0, y0, x1, y1], "lines": 2}

Page dimensions live in a sidecar ``<stem>.pages.json`` holding
``{"pages": [{"w": 612.0, "h": 792.0}, ...]}`` and a gold ToC, when present,
in ``<stem>.toc.json`` as a nested ``{"id", "text", "children"}`` tree whose
root has ``"id": null``.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

log = logging.getLogger(__name__)


class DocumentError(ValueError):
    """Base class for malformed or invalid input documents."""


class ParseError(DocumentError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


class ValidationError(DocumentError):
    pass


@dataclass(frozen=True)
class Block:
    id: str
    text: str
    font: str
    size: float
    colour: tuple[int, int, int]
    page: int
    bbox: tuple[float, float, float, float]
    line_count: int = 1

    @property
    def text_length(self) -> int:
        return len(self.text)

    def validate(self) -> None:
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise ValidationError(f"block {self.id!r}: degenerate bbox {self.bbox}")
        if not (self.size > 0 and math.isfinite(self.size)):
            raise ValidationError(f"block {self.id!r}: non-positive size {self.size}")
        if self.page < 1:
            raise ValidationError(f"block {self.id!r}: page must be >= 1, got {self.page}")
        if self.line_count < 1:
            raise ValidationError(f"block {self.id!r}: line_count must be >= 1")
        if len(self.colour) != 3 or any(not 0 <= c <= 255 for c in self.colour):
            raise ValidationError(f"block {self.id!r}: colour out of range {self.colour}")


@dataclass
class TocNode:
    """Node of a ToC tree. The pseudo root has ``id=None`` and empty text."""

    id: str | None
    text: str = ""
    children: list[TocNode] = field(default_factory=list)

    def walk(self) -> Iterator[TocNode]:
        """Pre-order traversal, root included."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def ids(self) -> list[str]:
        return [n.id for n in self.walk() if n.id is not None]

    def size(self) -> int:
        """Number of nodes excluding the pseudo root."""
        return sum(1 for n in self.walk() if n.id is not None)

    def parent_map(self) -> dict[str, str | None]:
        out: dict[str, str | None] = {}
        for node in self.walk():
            for child in node.children:
                out[child.id] = node.id
        return out

    def to_dict(self) -> dict:
        out = {"id": self.id, "text": self.text, "children": []}
        stack = [(self, out)]
        while stack:
            node, d = stack.pop()
            for child in node.children:
                c = {"id": child.id, "text": child.text, "children": []}
                d["children"].append(c)
                stack.append((child, c))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> TocNode:
        # iterative to survive deep chains
        root = cls(d.get("id"), d.get("text", ""))
        stack = [(root, d)]
        while stack:
            node, raw = stack.pop()
            for child in raw.get("children", []):
                c = cls(child.get("id"), child.get("text", ""))
                node.children.append(c)
                stack.append((c, child))
        return root


GoldToc = TocNode


@dataclass(frozen=True)
class Document:
    doc_id: str
    blocks: tuple[Block, ...]
    page_dims: tuple[tuple[float, float], ...]
    gold: TocNode | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "page_dims", tuple(tuple(p) for p in self.page_dims))

    def validate(self) -> None:
        seen: set[str] = set()
        for b in self.blocks:
            b.validate()
            if b.id in seen:
                raise ValidationError(f"duplicate block id {b.id!r}")
            seen.add(b.id)
            if b.page > len(self.page_dims):
                raise ValidationError(f"block {b.id!r} on page {b.page}, document has {len(self.page_dims)} pages")
        if self.gold is not None:
            missing = [i for i in self.gold.ids() if i not in seen]
            if missing:
                raise ValidationError(f"gold ToC references unknown block ids: {missing}")

    def by_id(self) -> dict[str, Block]:
        return {b.id: b for b in self.blocks}

    def page_size(self, page: int) -> tuple[float, float]:
        return self.page_dims[page - 1]


def clamp_to_pages(blocks: Sequence[Block], page_dims: Sequence[tuple[float, float]]) -> list[Block]:
    out = []
    for b in blocks:
        if b.page > len(page_dims):
            out.append(b)
            continue
        w, h = page_dims[b.page - 1]
        x0, y0, x1, y1 = b.bbox
        cl = (min(max(x0, 0.0), w), min(max(y0, 0.0), h), min(max(x1, 0.0), w), min(max(y1, 0.0), h))
        if cl != b.bbox:
            log.info("clamped bbox of block %s from %s to %s", b.id, b.bbox, cl)
            b = dataclasses.replace(b, bbox=cl)
        out.append(b)
    return out


# -- serialization -----------------------------------------------------------


def block_to_json(b: Block) -> str:
    obj = {
        "id": b.id,
        "text": b.text,
        "font": b.font,
        "size": b.size,
        "color": list(b.colour),
        "page": b.page,
        "bbox": list(b.bbox),
        "lines": b.line_count,
    }
    return json.dumps(obj, ensure_ascii=False)


def block_from_obj(obj: dict) -> Block:
    text = obj["text"]
    lines = obj.get("lines")
    if isinstance(lines, list):
        line_count = max(len(lines), 1)
    elif lines is None:
        line_count = text.count("\n") + 1
    else:
        line_count = int(lines)
    colour = obj.get("color", obj.get("colour", [0, 0, 0]))
    return Block(
        id=str(obj["id"]),
        text=text,
        font=str(obj["font"]),
        size=float(obj["size"]),
        colour=tuple(int(c) for c in colour),
        page=int(obj["page"]),
        bbox=tuple(float(v) for v in obj["bbox"]),
        line_count=line_count,
    )


def sidecar(path: Path, kind: str) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.{kind}.json")


def load_blocks(path) -> list[Block]:
    blocks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"malformed JSON: {exc.msg}") from None
            try:
                blocks.append(block_from_obj(obj))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(path, lineno, f"bad block record: {exc!r}") from None
    return blocks


def infer_page_dims(blocks: Sequence[Block]) -> list[tuple[float, float]]:
    n_pages = max((b.page for b in blocks), default=0)
    dims = [[1.0, 1.0] for _ in range(n_pages)]
    for b in blocks:
        d = dims[b.page - 1]
        d[0] = max(d[0], b.bbox[2])
        d[1] = max(d[1], b.bbox[3])
    return [tuple(d) for d in dims]


def load_document(path, page_dims=None, gold=None) -> Document:
    """Load a JSONL block dump plus its optional sidecars and validate it.

    ``page_dims`` and ``gold`` default to the ``.pages.json`` and
    ``.toc.json`` files next to ``path``. Missing page dims are inferred
    from the block extents.
    """
    path = Path(path)
    blocks = load_blocks(path)
    dims_path = Path(page_dims) if page_dims else sidecar(path, "pages")
    if dims_path.exists():
        raw = json.loads(dims_path.read_text(encoding="utf-8"))
        dims = [(float(p["w"]), float(p["h"])) for p in raw["pages"]]
    else:
        dims = infer_page_dims(blocks)
    gold_path = Path(gold) if gold else sidecar(path, "toc")
    toc = load_toc(gold_path) if gold_path.exists() else None
    # validate before clamping so degenerate boxes are reported as given
    for b in blocks:
        b.validate()
    doc = Document(path.stem, clamp_to_pages(blocks, dims), dims, toc)
    doc.validate()
    return doc


def save_document(doc: Document, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for b in doc.blocks:
            fh.write(block_to_json(b) + "\n")
    pages = {"pages": [{"w": w, "h": h} for w, h in doc.page_dims]}
    sidecar(path, "pages").write_text(json.dumps(pages) + "\n", encoding="utf-8")
    if doc.gold is not None:
        save_toc(doc.gold, sidecar(path, "toc"))


def load_toc(path) -> TocNode:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"malformed ToC JSON: {exc.msg}") from None
    return TocNode.from_dict(raw)


def save_toc(toc: TocNode, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(toc.to_dict(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


# -- size normalization ------------------------------------------------------


@dataclass(frozen=True)
class SizeNormPolicy:
    grid: float = 0.25
    disambiguate_fonts: bool = True
    epsilon: float = 0.01


def quantize(size: float, grid: float) -> float:
    return round(round(size / grid) * grid, 6)


def normalize_sizes(doc: Document, policy: SizeNormPolicy = SizeNormPolicy()) -> Document:
    """Snap sizes to ``policy.grid`` and split colliding fonts apart.

    When several fonts land on the same grid value, the k-th font to appear
    at that value is shifted up by ``k * epsilon``. The offset is shrunk for
    crowded values so it stays below half a grid step, which keeps the
    operation idempotent.
    """
    base = [quantize(b.size, policy.grid) for b in doc.blocks]
    offset = [0.0] * len(base)
    if policy.disambiguate_fonts:
        fonts_at: dict[float, list[str]] = {}
        for b, q in zip(doc.blocks, base):
            seen = fonts_at.setdefault(q, [])
            if b.font not in seen:
                seen.append(b.font)
        for i, (b, q) in enumerate(zip(doc.blocks, base)):
            fonts = fonts_at[q]
            if len(fonts) > 1:
                eps = min(policy.epsilon, 0.49 * policy.grid / (len(fonts) - 1))
                offset[i] = eps * fonts.index(b.font)
    blocks = [
        dataclasses.replace(b, size=round(q + o, 6)) if round(q + o, 6) != b.size else b
        for b, q, o in zip(doc.blocks, base, offset)
    ]
    return dataclasses.replace(doc, blocks=tuple(blocks))
