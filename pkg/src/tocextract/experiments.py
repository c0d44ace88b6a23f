"""Desk-scale experiments: depth sweep, GNN ablation, scalability."""

from __future__ import annotations

import dataclasses
import gc
import time
import tracemalloc
from typing import Sequence

from .doc import Document
from .metrics import CorpusScores
from .pipeline import PipelineConfig, extract_toc
from .scorer import ScorerParams
from .synth import GenConfig, generate
from .train import TrainConfig, make_samples, train_samples


def evaluate(docs: Sequence[Document], params: ScorerParams, pcfg: PipelineConfig) -> dict:
    scores = CorpusScores()
    for d in docs:
        scores.add(d.doc_id, extract_toc(d, params, pcfg), d.gold)
    return scores.report()


def synth_split(template: GenConfig, n_train: int, n_dev: int, n_test: int, seed: int = 0):
    """In-memory train/dev/test documents with disjoint generator seeds."""
    from .synth import doc_seeds

    seeds = doc_seeds(seed, n_train + n_dev + n_test)
    docs = [generate(dataclasses.replace(template, seed=s), f"doc{k:04d}").document for k, s in enumerate(seeds)]
    return docs[:n_train], docs[n_train : n_train + n_dev], docs[n_train + n_dev :]


def train_and_test(train, dev, test, cfg: TrainConfig) -> tuple[ScorerParams, dict]:
    tr = make_samples(train, cfg.scorer, cfg.pipeline)
    dv = make_samples(dev, cfg.scorer, cfg.pipeline)
    params, hist = train_samples(tr, dv, cfg)
    report = evaluate(test, params, cfg.pipeline)
    report["best_epoch"] = hist.best_epoch
    return params, report


def depth_sweep(train, dev, test, cfg: TrainConfig, depths=(1, 2, 3, 4)) -> dict[int, dict]:
    """One model per BFS depth (the GAT gets that many layers)."""
    out = {}
    for d in depths:
        _, report = train_and_test(train, dev, test, dataclasses.replace(cfg, n_d=d))
        report.pop("per_document")
        out[d] = report
    return out


def gnn_ablation(train, dev, test, cfg: TrainConfig) -> dict[str, dict]:
    out = {}
    for name, use_gnn in (("full", True), ("w/o GNN", False)):
        _, report = train_and_test(train, dev, test, dataclasses.replace(cfg, use_gnn=use_gnn))
        report.pop("per_document")
        out[name] = report
    return out


def measure_extraction(doc: Document, params: ScorerParams, pcfg: PipelineConfig) -> dict:
    """Wall time and traced peak memory of one extraction.

    The document is already loaded; the peak covers what extraction itself
    allocates (tree, features, batches, output).
    """
    gc.collect()
    tracemalloc.start()
    t0 = time.perf_counter()
    toc = extract_toc(doc, params, pcfg)
    elapsed = time.perf_counter() - t0
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return {"blocks": len(doc.blocks), "pages": len(doc.page_dims), "seconds": elapsed, "peak_bytes": peak, "headings": toc.size()}


def scalability(params: ScorerParams, pages=(100, 250, 500), seed: int = 0, pcfg: PipelineConfig = PipelineConfig()) -> list[dict]:
    template = GenConfig(columns=(2,), body_lines=(1, 2), landscape_rate=0.0)
    rows = []
    for p in pages:
        doc = generate(dataclasses.replace(template, seed=seed, pages=(p, p)), f"scale{p}").document
        rows.append(measure_extraction(doc, params, pcfg))
    return rows
