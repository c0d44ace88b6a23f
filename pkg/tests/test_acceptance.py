"""Acceptance suite: the ten end-to-end criteria at their stated tolerances.

Each test records one PASS/FAIL line; the lines are printed together at the
end of the session (see ``conftest.pytest_terminal_summary``). Run alone with

    python3 -m pytest tests/test_acceptance.py -v

Model sizes are reduced where noted in the test so the suite runs in a few
minutes on one CPU.
"""

import time

import numpy as np
import pytest

from conftest import stacked
from tocextract import oracles
from tocextract.cli import main as cli
from tocextract.doc import normalize_sizes
from tocextract.editor import derive_labels, modify_tree
from tocextract.experiments import depth_sweep, evaluate, gnn_ablation, scalability, synth_split, train_and_test
from tocextract.metrics import AssumptionStats, CorpusScores, tree_edit_distance
from tocextract.reading_order import order_document
from tocextract.synth import GenConfig, doc_seeds, generate
from tocextract.train import TrainConfig
from tocextract.tree import build_tree

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(RESULTS[n])


def test_c01_tree_builder_oracle():
    rng = np.random.default_rng(101)
    cases = [oracles.random_sizes(rng, 200) for _ in range(1000)]
    blocks = [stacked(s) for s in cases]
    t0 = time.perf_counter()
    got = [list(build_tree(b).parent) for b in blocks]
    elapsed = time.perf_counter() - t0
    bad = sum(g != oracles.build_parents_reference(s) for g, s in zip(got, cases))
    ok = bad == 0 and elapsed < 10.0
    record(1, "build_tree vs double loop", ok, f"{bad}/1000 mismatches, {elapsed:.2f}s")
    assert ok


def test_c02_ted_oracle():
    rng = np.random.default_rng(102)
    pairs = [(oracles.random_toc(rng, 8), oracles.random_toc(rng, 8)) for _ in range(500)]
    d = [tree_edit_distance(a, b) for a, b in pairs]
    bad = sum(x != oracles.ted_brute_force(a, b) for x, (a, b) in zip(d, pairs))
    asym = sum(x != tree_edit_distance(b, a) for x, (a, b) in zip(d, pairs))
    # triangle over (a_k, b_k, a_k+1) triples drawn from the same set
    tri = 0
    for k in range(len(pairs) - 1):
        a, b = pairs[k]
        c = pairs[k + 1][0]
        tri += tree_edit_distance(a, c) > d[k] + tree_edit_distance(b, c)
    ok = bad == asym == tri == 0
    record(2, "TED vs brute force", ok, f"{bad} mismatches, {asym} asymmetric, {tri} triangle violations / 500")
    assert ok


def test_c03_round_trip():
    scores = CorpusScores()
    for k, s in enumerate(doc_seeds(103, 100)):
        gen = generate(GenConfig(seed=s), f"doc{k:03d}")
        tree = build_tree(order_document(normalize_sizes(gen.document)))
        scores.add(gen.document.doc_id, modify_tree(tree, derive_labels(tree, gen.gold)), gen.gold)
    r = scores.report()
    ok = r["toc_teds"] == 1.0 and r["hd_f1"] == 1.0
    record(3, "label/modify round trip", ok, f"TEDS {r['toc_teds']:.4f}, F1 {r['hd_f1']:.4f} over 100 docs")
    assert ok


def test_c04_gradients():
    rng = np.random.default_rng(104)
    worst = max(oracles.gradient_check(rng) for _ in range(20))
    ok = worst <= 1e-4
    record(4, "analytic vs central FD gradients", ok, f"worst relative error {worst:.2e} over 20 draws")
    assert ok


@pytest.fixture(scope="module")
def quality_run():
    # d_h stays at 128; epochs cut to 3 (the dev score saturates in the first)
    train, dev, test = synth_split(GenConfig(), 200, 20, 50, seed=105)
    t0 = time.perf_counter()
    params, report = train_and_test(train, dev, test, TrainConfig(d_h=128, epochs=3, seed=0))
    return params, report, time.perf_counter() - t0


def test_c05_learned_quality(quality_run):
    _, r, elapsed = quality_run
    ok = r["hd_f1"] >= 0.95 and r["toc_teds"] >= 0.90 and elapsed <= 1800
    record(5, "learned pipeline on 50 held-out docs", ok,
           f"F1 {r['hd_f1']:.4f}, TEDS {r['toc_teds']:.4f}, train+test {elapsed:.0f}s")
    assert ok


def test_c06_context_necessity():
    train, dev, test = synth_split(GenConfig(variant="context", pages=(1, 1)), 240, 30, 30, seed=106)
    res = gnn_ablation(train, dev, test, TrainConfig(d_h=32, epochs=5, disambiguate_fonts=False))
    full, flat = res["full"]["hd_f1"], res["w/o GNN"]["hd_f1"]
    ok = full >= 0.9 and flat <= 0.7
    record(6, "GNN ablation direction", ok, f"full F1 {full:.4f}, w/o GNN F1 {flat:.4f}")
    assert ok


def test_c07_scalability(quality_run):
    params = quality_run[0]
    scalability(params, pages=(10,), seed=107)  # warm-up
    rows = scalability(params, pages=(100, 250, 500), seed=107)
    per_block = [r["seconds"] / r["blocks"] for r in rows]
    time_ratio = max(p / per_block[0] for p in per_block)
    mem_ratio = rows[2]["peak_bytes"] / rows[0]["peak_bytes"]
    big = rows[2]["blocks"]
    ok = big >= 20000 and mem_ratio <= 2.0 and time_ratio <= 1.5
    record(7, "locality and scalability", ok,
           f"{big} blocks at 500 pages, memory 500p/100p {mem_ratio:.2f}x, per-block time ratio {time_ratio:.2f}x")
    assert ok


def test_c08_assumption_auditor():
    stats = AssumptionStats()
    for k, s in enumerate(doc_seeds(108, 10_000)):
        gen = generate(GenConfig(seed=s, a1_rate=0.01, a2_rate=0.02, a3_rate=0.09), f"d{k}")
        stats.add(gen.document.doc_id, order_document(gen.document), gen.gold)
        if stats.headings >= 2000:
            break
    p = stats.percentages()
    target = {"A1": 1.0, "A2": 2.0, "A3": 9.0}
    within = all(abs(p[k] - v) <= 1.0 for k, v in target.items())
    ok = within and p["Any"] >= max(p["A1"], p["A2"], p["A3"]) and stats.headings >= 2000
    record(8, "assumption auditor", ok,
           f"{stats.headings} headings, A1 {p['A1']:.2f} A2 {p['A2']:.2f} A3 {p['A3']:.2f} Any {p['Any']:.2f} (%)")
    assert ok


def test_c09_depth_sweep():
    # same data scale and model size as criterion 5
    train, dev, test = synth_split(GenConfig(), 200, 20, 50, seed=109)
    res = depth_sweep(train, dev, test, TrainConfig(d_h=128, epochs=3), depths=(1, 2, 3))
    t1, t2, t3 = (res[d]["toc_teds"] for d in (1, 2, 3))
    ok = t2 >= t1 and abs(t3 - t2) <= 0.02
    record(9, "depth sweep shape", ok, f"TEDS n_d=1 {t1:.4f}, n_d=2 {t2:.4f}, n_d=3 {t3:.4f}")
    assert ok


def test_c10_cli_determinism(tmp_path):
    root = tmp_path
    commands = {
        "gen": ["gen", "--out", root / "c", "--n-docs", 5, "--seed", 110],
        "train": ["train", "--train", root / "c/train", "--dev", root / "c/dev", "--out", root / "m.npz",
                  "--d_h", 8, "--epochs", 2, "--seed", 110],
        "extract": ["extract", root / "c/test", "--params", root / "m.npz", "--out", root / "pred", "--jobs", 2],
        "eval": ["eval", "--pred", root / "pred", "--gold", root / "c/test"],
        "stats": ["stats", root / "c/train", root / "c/dev"],
        "oracle-check": ["oracle-check", "--n-trees", 50, "--n-ted", 20, "--n-grad", 1, "--seed", 110],
        "depth-sweep": ["depth-sweep", "--train", root / "c/train", "--dev", root / "c/dev", "--test", root / "c/test",
                        "--d_h", 8, "--epochs", 1, "--depths", 1, 2],
    }
    outputs = {}
    for attempt in range(2):
        for name, argv in commands.items():
            rep = root / f"{name}.json"
            assert cli([str(a) for a in argv + ["--report", rep]]) == 0, name
            outputs.setdefault(name, []).append(rep.read_bytes())
        outputs.setdefault("checkpoint", []).append((root / "m.npz").read_bytes())
        outputs.setdefault("tocs", []).append([p.read_bytes() for p in sorted((root / "pred").iterdir())])
    differ = sorted(k for k, v in outputs.items() if v[0] != v[1])
    ok = not differ
    record(10, "CLI reruns byte-identical", ok,
           f"{len(commands)} commands + checkpoint + ToCs; differing: {', '.join(differ) or 'none'}")
    assert ok
