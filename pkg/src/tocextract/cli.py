"""Command line entry point: ``tocextract <command> ...``.

Every command writes a JSON report (sorted keys, no timestamps) and prints
a plain-text table. Settings come from built-in defaults, then an optional
flat YAML ``--config`` file, then explicit flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import oracles
from .doc import DocumentError, load_document, save_toc
from .editor import LabelError
from .metrics import CorpusScores, assumption_stats, dumps_report, format_table, tree_edit_distance, violation_table
from .pipeline import PipelineConfig, extract_many
from .reading_order import order_document
from .scorer import CheckpointError, ConfigError, TrainingError, load_params, save_params
from .synth import GenConfig, GenerationError, make_corpus
from .train import TrainConfig, load_corpus, train
from .tree import build_tree

EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_CHECKPOINT = 5
EXIT_TRAINING = 6

log = logging.getLogger("tocextract")


class UsageError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a flat key: value mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _settings(args, config: dict, defaults: dict) -> dict:
    """defaults < config file < flags (flags left as None do not override)."""
    out = dict(defaults)
    unknown = sorted(set(config) - set(out))
    if unknown:
        raise ConfigError(f"settings not used by this command: {unknown}")
    out.update(config)
    for k in out:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _write_report(report: dict, path) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(dumps_report(report), encoding="utf-8")


def _doc_paths(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(path.glob("*.jsonl"))
    if not path.exists():
        raise FileNotFoundError(f"no such document or directory: {path}")
    return [path]


def _pipeline_cfg(s: dict) -> PipelineConfig:
    return PipelineConfig(
        n_d=int(s["n_d"]),
        gap_threshold=float(s["gap_threshold"]),
        tiny_threshold=float(s["tiny_text"]),
        tiny_relative=bool(s["tiny_relative"]),
        disambiguate_fonts=bool(s["disambiguate_fonts"]),
    )


PIPELINE_DEFAULTS = {
    "n_d": 2,
    "gap_threshold": 4.0,
    "tiny_text": 6.0,
    "tiny_relative": False,
    "disambiguate_fonts": True,
}


# -- commands ----------------------------------------------------------------


def cmd_gen(args, config) -> dict:
    defaults = {f.name: getattr(GenConfig(), f.name) for f in dataclasses.fields(GenConfig)}
    defaults.update(n_docs=10, seed=0)
    s = _settings(args, config, defaults)
    n_docs, seed = int(s.pop("n_docs")), int(s.pop("seed"))
    template = GenConfig.from_dict({k: v for k, v in s.items() if k != "seed"})
    manifest = make_corpus(template, n_docs, seed, args.out)
    report = {"command": "gen", "manifest": manifest}
    print(format_table(["split", "documents"], [[k, len(v)] for k, v in manifest["splits"].items()]))
    return report


def _train_settings(args, config) -> TrainConfig:
    defaults = dataclasses.asdict(TrainConfig())
    s = _settings(args, config, defaults)
    return TrainConfig.from_dict(s)


def cmd_train(args, config) -> dict:
    cfg = _train_settings(args, config)
    train_docs = load_corpus(args.train)
    dev_docs = load_corpus(args.dev) if args.dev else []
    params, hist = train(train_docs, dev_docs, cfg)
    save_params(params, args.out)
    report = {
        "command": "train",
        "config": dataclasses.asdict(cfg),
        "train_documents": len(train_docs),
        "dev_documents": len(dev_docs),
        "loss": hist.loss,
        "dev_macro_f1": hist.dev_macro_f1,
        "best_epoch": hist.best_epoch,
        "class_weights": hist.class_weights,
    }
    rows = [[e, hist.loss[e], hist.dev_macro_f1[e]] for e in range(len(hist.loss))]
    print(format_table(["epoch", "loss", "dev macro-F1"], rows, digits=4))
    return report


def cmd_extract(args, config) -> dict:
    s = _settings(args, config, {**PIPELINE_DEFAULTS, "jobs": os.cpu_count() or 1})
    params = load_params(args.params)
    paths = _doc_paths(Path(args.doc))
    docs = [load_document(p) for p in paths]
    tocs = extract_many(docs, params, _pipeline_cfg(s), jobs=int(s["jobs"]))
    out = Path(args.out)
    single = len(paths) == 1 and not Path(args.doc).is_dir()
    report = {"command": "extract", "settings": {k: v for k, v in s.items() if k != "jobs"}, "documents": {}}
    for path, toc in zip(paths, tocs):
        target = out if single else out / f"{path.stem}.toc.json"
        save_toc(toc, target)
        report["documents"][path.stem] = {"headings": toc.size(), "output": str(target)}
    print(format_table(["document", "headings"], [[k, v["headings"]] for k, v in report["documents"].items()]))
    return report


def cmd_eval(args, config) -> dict:
    from .doc import load_toc

    pred_dir, gold_dir = Path(args.pred), Path(args.gold)
    if not pred_dir.is_dir() or not gold_dir.is_dir():
        raise FileNotFoundError(f"--pred and --gold must be directories: {pred_dir}, {gold_dir}")
    scores = CorpusScores()
    missing = []
    for gold_path in sorted(gold_dir.glob("*.toc.json")):
        doc_id = gold_path.name[: -len(".toc.json")]
        pred_path = pred_dir / gold_path.name
        if not pred_path.exists():
            missing.append(doc_id)
            continue
        scores.add(doc_id, load_toc(pred_path), load_toc(gold_path))
    if missing:
        raise FileNotFoundError(f"no prediction for {len(missing)} gold documents, e.g. {missing[0]}")
    report = {"command": "eval", **scores.report()}
    print(format_table(["metric", "value"], [[k, report[k]] for k in ("toc_teds", "hd_precision", "hd_recall", "hd_f1")], 4))
    return report


def cmd_stats(args, config) -> dict:
    s = _settings(args, config, {"gap_threshold": 4.0})
    rows = {}
    for directory in args.dirs:
        docs = load_corpus(directory)
        rows[Path(directory).name or str(directory)] = assumption_stats(
            (d.doc_id, order_document(d, float(s["gap_threshold"])), d.gold) for d in docs
        )
    print(violation_table(rows))
    return {"command": "stats", "datasets": {k: v.report() for k, v in rows.items()}}


def cmd_oracle_check(args, config) -> dict:
    s = _settings(args, config, {"seed": 0, "n_trees": 1000, "n_ted": 500, "n_grad": 20})
    rng = np.random.default_rng(int(s["seed"]))
    tree_fail = 0
    for _ in range(int(s["n_trees"])):
        sizes = oracles.random_sizes(rng)
        from .tree import parents_from_sizes

        tree_fail += parents_from_sizes(sizes) != oracles.build_parents_reference(sizes)
    ted_fail = 0
    for _ in range(int(s["n_ted"])):
        a, b = oracles.random_toc(rng), oracles.random_toc(rng)
        ted_fail += tree_edit_distance(a, b) != oracles.ted_brute_force(a, b)
    worst = max((oracles.gradient_check(rng) for _ in range(int(s["n_grad"]))), default=0.0)
    report = {
        "command": "oracle-check",
        "tree_builder": {"cases": int(s["n_trees"]), "mismatches": int(tree_fail)},
        "ted": {"cases": int(s["n_ted"]), "mismatches": int(ted_fail)},
        "gradients": {"cases": int(s["n_grad"]), "worst_relative_error": float(worst), "tolerance": 1e-4},
    }
    report["passed"] = bool(tree_fail == 0 and ted_fail == 0 and worst <= 1e-4)
    print(format_table(
        ["suite", "cases", "result"],
        [
            ["tree builder vs double loop", s["n_trees"], "ok" if not tree_fail else f"{tree_fail} mismatches"],
            ["TED vs brute force", s["n_ted"], "ok" if not ted_fail else f"{ted_fail} mismatches"],
            ["gradients vs finite differences", s["n_grad"], f"worst rel err {worst:.2e}"],
        ],
    ))
    return report


def cmd_depth_sweep(args, config) -> dict:
    from .experiments import depth_sweep

    cfg = _train_settings(args, config)
    depths = [int(d) for d in args.depths]
    result = depth_sweep(load_corpus(args.train), load_corpus(args.dev), load_corpus(args.test), cfg, depths)
    print(format_table(["n_d", "TEDS", "HD F1"], [[d, r["toc_teds"], r["hd_f1"]] for d, r in result.items()], 4))
    return {"command": "depth-sweep", "config": dataclasses.asdict(cfg), "results": {str(k): v for k, v in result.items()}}


# -- parser ------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat YAML file of settings")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="parallel documents (default: all cores)")


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--n_d", "--n-d", dest="n_d", type=int)
    p.add_argument("--d_h", "--d-h", dest="d_h", type=int)
    p.add_argument("--class-weight-cap", dest="class_weight_cap", type=float)
    p.add_argument("--no-gnn", dest="use_gnn", action="store_const", const=False)
    p.add_argument("--no-gru", dest="use_gru", action="store_const", const=False)
    p.add_argument("--no-font-disambiguation", dest="disambiguate_fonts", action="store_const", const=False)
    p.add_argument("--gap-threshold", dest="gap_threshold", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tocextract", description="Table-of-contents extraction from PDF text blocks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n-docs", dest="n_docs", type=int)
    p.add_argument("--variant", choices=["standard", "context"])
    p.add_argument("--depth", type=int)
    p.add_argument("--a1", dest="a1_rate", type=float)
    p.add_argument("--a2", dest="a2_rate", type=float)
    p.add_argument("--a3", dest="a3_rate", type=float)
    p.add_argument("--numbering", action="store_const", const=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a scorer checkpoint")
    _common(p)
    _train_flags(p)
    p.add_argument("--train", required=True, help="directory of training documents")
    p.add_argument("--dev", help="directory of dev documents for model selection")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="extract ToCs from a document or a directory")
    _common(p)
    p.add_argument("doc")
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True, help="output file, or directory when DOC is a directory")
    p.add_argument("--n_d", "--n-d", dest="n_d", type=int)
    p.add_argument("--gap-threshold", dest="gap_threshold", type=float)
    p.add_argument("--tiny-text", dest="tiny_text", type=float)
    p.add_argument("--tiny-relative", dest="tiny_relative", action="store_const", const=True)
    p.add_argument("--no-font-disambiguation", dest="disambiguate_fonts", action="store_const", const=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score predicted ToCs against gold ToCs")
    _common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="assumption violation table")
    _common(p)
    p.add_argument("dirs", nargs="+")
    p.add_argument("--gap-threshold", dest="gap_threshold", type=float)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("oracle-check", help="run the brute-force oracle suites")
    _common(p)
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--n-ted", dest="n_ted", type=int)
    p.add_argument("--n-grad", dest="n_grad", type=int)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("depth-sweep", help="train and test one model per BFS depth")
    _common(p)
    _train_flags(p)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--depths", nargs="+", default=["1", "2", "3", "4"])
    p.set_defaults(func=cmd_depth_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = _load_config(args.config)
        report = args.func(args, config)
        _write_report(report, args.report)
        if report.get("passed") is False:
            return 1
        return 0
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (DocumentError, LabelError, GenerationError, ConfigError, json.JSONDecodeError, yaml.YAMLError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
