"""Extraction time and traced peak memory on long synthetic documents.

    python3 scripts/scalability.py --params model.npz --pages 100 250 500
"""

import argparse

from tocextract.experiments import scalability
from tocextract.metrics import format_table
from tocextract.scorer import ScorerConfig, init_params, load_params


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--params", help="checkpoint; untrained d_h=64 weights when omitted")
    ap.add_argument("--pages", type=int, nargs="+", default=[100, 250, 500])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    params = load_params(args.params) if args.params else init_params(ScorerConfig(d_h=64))
    rows = scalability(params, tuple(args.pages), args.seed)
    base = rows[0]["seconds"] / rows[0]["blocks"]
    table = [
        [r["pages"], r["blocks"], r["seconds"], r["peak_bytes"] / 2**20, (r["seconds"] / r["blocks"]) / base]
        for r in rows
    ]
    print(format_table(["pages", "blocks", "seconds", "peak MiB", "per-block time ratio"], table, 2))


if __name__ == "__main__":
    main()
