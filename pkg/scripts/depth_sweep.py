"""TEDS vs BFS depth on the standard synthetic corpus.

    python3 scripts/depth_sweep.py --docs 100 --depths 1 2 3 4
"""

import argparse

from tocextract.experiments import depth_sweep, synth_split
from tocextract.metrics import format_table
from tocextract.synth import GenConfig, split_sizes
from tocextract.train import TrainConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--docs", type=int, default=100)
    ap.add_argument("--depths", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--d_h", type=int, default=32)
    ap.add_argument("--epochs", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--a1", type=float, default=0.0)
    ap.add_argument("--a2", type=float, default=0.0)
    ap.add_argument("--a3", type=float, default=0.0)
    args = ap.parse_args()
    template = GenConfig(a1_rate=args.a1, a2_rate=args.a2, a3_rate=args.a3)
    train, dev, test = synth_split(template, *split_sizes(args.docs), seed=args.seed)
    res = depth_sweep(train, dev, test, TrainConfig(d_h=args.d_h, epochs=args.epochs, seed=args.seed), args.depths)
    print(format_table(["n_d", "TEDS", "HD F1"], [[d, r["toc_teds"], r["hd_f1"]] for d, r in res.items()], 4))


if __name__ == "__main__":
    main()
