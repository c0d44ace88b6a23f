"""Full model vs w/o GNN on the context-necessity corpus.

    python3 scripts/gnn_ablation.py --docs 300 --d_h 32 --epochs 5
"""

import argparse
import dataclasses
import json

from tocextract.experiments import gnn_ablation, synth_split
from tocextract.synth import GenConfig, split_sizes
from tocextract.train import TrainConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--docs", type=int, default=300)
    ap.add_argument("--d_h", type=int, default=32)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    n = split_sizes(args.docs)
    train, dev, test = synth_split(GenConfig(variant="context", pages=(1, 1)), *n, seed=args.seed)
    cfg = TrainConfig(d_h=args.d_h, epochs=args.epochs, seed=args.seed, disambiguate_fonts=False)
    print(json.dumps(gnn_ablation(train, dev, test, cfg), indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
