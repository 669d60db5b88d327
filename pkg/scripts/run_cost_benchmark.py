#!/usr/bin/env python3
"""Training-cost comparison: one encoder pass per segment vs one per entity pair."""

import argparse
import json

from medrex.schema import resolve_profile
from medrex.synth import GenConfig, generate_corpus
from medrex.train import TrainConfig, cost_report


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=50)
    parser.add_argument("--epochs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--schema", default="corp-hus")
    parser.add_argument("--window", type=int, default=300)
    args = parser.parse_args()

    schema = resolve_profile(args.schema)
    docs = generate_corpus(GenConfig(seed=args.seed, doc_count=args.docs, schema_name=args.schema))
    report = cost_report(docs, schema, TrainConfig(
        epochs=args.epochs, seed=args.seed, window_chars=args.window,
        peak_lr=1e-3, null_class_weight=0.3,
    ))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
