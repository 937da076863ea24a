"""Variant comparison on the standard synthetic corpus.

    python scripts/run_ablation.py --out runs/ablation --seeds 0 1 2

Writes ``table.txt`` (mean over seeds) and ``runs.json`` (per-seed aggregates
and training histories).
"""
import argparse
import json
import time
from pathlib import Path

from aplmdd import experiments, scoring


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--variants", nargs="+", default=["AL", "PL", "APL"])
    ap.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    ap.add_argument("--corpus-seed", type=int, default=0)
    ap.add_argument("--max-epochs", type=int, default=experiments.ToyModel.max_epochs)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    def progress(run):
        agg = run["report"]["aggregate"]
        print(f"{run['variant']:>9} seed {run['seed']}: F={agg['mdd']['f_measure']:.4f} "
              f"acc={agg['edit']['accuracy']:.4f} epochs={len(run['history'])}", flush=True)

    t0 = time.perf_counter()
    toy = experiments.ToyModel(max_epochs=args.max_epochs)
    result = experiments.ablation(args.variants, args.seeds, toy=toy, corpus_seed=args.corpus_seed,
                                  progress=progress)
    table = scoring.format_table(result["rows"])
    (args.out / "table.txt").write_text(table)
    runs = [{"variant": r["variant"], "seed": r["seed"], "history": r["history"],
             "aggregate": r["report"]["aggregate"]} for r in result["runs"]]
    (args.out / "runs.json").write_text(json.dumps(runs, indent=2) + "\n")
    print(table)
    print(f"{time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
