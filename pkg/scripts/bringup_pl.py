"""Sanity run: PL on a clean synthetic corpus should pass 0.95 dev accuracy.

No mispronunciations and no noise, so the phonetic stream alone carries the
answer; a model that cannot fit this has a bug, not a capacity problem.
"""
import argparse

from aplmdd import corpus, phoneset, train
from aplmdd.model import AplConfig, AplModel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--max-epochs", type=int, default=50)
    ap.add_argument("--target", type=float, default=0.95)
    args = ap.parse_args()

    inv = phoneset.build_inventory()
    clean = corpus.SynthConfig(n_utts=280, sub_rate=0.0, del_rate=0.0, noise_std=0.0, embed_noise_std=0.0)
    records = corpus.synth_corpus(clean, seed=1, inventory=inv)
    cfg = AplConfig(variant="PL", phonetic_dim=len(inv), n_classes=len(inv), conv_channels=4, rnn_hidden=32,
                    ling_hidden=32, embed_dim=16, dropout=0.1, lr=args.lr, max_epochs=args.max_epochs,
                    seed=args.seed)

    def report(_, entry):
        print(f"epoch {entry['epoch']:3d}  loss {entry['train_loss']:.4f}  dev {entry['dev_accuracy']:.4f}", flush=True)
        return entry["dev_accuracy"] >= args.target

    _, hist = train.fit(AplModel(cfg), records[:200], records[200:240], inv, on_epoch=report)
    best = max(h["dev_accuracy"] for h in hist)
    print(f"best dev accuracy {best:.4f} after {len(hist)} epochs (seed {args.seed}, lr {args.lr})")


if __name__ == "__main__":
    main()
