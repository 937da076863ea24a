"""Reproducible toy-corpus experiments shared by the CLI and scripts/."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

from . import corpus, phoneset, scoring, train
from .model import AplConfig, AplModel

# standard synthetic corpus for the variant comparison: 200/40/40 utterances
STANDARD_SYNTH = corpus.SynthConfig(
    n_utts=280,
    phones_per_utt=8,
    sub_rate=0.15,
    del_rate=0.05,
    ins_rate=0.0,
    frames_per_phone=8,
    noise_std=1.0,
    embed_noise_std=1.0,
    embed_sharpness=4.0,
    embed_canonical_bias=0.5,
    utts_per_speaker=20,
)
STANDARD_SPLIT = corpus.SplitSpec(
    train=frozenset(f"spk{i:03d}" for i in range(10)),
    dev=frozenset({"spk010", "spk011"}),
    test=frozenset({"spk012", "spk013"}),
)


@dataclass
class ToyModel:
    """Desk-scale model size; stack counts follow the full architecture."""
    conv_channels: int = 4
    rnn_hidden: int = 32
    ling_hidden: int = 32
    embed_dim: int = 16
    dropout: float = 0.1
    lr: float = 1e-2
    max_epochs: int = 30
    batch_size: int = 64
    beam_width: int = 10
    extra: dict = field(default_factory=dict)

    def config(self, variant: str, inv: phoneset.PhoneInventory, phonetic_dim: int, seed: int) -> AplConfig:
        kw = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "extra"}
        kw.update(self.extra)
        return AplConfig(variant=variant, n_classes=len(inv), phonetic_dim=phonetic_dim, seed=seed, **kw)


def report_for(model: AplModel, records: Sequence[corpus.UtteranceRecord], inv, beam_width=None) -> dict:
    hyps = train.predict(model, records, inv, beam_width)
    return scoring.corpus_report((r.id, r.canonical, r.perceived, h) for r, h in zip(records, hyps))


def run_variant(variant: str, splits: dict, inv, toy: ToyModel, seed: int) -> dict:
    phonetic_dim = next((r.embedding.shape[1] for r in splits["train"] if r.embedding is not None), 1)
    cfg = toy.config(variant, inv, phonetic_dim, seed)
    model, history = train.fit(AplModel(cfg), splits["train"], splits["dev"], inv)
    return {"variant": variant, "seed": seed, "history": history,
            "report": report_for(model, splits["test"], inv)}


def speaker_split(records: Sequence[corpus.UtteranceRecord], n_dev: int = 2, n_test: int = 2) -> corpus.SplitSpec:
    """Last ``n_test`` speakers (in sorted order) test, the ``n_dev`` before them dev."""
    speakers = sorted({r.speaker for r in records})
    if len(speakers) < n_dev + n_test + 1:
        raise corpus.CorpusError(f"{len(speakers)} speakers cannot fill a {n_dev}/{n_test} dev/test split")
    cut = len(speakers) - n_dev - n_test
    return corpus.SplitSpec(train=frozenset(speakers[:cut]), dev=frozenset(speakers[cut:cut + n_dev]),
                            test=frozenset(speakers[cut + n_dev:]))


def mean_rows(runs: Sequence[dict], variants: Sequence[str]) -> list[dict]:
    rows = []
    for variant in variants:
        vr = [scoring.table_row(variant, r["report"]) for r in runs if r["variant"] == variant]
        row = {"variant": variant}
        for col in scoring.TABLE_COLUMNS[1:]:
            vals = [x[col] for x in vr]
            row[col] = (sum(vals) / len(vals)) if all(isinstance(v, float) for v in vals) else scoring.UNDEFINED
        rows.append(row)
    return rows


def ablation_on(splits: dict, inv, variants: Sequence[str], seeds: Sequence[int],
                toy: ToyModel | None = None, progress=None) -> dict:
    """Train each variant per seed on fixed splits; score on test.

    Returns ``{"runs": [...], "rows": [mean table row per variant]}``.
    """
    toy = toy or ToyModel()
    runs = []
    for variant in variants:
        for seed in seeds:
            run = run_variant(variant, splits, inv, toy, seed)
            runs.append(run)
            if progress:
                progress(run)
    return {"runs": runs, "rows": mean_rows(runs, variants)}


def ablation(variants: Sequence[str], seeds: Sequence[int], synth: corpus.SynthConfig = STANDARD_SYNTH,
             split: corpus.SplitSpec = STANDARD_SPLIT, toy: ToyModel | None = None,
             corpus_seed: int = 0, progress=None) -> dict:
    """``ablation_on`` over a freshly synthesised corpus."""
    inv = phoneset.build_inventory(synth.inventory)
    splits = corpus.split_speakers(corpus.synth_corpus(synth, corpus_seed, inv), split)
    return ablation_on(splits, inv, variants, seeds, toy, progress)
