"""``apl-mdd`` command line: synth, train, infer, score, ablation, decode.

Stages talk only through files. Every command resolves its settings as
defaults < ``--config`` file < command-line flags, rejects unknown keys, and
writes the resolved settings to ``config.txt`` in the output directory.
Feeding that file back with ``--config`` reproduces the run.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import os

# thread caps must be in the environment before numpy loads its BLAS
_THREADS = os.environ.get("APL_MDD_THREADS", "")
if _THREADS.isdigit() and int(_THREADS) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _THREADS

import argparse  # noqa: E402
import dataclasses  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
import zlib  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import corpus, ctc, experiments, features, phoneset, scoring, train  # noqa: E402
from .matio import read_matrix  # noqa: E402
from .model import USES_PHONETIC, VARIANTS, AplConfig, AplModel, ModelError, read_kv  # noqa: E402
from .numcore import NonFiniteError  # noqa: E402

log = logging.getLogger("aplmdd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
PROVIDERS = ("file", "oracle-synthetic")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# --- settings ---------------------------------------------------------------------------------

def _fields(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


SYNTH_KEYS = {"seed": 0, **_fields(experiments.STANDARD_SYNTH), "n_dev_speakers": 2, "n_test_speakers": 2}

# acoustic_dim, phonetic_dim and n_classes of 0 mean "take from the data"
TRAIN_KEYS = {"manifest": "", "dev_manifest": "", "embeddings": "file", "oracle_sharpness": 4.0,
              "oracle_noise_std": 0.0, "inventory_checksum": "",
              **_fields(AplConfig()), "acoustic_dim": 0, "phonetic_dim": 0, "n_classes": 0}

INFER_KEYS = {"seed": 0, "checkpoint": "", "manifest": "", "beam_width": 0, "embeddings": "",
              "oracle_sharpness": -1.0, "oracle_noise_std": -1.0}

SCORE_KEYS = {"seed": 0, "manifest": "", "recognized": "", "name": "system"}

_TOY = {k: v for k, v in _fields(experiments.ToyModel()).items() if k != "extra"}
ABLATION_KEYS = {"seed": 0, "variants": "AL,PL,APL", "seeds": "0,1,2", "data_dir": "", "embeddings": "file",
                 "oracle_sharpness": 4.0, "oracle_noise_std": 0.0, **_TOY}

DECODE_KEYS = {"seed": 0, "posteriors": "", "blank": -1, "beam_width": 10, "domain": "log", "inventory": ""}

COMMANDS = {"synth": SYNTH_KEYS, "train": TRAIN_KEYS, "infer": INFER_KEYS, "score": SCORE_KEYS,
            "ablation": ABLATION_KEYS, "decode": DECODE_KEYS}

_BOOLS = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


def _coerce(key: str, raw, default):
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            return _BOOLS[text.lower()]
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except (KeyError, ValueError):
        raise UsageError(f"{key}: cannot read {text!r} as {type(default).__name__}") from None
    return text


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def resolve(defaults: dict, file_values: dict, cli_values: dict) -> dict:
    """defaults < config file < command line; unknown keys are errors."""
    out = dict(defaults)
    for source, values in (("config file", file_values), ("command line", cli_values)):
        unknown = sorted(set(values) - set(defaults))
        if unknown:
            raise UsageError(f"unknown {source} keys: {', '.join(unknown)}")
        for k, v in values.items():
            out[k] = _coerce(k, v, defaults[k])
    return out


def config_text(cfg: dict) -> str:
    return "".join(f"{k}={format_value(v)}\n" for k, v in cfg.items())


def _abs(p: str) -> str:
    return str(Path(p).resolve()) if p else ""


# --- shared helpers ---------------------------------------------------------------------------

def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if not cfg[k]]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _inventory_beside(path: Path) -> tuple[phoneset.PhoneInventory | None, Path]:
    inv_path = path.parent / "inventory.txt"
    if not inv_path.exists():
        return None, inv_path
    return phoneset.PhoneInventory.from_text(inv_path.read_text(encoding="utf-8")), inv_path


def _oracle_rng(seed: int, utt_id: str) -> np.random.Generator:
    # keyed by utterance id so any subset of a corpus sees the same embeddings
    return np.random.default_rng([seed, zlib.crc32(utt_id.encode("utf-8"))])


def load_records(path: str, inv: phoneset.PhoneInventory, provider: str, sharpness: float,
                 noise_std: float, seed: int) -> list[corpus.UtteranceRecord]:
    """Manifest records with features in memory and embeddings from ``provider``."""
    if provider not in PROVIDERS:
        raise UsageError(f"embeddings provider must be one of {PROVIDERS}, got {provider!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    out = []
    for rec in corpus.load_manifest(path):
        feats = rec.features
        if feats is None:
            feats = features.wav_features(path.parent / rec.audio_path)
        emb = None
        if provider == "oracle-synthetic":
            if not rec.segments:
                raise DataError(f"{rec.id}: oracle-synthetic embeddings need timed segments")
            emb = corpus.oracle_embedding(rec, inv, len(feats), sharpness, noise_std,
                                          _oracle_rng(seed, rec.id))
        out.append(corpus.with_features(rec, feats, emb))
    return out


def _check_embeddings(records, variant: str, where: str) -> None:
    if not USES_PHONETIC[variant]:
        return
    lacking = [r.id for r in records if r.embedding is None]
    if lacking:
        shown = ", ".join(lacking[:5]) + (" ..." if len(lacking) > 5 else "")
        raise DataError(f"variant {variant} needs phonetic embeddings; {len(lacking)} utterance(s) in "
                        f"{where} have none ({shown}); use --embeddings oracle-synthetic or add embedding_path")


def _dim(records, attr: str, where: str) -> int | None:
    dims = {getattr(r, attr).shape[1] for r in records if getattr(r, attr) is not None}
    if len(dims) > 1:
        raise DataError(f"{where}: inconsistent {attr} widths {sorted(dims)}")
    return dims.pop() if dims else None


def _write(out: Path, name: str, text: str) -> Path:
    p = out / name
    p.write_text(text, encoding="utf-8")
    return p


# --- commands ---------------------------------------------------------------------------------

def cmd_synth(cfg: dict, out: Path) -> dict:
    scfg = corpus.SynthConfig(**{k: cfg[k] for k in _fields(experiments.STANDARD_SYNTH)})
    try:
        inv = phoneset.build_inventory(scfg.inventory)
        records = corpus.synth_corpus(scfg, cfg["seed"], inv)
    except (corpus.CorpusError, phoneset.PhoneError) as e:
        raise UsageError(str(e)) from None
    _write(out, "config.txt", config_text(cfg))
    _write(out, "inventory.txt", inv.to_text())
    corpus.save_manifest(records, out / "manifest.jsonl")
    stats = corpus.corpus_stats(records)
    stats["injected"] = {"sub_rate": scfg.sub_rate, "del_rate": scfg.del_rate, "ins_rate": scfg.ins_rate}
    try:
        spec = experiments.speaker_split(records, cfg["n_dev_speakers"], cfg["n_test_speakers"])
    except corpus.CorpusError as e:
        log.warning("no train/dev/test manifests written: %s", e)
    else:
        # reload so split manifests reference the matrices already on disk
        on_disk = corpus.load_manifest(out / "manifest.jsonl", load_matrices=False)
        splits = corpus.split_speakers(on_disk, spec)
        for name, subset in splits.items():
            corpus.save_manifest(subset, out / f"{name}.jsonl")
        stats["splits"] = {name: len(subset) for name, subset in splits.items()}
    _write(out, "stats.json", json.dumps(stats, indent=2) + "\n")
    return stats


def _train_config(cfg: dict, acoustic_dim: int, phonetic_dim: int, n_classes: int) -> AplConfig:
    derived = {"acoustic_dim": acoustic_dim, "phonetic_dim": phonetic_dim, "n_classes": n_classes}
    for key, value in derived.items():
        if cfg[key] and cfg[key] != value:
            raise UsageError(f"{key}={cfg[key]} conflicts with the data ({value})")
        cfg[key] = value
    values = {k: cfg[k] for k in _fields(AplConfig())}
    try:
        acfg = AplConfig.from_mapping(values)
        train.make_optimizer(acfg)
    except (ModelError, ValueError) as e:
        raise UsageError(str(e)) from None
    if acfg.max_epochs < 0 or acfg.batch_size < 1 or acfg.beam_width < 1 or acfg.patience < 0:
        raise UsageError("need max_epochs >= 0, batch_size >= 1, beam_width >= 1, patience >= 0")
    if not 0 <= acfg.dropout < 1:
        raise UsageError("dropout must lie in [0, 1)")
    return acfg


def cmd_train(cfg: dict, out: Path) -> dict:
    _require(cfg, "manifest")
    cfg["manifest"], cfg["dev_manifest"] = _abs(cfg["manifest"]), _abs(cfg["dev_manifest"])
    if cfg["embeddings"] not in PROVIDERS:
        raise UsageError(f"embeddings provider must be one of {PROVIDERS}, got {cfg['embeddings']!r}")
    manifest = Path(cfg["manifest"])
    inv, inv_path = _inventory_beside(manifest)
    if inv is None:
        log.warning("no %s; using the default inventory", inv_path)
        inv = phoneset.build_inventory()
    if cfg["inventory_checksum"] and cfg["inventory_checksum"] != inv.checksum():
        raise DataError(f"inventory checksum mismatch: config {cfg['inventory_checksum']} vs "
                        f"{inv_path} {inv.checksum()}")
    cfg["inventory_checksum"] = inv.checksum()

    load = dict(inv=inv, provider=cfg["embeddings"], sharpness=cfg["oracle_sharpness"],
                noise_std=cfg["oracle_noise_std"], seed=cfg["seed"])
    train_recs = load_records(cfg["manifest"], **load)
    dev_recs = load_records(cfg["dev_manifest"], **load) if cfg["dev_manifest"] else []
    if not train_recs:
        raise DataError(f"{manifest}: no training utterances")
    everything = train_recs + dev_recs
    acoustic_dim = _dim(everything, "features", "manifests")
    phonetic_dim = _dim(everything, "embedding", "manifests") or cfg["phonetic_dim"] or 1
    acfg = _train_config(cfg, acoustic_dim, phonetic_dim, len(inv))
    _check_embeddings(train_recs, acfg.variant, "the training manifest")
    _check_embeddings(dev_recs, acfg.variant, "the dev manifest")

    infeasible = [r.id for r in train_recs
                  if ctc.required_frames(inv.encode(r.perceived)) > acfg.out_frames(len(r.features))]
    if infeasible:
        log.warning("%d of %d training utterances are too short for their targets and will be skipped",
                    len(infeasible), len(train_recs))

    _write(out, "config.txt", config_text(cfg))
    _write(out, "inventory.txt", inv.to_text())
    model = AplModel(acfg)
    opt = train.make_optimizer(acfg)
    log_path = out / "train_log.jsonl"
    log_path.write_text("", encoding="utf-8")

    def on_epoch(m, entry):
        with open(log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry) + "\n")
        train.save_checkpoint(out / "final.ckpt", m, opt)

    model, history = train.fit(model, train_recs, dev_recs, inv, opt, on_epoch)
    if not history:
        train.save_checkpoint(out / "final.ckpt", model, opt)
    train.save_checkpoint(out / "best.ckpt", model)
    devs = [h["dev_accuracy"] for h in history if h["dev_accuracy"] is not None]
    return {"epochs": len(history), "best_dev_accuracy": max(devs) if devs else None,
            "infeasible_utterances": len(infeasible), "skipped_updates": sum(h.get("skipped", 0) for h in history)}


def _model_from_checkpoint(ckpt: Path):
    cfg_path = ckpt.parent / "config.txt"
    if not ckpt.exists():
        raise DataError(f"checkpoint not found: {ckpt}")
    if not cfg_path.exists():
        raise DataError(f"no config.txt beside checkpoint {ckpt}")
    saved = read_kv(cfg_path.read_text(encoding="utf-8"))
    try:
        train_cfg = resolve(TRAIN_KEYS, saved, {})
        acfg = AplConfig.from_mapping({k: train_cfg[k] for k in _fields(AplConfig())})
    except (UsageError, ModelError) as e:
        raise DataError(f"{cfg_path}: {e}") from None
    return train_cfg, acfg


def cmd_infer(cfg: dict, out: Path) -> dict:
    _require(cfg, "checkpoint", "manifest")
    cfg["checkpoint"], cfg["manifest"] = _abs(cfg["checkpoint"]), _abs(cfg["manifest"])
    ckpt, manifest = Path(cfg["checkpoint"]), Path(cfg["manifest"])
    train_cfg, acfg = _model_from_checkpoint(ckpt)
    model_inv, _ = _inventory_beside(ckpt)
    inv, inv_path = _inventory_beside(manifest)
    if inv is None:
        log.warning("no %s; assuming the checkpoint's inventory", inv_path)
        inv = model_inv
    if inv is None:
        raise DataError(f"no inventory.txt beside {manifest} or {ckpt}")
    want = train_cfg["inventory_checksum"]
    if want and inv.checksum() != want:
        raise DataError(f"inventory checksum mismatch: manifest inventory {inv_path} has {inv.checksum()}, "
                        f"checkpoint {ckpt} was trained with {want}")
    for key in ("embeddings", "oracle_sharpness", "oracle_noise_std"):
        if cfg[key] in ("", -1.0):
            cfg[key] = train_cfg[key]
    if cfg["beam_width"] < 0:
        raise UsageError("beam_width must be >= 1 (0 means the model's setting)")
    cfg["beam_width"] = cfg["beam_width"] or acfg.beam_width
    _write(out, "config.txt", config_text(cfg))

    records = load_records(cfg["manifest"], inv, cfg["embeddings"], cfg["oracle_sharpness"],
                           cfg["oracle_noise_std"], cfg["seed"])
    model = train.load_checkpoint(ckpt, acfg)
    if records:
        _check_embeddings(records, acfg.variant, str(manifest))
        width = _dim(records, "features", str(manifest))
        if width != acfg.acoustic_dim:
            raise DataError(f"{manifest}: features have {width} columns, model expects {acfg.acoustic_dim}")
    hyps = train.predict(model, records, inv, cfg["beam_width"])
    lines = "".join(f"{r.id}\t{' '.join(h)}\n" for r, h in zip(records, hyps))
    _write(out, "recognized.txt", lines)
    return {"utterances": len(records), "output": str(out / "recognized.txt")}


def read_recognized(path: Path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        utt, _, phones = raw.partition("\t")
        utt = utt.strip()
        if utt in out:
            raise DataError(f"{path}:{lineno}: duplicate id {utt!r}")
        out[utt] = phones.split()
    return out


def cmd_score(cfg: dict, out: Path) -> dict:
    _require(cfg, "manifest", "recognized")
    cfg["manifest"], cfg["recognized"] = _abs(cfg["manifest"]), _abs(cfg["recognized"])
    rec_path = Path(cfg["recognized"])
    if not rec_path.exists():
        raise DataError(f"recognized-sequence file not found: {rec_path}")
    if not Path(cfg["manifest"]).exists():
        raise DataError(f"manifest not found: {cfg['manifest']}")
    records = corpus.load_manifest(cfg["manifest"], load_matrices=False)
    hyps = read_recognized(rec_path)
    ids = [r.id for r in records]
    missing = [i for i in ids if i not in hyps]
    unknown = sorted(set(hyps) - set(ids))
    if missing or unknown:
        parts = []
        if unknown:
            parts.append(f"{len(unknown)} id(s) not in the manifest: {', '.join(unknown)}")
        if missing:
            parts.append(f"{len(missing)} manifest id(s) missing from {rec_path.name}: {', '.join(missing)}")
        raise DataError("id mismatch; " + "; ".join(parts))
    _write(out, "config.txt", config_text(cfg))
    report = scoring.corpus_report((r.id, r.canonical, r.perceived, hyps[r.id]) for r in records)
    _write(out, "report.json", scoring.report_json(report))
    table = scoring.format_table([scoring.table_row(cfg["name"], report)])
    _write(out, "table.txt", table)
    return {"table": table}


def _split_list(text: str, key: str, cast=str) -> list:
    try:
        items = [cast(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{key}: expected a comma-separated list, got {text!r}") from None
    if not items:
        raise UsageError(f"{key}: empty list")
    return items


def cmd_ablation(cfg: dict, out: Path) -> dict:
    variants = _split_list(cfg["variants"], "variants")
    bad = [v for v in variants if v not in VARIANTS]
    if bad:
        raise UsageError(f"unknown variant(s): {', '.join(bad)}")
    seeds = _split_list(cfg["seeds"], "seeds", int)
    toy = experiments.ToyModel(**{k: cfg[k] for k in _TOY})
    if cfg["data_dir"]:
        cfg["data_dir"] = _abs(cfg["data_dir"])
        root = Path(cfg["data_dir"])
        inv, inv_path = _inventory_beside(root / "train.jsonl")
        if inv is None:
            raise DataError(f"no inventory.txt in {root}")
        splits = {name: load_records(str(root / f"{name}.jsonl"), inv, cfg["embeddings"], cfg["oracle_sharpness"],
                                     cfg["oracle_noise_std"], cfg["seed"]) for name in ("train", "dev", "test")}
        for v in variants:
            _check_embeddings(splits["train"] + splits["test"], v, str(root))
    else:
        inv = phoneset.build_inventory(experiments.STANDARD_SYNTH.inventory)
        records = corpus.synth_corpus(experiments.STANDARD_SYNTH, cfg["seed"], inv)
        splits = corpus.split_speakers(records, experiments.speaker_split(records))
    _write(out, "config.txt", config_text(cfg))

    def progress(run):
        mdd = run["report"]["aggregate"]["mdd"]
        log.info("%s seed %d: F %s, accuracy %s", run["variant"], run["seed"], mdd["f_measure"],
                 run["report"]["aggregate"]["edit"]["accuracy"])

    result = experiments.ablation_on(splits, inv, variants, seeds, toy, progress)
    table = scoring.format_table(result["rows"])
    runs = [{"variant": r["variant"], "seed": r["seed"], "history": r["history"],
             "aggregate": r["report"]["aggregate"]} for r in result["runs"]]
    _write(out, "ablation.json", json.dumps({"runs": runs, "rows": result["rows"]}, indent=2) + "\n")
    _write(out, "table.txt", table)
    return {"table": table}


def cmd_decode(cfg: dict, out: Path | None) -> dict:
    _require(cfg, "posteriors")
    mat = read_matrix(cfg["posteriors"]).astype(np.float64)
    if cfg["domain"] not in ("log", "prob"):
        raise UsageError("domain must be 'log' or 'prob'")
    if cfg["domain"] == "prob":
        with np.errstate(divide="ignore"):
            mat = np.log(mat)
    C = mat.shape[1]
    blank = cfg["blank"] if cfg["blank"] >= 0 else C - 1
    if blank >= C:
        raise UsageError(f"blank {blank} out of range for {C} classes")
    ids = ctc.beam_search(mat, blank, cfg["beam_width"])
    labels = [str(i) for i in ids]
    if cfg["inventory"]:
        inv = phoneset.PhoneInventory.from_text(Path(cfg["inventory"]).read_text(encoding="utf-8"))
        if len(inv) != C:
            raise DataError(f"inventory has {len(inv)} classes, posteriors have {C}")
        labels = inv.decode(ids)
    line = " ".join(labels)
    if out is not None:
        _write(out, "config.txt", config_text(cfg))
        _write(out, "decoded.txt", line + "\n")
    return {"decoded": line}


HANDLERS = {"synth": cmd_synth, "train": cmd_train, "infer": cmd_infer, "score": cmd_score,
            "ablation": cmd_ablation, "decode": cmd_decode}

HELP = {
    "synth": "generate a synthetic L2 corpus (manifests, APLMAT1 features and embeddings)",
    "train": "train one model variant with CTC",
    "infer": "beam-search decode a manifest with a trained checkpoint",
    "score": "score recognized sequences against a manifest",
    "ablation": "train and score several variants over several seeds",
    "decode": "beam-search decode a single APLMAT1 posterior matrix",
}


# --- argument parsing -------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _globals(parser: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    parser.add_argument("--config", default=s, help="key=value settings file")
    parser.add_argument("--seed", default=s, help="global random seed")
    parser.add_argument("--out", default=s, help="existing output directory")
    parser.add_argument("--verbosity", type=int, default=s, help="0 quiet, 1 info (default), 2 debug")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="apl-mdd", description="Mispronunciation detection and diagnosis toolkit.")
    _globals(parser)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, keys in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        _globals(p)
        for key, default in keys.items():
            if key == "seed":
                continue
            flag = "--" + key.replace("_", "-")
            if key == "embeddings" and name != "infer":
                p.add_argument(flag, dest=key, default=argparse.SUPPRESS, choices=PROVIDERS)
            else:
                p.add_argument(flag, dest=key, default=argparse.SUPPRESS,
                               help=f"default: {format_value(default) or 'unset'}")
    return parser


def _setup_logging(level: int) -> None:
    levels = {0: logging.WARNING, 1: logging.INFO}
    log.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(levels.get(level, logging.DEBUG))
    log.propagate = False


def run(argv: list[str] | None = None) -> dict:
    """Parse, resolve and execute; raises on failure. Returns the command summary."""
    if os.environ.get("APL_MDD_THREADS") and not (_THREADS.isdigit() and int(_THREADS) > 0):
        raise UsageError(f"APL_MDD_THREADS must be a positive integer, got {_THREADS!r}")
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    _setup_logging(int(args.pop("verbosity", 1)))
    config_path = args.pop("config", None)
    out = args.pop("out", None)
    file_values = {}
    if config_path:
        try:
            file_values = read_kv(Path(config_path).read_text(encoding="utf-8"))
        except OSError as e:
            raise UsageError(f"cannot read config file: {e}") from None
        except ModelError as e:
            raise UsageError(f"{config_path}: {e}") from None
    cfg = resolve(COMMANDS[command], file_values, args)
    if out is None:
        if command != "decode":
            raise UsageError(f"{command} needs --out DIR")
    else:
        out = Path(out)
        if not out.is_dir():
            raise DataError(f"output directory does not exist: {out}")
        if not os.access(out, os.W_OK):
            raise DataError(f"output directory is not writable: {out}")
    return HANDLERS[command](cfg, out)


def main(argv: list[str] | None = None) -> int:
    try:
        summary = run(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (train.NumericError, NonFiniteError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ValueError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    for key in ("table", "decoded"):
        if key in summary:
            print(summary.pop(key).rstrip("\n"))
    if summary:
        print(json.dumps(summary, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
