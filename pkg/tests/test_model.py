import numpy as np
import pytest

from aplmdd import corpus, ctc, phoneset, train
from aplmdd.model import AplConfig, AplModel, ModelError, make_batch, read_kv
from gradsuite import MODEL_CHECKS, tiny_batch, tiny_config


def small_config(variant="APL", **kw):
    base = dict(variant=variant, acoustic_dim=81, phonetic_dim=69, n_classes=69, conv_channels=2,
                rnn_hidden=4, ling_hidden=4, embed_dim=3, dropout=0.0, max_epochs=2)
    base.update(kw)
    return AplConfig(**base)


@pytest.fixture(scope="module")
def inv():
    return phoneset.build_inventory()


@pytest.fixture(scope="module")
def clean_records(inv):
    cfg = corpus.SynthConfig(n_utts=280, sub_rate=0.0, del_rate=0.0, noise_std=0.0, embed_noise_std=0.0)
    return corpus.synth_corpus(cfg, seed=1, inventory=inv)


@pytest.mark.parametrize("name", sorted(MODEL_CHECKS))
def test_model_gradients(name):
    worst = max(MODEL_CHECKS[name](seed) for seed in range(3))
    assert worst < 1e-4, f"{name}: {worst:.3g}"


# --- configuration ----------------------------------------------------------------------------

def test_defaults():
    cfg = AplConfig()
    assert (cfg.batch_size, cfg.max_epochs, cfg.acoustic_dim) == (64, 200, 81)
    assert (cfg.n_conv, cfg.conv_channels, cfg.n_rnn_acoustic, cfg.n_rnn_phonetic) == (2, 32, 4, 1)
    assert cfg.key_dim == cfg.query_dim == 512
    assert AplConfig(variant="AL").key_dim == 256


def test_config_text_round_trip():
    cfg = AplConfig(variant="PL", lr=0.01, cmvn=False, seed=9)
    assert AplConfig.from_mapping(read_kv(cfg.to_text())) == cfg


def test_config_rejects_unknown_keys_and_values():
    with pytest.raises(ModelError, match="unknown config keys"):
        AplConfig.from_mapping({"hidden": "3"})
    with pytest.raises(ModelError):
        AplConfig.from_mapping({"cmvn": "maybe"})
    with pytest.raises(ModelError):
        AplConfig(variant="Baseline-7")
    with pytest.raises(ModelError):
        read_kv("lr 0.1")


# --- shapes -----------------------------------------------------------------------------------

def test_acoustic_encoder_shapes():
    cfg = AplConfig(variant="AL", conv_channels=2, n_rnn_acoustic=1, dtype="float64")
    model = AplModel(cfg)
    H, L, _ = model.encode_acoustic(np.random.default_rng(0).standard_normal((1, 100, 81)), np.array([100]))
    assert H.shape == (1, 25, 256) and list(L) == [25]


@pytest.mark.parametrize("T", [4, 5, 8, 9, 37, 100])
def test_output_frames(T):
    assert AplConfig().out_frames(T) == -(-(-(-T // 2)) // 2)


@pytest.mark.parametrize("dim", [41, 144])
def test_phonetic_dims_accepted(dim):
    cfg = small_config("PL", phonetic_dim=dim)
    r = np.random.default_rng(0)
    batch = make_batch(cfg, None, [r.random((12, dim))], [[0, 1]])
    y, L, _, _ = AplModel(cfg).forward(batch)
    assert y.shape == (1, 3, 69) and list(L) == [3]


def test_paired_streams_share_output_frames():
    cfg = small_config("APL")
    r = np.random.default_rng(0)
    batch = make_batch(cfg, [r.random((11, 81))], [r.random((11, 69))], [[3]])
    model = AplModel(cfg)
    Ha, La, _ = model.encode_acoustic(batch.feats, batch.lengths)
    Hp, Lp, _ = model.encode_phonetic(batch.emb, batch.lengths)
    assert Ha.shape[:2] == Hp.shape[:2] and list(La) == list(Lp) == [3]


def test_frame_mismatch_rejected():
    cfg = small_config("APL")
    with pytest.raises(ModelError, match="frames"):
        make_batch(cfg, [np.zeros((10, 81))], [np.zeros((9, 69))], [[1]])


def test_short_input_rejected():
    with pytest.raises(ModelError, match="too short"):
        make_batch(small_config("AL"), [np.zeros((3, 81))], None, [[1]])


def test_empty_canonical_rejected():
    with pytest.raises(ModelError):
        make_batch(small_config("AL"), [np.zeros((8, 81))], None, [[]])


@pytest.mark.parametrize("N", [1, 12])
def test_linguistic_shapes(N):
    cfg = small_config("APL")
    model = AplModel(cfg)
    hk, hv, _ = model.encode_linguistic(np.arange(N)[None, :], np.array([N]))
    assert hk.shape == hv.shape == (1, N, cfg.key_dim)


def test_linguistic_encoding_depends_on_context():
    cfg = small_config("AL", dtype="float64")
    model = AplModel(cfg)
    ids = np.array([[5, 9, 2, 7]])
    perm = np.array([[9, 5, 2, 7]])
    hk, _, _ = model.encode_linguistic(ids, np.array([4]))
    hk2, _, _ = model.encode_linguistic(perm, np.array([4]))
    # same phone at position 2, different left context
    assert not np.allclose(hk[0, 2], hk2[0, 2])


# --- decoder ----------------------------------------------------------------------------------

def test_identical_keys_give_uniform_attention():
    cfg = tiny_config("AL")
    model = AplModel(cfg)
    r = np.random.default_rng(0)
    HK = np.repeat(r.standard_normal((1, 1, cfg.key_dim)), 5, axis=1)
    _, alpha, _ = model.decode(r.standard_normal((1, 4, 6)), None, HK, r.standard_normal((1, 5, cfg.key_dim)))
    np.testing.assert_allclose(alpha, 0.2, atol=1e-12)


def test_single_key_attends_fully():
    cfg = tiny_config("PL")
    model = AplModel(cfg)
    r = np.random.default_rng(0)
    HV = r.standard_normal((1, 1, cfg.key_dim))
    Hp = r.standard_normal((1, 3, 6))
    y, alpha, _ = model.decode(None, Hp, r.standard_normal((1, 1, 6)), HV)
    np.testing.assert_array_equal(alpha, 1.0)
    # context is the single value row at every frame
    u = np.concatenate([np.repeat(HV, 3, axis=1), Hp], axis=-1)
    z = u @ model.params["out/w"] + model.params["out/b"]
    np.testing.assert_allclose(y, z - np.log(np.exp(z).sum(-1, keepdims=True)), atol=1e-12)


@pytest.mark.parametrize("variant", ["AL", "PL", "APL", "baseline1"])
def test_posteriors_and_attention_normalised(variant):
    cfg = tiny_config(variant)
    batch = tiny_batch(cfg, 0)
    y, L, alpha, _ = AplModel(cfg).forward(batch)
    np.testing.assert_allclose(np.exp(y).sum(axis=-1), 1.0, atol=1e-6)
    assert y.shape == (2, 2, cfg.n_classes)
    if variant == "baseline1":
        assert alpha is None
    else:
        assert np.all(alpha >= 0)
        for b, n in enumerate(batch.canon_lengths):
            np.testing.assert_allclose(alpha[b, :, :n].sum(axis=-1), 1.0, atol=1e-6)
            assert np.all(alpha[b, :, n:] == 0)


def test_apl_with_silent_phonetic_branch_matches_al():
    r = np.random.default_rng(3)
    apl, al = AplModel(tiny_config("APL")), AplModel(tiny_config("AL"))
    W = 2 * apl.cfg.rnn_hidden
    Ha = r.standard_normal((2, 4, W))
    HK = r.standard_normal((2, 5, 2 * W))
    klen = np.array([5, 3])
    _, a_apl, _ = apl.decode(Ha, np.zeros_like(Ha), HK, r.standard_normal((2, 5, 2 * W)), klen)
    _, a_al, _ = al.decode(Ha, None, HK[..., :W], r.standard_normal((2, 5, W)), klen)
    np.testing.assert_allclose(a_apl, a_al, atol=1e-12)


def test_query_key_width_mismatch():
    model = AplModel(tiny_config("AL"))
    with pytest.raises(ModelError):
        model.decode(np.zeros((1, 2, 6)), None, np.zeros((1, 3, 5)), np.zeros((1, 3, 5)))


def test_missing_stream_rejected(clean_records, inv):
    cfg = small_config("AL")
    recs = [r.__class__(**{**r.__dict__, "features": None}) for r in clean_records[:2]]
    with pytest.raises(ModelError, match="acoustic"):
        train.predict(AplModel(cfg), recs, inv)


def test_unused_stream_is_ignored(clean_records, inv):
    cfg = small_config("AL")
    batch = train.records_batch(cfg, clean_records[:2], inv)
    assert batch.emb is None and batch.feats is not None


def test_padding_does_not_change_eval_outputs(clean_records, inv):
    cfg = small_config("APL", dtype="float64")
    model = AplModel(cfg)
    short = clean_records[0].__class__(**{**clean_records[0].__dict__,
                                          "features": clean_records[0].features[:40],
                                          "embedding": clean_records[0].embedding[:40]})
    alone, L1, _, _ = model.forward(train.records_batch(cfg, [short], inv, False))
    both, L2, _, _ = model.forward(train.records_batch(cfg, [clean_records[1], short], inv, False))
    np.testing.assert_allclose(both[1, :L1[0]], alone[0], atol=1e-10)


# --- training ---------------------------------------------------------------------------------

def test_train_step_decreases_loss(clean_records, inv):
    cfg = small_config("PL", rnn_hidden=8, lr=3e-3, dtype="float64")
    model = AplModel(cfg)
    opt = train.make_optimizer(cfg)
    batch = train.records_batch(cfg, clean_records[:16], inv)
    losses = [train.train_step(model, opt, batch).loss for _ in range(5)]
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def test_zero_learning_rate_freezes(clean_records, inv):
    cfg = small_config("APL", lr=0.0)
    model = AplModel(cfg)
    before = {k: v.copy() for k, v in model.params.items()}
    opt = train.make_optimizer(cfg)
    batch = train.records_batch(cfg, clean_records[:4], inv)
    losses = [train.train_step(model, opt, batch).loss for _ in range(3)]
    for k in before:
        np.testing.assert_array_equal(model.params[k], before[k])
    # dropout is off, so only batch-norm running statistics move
    assert losses[0] == losses[1] == losses[2]


def test_infeasible_utterances_are_skipped(inv):
    cfg = small_config("PL")
    batch = make_batch(cfg, None, [np.random.default_rng(0).random((8, 69))] * 2, [[1], [1]],
                       targets=[[1, 2, 3], [1]])
    res = train.train_step(AplModel(cfg), train.make_optimizer(cfg), batch)
    assert (res.used, res.skipped) == (1, 1)


def test_training_is_bit_reproducible(clean_records, inv):
    cfg = small_config("APL", max_epochs=2, dropout=0.2, batch_size=16)
    runs = [train.fit(AplModel(cfg), clean_records[:32], clean_records[200:208], inv)[1] for _ in range(2)]
    assert runs[0] == runs[1]


def test_zero_epochs(clean_records, inv):
    cfg = small_config("PL", max_epochs=0)
    model = AplModel(cfg)
    before = {k: v.copy() for k, v in model.params.items()}
    model, hist = train.fit(model, clean_records[:4], clean_records[4:6], inv)
    assert hist == []
    for k in before:
        np.testing.assert_array_equal(model.params[k], before[k])


def test_history_bounded_and_shaped(clean_records, inv):
    cfg = small_config("PL", max_epochs=3, patience=1, lr=0.0)
    _, hist = train.fit(AplModel(cfg), clean_records[:8], clean_records[8:10], inv)
    assert 1 <= len(hist) <= 3
    assert set(hist[0]) >= {"epoch", "train_loss", "dev_accuracy", "lr"}


def test_pl_learns_clean_corpus(clean_records, inv):
    """Regression floor on the clean toy corpus: dev accuracy >= 0.95 within 50 epochs."""
    cfg = AplConfig(variant="PL", phonetic_dim=len(inv), n_classes=len(inv), conv_channels=4, rnn_hidden=32,
                    ling_hidden=32, embed_dim=16, dropout=0.1, lr=3e-3, max_epochs=50)
    model, hist = train.fit(AplModel(cfg), clean_records[:200], clean_records[200:240], inv,
                            on_epoch=lambda m, e: e["dev_accuracy"] >= 0.95)
    best = max(h["dev_accuracy"] for h in hist)
    assert best >= 0.95, hist
    assert train.phone_accuracy(model, clean_records[200:240], inv) == best
    first = train.predict(model, clean_records[240:250], inv)
    assert train.predict(model, clean_records[240:250], inv) == first


def test_near_one_hot_path_decodes_perceived(clean_records, inv):
    for rec in clean_records[:30]:
        ids = inv.encode(rec.perceived)
        path = []
        for k in ids:
            path += [k, k, inv.blank_id]
        post = np.full((len(path), len(inv)), 1e-4)
        post[np.arange(len(path)), path] = 1.0
        post /= post.sum(axis=1, keepdims=True)
        assert inv.decode(ctc.beam_search(np.log(post), inv.blank_id, 10)) == list(rec.perceived)


# --- persistence ------------------------------------------------------------------------------

def test_checkpoint_gives_bit_identical_posteriors(tmp_path, clean_records, inv):
    cfg = small_config("APL", max_epochs=1, batch_size=8)
    model, _ = train.fit(AplModel(cfg), clean_records[:16], [], inv)
    batch = train.records_batch(cfg, clean_records[20:23], inv, False)
    y1 = model.forward(batch)[0]
    train.save_checkpoint(tmp_path / "m.ckpt", model, train.make_optimizer(cfg))
    y2 = train.load_checkpoint(tmp_path / "m.ckpt", cfg).forward(batch)[0]
    np.testing.assert_array_equal(y1, y2)


def test_checkpoint_shape_mismatch(tmp_path):
    train.save_checkpoint(tmp_path / "m.ckpt", AplModel(small_config("AL")))
    with pytest.raises(ModelError, match="shape"):
        train.load_checkpoint(tmp_path / "m.ckpt", small_config("AL", rnn_hidden=5))
