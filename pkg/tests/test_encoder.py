import numpy as np
import pytest

from noisyre import autodiff as ad
from noisyre.data import Instance, Vocabulary, build_vocabulary
from noisyre.encoder import (EncoderConfig, InstanceRejected, convolve, embed, encode, encode_batch,
                             init_encoder_params, piecewise_max_pool, pooled_batch, prepare,
                             relative_positions)


def sentence(n=8, head=(1, 2), tail=(5, 6)):
    return Instance(tuple(f"t{i}" for i in range(n)), head, tail, "h", "t", "NA")


def setup(K=4, **kw):
    cfg = EncoderConfig(K=K, filters=kw.pop("filters", 6), word_dim=kw.pop("word_dim", 5),
                        position_dim=kw.pop("position_dim", 2), **kw)
    vocab = build_vocabulary([sentence(12)], cfg.word_dim, seed=1)
    return cfg, vocab, init_encoder_params(cfg, vocab, seed=2)


def naive_conv(x, filters, bias):
    m, l, _ = filters.shape
    T = x.shape[0] - l + 1
    out = np.zeros((m, T))
    for t in range(m):
        for i in range(T):
            acc = bias[t]
            for a in range(l):
                for b in range(x.shape[1]):
                    acc += filters[t, a, b] * x[i + a, b]
            out[t, i] = acc
    return out


def test_relative_position_examples():
    inst = Instance(tuple("abcdefgh"), (2, 3), (6, 7), "h", "t", "NA")
    head, tail = relative_positions(inst, 100)
    assert head[2] - 100 == 0
    assert head[5] - 100 == 3
    long = Instance(tuple(["w"] * 300), (0, 1), (299, 300), "h", "t", "NA")
    head, tail = relative_positions(long, 100)
    assert head[250] == 200 and tail[0] == 0
    assert head.min() >= 0 and head.max() <= 200


def test_config_dimensions():
    cfg = EncoderConfig(K=53)
    assert cfg.input_dim == 60
    assert cfg.pooled_dim == 690


@pytest.mark.parametrize("kwargs", [{"window": 0}, {"filters": 0}, {"max_len": 2}, {"position_clip": 0},
                                    {"dropout_rate": 1.0}, {"K": 1}])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        EncoderConfig(**{"K": 3, **kwargs})


def test_embed_rows_concatenate_word_and_positions():
    cfg, vocab, params = setup(word_dim=50, position_dim=5)
    inst = sentence()
    x = embed(inst, vocab, params, cfg)
    assert x.shape == (8, 60)
    hp, tp = relative_positions(inst, cfg.position_clip)
    for i, tok in enumerate(inst.tokens):
        np.testing.assert_array_equal(x[i, :50], vocab.embeddings[vocab.index[tok]])
        np.testing.assert_array_equal(x[i, 50:55], params["head_position"].data[hp[i]])
        np.testing.assert_array_equal(x[i, 55:], params["tail_position"].data[tp[i]])


def test_embed_unknown_tokens_share_word_part():
    cfg, vocab, params = setup()
    inst = Instance(("zz1", "zz2", "zz3", "zz4"), (0, 1), (3, 4), "h", "t", "NA")
    x = embed(inst, vocab, params, cfg)
    for row in x:
        np.testing.assert_array_equal(row[:5], vocab.embeddings[Vocabulary.UNK_INDEX])
    assert len({tuple(r[5:]) for r in x}) == 4


def test_embed_shortest_sentence():
    # two distinct entity spans need at least two tokens
    cfg, vocab, params = setup()
    x = embed(Instance(("t0", "t1"), (0, 1), (1, 2), "h", "t", "NA"), vocab, params, cfg)
    assert x.shape == (2, cfg.input_dim)


def test_truncation_keeps_or_rejects():
    cfg, vocab, params = setup(max_len=6, position_clip=6)
    assert embed(sentence(10, (0, 1), (4, 5)), vocab, params, cfg).shape == (6, cfg.input_dim)
    with pytest.raises(InstanceRejected):
        prepare(sentence(10, (0, 1), (8, 9)), vocab, cfg)


def test_convolve_ones():
    out = convolve(np.ones((5, 2)), np.ones((1, 3, 2)), np.zeros(1))
    np.testing.assert_array_equal(out, np.full((1, 3), 6.0))


def test_convolve_zero_filter_gives_bias():
    out = convolve(np.random.default_rng(0).normal(size=(6, 4)), np.zeros((2, 3, 4)), np.array([0.5, -1.0]))
    np.testing.assert_array_equal(out, [[0.5] * 4, [-1.0] * 4])


def test_convolve_matches_naive_loop():
    rng = np.random.default_rng(5)
    for _ in range(50):
        l, d, m = int(rng.integers(1, 5)), int(rng.integers(1, 7)), int(rng.integers(1, 5))
        x = rng.normal(size=(int(rng.integers(l, 15)), d))
        f, b = rng.normal(size=(m, l, d)), rng.normal(size=m)
        np.testing.assert_allclose(convolve(x, f, b), naive_conv(x, f, b), rtol=0, atol=1e-12)


def test_pool_segment_maxima():
    c = np.array([[1.0, 5.0, 2.0, 4.0, 3.0]])
    np.testing.assert_array_equal(piecewise_max_pool(c, 1, 3), [5.0, 4.0, 3.0])


def test_pool_empty_middle():
    c = np.array([[1.0, 5.0, 2.0, 4.0, 3.0]])
    np.testing.assert_array_equal(piecewise_max_pool(c, 2, 2), [5.0, 0.0, 4.0])


def test_pool_single_segment():
    c = np.array([[-1.0, -5.0, -2.0]])
    np.testing.assert_array_equal(piecewise_max_pool(c, 2, 2), [-1.0, 0.0, 0.0])


def test_pool_interleaves_filters():
    c = np.array([[1.0, 2.0, 3.0], [6.0, 5.0, 4.0]])
    np.testing.assert_array_equal(piecewise_max_pool(c, 0, 1), [1.0, 2.0, 3.0, 6.0, 5.0, 4.0])


def test_encode_shape_and_determinism():
    cfg, vocab, params = setup(K=7)
    inst = sentence()
    h = encode(inst, vocab, params, cfg)
    assert h.shape == (7,)
    np.testing.assert_array_equal(h, encode(inst, vocab, params, cfg))
    trained = encode(inst, vocab, params, cfg, train_mode=True, seed=3)
    np.testing.assert_array_equal(trained, encode(inst, vocab, params, cfg, train_mode=True, seed=3))
    assert not np.array_equal(trained, h)


def test_encode_matches_manual_pipeline():
    cfg, vocab, params = setup()
    inst = sentence()
    x = embed(inst, vocab, params, cfg)
    c = naive_conv(x, params["filters"].data, params["filter_bias"].data)
    # head ends at token 1, tail at token 5
    pooled = np.tanh(piecewise_max_pool(c, 1, 5))
    expected = params["projection"].data @ pooled + params["projection_bias"].data
    np.testing.assert_allclose(encode(inst, vocab, params, cfg), expected, rtol=0, atol=1e-12)


def test_batching_does_not_change_logits():
    cfg, vocab, params = setup()
    insts = [sentence(2, (0, 1), (1, 2)), sentence(12, (3, 5), (0, 1)), sentence(5, (4, 5), (0, 2))]
    batch = encode_batch([prepare(i, vocab, cfg) for i in insts], params).data
    for row, inst in zip(batch, insts):
        np.testing.assert_allclose(row, encode(inst, vocab, params, cfg), rtol=0, atol=1e-13)


def test_pooled_size_and_tanh_range():
    cfg, vocab, params = setup(filters=230, word_dim=50, position_dim=5)
    pooled = pooled_batch([prepare(sentence(), vocab, cfg)], params).data
    assert pooled.shape == (1, 690)
    assert np.all(np.abs(pooled) < 1)


def test_adjacent_entities_pool_to_zero():
    # both boundaries clamp to the last window position, so the middle piece is empty
    cfg, vocab, params = setup()
    prepared = prepare(sentence(8, (6, 7), (7, 8)), vocab, cfg)
    assert prepared.boundaries == (5, 5)
    pooled = pooled_batch([prepared], params).data[0].reshape(-1, 3)
    assert np.all(pooled[:, 1] == 0.0) and np.all(pooled[:, 2] == 0.0)


def test_adjacent_entities_mid_sentence_keep_tail_in_middle():
    cfg, vocab, params = setup()
    assert prepare(sentence(8, (2, 3), (3, 4)), vocab, cfg).boundaries == (2, 3)


def test_filter_permutation_permutes_triples():
    cfg, vocab, params = setup()
    prepared = [prepare(sentence(), vocab, cfg)]
    base = pooled_batch(prepared, params).data[0].reshape(-1, 3)
    perm = np.random.default_rng(0).permutation(cfg.filters)
    shuffled = params.copy()
    shuffled.set_value("filters", params["filters"].data[perm])
    shuffled.set_value("filter_bias", params["filter_bias"].data[perm])
    np.testing.assert_array_equal(pooled_batch(prepared, shuffled).data[0].reshape(-1, 3), base[perm])


def test_encoder_gradients_match_finite_differences():
    cfg, vocab, params = setup(K=3, filters=3, word_dim=3, position_dim=2, position_clip=12, max_len=12)
    prepared = [prepare(sentence(6, (0, 1), (4, 5)), vocab, cfg), prepare(sentence(9), vocab, cfg)]
    mask = ad.dropout_mask((2, 9), 0.5, np.random.default_rng(0))
    targets = np.array([0, 2])

    def loss(p):
        h = encode_batch(prepared, p, 0.5, True, dropout_mask=mask)
        return -ad.total(ad.pick(h, targets) - ad.logsumexp(h))

    report = ad.gradient_check(loss, params, max_elements=40)
    assert not report.flagged, report.errors
