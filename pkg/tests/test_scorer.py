import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import mk, stacked
from tocextract.context import extract_subtree
from tocextract.oracles import gradient_check
from tocextract.scorer import (
    CHECKPOINT_VERSION,
    Batch,
    CheckpointError,
    CheckpointVersionError,
    ConfigError,
    Op,
    ScorerConfig,
    TrainingError,
    cross_entropy,
    encode_node,
    encode_sequence,
    forward,
    gnn_forward,
    init_params,
    load_params,
    loss_and_grad,
    node_inputs,
    predict,
    save_params,
    score_ops,
)
from tocextract.scorer import layers
from tocextract.scorer.model import default_embedder, softmax, transform_node_features
from tocextract.tree import build_tree

PAGE = [(612.0, 792.0)]
CFG = ScorerConfig(d_h=6, heads=2, n_d=2, text_buckets=8)


def small_params(seed=0, cfg=CFG, scale=0.3):
    p = init_params(cfg, seed)
    rng = np.random.default_rng(seed + 100)
    for v in p.arrays.values():
        v += rng.normal(0.0, scale, v.shape)
    return p


def graph_and_inputs(sizes, center, params, n_d=2, texts=None):
    blocks = stacked(sizes)
    if texts:
        blocks = [mk(b.id, b.size, y=b.bbox[1], text=t) for b, t in zip(blocks, texts)]
    tree = build_tree(blocks)
    g = extract_subtree(tree, center, n_d=n_d, page_dims=PAGE)
    emb = default_embedder(params)
    x = node_inputs(g, np.stack([emb(tree.blocks[i].text) for i in g.nodes]))
    return tree, g, x


# -- encode_node ----------------------------------------------------------------


def test_encode_node_zero_weights():
    p = init_params(CFG)
    for v in p.arrays.values():
        v[...] = 0.0
    out = encode_node(np.ones(CFG.text_dim), np.ones(19), p)
    assert out.shape == (6,) and not out.any()


def test_encode_node_hand_composed():
    p = small_params(1)
    t, f = np.linspace(0, 1, CFG.text_dim), np.arange(19.0)
    x = np.concatenate([t, transform_node_features(f)])
    expect = p["mlp.W2"] @ np.tanh(p["mlp.W1"] @ x + p["mlp.b1"]) + p["mlp.b2"]
    np.testing.assert_allclose(encode_node(t, f, p), expect)
    np.testing.assert_array_equal(encode_node(t, f, p), encode_node(t, f, p))


def test_encode_node_dimension_mismatch():
    with pytest.raises(ConfigError):
        encode_node(np.ones(3), np.ones(19), init_params(CFG))


# -- encode_sequence -------------------------------------------------------------


def gru_step(x, h, W_ih, W_hh, b_ih, b_hh):
    d = len(h)
    gi, gh = W_ih @ x + b_ih, W_hh @ h + b_hh
    sig = lambda a: 1 / (1 + np.exp(-a))
    r = sig(gi[:d] + gh[:d])
    z = sig(gi[d:2 * d] + gh[d:2 * d])
    n = np.tanh(gi[2 * d:] + r * gh[2 * d:])
    return (1 - z) * n + z * h


def test_length_one_sequence():
    p = small_params(2)
    _, g, _ = graph_and_inputs([10], 0, p)
    b = np.random.default_rng(0).normal(size=(1, 6))
    v = encode_sequence(g, b, p)
    hf = gru_step(b[0], np.zeros(6), *(p[f"gru.fwd.{k}"] for k in ("W_ih", "W_hh", "b_ih", "b_hh")))
    hb = gru_step(b[0], np.zeros(6), *(p[f"gru.bwd.{k}"] for k in ("W_ih", "W_hh", "b_ih", "b_hh")))
    np.testing.assert_allclose(v[0], p["gru.W_p"] @ np.concatenate([hf, hb]) + p["gru.b_p"])


def test_sequence_matches_stepwise_reference():
    p = small_params(3)
    _, g, _ = graph_and_inputs([20, 14, 10, 10, 14], 1, p)
    b = np.random.default_rng(1).normal(size=(len(g.nodes), 6))
    v = encode_sequence(g, b, p)
    w = lambda d: [p[f"gru.{d}.{k}"] for k in ("W_ih", "W_hh", "b_ih", "b_hh")]
    hf, fw = np.zeros(6), []
    for x in b:
        hf = gru_step(x, hf, *w("fwd"))
        fw.append(hf)
    hb, bw = np.zeros(6), []
    for x in b[::-1]:
        hb = gru_step(x, hb, *w("bwd"))
        bw.append(hb)
    bw = bw[::-1]
    for k in range(len(b)):
        np.testing.assert_allclose(v[k], p["gru.W_p"] @ np.concatenate([fw[k], bw[k]]) + p["gru.b_p"])


def _bigru_cat(p, b):
    n = len(b)
    seq = np.arange(n)[None]
    return layers.bigru_forward(p.arrays, b, seq, seq[:, ::-1].copy(), np.array([n]))[1][4]


def test_reversal_swaps_streams_with_tied_weights():
    p = small_params(4)
    for k in ("W_ih", "W_hh", "b_ih", "b_hh"):
        p.arrays[f"gru.bwd.{k}"] = p.arrays[f"gru.fwd.{k}"].copy()
    b = np.random.default_rng(2).normal(size=(5, 6))
    cat = _bigru_cat(p, b)
    cat_rev = _bigru_cat(p, b[::-1].copy())
    np.testing.assert_allclose(cat_rev[::-1], np.concatenate([cat[:, 6:], cat[:, :6]], axis=1), atol=1e-12)


def test_zero_input_zero_state():
    p = small_params(5)
    for k in list(p.arrays):
        if k.startswith("gru.") and ".b_" in k:
            p.arrays[k][...] = 0.0
    cat = _bigru_cat(p, np.zeros((4, 6)))
    assert not cat.any()


def test_batched_gru_padding_independent():
    p = small_params(6)
    graphs, xs = [], []
    for sizes, c in (([10], 0), ([20, 14, 10, 10, 14, 10], 2), ([16, 12], 1)):
        _, g, x = graph_and_inputs(sizes, c, p)
        graphs.append(g)
        xs.append(x)
    together = forward(p, Batch.build(graphs, xs))[0]
    alone = np.concatenate([forward(p, Batch.build([g], [x]))[0] for g, x in zip(graphs, xs)])
    np.testing.assert_allclose(together, alone, atol=1e-12)


# -- gnn_forward -----------------------------------------------------------------


def test_single_node_gat():
    p = small_params(7)
    _, g, _ = graph_and_inputs([10], 0, p)
    v = np.random.default_rng(3).normal(size=(1, 6))
    h, attn = gnn_forward(g, v, p, return_attention=True)
    expect = v[0]
    for layer in range(2):
        P = f"gat{layer}."
        msg = np.mean([p[P + "Wm"][k] @ expect for k in range(2)], axis=0)
        expect = expect + np.tanh(msg + p[P + "c"])
        np.testing.assert_allclose(attn[layer][2], 1.0)
    np.testing.assert_allclose(h[0], expect)


def test_symmetric_pair_identical_outputs():
    p = small_params(8)
    _, g, _ = graph_and_inputs([10, 10], 0, p)
    g.edge_feats[:] = 0.0  # strip position differences so both directions look alike
    g.edge_feats[:, 2] = 1.0
    v = np.tile(np.random.default_rng(4).normal(size=(1, 6)), (2, 1))
    h = gnn_forward(g, v, p)
    np.testing.assert_allclose(h[0], h[1])


@given(st.lists(st.sampled_from([8.0, 10.0, 12.0, 16.0]), min_size=1, max_size=25), st.integers(0, 10**6))
def test_attention_rows_sum_to_one(sizes, seed):
    p = small_params(seed % 50)
    _, g, x = graph_and_inputs(sizes, seed % len(sizes), p)
    v = np.random.default_rng(seed).normal(size=(len(g.nodes), 6))
    _, attn = gnn_forward(g, v, p, return_attention=True)
    for src, dst, alpha in attn:
        sums = np.zeros((len(g.nodes), 2))
        np.add.at(sums, dst, alpha)
        np.testing.assert_allclose(sums, 1.0)


def test_permutation_equivariance():
    p = small_params(9)
    _, g, x = graph_and_inputs([20, 14, 10, 10, 14, 10, 12], 1, p)
    b = Batch.build([g], [x])
    h = np.random.default_rng(5).normal(size=(len(g.nodes), 6))
    out = layers.gat_forward(p.arrays, 0, h, b)[0]
    perm = np.random.default_rng(6).permutation(len(g.nodes))
    inv = np.argsort(perm)
    # relabel node k as inv[k]
    src, dst = inv[b.src], inv[b.dst]
    order = np.lexsort((src, dst))

    class G:
        pass

    import scipy.sparse as sp

    q = G()
    q.src, q.dst, q.efeat = src[order], dst[order], b.efeat[order]
    q.seg = np.searchsorted(q.dst, np.arange(len(h)))
    q.sum_by_src = sp.csr_matrix((np.ones(len(src)), (q.src, np.arange(len(src)))), shape=(len(h), len(src)))
    out_p = layers.gat_forward(p.arrays, 0, h[perm], q)[0]
    np.testing.assert_allclose(out_p, out[perm], atol=1e-12)


def test_center_scores_ignore_far_nodes():
    p = small_params(10)
    base = [20, 14, 10, 10, 14, 10]
    tree, g, x = graph_and_inputs(base, 2, p)
    tree2, g2, x2 = graph_and_inputs(base + [14, 10, 10, 14, 10], 2, p)
    assert list(g2.nodes) == list(g.nodes)  # the new blocks are beyond n_d hops
    a = forward(p, Batch.build([g], [x]))[0]
    b = forward(p, Batch.build([g2], [x2]))[0]
    np.testing.assert_allclose(a, b)


# -- score_ops / predict -------------------------------------------------------------


def test_zero_weights_give_biases():
    p = small_params(11)
    for k in ("head.w_kp", "head.w_de", "head.w_mv"):
        p.arrays[k][...] = 0.0
    _, g, _ = graph_and_inputs([10, 10, 10], 2, p)
    o = score_ops(g, np.ones((3, 6)), p)
    np.testing.assert_allclose(o, [p["head.b_kp"], p["head.b_de"], p["head.b_mv"]])


def test_move_score_without_preceding_sibling():
    p = small_params(12)
    _, g, _ = graph_and_inputs([10, 10], 0, p)
    h = np.random.default_rng(7).normal(size=(2, 6))
    o = score_ops(g, h, p)
    c = g.center_pos
    np.testing.assert_allclose(o[2], p["head.w_mv"] @ np.concatenate([np.zeros(6), h[c]]) + p["head.b_mv"])


def test_maxpool_of_unit_axes():
    p = small_params(13)
    h = np.vstack([np.eye(6)[:3], np.full((1, 6), -1.0)])
    pool = layers.heads_forward(p.arrays, h, np.array([3]), np.array([[0, 1, 2]]), np.ones((1, 3), bool))[1][1]
    np.testing.assert_array_equal(pool[0], [1, 1, 1, 0, 0, 0])


def test_predict_examples():
    prob, op = predict([[0.0, 0.0, 0.0]])
    np.testing.assert_allclose(prob[0], [1 / 3] * 3)
    assert Op(op[0]) == Op.KEEP
    prob, op = predict([[10.0, 0.0, 0.0]])
    assert prob[0, 0] > 0.999 and Op(op[0]) == Op.KEEP
    assert Op(predict([[0.0, 5.0, 1.0]])[1][0]) == Op.DELETE
    assert Op(predict([[1.0, 3.0, 3.0]])[1][0]) == Op.DELETE  # Delete beats Move on ties


@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3))
def test_distribution_sums_to_one(scores):
    p = softmax(np.array(scores))
    assert abs(p.sum() - 1.0) <= 1e-9
    assert np.all((p >= 0) & (p <= 1))


# -- loss and gradients ----------------------------------------------------------------


def test_loss_limits():
    loss, _ = cross_entropy(np.zeros((4, 3)), np.array([0, 1, 2, 0]))
    assert math.isclose(loss, math.log(3), rel_tol=1e-12)
    loss, _ = cross_entropy(np.array([[50.0, 0.0, 0.0]]), np.array([0]))
    assert loss < 1e-20


def test_class_weighted_loss_is_weighted_mean():
    o = np.random.default_rng(8).normal(size=(5, 3))
    y = np.array([0, 1, 1, 2, 1])
    w = np.array([2.0, 1.0, 5.0])
    per = -np.log(softmax(o)[np.arange(5), y])
    assert math.isclose(cross_entropy(o, y, w)[0], (w[y] * per).sum() / w[y].sum())


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(seed):
    assert gradient_check(np.random.default_rng(seed)) <= 1e-4


@pytest.mark.parametrize("cfg", [ScorerConfig(d_h=4, n_d=1, text_buckets=4, use_gnn=False), ScorerConfig(d_h=4, n_d=3, text_buckets=4, use_gru=False)])
def test_gradients_of_ablations(cfg):
    from tocextract.oracles import finite_difference_check

    p = small_params(14, cfg)
    _, g, x = graph_and_inputs([20, 14, 10, 10, 14, 10], 1, p)
    _, g2, x2 = graph_and_inputs([16, 16, 12], 2, p)
    b = Batch.build([g, g2], [x, x2])
    y = np.array([2, 0])
    _, grads = loss_and_grad(p, b, y)
    assert finite_difference_check(lambda: cross_entropy(forward(p, b)[0], y)[0], p.arrays, grads) <= 1e-4


def test_non_finite_loss_names_batch():
    p = small_params(15)
    p.arrays["head.b_kp"][...] = np.nan
    _, g, x = graph_and_inputs([10, 9], 0, p)
    with pytest.raises(TrainingError, match="batch 7"):
        loss_and_grad(p, Batch.build([g], [x]), [0], batch_id=7)


# -- checkpoints -----------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    p = small_params(16)
    save_params(p, tmp_path / "c.npz")
    q = load_params(tmp_path / "c.npz")
    assert q.config == p.config
    assert set(q.arrays) == set(p.arrays)
    for k in p.arrays:
        np.testing.assert_array_equal(q.arrays[k], p.arrays[k])


def test_checkpoint_bytes_deterministic(tmp_path):
    p = small_params(17)
    save_params(p, tmp_path / "a.npz")
    save_params(p.copy(), tmp_path / "b.npz")
    assert (tmp_path / "a.npz").read_bytes() == (tmp_path / "b.npz").read_bytes()


def test_truncated_checkpoint(tmp_path):
    save_params(small_params(18), tmp_path / "c.npz")
    raw = (tmp_path / "c.npz").read_bytes()
    (tmp_path / "t.npz").write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CheckpointError):
        load_params(tmp_path / "t.npz")


def test_version_mismatch_names_both(tmp_path, monkeypatch):
    import tocextract.scorer.params as params_mod

    monkeypatch.setattr(params_mod, "CHECKPOINT_VERSION", 0)
    save_params(small_params(19), tmp_path / "old.npz")
    monkeypatch.undo()
    with pytest.raises(CheckpointVersionError, match=r"version 0.*version 1"):
        load_params(tmp_path / "old.npz")
    assert CHECKPOINT_VERSION == 1


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        load_params(tmp_path / "nope.npz")
