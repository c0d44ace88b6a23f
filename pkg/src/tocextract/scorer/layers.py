"""Forward and backward passes for the scorer's building blocks.

Each ``*_forward`` returns ``(output, cache)`` and the matching
``*_backward`` takes the output gradient and the cache and returns the
input gradient plus a dict of parameter gradients keyed like the params.
All activations are smooth (tanh/sigmoid) so finite differences agree with
the analytic gradients everywhere except at max-pool ties.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# -- MLP ---------------------------------------------------------------------


def mlp_forward(P, x):
    a1 = np.tanh(x @ P["mlp.W1"].T + P["mlp.b1"])
    return a1 @ P["mlp.W2"].T + P["mlp.b2"], (x, a1)


def mlp_backward(P, dout, cache):
    x, a1 = cache
    grads = {"mlp.W2": dout.T @ a1, "mlp.b2": dout.sum(0)}
    dz1 = (dout @ P["mlp.W2"]) * (1.0 - a1 * a1)
    grads["mlp.W1"] = dz1.T @ x
    grads["mlp.b1"] = dz1.sum(0)
    return dz1 @ P["mlp.W1"], grads


# -- GRU ---------------------------------------------------------------------
# Gates stacked as [reset, update, candidate]; h0 = 0.
#   r = sig(Wir x + bir + Whr h + bhr)
#   z = sig(Wiz x + biz + Whz h + bhz)
#   n = tanh(Win x + bin + r * (Whn h + bhn))
#   h' = (1 - z) * n + z * h


def gru_run(xi, active, W_hh, b_hh):
    """Run one direction over pre-projected inputs ``xi`` of shape (L, G, 3d).

    Rows are sorted by decreasing length and ``active[t]`` rows are live at
    step ``t``; finished rows keep their last state and are never read.
    """
    L, G, _ = xi.shape
    d = W_hh.shape[1]
    h = np.zeros((G, d))
    hs = np.zeros((L, G, d))
    cache = []
    for t in range(L):
        k = active[t]
        hp = h[:k]
        gh = hp @ W_hh.T + b_hh
        x = xi[t, :k]
        r = sigmoid(x[:, :d] + gh[:, :d])
        z = sigmoid(x[:, d:2 * d] + gh[:, d:2 * d])
        ghn = gh[:, 2 * d:]
        n = np.tanh(x[:, 2 * d:] + r * ghn)
        hn = (1.0 - z) * n + z * hp
        h = h.copy()
        h[:k] = hn
        hs[t, :k] = hn
        cache.append((hp, r, z, n, ghn))
    return hs, cache


def gru_run_backward(dhs, cache, active, W_hh):
    L, G, d = dhs.shape
    dxi = np.zeros((L, G, 3 * d))
    dW = np.zeros_like(W_hh)
    db = np.zeros(3 * d)
    dh = np.zeros((G, d))
    for t in range(L - 1, -1, -1):
        k = active[t]
        hp, r, z, n, ghn = cache[t]
        g = dh[:k] + dhs[t, :k]
        dn = g * (1.0 - z)
        dz = g * (hp - n)
        dnp = dn * (1.0 - n * n)
        drp = dnp * ghn * r * (1.0 - r)
        dzp = dz * z * (1.0 - z)
        dgh = np.concatenate([drp, dzp, dnp * r], axis=1)
        dxi[t, :k] = np.concatenate([drp, dzp, dnp], axis=1)
        dW += dgh.T @ hp
        db += dgh.sum(0)
        dh = dh.copy()
        dh[:k] = g * z + dgh @ W_hh
    return dxi, dW, db


def bigru_forward(P, b, seq, rev, lengths):
    """Bidirectional GRU over padded index sequences, projected back to d.

    ``seq[g, t]`` is the row of ``b`` at step ``t`` of sequence ``g`` (reading
    order); ``rev`` holds the same rows reversed. Both are padded at the end.
    """
    order = np.argsort(-lengths, kind="stable")
    lens = lengths[order]
    L = int(lens[0]) if len(lens) else 0
    active = [int(np.sum(lens > t)) for t in range(L)]
    valid = np.arange(L)[None, :] < lens[:, None]  # (G, L)
    n, d = b.shape
    outs = []
    caches = []
    for direction, idx in (("fwd", seq), ("bwd", rev)):
        rows = idx[order, :L]
        W_ih, b_ih = P[f"gru.{direction}.W_ih"], P[f"gru.{direction}.b_ih"]
        xi = (b[rows.T] @ W_ih.T) + b_ih  # (L, G, 3d)
        hs, cache = gru_run(xi, active, P[f"gru.{direction}.W_hh"], P[f"gru.{direction}.b_hh"])
        out = np.zeros((n, d))
        out[rows[valid]] = hs.transpose(1, 0, 2)[valid]
        outs.append(out)
        caches.append((rows, cache))
    cat = np.concatenate(outs, axis=1)
    v = cat @ P["gru.W_p"].T + P["gru.b_p"]
    return v, (b, order, active, valid, cat, caches)


def bigru_backward(P, dv, cache):
    b, order, active, valid, cat, caches = cache
    n, d = b.shape
    grads = {"gru.W_p": dv.T @ cat, "gru.b_p": dv.sum(0)}
    dcat = dv @ P["gru.W_p"]
    db_in = np.zeros_like(b)
    for k, (direction, (rows, gcache)) in enumerate(zip(("fwd", "bwd"), caches)):
        dout = dcat[:, k * d:(k + 1) * d]
        G, L = rows.shape
        dhs = np.zeros((L, G, d))
        tmp = np.zeros((G, L, d))
        tmp[valid] = dout[rows[valid]]
        dhs[:] = tmp.transpose(1, 0, 2)
        W_hh = P[f"gru.{direction}.W_hh"]
        dxi, dW_hh, db_hh = gru_run_backward(dhs, gcache, active, W_hh)
        W_ih = P[f"gru.{direction}.W_ih"]
        x = b[rows.T]  # (L, G, d)
        # padded steps carry zero gradient, so they add nothing below
        flat_dxi = dxi.reshape(-1, 3 * d)
        grads[f"gru.{direction}.W_ih"] = flat_dxi.T @ x.reshape(-1, d)
        grads[f"gru.{direction}.b_ih"] = flat_dxi.sum(0)
        grads[f"gru.{direction}.W_hh"] = dW_hh
        grads[f"gru.{direction}.b_hh"] = db_hh
        np.add.at(db_in, rows.T.reshape(-1), flat_dxi @ W_ih)
    return db_in, grads


# -- GAT ---------------------------------------------------------------------
# Per head k and edge j -> i (self-loops included, zero edge features):
#   e_ji = a_k . tanh(Wl_k h_i + Wr_k h_j + We_k f_ji)
#   alpha_ji = softmax over incoming edges of i
#   m_ji = Wm_k h_j + U_k f_ji
# h_i' = h_i + tanh(mean_k sum_j alpha_ji m_ji + c)


def _proj(h, W):
    """(N, d) x (K, f, d) -> (N, K, f)."""
    K, f, d = W.shape
    return (h @ W.reshape(K * f, d).T).reshape(len(h), K, f)


def _proj_back(dy, h, W):
    """Gradients of ``_proj``: returns (dh, dW)."""
    K, f, d = W.shape
    dflat = dy.reshape(len(h), K * f)
    return dflat @ W.reshape(K * f, d), (dflat.T @ h).reshape(K, f, d)


def gat_forward(P, layer, h, g):
    """One attention layer over the batch graph ``g`` (see :class:`Batch`)."""
    p = f"gat{layer}."
    K = P[p + "a"].shape[0]
    HL = _proj(h, P[p + "Wl"])
    HR = _proj(h, P[p + "Wr"])
    HM = _proj(h, P[p + "Wm"])
    EF = _proj(g.efeat, P[p + "We"])
    EU = _proj(g.efeat, P[p + "U"])
    T = np.tanh(HL[g.dst] + HR[g.src] + EF)  # (E, K, d)
    e = np.einsum("ekd,kd->ek", T, P[p + "a"])
    emax = np.maximum.reduceat(e, g.seg, axis=0)
    ex = np.exp(e - emax[g.dst])
    alpha = ex / np.add.reduceat(ex, g.seg, axis=0)[g.dst]
    M = HM[g.src] + EU
    agg = np.add.reduceat(alpha[..., None] * M, g.seg, axis=0).sum(1) / K
    act = np.tanh(agg + P[p + "c"])
    return h + act, (h, T, alpha, M, act)


def gat_backward(P, layer, dout, cache, g):
    p = f"gat{layer}."
    h, T, alpha, M, act = cache
    K = alpha.shape[1]
    n, d = h.shape
    E = len(g.src)
    grads = {}
    dh = dout.copy()
    dpre = dout * (1.0 - act * act)
    grads[p + "c"] = dpre.sum(0)
    dAM = np.broadcast_to((dpre / K)[g.dst][:, None, :], (E, K, d))
    dalpha = np.einsum("ekd,ekd->ek", dAM, M)
    dM = alpha[..., None] * dAM
    dHM = (g.sum_by_src @ dM.reshape(E, K * d)).reshape(n, K, d)
    dx, grads[p + "Wm"] = _proj_back(dHM, h, P[p + "Wm"])
    dh += dx
    _, grads[p + "U"] = _proj_back(dM, g.efeat, P[p + "U"])
    s = np.add.reduceat(alpha * dalpha, g.seg, axis=0)
    de = alpha * (dalpha - s[g.dst])
    grads[p + "a"] = np.einsum("ekd,ek->kd", T, de)
    dS = de[..., None] * P[p + "a"][None] * (1.0 - T * T)
    dHL = np.add.reduceat(dS, g.seg, axis=0)
    dHR = (g.sum_by_src @ dS.reshape(E, K * d)).reshape(n, K, d)
    dx, grads[p + "Wl"] = _proj_back(dHL, h, P[p + "Wl"])
    dh += dx
    dx, grads[p + "Wr"] = _proj_back(dHR, h, P[p + "Wr"])
    dh += dx
    _, grads[p + "We"] = _proj_back(dS, g.efeat, P[p + "We"])
    return dh, grads


# -- operation heads ---------------------------------------------------------


def heads_forward(P, h, centers, prs, prs_mask):
    """Keep/Delete/Move scores for each center.

    ``prs`` (G, S) holds rows of preceding siblings, valid where
    ``prs_mask``; rows with no preceding sibling pool to zero.
    """
    hc = h[centers]
    G, d = hc.shape
    pool = np.zeros((G, d))
    arg = None
    if prs.shape[1]:
        cand = np.where(prs_mask[..., None], h[prs], -np.inf)
        arg = np.argmax(cand, axis=1)  # (G, d)
        has = prs_mask.any(1)
        pool[has] = np.take_along_axis(cand, arg[:, None, :], axis=1)[has, 0]
    o = np.stack([
        hc @ P["head.w_kp"] + P["head.b_kp"],
        hc @ P["head.w_de"] + P["head.b_de"],
        np.concatenate([pool, hc], axis=1) @ P["head.w_mv"] + P["head.b_mv"],
    ], axis=1)
    return o, (hc, pool, arg)


def heads_backward(P, do, cache, n_rows, centers, prs, prs_mask):
    hc, pool, arg = cache
    G, d = hc.shape
    grads = {
        "head.w_kp": do[:, 0] @ hc,
        "head.b_kp": np.asarray(do[:, 0].sum()),
        "head.w_de": do[:, 1] @ hc,
        "head.b_de": np.asarray(do[:, 1].sum()),
        "head.w_mv": do[:, 2] @ np.concatenate([pool, hc], axis=1),
        "head.b_mv": np.asarray(do[:, 2].sum()),
    }
    w_mv = P["head.w_mv"]
    dhc = np.outer(do[:, 0], P["head.w_kp"]) + np.outer(do[:, 1], P["head.w_de"]) + np.outer(do[:, 2], w_mv[d:])
    dh = np.zeros((n_rows, d))
    np.add.at(dh, centers, dhc)
    if arg is not None:
        has = prs_mask.any(1)
        dpool = np.outer(do[:, 2], w_mv[:d])
        gi, ci = np.nonzero(np.broadcast_to(has[:, None], (G, d)))
        rows = prs[gi, arg[gi, ci]]
        np.add.at(dh, (rows, ci), dpool[gi, ci])
    return dh, grads
