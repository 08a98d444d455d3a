"""Finite-difference checks of every network block."""
from __future__ import annotations

import numpy as np

from funcgraph import tensor as tk
from funcgraph.explore import PolicyNet
from funcgraph.nets import BRPriorNet, NetConfig, SceneGraphNet, pair_index
from funcgraph.tensor import Tape, Tensor

from oracles import relative_error

H = 1e-5
COORDS_PER_TENSOR = 6


def check(loss_fn, tensors, rng) -> float:
    """Norm-wise relative error between analytic and central-difference
    gradients on a random subset of coordinates of each tensor."""
    with Tape() as tape:
        loss = loss_fn()
    grads = tk.backward(loss, tape)
    analytic, numeric = [], []
    for t in tensors:
        g = grads.get(id(t), np.zeros_like(t.data)).reshape(-1)
        flat = t.data.reshape(-1)
        for k in rng.choice(flat.size, size=min(COORDS_PER_TENSOR, flat.size), replace=False):
            orig = flat[k]
            flat[k] = orig + H
            fp = float(loss_fn().data)
            flat[k] = orig - H
            fm = float(loss_fn().data)
            flat[k] = orig
            analytic.append(g[k])
            numeric.append((fp - fm) / (2 * H))
    return relative_error(np.array(analytic), np.array(numeric))


def _random_adj(rng, n):
    w = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.6)
    np.fill_diagonal(w, 0.0)
    return w


def _randomize(store, rng):
    # fresh weights per draw, including the small-gain output layers
    for name, t in store:
        t.data = rng.normal(0, 0.5, t.shape)


def block_errors(draw: int) -> dict[str, float]:
    """Relative gradient error for each block under one random draw."""
    rng = np.random.default_rng(1000 + draw)
    cfg = NetConfig()
    out = {}

    br = BRPriorNet(draw, cfg)
    _randomize(br.store, rng)
    pts = Tensor(rng.normal(size=(3, 10, 3)))
    r_enc = rng.normal(size=(3, cfg.geom_dim))
    enc_params = [t for name, t in br.store if name.startswith("enc.")]
    out["encoder"] = check(lambda: tk.sum_all(tk.mul(br.encoder(pts), Tensor(r_enc))), enc_params, rng)

    feats = Tensor(rng.normal(size=(4, cfg.geom_dim)), requires_grad=True)
    ii, jj = pair_index(4)
    r_pair = rng.normal(size=(16, 1))
    head = [t for name, t in br.store if name.startswith("br.head")] + [feats]
    out["br_pair_head"] = check(lambda: tk.sum_all(tk.mul(br.pair_probs(feats, ii, jj), Tensor(r_pair))), head, rng)

    sr = SceneGraphNet(draw, cfg)
    _randomize(sr.store, rng)
    n = int(rng.integers(2, 7))
    nodes = Tensor(rng.normal(size=(n, sr.in_dim)), requires_grad=True)
    adj = _random_adj(rng, n)
    r_emb = rng.normal(size=(n, sr.embed_dim))
    emb_loss = lambda: tk.sum_all(tk.mul(sr.embed(nodes, adj), Tensor(r_emb)))
    out["sr_node_projection"] = check(emb_loss, [sr.store["sr.node.w0"], sr.store["sr.node.b0"], nodes], rng)
    for k in range(sr.layers):
        out[f"gcn_layer_{k}"] = check(emb_loss, [sr.store[f"sr.theta{k}"]], rng)
    emb_in = Tensor(rng.normal(size=(n, sr.embed_dim)), requires_grad=True)
    pi, pj = pair_index(n)
    r_sc = rng.normal(size=(n * n, 1))
    sr_head = [t for name, t in sr.store if name.startswith("sr.pair")] + [emb_in]
    out["sr_pair_head"] = check(lambda: tk.sum_all(tk.mul(sr.pair_probs(emb_in, pi, pj), Tensor(r_sc))), sr_head, rng)

    pol = PolicyNet(draw, cfg)
    _randomize(pol.store, rng)
    sizes = [int(rng.integers(2, 6)), int(rng.integers(2, 6))]
    blocks = [rng.normal(size=(m, pol.in_dim)) for m in sizes]
    adjs = [_random_adj(rng, m) for m in sizes]
    r_lp = rng.normal(size=(2, max(sizes) + 1))
    r_v = rng.normal(size=(2,))

    def pol_loss():
        logp, values = pol.forward_batch(blocks, adjs)
        # padded columns carry no gradient signal by construction; mask them out
        mask = np.zeros_like(r_lp)
        for g, m in enumerate(sizes):
            mask[g, :m] = 1.0
            mask[g, -1] = 1.0
        return tk.add(tk.sum_all(tk.mul(logp, Tensor(r_lp * mask))), tk.sum_all(tk.mul(values, Tensor(r_v))))

    out["policy_action_head"] = check(pol_loss, [t for name, t in pol.store if name.startswith("pi.act")], rng)
    out["policy_stop_head"] = check(pol_loss, [t for name, t in pol.store if name.startswith("pi.stop")], rng)
    out["policy_value_head"] = check(pol_loss, [t for name, t in pol.store if name.startswith("pi.value")], rng)
    out["policy_backbone"] = check(pol_loss, [t for name, t in pol.store if name.startswith("pi.theta") or name.startswith("pi.node")], rng)
    return out
