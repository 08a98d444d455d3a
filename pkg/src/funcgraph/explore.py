"""Training-time exploration: policy, rollouts under a global budget, PPO,
and supervision of the relation networks from the collected observations."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as tk
from .adaptation import AdaptationConfig, run_adaptation, uncertainty
from .env import InteractionEnv, LogRecord
from .generator import derive_seed, make_rng
from .nets import (
    NetConfig,
    RelationNets,
    SceneContext,
    SceneGraphNet,
    _mlp,
    _mlp_params,
    block_propagation,
    clamp_rows,
    rows_index,
)
from .scene import Scene
from .tensor import Tape, Tensor

log = logging.getLogger(__name__)

BELIEF_FEATURES = 3
PAD_LOGIT = -1e4


@dataclass(frozen=True)
class TrainConfig:
    budget: int = 1000
    loops: int = 10
    supervised_epochs: int = 5
    supervised_batches: int | None = 60  # joint steps per loop; None means full epochs
    scene_batches: int = 300  # extra scene-net steps per loop, encoder frozen
    batch_episodes: int = 8
    ppo_epochs: int = 4
    ppo_minibatch: int = 64
    ppo_clip: float = 0.2
    discount: float = 0.99
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_pos_weight: float = 20.0
    patience: int = 3
    min_improvement: float = 0.002
    val_fraction: float = 0.1
    random_explore: bool = False
    allow_stop: bool = True
    accumulate: bool = True
    seed: int = 0
    lr: float = 1e-3
    debug: bool = False

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")


# ---------------------------------------------------------------------------
# policy


def belief_features(belief: np.ndarray) -> np.ndarray:
    """Per-object summaries of its belief row: peak uncertainty, max, mean."""
    b = np.asarray(belief, dtype=float)
    return np.stack([uncertainty(b).max(axis=1), b.max(axis=1), b.mean(axis=1)], axis=1)


class PolicyNet(SceneGraphNet):
    """Graph backbone with a per-object action score and a stop score.

    Each object scores MLP_act(n_i || n_S); stop scores MLP_stop(n_S || n_S),
    where n_S is the mean embedding. Separate heads keep the two apart when
    n = 1 and the inputs coincide. A value head on n_S serves as baseline.
    """

    def __init__(self, seed: int = 0, cfg: NetConfig = NetConfig()):
        super().__init__(seed, cfg, prefix="pi", extra_node_dims=BELIEF_FEATURES)

    def _add_heads(self, rng) -> None:
        e = self.embed_dim
        _mlp_params(self.store, rng, "pi.act", (2 * e, self.cfg.pair_hidden, 1), out_gain=0.1)
        _mlp_params(self.store, rng, "pi.stop", (2 * e, self.cfg.pair_hidden, 1), out_gain=0.1)
        _mlp_params(self.store, rng, "pi.value", (e, self.cfg.pair_hidden, 1), out_gain=0.1)

    def inputs(self, ctx: SceneContext, belief: np.ndarray) -> np.ndarray:
        return np.concatenate([ctx.nodes, belief_features(belief)], axis=1)

    def forward_batch(self, node_blocks: Sequence[np.ndarray], adjacencies: Sequence[np.ndarray]):
        """Log-probabilities (B, nmax+1, padded, stop last) and values (B,)."""
        sizes = [blk.shape[0] for blk in node_blocks]
        b, nmax = len(sizes), max(sizes)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        emb = self.embed(np.concatenate(node_blocks), None, prop=block_propagation(adjacencies))
        avg = np.zeros((b, offsets[-1]))
        for g, n in enumerate(sizes):
            avg[g, offsets[g] : offsets[g + 1]] = 1.0 / n
        scene_feat = tk.matmul(Tensor(avg), emb)  # (B, e)
        graph_of = np.repeat(np.arange(b), sizes)
        obj_rows = tk.concat([emb, tk.take_rows(scene_feat, graph_of)], axis=1)
        stop_rows = tk.concat([scene_feat, scene_feat], axis=1)
        scores = tk.concat([_mlp(self.store, "pi.act", obj_rows, 2), _mlp(self.store, "pi.stop", stop_rows, 2)], axis=0)
        # scatter into a padded (B, nmax + 1) grid; stop goes in the last column
        src = np.full((b, nmax + 1), -1, dtype=np.intp)
        for g, n in enumerate(sizes):
            src[g, :n] = offsets[g] + np.arange(n)
            src[g, nmax] = offsets[-1] + g
        mask = np.where(src >= 0, 0.0, PAD_LOGIT)
        flat = tk.take_rows(tk.concat([scores, Tensor(np.zeros((1, 1)))], axis=0), np.where(src >= 0, src, offsets[-1] + b).reshape(-1))
        logits = tk.add(tk.reshape(flat, (b, nmax + 1)), Tensor(mask))
        values = tk.reshape(_mlp(self.store, "pi.value", scene_feat, 2), (b,))
        return tk.log_softmax(logits), values

    def distribution(self, ctx: SceneContext, belief: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, float]:
        """Probabilities over the n objects followed by stop, and the value estimate."""
        logp, values = self.forward_batch([self.inputs(ctx, belief)], [edges])
        p = np.exp(logp.data[0])
        n = ctx.n
        probs = np.concatenate([p[:n], p[-1:]])
        return probs / probs.sum(), float(values.data[0])


def policy_forward(policy: PolicyNet, nets: RelationNets, ctx: SceneContext, belief: np.ndarray) -> np.ndarray:
    return policy.distribution(ctx, belief, nets.edges(ctx, belief))[0]


# ---------------------------------------------------------------------------
# rollouts


@dataclass
class Step:
    scene_index: int
    belief: np.ndarray
    edges: np.ndarray
    action: int  # n means stop
    logp: float
    value: float
    reward: float
    done: bool

    @property
    def belief_hash(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.belief).tobytes()).hexdigest()[:16]


@dataclass
class Episode:
    scene_index: int
    steps: list = field(default_factory=list)

    @property
    def interactions(self) -> list[int]:
        n = self.steps[0].belief.shape[0] if self.steps else 0
        return [s.action for s in self.steps if s.action < n]


@dataclass
class RolloutResult:
    episodes: list
    dataset: list  # (scene_index, [i_1, ..., i_m]) with distinct triggers in order
    steps_used: int
    log: list


def collect_rollouts(
    contexts: Sequence[SceneContext],
    policy: PolicyNet,
    nets: RelationNets,
    budget: int,
    rng: np.random.Generator,
    order: Sequence[int] | None = None,
    random_explore: bool = False,
    allow_stop: bool = True,
) -> RolloutResult:
    """Visit scenes in order until the global interaction budget is spent."""
    if not contexts:
        raise ValueError("collect_rollouts needs at least one scene")
    order = list(range(len(contexts))) if order is None else list(order)
    remaining = budget
    episodes, dataset, records = [], [], []
    for k in order:
        if remaining <= 0:
            break
        ctx = contexts[k]
        n = ctx.n
        env = InteractionEnv(ctx.scene, budget=min(n, remaining))
        state = env.reset(nets.scene_prior(ctx))
        ep = Episode(k)
        distinct: list[int] = []
        while True:
            edges = nets.edges(ctx, state.belief)
            probs, value = policy.distribution(ctx, state.belief, edges)
            if not allow_stop:
                probs = probs.copy()
                probs[n] = 0.0
                probs /= probs.sum()
            if random_explore:
                choice = int(rng.integers(n + 1 if allow_stop else n))
            else:
                choice = int(rng.choice(n + 1, p=probs))
            logp = float(np.log(max(probs[choice], 1e-300)))
            if choice == n:
                ep.steps.append(Step(k, state.belief.copy(), edges, n, logp, value, 0.0, True))
                break
            res = env.step(choice)
            remaining -= 1
            records.append(LogRecord(ctx.scene.scene_id, res.state.t - 1, choice, res.observation.bitstring(), res.reward))
            if choice not in distinct:
                distinct.append(choice)
            done = res.terminal
            ep.steps.append(Step(k, state.belief.copy(), edges, choice, logp, value, res.reward, done))
            post = nets.posterior_step(ctx, res.state.belief, res.state.observations)
            state = env.set_belief(post)
            if done:
                break
        episodes.append(ep)
        if distinct:
            dataset.append((k, distinct))
    used = budget - remaining
    if used == 0:
        log.warning("rollouts performed no interactions; the supervision set is empty")
    return RolloutResult(episodes, dataset, used, records)


# ---------------------------------------------------------------------------
# policy optimisation


def discounted_returns(episodes: Sequence[Episode], discount: float) -> np.ndarray:
    out = []
    for ep in episodes:
        g, rets = 0.0, []
        for s in reversed(ep.steps):
            g = s.reward + discount * g * (0.0 if s.done else 1.0)
            rets.append(g)
        out.extend(reversed(rets))
    return np.array(out)


def clipped_surrogate(logp_new: Tensor, logp_old: np.ndarray, adv: np.ndarray, clip: float) -> Tensor:
    """Mean of min(ratio * A, clip(ratio) * A), as a quantity to maximise."""
    ratio = tk.exp(tk.sub(logp_new, Tensor(logp_old)))
    a = Tensor(adv)
    unclipped = tk.mul(ratio, a)
    clipped = tk.mul(tk.clip(ratio, 1.0 - clip, 1.0 + clip), a)
    return tk.mean(tk.minimum(unclipped, clipped))


def ppo_epochs(
    policy: PolicyNet,
    contexts: Sequence[SceneContext],
    steps: Sequence[Step],
    advantages: np.ndarray,
    returns: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> dict:
    stats = {"policy_loss": [], "value_loss": [], "entropy": []}
    idx = np.arange(len(steps))
    for _ in range(cfg.ppo_epochs):
        rng.shuffle(idx)
        for start in range(0, len(idx), cfg.ppo_minibatch):
            mb = idx[start : start + cfg.ppo_minibatch]
            blocks = [policy.inputs(contexts[steps[k].scene_index], steps[k].belief) for k in mb]
            adjs = [steps[k].edges for k in mb]
            nmax = max(b.shape[0] for b in blocks)
            # chosen column: object index, or the padded stop column
            cols = [steps[k].action if steps[k].action < blocks[q].shape[0] else nmax for q, k in enumerate(mb)]
            with Tape() as tape:
                logp_all, values = policy.forward_batch(blocks, adjs)
                flat = tk.reshape(logp_all, (len(mb) * (nmax + 1), 1))
                pick = np.arange(len(mb)) * (nmax + 1) + np.array(cols)
                logp = tk.reshape(tk.take_rows(flat, pick), (len(mb),))
                surr = clipped_surrogate(logp, np.array([steps[k].logp for k in mb]), advantages[mb], cfg.ppo_clip)
                verr = tk.sub(values, Tensor(returns[mb]))
                vloss = tk.mean(tk.mul(verr, verr))
                ent = tk.scale(tk.sum_all(tk.mul(tk.exp(logp_all), logp_all)), -1.0 / len(mb))
                loss = tk.add(
                    tk.add(tk.scale(surr, -1.0), tk.scale(vloss, cfg.value_coef)),
                    tk.scale(ent, -cfg.entropy_coef),
                )
            if not np.isfinite(loss.data):
                raise FloatingPointError("PPO loss is not finite")
            grads = tk.backward(loss, tape)
            policy.store.step(policy.store.gradients(grads))
            stats["policy_loss"].append(-float(surr.data))
            stats["value_loss"].append(float(vloss.data))
            stats["entropy"].append(float(ent.data))
    return {k: float(np.mean(v)) if v else 0.0 for k, v in stats.items()}


def policy_update(
    episodes: Sequence[Episode],
    policy: PolicyNet,
    contexts: Sequence[SceneContext],
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> dict:
    """Clipped-surrogate update; advantage is discounted return minus the value head."""
    steps = [s for ep in episodes for s in ep.steps]
    if not steps:
        raise ValueError("policy_update needs at least one step")
    returns = discounted_returns(episodes, cfg.discount)
    adv = returns - np.array([s.value for s in steps])
    std = adv.std()
    if std > 1e-8:
        adv = (adv - adv.mean()) / std
    return ppo_epochs(policy, contexts, steps, adv, returns, cfg, rng)


# ---------------------------------------------------------------------------
# supervision of the relation networks


def _pos_weight(targets: np.ndarray, cap: float) -> np.ndarray:
    pos = targets.sum()
    neg = targets.size - pos
    w = min(neg / pos, cap) if pos > 0 else 1.0
    return np.where(targets > 0, w, 1.0)


def posterior_chain(nets: RelationNets, ctx: SceneContext, sequence: Sequence[int]) -> list[np.ndarray]:
    """Inputs of the posterior passes t = 1..m-1, each clamped with i_1..i_t."""
    adj = ctx.scene.adjacency.astype(float)
    belief = nets.scene_prior(ctx)
    inputs = []
    for t in range(1, len(sequence)):
        obs = {i: adj[i] for i in sequence[:t]}
        clamped = clamp_rows(belief, obs)
        inputs.append(clamped)
        belief = clamp_rows(nets.scene_scores(ctx, clamped), obs)
    return inputs


def supervision_batch(nets: RelationNets, contexts: dict, batch) -> dict:
    """Graph inputs and targets for one minibatch of episodes (no gradients)."""
    br_rows, sr_graphs = [], []
    for k, seq in batch:
        ctx = contexts[k]
        adj = ctx.scene.adjacency.astype(float)
        seq = list(seq)
        br_rows.append((k, seq, adj[seq].reshape(-1)))
        # prior pass: input is the pairwise prior; supervise every observed row
        sr_graphs.append((k, nets.edges(ctx, ctx.br), seq, adj[seq].reshape(-1)))
        for t, clamped in enumerate(posterior_chain(nets, ctx, seq), start=1):
            future = seq[t:]
            sr_graphs.append((k, nets.edges(ctx, clamped), future, adj[future].reshape(-1)))
    return {"br": br_rows, "sr": sr_graphs}


def _stacked_pairs(sizes, row_sets):
    ii_all, jj_all, off = [], [], 0
    for n, rows in zip(sizes, row_sets):
        ii, jj = rows_index(n, rows)
        ii_all.append(ii + off)
        jj_all.append(jj + off)
        off += n
    return np.concatenate(ii_all), np.concatenate(jj_all)


def _br_loss(nets: RelationNets, feats: Tensor, sizes, br_rows, cap: float) -> Tensor:
    """``feats`` holds the encoder output of the batch scenes, stacked in order."""
    ii, jj = _stacked_pairs(sizes, [rows for _, rows, _ in br_rows])
    t = np.concatenate([tgt for _, _, tgt in br_rows])
    probs = nets.br.pair_probs(feats, ii, jj)
    return tk.bce_loss(probs, t[:, None], _pos_weight(t, cap)[:, None])


def _sr_loss(nets: RelationNets, contexts: dict, graphs, cap: float) -> Tensor:
    nodes = np.concatenate([contexts[k].nodes for k, _, _, _ in graphs])
    emb = nets.sr.embed(nodes, None, prop=block_propagation([e for _, e, _, _ in graphs]))
    ii, jj = _stacked_pairs([contexts[k].n for k, _, _, _ in graphs], [rows for _, _, rows, _ in graphs])
    t = np.concatenate([tgt for _, _, _, tgt in graphs])
    probs = nets.sr.pair_probs(emb, ii, jj)
    return tk.bce_loss(probs, t[:, None], _pos_weight(t, cap)[:, None])


def supervised_step(nets: RelationNets, scenes: Sequence[Scene], batch, cfg: TrainConfig) -> tuple[float, float]:
    """One Adam step on each relation net from a minibatch of (scene index, sequence)."""
    uniq = list(dict.fromkeys(k for k, _ in batch))
    pts = np.concatenate([scenes[k].point_array() for k in uniq])
    sizes = [scenes[k].n for k in uniq]
    with Tape() as br_tape:
        feats = nets.br.encoder(pts)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    # the scene net sees detached geometry
    contexts = {k: nets.context_from(scenes[k], feats.data[bounds[q] : bounds[q + 1]]) for q, k in enumerate(uniq)}
    sup = supervision_batch(nets, contexts, batch)
    if cfg.debug:
        _check_targets(sup, contexts)
    # one BR row-set per distinct scene, in stacking order
    merged: dict = {}
    for k, rows, _ in sup["br"]:
        merged.setdefault(k, [])
        merged[k].extend(r for r in rows if r not in merged[k])
    br_rows = [(k, merged[k], scenes[k].adjacency[merged[k]].reshape(-1).astype(float)) for k in uniq]
    with br_tape:
        br_loss = _br_loss(nets, feats, sizes, br_rows, cfg.max_pos_weight)
    with Tape() as sr_tape:
        sr_loss = _sr_loss(nets, contexts, sup["sr"], cfg.max_pos_weight)
    nets.br.store.step(nets.br.store.gradients(tk.backward(br_loss, br_tape)))
    nets.sr.store.step(nets.sr.store.gradients(tk.backward(sr_loss, sr_tape)))
    return float(br_loss.data), float(sr_loss.data)


def scene_net_step(nets: RelationNets, contexts: dict, batch, cfg: TrainConfig) -> float:
    """One Adam step on the scene net alone, geometry taken from ``contexts``."""
    sup = supervision_batch(nets, contexts, batch)
    if cfg.debug:
        _check_targets(sup, contexts)
    with Tape() as tape:
        loss = _sr_loss(nets, contexts, sup["sr"], cfg.max_pos_weight)
    nets.sr.store.step(nets.sr.store.gradients(tk.backward(loss, tape)))
    return float(loss.data)


def _cycled_batches(n: int, size: int, count: int, rng: np.random.Generator):
    done = 0
    while done < count:
        order = rng.permutation(n)
        for start in range(0, n, size):
            if done >= count:
                return
            yield order[start : start + size]
            done += 1


def train_supervised(
    dataset: Sequence[tuple[int, list]],
    nets: RelationNets,
    scenes: Sequence[Scene],
    cfg: TrainConfig,
    rng: np.random.Generator,
    batches: int | None = None,
    scene_batches: int = 0,
) -> list[dict]:
    """BCE on observed rows for the pairwise prior, the scene prior pass and
    the posterior passes (future rows only).

    First ``batches`` joint minibatches update both nets (``cfg.supervised_epochs``
    full passes when None). Then ``scene_batches`` minibatches update the scene
    net alone with the encoder frozen, which is several times cheaper per step.
    Returns one record of mean losses per phase.
    """
    if not dataset:
        log.warning("train_supervised called with an empty dataset; nothing to do")
        return []
    per_pass = -(-len(dataset) // cfg.batch_episodes)
    total = cfg.supervised_epochs * per_pass if batches is None else batches
    history = []
    br_l, sr_l = [], []
    for idx in _cycled_batches(len(dataset), cfg.batch_episodes, total, rng):
        b, s = supervised_step(nets, scenes, [dataset[q] for q in idx], cfg)
        br_l.append(b)
        sr_l.append(s)
    if br_l:
        history.append({"phase": "joint", "br": float(np.mean(br_l)), "sr": float(np.mean(sr_l))})
    if scene_batches:
        used = sorted({k for k, _ in dataset})
        contexts = {k: nets.context(scenes[k]) for k in used}
        sr_l = [
            scene_net_step(nets, contexts, [dataset[q] for q in idx], cfg)
            for idx in _cycled_batches(len(dataset), cfg.batch_episodes, scene_batches, rng)
        ]
        history.append({"phase": "scene", "sr": float(np.mean(sr_l))})
    return history


def _check_targets(sup: dict, contexts) -> None:
    for k, rows, tgt in sup["br"]:
        adj = contexts[k].scene.adjacency
        if not np.array_equal(adj[rows].reshape(-1).astype(float), tgt):
            raise AssertionError(f"pairwise targets disagree with ground truth in scene {k}")
    for k, _, rows, tgt in sup["sr"]:
        adj = contexts[k].scene.adjacency
        if not np.array_equal(adj[rows].reshape(-1).astype(float), tgt):
            raise AssertionError(f"scene-net targets disagree with ground truth in scene {k}")


# ---------------------------------------------------------------------------
# alternating loop


@dataclass
class TrainResult:
    nets: RelationNets
    policy: PolicyNet
    history: list


def micro_f1(predictions, truths) -> float:
    tp = fp = fn = 0
    for p, g in zip(predictions, truths):
        tp += int(np.sum(p & g))
        fp += int(np.sum(p & ~g))
        fn += int(np.sum(~p & g))
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def validate(nets: RelationNets, scenes: Sequence[Scene], fraction: float) -> float:
    cfg = AdaptationConfig(fraction=fraction)
    preds = [run_adaptation(s, nets, cfg).prediction for s in scenes]
    return micro_f1(preds, [s.adjacency for s in scenes])


def _snapshot(*stores):
    return [{k: v.copy() for k, v in st.state_arrays().items()} for st in stores]


def _restore(snap, *stores):
    for arrays, st in zip(snap, stores):
        st.load_arrays(arrays)


def alternate_train(
    scenes: Sequence[Scene],
    cfg: TrainConfig = TrainConfig(),
    net_cfg: NetConfig | None = None,
    out_dir=None,
    val_scenes: Sequence[Scene] | None = None,
) -> TrainResult:
    """Collect with the policy, fit the relation nets, update the policy; repeat."""
    net_cfg = net_cfg or NetConfig(lr=cfg.lr)
    scenes = list(scenes)
    if val_scenes is None:
        n_val = int(round(cfg.val_fraction * len(scenes)))
        val_scenes = scenes[len(scenes) - n_val :] if n_val else []
        scenes = scenes[: len(scenes) - n_val]
    nets = RelationNets(cfg.seed, net_cfg)
    policy = PolicyNet(derive_seed(cfg.seed, 7) % (2**32), net_cfg)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.jsonl").write_text("")
    dataset: list = []
    history = []
    best, best_snap, stale = -1.0, None, 0
    for loop in range(cfg.loops):
        rng = make_rng(derive_seed(cfg.seed, 1000 + loop))
        contexts = [nets.context(s) for s in scenes]
        order = rng.permutation(len(scenes))
        roll = collect_rollouts(
            contexts, policy, nets, cfg.budget, rng, order,
            random_explore=cfg.random_explore, allow_stop=cfg.allow_stop,
        )
        dataset = dataset + roll.dataset if cfg.accumulate else roll.dataset
        sup = train_supervised(dataset, nets, scenes, cfg, rng, cfg.supervised_batches, cfg.scene_batches)
        pstats = {}
        if not cfg.random_explore and roll.episodes:
            pstats = policy_update(roll.episodes, policy, contexts, cfg, rng)
        rewards = [s.reward for ep in roll.episodes for s in ep.steps if s.action < ep.steps[0].belief.shape[0]]
        row = {
            "loop": loop,
            "steps": roll.steps_used,
            "scenes_visited": len(roll.episodes),
            "mean_reward": float(np.mean(rewards)) if rewards else 0.0,
            "val_f1_10": validate(nets, val_scenes, 0.10) if val_scenes else 0.0,
            "val_f1_20": validate(nets, val_scenes, 0.20) if val_scenes else 0.0,
            "sup_loss": sup,
            "ppo": pstats,
        }
        history.append(row)
        log.info("loop %d: %s", loop, json.dumps(row, sort_keys=True))
        if out is not None:
            nets.save(out / f"loop{loop:02d}")
            policy.store.save(out / f"loop{loop:02d}.policy.ckpt")
            with open(out / "metrics.jsonl", "a") as fh:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        score = 0.5 * (row["val_f1_10"] + row["val_f1_20"])
        if score >= best + cfg.min_improvement:
            best, best_snap, stale = score, _snapshot(nets.br.store, nets.sr.store, policy.store), 0
        else:
            stale += 1
            if val_scenes and stale >= cfg.patience:
                log.info("validation F1 plateaued after loop %d", loop)
                break
    if best_snap is not None and val_scenes:
        _restore(best_snap, nets.br.store, nets.sr.store, policy.store)
    if out is not None:
        nets.save(out / "final")
        policy.store.save(out / "final.policy.ckpt")
        (out / "train_config.json").write_text(json.dumps(asdict(cfg), indent=1, sort_keys=True) + "\n")
    return TrainResult(nets, policy, history)
