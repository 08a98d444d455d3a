"""Point encoder, pairwise prior, and the scene graph network shared by the
prior and posterior passes."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.linalg import block_diag

from . import tensor as tk
from .scene import Scene
from .tensor import ParamStore, Tensor

GEOM_DIM = 64
EMBED_DIM = 32
EDGE_GAMMA = 0.6
EDGE_RADIUS = 0.5
EDGE_MODES = ("combined", "prior_only", "distance_only", "ones")


@dataclass(frozen=True)
class NetConfig:
    encoder_hidden: tuple = (64, 128)
    geom_dim: int = GEOM_DIM
    br_hidden: int = 64
    node_hidden: int = 64
    gcn_widths: tuple = (64, 64, EMBED_DIM)
    pair_hidden: int = 32
    edge_gamma: float = EDGE_GAMMA
    edge_radius: float = EDGE_RADIUS
    edge_mode: str = "combined"
    # pair head also sees the projected node input; counters oversmoothing in dense clusters
    pair_skip: bool = True
    lr: float = 1e-3

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


@lru_cache(maxsize=64)
def pair_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major (i, j) index arrays over all n*n ordered pairs."""
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return ii.reshape(-1), jj.reshape(-1)


def rows_index(n: int, rows) -> tuple[np.ndarray, np.ndarray]:
    rows = np.asarray(rows, dtype=np.intp)
    return np.repeat(rows, n), np.tile(np.arange(n), len(rows))


def _mlp_params(store: ParamStore, rng, prefix: str, sizes, out_gain: float = 1.0) -> None:
    last = len(sizes) - 2
    for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        store.add(f"{prefix}.w{k}", tk.init_weight(rng, a, b) * (out_gain if k == last else 1.0))
        store.add(f"{prefix}.b{k}", np.zeros(b))


def _mlp(store: ParamStore, prefix: str, x: Tensor, layers: int, final_act: bool = False) -> Tensor:
    for k in range(layers):
        x = tk.linear(x, store[f"{prefix}.w{k}"], store[f"{prefix}.b{k}"])
        if k < layers - 1 or final_act:
            x = tk.relu(x)
    return x


# ---------------------------------------------------------------------------
# geometry


class PointEncoder:
    """Shared per-point perceptron, max-pool over points, linear projection.

    Invariant to the order of points by construction.
    """

    def __init__(self, store: ParamStore, rng, cfg: NetConfig = NetConfig(), prefix: str = "enc"):
        self.store, self.prefix = store, prefix
        h1, h2 = cfg.encoder_hidden
        _mlp_params(store, rng, prefix + ".point", (3, h1, h2))
        _mlp_params(store, rng, prefix + ".proj", (h2, cfg.geom_dim))

    def __call__(self, points) -> Tensor:
        pts = tk.as_tensor(points)
        if pts.data.ndim == 2:
            pts = tk.reshape(pts, (1,) + pts.shape)
        if pts.data.ndim != 3 or pts.shape[2] != 3:
            raise tk.ShapeError(f"encoder expects (n, P, 3) points, got {pts.shape}")
        n, p, _ = pts.shape
        h = _mlp(self.store, self.prefix + ".point", tk.reshape(pts, (n * p, 3)), 2, final_act=True)
        pooled = tk.max_reduce(tk.reshape(h, (n, p, h.shape[1])), axis=1)
        return _mlp(self.store, self.prefix + ".proj", pooled, 1)


class BRPriorNet:
    """Pairwise relation prior from two shapes only; blind to layout."""

    def __init__(self, seed: int = 0, cfg: NetConfig = NetConfig()):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.store = ParamStore(lr=cfg.lr)
        self.encoder = PointEncoder(self.store, rng, cfg)
        _mlp_params(self.store, rng, "br.head", (2 * cfg.geom_dim, cfg.br_hidden, 1), out_gain=0.1)

    def pair_probs(self, feats: Tensor, ii, jj) -> Tensor:
        x = tk.concat([tk.take_rows(feats, ii), tk.take_rows(feats, jj)], axis=1)
        return tk.sigmoid(_mlp(self.store, "br.head", x, 2))

    def matrix(self, feats: Tensor) -> Tensor:
        n = feats.shape[0]
        ii, jj = pair_index(n)
        return tk.reshape(self.pair_probs(feats, ii, jj), (n, n))

    def __call__(self, points) -> np.ndarray:
        feats = self.encoder(points)
        return self.matrix(feats).data.copy()


# ---------------------------------------------------------------------------
# edges and graph convolution


def proximity_mask(centers: np.ndarray, radius: float = EDGE_RADIUS) -> np.ndarray:
    c = np.asarray(centers, dtype=float)
    d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
    close = d < radius
    np.fill_diagonal(close, False)
    return close


def build_edges(
    pair_weights,
    centers,
    gamma: float = EDGE_GAMMA,
    radius: float = EDGE_RADIUS,
    mode: str = "combined",
) -> np.ndarray:
    """Input edge weights for the graph convolution; zero diagonal.

    ``combined`` takes the larger of the pair belief and the proximity weight;
    the other modes exist for the edge-initialization ablation.
    """
    w = np.asarray(pair_weights, dtype=float)
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError(f"pair weights must be square, got {w.shape}")
    prox = gamma * proximity_mask(centers, radius)
    if mode == "combined":
        out = np.maximum(w, prox)
    elif mode == "prior_only":
        out = w.copy()
    elif mode == "distance_only":
        out = prox.astype(float)
    elif mode == "ones":
        out = np.ones((n, n))
    else:
        raise ValueError(f"unknown edge mode {mode!r}")
    np.fill_diagonal(out, 0.0)
    return out


def propagation_matrix(adjacency) -> np.ndarray:
    """Transpose of D^-1/2 (W + I) D^-1/2 with d_i = 1 + sum_j w_ji.

    Row i of (result @ H) is sum_j w_ji / sqrt(d_j d_i) * H_j, the self term
    entering with weight 1.
    """
    w = np.asarray(adjacency, dtype=float)
    if np.isnan(w).any():
        raise ValueError("adjacency contains NaN")
    d = 1.0 + w.sum(axis=0)
    a = w + np.eye(w.shape[0])
    inv = 1.0 / np.sqrt(d)
    return (inv[:, None] * a * inv[None, :]).T


def block_propagation(adjacencies) -> np.ndarray:
    """Propagation matrix of several disjoint graphs stacked node-wise."""
    return block_diag(*[propagation_matrix(a) for a in adjacencies])


def gcn_forward(node_features, adjacency, thetas, prop: np.ndarray | None = None) -> Tensor:
    """Three (or len(thetas)) propagation layers, ReLU between layers.

    ``prop`` overrides ``adjacency`` with a ready propagation matrix (batched graphs).
    """
    prop = Tensor(propagation_matrix(adjacency) if prop is None else prop)
    h = tk.as_tensor(node_features)
    for k, theta in enumerate(thetas):
        h = tk.matmul(prop, tk.matmul(h, theta))
        if k < len(thetas) - 1:
            h = tk.relu(h)
    return h


class SceneGraphNet:
    """Node projection, graph convolutions, pairwise head.

    The same parameters produce the scene prior (edges from the pairwise
    prior) and every posterior (edges from the clamped belief).
    """

    def __init__(self, seed: int = 0, cfg: NetConfig = NetConfig(), prefix: str = "sr", extra_node_dims: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.prefix = prefix
        self.store = ParamStore(lr=cfg.lr)
        self.in_dim = cfg.geom_dim + 4 + extra_node_dims
        _mlp_params(self.store, rng, prefix + ".node", (self.in_dim, cfg.node_hidden))
        widths = (cfg.node_hidden,) + tuple(cfg.gcn_widths)
        for k, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            self.store.add(f"{prefix}.theta{k}", tk.init_weight(rng, a, b))
        self.layers = len(cfg.gcn_widths)
        self._add_heads(rng)

    def _add_heads(self, rng) -> None:
        _mlp_params(self.store, rng, self.prefix + ".pair", (2 * self.embed_dim, self.cfg.pair_hidden, 1), out_gain=0.1)

    @property
    def embed_dim(self) -> int:
        return self.cfg.gcn_widths[-1] + (self.cfg.node_hidden if self.cfg.pair_skip else 0)

    @property
    def thetas(self) -> list[Tensor]:
        return [self.store[f"{self.prefix}.theta{k}"] for k in range(self.layers)]

    def embed(self, node_inputs, adjacency, prop: np.ndarray | None = None) -> Tensor:
        """Per-object embedding: the graph-convolution output, followed by
        the projected input when ``pair_skip`` is set."""
        h0 = _mlp(self.store, self.prefix + ".node", tk.as_tensor(node_inputs), 1, final_act=True)
        out = gcn_forward(h0, adjacency, self.thetas, prop)
        return tk.concat([out, h0], axis=1) if self.cfg.pair_skip else out

    def pair_probs(self, emb: Tensor, ii, jj) -> Tensor:
        x = tk.concat([tk.take_rows(emb, ii), tk.take_rows(emb, jj)], axis=1)
        return tk.sigmoid(_mlp(self.store, self.prefix + ".pair", x, 2))

    def scores(self, node_inputs, adjacency) -> Tensor:
        emb = self.embed(node_inputs, adjacency)
        n = emb.shape[0]
        ii, jj = pair_index(n)
        return tk.reshape(self.pair_probs(emb, ii, jj), (n, n))


# ---------------------------------------------------------------------------
# per-scene inference


def local_offsets(centers: np.ndarray, radius: float = EDGE_RADIUS) -> np.ndarray:
    """Center minus the mean center of its proximity neighborhood (itself included)."""
    c = np.asarray(centers, dtype=float)
    near = proximity_mask(c, radius) | np.eye(len(c), dtype=bool)
    return c - (near @ c) / near.sum(axis=1, keepdims=True)


def node_inputs(geom: np.ndarray, centers: np.ndarray, scales: np.ndarray, radius: float = EDGE_RADIUS) -> np.ndarray:
    """Geometry feature, center as a local offset (meters), scale.

    The offset is unchanged by moving a group of objects rigidly through the room.
    """
    return np.concatenate([geom, local_offsets(centers, radius), np.asarray(scales, dtype=float)[:, None]], axis=1)


def clamp_rows(belief: np.ndarray, observations: dict) -> np.ndarray:
    out = np.array(belief, dtype=float, copy=True)
    n = out.shape[0]
    for i, row in observations.items():
        if not 0 <= int(i) < n:
            raise IndexError(f"observation for object {i} in a {n}-object scene")
        out[int(i)] = row
    return out


@dataclass
class SceneContext:
    """Per-scene inputs computed once for fixed encoder weights."""

    scene: Scene
    geom: np.ndarray
    nodes: np.ndarray
    br: np.ndarray

    @property
    def n(self) -> int:
        return self.scene.n


class RelationNets:
    """The learned pair: pairwise prior network and the shared scene graph net."""

    def __init__(self, seed: int = 0, cfg: NetConfig = NetConfig()):
        self.cfg = cfg
        self.seed = seed
        self.br = BRPriorNet(seed * 2 + 1, cfg)
        self.sr = SceneGraphNet(seed * 2 + 2, cfg)

    # -- inference ---------------------------------------------------------
    def context(self, scene: Scene) -> SceneContext:
        return self.context_from(scene, self.br.encoder(scene.point_array()).data)

    def context_from(self, scene: Scene, geom: np.ndarray) -> SceneContext:
        """Context from already computed geometry features."""
        geom = np.array(geom, dtype=float, copy=True)
        br = self.br.matrix(Tensor(geom)).data.copy()
        return SceneContext(scene, geom, node_inputs(geom, scene.centers, scene.scales, self.cfg.edge_radius), br)

    def edges(self, ctx: SceneContext, source: np.ndarray, mode: str | None = None, gamma: float | None = None):
        return build_edges(
            source,
            ctx.scene.centers,
            gamma=self.cfg.edge_gamma if gamma is None else gamma,
            radius=self.cfg.edge_radius,
            mode=mode or self.cfg.edge_mode,
        )

    def scene_scores(self, ctx: SceneContext, edge_source: np.ndarray, **edge_kw) -> np.ndarray:
        return self.sr.scores(ctx.nodes, self.edges(ctx, edge_source, **edge_kw)).data.copy()

    def br_prior(self, ctx: SceneContext) -> np.ndarray:
        return ctx.br.copy()

    def scene_prior(self, ctx: SceneContext, **edge_kw) -> np.ndarray:
        return self.scene_scores(ctx, ctx.br, **edge_kw)

    def posterior_step(self, ctx: SceneContext, belief: np.ndarray, observations: dict, **edge_kw) -> np.ndarray:
        """Clamp observed rows, rerun the scene net, clamp again on the way out."""
        clamped = clamp_rows(belief, observations)
        out = self.scene_scores(ctx, clamped, **edge_kw)
        return clamp_rows(out, observations)

    # -- persistence -------------------------------------------------------
    def save(self, prefix) -> None:
        prefix = Path(prefix)
        self.br.store.save(prefix.with_name(prefix.name + ".br.ckpt"))
        self.sr.store.save(prefix.with_name(prefix.name + ".sr.ckpt"))
        prefix.with_name(prefix.name + ".card.json").write_text(self.cfg.to_json() + "\n")

    def load(self, prefix) -> "RelationNets":
        prefix = Path(prefix)
        self.br.store.load(prefix.with_name(prefix.name + ".br.ckpt"))
        self.sr.store.load(prefix.with_name(prefix.name + ".sr.ckpt"))
        return self


def load_card(prefix) -> NetConfig:
    prefix = Path(prefix)
    d = json.loads(prefix.with_name(prefix.name + ".card.json").read_text())
    return NetConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
