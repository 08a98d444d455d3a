"""Procedural scenes with grammar-bound ground-truth relation graphs."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .catalog import (
    CATEGORIES,
    CATEGORY_BY_NAME,
    FAMILIES,
    RELATION_BY_ID,
    RoomFamilyConfig,
)
from .scene import (
    MANY_TO_MANY,
    Manifest,
    ManifestEntry,
    ObjectInstance,
    RelationGraph,
    Scene,
    normalize_pointcloud,
    renormalize_float32,
    save_manifest,
    save_scene,
)

log = logging.getLogger(__name__)

PROXIMITY_RADIUS = 0.5
MAX_LAYOUT_ATTEMPTS = 40
MAX_PLACE_TRIES = 200


class LayoutError(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based stream, identical on every platform for a given seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# layout


@dataclass
class _Placed:
    category: str
    center: np.ndarray


class _Layout:
    def __init__(self, cfg: RoomFamilyConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.ext = np.asarray(cfg.extent, dtype=float)
        self.items: list[_Placed] = []
        self.table = np.array(
            [rng.uniform(1.0, self.ext[0] - 1.0), rng.uniform(1.0, self.ext[1] - 1.0)]
        )
        # work surface: one 1.6 m stretch of counter along the y=0 wall
        self.counter = rng.uniform(0.3, max(0.3, self.ext[0] - 1.9))

    def free(self, c: np.ndarray) -> bool:
        d = self.cfg.min_center_distance
        return all(np.linalg.norm(p.center - c) >= d for p in self.items)

    def put(self, category: str, c: np.ndarray) -> bool:
        if not self.free(c):
            return False
        self.items.append(_Placed(category, np.asarray(c, dtype=float)))
        return True

    def wall_point(self, wall: int, along: float, z: float, depth: float = 0.05) -> np.ndarray:
        x, y = self.ext[0], self.ext[1]
        if wall == 0:
            return np.array([along, depth, z])
        if wall == 1:
            return np.array([along, y - depth, z])
        if wall == 2:
            return np.array([depth, along, z])
        return np.array([x - depth, along, z])

    def wall_length(self, wall: int) -> float:
        return self.ext[0] if wall < 2 else self.ext[1]

    def sample_spot(self, category: str) -> np.ndarray:
        tpl = CATEGORY_BY_NAME[category]
        rng, ext = self.rng, self.ext
        z = rng.uniform(*tpl.height)
        if tpl.placement == "wall":
            wall = int(rng.integers(4))
            along = rng.uniform(0.3, self.wall_length(wall) - 0.3)
            return self.wall_point(wall, along, z)
        if tpl.placement == "ceiling":
            return np.array([rng.uniform(0.5, ext[0] - 0.5), rng.uniform(0.5, ext[1] - 0.5), z])
        if tpl.placement == "floor":
            return np.array([rng.uniform(0.4, ext[0] - 0.4), rng.uniform(0.4, ext[1] - 0.4), z])
        if tpl.placement == "counter":
            return np.array([self.counter + rng.uniform(0, 1.6), rng.uniform(0.15, 0.55), z])
        xy = self.table + rng.uniform(-0.6, 0.6, size=2)
        return np.array([xy[0], xy[1], z])

    def place_free(self, category: str) -> None:
        for _ in range(MAX_PLACE_TRIES):
            if self.put(category, self.sample_spot(category)):
                return
        raise LayoutError(f"could not place {category!r} in {self.cfg.name} extent {tuple(self.ext)}")

    def place_group(self, trigger: str, responder: str, k: int, layout: str) -> None:
        rng = self.rng
        jit = lambda s: rng.normal(scale=s, size=3)  # noqa: E731
        if layout == "stove":
            cols = int(np.ceil(k / 2))
            rows = min(k, 2)
            width = 0.3 * cols
            if width + 0.6 > self.ext[0]:
                raise LayoutError(f"stove with {k} burners does not fit in {self.cfg.name}")
            xs = rng.uniform(0.3 + width / 2, self.ext[0] - 0.3 - width / 2)
            slots = [(c, r) for r in range(rows) for c in range(cols)][:k]
            for c, r in slots:
                pos = np.array([xs + (c - (cols - 1) / 2) * 0.3, 0.2 + 0.25 * r, 0.92]) + jit(0.01) * [1, 1, 0]
                if not self.put(responder, pos):
                    raise LayoutError("stove burners collide")
            for q in range(k):
                pos = np.array([xs + (q - (k - 1) / 2) * 0.12, 0.62, 0.85]) + jit(0.01) * [1, 1, 0]
                if not self.put(trigger, pos):
                    raise LayoutError("stove knobs collide")
        elif layout == "rack":
            wall = int(rng.integers(4))
            length = self.wall_length(wall)
            if 0.6 * k + 0.4 > length:
                raise LayoutError(f"{k} holders do not fit on a wall of {length} m")
            start = rng.uniform(0.3, length - 0.3 - 0.6 * (k - 1))
            for q in range(k):
                along = start + 0.6 * q + rng.normal(scale=0.02)
                z = rng.uniform(1.2, 1.5)
                h = self.wall_point(wall, along, z)
                t = self.wall_point(wall, along + rng.normal(scale=0.03), z - rng.uniform(0.25, 0.32), depth=0.08)
                if not (self.put(trigger, h) and self.put(responder, t)):
                    raise LayoutError("towel rack collides")
        elif layout == "ceiling":
            lamps: list[np.ndarray] = []
            for _ in range(MAX_PLACE_TRIES):
                if len(lamps) == k:
                    break
                c = self.sample_spot(responder)
                if all(np.linalg.norm(c[:2] - l[:2]) > 1.0 for l in lamps) and self.free(c):
                    lamps.append(c)
            if len(lamps) < k:
                raise LayoutError(f"{k} ceiling lamps do not fit in {self.cfg.name}")
            for c in lamps:
                self.put(responder, c)
            for c in lamps:
                # switch on the wall nearest to its lamp, slid along the wall a little
                dists = [c[1], self.ext[1] - c[1], c[0], self.ext[0] - c[0]]
                wall = int(np.argmin(dists))
                along = c[0] if wall < 2 else c[1]
                along = float(np.clip(along + rng.normal(scale=0.3), 0.3, self.wall_length(wall) - 0.3))
                tpl = CATEGORY_BY_NAME[trigger]
                placed = False
                for _ in range(MAX_PLACE_TRIES):
                    if self.put(trigger, self.wall_point(wall, along, rng.uniform(*tpl.height))):
                        placed = True
                        break
                    along = float(np.clip(along + rng.normal(scale=0.2), 0.3, self.wall_length(wall) - 0.3))
                if not placed:
                    raise LayoutError("could not place a switch")
        else:
            raise ValueError(f"unknown group layout {layout!r}")


# ---------------------------------------------------------------------------
# relation binding


def bind_relations(categories: Sequence[int], centers: np.ndarray, type_ids: Sequence[int]):
    """Ground-truth adjacency and per-edge type ids from the grammar.

    Many-to-many types connect every matching pair. One-to-one types bind
    greedily by ascending trigger-responder distance, ties to the lower
    responder index.
    """
    cats = np.asarray(categories)
    n = len(cats)
    adj = np.zeros((n, n), dtype=bool)
    etypes: dict = {}
    for tid in type_ids:
        rt = RELATION_BY_ID[tid]
        trig = np.flatnonzero(cats == rt.trigger_category)
        resp = np.flatnonzero(cats == rt.responder_category)
        if rt.arity == MANY_TO_MANY:
            pairs = [(i, j) for i in trig for j in resp]
        else:
            pairs = greedy_bind(trig, resp, centers)
        for i, j in pairs:
            adj[i, j] = True
            etypes[(int(i), int(j))] = tid
    return adj, etypes


def greedy_bind(triggers, responders, centers) -> list[tuple[int, int]]:
    cand = sorted(
        (float(np.linalg.norm(centers[i] - centers[j])), int(j), int(i))
        for i in triggers
        for j in responders
    )
    bound_t, bound_r, out = set(), set(), []
    for _, j, i in cand:
        if i in bound_t or j in bound_r:
            continue
        bound_t.add(i)
        bound_r.add(j)
        out.append((i, j))
    return sorted(out)


def greedy_matches_optimal(triggers, responders, centers) -> bool:
    if len(triggers) == 0 or len(responders) == 0:
        return True
    dist = np.linalg.norm(centers[triggers][:, None] - centers[responders][None], axis=-1)
    rows, cols = linear_sum_assignment(dist)
    optimal = sorted((int(triggers[r]), int(responders[c])) for r, c in zip(rows, cols))
    return optimal == greedy_bind(triggers, responders, centers)


# ---------------------------------------------------------------------------
# scenes


def _draw_counts(cfg: RoomFamilyConfig, rng: np.random.Generator):
    groups = [(g, int(rng.choice(g.count))) for g in cfg.groups]
    singles = []
    for name, lo, hi in cfg.inventory:
        singles += [name] * int(rng.integers(lo, hi + 1))
    nd = int(rng.integers(cfg.distractors[0], cfg.distractors[1] + 1))
    singles += [cfg.background[int(rng.integers(len(cfg.background)))] for _ in range(nd)]
    return groups, singles


def _layout(cfg: RoomFamilyConfig, rng: np.random.Generator) -> list[_Placed]:
    groups, singles = _draw_counts(cfg, rng)
    last = None
    for _ in range(MAX_LAYOUT_ATTEMPTS):
        lay = _Layout(cfg, rng)
        try:
            for g, k in groups:
                lay.place_group(g.trigger, g.responder, k, g.layout)
            for name in singles:
                lay.place_free(name)
        except LayoutError as exc:
            last = exc
            continue
        cats = np.array([CATEGORY_BY_NAME[p.category].category_id for p in lay.items])
        centers = np.stack([p.center for p in lay.items])
        ok = True
        for tid in cfg.relation_types:
            rt = RELATION_BY_ID[tid]
            if rt.arity == MANY_TO_MANY or rt.is_self:
                continue
            trig = np.flatnonzero(cats == rt.trigger_category)
            resp = np.flatnonzero(cats == rt.responder_category)
            if not greedy_matches_optimal(trig, resp, centers):
                ok = False
                break
        if ok:
            return lay.items
        last = LayoutError("greedy binding disagrees with optimal assignment")
    raise LayoutError(f"inventory unsatisfiable for family {cfg.name!r}: {last}")


def sample_object(category: str, center, rng: np.random.Generator, num_points: int) -> ObjectInstance:
    tpl = CATEGORY_BY_NAME[category]
    pts, _, scale = normalize_pointcloud(tpl.sample_raw(rng, num_points))
    return ObjectInstance(
        points=renormalize_float32(pts),
        center=np.asarray(center, dtype=float),
        scale=scale,
        category_id=tpl.category_id,
        roles=tpl.roles,
    )


def generate_scene(
    config: RoomFamilyConfig, seed: int, num_points: int = 2048, scene_id: str | None = None
) -> Scene:
    rng = make_rng(seed)
    items = _layout(config, rng)
    objects = [sample_object(p.category, p.center, rng, num_points) for p in items]
    order = rng.permutation(len(objects))
    objects = [objects[k] for k in order]
    cats = [o.category_id for o in objects]
    centers = np.stack([o.center for o in objects])
    adj, etypes = bind_relations(cats, centers, config.relation_types)
    return Scene(
        scene_id=scene_id or f"{config.name}-{seed:020d}",
        family=config.name,
        objects=objects,
        ground_truth=RelationGraph(adj, etypes),
        relation_types=[RELATION_BY_ID[t] for t in config.relation_types],
    )


# ---------------------------------------------------------------------------
# datasets


SPLITS = ("train", "test")


def dataset_plan(configs: Sequence[RoomFamilyConfig], train: int, test: int, seed: int):
    """(scene_id, family config, split, seed) for every scene; families round-robin."""
    plan = []
    for split_idx, (split, count) in enumerate(zip(SPLITS, (train, test))):
        for k in range(count):
            cfg = configs[k % len(configs)]
            fam_idx = FAMILY_ORDER.get(cfg.name, 99)
            s = derive_seed(seed, fam_idx, split_idx, k)
            plan.append((f"{split}-{k:04d}-{cfg.name}", cfg, split, s))
    ids = [p[0] for p in plan]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate scene ids in dataset plan")
    seeds = [p[3] for p in plan]
    if len(set(seeds)) != len(seeds):
        raise ValueError("scene seeds collide")
    return plan


FAMILY_ORDER = {name: k for k, name in enumerate(FAMILIES)}


def generate_dataset(
    configs: Sequence[RoomFamilyConfig],
    train: int,
    test: int,
    seed: int,
    num_points: int = 2048,
) -> tuple[list[Scene], list[str], dict]:
    """Scenes, their split tags and summary statistics."""
    if train < 0 or test < 0 or train + test == 0:
        raise ValueError("need at least one scene")
    plan = dataset_plan(configs, train, test, seed)
    scenes = [generate_scene(cfg, s, num_points, sid) for sid, cfg, _, s in plan]
    splits = [p[2] for p in plan]
    return scenes, splits, dataset_stats(scenes)


def dataset_stats(scenes: Sequence[Scene]) -> dict:
    n_obj = [s.n for s in scenes]
    n_edges = [int(s.adjacency.sum()) for s in scenes]
    triggers = sum(sum(o.is_trigger for o in s.objects) for s in scenes)
    close = total = 0
    cat_counts: dict[str, list[int]] = {c.name: [] for c in CATEGORIES}
    for s in scenes:
        c = s.centers
        for i, j in s.ground_truth.edges():
            total += 1
            close += np.linalg.norm(c[i] - c[j]) < PROXIMITY_RADIUS
        ids = [o.category_id for o in s.objects]
        for cat in CATEGORIES:
            cat_counts[cat.name].append(ids.count(cat.category_id))
    return {
        "scenes": len(scenes),
        "objects_per_scene": float(np.mean(n_obj)),
        "edges_per_scene": float(np.mean(n_edges)),
        "trigger_fraction": triggers / max(sum(n_obj), 1),
        "ifr_within_0.5m": close / max(total, 1),
        "total_objects": int(sum(n_obj)),
        "category_count_ranges": {
            k: [min(v), max(v)] for k, v in cat_counts.items() if v and max(v) > 0
        },
    }


def write_dataset(
    out_dir,
    configs: Sequence[RoomFamilyConfig],
    train: int,
    test: int,
    seed: int,
    num_points: int = 2048,
) -> Manifest:
    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    plan = dataset_plan(configs, train, test, seed)
    entries, scenes = [], []
    for sid, cfg, split, s in plan:
        scene = generate_scene(cfg, s, num_points, sid)
        rel = f"scenes/{sid}.json"
        save_scene(scene, out / rel)
        entries.append(ManifestEntry(sid, cfg.name, split, rel, s))
        scenes.append(scene)
    stats = dataset_stats(scenes)
    manifest = Manifest(entries=entries, root=out, stats=stats)
    save_manifest(manifest, out / "manifest.json")
    (out / "stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n")
    log.info("wrote %d scenes to %s; %.1f%% of relations within %.1f m",
             len(scenes), out, 100 * stats["ifr_within_0.5m"], PROXIMITY_RADIUS)
    return manifest


# ---------------------------------------------------------------------------
# category separability


def shape_descriptor(points: np.ndarray, rng: np.random.Generator, pairs: int = 2000) -> np.ndarray:
    """Rotation-free summary: D2 histogram, radial histogram, covariance spectrum."""
    a = points[rng.integers(len(points), size=pairs)]
    b = points[rng.integers(len(points), size=pairs)]
    d2 = np.histogram(np.linalg.norm(a - b, axis=1), bins=16, range=(0, 2))[0] / pairs
    rad = np.histogram(np.linalg.norm(points, axis=1), bins=8, range=(0, 1))[0] / len(points)
    eig = np.sort(np.linalg.eigvalsh(np.cov(points.T)))[::-1]
    return np.concatenate([d2, rad, 4 * eig])


def separability_score(
    samples_per_category: int = 12, num_points: int = 256, seed: int = 0, triplets: int = 4000
) -> float:
    """P(same-category pair is closer than a cross-category pair) under the descriptor."""
    rng = make_rng(seed)
    desc, labels = [], []
    for cat in CATEGORIES:
        for _ in range(samples_per_category):
            pts, _, _ = normalize_pointcloud(cat.sample_raw(rng, num_points))
            desc.append(shape_descriptor(pts, rng))
            labels.append(cat.category_id)
    desc, labels = np.array(desc), np.array(labels)
    wins = 0
    for _ in range(triplets):
        a = int(rng.integers(len(labels)))
        same = np.flatnonzero((labels == labels[a]) & (np.arange(len(labels)) != a))
        other = np.flatnonzero(labels != labels[a])
        p, q = rng.choice(same), rng.choice(other)
        wins += np.linalg.norm(desc[a] - desc[p]) < np.linalg.norm(desc[a] - desc[q])
    return wins / triplets
