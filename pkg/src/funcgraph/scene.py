"""Scenes, objects and functional relation graphs, plus their on-disk format.

A scene file is a JSON document with a ``.pts`` sidecar holding every
object's normalized points as little-endian float32, row-major, objects in
index order. Points are kept float32-representable in memory so the round
trip is exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntFlag
from pathlib import Path
from typing import Sequence

import numpy as np

SCENE_FORMAT_VERSION = 1
MANIFEST_FORMAT_VERSION = 1
NORM_TOL = 1e-6


class SceneFormatError(ValueError):
    pass


class VersionMismatchError(SceneFormatError):
    pass


class TruncatedFileError(SceneFormatError):
    pass


class InvariantViolationError(SceneFormatError):
    pass


class Role(IntFlag):
    BACKGROUND = 0
    TRIGGER = 1
    RESPONDER = 2


ONE_TO_ONE = "one_to_one"
MANY_TO_MANY = "many_to_many"


@dataclass(frozen=True)
class RelationType:
    type_id: int
    trigger_category: int
    responder_category: int
    arity: str

    def __post_init__(self):
        if self.arity not in (ONE_TO_ONE, MANY_TO_MANY):
            raise ValueError(f"unknown arity {self.arity!r}")

    @property
    def is_self(self) -> bool:
        return self.trigger_category == self.responder_category


@dataclass(frozen=True, eq=False)
class ObjectInstance:
    points: np.ndarray
    center: np.ndarray
    scale: float
    category_id: int
    roles: Role

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvariantViolationError(f"points must be P x 3, got {pts.shape}")
        if not self.scale > 0:
            raise InvariantViolationError(f"scale must be positive, got {self.scale}")
        if np.abs(pts.mean(axis=0)).max() > NORM_TOL:
            raise InvariantViolationError("points are not zero-centered")
        if abs(np.linalg.norm(pts, axis=1).max() - 1.0) > NORM_TOL:
            raise InvariantViolationError("points are not unit-sized")
        pts.setflags(write=False)
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "roles", Role(int(self.roles)))

    @property
    def is_trigger(self) -> bool:
        return bool(self.roles & Role.TRIGGER)

    @property
    def is_responder(self) -> bool:
        return bool(self.roles & Role.RESPONDER)


@dataclass(frozen=True, eq=False)
class RelationGraph:
    """Directed adjacency: entry (i, j) means triggering i changes j's state."""

    adjacency: np.ndarray
    edge_types: dict = field(default_factory=dict)  # (i, j) -> type_id

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise InvariantViolationError(f"adjacency must be square, got {adj.shape}")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        edges = {tuple(map(int, k)) for k in zip(*np.nonzero(adj))}
        if set(self.edge_types) != edges:
            raise InvariantViolationError("edge type labels do not match adjacency")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        return [tuple(map(int, e)) for e in zip(*np.nonzero(self.adjacency))]


@dataclass(frozen=True, eq=False)
class Scene:
    scene_id: str
    family: str
    objects: tuple
    ground_truth: RelationGraph
    relation_types: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "relation_types", tuple(self.relation_types))
        validate_scene(self)

    @property
    def n(self) -> int:
        return len(self.objects)

    @property
    def centers(self) -> np.ndarray:
        return np.stack([o.center for o in self.objects])

    @property
    def scales(self) -> np.ndarray:
        return np.array([o.scale for o in self.objects])

    @property
    def adjacency(self) -> np.ndarray:
        return self.ground_truth.adjacency

    def point_array(self) -> np.ndarray:
        """(n, P, 3) stack of normalized clouds; categories stay hidden."""
        return np.stack([o.points for o in self.objects])


def validate_scene(scene: Scene) -> None:
    if scene.n < 1:
        raise InvariantViolationError("a scene needs at least one object")
    gt = scene.ground_truth
    if gt.n != scene.n:
        raise InvariantViolationError(f"adjacency is {gt.n}x{gt.n} for {scene.n} objects")
    types = {rt.type_id: rt for rt in scene.relation_types}
    for (i, j), tid in gt.edge_types.items():
        a, b = scene.objects[i], scene.objects[j]
        if not a.is_trigger:
            raise InvariantViolationError(f"edge ({i},{j}) starts at non-trigger object {i}")
        if not b.is_responder:
            raise InvariantViolationError(f"edge ({i},{j}) ends at non-responder object {j}")
        rt = types.get(tid)
        if rt is None:
            raise InvariantViolationError(f"edge ({i},{j}) has unknown relation type {tid}")
        if (rt.trigger_category, rt.responder_category) != (a.category_id, b.category_id):
            raise InvariantViolationError(f"edge ({i},{j}) does not match relation type {tid}")
        if rt.is_self and i != j:
            raise InvariantViolationError(f"self relation type {tid} on distinct objects ({i},{j})")


def normalize_pointcloud(raw_points) -> tuple[np.ndarray, np.ndarray, float]:
    """Split a raw cloud into (zero-centered unit max-norm points, center, scale)."""
    raw = np.asarray(raw_points, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != 3:
        raise ValueError(f"expected P x 3 points, got {raw.shape}")
    if raw.shape[0] < 4:
        raise ValueError(f"need at least 4 points, got {raw.shape[0]}")
    center = raw.mean(axis=0)
    shifted = raw - center
    scale = float(np.linalg.norm(shifted, axis=1).max())
    if scale <= 1e-12:
        raise ValueError("degenerate point cloud: all points coincide")
    return shifted / scale, center, scale


def world_points(obj: ObjectInstance) -> np.ndarray:
    return obj.points * obj.scale + obj.center


def renormalize_float32(points: np.ndarray) -> np.ndarray:
    """Round to float32 then re-center/re-scale so the stored form still normalizes."""
    p = np.asarray(points, dtype=np.float64)
    for _ in range(4):
        p = p - p.mean(axis=0)
        p = p / np.linalg.norm(p, axis=1).max()
        p = p.astype(np.float32).astype(np.float64)
        if (
            np.abs(p.mean(axis=0)).max() <= NORM_TOL / 4
            and abs(np.linalg.norm(p, axis=1).max() - 1.0) <= NORM_TOL / 4
        ):
            break
    return p


# ---------------------------------------------------------------------------
# serialization


def scene_to_dict(scene: Scene, sidecar_name: str) -> dict:
    return {
        "format_version": SCENE_FORMAT_VERSION,
        "scene_id": scene.scene_id,
        "family": scene.family,
        "points_file": sidecar_name,
        "num_points": [int(o.points.shape[0]) for o in scene.objects],
        "objects": [
            {
                "index": k,
                "center": [float(x) for x in o.center],
                "scale": o.scale,
                "category_id": o.category_id,
                "roles": int(o.roles),
            }
            for k, o in enumerate(scene.objects)
        ],
        "relation_types": [
            {
                "type_id": rt.type_id,
                "trigger_category": rt.trigger_category,
                "responder_category": rt.responder_category,
                "arity": rt.arity,
            }
            for rt in scene.relation_types
        ],
        "relations": [
            {"trigger": i, "responder": j, "type_id": scene.ground_truth.edge_types[(i, j)]}
            for i, j in scene.ground_truth.edges()
        ],
    }


def save_scene(scene: Scene, path) -> None:
    path = Path(path)
    sidecar = path.with_suffix(".pts")
    doc = scene_to_dict(scene, sidecar.name)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    blob = np.concatenate([o.points.astype("<f4").reshape(-1) for o in scene.objects])
    sidecar.write_bytes(blob.tobytes())


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TruncatedFileError(f"{path}: unreadable scene document ({exc})") from exc
    version = doc.get("format_version")
    if version != SCENE_FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: scene format version {version}, expected {SCENE_FORMAT_VERSION}"
        )
    try:
        counts = doc["num_points"]
        objects_doc = doc["objects"]
        sidecar = path.parent / doc["points_file"]
    except KeyError as exc:
        raise TruncatedFileError(f"{path}: missing field {exc}") from exc
    raw = sidecar.read_bytes() if sidecar.exists() else b""
    expected = 12 * sum(counts)
    if len(raw) != expected:
        raise TruncatedFileError(f"{sidecar}: {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    objects = []
    offset = 0
    for od, count in zip(objects_doc, counts):
        pts = flat[offset : offset + 3 * count].reshape(count, 3)
        offset += 3 * count
        objects.append(
            ObjectInstance(
                points=pts,
                center=np.array(od["center"]),
                scale=od["scale"],
                category_id=od["category_id"],
                roles=Role(od["roles"]),
            )
        )
    rtypes = [RelationType(**rt) for rt in doc["relation_types"]]
    n = len(objects)
    adj = np.zeros((n, n), dtype=bool)
    etypes = {}
    for rel in doc["relations"]:
        i, j = rel["trigger"], rel["responder"]
        if not (0 <= i < n and 0 <= j < n):
            raise InvariantViolationError(f"{path}: relation ({i},{j}) out of range")
        adj[i, j] = True
        etypes[(i, j)] = rel["type_id"]
    return Scene(
        scene_id=doc["scene_id"],
        family=doc["family"],
        objects=objects,
        ground_truth=RelationGraph(adj, etypes),
        relation_types=rtypes,
    )


@dataclass
class ManifestEntry:
    scene_id: str
    family: str
    split: str
    file: str
    seed: int


@dataclass
class Manifest:
    entries: list
    root: Path = Path(".")
    stats: dict = field(default_factory=dict)

    def split(self, name: str) -> list:
        return [e for e in self.entries if e.split == name]

    def load(self, split: str | None = None, family: str | None = None) -> list[Scene]:
        return [
            load_scene(self.root / e.file)
            for e in self.entries
            if (split is None or e.split == split) and (family is None or e.family == family)
        ]


def save_manifest(manifest: Manifest, path) -> None:
    doc = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "scenes": [
            {"scene_id": e.scene_id, "family": e.family, "split": e.split, "file": e.file, "seed": e.seed}
            for e in manifest.entries
        ],
        "stats": manifest.stats,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_manifest(path) -> Manifest:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: manifest version {doc.get('format_version')}")
    entries = [ManifestEntry(**e) for e in doc["scenes"]]
    ids = [e.scene_id for e in entries]
    if len(set(ids)) != len(ids):
        raise SceneFormatError(f"{path}: duplicate scene ids")
    return Manifest(entries=entries, root=path.parent, stats=doc.get("stats", {}))


def permute_scene(scene: Scene, order: Sequence[int], scene_id: str | None = None) -> Scene:
    """Reorder objects; new index k holds old object order[k]."""
    order = list(order)
    inv = {old: new for new, old in enumerate(order)}
    adj = scene.adjacency[np.ix_(order, order)]
    etypes = {(inv[i], inv[j]): t for (i, j), t in scene.ground_truth.edge_types.items()}
    return Scene(
        scene_id=scene_id or scene.scene_id,
        family=scene.family,
        objects=[scene.objects[k] for k in order],
        ground_truth=RelationGraph(adj, etypes),
        relation_types=scene.relation_types,
    )
