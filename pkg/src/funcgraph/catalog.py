"""Desk-scale object catalog, relation grammar and room families.

Shapes are unions of surface-sampled primitives. Sizes are in meters, so the
scale recovered by normalization is a physical size.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .scene import MANY_TO_MANY, ONE_TO_ONE, RelationType, Role

T, R, B = Role.TRIGGER, Role.RESPONDER, Role.BACKGROUND


# ---------------------------------------------------------------------------
# surface samplers; each returns (points, area) in the part's local frame


def _axis_frame(pts: np.ndarray, axis: str) -> np.ndarray:
    # primitives are built along z; rotate so that axis becomes the long axis
    if axis == "z":
        return pts
    if axis == "x":
        return pts[:, [2, 1, 0]]
    return pts[:, [0, 2, 1]]


def box_area(sx, sy, sz):
    return 2 * (sx * sy + sy * sz + sx * sz)


def sample_box(rng, n, sx, sy, sz):
    areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=(n, 3)) * np.array([sx, sy, sz])
    axis = face // 2
    sign = np.where(face % 2 == 0, -0.5, 0.5)
    half = np.array([sx, sy, sz])[axis] * sign
    u[np.arange(n), axis] = half
    return u


def cylinder_area(r, h):
    return 2 * np.pi * r * h + 2 * np.pi * r * r


def sample_cylinder(rng, n, r, h, axis="z"):
    side, cap = 2 * np.pi * r * h, np.pi * r * r
    kind = rng.choice(3, size=n, p=np.array([side, cap, cap]) / (side + 2 * cap))
    theta = rng.uniform(0, 2 * np.pi, size=n)
    rad = np.where(kind == 0, r, r * np.sqrt(rng.uniform(0, 1, size=n)))
    z = np.where(kind == 0, rng.uniform(-h / 2, h / 2, size=n), np.where(kind == 1, -h / 2, h / 2))
    pts = np.stack([rad * np.cos(theta), rad * np.sin(theta), z], axis=1)
    return _axis_frame(pts, axis)


def sphere_area(r):
    return 4 * np.pi * r * r


def sample_sphere(rng, n, r, lower_half=False):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if lower_half:
        v[:, 2] = -np.abs(v[:, 2])
    return v * r


def cone_area(r, h):
    return np.pi * r * (r + np.hypot(r, h))


def sample_cone(rng, n, r, h):
    lateral, base = np.pi * r * np.hypot(r, h), np.pi * r * r
    on_side = rng.uniform(size=n) < lateral / (lateral + base)
    theta = rng.uniform(0, 2 * np.pi, size=n)
    # area-uniform along the slant: radius grows with sqrt
    t = np.sqrt(rng.uniform(0, 1, size=n))
    rad = np.where(on_side, r * t, r * np.sqrt(rng.uniform(0, 1, size=n)))
    z = np.where(on_side, h / 2 - h * t, -h / 2)
    return np.stack([rad * np.cos(theta), rad * np.sin(theta), z], axis=1)


def torus_area(big, small):
    return 4 * np.pi * np.pi * big * small


def sample_torus(rng, n, big, small):
    # rejection on the tube angle for area uniformity
    out = np.empty((0, 3))
    while out.shape[0] < n:
        m = 2 * (n - out.shape[0]) + 8
        u = rng.uniform(0, 2 * np.pi, size=m)
        v = rng.uniform(0, 2 * np.pi, size=m)
        keep = rng.uniform(size=m) < (big + small * np.cos(v)) / (big + small)
        u, v = u[keep], v[keep]
        pts = np.stack(
            [(big + small * np.cos(v)) * np.cos(u), (big + small * np.cos(v)) * np.sin(u), small * np.sin(v)],
            axis=1,
        )
        out = np.concatenate([out, pts])
    return out[:n]


@dataclass(frozen=True)
class Part:
    kind: str
    dims: tuple
    offset: tuple = (0.0, 0.0, 0.0)
    axis: str = "z"

    def area(self) -> float:
        d = self.dims
        if self.kind == "box":
            return box_area(*d)
        if self.kind == "cylinder":
            return cylinder_area(*d)
        if self.kind in ("sphere", "dome"):
            return sphere_area(d[0]) * (0.5 if self.kind == "dome" else 1.0)
        if self.kind == "cone":
            return cone_area(*d)
        if self.kind == "torus":
            return torus_area(*d)
        raise ValueError(f"unknown part kind {self.kind!r}")

    def sample(self, rng, n) -> np.ndarray:
        d = self.dims
        if self.kind == "box":
            pts = sample_box(rng, n, *d)
        elif self.kind == "cylinder":
            pts = sample_cylinder(rng, n, *d, axis=self.axis)
        elif self.kind == "sphere":
            pts = sample_sphere(rng, n, d[0])
        elif self.kind == "dome":
            pts = sample_sphere(rng, n, d[0], lower_half=True)
        elif self.kind == "cone":
            pts = sample_cone(rng, n, *d)
        else:
            pts = sample_torus(rng, n, *d)
        return pts + np.asarray(self.offset)


@dataclass(frozen=True)
class CategoryTemplate:
    category_id: int
    name: str
    roles: Role
    parts: tuple
    placement: str  # wall | ceiling | floor | counter | table
    height: tuple  # z range of the center, meters
    stretch: float = 0.12  # anisotropic per-axis stretch is uniform(1-s, 1+s)
    noise: float = 0.004  # point jitter sigma, meters

    def sample_raw(self, rng: np.random.Generator, num_points: int) -> np.ndarray:
        areas = np.array([p.area() for p in self.parts])
        alloc = rng.multinomial(num_points, areas / areas.sum())
        pts = np.concatenate([p.sample(rng, k) for p, k in zip(self.parts, alloc) if k > 0])
        pts = pts * rng.uniform(1 - self.stretch, 1 + self.stretch, size=3)
        pts = pts + rng.normal(scale=self.noise, size=pts.shape)
        return pts[rng.permutation(pts.shape[0])]


def _c(i, name, roles, parts, placement, height, **kw):
    return CategoryTemplate(i, name, roles, tuple(parts), placement, height, **kw)


CATEGORIES: tuple[CategoryTemplate, ...] = (
    _c(0, "switch", T,
       [Part("box", (0.08, 0.012, 0.12)), Part("box", (0.02, 0.02, 0.035), (0, -0.014, 0))],
       "wall", (1.1, 1.3)),
    _c(1, "ceiling_lamp", R,
       [Part("dome", (0.22,)), Part("cylinder", (0.015, 0.2), (0, 0, 0.1))],
       "ceiling", (2.3, 2.4)),
    _c(2, "desk_lamp", T | R,
       [Part("cylinder", (0.08, 0.02)), Part("cylinder", (0.01, 0.35), (0, 0, 0.18)),
        Part("cone", (0.1, 0.12), (0.05, 0, 0.38))],
       "table", (0.9, 0.95)),
    _c(3, "knob", T,
       [Part("cylinder", (0.022, 0.025)), Part("box", (0.008, 0.04, 0.014), (0, 0, 0.018))],
       "counter", (0.85, 0.85)),
    _c(4, "burner", R,
       [Part("torus", (0.08, 0.012)), Part("cylinder", (0.035, 0.01))],
       "counter", (0.92, 0.92)),
    _c(5, "remote", T,
       [Part("box", (0.05, 0.18, 0.02)), Part("box", (0.03, 0.05, 0.006), (0, 0.05, 0.013))],
       "table", (0.5, 0.8)),
    _c(6, "tv", R,
       [Part("box", (1.0, 0.05, 0.6), (0, 0, 0.35)), Part("box", (0.3, 0.2, 0.03)),
        Part("box", (0.05, 0.04, 0.05), (0, 0, 0.04))],
       "wall", (0.9, 1.2)),
    _c(7, "speaker", R,
       [Part("box", (0.2, 0.2, 0.4)), Part("cylinder", (0.07, 0.01), (0, -0.105, 0.05), axis="y")],
       "floor", (0.2, 0.25)),
    _c(8, "microwave", T | R,
       [Part("box", (0.5, 0.35, 0.3)), Part("cylinder", (0.01, 0.2), (0.2, -0.19, 0))],
       "counter", (1.05, 1.05)),
    _c(9, "knife", T,
       [Part("box", (0.25, 0.003, 0.04), (0.08, 0, 0)),
        Part("cylinder", (0.012, 0.11), (-0.11, 0, 0), axis="x")],
       "counter", (0.92, 0.92)),
    _c(10, "fruit", R,
       [Part("sphere", (0.045,)), Part("cylinder", (0.004, 0.015), (0, 0, 0.05))],
       "counter", (0.95, 0.95)),
    _c(11, "holder", T,
       [Part("cylinder", (0.01, 0.5), (0, -0.05, 0), axis="x"),
        Part("box", (0.02, 0.06, 0.04), (-0.24, -0.02, 0)), Part("box", (0.02, 0.06, 0.04), (0.24, -0.02, 0))],
       "wall", (1.0, 1.5)),
    _c(12, "towel", R,
       [Part("box", (0.4, 0.004, 0.5), (0, -0.012, -0.25)), Part("box", (0.4, 0.004, 0.4), (0, 0.012, -0.2)),
        Part("cylinder", (0.012, 0.4), (0, 0, 0), axis="x")],
       "wall", (0.8, 1.2)),
    _c(13, "chair", B,
       [Part("box", (0.45, 0.45, 0.04), (0, 0, 0.45)), Part("box", (0.45, 0.04, 0.45), (0, 0.2, 0.7))]
       + [Part("cylinder", (0.015, 0.45), (sx * 0.2, sy * 0.2, 0.22)) for sx in (-1, 1) for sy in (-1, 1)],
       "floor", (0.45, 0.5)),
    _c(14, "box", B, [Part("box", (0.4, 0.4, 0.4))], "floor", (0.2, 0.25), stretch=0.25),
    _c(15, "plant", B,
       [Part("cylinder", (0.1, 0.2), (0, 0, 0.1)), Part("sphere", (0.18,), (0, 0, 0.35))],
       "floor", (0.3, 0.35)),
)

CATEGORY_BY_NAME = {c.name: c for c in CATEGORIES}


def category_id(name: str) -> int:
    return CATEGORY_BY_NAME[name].category_id


def _rt(i, trig, resp, arity):
    return RelationType(i, category_id(trig), category_id(resp), arity)


RELATION_TYPES: tuple[RelationType, ...] = (
    _rt(0, "switch", "ceiling_lamp", ONE_TO_ONE),
    _rt(1, "knob", "burner", ONE_TO_ONE),
    _rt(2, "holder", "towel", ONE_TO_ONE),
    _rt(3, "remote", "tv", MANY_TO_MANY),
    _rt(4, "remote", "speaker", MANY_TO_MANY),
    _rt(5, "knife", "fruit", MANY_TO_MANY),
    _rt(6, "microwave", "fruit", MANY_TO_MANY),
    _rt(7, "desk_lamp", "desk_lamp", ONE_TO_ONE),
    _rt(8, "microwave", "microwave", ONE_TO_ONE),
)

RELATION_BY_ID = {rt.type_id: rt for rt in RELATION_TYPES}


@dataclass(frozen=True)
class GroupSpec:
    """K triggers and K responders laid out together (ambiguity group)."""

    trigger: str
    responder: str
    count: tuple  # candidate K values
    layout: str  # stove | rack | ceiling


@dataclass(frozen=True)
class RoomFamilyConfig:
    name: str
    extent: tuple  # x, y, z in meters
    inventory: tuple  # ((category name, lo, hi), ...) for free-standing objects
    groups: tuple  # GroupSpec, ...
    relation_types: tuple  # type ids active in this family
    background: tuple = ("chair", "box", "plant")
    distractors: tuple = (1, 3)
    min_center_distance: float = 0.08

    def __post_init__(self):
        if min(self.extent[:2]) < 2.0:
            raise ValueError(f"{self.name}: room extent {self.extent} below the 2 m floor minimum")
        present = {name for name, _, _ in self.inventory}
        present |= {g.trigger for g in self.groups} | {g.responder for g in self.groups}
        present_ids = {category_id(n) for n in present}
        for tid in self.relation_types:
            rt = RELATION_BY_ID[tid]
            if rt.trigger_category not in present_ids or rt.responder_category not in present_ids:
                raise ValueError(f"{self.name}: relation type {tid} references categories not in inventory")

    def with_groups(self, **changes) -> "RoomFamilyConfig":
        return replace(self, **changes)


FAMILIES: dict[str, RoomFamilyConfig] = {
    "kitchen": RoomFamilyConfig(
        name="kitchen",
        extent=(4.0, 3.5, 2.6),
        inventory=(("microwave", 0, 1), ("knife", 1, 2), ("fruit", 1, 3)),
        groups=(GroupSpec("knob", "burner", (2, 3, 4), "stove"), GroupSpec("switch", "ceiling_lamp", (1,), "ceiling")),
        relation_types=(0, 1, 5, 6, 8),
        distractors=(1, 2),
    ),
    "bathroom": RoomFamilyConfig(
        name="bathroom",
        extent=(3.0, 2.5, 2.6),
        inventory=(),
        groups=(GroupSpec("holder", "towel", (2, 3), "rack"), GroupSpec("switch", "ceiling_lamp", (1, 2), "ceiling")),
        relation_types=(0, 2),
        distractors=(2, 4),
    ),
    "bedroom": RoomFamilyConfig(
        name="bedroom",
        extent=(4.0, 4.0, 2.6),
        inventory=(("desk_lamp", 1, 2),),
        groups=(GroupSpec("switch", "ceiling_lamp", (1, 2), "ceiling"),),
        relation_types=(0, 7),
        distractors=(3, 5),
    ),
    "living_room": RoomFamilyConfig(
        name="living_room",
        extent=(5.0, 4.0, 2.6),
        inventory=(("remote", 1, 2), ("tv", 1, 1), ("speaker", 0, 2), ("desk_lamp", 0, 1)),
        groups=(GroupSpec("switch", "ceiling_lamp", (1, 2, 3), "ceiling"),),
        relation_types=(0, 3, 4, 7),
        distractors=(2, 4),
    ),
}

FAMILY_NAMES = tuple(FAMILIES)


def family_categories(cfg: RoomFamilyConfig) -> set[str]:
    names = {name for name, _, _ in cfg.inventory} | set(cfg.background)
    names |= {g.trigger for g in cfg.groups} | {g.responder for g in cfg.groups}
    return names


def family_from_dict(d) -> RoomFamilyConfig:
    """A family by name, or a named base family with field overrides.

    ``{"base": "kitchen", "name": "kitchen_k2", "groups": [{"trigger": "knob",
    "responder": "burner", "count": [2], "layout": "stove"}]}``
    """
    if isinstance(d, str):
        return FAMILIES[d]
    d = dict(d)
    base = FAMILIES[d.pop("base", d.get("name"))]
    if "groups" in d:
        d["groups"] = tuple(GroupSpec(g["trigger"], g["responder"], tuple(g["count"]), g["layout"]) for g in d["groups"])
    if "inventory" in d:
        d["inventory"] = tuple(tuple(x) for x in d["inventory"])
    for key in ("extent", "relation_types", "background", "distractors"):
        if key in d:
            d[key] = tuple(d[key])
    return base.with_groups(**d)
