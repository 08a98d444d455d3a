"""Generate one kitchen, print its objects and relations, then step through
an interaction episode by hand."""
import numpy as np

from funcgraph.catalog import CATEGORIES, FAMILIES, RELATION_BY_ID
from funcgraph.env import InteractionEnv
from funcgraph.generator import generate_scene

scene = generate_scene(FAMILIES["kitchen"], seed=3, num_points=64)
print(f"{scene.scene_id}: {scene.n} objects, {int(scene.adjacency.sum())} relations")
for k, o in enumerate(scene.objects):
    print(f"  [{k:2d}] {CATEGORIES[o.category_id].name:<13} at {np.round(o.center, 2)}")
for (i, j), t in sorted(scene.ground_truth.edge_types.items()):
    rt = RELATION_BY_ID[t]
    kind = f"{CATEGORIES[rt.trigger_category].name} -> {CATEGORIES[rt.responder_category].name}, {rt.arity}"
    print(f"  {i} -> {j}  ({kind})")

env = InteractionEnv(scene)
env.reset(np.full((scene.n, scene.n), 0.5), budget=3)
for i in range(3):
    r = env.step(i)
    changed = np.flatnonzero(r.observation.effects).tolist()
    print(f"trigger {i}: changed {changed}, reward {r.reward:+.2f}, budget left {r.state.budget}")
