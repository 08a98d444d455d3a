"""Train on a small synthetic set and compare the prior with test-time
adaptation at two budgets. Runs in about a minute."""
import logging

from funcgraph.catalog import FAMILIES
from funcgraph.evaluation import format_table, run_method
from funcgraph.explore import TrainConfig, alternate_train
from funcgraph.generator import generate_dataset

logging.basicConfig(level=logging.INFO, format="%(message)s")

scenes, splits, stats = generate_dataset(list(FAMILIES.values()), 60, 20, seed=1, num_points=128)
train = [s for s, sp in zip(scenes, splits) if sp == "train"]
test = [s for s, sp in zip(scenes, splits) if sp == "test"]
print(f"mean objects per scene {stats['objects_per_scene']:.1f}")

result = alternate_train(train, TrainConfig(seed=0, budget=200, loops=3, scene_batches=100))
reports = [
    run_method("random", test, None, "frac10").report,
    run_method("prior_only", test, result.nets).report,
    run_method("ours_final", test, result.nets, "frac10").report,
    run_method("ours_final", test, result.nets, "frac20").report,
    run_method("ours_final", test, result.nets, "certainty").report,
]
print(format_table(reports))
