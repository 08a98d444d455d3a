"""Functional scene graphs inferred from interaction.

Synthetic scene generation, a pairwise geometric prior, a shared graph
network for scene-level prior and posterior beliefs, an exploration policy
trained with PPO, and test-time adaptation under an interaction budget.
"""
from .adaptation import AdaptationConfig, run_adaptation
from .env import InteractionEnv
from .evaluation import compute_metrics, run_method
from .explore import TrainConfig, alternate_train
from .generator import generate_dataset, generate_scene
from .nets import NetConfig, RelationNets
from .scene import Scene, load_scene, save_scene

__all__ = [
    "AdaptationConfig",
    "InteractionEnv",
    "NetConfig",
    "RelationNets",
    "Scene",
    "TrainConfig",
    "alternate_train",
    "compute_metrics",
    "generate_dataset",
    "generate_scene",
    "load_scene",
    "run_adaptation",
    "run_method",
    "save_scene",
]
