"""Test-time loop: interact with the most uncertain trigger, update, repeat."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .env import InteractionEnv, LogRecord
from .nets import RelationNets, SceneContext
from .scene import Scene

BUDGET_FRACTION = "budget_fraction"
CERTAINTY = "certainty"
STOP_GAMMA = 0.05
TAU = 0.9


class AllInteracted(RuntimeError):
    pass


@dataclass(frozen=True)
class AdaptationConfig:
    mode: str = BUDGET_FRACTION
    fraction: float = 0.10
    gamma_stop: float = STOP_GAMMA
    tau: float = TAU

    def __post_init__(self):
        if self.mode not in (BUDGET_FRACTION, CERTAINTY):
            raise ValueError(f"unknown adaptation mode {self.mode!r}")
        if not 0.0 < self.gamma_stop < 0.5:
            raise ValueError("gamma_stop must lie in (0, 0.5)")
        if not 0.5 < self.tau < 1.0:
            raise ValueError("tau must lie in (0.5, 1)")
        if self.fraction < 0:
            raise ValueError("fraction must be non-negative")

    def budget(self, n: int) -> int:
        if self.mode == CERTAINTY:
            return n
        # the epsilon keeps 0.2 * 15 from rounding up to 4
        return min(math.ceil(self.fraction * n - 1e-9), n)


def uncertainty(belief: np.ndarray) -> np.ndarray:
    b = np.asarray(belief, dtype=float)
    return np.minimum(b, 1.0 - b)


def select_next(belief: np.ndarray, interacted) -> int:
    """Object whose least certain entry is closest to 0.5; lowest index on ties."""
    n = belief.shape[0]
    score = uncertainty(belief).max(axis=1)
    allowed = np.ones(n, dtype=bool)
    allowed[list(interacted)] = False
    if not allowed.any():
        raise AllInteracted("every object has been interacted with")
    score = np.where(allowed, score, -np.inf)
    return int(np.argmax(score))


def should_stop(belief: np.ndarray, gamma: float = STOP_GAMMA) -> bool:
    return bool(np.all(uncertainty(belief) < gamma))


def random_selector(rng: np.random.Generator) -> Callable[[np.ndarray, tuple], int]:
    def pick(belief, interacted):
        left = [i for i in range(belief.shape[0]) if i not in set(interacted)]
        if not left:
            raise AllInteracted("every object has been interacted with")
        return int(left[int(rng.integers(len(left)))])

    return pick


def threshold(belief: np.ndarray, tau: float = TAU) -> np.ndarray:
    return np.asarray(belief) > tau


@dataclass
class AdaptationResult:
    prediction: np.ndarray
    belief: np.ndarray
    order: list
    log: list
    step_predictions: list = field(default_factory=list)  # prediction after t interactions

    @property
    def interactions(self) -> int:
        return len(self.order)


def run_adaptation(
    scene: Scene,
    nets: RelationNets,
    config: AdaptationConfig = AdaptationConfig(),
    ctx: SceneContext | None = None,
    initial_belief: np.ndarray | None = None,
    selector: Callable | None = None,
    max_steps: int | None = None,
    edge_kw: dict | None = None,
) -> AdaptationResult:
    """Run the interact/update loop on one scene and threshold the final belief."""
    ctx = ctx or nets.context(scene)
    edge_kw = edge_kw or {}
    belief = nets.scene_prior(ctx, **edge_kw) if initial_belief is None else np.asarray(initial_belief, float)
    select = selector or select_next
    budget = config.budget(scene.n) if max_steps is None else min(max_steps, scene.n)
    env = InteractionEnv(scene, budget=budget)
    state = env.reset(belief)
    records, order = [], []
    steps = [threshold(state.belief, config.tau)]
    while state.budget > 0 and len(state.interacted) < scene.n:
        if config.mode == CERTAINTY and should_stop(state.belief, config.gamma_stop):
            break
        i = select(state.belief, state.interacted)
        res = env.step(i)
        order.append(i)
        records.append(LogRecord(scene.scene_id, res.state.t - 1, i, res.observation.bitstring(), res.reward))
        post = nets.posterior_step(ctx, res.state.belief, res.state.observations, **edge_kw)
        state = env.set_belief(post)
        steps.append(threshold(state.belief, config.tau))
    return AdaptationResult(threshold(state.belief, config.tau), state.belief, order, records, steps)
