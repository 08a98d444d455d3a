"""Interaction environment: trigger one object per step, observe its effect row."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .scene import Scene

REWARD_ALPHA = 2.0
REWARD_BETA = 1.0
REWARD_COST = 1.0


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class ObservationRow:
    trigger: int
    effects: np.ndarray  # bool, length n

    def bitstring(self) -> str:
        return "".join("1" if e else "0" for e in self.effects)


@dataclass(frozen=True, eq=False)
class EnvState:
    scene: Scene
    belief: np.ndarray
    interacted: tuple = ()
    t: int = 0
    budget: int = 0
    observations: dict = field(default_factory=dict)  # trigger -> effect row

    def clamped(self, belief: np.ndarray) -> np.ndarray:
        out = np.array(belief, dtype=float, copy=True)
        for i, row in self.observations.items():
            out[i] = row
        return out


@dataclass(frozen=True)
class StepResult:
    observation: ObservationRow | None
    reward: float
    state: EnvState
    terminal: bool


def check_belief(belief, n: int) -> np.ndarray:
    b = np.asarray(belief, dtype=float)
    if b.shape != (n, n):
        raise ValueError(f"belief must be {n}x{n}, got {b.shape}")
    if not np.all((b >= 0.0) & (b <= 1.0)):
        raise ValueError("belief entries must lie in [0, 1]")
    return b


def reward_of(
    belief: np.ndarray,
    i: int,
    effects: np.ndarray,
    alpha: float = REWARD_ALPHA,
    beta: float = REWARD_BETA,
    cost: float = REWARD_COST,
) -> float:
    """Correction term on the worst entry of row i, plus a bonus if anything changed."""
    row = np.asarray(belief, dtype=float)[i]
    e = np.asarray(effects, dtype=float)
    if row.shape != e.shape:
        raise ValueError(f"belief row {row.shape} vs effects {e.shape}")
    return float(alpha * np.max(np.abs(row - e)) + beta * float(e.any()) - cost)


class InteractionEnv:
    """Reset/step contract over one scene with a per-episode budget.

    Observations are noiseless: triggering i always returns row i of the
    ground-truth adjacency.
    """

    def __init__(self, scene: Scene, budget: int | None = None):
        self.scene = scene
        self.default_budget = scene.n if budget is None else int(budget)
        self.state: EnvState | None = None

    @property
    def n(self) -> int:
        return self.scene.n

    def reset(self, initial_belief, budget: int | None = None) -> EnvState:
        b = check_belief(initial_belief, self.n).copy()
        budget = self.default_budget if budget is None else int(budget)
        if budget < 0:
            raise ValueError("budget must be non-negative")
        self.state = EnvState(scene=self.scene, belief=b, budget=budget)
        return self.state

    def observe(self, i: int) -> ObservationRow:
        if not 0 <= i < self.n:
            raise IndexError(f"object index {i} out of range for {self.n} objects")
        return ObservationRow(int(i), self.scene.adjacency[i].copy())

    def step(self, action: int) -> StepResult:
        s = self._require_state()
        if not 0 <= action < self.n:
            raise IndexError(f"object index {action} out of range for {self.n} objects")
        if s.budget <= 0:
            return StepResult(None, 0.0, s, True)
        obs = self.observe(action)
        reward = reward_of(s.belief, action, obs.effects)
        observations = dict(s.observations)
        observations[int(action)] = obs.effects.astype(float)
        interacted = s.interacted if action in s.interacted else s.interacted + (int(action),)
        belief = s.belief.copy()
        belief[action] = obs.effects
        self.state = replace(
            s,
            belief=belief,
            interacted=interacted,
            t=s.t + 1,
            budget=s.budget - 1,
            observations=observations,
        )
        return StepResult(obs, reward, self.state, self.state.budget == 0)

    def set_belief(self, belief) -> EnvState:
        """Install an updated belief; observed rows stay clamped to their observations."""
        s = self._require_state()
        b = check_belief(belief, self.n)
        self.state = replace(s, belief=s.clamped(b))
        return self.state

    def _require_state(self) -> EnvState:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        return self.state


# ---------------------------------------------------------------------------
# interaction log


@dataclass(frozen=True)
class LogRecord:
    scene_id: str
    t: int
    trigger: int
    effects: str  # bitstring, one char per object
    reward: float

    def to_json(self) -> str:
        return json.dumps(
            {"scene_id": self.scene_id, "t": self.t, "i": self.trigger, "effects": self.effects, "reward": self.reward},
            sort_keys=True,
        )


def write_log(records: Iterable[LogRecord], path) -> None:
    Path(path).write_text("".join(r.to_json() + "\n" for r in records))


def read_log(path) -> list[LogRecord]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        out.append(LogRecord(d["scene_id"], d["t"], d["i"], d["effects"], d["reward"]))
    return out


def effects_from_bits(bits: str) -> np.ndarray:
    return np.array([c == "1" for c in bits], dtype=bool)
