"""Metrics, baselines and ablations, transfer, edge-initialization sweep,
result rendering."""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .adaptation import (
    BUDGET_FRACTION,
    CERTAINTY,
    AdaptationConfig,
    AdaptationResult,
    random_selector,
    run_adaptation,
    threshold,
)
from .catalog import CATEGORIES, FAMILIES, family_categories
from .env import InteractionEnv
from .generator import derive_seed, make_rng
from .nets import RelationNets
from .scene import Scene

log = logging.getLogger(__name__)

METHODS = (
    "random",
    "abla_no_binary_prior",
    "abla_no_scene_prior",
    "abla_random_explore",
    "abla_random_adapt",
    "prior_only",
    "ours_final",
    "exhaustive",
)
# predictions made only of observed rows; empty prediction counts as precise
OBSERVATION_ONLY = ("random", "exhaustive")
BUDGETS = {"frac10": 0.10, "frac20": 0.20, "certainty": None}
PRIOR_THRESHOLD = 0.5
PRECISION_NOTE = "precision 0/0 is 1.0 for observation-only methods (random, exhaustive), 0.0 otherwise"


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)


def confusion(pred: np.ndarray, truth: np.ndarray) -> Confusion:
    p = np.asarray(pred, dtype=bool)
    g = np.asarray(truth, dtype=bool)
    if p.shape != g.shape or p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"prediction {p.shape} and ground truth {g.shape} must be the same square shape")
    return Confusion(int(np.sum(p & g)), int(np.sum(p & ~g)), int(np.sum(~p & g)), int(np.sum(~p & ~g)))


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    mcc: float


def scores_from(c: Confusion, empty_precision: float = 0.0) -> Scores:
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else empty_precision
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    mcc = (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den) if den else 0.0
    return Scores(p, r, f1, mcc)


def compute_metrics(pred: np.ndarray, truth: np.ndarray, empty_precision: float = 0.0) -> Scores:
    """Pair-level scores over all n*n ordered pairs, diagonal included."""
    return scores_from(confusion(pred, truth), empty_precision)


@dataclass
class SceneMetrics:
    scene_id: str
    confusion: Confusion
    scores: Scores
    interactions: int


@dataclass
class MetricsReport:
    method: str
    budget: str
    per_scene: list
    micro: Scores
    macro: Scores
    totals: Confusion
    mean_interactions: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "budget": self.budget,
            "micro": asdict(self.micro),
            "macro": asdict(self.macro),
            "totals": asdict(self.totals),
            "mean_interactions": self.mean_interactions,
            "extra": self.extra,
            "per_scene": [
                {"scene_id": s.scene_id, "interactions": s.interactions, **asdict(s.confusion), **asdict(s.scores)}
                for s in self.per_scene
            ],
        }


def build_report(method: str, budget: str, scenes: Sequence[Scene], predictions, interactions) -> MetricsReport:
    empty = 1.0 if method in OBSERVATION_ONLY else 0.0
    per = []
    total = Confusion(0, 0, 0, 0)
    for s, p, k in zip(scenes, predictions, interactions):
        c = confusion(p, s.adjacency)
        total = total + c
        per.append(SceneMetrics(s.scene_id, c, scores_from(c, empty), int(k)))
    macro = Scores(*(float(np.mean([getattr(m.scores, f) for m in per])) for f in ("precision", "recall", "f1", "mcc")))
    return MetricsReport(method, budget, per, scores_from(total, empty), macro, total, float(np.mean(interactions)))


# ---------------------------------------------------------------------------
# methods


@dataclass
class MethodRun:
    report: MetricsReport
    results: list  # AdaptationResult per scene


def adaptation_config(budget: str) -> AdaptationConfig:
    if budget not in BUDGETS:
        raise ValueError(f"unknown budget {budget!r}; expected one of {sorted(BUDGETS)}")
    frac = BUDGETS[budget]
    return AdaptationConfig(mode=CERTAINTY) if frac is None else AdaptationConfig(mode=BUDGET_FRACTION, fraction=frac)


def _observation_run(scene: Scene, order: Sequence[int]) -> AdaptationResult:
    """Interact with ``order`` and predict exactly the observed positive pairs."""
    n = scene.n
    env = InteractionEnv(scene, budget=len(order))
    state = env.reset(np.zeros((n, n)))
    pred = np.zeros((n, n), dtype=bool)
    steps = [pred.copy()]
    for i in order:
        res = env.step(int(i))
        pred[i] = res.observation.effects
        steps.append(pred.copy())
    belief = pred.astype(float)
    return AdaptationResult(pred, belief, list(map(int, order)), [], steps)


def run_method(
    method: str,
    scenes: Sequence[Scene],
    nets: RelationNets | None = None,
    budget: str = "frac10",
    seed: int = 0,
    edge_kw: dict | None = None,
    max_steps: int | None = None,
) -> MethodRun:
    """Evaluate one method on a list of scenes.

    ``nets`` is the checkpoint to use; for ``abla_random_explore`` pass the
    nets trained with random collection.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method not in ("random", "exhaustive") and nets is None:
        raise ValueError(f"method {method!r} needs a checkpoint")
    cfg = adaptation_config(budget)
    edge_kw = edge_kw or {}
    results = []
    for k, scene in enumerate(scenes):
        rng = make_rng(derive_seed(seed, k, 77))
        n = scene.n
        if method == "exhaustive":
            res = _observation_run(scene, range(n))
        elif method == "random":
            m = cfg.budget(n) if max_steps is None else min(max_steps, n)
            res = _observation_run(scene, rng.permutation(n)[:m])
        elif method == "prior_only":
            ctx = nets.context(scene)
            b = nets.scene_prior(ctx, **edge_kw)
            pred = b > PRIOR_THRESHOLD
            res = AdaptationResult(pred, b, [], [], [pred])
        else:
            ctx = nets.context(scene)
            init, selector, kw = None, None, dict(edge_kw)
            if method == "abla_no_binary_prior":
                # the prior pass sees unit input edges; later passes are unchanged
                init = nets.scene_prior(ctx, mode="ones")
            elif method == "abla_no_scene_prior":
                init = nets.br_prior(ctx)
            elif method == "abla_random_adapt":
                selector = random_selector(rng)
            res = run_adaptation(scene, nets, cfg, ctx=ctx, initial_belief=init, selector=selector,
                                 max_steps=max_steps, edge_kw=kw)
        results.append(res)
    report = build_report(method, budget, scenes, [r.prediction for r in results], [r.interactions for r in results])
    return MethodRun(report, results)


# ---------------------------------------------------------------------------
# transfer


def unseen_pairs(scene: Scene, seen_categories: set[str]) -> np.ndarray:
    """Mask of pairs whose trigger or responder category never appeared in training."""
    names = [CATEGORIES[o.category_id].name for o in scene.objects]
    novel = np.array([nm not in seen_categories for nm in names])
    return novel[:, None] | novel[None, :]


def run_transfer(
    nets: RelationNets,
    train_family: str,
    test_family: str,
    scenes: Sequence[Scene],
    method: str = "ours_final",
    budget: str = "frac10",
    seed: int = 0,
) -> MetricsReport:
    """Evaluate nets trained on one family on scenes of another."""
    if train_family == test_family:
        warnings.warn("transfer with identical train and test families is plain in-domain evaluation")
    scenes = [s for s in scenes if s.family == test_family]
    if not scenes:
        raise ValueError(f"no scenes of family {test_family!r}")
    run = run_method(method, scenes, nets, budget, seed)
    seen = family_categories(FAMILIES[train_family])
    hit = total = 0
    for s, res in zip(scenes, run.results):
        mask = unseen_pairs(s, seen) & s.adjacency
        total += int(mask.sum())
        hit += int((mask & res.prediction).sum())
    rep = run.report
    rep.extra = {
        "train_family": train_family,
        "test_family": test_family,
        "unseen_pairs": total,
        "unseen_pair_recall": hit / total if total else None,
    }
    return rep


# ---------------------------------------------------------------------------
# edge-initialization sweep and step curve


EDGE_VARIANTS = (
    ("prior_only_edges", {"mode": "prior_only"}),
    ("distance_only_edges", {"mode": "distance_only"}),
    ("gamma_0.4", {"gamma": 0.4}),
    ("gamma_0.6", {"gamma": 0.6}),
    ("gamma_0.8", {"gamma": 0.8}),
    ("gamma_1.0", {"gamma": 1.0}),
)


def ablate_edges(nets: RelationNets, scenes: Sequence[Scene], budget: str = "frac10", seed: int = 0) -> list[MetricsReport]:
    out = []
    for name, kw in EDGE_VARIANTS:
        rep = run_method("ours_final", scenes, nets, budget, seed, edge_kw=kw).report
        rep.extra = {"edges": name}
        out.append(rep)
    return out


def f1_curve(method: str, scenes: Sequence[Scene], nets: RelationNets | None, steps: int, seed: int = 0) -> list[dict]:
    """Micro F1 after t interactions, t = 0..steps; scenes that ran out keep their last prediction."""
    run = run_method(method, scenes, nets, "certainty", seed, max_steps=steps)
    empty = 1.0 if method in OBSERVATION_ONLY else 0.0
    rows = []
    for t in range(steps + 1):
        total = Confusion(0, 0, 0, 0)
        for s, res in zip(scenes, run.results):
            preds = res.step_predictions
            total = total + confusion(preds[min(t, len(preds) - 1)], s.adjacency)
        sc = scores_from(total, empty)
        rows.append({"t": t, "precision": sc.precision, "recall": sc.recall, "f1": sc.f1, "mcc": sc.mcc})
    return rows


# ---------------------------------------------------------------------------
# rendering


def format_table(reports: Sequence[MetricsReport]) -> str:
    head = f"{'method':<22} {'budget':<10} {'P':>6} {'R':>6} {'F1':>6} {'MCC':>6} {'inter':>6}"
    lines = [f"# {PRECISION_NOTE}", head, "-" * len(head)]
    for r in reports:
        label = r.method + (f" [{r.extra['edges']}]" if "edges" in r.extra else "")
        m = r.micro
        lines.append(
            f"{label:<22} {r.budget:<10} {m.precision:6.3f} {m.recall:6.3f} {m.f1:6.3f} {m.mcc:6.3f} {r.mean_interactions:6.2f}"
        )
        if r.extra.get("unseen_pair_recall") is not None:
            lines.append(f"{'':<22} unseen-pair recall {r.extra['unseen_pair_recall']:.3f} over {r.extra['unseen_pairs']} pairs")
    return "\n".join(lines) + "\n"


def graph_dump(scene: Scene, result: AdaptationResult) -> dict:
    observed = set(result.order)
    edges = []
    n = scene.n
    for i in range(n):
        for j in range(n):
            if result.prediction[i, j] or scene.adjacency[i, j]:
                edges.append({
                    "i": i,
                    "j": j,
                    "score": float(result.belief[i, j]),
                    "predicted": bool(result.prediction[i, j]),
                    "truth": bool(scene.adjacency[i, j]),
                    "observed": i in observed,
                })
    return {"scene_id": scene.scene_id, "n": n, "order": list(result.order), "edges": edges}


def render_results(runs: Sequence[MethodRun], out_dir, scenes: Sequence[Scene] | None = None) -> str:
    """Write table.txt, results.json and per-scene graph dumps; return the table."""
    if not runs:
        raise ValueError("nothing to render")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = [r.report for r in runs]
    table = format_table(reports)
    (out / "table.txt").write_text(table)
    (out / "results.json").write_text(json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True) + "\n")
    if scenes is not None:
        for run in runs:
            d = out / "graphs" / f"{run.report.method}-{run.report.budget}"
            d.mkdir(parents=True, exist_ok=True)
            for s, res in zip(scenes, run.results):
                (d / f"{s.scene_id}.json").write_text(json.dumps(graph_dump(s, res), indent=1, sort_keys=True) + "\n")
    return table


def write_curve(rows: Sequence[dict], path) -> None:
    lines = ["t\tprecision\trecall\tf1\tmcc"]
    lines += [f"{r['t']}\t{r['precision']:.6f}\t{r['recall']:.6f}\t{r['f1']:.6f}\t{r['mcc']:.6f}" for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")
