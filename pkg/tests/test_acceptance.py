"""Acceptance run: twelve criteria, one PASS/FAIL line each.

The trend criteria (7 to 10) share one session fixture that trains three seeds
with the learned exploration policy and three with random collection, at full
scale (200 train / 50 test scenes, budget 1000 per loop, 10 loops). Expect the
module to take roughly half an hour on one CPU core.
"""
import time

import numpy as np
import pytest

from funcgraph.adaptation import AdaptationConfig, run_adaptation, select_next, should_stop
from funcgraph.catalog import FAMILIES, GroupSpec
from funcgraph.cli import main
from funcgraph.evaluation import EDGE_VARIANTS, compute_metrics, run_method, scores_from, Confusion
from funcgraph.explore import TrainConfig, alternate_train
from funcgraph.generator import generate_dataset, write_dataset
from funcgraph.nets import gcn_forward
from funcgraph.env import reward_of
from funcgraph.tensor import Tensor

from acceptance_log import record
from gradcheck import block_errors
from oracles import brute_select, dense_gcn, naive_counts, naive_mcc, reward_direct

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
TRAIN, TEST, DATA_SEED, POINTS = 200, 50, 0, 256


@pytest.fixture(scope="module")
def data():
    scenes, splits, _ = generate_dataset(list(FAMILIES.values()), TRAIN, TEST, DATA_SEED, num_points=POINTS)
    train = [s for s, sp in zip(scenes, splits) if sp == "train"]
    test = [s for s, sp in zip(scenes, splits) if sp == "test"]
    return train, test


@pytest.fixture(scope="module")
def ambiguous():
    """Kitchens whose stove holds a single 2x2 or 3x3 knob/burner group."""
    base = FAMILIES["kitchen"]
    cfg = base.with_groups(
        name="kitchen_ambiguous",
        groups=(GroupSpec("knob", "burner", (2, 3), "stove"),) + base.groups[1:],
    )
    scenes, splits, _ = generate_dataset([cfg], 0, TEST, DATA_SEED + 17, num_points=POINTS)
    return scenes


@pytest.fixture(scope="module")
def trained(data):
    train, _ = data
    runs = {}
    for seed in SEEDS:
        for rexp in (False, True):
            t0 = time.perf_counter()
            res = alternate_train(train, TrainConfig(seed=seed, loops=10, random_explore=rexp))
            runs[seed, rexp] = (res.nets, time.perf_counter() - t0)
    return runs


def _f1(method, scenes, nets, budget, seed=0):
    return run_method(method, scenes, nets, budget, seed).report.micro.f1


@pytest.fixture(scope="module")
def scores(data, ambiguous, trained):
    _, test = data
    out = {}
    for seed in SEEDS:
        nets, _ = trained[seed, False]
        rexp_nets, _ = trained[seed, True]
        out[seed] = {
            "prior_only": _f1("prior_only", test, nets, "frac10", seed),
            "random10": _f1("random", test, None, "frac10", seed),
            "ours10": _f1("ours_final", test, nets, "frac10", seed),
            "ours20": _f1("ours_final", test, nets, "frac20", seed),
            "rexp20": _f1("ours_final", test, rexp_nets, "frac20", seed),
            "amb_ours10": _f1("ours_final", ambiguous, nets, "frac10", seed),
            "amb_radapt10": _f1("abla_random_adapt", ambiguous, nets, "frac10", seed),
        }
    return out


def _mean(scores, key):
    return float(np.mean([scores[s][key] for s in SEEDS]))


# --- exact property criteria ---------------------------------------------------


def test_c01_gradients():
    t0 = time.perf_counter()
    worst = {}
    for draw in range(20):
        for block, err in block_errors(draw).items():
            worst[block] = max(worst.get(block, 0.0), err)
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    ok = top < 1e-4 and elapsed < 60
    record(1, "gradient check, 20 draws", ok, f"worst rel err {top:.2e} over {len(worst)} blocks, {elapsed:.1f}s")
    assert ok, worst


def test_c02_gcn_oracle():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        w = rng.uniform(size=(n, n)) * (rng.uniform(size=(n, n)) < 0.5)
        np.fill_diagonal(w, 0)
        h0 = rng.normal(size=(n, 8))
        thetas = [rng.normal(size=(8, 6)), rng.normal(size=(6, 6)), rng.normal(size=(6, 4))]
        got = gcn_forward(h0, w, [Tensor(t) for t in thetas]).data
        worst = max(worst, float(np.abs(got - dense_gcn(h0, w, thetas)).max()))
    ok = worst < 1e-10
    record(2, "graph convolution vs dense reference", ok, f"max abs err {worst:.1e}")
    assert ok


def test_c03_exhaustive_oracle(data, trained):
    _, test = data
    nets, _ = trained[0, False]
    t0 = time.perf_counter()
    ex = run_method("exhaustive", test).report
    full = [compute_metrics(run_adaptation(s, nets, AdaptationConfig(fraction=1.0)).prediction, s.adjacency).f1
            for s in test]
    elapsed = time.perf_counter() - t0
    per_scene = [m.scores.f1 for m in ex.per_scene]
    ok = all(f == 1.0 for f in per_scene + full) and elapsed < 60
    record(3, "exhaustive interaction", ok, f"{len(test)} scenes, min F1 {min(per_scene + full)}, {elapsed:.1f}s")
    assert ok


def test_c04_selection_and_stop():
    rng = np.random.default_rng(1)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        b = rng.uniform(size=(n, n))
        if rng.uniform() < 0.3:
            b = np.round(b * 4) / 4
        done = set(rng.choice(n, size=int(rng.integers(0, n)), replace=False).tolist())
        mismatches += select_next(b, done) != brute_select(b, done)
    edge = np.full((3, 3), 0.01)
    edge[0, 1] = 0.05
    high = np.full((3, 3), 0.99)
    high[2, 2] = 0.95
    strict = (not should_stop(edge)) and (not should_stop(high)) and should_stop(np.full((3, 3), 0.049))
    ok = mismatches == 0 and strict
    record(4, "selection and stop rule", ok, f"{mismatches} mismatches in 1000, strict boundary {strict}")
    assert ok


def test_c05_reward():
    cases = [
        reward_of(np.zeros((2, 2)), 0, np.zeros(2)) == -1.0,
        reward_of(np.array([[0.5, 0.0], [0, 0]]), 0, np.array([1, 0])) == 1.0,
        reward_of(np.array([[1.0, 0.0], [0, 0]]), 0, np.array([0, 0])) == 1.0,
    ]
    rng = np.random.default_rng(2)
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 12))
        b = rng.uniform(size=(n, n))
        e = rng.uniform(size=n) < 0.3
        i = int(rng.integers(n))
        bad += reward_of(b, i, e) != reward_direct(b[i], e)
    ok = all(cases) and bad == 0
    record(5, "reward", ok, f"analytic cases {sum(cases)}/3, randomized mismatches {bad}/100")
    assert ok


def test_c06_metrics():
    hand = scores_from(Confusion(tp=2, fp=1, fn=1, tn=6)).mcc
    hand_ok = abs(hand - 11 / 21) < 1e-15
    rng = np.random.default_rng(3)
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        p = rng.uniform(size=(n, n)) < rng.uniform()
        g = rng.uniform(size=(n, n)) < rng.uniform()
        tp, fp, fn, tn = naive_counts(p, g)
        s = scores_from(Confusion(tp, fp, fn, tn))
        bad += s.mcc != naive_mcc(tp, fp, fn, tn) or compute_metrics(p, g).mcc != s.mcc
    ok = hand_ok and bad == 0
    record(6, "metric suite", ok, f"hand MCC {hand:.6f} vs 11/21, randomized mismatches {bad}/1000")
    assert ok


# --- trend criteria ------------------------------------------------------------


def test_c07_more_interactions_help(scores, trained):
    lines, ok = [], True
    for s in SEEDS:
        r = scores[s]
        good = r["ours20"] >= r["ours10"] >= r["prior_only"]
        ok &= good
        lines.append(f"seed {s}: prior {r['prior_only']:.3f} ours10 {r['ours10']:.3f} ours20 {r['ours20']:.3f}")
    wall = max(t for (_, rexp), (_, t) in trained.items() if not rexp)
    record(7, "F1 grows with interactions", ok, "; ".join(lines) + f"; slowest training {wall / 60:.1f} min")
    assert ok


def test_c08_prior_beats_random(scores):
    prior, rand = _mean(scores, "prior_only"), _mean(scores, "random10")
    ok = prior - rand >= 0.15
    record(8, "prior vs random at 10%", ok, f"prior {prior:.3f} random {rand:.3f} margin {prior - rand:.3f}")
    assert ok


def test_c09_adaptation_beats_random_adapt(scores, ambiguous):
    ours, radapt = _mean(scores, "amb_ours10"), _mean(scores, "amb_radapt10")
    ok = ours > radapt
    soft = "met" if ours - radapt >= 0.05 else "missed"
    record(9, "uncertainty selection vs random selection, ambiguous kitchens", ok,
           f"ours {ours:.3f} random-adapt {radapt:.3f} margin {ours - radapt:.3f}, soft 0.05 {soft}")
    assert ok


def test_c10_policy_beats_random_explore(scores):
    ours, rexp = _mean(scores, "ours20"), _mean(scores, "rexp20")
    per_seed = ", ".join(f"{scores[s]['ours20']:.3f}/{scores[s]['rexp20']:.3f}" for s in SEEDS)
    ok = ours >= rexp
    record(10, "learned vs random exploration at 20%", ok,
           f"ours {ours:.3f} random-explore {rexp:.3f} margin {ours - rexp:.3f}; per seed {per_seed}")
    assert ok


# --- command line ----------------------------------------------------------------


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("acc_data")
    write_dataset(root, list(FAMILIES.values()), TRAIN, TEST, DATA_SEED, num_points=POINTS)
    return root / "manifest.json"


def test_c11_determinism(manifest, tmp_path):
    small = ["--budget", "200", "--loops", "2", "--seed", "4"]
    for run in ("a", "b"):
        main(["train", "--manifest", str(manifest), "--out", str(tmp_path / run), *small])
        main(["eval", "--manifest", str(manifest), "--checkpoint", str(tmp_path / run / "final"),
              "--method", "ours_final", "--budget", "frac20", "--out", str(tmp_path / f"eval_{run}")])
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    diff = [f for f in files if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    same_eval = (tmp_path / "eval_a" / "results.json").read_bytes() == (tmp_path / "eval_b" / "results.json").read_bytes()
    ok = not diff and same_eval
    record(11, "train + eval determinism", ok, f"{len(files)} training files, differing {diff}, reports equal {same_eval}")
    assert ok


def test_c12_ablate_edges(manifest, trained, tmp_path, capsys):
    nets, _ = trained[0, False]
    nets.save(tmp_path / "seed0")
    capsys.readouterr()
    main(["ablate-edges", "--manifest", str(manifest), "--checkpoint", str(tmp_path / "seed0"), "--out", str(tmp_path / "ab")])
    table = capsys.readouterr().out
    with capsys.disabled():
        print("\n" + table)
    missing = [name for name, _ in EDGE_VARIANTS if name not in table]
    ok = not missing and len(EDGE_VARIANTS) == 6
    record(12, "edge initialization sweep", ok, f"{len(EDGE_VARIANTS) - len(missing)}/6 variants evaluated")
    assert ok
