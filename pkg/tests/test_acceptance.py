"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import json
import random
import string

import numpy as np
import pytest

from oracles import alignment_finite_difference, levenshtein_dp
from sandmil.ckta import (
    LabeledPaths,
    OptimizerConfig,
    alignment,
    center_kernel,
    frobenius_norm,
    frobenius_product,
    optimize_weights,
    pair_feature_tensor,
    target_kernel,
)
from sandmil.ckta import _gradient_from_parts
from sandmil.cli import main
from sandmil.clustering import ApproxConfig, approx_cluster, build_similarity_graph, louvain_partition
from sandmil.metrics import adjusted_rand_index, confusion_rates
from sandmil.similarity import (
    DEFAULT_FILE_KNOWN_FOLDERS,
    DIFF_LABELS,
    SimilarityConfig,
    diff_features,
    levenshtein,
    path_similarity,
    similarity_for_type,
    tokenize_and_classify,
)
from sandmil.synthgen import demo_labeled_paths, demo_name_families


def report(number, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {number} ({name}): {status}  {detail}")
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def test_criterion_1_worked_example_fidelity():
    known = frozenset({"documents and settings", "start menu", "programs", "startup"})
    x = tokenize_and_classify(
        "\\Documents and Settings\\Admin\\Start Menu\\Programs\\Startup\\tii9fwliiv.lnk", known
    )
    y = tokenize_and_classify(
        "\\Documents and Settings\\Admin\\Start Menu\\Programs\\Accessories\\Notepad.lnk", known
    )
    named = dict(zip(DIFF_LABELS, diff_features(x, y)))
    weights = np.zeros(9)
    weights[DIFF_LABELS.index("ff")] = 1.0
    weights[DIFF_LABELS.index("kg")] = 2.3
    sim = path_similarity(x, y, weights)
    ok = (
        named["kg"] == 1.0
        and abs(named["ff"] - 0.714286) <= 1e-4
        and abs(sim - 0.049) <= 0.0005
    )
    report(1, "worked-example fidelity", ok, f"f_kg={named['kg']} f_ff={named['ff']:.6f} s={sim:.6f}")


def test_criterion_2_edit_distance_oracle():
    rng = random.Random(20240515)
    alphabet = string.ascii_letters + string.digits + "\\/._- "
    mismatches = 0
    for _ in range(10_000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        if levenshtein(a, b) != levenshtein_dp(a, b):
            mismatches += 1
    fixed = levenshtein("tii9fwliiv.lnk", "notepad.lnk")
    ok = mismatches == 0 and fixed == 10
    report(2, "edit-distance oracle", ok, f"mismatches={mismatches} fixed-pair={fixed}")


def test_criterion_3_ckta_correctness():
    rng = np.random.default_rng(77)
    paths, classes = demo_labeled_paths(per_class=30, seed=13)
    worst_rel = 0.0
    checked = 0
    while checked < 100:
        idx = rng.choice(len(paths), size=8, replace=True)
        batch_classes = [classes[i] for i in idx]
        if len(set(batch_classes)) < 2:
            continue
        features = pair_feature_tensor([paths[i] for i in idx], DEFAULT_FILE_KNOWN_FOLDERS)
        y = target_kernel(batch_classes)
        w = rng.uniform(0.1, 2.0, size=9)
        try:
            analytic = _gradient_from_parts(w, features, y)
        except ValueError:
            continue
        numeric = alignment_finite_difference(w, features, y, alignment, h=1e-5)
        rel = np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-12)
        worst_rel = max(worst_rel, rel)
        checked += 1

    data = LabeledPaths(tuple(paths), tuple(classes))
    result = optimize_weights(
        data, OptimizerConfig(epochs=40, seed=3, initial_weights=(1.0,) * 9),
        DEFAULT_FILE_KNOWN_FOLDERS,
    )
    gain = result.alignment_after - result.alignment_before
    ok = worst_rel < 1e-4 and gain >= 0.05
    report(
        3, "ckta correctness", ok,
        f"max-grad-rel-err={worst_rel:.2e} alignment {result.alignment_before:.4f}"
        f"->{result.alignment_after:.4f} (gain {gain:.4f})",
    )


def test_criterion_4_frobenius_identities():
    rng = np.random.default_rng(4)
    worst_identity = 0.0
    worst_sum = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        m = int(rng.integers(2, 12))
        a = rng.normal(scale=rng.uniform(0.1, 10), size=(n, m))
        lhs = frobenius_product(a, a)
        rhs = frobenius_norm(a) ** 2
        worst_identity = max(worst_identity, abs(lhs - rhs) / max(abs(lhs), 1e-12))
        square = rng.normal(size=(n, n))
        centered = center_kernel(square)
        worst_sum = max(
            worst_sum,
            float(np.abs(centered.sum(axis=0)).max()),
            float(np.abs(centered.sum(axis=1)).max()),
        )
    ok = worst_identity < 1e-12 and worst_sum <= 1e-9
    report(
        4, "frobenius identities", ok,
        f"identity-rel-err={worst_identity:.2e} max-centered-sum={worst_sum:.2e}",
    )


def test_criterion_5_clustering_approximation():
    families = demo_name_families(per_family=500, n_families=10, seed=11)
    names = [name for members in families.values() for name in members]
    assert len(names) == 5000
    sim = similarity_for_type("registry", SimilarityConfig())
    graph = build_similarity_graph(names, sim, edge_floor=0.4)
    full = louvain_partition(graph, seed=0)
    approx = approx_cluster(
        names, sim, ApproxConfig(k=1000, m=10, epsilon=0.4, seed=5), rtype="registry"
    )
    ari = adjusted_rand_index(full, approx.assignment)
    ok = ari >= 0.9
    report(
        5, "clustering approximation", ok,
        f"ARI={ari:.4f} full-communities={len(set(full.values()))} "
        f"approx-prototypes={len(approx.prototypes)}",
    )


def test_criterion_6_linear_growth():
    sim = similarity_for_type("registry", SimilarityConfig())
    evaluations = {}
    for total, per_family in ((4000, 400), (8000, 800)):
        families = demo_name_families(per_family=per_family, n_families=10, seed=21)
        names = [name for members in families.values() for name in members]
        assert len(names) == total
        result = approx_cluster(
            names, sim, ApproxConfig(k=500, m=10, epsilon=0.4, seed=9), rtype="registry"
        )
        evaluations[total] = result.sim_evaluations
    factor = evaluations[8000] / evaluations[4000]
    ok = factor <= 2.5
    report(
        6, "linear evaluation growth", ok,
        f"evals(4000)={evaluations[4000]} evals(8000)={evaluations[8000]} factor={factor:.3f}",
    )


def test_criterion_7_end_to_end_pipeline(tmp_path):
    reports = tmp_path / "reports.jsonl"
    assert main(["synth", "--out", str(reports), "--seed", "7",
                 "--samples-per-family", "200", "--benign-samples", "1000"]) == 0
    config = tmp_path / "config.json"
    # trees=100, gini, unlimited depth, min split 2 are the defaults;
    # the subset size only bounds the per-round Louvain graph
    config.write_text(json.dumps({"k": 1000}))
    model = tmp_path / "model"
    cutoff = "2024-02-01T00:00:00Z"
    assert main(["train", "--reports", str(reports), "--config", str(config),
                 "--out", str(model), "--cutoff", cutoff, "--seed", "3"]) == 0
    out = tmp_path / "eval"
    assert main(["evaluate", "--reports", str(reports), "--model", str(model),
                 "--out", str(out), "--cutoff", cutoff]) == 0
    payload = json.loads((out / "report.json").read_text())
    ok = payload["acc"] >= 0.95
    report(
        7, "end-to-end pipeline", ok,
        f"ACC={payload['acc']:.4f} TPR={payload['tpr']:.4f} FPR={payload['fpr']:.4f} "
        f"({payload['samples']} test samples)",
    )


def test_criterion_8_determinism(tmp_path):
    def digest(root):
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    config = tmp_path / "config.json"
    config.write_text(json.dumps({"k": 300, "trees": 25, "epochs": 5}))
    cutoff = "2024-02-01T00:00:00Z"
    paths_file = tmp_path / "paths.jsonl"
    paths, classes = demo_labeled_paths(per_class=15, seed=2)
    paths_file.write_text(
        "\n".join(json.dumps({"path": p, "class": c}) for p, c in zip(paths, classes)) + "\n"
    )

    artifacts = {}
    for run_id in ("one", "two"):
        base = tmp_path / run_id
        base.mkdir()
        reports = base / "reports.jsonl"
        assert main(["synth", "--out", str(reports), "--seed", "5",
                     "--samples-per-family", "15", "--benign-samples", "80"]) == 0
        model = base / "model"
        assert main(["train", "--reports", str(reports), "--config", str(config),
                     "--out", str(model), "--cutoff", cutoff, "--seed", "9"]) == 0
        pred = base / "pred"
        assert main(["predict", "--reports", str(reports), "--model", str(model),
                     "--out", str(pred)]) == 0
        ev = base / "eval"
        assert main(["evaluate", "--reports", str(reports), "--model", str(model),
                     "--out", str(ev), "--cutoff", cutoff]) == 0
        weights = base / "weights.json"
        assert main(["optimize-weights", "--paths", str(paths_file), "--config", str(config),
                     "--out", str(weights), "--seed", "4"]) == 0
        artifacts[run_id] = digest(base)

    ok = artifacts["one"] == artifacts["two"]
    detail = f"{len(artifacts['one'])} artifacts compared"
    if not ok:
        differing = [
            k
            for k in artifacts["one"]
            if artifacts["one"].get(k) != artifacts["two"].get(k)
        ]
        detail = f"differing files: {differing[:5]}"
    report(8, "determinism", ok, detail)


def test_criterion_9_metric_identities():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        truth = ["malicious" if v else "legitimate" for v in rng.integers(0, 2, size=n)]
        pred = ["malicious" if v else "legitimate" for v in rng.integers(0, 2, size=n)]
        rates = confusion_rates(truth, pred)
        if rates.tpr is not None:
            worst = max(worst, abs(rates.tpr + rates.fnr - 1.0))
        if rates.tnr is not None:
            worst = max(worst, abs(rates.tnr + rates.fpr - 1.0))
    crossed = adjusted_rand_index(
        {"a": 0, "b": 0, "c": 1, "d": 1}, {"a": 0, "b": 1, "c": 0, "d": 1}
    )
    ok = worst == 0.0 and crossed == pytest.approx(-0.5)
    report(9, "metric identities", ok, f"max-identity-err={worst} crossed-ARI={crossed}")
