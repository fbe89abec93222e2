import math

import numpy as np
import pytest

from oracles import alignment_finite_difference
from sandmil.ckta import (
    AlignmentError,
    LabeledPaths,
    OptimizerConfig,
    alignment,
    alignment_gradient,
    center_kernel,
    frobenius_norm,
    frobenius_product,
    optimize_weights,
    pair_feature_tensor,
    target_kernel,
)
from sandmil.ckta import _gradient_from_parts
from sandmil.synthgen import demo_labeled_paths

KNOWN = frozenset({"windows", "temp", "system32"})


class TestFrobenius:
    def test_product_with_identity(self):
        assert frobenius_product([[1, 2], [3, 4]], np.eye(2)) == 5.0

    def test_product_with_zero(self):
        assert frobenius_product([[1, 2], [3, 4]], np.zeros((2, 2))) == 0.0

    def test_product_is_squared_norm(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = rng.normal(size=(rng.integers(1, 8), rng.integers(1, 8)))
            assert frobenius_product(a, a) == pytest.approx(
                frobenius_norm(a) ** 2, rel=1e-12
            )

    def test_norm_examples(self):
        assert frobenius_norm([[3, 4], [0, 0]]) == 5.0
        assert frobenius_norm(np.zeros((3, 3))) == 0.0
        assert frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            frobenius_product(np.eye(2), np.eye(3))


class TestCenterKernel:
    def test_identity_two_by_two(self):
        out = center_kernel(np.eye(2))
        assert np.allclose(out, [[0.5, -0.5], [-0.5, 0.5]])

    def test_constant_matrix_centers_to_zero(self):
        assert np.allclose(center_kernel(np.full((4, 4), 3.7)), 0.0)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        s = rng.uniform(size=(6, 6))
        once = center_kernel(s)
        assert np.allclose(center_kernel(once), once, atol=1e-12)

    def test_row_and_column_sums_vanish(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(2, 12))
            out = center_kernel(rng.uniform(size=(n, n)))
            assert np.abs(out.sum(axis=0)).max() <= 1e-9
            assert np.abs(out.sum(axis=1)).max() <= 1e-9

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            center_kernel(np.ones((2, 3)))


class TestTargetKernel:
    def test_two_classes(self):
        out = target_kernel([1, 1, 2])
        assert np.array_equal(out, [[1, 1, -1], [1, 1, -1], [-1, -1, 1]])

    def test_single_class_all_ones(self):
        assert np.array_equal(target_kernel([5, 5, 5]), np.ones((3, 3)))

    def test_all_distinct(self):
        out = target_kernel([1, 2, 3])
        assert np.array_equal(out, 2 * np.eye(3) - 1)


class TestAlignment:
    def test_equal_matrices_align_perfectly(self):
        y = target_kernel([0, 0, 1, 1])
        assert alignment(y, y) == pytest.approx(1.0)

    def test_constant_matrix_is_degenerate(self):
        with pytest.raises(AlignmentError):
            alignment(np.ones((3, 3)), target_kernel([0, 0, 1]))

    def test_block_diagonal_two_class(self):
        s = np.array([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]], dtype=float)
        y = target_kernel([0, 0, 1, 1])
        assert alignment(s, y) >= 0.99

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        s = rng.uniform(0.1, 1.0, size=(6, 6))
        s = (s + s.T) / 2
        y = target_kernel([0, 0, 0, 1, 1, 1])
        base = alignment(s, y)
        for c in (0.25, 3.0, 1e3):
            assert alignment(c * s, y) == pytest.approx(base, rel=1e-9)


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        paths, classes = demo_labeled_paths(per_class=25, seed=3)
        worst = 0.0
        checked = 0
        while checked < 25:
            idx = rng.choice(len(paths), size=8, replace=True)
            batch_classes = [classes[i] for i in idx]
            if len(set(batch_classes)) < 2:
                continue
            batch_paths = [paths[i] for i in idx]
            features = pair_feature_tensor(batch_paths, KNOWN)
            y = target_kernel(batch_classes)
            w = rng.uniform(0.1, 2.0, size=9)
            analytic = _gradient_from_parts(w, features, y)
            numeric = alignment_finite_difference(w, features, y, alignment)
            denom = max(np.abs(numeric).max(), 1e-12)
            worst = max(worst, np.abs(analytic - numeric).max() / denom)
            checked += 1
        assert worst < 1e-4

    def test_degenerate_batch_raises(self):
        batch = LabeledPaths(
            ("\\temp\\a.exe", "\\temp\\a.exe", "\\temp\\a.exe", "\\windows\\a.exe"),
            (0, 0, 0, 1),
        )
        # identical similarities inside one class still work; a constant
        # matrix (all paths identical) does not
        degenerate = pair_feature_tensor(["\\temp\\x"] * 4, KNOWN)
        with pytest.raises(AlignmentError):
            _gradient_from_parts(np.ones(9), degenerate, target_kernel([0, 0, 1, 1]))
        alignment_gradient(np.ones(9), batch, KNOWN)

    def test_gradient_vanishes_at_optimum(self):
        scipy_optimize = pytest.importorskip("scipy.optimize")
        paths = ["\\windows\\aa.exe", "\\temp\\aa.exe", "\\temp\\zz.exe"]
        classes = [0, 0, 1]
        features = pair_feature_tensor(paths, KNOWN)
        y = target_kernel(classes)

        def objective(w):
            return -alignment(np.exp(-(features @ w)), y)

        result = scipy_optimize.minimize(
            objective,
            np.ones(9),
            bounds=[(0, None)] * 9,
            method="L-BFGS-B",
            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000},
        )
        w_star = result.x
        grad = _gradient_from_parts(w_star, features, y)
        projected = np.where(w_star > 1e-12, grad, np.maximum(grad, 0.0))
        assert np.linalg.norm(projected) <= 1e-6


class TestOptimizeWeights:
    def test_known_folder_signal_dominates(self):
        paths, classes = demo_labeled_paths(per_class=40, seed=5)
        data = LabeledPaths(tuple(paths), tuple(classes))
        result = optimize_weights(data, OptimizerConfig(epochs=40, seed=0), KNOWN)
        assert int(np.argmax(result.weights)) == 0  # kk slot
        assert result.alignment_after >= result.alignment_before

    def test_zero_epochs_returns_initial(self):
        paths, classes = demo_labeled_paths(per_class=10, seed=2)
        data = LabeledPaths(tuple(paths), tuple(classes))
        cfg = OptimizerConfig(epochs=0, initial_weights=(0.5,) * 9)
        result = optimize_weights(data, cfg, KNOWN)
        assert np.array_equal(result.weights, np.full(9, 0.5))
        assert result.alignment_after == result.alignment_before

    def test_same_seed_same_result(self):
        paths, classes = demo_labeled_paths(per_class=15, seed=8)
        data = LabeledPaths(tuple(paths), tuple(classes))
        first = optimize_weights(data, OptimizerConfig(epochs=10, seed=11), KNOWN)
        second = optimize_weights(data, OptimizerConfig(epochs=10, seed=11), KNOWN)
        assert np.array_equal(first.weights, second.weights)

    def test_weights_stay_non_negative(self):
        paths, classes = demo_labeled_paths(per_class=20, seed=9)
        data = LabeledPaths(tuple(paths), tuple(classes))
        result = optimize_weights(
            data, OptimizerConfig(epochs=15, learning_rate=1.5, seed=4), KNOWN
        )
        assert (result.weights >= 0).all()

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            LabeledPaths(("\\temp\\a", "\\temp\\b"), (1, 1))


class TestLabeledPathsIO:
    def test_from_jsonl(self, tmp_path):
        path = tmp_path / "paths.jsonl"
        path.write_text(
            '{"path": "\\\\temp\\\\a.exe", "class": 0}\n'
            '{"path": "\\\\windows\\\\b.exe", "class": 1}\n'
        )
        data = LabeledPaths.from_jsonl(path)
        assert len(data) == 2
        assert data.classes == (0, 1)
