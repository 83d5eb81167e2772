import numpy as np
import pytest

from akcarc.errors import MissingClassError, ShapeError, StateError
from akcarc.model import (
    Classifier,
    LinearHead,
    MlpExtractor,
    ModelPair,
    ema_update,
    imprint,
    load_checkpoint,
    save_checkpoint,
)
from akcarc.ssl_baselines import cross_entropy_loss

from conftest import assert_grads_match


def loop_forward(ext, x):
    """Scalar-loop oracle for the extractor forward pass."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((x.shape[0], ext.dims[-1]))
    for r in range(x.shape[0]):
        a = x[r]
        for li, (w, b) in enumerate(zip(ext.weights, ext.biases)):
            z = np.array(
                [sum(a[i] * w[i, j] for i in range(w.shape[0])) + b[0, j]
                 for j in range(w.shape[1])]
            )
            a = np.maximum(z, 0) if li < len(ext.weights) - 1 else z
        out[r] = a
    return out


class TestForward:
    def test_zero_weights_zero_features(self):
        ext = MlpExtractor([3, 4, 2])
        for w in ext.weights:
            w[...] = 0.0
        assert np.all(ext.forward(np.ones((5, 3))) == 0.0)

    def test_single_linear_layer_identity(self):
        ext = MlpExtractor([3, 3])
        ext.weights[0][...] = np.eye(3)
        x = np.random.default_rng(0).normal(size=(4, 3))
        np.testing.assert_allclose(ext.forward(x), x)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        ext = MlpExtractor([4, 6, 5, 3], rng)
        x = rng.normal(size=(3, 4))
        np.testing.assert_allclose(ext.forward(x), loop_forward(ext, x), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            MlpExtractor([3, 2]).forward(np.zeros((2, 4)))


class TestHead:
    def test_zero_features_gives_bias(self):
        head = LinearHead(3, 4)
        head.b[...] = [[1.0, 2.0, 3.0]]
        np.testing.assert_allclose(
            head.forward(np.zeros((2, 4))), [[1, 2, 3], [1, 2, 3]]
        )

    def test_identity_weights(self):
        head = LinearHead(3, 3)
        head.w[...] = np.eye(3)
        head.b[...] = 0.0
        f = np.random.default_rng(2).normal(size=(4, 3))
        np.testing.assert_allclose(head.forward(f), f)

    def test_loop_oracle(self):
        rng = np.random.default_rng(3)
        head = LinearHead(4, 3, rng)
        f = rng.normal(size=(2, 3))
        expect = np.array(
            [[sum(f[i, k] * head.w[c, k] for k in range(3)) + head.b[0, c]
              for c in range(4)] for i in range(2)]
        )
        np.testing.assert_allclose(head.forward(f), expect, atol=1e-12)


class TestBackward:
    def test_requires_forward(self):
        with pytest.raises(StateError):
            MlpExtractor([3, 2]).backward(np.zeros((1, 2)))

    def test_zero_upstream_zero_grads(self):
        ext = MlpExtractor([3, 4, 2], np.random.default_rng(4))
        ext.forward(np.random.default_rng(5).normal(size=(3, 3)))
        grads = ext.backward(np.zeros((3, 2)))
        assert all(np.all(g == 0) for g in grads.values())

    def test_cross_entropy_gradient_finite_differences(self):
        rng = np.random.default_rng(6)
        model = Classifier(MlpExtractor([5, 8, 4], rng), LinearHead(3, 4, rng))
        x = rng.normal(size=(6, 5))
        y = rng.integers(0, 3, size=6)
        _, grads = cross_entropy_loss(model, x, y)
        assert_grads_match(
            model.params(), grads, lambda: cross_entropy_loss(model, x, y)[0]
        )

    def test_source_frozen_during_loss(self, small_pair, micro_batch):
        x_l, y_l, _ = micro_batch
        before = small_pair.source_hash()
        for _ in range(3):
            _, grads = cross_entropy_loss(small_pair.target, x_l, y_l)
            for k, p in small_pair.target.params().items():
                p -= 0.01 * grads[k]
        assert small_pair.source_hash() == before


class TestImprint:
    def test_single_example_per_class(self):
        rng = np.random.default_rng(8)
        f = rng.normal(size=(3, 4))
        head = LinearHead(3, 4)
        imprint(head, f, [0, 1, 2])
        expect = f / np.linalg.norm(f, axis=1, keepdims=True)
        np.testing.assert_allclose(head.w, expect, atol=1e-12)
        assert np.all(head.b == 0)

    def test_duplicates_same_as_single(self):
        rng = np.random.default_rng(9)
        f = rng.normal(size=(2, 4))
        h1 = imprint(LinearHead(2, 4), f, [0, 1])
        h2 = imprint(
            LinearHead(2, 4), np.vstack([f, f]), [0, 1, 0, 1]
        )
        np.testing.assert_allclose(h1.w, h2.w, atol=1e-12)

    def test_rows_unit_norm(self):
        rng = np.random.default_rng(10)
        f = rng.normal(size=(20, 6))
        y = rng.integers(0, 4, size=20)
        y[:4] = [0, 1, 2, 3]
        head = imprint(LinearHead(4, 6), f, y)
        np.testing.assert_allclose(
            np.linalg.norm(head.w, axis=1), np.ones(4), atol=1e-9
        )

    def test_missing_class_rejected(self):
        with pytest.raises(MissingClassError):
            imprint(LinearHead(3, 4), np.ones((2, 4)), [0, 1])


class TestEmaUpdate:
    def test_alpha_zero_copies_student(self):
        t = {"w": np.zeros((2, 2))}
        s = {"w": np.ones((2, 2))}
        ema_update(t, s, 0.0)
        np.testing.assert_array_equal(t["w"], s["w"])

    def test_alpha_one_keeps_teacher(self):
        t = {"w": np.full((2, 2), 5.0)}
        ema_update(t, {"w": np.ones((2, 2))}, 1.0)
        assert np.all(t["w"] == 5.0)

    def test_scalar_arithmetic(self):
        t = {"w": np.array([[0.0]])}
        ema_update(t, {"w": np.array([[1.0]])}, 0.999)
        assert t["w"][0, 0] == pytest.approx(0.001, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ema_update({"w": np.zeros((2, 2))}, {"w": np.zeros(3)}, 0.5)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        model = Classifier(MlpExtractor([5, 8, 4], rng), LinearHead(3, 4, rng))
        path = tmp_path / "model.npz"
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        for k, v in model.params().items():
            assert np.array_equal(loaded.params()[k], v)
        assert loaded.extractor.dims == model.extractor.dims


class TestModelPair:
    def test_architecture_mismatch_rejected(self):
        a = Classifier(MlpExtractor([5, 8, 4]), LinearHead(3, 4))
        b = Classifier(MlpExtractor([5, 6, 4]), LinearHead(3, 4))
        with pytest.raises(ShapeError):
            ModelPair(source=a, target=b)

    def test_source_defensively_copied(self):
        src = Classifier(MlpExtractor([5, 8, 4]), LinearHead(3, 4))
        pair = ModelPair(source=src, target=src.copy())
        src.extractor.weights[0][...] = 999.0
        assert not np.any(pair.source.extractor.weights[0] == 999.0)
