"""Model graphs: validation, init determinism, whole-model gradients, Adam."""

import numpy as np
import pytest

from brahmi_ocr.tensornet import (
    AdamState,
    LayerSpec,
    ModelGraph,
    ShapeMismatch,
    adam_step,
    backprop,
    build_model,
    count_params,
    forward,
)
from brahmi_ocr.tensornet.graph import clone_params

from test_tensornet_ops import assert_grads_close, numeric_grad


def tiny_cnn(classes=3, seed=0):
    layers = (
        LayerSpec(kind="conv2d", out_channels=2, kernel=3, padding=1),
        LayerSpec(kind="activation", activation="sigmoid"),
        LayerSpec(kind="maxpool", kernel=2, stride=2),
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=classes),
        LayerSpec(kind="activation", activation="softmax"),
    )
    return build_model(layers, (1, 6, 6), classes, seed=seed)


def dense_softmax(d, classes, seed=0):
    layers = (
        LayerSpec(kind="flatten"),
        LayerSpec(kind="dense", units=classes),
        LayerSpec(kind="activation", activation="softmax"),
    )
    return build_model(layers, (1, d, 1), classes, seed=seed)


class TestLayerSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            LayerSpec(kind="dropout")

    def test_conv_needs_channels_and_kernel(self):
        with pytest.raises(ValueError):
            LayerSpec(kind="conv2d", kernel=3)
        with pytest.raises(ValueError):
            LayerSpec(kind="conv2d", out_channels=4)

    def test_pointwise_is_strictly_1x1(self):
        with pytest.raises(ValueError):
            LayerSpec(kind="pointwise_conv2d", out_channels=4, kernel=3)
        with pytest.raises(ValueError):
            LayerSpec(kind="pointwise_conv2d", out_channels=4, stride=2)

    def test_activation_vocabulary(self):
        with pytest.raises(ValueError):
            LayerSpec(kind="activation", activation="relu")


class TestModelGraphValidation:
    def test_must_end_in_softmax_over_classes(self):
        layers = (
            LayerSpec(kind="flatten"),
            LayerSpec(kind="dense", units=4),
            LayerSpec(kind="activation", activation="sigmoid"),
        )
        with pytest.raises(ShapeMismatch):
            build_model(layers, (1, 2, 2), 4, seed=0)

    def test_final_width_must_match_num_classes(self):
        layers = (
            LayerSpec(kind="flatten"),
            LayerSpec(kind="dense", units=5),
            LayerSpec(kind="activation", activation="softmax"),
        )
        with pytest.raises(ShapeMismatch):
            build_model(layers, (1, 2, 2), 4, seed=0)

    def test_dense_before_flatten_rejected(self):
        layers = (
            LayerSpec(kind="dense", units=4),
            LayerSpec(kind="activation", activation="softmax"),
        )
        with pytest.raises(ShapeMismatch):
            build_model(layers, (1, 2, 2), 4, seed=0)

    def test_wrong_parameter_shape_rejected(self):
        model = tiny_cnn()
        bad = clone_params(model.parameters)
        bad[0]["weight"] = bad[0]["weight"][:, :, :2, :2]
        with pytest.raises(ShapeMismatch):
            ModelGraph(model.layers, bad, model.input_shape, model.num_classes)

    def test_pool_shrinks_spatial_dims(self):
        model = tiny_cnn()
        shapes = model.output_shapes()
        assert shapes[2] == ("image", 2, 3, 3)
        assert shapes[-1] == ("flat", 3)


class TestInit:
    def test_same_seed_identical(self):
        a, b = tiny_cnn(seed=5), tiny_cnn(seed=5)
        for la, lb in zip(a.parameters, b.parameters):
            for k in la:
                assert np.array_equal(la[k], lb[k])

    def test_different_seed_differs(self):
        a, b = tiny_cnn(seed=5), tiny_cnn(seed=6)
        assert not np.array_equal(a.parameters[0]["weight"], b.parameters[0]["weight"])

    def test_biases_start_at_zero(self):
        model = tiny_cnn()
        assert np.all(model.parameters[0]["bias"] == 0)
        assert np.all(model.parameters[4]["bias"] == 0)

    def test_glorot_bounds_for_dense(self):
        model = dense_softmax(d=30, classes=10, seed=7)
        w = model.parameters[1]["weight"]
        limit = np.sqrt(6.0 / (30 + 10))
        assert np.all(np.abs(w) <= limit)
        assert np.abs(w).max() > 0.5 * limit


class TestForward:
    def test_probability_output(self):
        model = tiny_cnn(classes=4)
        x = np.random.default_rng(8).standard_normal((5, 1, 6, 6))
        probs = forward(model, x)
        assert probs.shape == (5, 4)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_input_shape_checked(self):
        model = tiny_cnn()
        with pytest.raises(ShapeMismatch):
            forward(model, np.zeros((2, 1, 5, 6)))


class TestCountParams:
    def test_dense_formula(self):
        model = dense_softmax(d=128, classes=214)
        assert count_params(model) == 128 * 214 + 214

    def test_conv_formula(self):
        layers = (
            LayerSpec(kind="conv2d", out_channels=64, kernel=3),
            LayerSpec(kind="flatten"),
            LayerSpec(kind="dense", units=2),
            LayerSpec(kind="activation", activation="softmax"),
        )
        model = build_model(layers, (32, 3, 3), 2, seed=0)
        conv_count = sum(v.size for v in model.parameters[0].values())
        assert conv_count == 18432 + 64

    def test_zero_for_parameterless_layers(self):
        model = tiny_cnn()
        assert sum(v.size for v in model.parameters[2].values()) == 0


class TestBackprop:
    def test_zero_weight_dense_bias_gradient_is_analytic(self):
        # With all-zero weights the probs are uniform; the analytic scce
        # gradient w.r.t. the bias is mean(probs) - mean(one_hot).
        model = dense_softmax(d=4, classes=3, seed=0)
        for layer in model.parameters:
            for arr in layer.values():
                arr[...] = 0.0
        rng = np.random.default_rng(9)
        x = rng.standard_normal((6, 1, 4, 1))
        y = np.array([0, 1, 2, 0, 1, 2])
        _, probs, grads = backprop(model, x, y)
        one_hot = np.eye(3)[y]
        expect = probs.mean(axis=0) - one_hot.mean(axis=0)
        assert_grads_close(grads[1]["bias"], expect, rel=1e-12, abs_floor=1e-15)

    def test_whole_model_matches_finite_differences(self):
        model = tiny_cnn(classes=3, seed=1)
        rng = np.random.default_rng(10)
        x = rng.standard_normal((4, 1, 6, 6))
        y = np.array([0, 1, 2, 1])
        loss, _, grads = backprop(model, x, y)
        assert loss > 0

        from brahmi_ocr.tensornet.graph import forward as fwd
        from brahmi_ocr.tensornet.ops import scce_loss

        def scalar():
            return scce_loss(fwd(model, x), y)

        for li, layer in enumerate(model.parameters):
            for name, arr in layer.items():
                numeric = numeric_grad(scalar, arr)
                assert_grads_close(grads[li][name], numeric)

    def test_parameter_off_any_output_path_has_zero_gradient(self):
        # dense A -> dense B -> softmax with B's second input row zeroed:
        # everything feeding A's unit 1 is disconnected from the loss.
        layers = (
            LayerSpec(kind="flatten"),
            LayerSpec(kind="dense", units=2),
            LayerSpec(kind="dense", units=3),
            LayerSpec(kind="activation", activation="softmax"),
        )
        model = build_model(layers, (1, 3, 1), 3, seed=2)
        model.parameters[2]["weight"][1, :] = 0.0
        rng = np.random.default_rng(11)
        x = rng.standard_normal((5, 1, 3, 1))
        y = np.array([0, 1, 2, 0, 1])
        _, _, grads = backprop(model, x, y)
        assert np.all(grads[1]["weight"][:, 1] == 0.0)
        assert grads[1]["bias"][1] == 0.0
        assert np.any(grads[1]["weight"][:, 0] != 0.0)


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        model = dense_softmax(d=3, classes=2, seed=3)
        before = clone_params(model.parameters)
        grads = [{k: np.zeros_like(v) for k, v in layer.items()}
                 for layer in model.parameters]
        state = AdamState.for_params(model.parameters)
        adam_step(model.parameters, grads, state, lr=0.1)
        for la, lb in zip(model.parameters, before):
            for k in la:
                assert np.array_equal(la[k], lb[k])
        assert state.step == 1

    def test_first_step_moves_by_lr_times_sign(self):
        params = [{"weight": np.array([1.0, -2.0, 0.5])}]
        grads = [{"weight": np.array([0.3, -0.7, 2.0])}]
        state = AdamState.for_params(params)
        adam_step(params, grads, state, lr=1e-3)
        moved = params[0]["weight"] - np.array([1.0, -2.0, 0.5])
        expect = -1e-3 * np.sign(grads[0]["weight"])
        assert np.allclose(moved, expect, rtol=1e-6)

    def test_two_step_scalar_trace(self):
        # Hand-computed trace, plain scalar arithmetic throughout.
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        p, g = 1.0, 0.5
        m = v = 0.0
        expect = p
        m_h = v_h = 0.0
        for t in (1, 2):
            m_h = b1 * m_h + (1 - b1) * g
            v_h = b2 * v_h + (1 - b2) * g * g
            mhat = m_h / (1 - b1**t)
            vhat = v_h / (1 - b2**t)
            expect -= lr * mhat / (vhat**0.5 + eps)

        params = [{"w": np.array([1.0])}]
        state = AdamState.for_params(params)
        for _ in range(2):
            adam_step(params, [{"w": np.array([0.5])}], state, lr=lr)
        assert np.isclose(params[0]["w"][0], expect, rtol=1e-12)

    def test_descends_convex_quadratic(self):
        # loss = 0.5 * p^2, gradient = p; each step must strictly reduce it.
        params = [{"w": np.array([2.0])}]
        state = AdamState.for_params(params)
        last = 0.5 * params[0]["w"][0] ** 2
        for _ in range(50):
            adam_step(params, [{"w": params[0]["w"].copy()}], state, lr=1e-3)
            loss = 0.5 * params[0]["w"][0] ** 2
            assert loss < last
            last = loss

    def test_shape_mismatch_rejected(self):
        params = [{"w": np.zeros(3)}]
        state = AdamState.for_params(params)
        with pytest.raises(ShapeMismatch):
            adam_step(params, [{"w": np.zeros(4)}], state)
