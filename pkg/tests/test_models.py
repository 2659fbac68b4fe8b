import math

import numpy as np
import pytest

from fedflip import (
    LabeledDataset,
    ModelArch,
    ParamVector,
    SgdConfig,
    evaluate,
    forward_loss_grad,
    gen_synthetic,
    init_params,
    local_train,
)
from fedflip.models import INIT_SCALE

from oracles import finite_diff_grad


@pytest.fixture
def toy3():
    return gen_synthetic(3, 30, 4, 0.4, seed=5)


class TestInitParams:
    def test_param_count_softmax(self):
        assert ModelArch(2, 0, 3).param_count == 2 * 3 + 3 == 9
        assert len(init_params(ModelArch(2, 0, 3), 7)) == 9

    def test_param_count_mlp(self):
        assert ModelArch(4, 8, 3).param_count == 4 * 8 + 8 + 8 * 3 + 3 == 67
        assert len(init_params(ModelArch(4, 8, 3), 7)) == 67

    def test_deterministic(self):
        a = init_params(ModelArch(2, 0, 3), 7)
        b = init_params(ModelArch(2, 0, 3), 7)
        assert np.array_equal(a.values, b.values)
        c = init_params(ModelArch(2, 0, 3), 8)
        assert not np.array_equal(a.values, c.values)

    def test_weights_small_biases_zero(self):
        arch = ModelArch(5, 4, 3)
        p = init_params(arch, 1)
        w1_end = 5 * 4
        assert np.abs(p.values[:w1_end]).max() <= INIT_SCALE
        assert np.all(p.values[w1_end : w1_end + 4] == 0)  # b1
        assert np.all(p.values[-3:] == 0)  # b2


class TestParamVector:
    def test_length_checked(self):
        with pytest.raises(ValueError, match="expected 9"):
            ParamVector(np.zeros(8), ModelArch(2, 0, 3))

    def test_nonfinite_rejected(self):
        vals = np.zeros(9)
        vals[3] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ParamVector(vals, ModelArch(2, 0, 3))


class TestForwardLossGrad:
    def test_zero_params_uniform_loss(self, toy3):
        p = ParamVector(np.zeros(ModelArch(4, 0, 3).param_count), ModelArch(4, 0, 3))
        loss, _ = forward_loss_grad(p, toy3)
        assert loss == pytest.approx(math.log(3), abs=1e-12)

    def test_zero_params_uniform_loss_mlp(self, toy3):
        arch = ModelArch(4, 6, 3)
        p = ParamVector(np.zeros(arch.param_count), arch)
        loss, _ = forward_loss_grad(p, toy3)
        assert loss == pytest.approx(math.log(3), abs=1e-12)

    def test_saturated_example_near_zero_loss(self):
        # logits strongly favor the true class
        arch = ModelArch(3, 0, 3)
        w = np.zeros((3, 3))
        np.fill_diagonal(w, 10.0)
        p = ParamVector(np.concatenate([w.ravel(), np.zeros(3)]), arch)
        batch = LabeledDataset(np.array([[3.0, 0.0, 0.0]]), np.array([0]), 3)
        loss, _ = forward_loss_grad(p, batch)
        assert 0 <= loss < 1e-3

    @pytest.mark.parametrize("hidden", [0, 6])
    def test_gradient_matches_finite_differences(self, toy3, hidden):
        arch = ModelArch(4, hidden, 3)
        rng = np.random.default_rng(42)
        p = ParamVector(rng.normal(0, 0.5, arch.param_count), arch)
        _, grad = forward_loss_grad(p, toy3)

        def loss_at(vals):
            return forward_loss_grad(ParamVector(vals, arch), toy3)[0]

        coords = rng.choice(arch.param_count, size=20, replace=False)
        fd = finite_diff_grad(loss_at, p.values, coords)
        worst = max(abs(grad.values[c] - fd[c]) for c in coords)
        assert worst <= 1e-4

    def test_dimension_mismatch(self, toy3):
        p = init_params(ModelArch(5, 0, 3), 0)
        with pytest.raises(ValueError, match="feature dim"):
            forward_loss_grad(p, toy3)

    def test_empty_batch(self):
        p = init_params(ModelArch(2, 0, 3), 0)
        with pytest.raises(ValueError, match="empty"):
            forward_loss_grad(p, LabeledDataset(np.zeros((0, 2)), np.zeros(0), 3))


class TestLocalTrain:
    def test_zero_learning_rate_is_identity(self, toy3):
        p = init_params(ModelArch(4, 6, 3), 3)
        out = local_train(p, toy3, SgdConfig(learning_rate=0.0, local_epochs=2), seed=1)
        assert np.array_equal(out.values, p.values)

    def test_single_full_batch_step_closed_form(self, toy3):
        p = init_params(ModelArch(4, 0, 3), 3)
        cfg = SgdConfig(learning_rate=0.1, momentum=0.0, batch_size=len(toy3), local_epochs=1)
        out = local_train(p, toy3, cfg, seed=9)
        _, grad = forward_loss_grad(p, toy3)
        expected = p.values - 0.1 * grad.values
        assert np.array_equal(out.values, expected)

    def test_deterministic_bitwise(self, toy3):
        p = init_params(ModelArch(4, 6, 3), 3)
        cfg = SgdConfig(learning_rate=0.05, momentum=0.9, batch_size=8, local_epochs=3)
        a = local_train(p, toy3, cfg, seed=4)
        b = local_train(p, toy3, cfg, seed=4)
        assert np.array_equal(a.values, b.values)
        c = local_train(p, toy3, cfg, seed=5)
        assert not np.array_equal(a.values, c.values)

    def test_input_unmodified(self, toy3):
        p = init_params(ModelArch(4, 6, 3), 3)
        before = p.values.copy()
        local_train(p, toy3, SgdConfig(learning_rate=0.1, batch_size=8), seed=1)
        assert np.array_equal(p.values, before)

    def test_training_reduces_loss(self, toy3):
        p = init_params(ModelArch(4, 6, 3), 3)
        cfg = SgdConfig(learning_rate=0.1, momentum=0.9, batch_size=16, local_epochs=5)
        trained = local_train(p, toy3, cfg, seed=2)
        assert forward_loss_grad(trained, toy3)[0] < forward_loss_grad(p, toy3)[0]


class TestEvaluate:
    def test_perfect_two_samples(self):
        arch = ModelArch(2, 0, 2)
        w = np.array([[5.0, -5.0], [-5.0, 5.0]])
        p = ParamVector(np.concatenate([w.ravel(), np.zeros(2)]), arch)
        data = LabeledDataset(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0, 1]), 2)
        acc, _ = evaluate(p, data, 1.0, seed=0)
        assert acc == 1.0

    def test_zero_params_loss_is_log_c(self):
        data = gen_synthetic(4, 25, 5, 0.3, seed=2)
        arch = ModelArch(5, 0, 4)
        p = ParamVector(np.zeros(arch.param_count), arch)
        acc, loss = evaluate(p, data, 1.0, seed=0)
        assert loss == pytest.approx(math.log(4), abs=1e-12)

    def test_ceiling_rule_subset_size(self):
        # 3 of 5 samples evaluated at fraction 0.5 (ceil, not floor): with
        # labels [0,0,0,1,1] and all-zero params (argmax 0) the accuracy is
        # always a multiple of 1/3, which a 2-sample subset cannot produce.
        data = LabeledDataset(np.zeros((5, 2)), np.array([0, 0, 0, 1, 1]), 2)
        p = ParamVector(np.zeros(6), ModelArch(2, 0, 2))
        seen = {evaluate(p, data, 0.5, seed=s)[0] for s in range(12)}
        assert all(min(abs(a - m / 3) for m in range(4)) < 1e-12 for a in seen)
        assert seen - {0.0, 1.0}, "expected at least one fractional accuracy"

    def test_fraction_one_ignores_seed(self, toy3):
        p = init_params(ModelArch(4, 0, 3), 0)
        assert evaluate(p, toy3, 1.0, seed=1) == evaluate(p, toy3, 1.0, seed=2)

    def test_subset_deterministic_per_seed(self, toy3):
        p = init_params(ModelArch(4, 0, 3), 0)
        assert evaluate(p, toy3, 0.3, seed=7) == evaluate(p, toy3, 0.3, seed=7)

    def test_bounds(self, toy3):
        p = init_params(ModelArch(4, 6, 3), 1)
        acc, loss = evaluate(p, toy3, 0.5, seed=3)
        assert 0.0 <= acc <= 1.0
        assert loss >= 0.0

    def test_bad_fraction(self, toy3):
        p = init_params(ModelArch(4, 0, 3), 0)
        with pytest.raises(ValueError, match="fraction"):
            evaluate(p, toy3, 0.0, seed=0)


class TestSgdConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(learning_rate=-0.1),
            dict(learning_rate=0.1, momentum=1.0),
            dict(learning_rate=0.1, batch_size=0),
            dict(learning_rate=0.1, local_epochs=0),
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SgdConfig(**kwargs)
