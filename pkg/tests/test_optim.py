import numpy as np
import pytest

from noisyre.autodiff import ParamStore
from noisyre.optim import OptimizerConfig, adam_step


def store(value, grad):
    params = ParamStore()
    params.add("p", np.array(value, dtype=float))
    params["p"].grad = np.array(grad, dtype=float)
    return params


def test_zero_gradient_no_decay_is_fixed_point():
    params = store([1.0, -2.0], [0.0, 0.0])
    adam_step(params, OptimizerConfig(weight_decay=0.0))
    np.testing.assert_array_equal(params["p"].data, [1.0, -2.0])


def test_first_step_matches_hand_recurrence():
    params = store([1.0], [1.0])
    cfg = OptimizerConfig(learning_rate=0.001, weight_decay=0.0)
    adam_step(params, cfg)
    m = (1 - 0.9) * 1.0
    v = (1 - 0.999) * 1.0
    m_hat, v_hat = m / (1 - 0.9), v / (1 - 0.999)
    expected = 1.0 - 0.001 * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert params["p"].data[0] == pytest.approx(expected, abs=1e-15)
    assert params["p"].data[0] == pytest.approx(0.999, abs=1e-10)
    assert params.steps["p"] == 1


def test_weight_decay_shrinks_through_gradient():
    params = store([1.0], [0.0])
    adam_step(params, OptimizerConfig(weight_decay=0.0001))
    assert params["p"].data[0] < 1.0


def test_second_step_uses_bias_correction():
    params = store([0.0], [2.0])
    cfg = OptimizerConfig(weight_decay=0.0)
    adam_step(params, cfg)
    params["p"].grad = np.array([-1.0])
    adam_step(params, cfg)
    m1, v1 = 0.1 * 2.0, 0.001 * 4.0
    m2, v2 = 0.9 * m1 + 0.1 * -1.0, 0.999 * v1 + 0.001 * 1.0
    step1 = 0.001 * (m1 / 0.1) / (np.sqrt(v1 / 0.001) + 1e-8)
    step2 = 0.001 * (m2 / (1 - 0.81)) / (np.sqrt(v2 / (1 - 0.999**2)) + 1e-8)
    assert params["p"].data[0] == pytest.approx(-step1 - step2, abs=1e-15)


def test_frozen_parameters_are_skipped():
    params = store([1.0], [5.0])
    params.set_trainable("p", False)
    adam_step(params, OptimizerConfig())
    assert params["p"].data[0] == 1.0
    assert params.steps["p"] == 0


def test_overflow_raises():
    params = store([1.0], [1e200])
    with pytest.raises(FloatingPointError):
        adam_step(params, OptimizerConfig())


@pytest.mark.parametrize("kwargs", [{"learning_rate": 0.0}, {"weight_decay": -1.0}, {"beta1": 1.0}, {"beta2": 0.0}])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)
