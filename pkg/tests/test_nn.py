import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import bilinear_loops, conv2d_loops
from shadowsynth._validation import ShapeError
from shadowsynth.gradsuite import PRIMITIVE_TOL, primitive_checks
from shadowsynth.nn import functional as F
from shadowsynth.nn.gradcheck import grad_check
from shadowsynth.nn.layers import Conv2d
from shadowsynth.nn.serialize import load_params, params_from_dict, params_to_dict, save_params


def test_conv_identity_kernel():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 3, 4, 5))
    w = np.eye(3).reshape(3, 3, 1, 1)
    np.testing.assert_array_equal(F.conv2d(x, w), x)


def test_conv_counting():
    out = F.conv2d(np.ones((1, 1, 5, 5)), np.ones((1, 1, 3, 3)), padding=1)[0, 0]
    assert out[2, 2] == 9 and out[0, 2] == 6 and out[0, 0] == 4
    np.testing.assert_array_equal(out[1:4, 1:4], 9)


@pytest.mark.parametrize(
    "shape,cout,k,kw",
    [
        ((2, 4, 6, 6), 3, 3, dict(dilation=2, padding=2)),
        ((2, 8, 8, 8), 5, 3, dict()),
        ((1, 4, 7, 6), 6, 3, dict(stride=2, padding=1, groups=2)),
        ((2, 3, 5, 9), 2, (3, 1), dict(padding=(1, 0))),
    ],
)
def test_conv_matches_loops(shape, cout, k, kw):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(shape)
    kh, kwid = (k, k) if np.isscalar(k) else k
    groups = kw.get("groups", 1)
    w = rng.standard_normal((cout, shape[1] // groups, kh, kwid))
    b = rng.standard_normal(cout)
    np.testing.assert_allclose(F.conv2d(x, w, b, **kw), conv2d_loops(x, w, b, **kw), rtol=0, atol=1e-12)


def test_conv_shape_errors():
    with pytest.raises(ShapeError):
        F.conv2d(np.zeros((1, 3, 4, 4)), np.zeros((2, 2, 3, 3)))
    with pytest.raises(ShapeError):
        F.conv2d(np.zeros((1, 2, 2, 2)), np.zeros((1, 2, 5, 5)))


def test_strip_conv_cases():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((1, 3, 9, 1))
    delta = np.zeros((3, 1, 5, 1))
    delta[:, 0, 2, 0] = 1
    np.testing.assert_array_equal(F.strip_conv_dw(x, delta), x)
    box = np.full((1, 1, 5, 1), 0.2)
    out = F.strip_conv_dw(np.ones((1, 1, 8, 1)), box)[0, 0, :, 0]
    np.testing.assert_allclose(out, [0.6, 0.8, 1, 1, 1, 1, 0.8, 0.6], atol=1e-15)
    w = rng.standard_normal((3, 1, 5, 1))
    np.testing.assert_allclose(F.strip_conv_dw(x, w), conv2d_loops(x, w, None, padding=(2, 0), groups=3), atol=1e-12)
    with pytest.raises(ShapeError):
        F.strip_conv_dw(x, np.zeros((3, 1, 3, 1)))


def test_pool_cases():
    x = np.array([[[[1.0, 3.0], [5.0, 7.0]]]])
    np.testing.assert_array_equal(F.pool(x, "avg_over_W")[0, 0, :, 0], [2, 6])
    np.testing.assert_array_equal(F.pool(x, "avg_over_H")[0, 0, 0, :], [3, 5])
    assert F.pool(x, "global_avg").item() == 4
    c = np.full((2, 3, 4, 5), 1.25)
    for mode in ("avg_over_W", "avg_over_H", "global_avg"):
        np.testing.assert_array_equal(F.pool(c, mode), 1.25)


def test_pool_loop_oracle():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((2, 3, 4, 5))
    ow = F.pool(x, "avg_over_W")
    oh = F.pool(x, "avg_over_H")
    for n in range(2):
        for c in range(3):
            for i in range(4):
                assert abs(ow[n, c, i, 0] - sum(x[n, c, i, j] for j in range(5)) / 5) <= 1e-12
            for j in range(5):
                assert abs(oh[n, c, 0, j] - sum(x[n, c, i, j] for i in range(4)) / 4) <= 1e-12


def test_pointwise_closed_forms():
    assert F.sigmoid(np.array(0.0)) == 0.5
    np.testing.assert_array_equal(F.h_swish(np.array([0.0, 3.0, -3.0])), [0.0, 3.0, 0.0])
    x = np.random.default_rng(4).standard_normal((1, 2, 3, 3))
    bn = {"gamma": np.ones(2), "beta": np.zeros(2), "running_mean": np.zeros(2), "running_var": np.ones(2)}
    np.testing.assert_allclose(F.pointwise(x, "batchnorm", bn), x / np.sqrt(1 + 1e-5), rtol=1e-15)
    assert np.all(np.isfinite(F.sigmoid(np.array([-1e4, 1e4]))))


def test_upsample_cases():
    out = F.bilinear_upsample(np.array([[[[0.0, 1.0]]]]), 2)
    np.testing.assert_allclose(out[0, 0, 0], [0, 0.25, 0.75, 1], atol=1e-15)
    np.testing.assert_allclose(F.bilinear_upsample(np.full((1, 2, 3, 3), 0.7), 2), 0.7, atol=1e-15)
    x = np.random.default_rng(5).standard_normal((2, 2, 3, 4))
    for factor in (2, 3):
        np.testing.assert_allclose(F.bilinear_upsample(x, factor), bilinear_loops(x, factor), atol=1e-12)


def test_grad_check_trivial_functions():
    linear = lambda v: (float(v.sum()), np.ones_like(v))
    assert grad_check(linear, np.zeros((3, 4))) <= 1e-10
    x = np.random.default_rng(6).standard_normal((3, 4))
    # away from the origin the only error left is rounding of the summed value
    assert grad_check(linear, x) <= 1e-8
    assert grad_check(lambda v: (float((v**2).sum()), 2 * v), x) <= 1e-8
    assert grad_check(lambda v: (float((v**2).sum()), 3 * v), x) > 0.1
    with pytest.raises(ValueError):
        grad_check(lambda v: (float("nan"), v), x)


@pytest.mark.parametrize("name,fun,x", primitive_checks(0), ids=lambda v: v if isinstance(v, str) else "")
def test_primitive_gradients(name, fun, x):
    assert grad_check(fun, x, seed=0) <= PRIMITIVE_TOL


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (1, 4, 5, 5), elements=st.floats(-10, 10)))
def test_forwards_finite(x):
    w = np.random.default_rng(0).standard_normal((2, 4, 3, 3))
    for out in (F.conv2d(x, w, padding=1), F.sigmoid(x), F.h_swish(x), F.relu(x), F.bilinear_upsample(x, 2)):
        assert np.all(np.isfinite(out))


def test_conv_layer_backward_accumulates_param_grads():
    layer = Conv2d(2, 3, 3, padding=1, seed=1)
    x = np.random.default_rng(7).standard_normal((1, 2, 4, 4))
    wts = np.random.default_rng(8).standard_normal((1, 3, 4, 4))

    def fun(v):
        layer.params["weight"] = v
        out = layer.forward(x)
        layer.zero_grad()
        layer.backward(wts)
        return float(np.sum(wts * out)), layer.grads["weight"].copy()

    assert grad_check(fun, layer.params["weight"].copy()) <= 1e-6


def test_params_serialization_round_trip(tmp_path):
    layer = Conv2d(3, 4, 3, seed=9)
    state = layer.state_dict()
    save_params(state, tmp_path / "p.json")
    back = load_params(tmp_path / "p.json")
    assert set(back) == set(state)
    for k in state:
        np.testing.assert_array_equal(back[k], state[k])
    doc = params_to_dict(state)
    doc["params"]["weight"]["values"] = doc["params"]["weight"]["values"][:-1]
    with pytest.raises(ValueError):
        params_from_dict(doc)


def test_layer_init_deterministic_and_bounded():
    a, b = Conv2d(4, 6, 3, seed=3), Conv2d(4, 6, 3, seed=3)
    np.testing.assert_array_equal(a.params["weight"], b.params["weight"])
    assert np.abs(a.params["weight"]).max() <= np.sqrt(1 / 36)
    np.testing.assert_array_equal(a.params["bias"], 0)
