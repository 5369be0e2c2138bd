import numpy as np
import pytest

from noisyre import autodiff as ad


def central_diff(f, x, step=1e-5):
    """Numerical gradient of scalar f at array x (modified in place, restored)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f()
        flat[i] = orig - step
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return g


def assert_matches_fd(build, arrays, rng, tol=1e-4):
    """build(*tensors) -> Tensor; checks the gradient of a random projection of its output."""
    tensors = [ad.Tensor(a, requires_grad=True) for a in arrays]
    out = build(*tensors)
    weights = rng.normal(size=out.shape)
    loss = ad.dot(out, weights)
    loss.backward()
    for t in tensors:
        def f():
            return float(np.sum(build(*[ad.Tensor(x.data) for x in tensors]).data * weights))

        num = central_diff(f, t.data)
        np.testing.assert_allclose(t.grad, num, rtol=tol, atol=1e-8)


def test_sum_gradient_is_one():
    p = ad.Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    ad.total(p).backward()
    np.testing.assert_array_equal(p.grad, np.ones((2, 3)))


@pytest.mark.parametrize("K", [2, 5, 53])
def test_logsumexp_zero_gradient_uniform(K):
    h = ad.Tensor(np.zeros((1, K)), requires_grad=True)
    ad.total(ad.logsumexp(h)).backward()
    np.testing.assert_allclose(h.grad, np.full((1, K), 1.0 / K), rtol=0, atol=1e-15)


PRIMITIVES = {
    "add": (lambda a, b: ad.add(a, b), lambda r: [r.normal(size=(3, 4)), r.normal(size=(3, 4))]),
    "mul": (lambda a, b: ad.mul(a, b), lambda r: [r.normal(size=(3, 4)), r.normal(size=(3, 4))]),
    "tanh": (ad.tanh, lambda r: [r.normal(size=(2, 5))]),
    "gather": (lambda t: ad.gather(t, np.array([[0, 2, 2], [1, 0, 3]])), lambda r: [r.normal(size=(4, 3))]),
    "concat": (lambda a, b: ad.concat([a, b], axis=-1), lambda r: [r.normal(size=(2, 3, 2)), r.normal(size=(2, 3, 4))]),
    "affine": (ad.affine, lambda r: [r.normal(size=(3, 6)), r.normal(size=(4, 6)), r.normal(size=4)]),
    "conv1d": (ad.conv1d, lambda r: [r.normal(size=(2, 7, 3)), r.normal(size=(4, 3, 3)), r.normal(size=4)]),
    "segment_max": (lambda c: ad.segment_max(c, np.array([[0, 0, 1, 1, 2, 2], [0, 1, 1, 1, 2, -1]])),
                    lambda r: [r.normal(size=(2, 6, 3))]),
    "structured_transition": (ad.structured_transition, lambda r: [r.normal(size=(3, 5)), r.normal(size=5)]),
    "logsumexp": (ad.logsumexp, lambda r: [r.normal(scale=3, size=(4, 5))]),
    "pick": (lambda x: ad.pick(x, np.array([0, 3, 1])), lambda r: [r.normal(size=(3, 4))]),
    "dropout_frozen": (lambda x: ad.dropout(x, 0.5, mask=np.array([[2.0, 0.0, 2.0], [0.0, 2.0, 2.0]])),
                       lambda r: [r.normal(size=(2, 3))]),
    "scale": (lambda x: ad.scale(x, np.array([[1.5, -2.0], [0.0, 3.0]])), lambda r: [r.normal(size=(2, 2))]),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients_match_finite_differences(name):
    build, make = PRIMITIVES[name]
    rng = np.random.default_rng(hash(name) % 2**32)
    for _ in range(100):
        assert_matches_fd(build, make(rng), rng)


def test_segment_max_routes_to_lowest_index_on_ties():
    c = ad.Tensor(np.array([[[3.0], [3.0], [1.0], [2.0], [2.0]]]), requires_grad=True)
    seg = np.array([[0, 0, 1, 2, 2]])
    out = ad.segment_max(c, seg)
    np.testing.assert_array_equal(out.data, [[3.0, 1.0, 2.0]])
    ad.total(out).backward()
    np.testing.assert_array_equal(c.grad[0, :, 0], [1.0, 0.0, 1.0, 1.0, 0.0])


def test_segment_max_empty_segment_is_zero_without_gradient():
    c = ad.Tensor(np.array([[[5.0], [-1.0]]]), requires_grad=True)
    out = ad.segment_max(c, np.array([[0, 2]]))
    np.testing.assert_array_equal(out.data, [[5.0, 0.0, -1.0]])
    ad.total(out).backward()
    np.testing.assert_array_equal(c.grad[0, :, 0], [1.0, 1.0])


def test_shape_mismatch_names_both_shapes():
    a = ad.Tensor(np.zeros((2, 3)))
    b = ad.Tensor(np.zeros((3, 2)))
    with pytest.raises(ad.ShapeError, match=r"\(2, 3\).*\(3, 2\)"):
        ad.add(a, b)
    with pytest.raises(ad.ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
        ad.affine(a, ad.Tensor(np.zeros((4, 5))), ad.Tensor(np.zeros(4)))


def test_unreachable_parameter_has_zero_gradient():
    params = ad.ParamStore()
    params.add("used", np.ones(3))
    params.add("unused", np.ones(2))
    params["unused"].grad += 7.0  # stale accumulator from an earlier step
    loss = ad.forward_backward(lambda p: ad.total(p["used"]), params)
    assert loss == 3.0
    np.testing.assert_array_equal(params["unused"].grad, 0.0)
    np.testing.assert_array_equal(params["used"].grad, 1.0)


def test_frozen_parameter_gets_no_gradient():
    params = ad.ParamStore()
    params.add("w", np.ones(3), trainable=False)
    params.add("x", np.arange(3.0))
    ad.forward_backward(lambda p: ad.total(ad.mul(p["w"], p["x"])), params)
    np.testing.assert_array_equal(params["w"].grad, 0.0)
    np.testing.assert_array_equal(params["x"].grad, 1.0)


def test_identical_forward_passes_are_bitwise_equal():
    def run():
        rng = np.random.default_rng(3)
        x = ad.Tensor(rng.normal(size=(4, 10, 6)))
        f = ad.Tensor(rng.normal(size=(5, 3, 6)))
        b = ad.Tensor(rng.normal(size=5))
        c = ad.conv1d(x, f, b)
        h = ad.dropout(ad.tanh(ad.segment_max(c, np.zeros((4, 8), dtype=int))), 0.5, rng=rng)
        return ad.total(ad.logsumexp(h)).item()

    assert run() == run()


def linear_store():
    params = ad.ParamStore()
    params.add("w", np.array([0.5, -1.0, 2.0]))
    return params, np.array([3.0, 1.0, -2.0])


def test_gradient_check_linear_is_exact():
    params, x = linear_store()
    report = ad.gradient_check(lambda p: ad.dot(p["w"], x), params)
    assert report.errors["w"] < 1e-10
    assert not report.flagged


def test_gradient_check_zero_tolerance_always_flags():
    params, x = linear_store()
    assert ad.gradient_check(lambda p: ad.dot(p["w"], x), params, tolerance=0.0).flagged


def test_gradient_check_rejects_live_dropout():
    params, _ = linear_store()
    with pytest.raises(RuntimeError, match="frozen mask"):
        ad.gradient_check(lambda p: ad.total(ad.dropout(p["w"], 0.5, rng=np.random.default_rng(0))), params)


def test_gradient_check_rejects_bad_step():
    params, x = linear_store()
    with pytest.raises(ValueError):
        ad.gradient_check(lambda p: ad.dot(p["w"], x), params, step=0.0)


def test_dropout_is_inverted():
    rng = np.random.default_rng(0)
    mask = ad.dropout_mask((10000,), 0.5, rng)
    assert set(np.unique(mask)) == {0.0, 2.0}
    assert abs(mask.mean() - 1.0) < 0.05


def test_backward_requires_scalar():
    with pytest.raises(ad.ShapeError):
        ad.Tensor(np.ones(3), requires_grad=True).backward()
