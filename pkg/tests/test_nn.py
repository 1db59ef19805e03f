import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from irsmec import nn
from irsmec.errors import ShapeError

from oracles import max_rel_err, mlp_loop, numerical_grad


def test_zero_weights_give_bias():
    spec = nn.MlpSpec((3, 4, 2))
    params = nn.init_params(spec, np.random.default_rng(0))
    for w, b in params:
        w[:] = 0
    params[-1][1][:] = [0.5, -2.0]
    out, _ = nn.forward(spec, params, np.ones(3))
    np.testing.assert_array_equal(out, [0.5, -2.0])


def test_identity_layer():
    spec = nn.MlpSpec((4, 4))
    params = [[np.eye(4), np.zeros(4)]]
    x = np.array([1.0, -2.0, 3.0, 0.5])
    np.testing.assert_array_equal(nn.forward(spec, params, x)[0], x)


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_forward_matches_straight_line_oracle(activation):
    spec = nn.MlpSpec((5, 7, 6, 3), activation)
    params = nn.init_params(spec, np.random.default_rng(1))
    x = np.random.default_rng(2).standard_normal(5)
    np.testing.assert_allclose(nn.forward(spec, params, x)[0], mlp_loop(params, x, activation), rtol=1e-12)


def test_shape_mismatch():
    spec = nn.MlpSpec((3, 2))
    params = nn.init_params(spec, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        nn.forward(spec, params, np.ones(4))
    _, cache = nn.forward(spec, params, np.ones(3))
    with pytest.raises(ShapeError):
        nn.backward(spec, params, cache, np.ones(5))


def test_linear_gradient_is_input():
    spec = nn.MlpSpec((1, 1))
    params = [[np.array([[2.0]]), np.array([0.0])]]
    _, cache = nn.forward(spec, params, np.array([3.0]))
    grads, _ = nn.backward(spec, params, cache, np.array([1.0]))
    assert grads[0][0][0, 0] == 3.0 and grads[0][1][0] == 1.0


def test_zero_upstream_gives_zero_grads():
    spec = nn.MlpSpec((3, 8, 2))
    params = nn.init_params(spec, np.random.default_rng(0))
    _, cache = nn.forward(spec, params, np.ones((4, 3)))
    grads, dx = nn.backward(spec, params, cache, np.zeros((4, 2)))
    assert all(not g.any() for layer in grads for g in layer) and not dx.any()


@pytest.mark.parametrize("activation, widths", [("tanh", (4, 8, 8, 3)), ("tanh", (6, 64, 64, 64, 2)),
                                                ("relu", (4, 9, 3))])
def test_backward_matches_central_differences(activation, widths):
    spec = nn.MlpSpec(widths, activation)
    rng = np.random.default_rng(3)
    params = nn.init_params(spec, rng)
    x = rng.standard_normal((5, widths[0]))
    target = rng.standard_normal((5, widths[-1]))

    def loss():
        out, _ = nn.forward(spec, params, x)
        return 0.5 * np.sum((out - target) ** 2)

    out, cache = nn.forward(spec, params, x)
    grads, _ = nn.backward(spec, params, cache, out - target)
    if widths[1] == 64:                     # wide net: check the first and last weight matrices
        analytic = [grads[0][0], grads[-1][0]]
        numeric = numerical_grad(loss, [params[0][0], params[-1][0]])
    else:
        analytic = [g for layer in grads for g in layer]
        numeric = numerical_grad(loss, [p for layer in params for p in layer])
    assert max_rel_err(analytic, numeric, floor=1e-7) < 1e-4


def test_adam_zero_gradient_is_noop():
    p = [[np.array([1.0, 2.0]), np.array([3.0])]]
    opt = nn.Adam(lr=0.1)
    opt.step(p, [[np.zeros(2), np.zeros(1)]])
    np.testing.assert_array_equal(p[0][0], [1.0, 2.0])
    assert opt.step_count == 1


def test_adam_minimizes_quadratic():
    x = [np.array([1.0])]
    opt = nn.Adam(lr=0.05)
    for _ in range(200):
        opt.step(x, [2 * x[0]])
    assert abs(x[0][0]) < 0.05


def test_adam_deterministic():
    def run():
        spec = nn.MlpSpec((2, 4, 1))
        params = nn.init_params(spec, np.random.default_rng(5))
        opt = nn.Adam()
        for _ in range(20):
            out, cache = nn.forward(spec, params, np.ones((3, 2)))
            grads, _ = nn.backward(spec, params, cache, out)
            opt.step(params, grads)
        return params[0][0]
    np.testing.assert_array_equal(run(), run())


def test_adam_shape_mismatch():
    opt = nn.Adam()
    opt.step([np.zeros(2)], [np.zeros(2)])
    with pytest.raises(ShapeError):
        opt.step([np.zeros(3)], [np.zeros(3)])


@given(hnp.arrays(float, (2, 5), elements=st.floats(-1e3, 1e3)))
def test_forward_finite_on_bounded_inputs(x):
    spec = nn.MlpSpec((5, 16, 16, 3))
    params = nn.init_params(spec, np.random.default_rng(0))
    assert np.all(np.isfinite(nn.forward(spec, params, x)[0]))


def test_checkpoint_roundtrip(tmp_path):
    spec = nn.MlpSpec((3, 5, 2), "relu")
    params = nn.init_params(spec, np.random.default_rng(0))
    path = tmp_path / "w.bin"
    nn.save(path, spec, params)
    blob = path.read_bytes()
    assert blob[:4] == b"MLPW"
    assert len(blob) == 4 + 12 + 12 + 8 * (3 * 5 + 5 + 5 * 2 + 2)
    spec2, params2 = nn.load(path)
    assert spec2 == spec
    for (w, b), (w2, b2) in zip(params, params2):
        np.testing.assert_array_equal(w, w2)
        np.testing.assert_array_equal(b, b2)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(ValueError):
        nn.load(path)
