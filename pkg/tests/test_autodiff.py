import numpy as np
import pytest

from invdyn.autodiff import (Tensor, bce_with_logits, concat, layer_norm,
                             normalize_rows, per_token_linear, softmax)
from invdyn.nn import ParamStore


def numeric_grad(f, tensors, eps=1e-5):
    """Central-difference gradients of scalar f() wrt each tensor's data."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            fp = f().data.item()
            flat[i] = old - eps
            fm = f().data.item()
            flat[i] = old
            gf[i] = (fp - fm) / (2 * eps)
        grads.append(g)
    return grads


def check_grads(f, tensors, tol=1e-4):
    for t in tensors:
        t.grad = None
    loss = f()
    loss.backward()
    for t, num in zip(tensors, numeric_grad(f, tensors)):
        scale = max(1.0, np.abs(num).max())
        assert t.grad is not None
        assert np.max(np.abs(t.grad - num)) < tol * scale


def rand_tensor(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def test_backward_sum_is_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    x.sum().backward()
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_backward_least_squares_analytic():
    rng = np.random.default_rng(0)
    W = rand_tensor(rng, 3, 4)
    x = Tensor(rng.standard_normal(4))
    y = rng.standard_normal(3)
    r = W @ x - Tensor(y)
    (r * r).sum().backward()
    resid = W.data @ x.data - y
    assert np.allclose(W.grad, 2.0 * np.outer(resid, x.data))


def test_non_scalar_backward_raises():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(Exception):
        (x * 2.0).backward()


def test_gradcheck_elementwise_ops():
    rng = np.random.default_rng(1)
    a = rand_tensor(rng, 4, 5)
    b = rand_tensor(rng, 4, 5)
    # keep |a| away from relu/abs kinks
    a.data += 0.2 * np.sign(a.data)
    check_grads(lambda: ((a * b + a / (b * b + 3.0) - b) * a).sum(), [a, b])
    check_grads(lambda: (a.relu() + a.abs()).sum(), [a])
    check_grads(lambda: ((a * a + 1.0).sqrt() + a.exp() * 0.1).mean(), [a])
    check_grads(lambda: (a * a + 0.5).log().sum(), [a])
    check_grads(lambda: a.sigmoid().sum() + a.softplus().sum(), [a])


def test_gradcheck_matmul_broadcast():
    rng = np.random.default_rng(2)
    a = rand_tensor(rng, 2, 3, 4)
    w = rand_tensor(rng, 4, 5)
    check_grads(lambda: ((a @ w) * (a @ w)).sum(), [a, w])


def test_gradcheck_reductions_and_shapes():
    rng = np.random.default_rng(3)
    a = rand_tensor(rng, 3, 4, 2)
    check_grads(lambda: (a.sum(axis=1) * 2.0).mean(), [a])
    check_grads(lambda: (a.mean(axis=-1, keepdims=True) * a).sum(), [a])
    check_grads(lambda: a.transpose((2, 0, 1)).reshape(6, 4).sum(axis=0).mean(), [a])
    b = rand_tensor(rng, 3, 4, 3)
    check_grads(lambda: (concat([a, b], axis=-1) * concat([a, b], axis=-1)).sum(),
                [a, b])
    check_grads(lambda: (a[:, 1:3, :] * a[:, 0:2, :]).sum(), [a])


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(4)
    x = Tensor(rng.standard_normal((6, 9)) * 30.0)
    s = softmax(x).data
    assert np.max(np.abs(s.sum(axis=-1) - 1.0)) < 1e-12
    assert np.all(s >= 0.0)


def test_softmax_gradcheck():
    rng = np.random.default_rng(5)
    x = rand_tensor(rng, 3, 5)
    c = rng.standard_normal((3, 5))
    check_grads(lambda: (softmax(x) * Tensor(c)).sum(), [x])


def test_layer_norm_contracts():
    rng = np.random.default_rng(6)
    x = Tensor(rng.standard_normal((7, 16)) * 2.0 + 1.0)
    g = Tensor(np.ones(16))
    b = Tensor(np.zeros(16))
    y = layer_norm(x, g, b).data
    assert np.max(np.abs(y.mean(axis=-1))) < 1e-9
    assert np.max(np.abs(y.var(axis=-1) - 1.0)) < 1e-6
    const = Tensor(np.full((3, 8), 4.2))
    y0 = layer_norm(const, Tensor(np.ones(8)), Tensor(np.zeros(8))).data
    assert np.max(np.abs(y0)) < 1e-9


def test_layer_norm_gradcheck():
    rng = np.random.default_rng(7)
    x = rand_tensor(rng, 4, 6)
    g = rand_tensor(rng, 6)
    b = rand_tensor(rng, 6)
    c = rng.standard_normal((4, 6))
    check_grads(lambda: (layer_norm(x, g, b) * Tensor(c)).sum(), [x, g, b])


def test_per_token_linear_gradcheck():
    rng = np.random.default_rng(8)
    x = rand_tensor(rng, 2, 3, 4)
    w = rand_tensor(rng, 3, 4, 5)
    b = rand_tensor(rng, 3, 5)
    check_grads(lambda: (per_token_linear(x, w, b) *
                         per_token_linear(x, w, b)).sum(), [x, w, b])


def test_attention_single_token_is_value():
    # with one token, softmax weights are 1 and attention returns V
    rng = np.random.default_rng(9)
    x = Tensor(rng.standard_normal((1, 1, 8)))
    wq, wk, wv = (Tensor(rng.standard_normal((8, 8))) for _ in range(3))
    q, k, v = x @ wq, x @ wk, x @ wv
    scores = softmax((q @ k.transpose((0, 2, 1))) * (1.0 / np.sqrt(8)))
    out = scores @ v
    assert np.allclose(out.data, v.data)


def test_attention_block_gradcheck():
    rng = np.random.default_rng(10)
    x = rand_tensor(rng, 2, 3, 4)
    wq, wk, wv, wo = (rand_tensor(rng, 4, 4, scale=0.7) for _ in range(4))

    def f():
        q, k, v = x @ wq, x @ wk, x @ wv
        att = softmax((q @ k.transpose((0, 2, 1))) * 0.5)
        y = (att @ v) @ wo
        return (y * y).sum()

    check_grads(f, [x, wq, wk, wv, wo])


def test_two_layer_mlp_gradcheck():
    rng = np.random.default_rng(11)
    x = Tensor(rng.standard_normal((5, 6)))
    w1 = rand_tensor(rng, 6, 8)
    b1 = rand_tensor(rng, 8)
    w2 = rand_tensor(rng, 8, 3)
    b2 = rand_tensor(rng, 3)
    y = rng.standard_normal((5, 3))

    def f():
        h = (x @ w1 + b1).relu()
        r = h @ w2 + b2 - Tensor(y)
        return (r * r).mean()

    check_grads(f, [w1, b1, w2, b2])


def test_normalize_rows_unit():
    rng = np.random.default_rng(12)
    x = Tensor(rng.standard_normal((10, 3)))
    n = np.linalg.norm(normalize_rows(x).data, axis=-1)
    assert np.max(np.abs(n - 1.0)) < 1e-9


def test_bce_with_logits_matches_reference():
    rng = np.random.default_rng(13)
    z = Tensor(rng.standard_normal(40) * 4.0)
    y = (rng.random(40) > 0.5).astype(float)
    ours = bce_with_logits(z, y).data
    p = 1.0 / (1.0 + np.exp(-z.data))
    ref = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()
    assert abs(ours - ref) < 1e-12


def test_bce_gradcheck():
    rng = np.random.default_rng(14)
    z = rand_tensor(rng, 12)
    y = (rng.random(12) > 0.5).astype(float)
    check_grads(lambda: bce_with_logits(z, y), [z])


def test_forward_determinism():
    rng = np.random.default_rng(15)
    x = Tensor(rng.standard_normal((64, 32)))
    w = Tensor(rng.standard_normal((32, 32)))
    a = softmax(x @ w).data.copy()
    b = softmax(x @ w).data.copy()
    assert np.array_equal(a, b)


# -- AdamW -------------------------------------------------------------------

def test_adamw_zero_grad_no_decay_is_noop():
    store = ParamStore()
    p = store.add("w", np.array([1.0, -2.0, 3.0]))
    p.grad = np.zeros(3)
    store.adamw_step(lr=0.1, weight_decay=0.0)
    assert np.array_equal(p.data, [1.0, -2.0, 3.0])


def test_adamw_decay_only_shrinks():
    store = ParamStore()
    p = store.add("w", np.array([2.0, -4.0]))
    lr, wd = 0.05, 0.1
    for _ in range(7):
        p.grad = np.zeros(2)
        store.adamw_step(lr=lr, weight_decay=wd)
    assert np.allclose(p.data, np.array([2.0, -4.0]) * (1 - lr * wd) ** 7)


def test_adamw_constant_gradient_step_size():
    # constant gradient: m_hat/sqrt(v_hat) -> g/|g| so each step is ~lr
    store = ParamStore()
    p = store.add("w", np.array([0.0]))
    lr = 1e-2
    for _ in range(200):
        p.grad = np.array([3.7])
        store.adamw_step(lr=lr)
    before = p.data.copy()
    p.grad = np.array([3.7])
    store.adamw_step(lr=lr)
    assert abs((before - p.data).item() - lr) < 1e-6


def test_adamw_missing_grad_raises():
    store = ParamStore()
    store.add("w", np.ones(2))
    with pytest.raises(Exception):
        store.adamw_step(lr=0.1)


def test_adamw_subset_freezes_rest():
    store = ParamStore()
    a = store.add("a", np.array([1.0]))
    b = store.add("b", np.array([1.0]))
    a.grad = np.array([0.5])
    b.grad = np.array([0.5])
    before = b.data.tobytes()
    store.adamw_step(lr=0.1, subset=["a"])
    assert b.data.tobytes() == before
    assert a.data[0] != 1.0


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(16)
    store = ParamStore(meta={"d": 8, "note": "test"})
    for name, shape in [("w1", (4, 5)), ("b1", (5,)), ("deep.w", (2, 3, 4))]:
        t = store.add(name, rng.standard_normal(shape))
        t.grad = rng.standard_normal(shape)
    store.adamw_step(lr=1e-3, weight_decay=0.01)
    path = tmp_path / "ck.bin"
    store.save(path)
    back = ParamStore.load(path)
    assert back.step == store.step
    assert back.meta == store.meta
    for n in store.names():
        assert back[n].data.tobytes() == store[n].data.tobytes()
        assert back.m[n].tobytes() == store.m[n].tobytes()
        assert back.v[n].tobytes() == store.v[n].tobytes()


def test_checkpoint_corruption_detected(tmp_path):
    store = ParamStore()
    store.add("w", np.ones(4))
    path = tmp_path / "ck.bin"
    store.save(path)
    raw = bytearray(path.read_bytes())
    raw[-3] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(Exception):
        ParamStore.load(path)
