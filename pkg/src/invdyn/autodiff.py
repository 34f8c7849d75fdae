"""Minimal reverse-mode autodiff over float64 numpy arrays.

Define-by-run graph of Tensor nodes; backward() runs a topological sweep
accumulating gradients.  Broadcasting follows numpy but gradients are summed
back to the operand shapes.  Everything is float64 with fixed reduction
order, so repeated runs are bit-identical.
"""

import numpy as np


class AutodiffError(RuntimeError):
    pass


def _unbroadcast(grad, shape):
    """Sum a broadcasted gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # -- graph plumbing ----------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self):
        if self.data.size != 1:
            raise AutodiffError("backward() requires a scalar loss")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accum(self, grad, owned=False):
        # `owned` marks freshly allocated gradients that no other node can
        # alias, letting the first accumulation skip a copy
        if self.grad is None:
            self.grad = grad if owned else grad.copy()
        else:
            self.grad += grad

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out = Tensor._make(self.data + other.data, (self, other), None)

        def backward(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g, other.data.shape))
        out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor._make(-self.data, (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(-g)
        out._backward = backward
        return out

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out = Tensor._make(self.data * other.data, (self, other), None)

        def backward(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g * other.data, self.data.shape),
                            owned=True)
            if other.requires_grad:
                other._accum(_unbroadcast(g * self.data, other.data.shape),
                             owned=True)
        out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        out = Tensor._make(self.data / other.data, (self, other), None)

        def backward(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(-g * self.data / other.data ** 2,
                                          other.data.shape))
        out._backward = backward
        return out

    def __matmul__(self, other):
        other = as_tensor(other)
        a_d, b_d = self.data, other.data
        if a_d.ndim > 2 and b_d.ndim == 2:
            # stacked-input x weight: one flat GEMM beats numpy's batched loop
            val = (a_d.reshape(-1, a_d.shape[-1]) @ b_d) \
                .reshape(a_d.shape[:-1] + (b_d.shape[-1],))
        else:
            val = a_d @ b_d
        out = Tensor._make(val, (self, other), None)

        def backward(g):
            a, b = self.data, other.data
            if a.ndim > 2 and b.ndim == 2:
                g2 = g.reshape(-1, b.shape[-1])
                if self.requires_grad:
                    self._accum((g2 @ b.T).reshape(a.shape), owned=True)
                if other.requires_grad:
                    other._accum(a.reshape(-1, a.shape[-1]).T @ g2, owned=True)
                return
            # promote vectors so the transpose-based formulas apply uniformly
            a = a if a.ndim > 1 else a[None, :]
            b = b if b.ndim > 1 else b[:, None]
            out_shape = np.broadcast_shapes(a.shape[:-2], b.shape[:-2]) \
                + (a.shape[-2], b.shape[-1])
            g2 = g.reshape(out_shape)
            if self.requires_grad:
                ga = _unbroadcast(g2 @ np.ascontiguousarray(
                    np.swapaxes(b, -1, -2)), a.shape)
                self._accum(ga.reshape(self.data.shape), owned=True)
            if other.requires_grad:
                gb = _unbroadcast(np.swapaxes(a, -1, -2) @ g2, b.shape)
                other._accum(gb.reshape(other.data.shape), owned=True)
        out._backward = backward
        return out

    def __getitem__(self, key):
        out = Tensor._make(self.data[key], (self,), None)

        def backward(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                np.add.at(full, key, g)
                self._accum(full, owned=True)
        out._backward = backward
        return out

    # -- shape ops -----------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor._make(self.data.reshape(shape), (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(g.reshape(self.data.shape))
        out._backward = backward
        return out

    def transpose(self, axes):
        out = Tensor._make(np.transpose(self.data, axes), (self,), None)
        inverse = np.argsort(axes)

        def backward(g):
            if self.requires_grad:
                self._accum(np.transpose(g, inverse))
        out._backward = backward
        return out

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Tensor._make(self.data.sum(axis=axis, keepdims=keepdims),
                           (self,), None)

        def backward(g):
            if self.requires_grad:
                gg = g
                if axis is not None and not keepdims:
                    gg = np.expand_dims(gg, axis)
                self._accum(np.broadcast_to(gg, self.data.shape).copy())
        out._backward = backward
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- elementwise ---------------------------------------------------------

    def relu(self):
        mask = self.data > 0.0
        out = Tensor._make(np.where(mask, self.data, 0.0), (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(g * mask, owned=True)
        out._backward = backward
        return out

    def abs(self):
        sign = np.sign(self.data)
        out = Tensor._make(np.abs(self.data), (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(g * sign, owned=True)
        out._backward = backward
        return out

    def sqrt(self):
        root = np.sqrt(self.data)
        out = Tensor._make(root, (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(g * 0.5 / root, owned=True)
        out._backward = backward
        return out

    def exp(self):
        val = np.exp(self.data)
        out = Tensor._make(val, (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(g * val, owned=True)
        out._backward = backward
        return out

    def log(self):
        out = Tensor._make(np.log(self.data), (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(g / self.data, owned=True)
        out._backward = backward
        return out

    def sigmoid(self):
        val = 0.5 * (1.0 + np.tanh(0.5 * self.data))
        out = Tensor._make(val, (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(g * val * (1.0 - val), owned=True)
        out._backward = backward
        return out

    def softplus(self):
        val = np.logaddexp(0.0, self.data)
        sig = 0.5 * (1.0 + np.tanh(0.5 * self.data))
        out = Tensor._make(val, (self,), None)

        def backward(g):
            if self.requires_grad:
                self._accum(g * sig, owned=True)
        out._backward = backward
        return out


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors, axis=-1):
    datas = [t.data for t in tensors]
    out = Tensor._make(np.concatenate(datas, axis=axis), tuple(tensors), None)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, a, b in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(a, b)
                t._accum(g[tuple(idx)])
    out._backward = backward
    return out


def softmax(x, axis=-1):
    """Numerically stable softmax with a fused backward."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    val = e / e.sum(axis=axis, keepdims=True)
    out = Tensor._make(val, (x,), None)

    def backward(g):
        if x.requires_grad:
            dot = (g * val).sum(axis=axis, keepdims=True)
            x._accum(val * (g - dot))
    out._backward = backward
    return out


def layer_norm(x, gamma, beta, eps=1e-8):
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor._make(xhat * gamma.data + beta.data, (x, gamma, beta), None)
    n = x.data.shape[-1]

    def backward(g):
        if gamma.requires_grad:
            gamma._accum(_unbroadcast(g * xhat, gamma.data.shape))
        if beta.requires_grad:
            beta._accum(_unbroadcast(g, beta.data.shape))
        if x.requires_grad:
            dxhat = g * gamma.data
            term = dxhat - dxhat.mean(axis=-1, keepdims=True) \
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accum(term * inv, owned=True)
    out._backward = backward
    return out


def per_token_linear(x, weight, bias):
    """Per-token projection: (B, M, F) x (M, F, D) + (M, D) -> (B, M, D).

    Each token index has its own projection, which encodes marker identity
    without a separate positional embedding.
    """
    val = np.einsum("bmf,mfd->bmd", x.data, weight.data, optimize=True) + bias.data
    out = Tensor._make(val, (x, weight, bias), None)

    def backward(g):
        if x.requires_grad:
            x._accum(np.einsum("bmd,mfd->bmf", g, weight.data, optimize=True),
                     owned=True)
        if weight.requires_grad:
            weight._accum(np.einsum("bmf,bmd->mfd", x.data, g, optimize=True),
                          owned=True)
        if bias.requires_grad:
            bias._accum(g.sum(axis=0))
    out._backward = backward
    return out


def linear(x, weight, bias=None):
    out = x @ weight
    if bias is not None:
        out = out + bias
    return out


def normalize_rows(x, eps=1e-16):
    """Unit vectors along the last axis; eps keeps the zero vector finite."""
    norm = (x * x).sum(axis=-1, keepdims=True) + eps
    return x / norm.sqrt()


def bce_with_logits(logits, labels):
    """Mean binary cross-entropy on raw logits (labels are 0/1 constants)."""
    labels = as_tensor(labels)
    return (logits.softplus() - logits * labels).mean()
