"""Parameter store, AdamW, and the binary checkpoint format."""

import hashlib
import json
import struct

import numpy as np

from .autodiff import Tensor

CHECKPOINT_MAGIC = b"IDYNCKP1"
CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class ParamStore:
    """Named parameter tensors plus per-parameter AdamW state."""

    def __init__(self, meta=None):
        self.params = {}
        self.m = {}
        self.v = {}
        self.step = 0
        self.meta = dict(meta or {})

    def add(self, name, data):
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def names(self):
        return sorted(self.params)

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def n_parameters(self):
        return sum(t.data.size for t in self.params.values())

    def adamw_step(self, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                   weight_decay=0.0, subset=None):
        """Decoupled-weight-decay Adam update on `subset` (default: all).

        Parameters outside the subset keep their values and moments bitwise
        untouched, which is what the stage-two encoder freeze relies on.
        """
        names = self.names() if subset is None else sorted(subset)
        missing = [n for n in names if self.params[n].grad is None]
        if missing:
            raise CheckpointError(f"missing gradients for {missing[:4]}")
        self.step += 1
        bc1 = 1.0 - beta1 ** self.step
        bc2 = 1.0 - beta2 ** self.step
        for n in names:
            g = self.params[n].grad
            m = self.m[n]
            v = self.v[n]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + eps)
            p = self.params[n].data
            if weight_decay:
                p *= 1.0 - lr * weight_decay
            p -= lr * update

    def state_hash(self, names=None):
        h = hashlib.sha256()
        for n in sorted(names) if names else self.names():
            h.update(n.encode())
            h.update(self.params[n].data.tobytes())
        return h.hexdigest()

    # -- checkpoint IO -------------------------------------------------------

    def save(self, path):
        entries = []
        payload = bytearray()
        for n in self.names():
            for tag, arr in (("p", self.params[n].data),
                             ("m", self.m[n]), ("v", self.v[n])):
                raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
                entries.append({"name": n, "kind": tag,
                                "shape": list(arr.shape),
                                "offset": len(payload), "nbytes": len(raw)})
                payload += raw
        header = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "step": self.step,
            "meta": self.meta,
            "tensors": entries,
            "content_hash": hashlib.sha256(bytes(payload)).hexdigest(),
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(bytes(payload))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            if f.read(8) != CHECKPOINT_MAGIC:
                raise CheckpointError(f"{path!r} is not a checkpoint")
            (hlen,) = struct.unpack("<I", f.read(4))
            header = json.loads(f.read(hlen))
            if header["format_version"] != CHECKPOINT_FORMAT_VERSION:
                raise CheckpointError(
                    f"unsupported checkpoint version {header['format_version']}")
            payload = f.read()
        if hashlib.sha256(payload).hexdigest() != header["content_hash"]:
            raise CheckpointError(f"checkpoint {path!r} failed its content hash")
        store = cls(meta=header.get("meta", {}))
        store.step = header["step"]
        for e in header["tensors"]:
            arr = np.frombuffer(
                payload[e["offset"]:e["offset"] + e["nbytes"]],
                dtype="<f8").reshape(e["shape"]).copy()
            if e["kind"] == "p":
                store.params[e["name"]] = Tensor(arr, requires_grad=True)
            elif e["kind"] == "m":
                store.m[e["name"]] = arr
            else:
                store.v[e["name"]] = arr
        return store


def xavier(rng, fan_in, fan_out, shape=None):
    scale = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.standard_normal(shape or (fan_in, fan_out)) * scale
