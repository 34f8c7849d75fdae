"""Learned inverse-dynamics solver: a per-marker transformer encoder with
linear prediction heads, an auxiliary forward-dynamics net for cycle
consistency, and a linear plausibility discriminator, trained in a two-stage
curriculum (synthetic pre-training, then torque-head tuning with a frozen
encoder on a differently-distributed dataset).
"""

import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np

from .autodiff import (Tensor, bce_with_logits, concat, layer_norm, linear,
                       normalize_rows, per_token_linear, softmax)
from .markers import MarkerSetInfo, window_stream
from .nn import ParamStore, xavier
from .simulate import RECORD_FPS

# fixed output scales keep head weights O(1) for physical-magnitude targets
AM_SCALE = 2.0       # N m s
GRF_SCALE = 200.0    # N
JT_SCALE = 20.0      # N m


class ShapeMismatchError(ValueError):
    """Checkpoint and data disagree on marker count, window size, or joints."""


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    alpha_mag: float = 0.01
    alpha_cos: float = 1.0
    alpha_fd: float = 0.01
    alpha_cls: float = 1.0
    alpha_l2: float = 1.0
    lr: float = 1e-3
    batch_size: int = 2400
    epochs_stage1: int = 140
    epochs_stage2: int = 10
    negative_ratio: float = 1.0
    noise_sigma: float = 0.05       # [m] on positions; velocity noise scales by fps
    seed: int = 0
    window: int = 2
    dim: int = 64
    layers: int = 3
    ff_dim: int = 128
    fd_width: int = 256
    weight_decay: float = 1e-4
    lr_schedule: str = "cosine"
    warmup_steps: int = 10
    samples_per_epoch: int = 0       # 0: use every training window each epoch

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)


def _rng(seed, name):
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def init_solver(model, cfg):
    """Fresh SolverParams for a model/window configuration.

    Magnitude and joint-torque heads start at zero (untrained predictions are
    exactly zero); direction heads start small so their normalization is well
    conditioned; encoder and FD net use Xavier fan scaling.
    """
    rng = _rng(cfg.seed, "init")
    d = cfg.dim
    M = model.n_markers
    F = 12 * cfg.window + 12
    A = model.n_actuated_joints
    ns = model.n_segments
    angle_dim = int(sum(model.pose_dims[j] for j in model.actuated_joints))
    fd_in = (cfg.window + 1) * 6 + A * 3 + model.ndof + ns * 3
    meta = {
        "model_name": model.name, "model_hash": model.content_hash(),
        "n_markers": M, "window": cfg.window, "dim": d, "layers": cfg.layers,
        "ff_dim": cfg.ff_dim, "fd_width": cfg.fd_width,
        "n_act": A, "ndof": model.ndof, "n_segments": ns,
        "angle_dim": angle_dim,
        "scales": {"am": AM_SCALE, "grf": GRF_SCALE, "jt": JT_SCALE},
        "train_config": cfg.to_dict(),
    }
    store = ParamStore(meta=meta)
    store.add("embed.w", xavier(rng, F, d, (M, F, d)))
    store.add("embed.b", np.zeros((M, d)))
    for i in range(cfg.layers):
        p = f"enc{i}."
        store.add(p + "ln1.g", np.ones(d))
        store.add(p + "ln1.b", np.zeros(d))
        for nm in ("wq", "wk", "wv", "wo"):
            store.add(p + "attn." + nm, xavier(rng, d, d))
        store.add(p + "ln2.g", np.ones(d))
        store.add(p + "ln2.b", np.zeros(d))
        store.add(p + "ff.w1", xavier(rng, d, cfg.ff_dim))
        store.add(p + "ff.b1", np.zeros(cfg.ff_dim))
        store.add(p + "ff.w2", xavier(rng, cfg.ff_dim, d))
        store.add(p + "ff.b2", np.zeros(d))
    store.add("final_ln.g", np.ones(d))
    store.add("final_ln.b", np.zeros(d))
    store.add("pool.w", xavier(rng, d, d))
    store.add("pool.b", np.zeros(d))

    store.add("head.am_mag.w", np.zeros((d, A)))
    store.add("head.am_mag.b", np.zeros(A))
    store.add("head.am_dir.w", xavier(rng, d, A * 3) * 0.3)
    store.add("head.am_dir.b", np.zeros(A * 3))
    store.add("head.grf_mag.w", np.zeros((d, 2 * ns)))
    store.add("head.grf_mag.b", np.zeros(2 * ns))
    store.add("head.grf_dir.w", xavier(rng, d, 2 * ns * 3) * 0.3)
    store.add("head.grf_dir.b", np.zeros(2 * ns * 3))
    store.add("head.jt.w", np.zeros((d, model.ndof)))
    store.add("head.jt.b", np.zeros(model.ndof))

    store.add("fd.w1", xavier(rng, fd_in, cfg.fd_width))
    store.add("fd.b1", np.zeros(cfg.fd_width))
    store.add("fd.w2", xavier(rng, cfg.fd_width, cfg.fd_width))
    store.add("fd.b2", np.zeros(cfg.fd_width))
    store.add("fd.w3", xavier(rng, cfg.fd_width, angle_dim) * 0.1)
    store.add("fd.b3", np.zeros(angle_dim))

    store.add("disc.w", np.zeros((d, 1)))
    store.add("disc.b", np.zeros(1))
    return store


STAGE2_TRAINABLE_PREFIXES = ("head.jt.", "fd.", "disc.")


def encoder_param_names(store):
    return [n for n in store.names()
            if not n.startswith(STAGE2_TRAINABLE_PREFIXES)]


def encode(store, x):
    """Transformer encoder: (B, M, F) window features -> (B, d) feature."""
    meta = store.meta
    d = meta["dim"]
    h = per_token_linear(x, store["embed.w"], store["embed.b"])
    inv_sqrt_d = 1.0 / np.sqrt(d)
    for i in range(meta["layers"]):
        p = f"enc{i}."
        hn = layer_norm(h, store[p + "ln1.g"], store[p + "ln1.b"])
        q = hn @ store[p + "attn.wq"]
        k = hn @ store[p + "attn.wk"]
        v = hn @ store[p + "attn.wv"]
        att = softmax((q @ k.transpose((0, 2, 1))) * inv_sqrt_d)
        h = h + (att @ v) @ store[p + "attn.wo"]
        hn = layer_norm(h, store[p + "ln2.g"], store[p + "ln2.b"])
        ff = linear(linear(hn, store["%sff.w1" % p], store["%sff.b1" % p]).relu(),
                    store["%sff.w2" % p], store["%sff.b2" % p])
        h = h + ff
    h = layer_norm(h, store["final_ln.g"], store["final_ln.b"])
    pooled = h.mean(axis=1)
    return linear(pooled, store["pool.w"], store["pool.b"])


def heads_forward(store, f_id):
    meta = store.meta
    A, ns = meta["n_act"], meta["n_segments"]
    B = f_id.shape[0]
    s = meta["scales"]
    am_mag = linear(f_id, store["head.am_mag.w"], store["head.am_mag.b"]) * s["am"]
    am_dir = normalize_rows(
        linear(f_id, store["head.am_dir.w"], store["head.am_dir.b"])
        .reshape(B, A, 3))
    grf_mag = linear(f_id, store["head.grf_mag.w"], store["head.grf_mag.b"]) * s["grf"]
    grf_dir = normalize_rows(
        linear(f_id, store["head.grf_dir.w"], store["head.grf_dir.b"])
        .reshape(B, 2 * ns, 3))
    jt = linear(f_id, store["head.jt.w"], store["head.jt.b"]) * s["jt"]
    return {"am_mag": am_mag, "am_dir": am_dir,
            "grf_mag": grf_mag, "grf_dir": grf_dir, "jt": jt}


def fd_forward(store, x_flat, heads):
    """Auxiliary forward-dynamics net: past window + predicted dynamics ->
    next-frame actuated joint rotations."""
    meta = store.meta
    w = meta["window"]
    B = x_flat.shape[0]
    past = x_flat[:, :, :(w + 1) * 6].mean(axis=1)
    am = (heads["am_mag"].reshape(B, meta["n_act"], 1) * heads["am_dir"]) \
        .reshape(B, meta["n_act"] * 3)
    grf_t = (heads["grf_mag"][:, :meta["n_segments"]]
             .reshape(B, meta["n_segments"], 1)
             * heads["grf_dir"][:, :meta["n_segments"], :]) \
        .reshape(B, meta["n_segments"] * 3)
    z = concat([past, am, heads["jt"], grf_t], axis=-1)
    h = linear(z, store["fd.w1"], store["fd.b1"]).relu()
    h = linear(h, store["fd.w2"], store["fd.b2"]).relu()
    return linear(h, store["fd.w3"], store["fd.b3"])


def disc_forward(store, f_id):
    return linear(f_id, store["disc.w"], store["disc.b"]).reshape(f_id.shape[0])


@dataclass
class DynamicsPrediction:
    """Recomposed magnitude x direction predictions for a batch of windows."""
    tau_am: np.ndarray       # (B, A, 3)
    grf: np.ndarray          # (B, 2, n_segments, 3) frames t and t+1
    tau_jt: np.ndarray       # (B, ndof)
    f_id: np.ndarray         # (B, d)
    am_mag: np.ndarray
    grf_mag: np.ndarray


def check_window_shape(store, x):
    meta = store.meta
    M, F = meta["n_markers"], 12 * meta["window"] + 12
    if x.shape[1:] != (M, F):
        raise ShapeMismatchError(
            f"window batch has shape {x.shape[1:]}, checkpoint expects "
            f"({M}, {F}) (markers, features); window w={meta['window']}")


def flatten_windows(positions, velocities):
    """(B, F, M, 3) position/velocity stacks -> (B, M, 6F) features."""
    both = np.concatenate((positions, velocities), axis=3)
    return np.ascontiguousarray(np.transpose(both, (0, 2, 1, 3))) \
        .reshape(positions.shape[0], positions.shape[2], -1)


def predict(store, windows_or_x):
    """DynamicsPrediction for a batch of MarkerWindows (or raw features)."""
    if isinstance(windows_or_x, np.ndarray):
        x = windows_or_x
    else:
        x = np.stack([w.flattened() for w in windows_or_x])
    check_window_shape(store, x)
    xt = Tensor(x)
    f_id = encode(store, xt)
    heads = heads_forward(store, f_id)
    meta = store.meta
    B = x.shape[0]
    A, ns = meta["n_act"], meta["n_segments"]
    tau_am = heads["am_mag"].data[:, :, None] * heads["am_dir"].data
    grf = (heads["grf_mag"].data[:, :, None] * heads["grf_dir"].data) \
        .reshape(B, 2, ns, 3)
    return DynamicsPrediction(
        tau_am=tau_am, grf=grf, tau_jt=heads["jt"].data, f_id=f_id.data,
        am_mag=heads["am_mag"].data, grf_mag=heads["grf_mag"].data)


# -- training set assembly -----------------------------------------------------

@dataclass
class WindowSet:
    """Stacked windows and targets for one model topology."""
    positions: np.ndarray     # (N, 2w+2, M, 3)
    velocities: np.ndarray    # (N, 2w+2, M, 3)
    tau_am: np.ndarray        # (N, A, 3)
    tau_jt: np.ndarray        # (N, ndof)
    grf: np.ndarray           # (N, 2, n_segments, 3)
    next_angles: np.ndarray | None   # (N, angle_dim) or None (no FD targets)
    seq_ids: list = field(default_factory=list)
    seq_index: np.ndarray | None = None
    subject_mass: np.ndarray | None = None

    def __len__(self):
        return self.positions.shape[0]

    def features(self, idx=None):
        if idx is None:
            return flatten_windows(self.positions, self.velocities)
        return flatten_windows(self.positions[idx], self.velocities[idx])


def build_window_set(model, sequences, w):
    """Assemble a WindowSet from recorded sequences (one shared topology)."""
    info = None
    pos, vel, tam, tjt, grf, ang = [], [], [], [], [], []
    seq_ids, seq_index, masses = [], [], []
    for si, seq in enumerate(sequences):
        scaled_info = MarkerSetInfo.from_model(
            model.with_shape(seq.beta) if not np.allclose(seq.beta, 1.0) else model)
        info = scaled_info
        for window, targets in window_stream(model, seq, w, info=info):
            pos.append(window.positions)
            vel.append(window.velocities)
            tam.append(targets.tau_am)
            tjt.append(targets.tau_jt)
            grf.append(targets.grf)
            ang.append(targets.next_angles)
            seq_index.append(si)
            masses.append(seq.subject_mass)
        seq_ids.append(seq.seq_id)
    if not pos:
        raise ValueError("no windows produced; sequences too short?")
    return WindowSet(
        positions=np.stack(pos), velocities=np.stack(vel),
        tau_am=np.stack(tam), tau_jt=np.stack(tjt), grf=np.stack(grf),
        next_angles=np.stack(ang), seq_ids=seq_ids,
        seq_index=np.asarray(seq_index), subject_mass=np.asarray(masses))


def gen_negatives(rng, positions, velocities, noise_sigma=0.05, fps=RECORD_FPS):
    """Corrupted windows: temporal permutation or additive Gaussian noise.

    The strategy is drawn uniformly per sample; permutations are rejected
    until non-identity.  Velocity noise is position noise times the frame
    rate, matching what differencing noisy positions would produce.
    """
    if noise_sigma <= 0.0:
        raise ValueError("noise_sigma must be > 0 (degenerate negatives)")
    B, F = positions.shape[0], positions.shape[1]
    pos = positions.copy()
    vel = velocities.copy()
    use_perm = rng.integers(2, size=B).astype(bool)
    for i in range(B):
        if use_perm[i]:
            while True:
                perm = rng.permutation(F)
                if np.any(perm != np.arange(F)):
                    break
            pos[i] = pos[i, perm]
            vel[i] = vel[i, perm]
        else:
            pos[i] += rng.normal(0.0, noise_sigma, pos[i].shape)
            vel[i] += rng.normal(0.0, noise_sigma * fps, vel[i].shape)
    return pos, vel


def _masked_dir_stats(target_vec):
    """Target magnitudes, unit directions, and a near-zero mask (constants)."""
    norm = np.linalg.norm(target_vec, axis=-1)
    mask = norm >= 1e-6
    safe = np.where(mask[..., None], norm[..., None], 1.0)
    return norm, target_vec / safe, mask


def stage1_loss(store, cfg, x, batch, neg_x):
    """Weighted stage-1 loss and its components.

    L_mag: L1 on magnitudes over joints and segment-frames combined.
    L_cos: 1 - cosine on directions, skipping near-zero targets.
    L_FD:  L1 cycle loss through the auxiliary forward-dynamics net.
    L_cls: discriminator BCE, positives vs generated negatives.
    """
    B = x.shape[0]
    meta = store.meta
    ns = meta["n_segments"]
    xt = Tensor(x)
    f_id = encode(store, xt)
    heads = heads_forward(store, f_id)

    am_norm, am_dir, am_mask = _masked_dir_stats(batch["tau_am"])
    grf_t = batch["grf"].reshape(B, 2 * ns, 3)
    grf_norm, grf_dir, grf_mask = _masked_dir_stats(grf_t)

    mags = concat([heads["am_mag"], heads["grf_mag"]], axis=-1)
    t_mags = np.concatenate([am_norm, grf_norm], axis=-1)
    l_mag = (mags - Tensor(t_mags)).abs().mean()

    cos_am = (heads["am_dir"] * Tensor(am_dir)).sum(axis=-1)
    cos_grf = (heads["grf_dir"] * Tensor(grf_dir)).sum(axis=-1)
    cos = concat([cos_am, cos_grf], axis=-1)
    mask = np.concatenate([am_mask, grf_mask], axis=-1).astype(float)
    denom = max(mask.sum(), 1.0)
    l_cos = ((1.0 - cos) * Tensor(mask)).sum() * (1.0 / denom)

    if batch.get("next_angles") is not None:
        fd_pred = fd_forward(store, xt, heads)
        l_fd = (fd_pred - Tensor(batch["next_angles"])).abs().mean()
    else:
        l_fd = Tensor(0.0)

    logits_pos = disc_forward(store, f_id)
    f_neg = encode(store, Tensor(neg_x))
    logits_neg = disc_forward(store, f_neg)
    logits = concat([logits_pos, logits_neg], axis=-1)
    labels = np.concatenate([np.ones(B), np.zeros(neg_x.shape[0])])
    l_cls = bce_with_logits(logits, labels)

    total = (cfg.alpha_mag * l_mag + cfg.alpha_cos * l_cos
             + cfg.alpha_fd * l_fd + cfg.alpha_cls * l_cls)
    parts = {"mag": float(l_mag.data), "cos": float(l_cos.data),
             "fd": float(l_fd.data), "cls": float(l_cls.data),
             "total": float(total.data)}
    return total, parts


def stage2_loss(store, cfg, x, batch, neg_x):
    """Stage-2 loss: FD cycle + discriminator + L2 on joint torques."""
    B = x.shape[0]
    xt = Tensor(x)
    f_id = encode(store, xt)
    heads = heads_forward(store, f_id)
    diff = heads["jt"] - Tensor(batch["tau_jt"])
    l_l2 = (diff * diff).mean()
    if batch.get("next_angles") is not None:
        fd_pred = fd_forward(store, xt, heads)
        l_fd = (fd_pred - Tensor(batch["next_angles"])).abs().mean()
    else:
        l_fd = Tensor(0.0)
    logits_pos = disc_forward(store, f_id)
    f_neg = encode(store, Tensor(neg_x))
    logits_neg = disc_forward(store, f_neg)
    logits = concat([logits_pos, logits_neg], axis=-1)
    labels = np.concatenate([np.ones(B), np.zeros(neg_x.shape[0])])
    l_cls = bce_with_logits(logits, labels)
    total = cfg.alpha_fd * l_fd + cfg.alpha_cls * l_cls + cfg.alpha_l2 * l_l2
    parts = {"fd": float(l_fd.data), "cls": float(l_cls.data),
             "l2": float(l_l2.data), "total": float(total.data)}
    return total, parts


def _lr_at(cfg, step, total_steps):
    lr = cfg.lr
    if cfg.warmup_steps and step < cfg.warmup_steps:
        return lr * (step + 1) / cfg.warmup_steps
    if cfg.lr_schedule == "cosine" and total_steps > cfg.warmup_steps:
        frac = (step - cfg.warmup_steps) / max(1, total_steps - cfg.warmup_steps)
        return lr * (0.05 + 0.95 * 0.5 * (1.0 + np.cos(np.pi * min(1.0, frac))))
    return lr


def _batch_slices(rng, n, cfg):
    order = rng.permutation(n)
    if cfg.samples_per_epoch:
        order = order[:cfg.samples_per_epoch]
    for start in range(0, len(order), cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        if len(idx) > 0:
            yield idx


CHUNK = 512    # micro-batch size; bounds the live autodiff graph memory


def _epoch_pass(store, cfg, train_set, loss_fn, rng_neg, subset, lr_steps):
    """One epoch of minibatch updates; returns mean loss components.

    Each optimizer step accumulates gradients over micro-chunks so large
    batch sizes (the default is 2400) never hold more than one chunk's
    computation graph in memory.
    """
    step0, total_steps, rng_shuffle = lr_steps
    sums = {}
    count = 0
    step = step0
    for idx in _batch_slices(rng_shuffle, len(train_set), cfg):
        store.zero_grad()
        n_total = len(idx)
        parts_acc = {}
        for c0 in range(0, n_total, CHUNK):
            sub = idx[c0:c0 + CHUNK]
            x = train_set.features(sub)
            batch = {
                "tau_am": train_set.tau_am[sub],
                "tau_jt": train_set.tau_jt[sub],
                "grf": train_set.grf[sub],
                "next_angles": None if train_set.next_angles is None
                else train_set.next_angles[sub],
            }
            n_neg = int(round(len(sub) * cfg.negative_ratio))
            neg_pos, neg_vel = gen_negatives(
                rng_neg, train_set.positions[sub][:n_neg],
                train_set.velocities[sub][:n_neg], cfg.noise_sigma)
            neg_x = flatten_windows(neg_pos, neg_vel)
            loss, parts = loss_fn(store, cfg, x, batch, neg_x)
            if not np.isfinite(loss.data):
                raise TrainingDiverged(
                    f"non-finite loss at step {step}: {parts}")
            scale = len(sub) / n_total
            (loss * scale).backward()
            for k, v in parts.items():
                parts_acc[k] = parts_acc.get(k, 0.0) + v * scale
        store.adamw_step(lr=_lr_at(cfg, step, total_steps),
                        weight_decay=cfg.weight_decay, subset=subset)
        for k, v in parts_acc.items():
            sums[k] = sums.get(k, 0.0) + v
        count += 1
        step += 1
    return {k: v / max(count, 1) for k, v in sums.items()}, step


def _steps_per_epoch(n, cfg):
    eff = cfg.samples_per_epoch or n
    eff = min(eff, n)
    return max(1, int(np.ceil(eff / cfg.batch_size)))


def train_stage1(model, train_set, cfg, val_set=None, epochs=None,
                 progress=None):
    """Train everything on the synthetic set; returns (store, epoch log)."""
    epochs = epochs if epochs is not None else cfg.epochs_stage1
    store = init_solver(model, cfg)
    rng_neg = _rng(cfg.seed, "negatives")
    rng_shuffle = _rng(cfg.seed, "shuffle")
    total_steps = _steps_per_epoch(len(train_set), cfg) * epochs
    log = []
    step = 0
    for epoch in range(epochs):
        parts, step = _epoch_pass(store, cfg, train_set, stage1_loss, rng_neg,
                                  None, (step, total_steps, rng_shuffle))
        row = {"epoch": epoch, **{f"loss_{k}": v for k, v in parts.items()}}
        if val_set is not None:
            row.update(validation_mpje(store, val_set))
        log.append(row)
        if progress:
            progress(row)
    return store, log


def train_stage2(store, train_set, cfg, epochs=None, progress=None):
    """Tune the torque head (plus FD net and discriminator) with the encoder
    frozen; encoder parameters are bitwise unchanged."""
    epochs = epochs if epochs is not None else cfg.epochs_stage2
    subset = [n for n in store.names()
              if n.startswith(STAGE2_TRAINABLE_PREFIXES)]
    rng_neg = _rng(cfg.seed, "stage2-negatives")
    rng_shuffle = _rng(cfg.seed, "stage2-shuffle")
    encoder_hash = store.state_hash(encoder_param_names(store))
    total_steps = _steps_per_epoch(len(train_set), cfg) * epochs
    log = []
    step = 0
    for epoch in range(epochs):
        parts, step = _epoch_pass(store, cfg, train_set, stage2_loss, rng_neg,
                                  subset, (step, total_steps, rng_shuffle))
        row = {"epoch": epoch, **{f"loss_{k}": v for k, v in parts.items()}}
        log.append(row)
        if progress:
            progress(row)
    assert store.state_hash(encoder_param_names(store)) == encoder_hash, \
        "stage-2 freeze violated"
    return store, log


def predict_batched(store, window_set, batch=4096, idx=None):
    """Memory-bounded predictions over a WindowSet."""
    n = len(window_set) if idx is None else len(idx)
    sel = np.arange(len(window_set)) if idx is None else np.asarray(idx)
    outs = []
    for start in range(0, n, batch):
        x = window_set.features(sel[start:start + batch])
        outs.append(predict(store, x))
    return DynamicsPrediction(
        tau_am=np.concatenate([o.tau_am for o in outs]),
        grf=np.concatenate([o.grf for o in outs]),
        tau_jt=np.concatenate([o.tau_jt for o in outs]),
        f_id=np.concatenate([o.f_id for o in outs]),
        am_mag=np.concatenate([o.am_mag for o in outs]),
        grf_mag=np.concatenate([o.grf_mag for o in outs]))


def validation_mpje(store, val_set, cap=1500):
    """Body-weight-normalized mean per-joint errors on (a subset of) val."""
    n = min(len(val_set), cap)
    idx = np.arange(n)
    pred = predict_batched(store, val_set, idx=idx)
    mass = val_set.subject_mass[idx][:, None]
    e_am = np.linalg.norm(pred.tau_am - val_set.tau_am[idx], axis=-1) / mass
    grf_t = val_set.grf[idx].reshape(n, -1, 3)
    e_grf = np.linalg.norm(pred.grf.reshape(n, -1, 3) - grf_t, axis=-1) / mass
    return {"val_mpje_tau": float(e_am.mean(axis=1).mean()),
            "val_mpje_grf": float(e_grf.mean(axis=1).mean())}


def assess_plausibility(store, window_set=None, x=None):
    """Per-transition plausibility scores (discriminator sigmoid)."""
    if x is None:
        x = window_set.features()
    check_window_shape(store, x)
    scores = []
    for start in range(0, x.shape[0], 4096):
        f_id = encode(store, Tensor(x[start:start + 4096]))
        logit = disc_forward(store, f_id).data
        scores.append(1.0 / (1.0 + np.exp(-logit)))
    return np.concatenate(scores)
