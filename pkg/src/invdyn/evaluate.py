"""Metrics and analysis: body-weight-normalized mean per-joint errors,
zero-phase low-pass filtering, root residual torque as a data-quality
indicator, per-joint mechanical work, and quality-binned model comparison.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt

from .dynamics import inverse_dynamics
from .model import Pose


class EvalError(ValueError):
    pass


def mpje(pred, target, body_mass):
    """Mean per-joint error: per-frame per-joint L2 norms averaged over
    joints then frames, normalized by body mass.

    pred/target: (T, J, 3).  Returns (aggregate, per-joint array (J,)).
    """
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise EvalError(f"shape mismatch {pred.shape} vs {target.shape}")
    if body_mass <= 0.0:
        raise EvalError("body mass must be positive")
    norms = np.linalg.norm(pred - target, axis=-1) / body_mass   # (T, J)
    per_joint = norms.mean(axis=0)
    return float(per_joint.mean()), per_joint


def mpje_feet(pred_grf, target_grf, body_mass, ankle_idx, toe_idx):
    """Per-foot GRF error with ankle and toe segment forces summed."""
    p = pred_grf[:, ankle_idx] + pred_grf[:, toe_idx]
    t = target_grf[:, ankle_idx] + target_grf[:, toe_idx]
    agg, _ = mpje(p[:, None, :], t[:, None, :], body_mass)
    return agg


def lowpass(signal, cutoff=14.0, fs=30.0, order=2):
    """Zero-phase (forward-backward) Butterworth low-pass along axis 0.

    Two passes of an order-2 filter give about -6 dB at the cutoff; DC gain
    is exactly one.  Requires fs > 2 * cutoff.
    """
    if cutoff >= fs / 2.0:
        raise EvalError(f"cutoff {cutoff} Hz >= Nyquist {fs / 2} Hz")
    signal = np.asarray(signal, dtype=float)
    b, a = butter(order, cutoff / (fs / 2.0))
    padlen = min(3 * max(len(a), len(b)), signal.shape[0] - 1)
    return filtfilt(b, a, signal, axis=0, padlen=padlen)


def finite_difference_accel(vels, fps):
    """Central-difference accelerations of recorded generalized velocities."""
    T = vels.shape[0]
    acc = np.zeros_like(vels)
    if T >= 3:
        acc[1:-1] = (vels[2:] - vels[:-2]) * (fps / 2.0)
    if T >= 2:
        acc[0] = (vels[1] - vels[0]) * fps
        acc[-1] = (vels[-1] - vels[-2]) * fps
    return acc


@dataclass
class ResidualReport:
    force: np.ndarray          # (T, 3) root residual force [N]
    torque: np.ndarray         # (T, 3) root residual torque [N m]
    torque_norm: np.ndarray    # (T,)
    threshold: float           # clinical bound 0.1 * m g * height [N m]
    clinical: bool             # mean torque norm below the threshold

    def normalized(self, body_mass):
        return self.torque_norm / body_mass


def residual_torque(model, seq, grf_force=None, grf_point=None):
    """Root-DoF residual of the Newton-Euler balance per recorded frame.

    The residual is the wrench the passive root would need to explain the
    observed accelerations given the recorded contact forces; high values
    indicate inconsistent kinematics/GRF data.  The clinical quality flag
    uses 0.1 * body weight * height.
    """
    scaled = model.with_shape(seq.beta) if not np.allclose(seq.beta, 1.0) else model
    if scaled.joint_types[0] != "free":
        raise EvalError("residual torque requires a floating-base model")
    grf_force = seq.grf_force if grf_force is None else grf_force
    grf_point = seq.grf_point if grf_point is None else grf_point
    if grf_force is None:
        raise EvalError("sequence has no GRF channel")
    accs = finite_difference_accel(seq.vels, seq.fps)
    T = len(seq)
    force = np.zeros((T, 3))
    torque = np.zeros((T, 3))
    for k in range(T):
        pose = Pose.from_vector(scaled, seq.poses[k])
        lam = [(s, grf_point[k, s], grf_force[k, s])
               for s in range(scaled.n_segments)
               if grf_force[k, s] @ grf_force[k, s] > 0.0]
        tau = inverse_dynamics(scaled, pose, seq.vels[k], accs[k], lam)
        force[k] = tau[0:3]
        torque[k] = tau[3:6]
    tnorm = np.linalg.norm(torque, axis=1)
    threshold = 0.1 * scaled.total_mass * 9.81 * seq.subject_height
    return ResidualReport(force=force, torque=torque, torque_norm=tnorm,
                          threshold=threshold,
                          clinical=bool(tnorm.mean() < threshold))


def joint_work(model, seq, tau_jt=None):
    """Signed mechanical work per actuated joint: W_j = tau_j . qd_j * dt.

    Returns (per-frame (T, A) work increments [J], totals (A,), and a
    positive/negative split dict).
    """
    scaled = model.with_shape(seq.beta) if not np.allclose(seq.beta, 1.0) else model
    tau = seq.tau_jt if tau_jt is None else tau_jt
    dt = 1.0 / seq.fps
    T = len(seq)
    A = scaled.n_actuated_joints
    inc = np.zeros((T, A))
    for row, j in enumerate(scaled.actuated_joints):
        s = scaled.dof_start[j]
        d = scaled.dof_count[j]
        inc[:, row] = np.einsum("td,td->t", tau[:, s:s + d],
                                seq.vels[:, s:s + d]) * dt
    totals = inc.sum(axis=0)
    split = {"positive": float(inc[inc > 0].sum()),
             "negative": float(inc[inc < 0].sum())}
    return inc, totals, split


@dataclass
class EvalReport:
    """Aggregated solver evaluation on a set of sequences."""
    mpje_tau: float
    mpje_grf: float
    mpje_jt: float
    mpje_grf_left_foot: float
    mpje_grf_right_foot: float
    per_joint_tau: np.ndarray
    per_joint_grf: np.ndarray
    joint_names: list
    segment_names: list
    n_sequences: int = 0
    n_transitions: int = 0
    per_sequence: list = field(default_factory=list)
    baseline: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def rows(self):
        rows = [
            ("mPJE_tau_am [N m s/kg]", self.mpje_tau),
            ("mPJE_grf [N/kg]", self.mpje_grf),
            ("mPJE_tau_jt [N m/kg]", self.mpje_jt),
            ("mPJE_grf_left_foot [N/kg]", self.mpje_grf_left_foot),
            ("mPJE_grf_right_foot [N/kg]", self.mpje_grf_right_foot),
        ]
        for key, val in sorted(self.baseline.items()):
            rows.append((f"baseline_{key}", val))
        rows.append(("n_sequences", self.n_sequences))
        rows.append(("n_transitions", self.n_transitions))
        return rows


def _foot_segment_indices(model):
    """(left ankle segment, left toe segment, right ...) by name convention;
    absent names disable the per-foot metrics."""
    names = [s.name for s in model.segments]

    def find(n):
        return names.index(n) if n in names else None
    return (find("l_foot"), find("l_toes"), find("r_foot"), find("r_toes"))


def evaluate_predictions(model, sequences, predictions, runtime_s=0.0,
                         baseline_zero=True):
    """EvalReport from per-sequence DynamicsPrediction-like dicts.

    `predictions[seq_id]` carries arrays tau_am (T-1, A, 3), grf
    (T-1, 2, S, 3), tau_jt (T-1, ndof); targets come from the sequences.
    GRF errors are measured at the pivot frame (index t of the t:t+1 pair).
    """
    per_tau, per_grf = [], []
    agg = {"tau": [], "grf": [], "jt": [], "lf": [], "rf": []}
    zero = {"tau": [], "grf": [], "lf": [], "rf": []}
    per_sequence = []
    lf, lt, rf, rt = _foot_segment_indices(model)
    n_trans = 0
    for seq in sequences:
        pred = predictions[seq.seq_id]
        n = pred["tau_am"].shape[0]
        n_trans += n
        mass = seq.subject_mass
        t_am = seq.tau_am[:n]
        t_grf = seq.grf_force[:n]
        p_grf = pred["grf"][:, 0]
        a_tau, pj_tau = mpje(pred["tau_am"], t_am, mass)
        a_grf, pj_grf = mpje(p_grf, t_grf, mass)
        scaled_ndof = seq.tau_jt.shape[1]
        a_jt, _ = mpje(pred["tau_jt"].reshape(n, scaled_ndof, 1),
                       seq.tau_jt[:n].reshape(n, scaled_ndof, 1), mass)
        row = {"seq_id": seq.seq_id, "category": seq.category,
               "mpje_tau": a_tau, "mpje_grf": a_grf, "mpje_jt": a_jt,
               "n": n}
        if lf is not None:
            row["mpje_grf_lf"] = mpje_feet(p_grf, t_grf, mass, lf, lt)
            row["mpje_grf_rf"] = mpje_feet(p_grf, t_grf, mass, rf, rt)
            agg["lf"].append(row["mpje_grf_lf"] * n)
            agg["rf"].append(row["mpje_grf_rf"] * n)
            zero["lf"].append(mpje_feet(np.zeros_like(p_grf), t_grf, mass, lf, lt) * n)
            zero["rf"].append(mpje_feet(np.zeros_like(p_grf), t_grf, mass, rf, rt) * n)
        per_sequence.append(row)
        agg["tau"].append(a_tau * n)
        agg["grf"].append(a_grf * n)
        agg["jt"].append(a_jt * n)
        per_tau.append(pj_tau * n)
        per_grf.append(pj_grf * n)
        if baseline_zero:
            zt, _ = mpje(np.zeros_like(pred["tau_am"]), t_am, mass)
            zg, _ = mpje(np.zeros_like(p_grf), t_grf, mass)
            zero["tau"].append(zt * n)
            zero["grf"].append(zg * n)
    baseline = {}
    if baseline_zero and n_trans:
        baseline = {
            "zero_mpje_tau": sum(zero["tau"]) / n_trans,
            "zero_mpje_grf": sum(zero["grf"]) / n_trans,
        }
        if zero["lf"]:
            baseline["zero_mpje_grf_lf"] = sum(zero["lf"]) / n_trans
            baseline["zero_mpje_grf_rf"] = sum(zero["rf"]) / n_trans
    joint_names = [model.segments[j].name for j in model.actuated_joints]
    return EvalReport(
        mpje_tau=sum(agg["tau"]) / n_trans,
        mpje_grf=sum(agg["grf"]) / n_trans,
        mpje_jt=sum(agg["jt"]) / n_trans,
        mpje_grf_left_foot=sum(agg["lf"]) / n_trans if agg["lf"] else float("nan"),
        mpje_grf_right_foot=sum(agg["rf"]) / n_trans if agg["rf"] else float("nan"),
        per_joint_tau=np.sum(per_tau, axis=0) / n_trans,
        per_joint_grf=np.sum(per_grf, axis=0) / n_trans,
        joint_names=joint_names,
        segment_names=[s.name for s in model.segments],
        n_sequences=len(sequences), n_transitions=n_trans,
        per_sequence=per_sequence, baseline=baseline, runtime_s=runtime_s)


def binned_comparison(rows_a, rows_b, quality, bins=5, metric="mpje_tau"):
    """Delta-metric (A minus B) binned by a per-sequence quality key.

    rows_*: per-sequence dicts keyed by seq_id; quality: seq_id -> scalar
    (e.g. mean residual torque).  Empty bins are omitted.  Returns a list of
    {lo, hi, count, delta, quality_mean} dicts.
    """
    a = {r["seq_id"]: r[metric] for r in rows_a}
    b = {r["seq_id"]: r[metric] for r in rows_b}
    ids = sorted(set(a) & set(b) & set(quality))
    if not ids:
        raise EvalError("no overlapping sequences to bin")
    q = np.array([quality[i] for i in ids])
    edges = np.quantile(q, np.linspace(0.0, 1.0, bins + 1))
    edges[-1] += 1e-12
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = [i for i, qi in zip(ids, q) if lo <= qi < hi]
        if not sel:
            continue
        delta = float(np.mean([a[i] - b[i] for i in sel]))
        out.append({"lo": float(lo), "hi": float(hi), "count": len(sel),
                    "delta": delta,
                    "quality_mean": float(np.mean([quality[i] for i in sel]))})
    return out


def roc_auc(pos_scores, neg_scores):
    """Rank-based AUC (Mann-Whitney) for discriminator evaluation."""
    pos = np.asarray(pos_scores)
    neg = np.asarray(neg_scores)
    all_scores = np.concatenate([pos, neg])
    order = np.argsort(all_scores, kind="mergesort")
    ranks = np.empty(len(all_scores))
    ranks[order] = np.arange(1, len(all_scores) + 1)
    # average ties
    sorted_scores = all_scores[order]
    i = 0
    while i < len(sorted_scores):
        j = i
        while j + 1 < len(sorted_scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    r_pos = ranks[:len(pos)].sum()
    n_p, n_n = len(pos), len(neg)
    return float((r_pos - n_p * (n_p + 1) / 2.0) / (n_p * n_n))
