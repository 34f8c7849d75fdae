"""Tracking simulator: PD control, penalty ground contact, data recording.

Integration is semi-implicit Euler at 60 Hz.  Joint damping and the contact
damping rate are evaluated at the post-step velocity (a small linear solve),
which keeps light distal segments stable at this rate; spring terms stay
explicit.  Every recorded force/torque is the one actually applied in the
velocity update, so each sub-step satisfies the Newton-Euler balance
   M (v+ - v)/dt = tau_applied - bias + J^T lambda
exactly, and the per-transition angular-momentum targets are the exact time
integrals of the applied torques.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dynamics import (bias_forces, center_of_mass, forward_kinematics,
                       inverse_dynamics, linear_momentum, mass_matrix,
                       world_dof_axes)
from .model import (JOINT_FREE, JOINT_SPHERICAL, Pose, integrate_pose,
                    interpolate_pose, pose_difference)

SIM_DT = 1.0 / 60.0
RECORD_FPS = 30.0
SUBSTEPS = 2                 # 60 Hz simulation, 30 FPS records
ERROR_CLAMP = 1.2            # PD error saturation [rad]
FF_CLAMP = 250.0             # feedforward torque saturation [N m]
VEL_LIMIT = 1e5


class DivergenceError(RuntimeError):
    """Simulation produced non-finite or runaway state."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


@dataclass
class ContactModel:
    """Penalty ground contact: spring-damper normal, viscous Coulomb friction."""
    stiffness: float = 3.0e4         # k_n [N/m]
    damping: float = 300.0           # c_n [N s/m]
    friction: float = 0.9            # mu
    tangential_damping: float = 300.0  # c_t [N s/m]

    def __post_init__(self):
        if self.stiffness <= 0.0:
            raise ValueError("contact stiffness must be > 0")
        if self.damping < 0.0 or self.tangential_damping < 0.0:
            raise ValueError("contact damping must be >= 0")
        if not 0.0 <= self.friction <= 2.0:
            raise ValueError("friction coefficient must be in [0, 2]")


def contact_points_world(model, R, p):
    """World positions of the model's contact spheres, (n_contacts, 3)."""
    if model.n_contacts == 0:
        return np.zeros((0, 3))
    segs = model.contact_segments
    return np.einsum("nij,nj->ni", R[segs], model.contact_offsets) + p[segs]


def contact_point_velocities(model, R, p, w, v):
    segs = model.contact_segments
    out = np.empty((model.n_contacts, 3))
    for i, s in enumerate(segs):
        r = R[s] @ model.contact_offsets[i]
        out[i] = v[s] + np.cross(w[s], r)
    return out


def ground_reaction(contact, model, pose, vel):
    """Instantaneous penalty contact forces at the given state.

    normal  = max(0, -k_n * penetration - c_n * penetration_rate)
    tangent = -c_t * v_t, clamped to the Coulomb cone mu * normal
    Penetration is sphere-bottom height (z - radius), negative inside the ground.

    Returns (per_point_forces, per_point_positions, per_segment_force,
    per_segment_application_point).
    """
    from .dynamics import _kinematics_pass
    R, p, w, v = _kinematics_pass(model, pose, vel)
    pts = contact_points_world(model, R, p)
    vels = contact_point_velocities(model, R, p, w, v)
    forces = np.zeros_like(pts)
    pen = pts[:, 2] - model.contact_radii
    for i in range(model.n_contacts):
        if pen[i] >= 0.0:
            continue
        fn = max(0.0, -contact.stiffness * pen[i] - contact.damping * vels[i, 2])
        ft = -contact.tangential_damping * vels[i, :2]
        ftn = np.linalg.norm(ft)
        lim = contact.friction * fn
        if ftn > lim:
            ft *= lim / ftn
        forces[i, :2] = ft
        forces[i, 2] = fn
    seg_f, seg_p = aggregate_segment_forces(model, forces, pts, p)
    return forces, pts, seg_f, seg_p


def aggregate_segment_forces(model, forces, pts, frame_origins):
    """Per-segment force sums with force-weighted application points."""
    n = model.n_segments
    seg_f = np.zeros((n, 3))
    seg_p = frame_origins.copy()
    wsum = np.zeros(n)
    wpt = np.zeros((n, 3))
    for i in range(model.n_contacts):
        s = model.contact_segments[i]
        seg_f[s] += forces[i]
        wgt = np.linalg.norm(forces[i])
        wsum[s] += wgt
        wpt[s] += wgt * pts[i]
    nz = wsum > 0.0
    seg_p[nz] = wpt[nz] / wsum[nz, None]
    return seg_f, seg_p


@dataclass
class SimState:
    pose: Pose
    vel: np.ndarray
    time: float = 0.0


def _check_finite(vel, frame=None):
    if not np.all(np.isfinite(vel)) or np.max(np.abs(vel)) > VEL_LIMIT:
        raise DivergenceError("simulation diverged (non-finite or runaway velocity)",
                              frame=frame)


def _implicit_substep(model, contact, pose, vel, tau0, kd, dt, frame=None, fk=None):
    """One velocity update with implicit joint/contact damping.

    tau0 is the explicit torque part; the applied torque is
    tau0 - kd * v_plus.  Returns (v_plus, tau_applied, point_forces, points).
    """
    R, p = fk if fk is not None else forward_kinematics(model, pose)
    M = mass_matrix(model, pose, fk=(R, p))
    b = bias_forces(model, pose, vel)
    H = M.copy()
    if kd is not None:
        H[np.diag_indices_from(H)] += dt * kd
    try:
        ch = cho_factor(H, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise DivergenceError(f"implicit system not SPD: {e}", frame=frame)
    rhs = M @ vel + dt * (tau0 - b)
    v_free = cho_solve(ch, rhs, check_finite=False)

    pts = contact_points_world(model, R, p)
    pen = pts[:, 2] - model.contact_radii
    active = np.flatnonzero(pen < 0.0)
    forces = np.zeros((model.n_contacts, 3))
    if active.size == 0:
        v_plus = v_free
    else:
        phi = world_dof_axes(model, R, p)
        Jrows = []
        for i in active:
            s = model.contact_segments[i]
            J = phi[:, 3:] + np.cross(phi[:, :3], pts[i][None, :])
            J[~model.dof_mask[s]] = 0.0
            Jrows.append(J.T)
        J = np.concatenate(Jrows, axis=0)          # (3k, ndof)
        HinvJT = cho_solve(ch, J.T, check_finite=False)
        A = J @ HinvJT                              # (3k, 3k)
        bvec = J @ v_free
        k = active.size
        cdiag = np.tile([contact.tangential_damping,
                         contact.tangential_damping, contact.damping], k)
        spring = np.zeros(3 * k)
        spring[2::3] = -contact.stiffness * pen[active]

        live = np.ones(k, dtype=bool)
        f = np.zeros(3 * k)
        for _ in range(k + 1):
            rows = np.repeat(live, 3)
            nlive = int(live.sum())
            if nlive == 0:
                f[:] = 0.0
                break
            S = np.eye(3 * nlive) + dt * (cdiag[rows, None] * A[np.ix_(rows, rows)])
            rhs_f = spring[rows] - cdiag[rows] * bvec[rows]
            f_live = np.linalg.solve(S, rhs_f)
            f[:] = 0.0
            f[rows] = f_live
            neg = f[2::3] < 0.0
            if not np.any(neg & live):
                break
            live &= ~neg
        # Coulomb cone clamp per point
        for idx in range(k):
            fz = f[3 * idx + 2]
            ft = f[3 * idx:3 * idx + 2]
            lim = contact.friction * fz
            ftn = np.hypot(ft[0], ft[1])
            if ftn > lim:
                f[3 * idx:3 * idx + 2] = ft * (lim / ftn) if ftn > 0.0 else 0.0
        v_plus = v_free + dt * (HinvJT @ f)
        forces[active] = f.reshape(k, 3)

    _check_finite(v_plus, frame)
    tau_applied = tau0 if kd is None else tau0 - kd * v_plus
    return v_plus, tau_applied, forces, pts


def step(model, contact, state, torque, dt=SIM_DT):
    """Semi-implicit Euler step under an applied torque and ground contact."""
    torque = np.asarray(torque, dtype=float)
    if torque.shape != (model.ndof,):
        raise ValueError(f"torque has shape {torque.shape}, expected ({model.ndof},)")
    v_plus, _, forces, pts = _implicit_substep(
        model, contact, state.pose, state.vel, torque, None, dt)
    pose = integrate_pose(model, state.pose, v_plus, dt)
    return SimState(pose, v_plus, state.time + dt)


def pd_torque(model, target, pose, vel):
    """tau = kp o (a - q) - kd o qd, elementwise per DoF; passive root gets zero.

    For spherical joints (a - q) is the log-map of the relative rotation in
    the child frame; for revolute joints it is the angle difference.
    """
    err = pose_difference(model, pose, target)
    err[~model.actuated] = 0.0
    tau = model.kp * err - model.kd * vel
    tau[~model.actuated] = 0.0
    return tau


@dataclass
class Reference:
    """A kinematic reference at the recording rate."""
    seq_id: str
    category: str
    model_name: str
    poses: list                       # Pose per frame
    fps: float = RECORD_FPS
    beta: np.ndarray | None = None    # per-segment shape scales

    def __len__(self):
        return len(self.poses)


@dataclass
class TrackingPlan:
    """Per-substep PD targets and feedforward torques for a reference."""
    targets: list                     # Pose per substep
    feedforward: np.ndarray           # (n_substeps, ndof)
    ref_vels: np.ndarray              # (frames, ndof) finite-differenced
    com_vel: np.ndarray = None        # (n_substeps, 2) intended COM velocity
    dt: float = SIM_DT


@dataclass
class BalanceConfig:
    """COM-error feedback mapped onto stance ankle (and hip) targets.

    Joint PD alone cannot stabilize upright stance: the required ankle
    stiffness exceeds what a light foot tolerates at 60 Hz.  This shifts the
    stance-leg targets by kp*(com error) + kd*(com velocity), saturated, which
    stabilizes the COM mode without stiffening swing-phase gains.
    """
    enabled: bool = True
    kp: float = 4.0          # target shift per meter of COM offset [rad/m]
    kd: float = 2.4          # per m/s of COM velocity [rad s/m]
    hip_share: float = 0.3   # fraction of the correction applied at the hips
    clamp: float = 0.25      # max target shift [rad]
    k_yaw: float = 0.3       # stance-leg shift per rad of root yaw error
    k_yaw_d: float = 0.15    # per rad/s of root yaw rate
    k_step: float = 0.35     # swing-hip shift per m/s of COM velocity error


def estimate_support_forces(model, pose, vel, contact, near=0.025):
    """Quasi-static contact estimate for feedforward inverse dynamics.

    The penalty formula alone reports zero force at zero penetration, so a
    reference standing exactly on the ground would look airborne.  When the
    formula supplies less than body weight and near-ground points exist, the
    weight is instead distributed over those points with the center of
    pressure constrained to the COM projection (an inconsistent COP would
    feed back as a systematic tipping torque).  Point weights taper linearly
    with height so the distribution changes smoothly as feet lift and land;
    discontinuous re-distribution showed up as torque spikes in the
    feedforward.
    """
    from scipy.optimize import nnls

    from .dynamics import center_of_mass
    forces, pts, _, _ = ground_reaction(contact, model, pose, vel)
    weight = model.total_mass * 9.81
    R, p = forward_kinematics(model, pose)
    if forces[:, 2].sum() < weight:
        height = pts[:, 2] - model.contact_radii
        taper = np.clip(1.0 - height / near, 0.0, 1.0)
        nearby = np.flatnonzero(taper > 0.0)
        if nearby.size:
            com = center_of_mass(model, pose, fk=(R, p))
            A = np.vstack([np.ones(nearby.size),
                           pts[nearby, 0], pts[nearby, 1]]) * taper[nearby]
            b = np.array([weight, weight * com[0], weight * com[1]])
            # minimum-norm in the tapered variable spreads the load smoothly
            # over low points; nnls vertex solutions concentrate it, which
            # distorts the per-joint feedforward even though the total
            # wrench is right
            g = np.linalg.lstsq(A, b, rcond=None)[0]
            if np.any(g < 0.0):
                try:
                    g, _ = nnls(A, b)
                except RuntimeError:
                    g = np.full(nearby.size, weight / nearby.size)
            w = taper[nearby] * g
            if w.sum() > 0.0:
                w *= weight / w.sum()
            else:
                w = np.full(nearby.size, weight / nearby.size)
            forces = np.zeros_like(forces)
            forces[nearby, 2] = w
    seg_f, seg_p = aggregate_segment_forces(model, forces, pts, p)
    return seg_f, seg_p


def reference_velocities(model, poses, fps):
    """Central-difference generalized velocities of a pose sequence."""
    T = len(poses)
    vels = np.zeros((T, model.ndof))
    for k in range(T):
        a, b, span = (k, k + 1, 1.0) if k == 0 else \
                     (k - 1, k, 1.0) if k == T - 1 else (k - 1, k + 1, 2.0)
        vels[k] = pose_difference(model, poses[a], poses[b], span / fps)
    return vels


def tracking_controller(model, contact, reference, computed_torque=True):
    """Build per-substep PD targets for a 30 FPS reference.

    The target is the reference interpolated to the next substep plus, in
    computed-torque mode, an error-space offset kp^-1 (tau_ff + kd qd_ref)
    so the PD law reproduces the inverse-dynamics feedforward torque when
    tracking is perfect.  The offset is folded into the feedforward term.
    """
    if len(reference) < 2:
        raise ValueError("reference must contain at least 2 frames")
    poses = reference.poses
    T = len(poses)
    fps = reference.fps
    vels = reference_velocities(model, poses, fps)
    accs = np.zeros_like(vels)
    for k in range(T):
        a, b, span = (k, k + 1, 1.0) if k == 0 else \
                     (k - 1, k, 1.0) if k == T - 1 else (k - 1, k + 1, 2.0)
        accs[k] = (vels[b] - vels[a]) / (span / fps)

    n_sub = (T - 1) * SUBSTEPS
    targets = []
    ff = np.zeros((n_sub, model.ndof))
    com_vel = np.zeros((n_sub, 2))
    act = model.actuated
    for s in range(n_sub):
        # lead the target by one substep
        t_next = (s + 1) / (SUBSTEPS * fps)
        k = min(int(t_next * fps), T - 2)
        frac = t_next * fps - k
        target = interpolate_pose(model, poses[k], poses[k + 1], frac)
        targets.append(target)
        qd = (1.0 - frac) * vels[k] + frac * vels[k + 1]
        if model.joint_types[0] == JOINT_FREE:
            # root drift is a smooth proxy for the intended COM velocity
            com_vel[s] = qd[0:2]
        if computed_torque:
            qdd = (1.0 - frac) * accs[k] + frac * accs[k + 1]
            # contact estimate from the literal penalty formula only: a
            # quasi-static weight fill loads barely-lifted swing feet with
            # phantom support, and the resulting inverse-dynamics torques
            # stomp them down.  With stance-grade PD gains the unmodeled
            # ground-reaction moments are easily absorbed by feedback.
            _, _, seg_f, seg_p = ground_reaction(contact, model, target, qd)
            lam = [(i, seg_p[i], seg_f[i]) for i in range(model.n_segments)
                   if seg_f[i] @ seg_f[i] > 0.0]
            tau_ff = inverse_dynamics(model, target, qd, qdd, lam)
            tau_ff[~act] = 0.0
            np.clip(tau_ff, -FF_CLAMP, FF_CLAMP, out=tau_ff)
            ff[s] = tau_ff + model.kd * (qd * act)
    return TrackingPlan(targets=targets, feedforward=ff, ref_vels=vels,
                        com_vel=com_vel)


@dataclass
class FrameRecord:
    """One recorded 30 FPS frame of simulated ground truth."""
    pose: np.ndarray          # pose vector
    vel: np.ndarray
    beta: np.ndarray
    tau_am: np.ndarray        # (actuated joints, 3) angular momentum [N m s]
    tau_jt: np.ndarray        # (ndof,) mean applied torque over the transition
    grf_force: np.ndarray     # (n_segments, 3)
    grf_point: np.ndarray     # (n_segments, 3)
    time: float


@dataclass
class MotionSequence:
    """Recorded frames at 30 FPS plus subject metadata and a sub-step debug channel."""
    seq_id: str
    category: str
    model_name: str
    model_hash: str
    fps: float
    beta: np.ndarray
    poses: np.ndarray         # (T, pose_dim)
    vels: np.ndarray          # (T, ndof)
    tau_am: np.ndarray        # (T, A, 3); last row zero (no outgoing transition)
    tau_jt: np.ndarray        # (T, ndof); last row zero
    grf_force: np.ndarray     # (T, n_segments, 3)
    grf_point: np.ndarray     # (T, n_segments, 3)
    times: np.ndarray
    subject_mass: float
    subject_height: float
    source: str = "synthetic"
    debug: dict = field(default_factory=dict)

    def __len__(self):
        return self.poses.shape[0]

    def frame(self, i):
        return FrameRecord(self.poses[i], self.vels[i], self.beta,
                           self.tau_am[i], self.tau_jt[i],
                           self.grf_force[i], self.grf_point[i],
                           float(self.times[i]))


def torque_by_joint(model, tau):
    """Group a DoF torque vector into per-actuated-joint 3-vectors (child frame).

    Revolute torques map to axis * tau so single-axis chains share the layout.
    """
    out = np.zeros((model.n_actuated_joints, 3))
    for row, j in enumerate(model.actuated_joints):
        s = model.dof_start[j]
        if model.joint_types[j] == JOINT_SPHERICAL:
            out[row] = tau[s:s + 3]
        else:
            out[row] = model.axes[j] * tau[s]
    return out


def _balance_corrections(model, bal, R, p, pose, vel, target=None,
                         ref_comv=None):
    """Stance-leg target shifts from COM error/velocity; {joint: local vec}.

    The error is measured against the reference's COM offset relative to its
    own support, so deliberate weight shifts in the reference are tracked
    instead of fought."""
    from .rotations import log_so3
    pts = contact_points_world(model, R, p)
    active = pts[:, 2] - model.contact_radii < 0.005
    if not np.any(active):
        return {}
    com = center_of_mass(model, pose, fk=(R, p))
    comv = linear_momentum(model, pose, vel) / model.total_mass
    def hip_of(seg):
        while model.parent[seg] > 0:
            seg = model.parent[seg]
        return seg

    # the position target is the actual support center: one stable reference
    # point per stance leg (the origin of the active segment closest to the
    # root, e.g. the ankle) so toe touches do not drag the target forward.
    groups = {}
    for seg in np.unique(model.contact_segments[active]):
        hip = hip_of(seg)
        groups[hip] = min(groups.get(hip, seg), seg)
    sup = np.mean([p[seg, :2] for seg in groups.values()], axis=0)
    dx, dy = com[:2] - sup
    vx, vy = comv[:2] - (ref_comv if ref_comv is not None else 0.0)
    w = np.array([-(bal.kp * dy + bal.kd * vy), bal.kp * dx + bal.kd * vx, 0.0])
    w = np.clip(w, -bal.clamp, bal.clamp)
    yaw_err = 0.0
    if target is not None and bal.k_yaw != 0.0:
        e_root = R[0] @ log_so3(pose.rotations[0].T @ target.rotations[0])
        if model.joint_types[0] == JOINT_FREE:
            yaw_rate = float((R[0] @ vel[3:6])[2])
        else:
            yaw_rate = 0.0
        # the hip actuator's reaction is what turns the pelvis, hence the sign
        yaw_err = -float(np.clip(bal.k_yaw * e_root[2] - bal.k_yaw_d * yaw_rate,
                                 -bal.clamp, bal.clamp))
    corr = {}
    stance_hips = set()
    for seg in np.unique(model.contact_segments[active]):
        if model.joint_types[seg] != JOINT_SPHERICAL:
            continue
        hip = hip_of(seg)
        stance_hips.add(hip)
        corr[seg] = R[seg].T @ w
        if hip != seg and model.joint_types[hip] == JOINT_SPHERICAL:
            # yaw error is corrected by twisting the stance leg under the pelvis
            corr[hip] = R[hip].T @ (-bal.hip_share * w + np.array([0.0, 0.0, yaw_err]))
    # swing-leg placement: land the free foot further along the COM velocity
    # error so the next stance decelerates the body (Raibert heuristic)
    if bal.k_step != 0.0 and stance_hips:
        all_hips = {hip_of(s) for s in model.contact_segments}
        w_step = np.array([bal.k_step * vy, -bal.k_step * vx, 0.0])
        w_step = np.clip(w_step, -bal.clamp, bal.clamp)
        for hip in all_hips - stance_hips:
            if model.joint_types[hip] == JOINT_SPHERICAL:
                corr[hip] = R[hip].T @ w_step
    return corr


def collect_sequence(model, contact, reference, *, computed_torque=True,
                     record_debug=True, balance=None):
    """Roll out the tracking controller and record paired kinematics/dynamics.

    Records observed (simulated) states at the reference rate.  The
    angular-momentum target of transition t is the sum of the two sub-step
    torques times the sub-step duration; GRFs are averaged over the two
    sub-steps.  The debug channel keeps exact sub-step states, applied
    torques, and per-point contact forces for Newton-Euler residual checks.
    """
    beta = reference.beta if reference.beta is not None else np.ones(model.n_segments)
    scaled = model.with_shape(beta) if not np.allclose(beta, 1.0) else model
    plan = tracking_controller(scaled, contact, reference, computed_torque)
    dt = SIM_DT
    T = len(reference)
    ndof = scaled.ndof

    pose = reference.poses[0].copy()
    vel = plan.ref_vels[0].copy()

    n_sub = (T - 1) * SUBSTEPS
    poses = np.zeros((T, scaled.pose_dim))
    vels = np.zeros((T, ndof))
    tau_am = np.zeros((T, scaled.n_actuated_joints, 3))
    tau_jt = np.zeros((T, ndof))
    grf_f = np.zeros((T, scaled.n_segments, 3))
    grf_p = np.zeros((T, scaled.n_segments, 3))
    times = np.arange(T) / reference.fps

    dbg = None
    if record_debug:
        dbg = {
            "dt": dt,
            "poses": np.zeros((n_sub + 1, scaled.pose_dim)),
            "vels": np.zeros((n_sub + 1, ndof)),
            "taus": np.zeros((n_sub, ndof)),
            "point_forces": np.zeros((n_sub, scaled.n_contacts, 3)),
            "points": np.zeros((n_sub, scaled.n_contacts, 3)),
        }

    kd = scaled.kd
    act = scaled.actuated
    cap = np.where(act, np.maximum(scaled.kp * 2.0, 1e-9), 0.0)
    bal = balance if balance is not None else BalanceConfig()
    use_balance = (bal.enabled and scaled.joint_types[0] == JOINT_FREE
                   and scaled.n_contacts > 0)

    for k in range(T - 1):
        poses[k] = pose.to_vector(scaled)
        vels[k] = vel
        frame_am = np.zeros((scaled.n_actuated_joints, 3))
        frame_jt = np.zeros(ndof)
        frame_gf = np.zeros((scaled.n_segments, 3))
        frame_gp = np.zeros((scaled.n_segments, 3))
        for s_local in range(SUBSTEPS):
            s = k * SUBSTEPS + s_local
            R, p = forward_kinematics(scaled, pose)
            err = pose_difference(scaled, pose, plan.targets[s])
            err[~act] = 0.0
            if use_balance:
                corrs = _balance_corrections(scaled, bal, R, p, pose, vel,
                                             target=plan.targets[s],
                                             ref_comv=plan.com_vel[s])
                for j, vec in corrs.items():
                    ds = scaled.dof_start[j]
                    err[ds:ds + 3] += vec
            np.clip(err, -ERROR_CLAMP, ERROR_CLAMP, out=err)
            tau0 = scaled.kp * err + plan.feedforward[s]
            np.clip(tau0, -cap, cap, out=tau0)
            if dbg is not None:
                dbg["poses"][s] = pose.to_vector(scaled)
                dbg["vels"][s] = vel
            try:
                v_plus, tau_applied, forces, pts = _implicit_substep(
                    scaled, contact, pose, vel, tau0, kd, dt, frame=k, fk=(R, p))
            except DivergenceError as e:
                raise DivergenceError(
                    f"sequence {reference.seq_id!r} diverged at frame {k}: {e}",
                    frame=k)
            if dbg is not None:
                dbg["taus"][s] = tau_applied
                dbg["point_forces"][s] = forces
                dbg["points"][s] = pts
            frame_am += torque_by_joint(scaled, tau_applied) * dt
            frame_jt += tau_applied / SUBSTEPS
            sf, sp = aggregate_segment_forces(scaled, forces, pts, p)
            frame_gf += sf / SUBSTEPS
            frame_gp += sp / SUBSTEPS
            pose = integrate_pose(scaled, pose, v_plus, dt)
            vel = v_plus
        tau_am[k] = frame_am
        tau_jt[k] = frame_jt
        grf_f[k] = frame_gf
        grf_p[k] = frame_gp

    poses[T - 1] = pose.to_vector(scaled)
    vels[T - 1] = vel
    _, _, sf, sp = ground_reaction(contact, scaled, pose, vel)
    grf_f[T - 1] = sf
    grf_p[T - 1] = sp
    if dbg is not None:
        dbg["poses"][n_sub] = pose.to_vector(scaled)
        dbg["vels"][n_sub] = vel

    return MotionSequence(
        seq_id=reference.seq_id, category=reference.category,
        model_name=scaled.name, model_hash=scaled.content_hash(),
        fps=reference.fps, beta=np.asarray(beta, dtype=float),
        poses=poses, vels=vels, tau_am=tau_am, tau_jt=tau_jt,
        grf_force=grf_f, grf_point=grf_p, times=times,
        subject_mass=scaled.total_mass, subject_height=scaled.standing_height(),
        source="synthetic", debug=dbg or {})


def newton_euler_residual(model, seq):
    """Max per-DoF residual |ID(q, qd, qdd_fd, lambda) - tau_applied| over the
    sub-step debug channel; qdd is exact for semi-implicit Euler records."""
    if not seq.debug:
        raise ValueError("sequence has no sub-step debug channel")
    scaled = model.with_shape(seq.beta) if not np.allclose(seq.beta, 1.0) else model
    dbg = seq.debug
    dt = dbg["dt"]
    n_sub = dbg["taus"].shape[0]
    worst = 0.0
    for s in range(n_sub):
        pose = Pose.from_vector(scaled, dbg["poses"][s])
        v0 = dbg["vels"][s]
        v1 = dbg["vels"][s + 1]
        qdd = (v1 - v0) / dt
        lam = []
        for i in range(scaled.n_contacts):
            fvec = dbg["point_forces"][s, i]
            if fvec @ fvec > 0.0:
                lam.append((scaled.contact_segments[i], dbg["points"][s, i], fvec))
        tau = inverse_dynamics(scaled, pose, v0, qdd, lam)
        worst = max(worst, float(np.max(np.abs(tau - dbg["taus"][s]))))
    return worst
