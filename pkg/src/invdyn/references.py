"""Synthetic kinematic reference library: parameterized humanoid motions
(gaits, squats, arm waves, jumps, kneels, quiet stance) plus pendulum
trajectories.  Everything is deterministic per seed; per-sequence variation
comes from named substreams so the library is stable under re-generation.
"""

import hashlib

import numpy as np

from .model import Pose, load_model
from .rotations import exp_so3, rotation_x, rotation_y
from .simulate import RECORD_FPS, Reference

PELVIS_Z = 0.97
HIP, KNEE, ANKLE, TOE = 1, 2, 3, 4          # left leg segment indices
RHIP, RKNEE, RANKLE, RTOE = 5, 6, 7, 8
TORSO, HEAD = 9, 10
LSHO, LELB, RSHO, RELB = 11, 12, 13, 14


def substream(seed, name):
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _humanoid_pose(model, root_xyz, root_rot=None, joints=None):
    pose = model.zero_pose(root_position=root_xyz)
    if root_rot is not None:
        pose.rotations[0] = root_rot
    if joints:
        for seg, R in joints.items():
            pose.rotations[seg] = R
    return pose


def _smooth_ramp(t, t0, t1):
    """C1 ramp from 0 at t0 to 1 at t1."""
    if t <= t0:
        return 0.0
    if t >= t1:
        return 1.0
    x = (t - t0) / (t1 - t0)
    return x * x * (3.0 - 2.0 * x)


def make_stand(model, duration, sway=0.01, pelvis_z=PELVIS_Z, fps=RECORD_FPS):
    """Quiet stance with a slow lateral weight sway and gentle arm drift."""
    T = int(round(duration * fps)) + 1
    poses = []
    for k in range(T):
        t = k / fps
        s = _smooth_ramp(t, 0.0, 1.0)
        y = sway * s * np.sin(2 * np.pi * 0.25 * t)
        arm = 0.08 * s * np.sin(2 * np.pi * 0.2 * t)
        joints = {
            LSHO: rotation_x(-arm), RSHO: rotation_x(arm),
        }
        poses.append(_humanoid_pose(model, (0.0, y, pelvis_z), joints=joints))
    return poses


def _leg_joints(phase, hip_amp, knee_amp, lift):
    """Hip/knee/ankle rotations for one leg at gait phase in [0, 2 pi).

    Swing happens on sin(phase) > 0: the knee flexes (positive y rotation
    pulls the foot back/up) while the hip advances (negative y rotation).
    """
    swing = np.sin(phase)
    hip = -hip_amp * swing
    # narrow lift pulse: brief swings keep single-support intervals short,
    # which is what makes lateral balance survivable on a small foot
    knee = knee_amp * max(0.0, np.sin(phase - 0.2)) ** 6 * lift
    # full compensation keeps the sole parallel to the ground at touchdown
    ankle = -(hip + knee)
    return (rotation_y(hip), rotation_y(knee), rotation_y(ankle))


def _stride_leg(phase, stride, knee_amp, lift, leg_len=0.84):
    """Stride-consistent leg angles: the foot is world-stationary in stance.

    The fore-aft foot offset relative to the pelvis sweeps linearly from
    +stride/2 to -stride/2 during stance (the pelvis advances over a planted
    foot) and returns during swing with a knee-lift pulse.
    """
    phase = phase % (2 * np.pi)
    if phase < np.pi:                      # stance
        u = stride * (0.5 - phase / np.pi)
        knee = 0.0
    else:                                  # swing
        x = (phase - np.pi) / np.pi
        sw = x * x * (3.0 - 2.0 * x)
        u = stride * (sw - 0.5)
        knee = knee_amp * np.sin(np.pi * x) ** 2 * lift
    hip = -np.arcsin(np.clip(u / leg_len, -0.99, 0.99)) - 0.5 * knee
    ankle = -(hip + knee)
    return (rotation_y(hip), rotation_y(knee), rotation_y(ankle)), u


def make_gait(model, duration, *, speed=0.0, cadence=0.7, hip_amp=0.12,
              knee_amp=0.25, sway=0.0, pelvis_z=PELVIS_Z, fps=RECORD_FPS):
    """Stepping gait: alternating leg lifts, optionally translating forward.

    With speed > 0 the legs follow a stride-consistent trajectory whose
    stance foot is world-stationary (a sliding stance foot drags hundreds of
    newtons of friction and tips the tracker over).  With speed == 0 the legs
    march in place with sinusoidal hip swings.
    """
    T = int(round(duration * fps)) + 1
    poses = []
    for k in range(T):
        t = k / fps
        ramp = _smooth_ramp(t, 0.0, 1.5)
        phase = 2 * np.pi * cadence * t
        if speed > 0.0:
            stride = ramp * speed / cadence
            (lh, lk, la), ul = _stride_leg(phase, stride, knee_amp, ramp)
            (rh, rk, ra), ur = _stride_leg(phase + np.pi, stride, knee_amp, ramp)
            hip_cos = min(abs(ul), abs(ur)) / 0.84
            z = pelvis_z - 0.84 * (1.0 - np.sqrt(max(0.0, 1.0 - hip_cos ** 2)))
        else:
            lh, lk, la = _leg_joints(phase, hip_amp * ramp, knee_amp, ramp)
            rh, rk, ra = _leg_joints(phase + np.pi, hip_amp * ramp, knee_amp, ramp)
            # compass-gait dip keeps the straight stance leg on the ground
            z = pelvis_z - 0.84 * (1.0 - np.cos(hip_amp * ramp * np.sin(phase)))
        x = speed * ramp * t
        y = -sway * ramp * np.sin(phase)         # weight over the stance foot
        arm = 0.18 * ramp * np.sin(phase)
        joints = {
            HIP: lh, KNEE: lk, ANKLE: la,
            RHIP: rh, RKNEE: rk, RANKLE: ra,
            LSHO: rotation_y(arm), RSHO: rotation_y(-arm),
            TORSO: rotation_y(0.05 * ramp),
        }
        poses.append(_humanoid_pose(model, (x, y, z), joints=joints))
    return poses


def make_squat(model, duration, *, depth=0.22, period=4.0, pelvis_z=PELVIS_Z, fps=RECORD_FPS):
    """Repeated squats; leg angles follow the closed two-bar geometry so the
    feet stay planted while the pelvis descends."""
    T = int(round(duration * fps)) + 1
    thigh = 0.42
    poses = []
    for k in range(T):
        t = k / fps
        ramp = _smooth_ramp(t, 0.0, 1.0)
        d = depth * ramp * 0.5 * (1.0 - np.cos(2 * np.pi * t / period))
        half = np.arccos(np.clip((2 * thigh - d) / (2 * thigh), -1.0, 1.0))
        hip = rotation_y(-half)
        knee = rotation_y(2 * half)
        ankle = rotation_y(-half)
        arm = 0.9 * d / max(depth, 1e-9)
        joints = {
            HIP: hip, KNEE: knee, ANKLE: ankle,
            RHIP: hip, RKNEE: knee, RANKLE: ankle,
            LSHO: rotation_y(-arm), RSHO: rotation_y(-arm),
            TORSO: rotation_y(0.25 * d / max(depth, 1e-9)),
        }
        poses.append(_humanoid_pose(model, (0.0, 0.0, pelvis_z - d), joints=joints))
    return poses


def make_arm_wave(model, duration, *, amp=0.9, freq=0.5, two_arm=True,
                  pelvis_z=PELVIS_Z, fps=RECORD_FPS):
    """Standing with sinusoidal shoulder/elbow waving."""
    T = int(round(duration * fps)) + 1
    poses = []
    for k in range(T):
        t = k / fps
        ramp = _smooth_ramp(t, 0.0, 1.0)
        a = amp * ramp * np.sin(2 * np.pi * freq * t)
        b = 0.6 * amp * ramp * np.sin(2 * np.pi * freq * t + 0.9)
        lift = rotation_x(-(1.4 + 0.3 * np.sin(2 * np.pi * freq * t))) \
            if two_arm else rotation_x(-1.4)
        joints = {
            LSHO: lift @ rotation_y(a), LELB: rotation_y(b),
            RSHO: rotation_x(1.4 * ramp) @ rotation_y(-a if two_arm else 0.0),
            RELB: rotation_y(-b if two_arm else 0.0),
        }
        poses.append(_humanoid_pose(model, (0.0, 0.0, pelvis_z), joints=joints))
    return poses


def make_jump(model, duration, *, crouch=0.16, height=0.07, pelvis_z=PELVIS_Z,
              fps=RECORD_FPS):
    """Counter-movement hop: crouch, extend, short ballistic flight, absorb.

    The legs stay symmetric and untucked; a flight tuck proved to inject
    takeoff angular momentum that tips the landing.  The cycle repeats if
    the duration allows.
    """
    T = int(round(duration * fps)) + 1
    thigh = 0.42
    g = 9.81
    v0 = np.sqrt(2 * g * height)
    t_flight = 2 * v0 / g
    t_crouch, t_push, t_absorb, t_rest = 0.9, 0.5, 1.0, 1.2
    cycle = t_crouch + t_push + t_flight + t_absorb + t_rest
    poses = []
    for k in range(T):
        t = (k / fps) % cycle
        if t < t_crouch:
            d = crouch * _smooth_ramp(t, 0.1, t_crouch)
            z = pelvis_z - d
        elif t < t_crouch + t_push:
            d = crouch * (1.0 - _smooth_ramp(t, t_crouch, t_crouch + t_push))
            z = pelvis_z - d
        elif t < t_crouch + t_push + t_flight:
            tf = t - t_crouch - t_push
            z = pelvis_z + v0 * tf - 0.5 * g * tf * tf
            d = 0.0
        else:
            t_land = t_crouch + t_push + t_flight
            d = 0.14 * np.sin(np.pi * min(1.0, (t - t_land) / t_absorb)) \
                * (1.0 - _smooth_ramp(t, t_land + t_absorb, t_land + t_absorb + 0.4))
            z = pelvis_z - d
        half = np.arccos(np.clip((2 * thigh - d) / (2 * thigh), -1.0, 1.0))
        hip = rotation_y(-half)
        knee = rotation_y(2 * half)
        ankle = rotation_y(-half)
        joints = {HIP: hip, KNEE: knee, ANKLE: ankle,
                  RHIP: hip, RKNEE: knee, RANKLE: ankle,
                  LSHO: rotation_y(-0.3 * d / max(crouch, 1e-9)),
                  RSHO: rotation_y(-0.3 * d / max(crouch, 1e-9))}
        poses.append(_humanoid_pose(model, (0.0, 0.0, z), joints=joints))
    return poses


def make_kneel(model, duration, *, rock=0.35, fps=RECORD_FPS):
    """Deep crouch rocking partially onto the knees, hold, rise.

    The descent follows squat geometry (feet planted); the shins then rotate
    back by `rock` of the way to a full kneel so the knee spheres take load
    while the feet keep contact.  A full weight transfer is beyond what the
    tracking controller can stabilize.
    """
    T = int(round(duration * fps)) + 1
    thigh = 0.42
    t_down = max(6.0, duration * 0.45)
    poses = []
    for k in range(T):
        t = k / fps
        s = _smooth_ramp(t, 0.5, t_down) * (1.0 - _smooth_ramp(t, duration - 3.5, duration - 0.8))
        # phase 1 (s < 0.5): squat; phase 2: rock back slowly onto the knees.
        # The ankle eases rather than tracking full plantarflexion: rotating a
        # loaded foot catapults the body backward.
        d1 = min(s / 0.5, 1.0) * 0.32
        s2 = max(0.0, (s - 0.5) / 0.5) * rock
        half = np.arccos(np.clip((2 * thigh - d1) / (2 * thigh), -1.0, 1.0))
        hip_a = -half + s2 * (half - 0.05)      # thigh back toward vertical
        knee_a = 2 * half + s2 * (1.5 - 2 * half)
        ank_a = -(hip_a + knee_a) * (1.0 - s2) + s2 * 0.5
        joints = {
            HIP: rotation_y(hip_a), KNEE: rotation_y(knee_a), ANKLE: rotation_y(ank_a),
            RHIP: rotation_y(hip_a), RKNEE: rotation_y(knee_a), RANKLE: rotation_y(ank_a),
            TORSO: rotation_y(0.3 * s),
            LSHO: rotation_y(-0.4 * s), RSHO: rotation_y(-0.4 * s),
        }
        # solve the pelvis height so the lowest leg sphere touches the ground:
        # a linear pelvis drop drives the feet far below the floor mid-transfer
        pose = _humanoid_pose(model, (0.03 * s2, 0.0, 0.0), joints=joints)
        poses.append(_ground_root(model, pose, preload=0.002))
    return poses


def _ground_root(model, pose, preload=0.0, segments=None):
    """Shift the root vertically so the lowest contact sphere touches z=0."""
    from .dynamics import forward_kinematics
    from .simulate import contact_points_world
    R, p = forward_kinematics(model, pose)
    pts = contact_points_world(model, R, p)
    idx = range(model.n_contacts) if segments is None else \
        [i for i in range(model.n_contacts) if model.contact_segments[i] in segments]
    low = min(pts[i, 2] - model.contact_radii[i] for i in idx)
    pose.root_position[2] -= low + preload
    return pose


def make_pendulum_swing(model, duration, *, amps, freqs, phases, offsets=None,
                        anchor=(0.0, 0.0, 1.6), fps=RECORD_FPS):
    """Multi-sine joint-angle trajectories for the pendulum models."""
    n = model.n_segments
    amps = np.atleast_1d(amps)
    freqs = np.atleast_1d(freqs)
    phases = np.atleast_1d(phases)
    offsets = np.zeros(n) if offsets is None else np.atleast_1d(offsets)
    T = int(round(duration * fps)) + 1
    poses = []
    for k in range(T):
        t = k / fps
        ramp = _smooth_ramp(t, 0.0, 0.8)
        angles = offsets + ramp * amps * np.sin(2 * np.pi * freqs * t + phases)
        poses.append(Pose(np.asarray(anchor, dtype=float), list(angles)))
    return poses


HUMANOID_CATEGORIES = ("stand", "gait", "squat", "wave", "jump", "kneel")
PENDULUM_CATEGORIES = ("pendulum1", "pendulum2")
ALL_CATEGORIES = HUMANOID_CATEGORIES + PENDULUM_CATEGORIES

DEFAULT_PLAN = {
    "stand": (2, 15.0),
    "gait": (10, 20.0),
    "squat": (6, 14.0),
    "wave": (6, 14.0),
    "jump": (6, 12.0),
    "kneel": (6, 14.0),
    "pendulum1": (4, 12.0),
    "pendulum2": (4, 12.0),
}


def build_reference(seed, category, variant, duration, models=None,
                    beta_spread=0.04, attempt=0):
    """One deterministic reference; `attempt` salts the parameter draw so a
    rollout that proves unstable can be redrawn reproducibly."""
    if category not in ALL_CATEGORIES:
        raise ValueError(f"unknown reference category {category!r}")
    models = models if models is not None else {}
    seq_id = f"{category}-{variant:02d}"
    key = seq_id if attempt == 0 else f"{seq_id}#r{attempt}"
    rng = substream(seed, key)
    if category in PENDULUM_CATEGORIES:
        model = models.get(category) or load_model(category)
        models[category] = model
        n = model.n_segments
        poses = make_pendulum_swing(
            model, duration,
            amps=rng.uniform(0.3, 1.4, n),
            freqs=rng.uniform(0.2, 0.9, n),
            phases=rng.uniform(0.0, 2 * np.pi, n),
            offsets=rng.uniform(-0.4, 0.4, n))
        beta = np.ones(n)
    else:
        model = models.get("humanoid-lite") or load_model("humanoid-lite")
        models["humanoid-lite"] = model
        beta = np.full(model.n_segments,
                       1.0 + rng.uniform(-beta_spread, beta_spread))
        scaled = model.with_shape(beta)
        pz = PELVIS_Z * beta[0]
        if category == "stand":
            poses = make_stand(scaled, duration, pelvis_z=pz,
                               sway=rng.uniform(0.005, 0.02))
        elif category == "gait":
            poses = make_gait(scaled, duration, pelvis_z=pz,
                              cadence=rng.uniform(0.6, 0.85),
                              hip_amp=rng.uniform(0.08, 0.13),
                              knee_amp=rng.uniform(0.12, 0.22))
        elif category == "squat":
            poses = make_squat(scaled, duration, pelvis_z=pz,
                               depth=rng.uniform(0.15, 0.30),
                               period=rng.uniform(3.0, 5.0))
        elif category == "wave":
            poses = make_arm_wave(scaled, duration, pelvis_z=pz,
                                  amp=rng.uniform(0.5, 1.1),
                                  freq=rng.uniform(0.3, 0.7),
                                  two_arm=bool(rng.integers(2)))
        elif category == "jump":
            poses = make_jump(scaled, duration, pelvis_z=pz,
                              crouch=rng.uniform(0.14, 0.18),
                              height=rng.uniform(0.07, 0.10))
        else:
            poses = make_kneel(scaled, duration,
                               rock=rng.uniform(0.12, 0.25))
    return Reference(seq_id=seq_id, category=category,
                     model_name=model.name, poses=poses, beta=beta)


def synth_reference_library(seed, categories=None, plan=None,
                            beta_spread=0.04, models=None):
    """Deterministic library of kinematic references.

    Per-sequence parameters (speeds, amplitudes, shape scales) are drawn from
    a substream keyed by sequence id, so any subset of categories reproduces
    the exact same sequences.
    """
    categories = list(categories) if categories else list(ALL_CATEGORIES)
    for c in categories:
        if c not in ALL_CATEGORIES:
            raise ValueError(f"unknown reference category {c!r}")
    plan = dict(DEFAULT_PLAN, **(plan or {}))
    models = models if models is not None else {}
    refs = []
    for cat in categories:
        count, duration = plan[cat]
        for v in range(count):
            refs.append(build_reference(seed, cat, v, duration, models=models,
                                        beta_spread=beta_spread))
    return refs
