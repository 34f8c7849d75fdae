"""Builders for the shipped models: pendulum1, pendulum2, humanoid-lite.

The humanoid uses rounded anthropometric mass/length ratios for a ~67 kg,
~1.7 m subject (de Leva-style tables) with box/cylinder inertia estimates.
PD gains follow kp = 60 * subtree mass, capped for 60 Hz integration
stability, with kd critically damped against the subtree inertia seen by
the joint.

Run ``python -m invdyn.builtin OUTDIR`` to regenerate the JSON model files.
"""

import numpy as np

from .model import ArticulatedModel, ContactSphere, HeadingSpec, Marker, Segment

SIM_DT = 1.0 / 60.0
GAIN_PER_KG = 60.0


def _rod_inertia(mass, length, radius=0.02):
    """Solid rod along -z: transverse m L^2/12, axial m r^2/2."""
    it = mass * length * length / 12.0
    ia = max(mass * radius * radius / 2.0, 1e-6)
    return np.diag([it, it, ia])


def _box_inertia(mass, dx, dy, dz):
    return np.diag([
        mass * (dy * dy + dz * dz) / 12.0,
        mass * (dx * dx + dz * dz) / 12.0,
        mass * (dx * dx + dy * dy) / 12.0,
    ])


def _assign_gains(segments, contacts=()):
    """In-place kp/kd from subtree mass and inertia about each joint (zero pose).

    Joints on a chain from the root to a ground-touching contact sphere carry
    the rest of the body in stance, so they get a support floor proportional
    to the complement mass; without it upright stance is an unstable
    inverted pendulum on soft ankle springs.  Everything is capped so that
    dt * sqrt(kp / I) stays within the contractive region of the discrete
    PD map at 60 Hz.
    """
    n = len(segments)
    # zero-pose world joint positions
    pos = np.zeros((n, 3))
    for i, s in enumerate(segments):
        pos[i] = s.offset if s.parent < 0 else pos[s.parent] + s.offset
    children = [[] for _ in range(n)]
    for i, s in enumerate(segments):
        if s.parent >= 0:
            children[s.parent].append(i)

    def subtree(i):
        out = [i]
        for c in children[i]:
            out.extend(subtree(c))
        return out

    m_total = sum(s.mass for s in segments)
    grounded = set()
    if contacts:
        bottoms = [pos[c.segment][2] + c.offset[2] - c.radius for c in contacts]
        floor_z = min(bottoms)
        for c, b in zip(contacts, bottoms):
            if b - floor_z < 0.02:
                grounded.add(c.segment)

    for i, s in enumerate(segments):
        if i == 0 and s.joint == "free":
            continue
        tree = subtree(i)
        m_tree = sum(segments[b].mass for b in tree)
        i_tree = 0.0
        for b in tree:
            d = (pos[b] + segments[b].com) - pos[i]
            i_tree += segments[b].mass * float(d @ d)
            i_tree += float(np.max(np.linalg.eigvalsh(segments[b].inertia)))
        kp = GAIN_PER_KG * m_tree
        if grounded & set(tree):
            kp = max(kp, GAIN_PER_KG * 0.45 * (m_total - m_tree))
        cap = 9.0 * i_tree / (SIM_DT * SIM_DT)
        kp = min(kp, cap)
        s.kp = round(kp, 3)
        s.kd = round(2.0 * np.sqrt(kp * i_tree), 3)


def build_pendulum1():
    segs = [Segment("link1", -1, "revolute-y", np.zeros(3), 1.2,
                    np.array([0.0, 0.0, -0.4]), _rod_inertia(1.2, 0.8))]
    contacts = [ContactSphere(0, np.array([0.0, 0.0, -0.8]), 0.02)]
    _assign_gains(segs, contacts)
    markers = [
        Marker("P1_MID", 0, np.array([0.0, 0.0, -0.4])),
        Marker("P1_TIP", 0, np.array([0.0, 0.0, -0.78])),
    ]
    return ArticulatedModel("pendulum1", segs, markers, contacts)


def build_pendulum2():
    segs = [
        Segment("link1", -1, "revolute-y", np.zeros(3), 1.2,
                np.array([0.0, 0.0, -0.4]), _rod_inertia(1.2, 0.8)),
        Segment("link2", 0, "revolute-y", np.array([0.0, 0.0, -0.8]), 0.9,
                np.array([0.0, 0.0, -0.3]), _rod_inertia(0.9, 0.6)),
    ]
    contacts = [ContactSphere(1, np.array([0.0, 0.0, -0.6]), 0.02)]
    _assign_gains(segs, contacts)
    markers = [
        Marker("P2_L1M", 0, np.array([0.0, 0.0, -0.4])),
        Marker("P2_L1E", 0, np.array([0.0, 0.0, -0.75])),
        Marker("P2_L2M", 1, np.array([0.0, 0.0, -0.3])),
        Marker("P2_TIP", 1, np.array([0.0, 0.0, -0.58])),
    ]
    return ArticulatedModel("pendulum2", segs, markers, contacts)


def build_humanoid_lite():
    """15 segments, 14 spherical joints, free pelvis root; z-up, facing +x.

    Standing pelvis height is 0.97 m so the foot soles (contact spheres of
    radius 0.03 at z-offset -0.05 below the ankle frame) rest exactly on the
    ground plane at the zero pose.
    """
    S = Segment
    segs = [
        S("pelvis", -1, "free", np.zeros(3), 11.0,
          np.array([0.0, 0.0, 0.02]), _box_inertia(11.0, 0.20, 0.30, 0.18)),

        S("l_thigh", 0, "spherical", np.array([0.0, 0.09, -0.05]), 7.0,
          np.array([0.0, 0.0, -0.18]), _rod_inertia(7.0, 0.42, 0.06)),
        S("l_shin", 1, "spherical", np.array([0.0, 0.0, -0.42]), 3.2,
          np.array([0.0, 0.0, -0.19]), _rod_inertia(3.2, 0.42, 0.04)),
        S("l_foot", 2, "spherical", np.array([0.0, 0.0, -0.42]), 0.9,
          np.array([0.06, 0.0, -0.04]), _box_inertia(0.9, 0.20, 0.08, 0.06)),
        S("l_toes", 3, "spherical", np.array([0.13, 0.0, -0.035]), 0.25,
          np.array([0.035, 0.0, -0.01]), _box_inertia(0.25, 0.08, 0.08, 0.03)),

        S("r_thigh", 0, "spherical", np.array([0.0, -0.09, -0.05]), 7.0,
          np.array([0.0, 0.0, -0.18]), _rod_inertia(7.0, 0.42, 0.06)),
        S("r_shin", 5, "spherical", np.array([0.0, 0.0, -0.42]), 3.2,
          np.array([0.0, 0.0, -0.19]), _rod_inertia(3.2, 0.42, 0.04)),
        S("r_foot", 6, "spherical", np.array([0.0, 0.0, -0.42]), 0.9,
          np.array([0.06, 0.0, -0.04]), _box_inertia(0.9, 0.20, 0.08, 0.06)),
        S("r_toes", 7, "spherical", np.array([0.13, 0.0, -0.035]), 0.25,
          np.array([0.035, 0.0, -0.01]), _box_inertia(0.25, 0.08, 0.08, 0.03)),

        S("torso", 0, "spherical", np.array([0.0, 0.0, 0.12]), 21.0,
          np.array([0.0, 0.0, 0.16]), _box_inertia(21.0, 0.24, 0.34, 0.40)),
        S("head", 9, "spherical", np.array([0.0, 0.0, 0.38]), 5.2,
          np.array([0.0, 0.0, 0.11]), _box_inertia(5.2, 0.16, 0.16, 0.22)),

        S("l_upper_arm", 9, "spherical", np.array([0.0, 0.21, 0.32]), 2.0,
          np.array([0.0, 0.0, -0.13]), _rod_inertia(2.0, 0.28, 0.035)),
        S("l_forearm", 11, "spherical", np.array([0.0, 0.0, -0.28]), 1.7,
          np.array([0.0, 0.0, -0.16]), _rod_inertia(1.7, 0.35, 0.03)),
        S("r_upper_arm", 9, "spherical", np.array([0.0, -0.21, 0.32]), 2.0,
          np.array([0.0, 0.0, -0.13]), _rod_inertia(2.0, 0.28, 0.035)),
        S("r_forearm", 13, "spherical", np.array([0.0, 0.0, -0.28]), 1.7,
          np.array([0.0, 0.0, -0.16]), _rod_inertia(1.7, 0.35, 0.03)),
    ]
    C = ContactSphere
    contacts = [
        # feet: heel + ball; toes: tip (soles at z=0 for the zero pose)
        C(3, np.array([-0.05, 0.0, -0.05]), 0.03),
        C(3, np.array([0.11, 0.0, -0.05]), 0.03),
        C(4, np.array([0.04, 0.0, -0.015]), 0.02),
        C(7, np.array([-0.05, 0.0, -0.05]), 0.03),
        C(7, np.array([0.11, 0.0, -0.05]), 0.03),
        C(8, np.array([0.04, 0.0, -0.015]), 0.02),
        # knees (shin upper front), for kneeling
        C(2, np.array([0.05, 0.0, -0.01]), 0.04),
        C(6, np.array([0.05, 0.0, -0.01]), 0.04),
        # thighs, pelvis, torso, head for sitting / falling support
        C(1, np.array([0.04, 0.0, -0.35]), 0.04),
        C(5, np.array([0.04, 0.0, -0.35]), 0.04),
        C(0, np.array([-0.03, 0.0, -0.10]), 0.06),
        C(9, np.array([-0.13, 0.0, 0.14]), 0.06),
        C(10, np.array([0.0, 0.0, 0.16]), 0.07),
        # elbows and hands
        C(12, np.array([0.0, 0.0, -0.01]), 0.035),
        C(12, np.array([0.0, 0.0, -0.33]), 0.03),
        C(14, np.array([0.0, 0.0, -0.01]), 0.035),
        C(14, np.array([0.0, 0.0, -0.33]), 0.03),
    ]

    _assign_gains(segs, contacts)

    def M(name, seg, x, y, z):
        return Marker(name, seg, np.array([x, y, z]))

    markers = [
        # pelvis (4): front/back/left/right, used for heading + origin
        M("PELV_F", 0, 0.10, 0.00, 0.02), M("PELV_B", 0, -0.10, 0.00, 0.03),
        M("PELV_L", 0, 0.00, 0.13, 0.02), M("PELV_R", 0, 0.00, -0.13, 0.02),
        # torso (4)
        M("STRN", 9, 0.10, 0.00, 0.14), M("T10", 9, -0.10, 0.00, 0.12),
        M("CHEST_L", 9, 0.05, 0.15, 0.24), M("CHEST_R", 9, 0.05, -0.15, 0.24),
        # head (3)
        M("HEAD_F", 10, 0.09, 0.00, 0.10),
        M("HEAD_L", 10, 0.00, 0.08, 0.12), M("HEAD_R", 10, 0.00, -0.08, 0.12),
        # left leg (3 + 3 + 2 + 1)
        M("LTHI_F", 1, 0.06, 0.00, -0.15), M("LTHI_L", 1, 0.00, 0.06, -0.10),
        M("LKNE", 1, 0.05, 0.00, -0.40),
        M("LSHN_F", 2, 0.04, 0.00, -0.18), M("LSHN_L", 2, 0.00, 0.05, -0.25),
        M("LANK", 2, 0.00, 0.05, -0.40),
        M("LHEE", 3, -0.05, 0.00, -0.03), M("LMT5", 3, 0.10, 0.04, -0.04),
        M("LTOE", 4, 0.04, 0.00, -0.01),
        # right leg
        M("RTHI_F", 5, 0.06, 0.00, -0.15), M("RTHI_L", 5, 0.00, -0.06, -0.10),
        M("RKNE", 5, 0.05, 0.00, -0.40),
        M("RSHN_F", 6, 0.04, 0.00, -0.18), M("RSHN_L", 6, 0.00, -0.05, -0.25),
        M("RANK", 6, 0.00, -0.05, -0.40),
        M("RHEE", 7, -0.05, 0.00, -0.03), M("RMT5", 7, 0.10, -0.04, -0.04),
        M("RTOE", 8, 0.04, 0.00, -0.01),
        # left arm (3 + 3)
        M("LSHO", 11, 0.00, 0.05, 0.01), M("LUPA", 11, 0.03, 0.00, -0.14),
        M("LELB", 11, 0.04, 0.00, -0.27),
        M("LFRM", 12, 0.03, 0.00, -0.12), M("LWRA", 12, 0.00, 0.03, -0.25),
        M("LFIN", 12, 0.02, 0.00, -0.34),
        # right arm
        M("RSHO", 13, 0.00, -0.05, 0.01), M("RUPA", 13, 0.03, 0.00, -0.14),
        M("RELB", 13, 0.04, 0.00, -0.27),
        M("RFRM", 14, 0.03, 0.00, -0.12), M("RWRA", 14, 0.00, -0.03, -0.25),
        M("RFIN", 14, 0.02, 0.00, -0.34),
    ]
    assert len(markers) == 41


    heading = HeadingSpec(
        front=["PELV_F"], back=["PELV_B"],
        lateral=["PELV_L", "PELV_R"],
        origin=["PELV_F", "PELV_B", "PELV_L", "PELV_R"],
    )
    return ArticulatedModel("humanoid-lite", segs, markers, contacts, heading)


BUILDERS = {
    "pendulum1": build_pendulum1,
    "pendulum2": build_pendulum2,
    "humanoid-lite": build_humanoid_lite,
}


def main(argv=None):
    import argparse
    import os

    parser = argparse.ArgumentParser(description="regenerate builtin model files")
    parser.add_argument("outdir", nargs="?", default="src/invdyn/models")
    args = parser.parse_args(argv)
    os.makedirs(args.outdir, exist_ok=True)
    for name, build in BUILDERS.items():
        path = os.path.join(args.outdir, name.replace("-", "_") + ".json")
        build().save(path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
