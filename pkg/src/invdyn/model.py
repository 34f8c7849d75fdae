"""Articulated-model definition, pose/velocity layout, and model file IO.

A model is an open kinematic tree in topological order.  Segment 0 is the
root; its joint connects it to the world and may be "free" (6 DoF floating
base), "spherical", or "revolute-{x,y,z}" (fixed anchor at the pose's root
position).  Generalized-velocity layout, in segment order:

  free joint       6 DoF: world linear velocity of the root frame origin,
                   then angular velocity in the root body frame
  spherical joint  3 DoF: relative angular velocity in the child body frame
  revolute joint   1 DoF: joint angle rate

Pose vectors use root position (3) followed by per-joint 6d rotations
(spherical/free) or scalar angles (revolute).
"""

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .rotations import decode_6d, encode_6d, exp_so3, log_so3, slerp

JOINT_FREE = "free"
JOINT_SPHERICAL = "spherical"
REVOLUTE_AXES = {
    "revolute-x": np.array([1.0, 0.0, 0.0]),
    "revolute-y": np.array([0.0, 1.0, 0.0]),
    "revolute-z": np.array([0.0, 0.0, 1.0]),
}
MODEL_FORMAT_VERSION = 1
GRAVITY = np.array([0.0, 0.0, -9.81])


class ModelError(ValueError):
    """Invalid model definition or model file."""


@dataclass
class Segment:
    name: str
    parent: int
    joint: str
    offset: np.ndarray        # joint position in the parent frame [m]
    mass: float               # [kg]
    com: np.ndarray           # center of mass in the segment frame [m]
    inertia: np.ndarray       # 3x3 about the COM, segment frame [kg m^2]
    kp: float = 0.0           # PD gain per DoF [N m / rad]
    kd: float = 0.0           # PD damping per DoF [N m s / rad]


@dataclass
class Marker:
    name: str
    segment: int
    offset: np.ndarray


@dataclass
class ContactSphere:
    segment: int
    offset: np.ndarray
    radius: float


@dataclass
class HeadingSpec:
    """Marker names used to derive the ground-plane heading and origin."""
    front: list = field(default_factory=list)
    back: list = field(default_factory=list)
    lateral: list = field(default_factory=list)   # (left, right)
    origin: list = field(default_factory=list)


def _joint_dof(joint):
    if joint == JOINT_FREE:
        return 6
    if joint == JOINT_SPHERICAL:
        return 3
    if joint in REVOLUTE_AXES:
        return 1
    raise ModelError(f"unknown joint type {joint!r}")


def _joint_pose_dim(joint):
    return 1 if joint in REVOLUTE_AXES else 6


class ArticulatedModel:
    """Immutable kinematic tree with inertial, gain, marker, and contact data."""

    def __init__(self, name, segments, markers=(), contacts=(), heading=None,
                 gravity=GRAVITY, shape_scales=None):
        self.name = name
        self.segments = list(segments)
        self.markers = list(markers)
        self.contacts = list(contacts)
        self.heading = heading or HeadingSpec()
        self.gravity = np.asarray(gravity, dtype=float)
        n = len(self.segments)
        if shape_scales is None:
            shape_scales = np.ones(n)
        self.shape_scales = np.asarray(shape_scales, dtype=float)
        self._validate()
        self._build_tables()

    # -- construction ------------------------------------------------------

    def _validate(self):
        n = len(self.segments)
        if n == 0:
            raise ModelError("model has no segments")
        if self.segments[0].parent != -1:
            raise ModelError("segment 0 must be the root (parent -1)")
        for i, seg in enumerate(self.segments):
            if i > 0 and not (0 <= seg.parent < i):
                raise ModelError(
                    f"segment {i} parent {seg.parent} breaks topological order")
            if i > 0 and seg.joint == JOINT_FREE:
                raise ModelError("only the root joint may be free")
            _joint_dof(seg.joint)
            if seg.mass <= 0.0:
                raise ModelError(f"segment {seg.name!r} mass must be > 0")
            I = np.asarray(seg.inertia, dtype=float)
            if I.shape != (3, 3) or not np.allclose(I, I.T, atol=1e-12):
                raise ModelError(f"segment {seg.name!r} inertia must be symmetric 3x3")
            if np.linalg.eigvalsh(I)[0] <= 0.0:
                raise ModelError(f"segment {seg.name!r} inertia must be positive definite")
        if self.shape_scales.shape != (n,) or np.any(self.shape_scales <= 0.0):
            raise ModelError("shape_scales must be positive, one per segment")
        names = [m.name for m in self.markers]
        if len(set(names)) != len(names):
            raise ModelError("duplicate marker names")
        for m in self.markers:
            if not 0 <= m.segment < n:
                raise ModelError(f"marker {m.name!r} references invalid segment")
        for c in self.contacts:
            if not 0 <= c.segment < n:
                raise ModelError("contact sphere references invalid segment")
            if c.radius <= 0.0:
                raise ModelError("contact radius must be > 0")
        known = set(names)
        for group in (self.heading.front, self.heading.back,
                      self.heading.lateral, self.heading.origin):
            for nm in group:
                if nm not in known:
                    raise ModelError(f"heading marker {nm!r} not defined")

    def _build_tables(self):
        n = len(self.segments)
        self.n_segments = n
        self.parent = np.array([s.parent for s in self.segments], dtype=int)
        self.joint_types = [s.joint for s in self.segments]
        self.offsets = np.array([s.offset for s in self.segments], dtype=float)
        self.masses = np.array([s.mass for s in self.segments], dtype=float)
        self.coms = np.array([s.com for s in self.segments], dtype=float)
        self.inertias = np.array([s.inertia for s in self.segments], dtype=float)
        self.axes = np.array([
            REVOLUTE_AXES.get(s.joint, np.zeros(3)) for s in self.segments])

        self.dof_count = np.array([_joint_dof(j) for j in self.joint_types])
        self.dof_start = np.concatenate(([0], np.cumsum(self.dof_count)[:-1]))
        self.ndof = int(self.dof_count.sum())
        self.pose_dims = np.array([_joint_pose_dim(j) for j in self.joint_types])
        self.pose_start = 3 + np.concatenate(([0], np.cumsum(self.pose_dims)[:-1]))
        self.pose_dim = 3 + int(self.pose_dims.sum())

        # ancestry[s, j]: joint j lies on the path from the root to segment s
        anc = np.zeros((n, n), dtype=bool)
        for s in range(n):
            j = s
            while j >= 0:
                anc[s, j] = True
                j = self.parent[j]
        self.ancestry = anc
        # per-segment boolean mask over DoF indices
        mask = np.zeros((n, self.ndof), dtype=bool)
        for s in range(n):
            for j in range(n):
                if anc[s, j]:
                    mask[s, self.dof_start[j]:self.dof_start[j] + self.dof_count[j]] = True
        self.dof_mask = mask

        # actuation: the floating root is passive, everything else is driven
        act = np.ones(self.ndof, dtype=bool)
        if self.joint_types[0] == JOINT_FREE:
            act[:6] = False
        self.actuated = act
        kp = np.zeros(self.ndof)
        kd = np.zeros(self.ndof)
        for i, seg in enumerate(self.segments):
            sl = slice(self.dof_start[i], self.dof_start[i] + self.dof_count[i])
            kp[sl] = seg.kp
            kd[sl] = seg.kd
        kp[~act] = 0.0
        kd[~act] = 0.0
        self.kp = kp
        self.kd = kd

        self.total_mass = float(self.masses.sum())
        self.n_markers = len(self.markers)
        self.marker_segments = np.array([m.segment for m in self.markers], dtype=int)
        self.marker_offsets = np.array([m.offset for m in self.markers], dtype=float) \
            if self.markers else np.zeros((0, 3))
        self.marker_names = [m.name for m in self.markers]
        self.n_contacts = len(self.contacts)
        self.contact_segments = np.array([c.segment for c in self.contacts], dtype=int)
        self.contact_offsets = np.array([c.offset for c in self.contacts], dtype=float) \
            if self.contacts else np.zeros((0, 3))
        self.contact_radii = np.array([c.radius for c in self.contacts], dtype=float) \
            if self.contacts else np.zeros(0)

        # actuated joints, in segment order (root included when not free)
        self.actuated_joints = [i for i in range(n)
                                if not (i == 0 and self.joint_types[0] == JOINT_FREE)]
        self.n_actuated_joints = len(self.actuated_joints)

        for arr in (self.offsets, self.masses, self.coms, self.inertias,
                    self.axes, self.shape_scales, self.marker_offsets,
                    self.contact_offsets, self.contact_radii, self.gravity):
            arr.setflags(write=False)

    # -- derived quantities --------------------------------------------------

    def zero_pose(self, root_position=(0.0, 0.0, 0.0)):
        rots = []
        for j in self.joint_types:
            rots.append(0.0 if j in REVOLUTE_AXES else np.eye(3))
        return Pose(np.asarray(root_position, dtype=float), rots)

    def standing_height(self):
        """Vertical extent of markers and contact spheres at the zero pose."""
        from .dynamics import forward_kinematics
        pose = self.zero_pose()
        R, p = forward_kinematics(self, pose)
        zs = []
        for m in self.markers:
            zs.append((R[m.segment] @ m.offset + p[m.segment])[2])
        for c in self.contacts:
            zs.append((R[c.segment] @ c.offset + p[c.segment])[2])
        for i in range(self.n_segments):
            zs.append((R[i] @ self.coms[i] + p[i])[2])
        return float(max(zs) - min(zs)) if zs else 0.0

    def with_shape(self, beta):
        """Similarity-scaled copy: lengths x beta, masses x beta^3, inertias x beta^5.

        A child's joint offset lives in the parent's geometry, so it scales
        with the parent's factor.  Marker, COM, and contact offsets scale with
        their own segment.
        """
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.n_segments,):
            raise ModelError(f"beta must have shape ({self.n_segments},)")
        if np.any(beta <= 0.0):
            raise ModelError("beta entries must be positive")
        segs = []
        for i, s in enumerate(self.segments):
            b = beta[i]
            bp = beta[s.parent] if s.parent >= 0 else 1.0
            segs.append(Segment(
                name=s.name, parent=s.parent, joint=s.joint,
                offset=np.asarray(s.offset) * bp,
                mass=s.mass * b ** 3,
                com=np.asarray(s.com) * b,
                inertia=np.asarray(s.inertia) * b ** 5,
                kp=s.kp, kd=s.kd))
        markers = [Marker(m.name, m.segment, np.asarray(m.offset) * beta[m.segment])
                   for m in self.markers]
        contacts = [ContactSphere(c.segment, np.asarray(c.offset) * beta[c.segment],
                                  c.radius * beta[c.segment])
                    for c in self.contacts]
        return ArticulatedModel(self.name, segs, markers, contacts, self.heading,
                                self.gravity, self.shape_scales * beta)

    # -- serialization -------------------------------------------------------

    def to_dict(self):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "name": self.name,
            "gravity": list(self.gravity),
            "segments": [
                {
                    "name": s.name, "parent": s.parent, "joint": s.joint,
                    "offset": list(np.asarray(s.offset, dtype=float)),
                    "mass": s.mass,
                    "com": list(np.asarray(s.com, dtype=float)),
                    "inertia": np.asarray(s.inertia, dtype=float).tolist(),
                    "kp": s.kp, "kd": s.kd,
                } for s in self.segments
            ],
            "markers": [
                {"name": m.name, "segment": m.segment,
                 "offset": list(np.asarray(m.offset, dtype=float))}
                for m in self.markers
            ],
            "contacts": [
                {"segment": c.segment,
                 "offset": list(np.asarray(c.offset, dtype=float)),
                 "radius": c.radius}
                for c in self.contacts
            ],
            "heading": {
                "front": list(self.heading.front),
                "back": list(self.heading.back),
                "lateral": list(self.heading.lateral),
                "origin": list(self.heading.origin),
            },
        }

    @classmethod
    def from_dict(cls, d):
        allowed = {"format_version", "name", "gravity", "segments", "markers",
                   "contacts", "heading"}
        unknown = set(d) - allowed
        if unknown:
            raise ModelError(f"unknown model file keys: {sorted(unknown)}")
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ModelError(
                f"unsupported model format_version {d.get('format_version')!r}")
        seg_keys = {"name", "parent", "joint", "offset", "mass", "com", "inertia",
                    "kp", "kd"}
        segs = []
        for sd in d["segments"]:
            if set(sd) - seg_keys:
                raise ModelError(f"unknown segment keys: {sorted(set(sd) - seg_keys)}")
            inertia = np.asarray(sd["inertia"], dtype=float)
            if inertia.shape == (3,):
                inertia = np.diag(inertia)
            segs.append(Segment(
                name=sd["name"], parent=int(sd["parent"]), joint=sd["joint"],
                offset=np.asarray(sd["offset"], dtype=float),
                mass=float(sd["mass"]),
                com=np.asarray(sd["com"], dtype=float),
                inertia=inertia,
                kp=float(sd.get("kp", 0.0)), kd=float(sd.get("kd", 0.0))))
        markers = [Marker(m["name"], int(m["segment"]),
                          np.asarray(m["offset"], dtype=float))
                   for m in d.get("markers", [])]
        contacts = [ContactSphere(int(c["segment"]),
                                  np.asarray(c["offset"], dtype=float),
                                  float(c["radius"]))
                    for c in d.get("contacts", [])]
        h = d.get("heading", {})
        heading = HeadingSpec(front=list(h.get("front", [])),
                              back=list(h.get("back", [])),
                              lateral=list(h.get("lateral", [])),
                              origin=list(h.get("origin", [])))
        gravity = np.asarray(d.get("gravity", GRAVITY), dtype=float)
        return cls(d["name"], segs, markers, contacts, heading, gravity)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")

    def content_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


BUILTIN_MODELS = ("pendulum1", "pendulum2", "humanoid-lite")


def load_model(name_or_path):
    """Load a model file; bare builtin names resolve to shipped resources."""
    if name_or_path in BUILTIN_MODELS:
        fname = name_or_path.replace("-", "_") + ".json"
        text = resources.files("invdyn.models").joinpath(fname).read_text()
        return ArticulatedModel.from_dict(json.loads(text))
    try:
        with open(name_or_path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ModelError(f"model file not found: {name_or_path!r}")
    except json.JSONDecodeError as e:
        raise ModelError(f"model file is not valid JSON: {e}")
    return ArticulatedModel.from_dict(data)


class Pose:
    """Root position plus per-joint rotations (3x3 matrices or scalar angles)."""

    __slots__ = ("root_position", "rotations")

    def __init__(self, root_position, rotations):
        self.root_position = np.asarray(root_position, dtype=float)
        self.rotations = rotations

    def copy(self):
        return Pose(self.root_position.copy(),
                    [r if np.isscalar(r) else r.copy() for r in self.rotations])

    def to_vector(self, model):
        """Serialize to the model's pose layout (6d for rotations)."""
        out = np.empty(model.pose_dim)
        out[:3] = self.root_position
        for i, joint in enumerate(model.joint_types):
            s = model.pose_start[i]
            if joint in REVOLUTE_AXES:
                out[s] = self.rotations[i]
            else:
                out[s:s + 6] = encode_6d(self.rotations[i])
        return out

    @classmethod
    def from_vector(cls, model, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (model.pose_dim,):
            raise ModelError(
                f"pose vector has dim {vec.shape}, expected ({model.pose_dim},)")
        rots = []
        for i, joint in enumerate(model.joint_types):
            s = model.pose_start[i]
            if joint in REVOLUTE_AXES:
                rots.append(float(vec[s]))
            else:
                rots.append(decode_6d(vec[s:s + 6]))
        return cls(vec[:3].copy(), rots)


def check_velocity(model, vel):
    vel = np.asarray(vel, dtype=float)
    if vel.shape != (model.ndof,):
        raise ModelError(f"velocity has shape {vel.shape}, expected ({model.ndof},)")
    return vel


def integrate_pose(model, pose, vel, dt):
    """Advance the pose by dt at generalized velocity vel (manifold update)."""
    vel = check_velocity(model, vel)
    root_pos = pose.root_position.copy()
    rots = []
    for i, joint in enumerate(model.joint_types):
        s = model.dof_start[i]
        if joint == JOINT_FREE:
            root_pos = root_pos + dt * vel[0:3]
            rots.append(pose.rotations[i] @ exp_so3(vel[3:6] * dt))
        elif joint == JOINT_SPHERICAL:
            rots.append(pose.rotations[i] @ exp_so3(vel[s:s + 3] * dt))
        else:
            rots.append(pose.rotations[i] + dt * vel[s])
    return Pose(root_pos, rots)


def pose_difference(model, pose_a, pose_b, dt=1.0):
    """Generalized velocity taking pose_a to pose_b over dt (log-map per joint)."""
    out = np.zeros(model.ndof)
    for i, joint in enumerate(model.joint_types):
        s = model.dof_start[i]
        if joint == JOINT_FREE:
            out[0:3] = (pose_b.root_position - pose_a.root_position) / dt
            out[3:6] = log_so3(pose_a.rotations[i].T @ pose_b.rotations[i]) / dt
        elif joint == JOINT_SPHERICAL:
            out[s:s + 3] = log_so3(pose_a.rotations[i].T @ pose_b.rotations[i]) / dt
        else:
            out[s] = (pose_b.rotations[i] - pose_a.rotations[i]) / dt
    return out


def interpolate_pose(model, pose_a, pose_b, s):
    """Geodesic interpolation between two poses, s in [0, 1]."""
    root = (1.0 - s) * pose_a.root_position + s * pose_b.root_position
    rots = []
    for i, joint in enumerate(model.joint_types):
        if joint in REVOLUTE_AXES:
            rots.append((1.0 - s) * pose_a.rotations[i] + s * pose_b.rotations[i])
        else:
            rots.append(slerp(pose_a.rotations[i], pose_b.rotations[i], s))
    return Pose(root, rots)
