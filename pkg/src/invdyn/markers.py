"""Marker-coordinate motion representation: placement, heading
canonicalization, windowing, and the external marker-CSV adapter.

The solver consumes windows of canonicalized marker positions and
finite-differenced velocities; canonicalization removes the ground-plane
pose of the pivot frame (root xy to the origin, heading to +x) so the
representation is invariant under SE(2) transforms of the input motion.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .dynamics import forward_kinematics
from .model import Pose


class MarkerError(ValueError):
    pass


def place_markers(model, pose, fk=None):
    """World positions of the model's markers, (M, 3)."""
    if model.n_markers == 0:
        raise MarkerError("model defines no markers")
    R, p = fk if fk is not None else forward_kinematics(model, pose)
    segs = model.marker_segments
    return np.einsum("nij,nj->ni", R[segs], model.marker_offsets) + p[segs]


def marker_trajectory(model, poses_or_seq, fps=None):
    """Marker positions and finite-differenced velocities over a sequence.

    Velocities are central differences; the sequence boundaries use one-sided
    differences.  Returns (positions (T,M,3), velocities (T,M,3)).
    """
    if hasattr(poses_or_seq, "poses") and isinstance(poses_or_seq.poses, np.ndarray):
        seq = poses_or_seq
        fps = seq.fps
        scaled = model.with_shape(seq.beta) if not np.allclose(seq.beta, 1.0) else model
        poses = [Pose.from_vector(scaled, seq.poses[k]) for k in range(len(seq))]
        model = scaled
    else:
        poses = poses_or_seq
        if fps is None:
            raise MarkerError("fps required for a raw pose list")
    T = len(poses)
    pos = np.empty((T, model.n_markers, 3))
    for k in range(T):
        pos[k] = place_markers(model, poses[k])
    return pos, finite_difference_velocities(pos, fps)


def finite_difference_velocities(pos, fps):
    T = pos.shape[0]
    vel = np.empty_like(pos)
    if T == 1:
        vel[:] = 0.0
        return vel
    vel[1:-1] = (pos[2:] - pos[:-2]) * (fps / 2.0)
    vel[0] = (pos[1] - pos[0]) * fps
    vel[-1] = (pos[-1] - pos[-2]) * fps
    return vel


def _indices(model, names):
    lookup = {n: i for i, n in enumerate(model.marker_names)}
    return np.array([lookup[n] for n in names], dtype=int)


@dataclass
class MarkerSetInfo:
    """Marker-index bookkeeping for heading and origin computation."""
    n_markers: int
    front: np.ndarray
    back: np.ndarray
    lateral: np.ndarray
    origin: np.ndarray

    @classmethod
    def from_model(cls, model):
        h = model.heading
        return cls(
            n_markers=model.n_markers,
            front=_indices(model, h.front),
            back=_indices(model, h.back),
            lateral=_indices(model, h.lateral),
            origin=_indices(model, h.origin),
        )


def heading_direction(info, positions, fallback=None):
    """Unit ground-plane heading of one marker frame.

    Primary: front-markers minus back-markers, projected to the ground plane.
    Fallback for a near-vertical axis: left-to-right lateral pair crossed
    with vertical.  Final fallback: the provided previous heading, else +x.
    """
    candidates = []
    if info.front.size and info.back.size:
        d = positions[info.front].mean(axis=0) - positions[info.back].mean(axis=0)
        candidates.append(d[:2])
    if info.lateral.size == 2:
        lat = positions[info.lateral[0]] - positions[info.lateral[1]]
        candidates.append(np.array([lat[1], -lat[0]]))  # (left-right) x z-hat
    for c in candidates:
        n = np.hypot(c[0], c[1])
        if n > 1e-6:
            return c / n
    if fallback is not None:
        return fallback
    return np.array([1.0, 0.0])


@dataclass
class MarkerWindow:
    """Canonicalized marker window around one motion transition.

    positions/velocities have shape (2w+2, M, 3) covering frames
    t-w .. t+w+1; the pivot t defines the canonical frame.
    """
    positions: np.ndarray
    velocities: np.ndarray
    pivot: int                 # sequence index of frame t
    rotation: np.ndarray       # canonical-to-world ground-plane rotation (3,3)
    origin: np.ndarray         # world xy of the canonical origin
    padded: bool = False

    @property
    def w(self):
        return (self.positions.shape[0] - 2) // 2

    def flattened(self):
        """(M, 12w+12) view: per marker, frame-major (position, velocity)."""
        F, M, _ = self.positions.shape
        out = np.concatenate((self.positions, self.velocities), axis=2)
        return np.transpose(out, (1, 0, 2)).reshape(M, F * 6)


def canonicalize(positions, velocities, pivot_in_window, info, prev_heading=None):
    """Canonicalize a window of raw marker frames about its pivot frame.

    The pivot's origin markers define the ground-plane origin and its heading
    rotates to +x; velocities co-rotate.  An SE(2) transform of the inputs
    leaves the output unchanged.
    """
    positions = np.asarray(positions, dtype=float)
    velocities = np.asarray(velocities, dtype=float)
    piv = positions[pivot_in_window]
    head = heading_direction(info, piv, fallback=prev_heading)
    if info.origin.size:
        oxy = piv[info.origin, :2].mean(axis=0)
    else:
        oxy = piv[:, :2].mean(axis=0)
    c, s = head
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    offset = np.array([oxy[0], oxy[1], 0.0])
    pos_c = (positions - offset) @ R          # row-vectors times R == R^T x
    vel_c = velocities @ R
    return pos_c, vel_c, R, oxy


@dataclass
class WindowTargets:
    """Per-transition regression targets in the canonical frame."""
    tau_am: np.ndarray        # (A, 3) joint-local angular momentum
    tau_jt: np.ndarray        # (ndof,) mean applied torque
    grf: np.ndarray           # (2, n_segments, 3) frames t and t+1, canonical
    next_angles: np.ndarray   # actuated joint rotations of frame t+1 (6d/scalar)


def actuated_angles(model, pose_vector):
    """Actuated joint rotations from a pose vector in 6d/scalar layout."""
    parts = []
    for j in model.actuated_joints:
        s = model.pose_start[j]
        d = model.pose_dims[j]
        parts.append(pose_vector[s:s + d])
    return np.concatenate(parts) if parts else np.zeros(0)


def window_stream(model, seq, w, info=None):
    """Windows and targets for every transition of a recorded sequence.

    Yields (MarkerWindow, WindowTargets) for t = 0 .. T-2; boundary windows
    replicate edge frames and are flagged as padded.  The pivot-aligned
    targets pair window t with the torque integral of transition t -> t+1.
    """
    T = len(seq)
    if T < 2:
        raise MarkerError("sequence too short for windowing")
    scaled = model.with_shape(seq.beta) if not np.allclose(seq.beta, 1.0) else model
    if info is None:
        info = MarkerSetInfo.from_model(scaled)
    pos, vel = marker_trajectory(model, seq)
    prev_heading = None
    F = 2 * w + 2
    for t in range(T - 1):
        idx = np.clip(np.arange(t - w, t + w + 2), 0, T - 1)
        padded = bool(idx[0] != t - w or idx[-1] != t + w + 1)
        pos_c, vel_c, R, oxy = canonicalize(pos[idx], vel[idx], w, info,
                                            prev_heading=prev_heading)
        prev_heading = np.array([R[0, 0], R[1, 0]])
        window = MarkerWindow(positions=pos_c, velocities=vel_c, pivot=t,
                              rotation=R, origin=oxy, padded=padded)
        grf = np.stack((seq.grf_force[t] @ R, seq.grf_force[t + 1] @ R))
        targets = WindowTargets(
            tau_am=seq.tau_am[t],
            tau_jt=seq.tau_jt[t],
            grf=grf,
            next_angles=actuated_angles(scaled, seq.poses[t + 1]))
        yield window, targets


def read_marker_csv(path, marker_names, name_map=None):
    """Read an external marker CSV (frame, marker, x, y, z) into (T, M, 3).

    `name_map` translates external marker names onto the model's names;
    unmapped markers are ignored.  Frames must cover every model marker.
    """
    name_map = name_map or {}
    lookup = {n: i for i, n in enumerate(marker_names)}
    rows = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if [h.strip().lower() for h in header[:5]] != ["frame", "marker", "x", "y", "z"]:
            raise MarkerError(
                f"expected header frame,marker,x,y,z in {path!r}, got {header}")
        for rec in reader:
            if not rec:
                continue
            frame = int(rec[0])
            name = name_map.get(rec[1], rec[1])
            if name not in lookup:
                continue
            rows.setdefault(frame, {})[name] = (
                float(rec[2]), float(rec[3]), float(rec[4]))
    if not rows:
        raise MarkerError(f"no usable marker rows in {path!r}")
    frames = sorted(rows)
    M = len(marker_names)
    out = np.empty((len(frames), M, 3))
    for i, fr in enumerate(frames):
        frame_rows = rows[fr]
        missing = [n for n in marker_names if n not in frame_rows]
        if missing:
            raise MarkerError(f"frame {fr} is missing markers {missing[:4]}")
        for name, j in lookup.items():
            out[i, j] = frame_rows[name]
    return out


def write_marker_csv(path, marker_names, positions):
    positions = np.asarray(positions)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "marker", "x", "y", "z"])
        for t in range(positions.shape[0]):
            for j, name in enumerate(marker_names):
                writer.writerow([t, name,
                                 repr(positions[t, j, 0]),
                                 repr(positions[t, j, 1]),
                                 repr(positions[t, j, 2])])


def windows_from_positions(positions, fps, w, info, fallback_heading=None):
    """Windows from raw marker positions only (external data path).

    Velocities are finite-differenced; there are no dynamics targets.
    """
    pos = np.asarray(positions, dtype=float)
    vel = finite_difference_velocities(pos, fps)
    T = pos.shape[0]
    if T < 2:
        raise MarkerError("need at least 2 frames")
    prev_heading = fallback_heading
    out = []
    for t in range(T - 1):
        idx = np.clip(np.arange(t - w, t + w + 2), 0, T - 1)
        padded = bool(idx[0] != t - w or idx[-1] != t + w + 1)
        pos_c, vel_c, R, oxy = canonicalize(pos[idx], vel[idx], w, info,
                                            prev_heading=prev_heading)
        prev_heading = np.array([R[0, 0], R[1, 0]])
        out.append(MarkerWindow(positions=pos_c, velocities=vel_c, pivot=t,
                                rotation=R, origin=oxy, padded=padded))
    return out
