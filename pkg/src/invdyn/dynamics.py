"""Exact multibody dynamics for open kinematic trees.

Inverse dynamics uses a world-frame recursive Newton-Euler pass (O(n));
the joint-space inertia matrix comes from a composite-rigid-body pass over
spatial inertias expressed about the world origin, which doubles as an
independent cross-check of the recursive path (M qdd + bias - J^T lambda).

External forces are (segment, world application point, world force) triples.
Spatial vectors are ordered (angular, linear) and referred to the world
origin, so no frame transforms appear in the composite pass.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import JOINT_FREE, JOINT_SPHERICAL, check_velocity
from .rotations import cross


class DynamicsError(RuntimeError):
    """Numerical failure in a dynamics computation (e.g. non-SPD inertia)."""


def forward_kinematics(model, pose):
    """World rotation and frame-origin position per segment.

    The segment frame origin sits at the joint connecting it to its parent,
    so the returned positions are also the world joint positions.
    """
    n = model.n_segments
    if len(pose.rotations) != n:
        raise DynamicsError(f"pose has {len(pose.rotations)} joints, model has {n}")
    R = np.empty((n, 3, 3))
    p = np.empty((n, 3))
    for i in range(n):
        rot = pose.rotations[i]
        if np.isscalar(rot):
            from .rotations import exp_so3
            rot = exp_so3(model.axes[i] * rot)
        if i == 0:
            R[0] = rot
            p[0] = pose.root_position
        else:
            par = model.parent[i]
            R[i] = R[par] @ rot
            p[i] = p[par] + R[par] @ model.offsets[i]
    return R, p


def _joint_rates(model, vel, i):
    """World-frame relative angular velocity contributed by joint i (no root lin)."""
    s = model.dof_start[i]
    joint = model.joint_types[i]
    if joint == JOINT_FREE:
        return vel[3:6]
    if joint == JOINT_SPHERICAL:
        return vel[s:s + 3]
    return model.axes[i] * vel[s]


def _kinematics_pass(model, pose, vel, accel=None):
    """Velocities (and optionally accelerations) of every segment frame."""
    n = model.n_segments
    R, p = forward_kinematics(model, pose)
    w = np.empty((n, 3))    # world angular velocity
    v = np.empty((n, 3))    # world linear velocity of the frame origin
    want_acc = accel is not None
    dw = np.empty((n, 3)) if want_acc else None
    dv = np.empty((n, 3)) if want_acc else None
    free_root = model.joint_types[0] == JOINT_FREE

    for i in range(n):
        u_loc = _joint_rates(model, vel, i)
        u_world = R[i] @ u_loc
        if i == 0:
            if free_root:
                v[0] = vel[0:3]
                w[0] = u_world
            else:
                v[0] = 0.0
                w[0] = u_world
            if want_acc:
                du_loc = _joint_rates(model, accel, i)
                dv[0] = accel[0:3] if free_root else 0.0
                # d/dt(R u) = w x (R u) + R du; for the root w == R u
                dw[0] = R[0] @ du_loc + cross(w[0], u_world)
        else:
            par = model.parent[i]
            d = p[i] - p[par]
            w[i] = w[par] + u_world
            v[i] = v[par] + cross(w[par], d)
            if want_acc:
                du_loc = _joint_rates(model, accel, i)
                dv[i] = dv[par] + cross(dw[par], d) + cross(w[par], v[i] - v[par])
                dw[i] = dw[par] + R[i] @ du_loc + cross(w[i], u_world)
    if want_acc:
        return R, p, w, v, dw, dv
    return R, p, w, v


def world_dof_axes(model, R, p):
    """Spatial axis (angular, linear-at-origin) of every DoF, shape (ndof, 6).

    A rotational DoF with world axis a through point q has twist (a, q x a);
    a root translational DoF along e has twist (0, e).
    """
    phi = np.zeros((model.ndof, 6))
    for i in range(model.n_segments):
        s = model.dof_start[i]
        joint = model.joint_types[i]
        if joint == JOINT_FREE:
            phi[0, 3] = phi[1, 4] = phi[2, 5] = 1.0
            for k in range(3):
                a = R[0][:, k]
                phi[3 + k, :3] = a
                phi[3 + k, 3:] = cross(p[0], a)
        elif joint == JOINT_SPHERICAL:
            for k in range(3):
                a = R[i][:, k]
                phi[s + k, :3] = a
                phi[s + k, 3:] = cross(p[i], a)
        else:
            a = R[i] @ model.axes[i]
            phi[s, :3] = a
            phi[s, 3:] = cross(p[i], a)
    return phi


def _external_generalized(model, R, p, external_forces):
    """Q = J^T lambda for (segment, world point, world force) triples."""
    if not external_forces:
        return np.zeros(model.ndof)
    phi = world_dof_axes(model, R, p)
    Q = np.zeros(model.ndof)
    for seg, point, force in external_forces:
        seg = int(seg)
        if not 0 <= seg < model.n_segments:
            raise DynamicsError(f"external force references invalid segment {seg}")
        point = np.asarray(point, dtype=float)
        force = np.asarray(force, dtype=float)
        wrench = np.concatenate((cross(point, force), force))
        Q += model.dof_mask[seg] * (phi @ wrench)
    return Q


def _rnea(model, pose, vel, accel, gravity=True):
    """Generalized force M qdd + C + G via Newton-Euler (no external forces)."""
    n = model.n_segments
    R, p, w, v, dw, dv = _kinematics_pass(model, pose, vel, accel)
    g = model.gravity if gravity else np.zeros(3)

    f = np.empty((n, 3))
    nq = np.empty((n, 3))   # moment about the segment frame origin
    for i in range(n):
        cw = R[i] @ model.coms[i]
        a_c = dv[i] + cross(dw[i], cw) + cross(w[i], cross(w[i], cw))
        Iw = R[i] @ model.inertias[i] @ R[i].T
        F = model.masses[i] * (a_c - g)
        N = Iw @ dw[i] + cross(w[i], Iw @ w[i])
        f[i] = F
        nq[i] = N + cross(cw, F)

    tau = np.zeros(model.ndof)
    for i in range(n - 1, -1, -1):
        s = model.dof_start[i]
        joint = model.joint_types[i]
        if joint == JOINT_FREE:
            tau[0:3] = f[0]
            tau[3:6] = R[0].T @ nq[0]
        elif joint == JOINT_SPHERICAL:
            tau[s:s + 3] = R[i].T @ nq[i]
        else:
            tau[s] = (R[i] @ model.axes[i]) @ nq[i]
        par = model.parent[i]
        if par >= 0:
            f[par] += f[i]
            nq[par] += nq[i] + cross(p[i] - p[par], f[i])
    return tau


def inverse_dynamics(model, pose, vel, accel, external_forces=None):
    """Joint torques tau = M qdd + C + G - J^T lambda (recursive Newton-Euler)."""
    vel = check_velocity(model, vel)
    accel = check_velocity(model, accel)
    tau = _rnea(model, pose, vel, accel)
    if external_forces:
        R, p = forward_kinematics(model, pose)
        tau -= _external_generalized(model, R, p, external_forces)
    return tau


def bias_forces(model, pose, vel):
    """Coriolis/centrifugal plus gravity generalized forces at zero acceleration."""
    vel = check_velocity(model, vel)
    return _rnea(model, pose, vel, np.zeros(model.ndof))


def _spatial_inertia_origin(mass, com_world, inertia_world):
    """6x6 spatial inertia about the world origin, (angular, linear) ordering."""
    C = np.array([
        [0.0, -com_world[2], com_world[1]],
        [com_world[2], 0.0, -com_world[0]],
        [-com_world[1], com_world[0], 0.0],
    ])
    I = np.empty((6, 6))
    I[:3, :3] = inertia_world + mass * (C @ C.T)
    I[:3, 3:] = mass * C
    I[3:, :3] = mass * C.T
    I[3:, 3:] = mass * np.eye(3)
    return I


def mass_matrix(model, pose, fk=None):
    """Joint-space inertia matrix via the composite-rigid-body pass."""
    n = model.n_segments
    R, p = fk if fk is not None else forward_kinematics(model, pose)
    Ic = np.empty((n, 6, 6))
    for i in range(n):
        cw = R[i] @ model.coms[i] + p[i]
        Iw = R[i] @ model.inertias[i] @ R[i].T
        Ic[i] = _spatial_inertia_origin(model.masses[i], cw, Iw)
    for i in range(n - 1, 0, -1):
        Ic[model.parent[i]] += Ic[i]

    phi = world_dof_axes(model, R, p)
    M = np.zeros((model.ndof, model.ndof))
    for i in range(n):
        si = slice(model.dof_start[i], model.dof_start[i] + model.dof_count[i])
        F = Ic[i] @ phi[si].T            # (6, dof_i)
        j = i
        while j >= 0:
            sj = slice(model.dof_start[j], model.dof_start[j] + model.dof_count[j])
            block = phi[sj] @ F          # (dof_j, dof_i)
            M[sj, si] = block
            if j != i:
                M[si, sj] = block.T
            j = model.parent[j]
    return M


def inverse_dynamics_matrix(model, pose, vel, accel, external_forces=None):
    """Cross-check path: assemble tau from M, bias, and J^T lambda explicitly."""
    vel = check_velocity(model, vel)
    accel = check_velocity(model, accel)
    M = mass_matrix(model, pose)
    tau = M @ accel + bias_forces(model, pose, vel)
    if external_forces:
        R, p = forward_kinematics(model, pose)
        tau -= _external_generalized(model, R, p, external_forces)
    return tau


def forward_dynamics(model, pose, vel, tau, external_forces=None, *,
                     mass=None, bias=None, fk=None):
    """Accelerations from torques and external forces: solve M a = rhs (SPD)."""
    vel = check_velocity(model, vel)
    tau = np.asarray(tau, dtype=float)
    R, p = fk if fk is not None else forward_kinematics(model, pose)
    M = mass if mass is not None else mass_matrix(model, pose, fk=(R, p))
    b = bias if bias is not None else bias_forces(model, pose, vel)
    rhs = tau - b
    if external_forces:
        rhs = rhs + _external_generalized(model, R, p, external_forces)
    try:
        c = cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise DynamicsError(f"mass matrix is not positive definite: {e}")
    return cho_solve(c, rhs, check_finite=False)


def contact_jacobian(model, pose, segment, local_point, fk=None):
    """3 x ndof Jacobian mapping generalized velocity to the world velocity of
    a point attached to a segment (given in the segment frame)."""
    segment = int(segment)
    if not 0 <= segment < model.n_segments:
        raise DynamicsError(f"invalid segment index {segment}")
    R, p = fk if fk is not None else forward_kinematics(model, pose)
    x = R[segment] @ np.asarray(local_point, dtype=float) + p[segment]
    phi = world_dof_axes(model, R, p)
    # v(x) = v_origin + w x x  per DoF twist
    J = phi[:, 3:] + np.cross(phi[:, :3], x[None, :])
    J[~model.dof_mask[segment]] = 0.0
    return J.T.copy()


def point_world(model, pose, segment, local_point, fk=None):
    R, p = fk if fk is not None else forward_kinematics(model, pose)
    return R[segment] @ np.asarray(local_point, dtype=float) + p[segment]


def kinetic_energy(model, pose, vel):
    """Direct sum over segments (independent of the mass-matrix path)."""
    vel = check_velocity(model, vel)
    R, p, w, v = _kinematics_pass(model, pose, vel)
    e = 0.0
    for i in range(model.n_segments):
        cw = R[i] @ model.coms[i]
        vc = v[i] + cross(w[i], cw)
        Iw = R[i] @ model.inertias[i] @ R[i].T
        e += 0.5 * model.masses[i] * (vc @ vc) + 0.5 * (w[i] @ (Iw @ w[i]))
    return e


def potential_energy(model, pose):
    R, p = forward_kinematics(model, pose)
    g = model.gravity
    e = 0.0
    for i in range(model.n_segments):
        c = R[i] @ model.coms[i] + p[i]
        e -= model.masses[i] * (g @ c)
    return e


def center_of_mass(model, pose, fk=None):
    R, p = fk if fk is not None else forward_kinematics(model, pose)
    acc = np.zeros(3)
    for i in range(model.n_segments):
        acc += model.masses[i] * (R[i] @ model.coms[i] + p[i])
    return acc / model.total_mass


def linear_momentum(model, pose, vel):
    R, p, w, v = _kinematics_pass(model, pose, vel)
    mom = np.zeros(3)
    for i in range(model.n_segments):
        cw = R[i] @ model.coms[i]
        mom += model.masses[i] * (v[i] + cross(w[i], cw))
    return mom
