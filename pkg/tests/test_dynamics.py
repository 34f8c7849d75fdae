import numpy as np
import pytest

from invdyn.dynamics import (DynamicsError, bias_forces, contact_jacobian,
                             forward_dynamics, forward_kinematics,
                             inverse_dynamics, inverse_dynamics_matrix,
                             kinetic_energy, mass_matrix, point_world)
from invdyn.model import (ArticulatedModel, Pose, Segment, integrate_pose,
                          load_model)
from invdyn.rotations import rotation_y

from conftest import random_pose, random_state

G = 9.81

# pendulum1 / pendulum2 parameters (see the shipped model files)
M1, L1, C1 = 1.2, 0.8, 0.4
I1 = M1 * L1 ** 2 / 12.0
M2, L2, C2 = 0.9, 0.6, 0.3
I2 = M2 * L2 ** 2 / 12.0


def two_link_oracle(q, qd, qdd):
    """Closed-form torques/inertia of a planar two-link pendulum (relative
    angles, measured from straight down) derived from the Lagrangian."""
    t1, t2 = q
    d1, d2 = qd
    a1, a2 = qdd
    m11 = M1 * C1 ** 2 + I1 + M2 * (L1 ** 2 + C2 ** 2 + 2 * L1 * C2 * np.cos(t2)) + I2
    m12 = M2 * (C2 ** 2 + L1 * C2 * np.cos(t2)) + I2
    m22 = M2 * C2 ** 2 + I2
    h = M2 * L1 * C2 * np.sin(t2)
    c1 = -h * (2 * d1 * d2 + d2 ** 2)
    c2 = h * d1 ** 2
    g1 = (M1 * C1 + M2 * L1) * G * np.sin(t1) + M2 * C2 * G * np.sin(t1 + t2)
    g2 = M2 * C2 * G * np.sin(t1 + t2)
    tau = np.array([m11 * a1 + m12 * a2 + c1 + g1,
                    m12 * a1 + m22 * a2 + c2 + g2])
    M = np.array([[m11, m12], [m12, m22]])
    return tau, M


def point_mass_model(mass=2.5, inertia=1e-3):
    seg = Segment("ball", -1, "free", np.zeros(3), mass, np.zeros(3),
                  np.eye(3) * inertia)
    return ArticulatedModel("ball", [seg])


def vertical_chain_model():
    """Three segments stacked along +z with COMs on the joint axis."""
    segs = [
        Segment("base", -1, "free", np.zeros(3), 4.0,
                np.array([0.0, 0.0, 0.2]), np.eye(3) * 0.05),
        Segment("mid", 0, "spherical", np.array([0.0, 0.0, 0.4]), 3.0,
                np.array([0.0, 0.0, 0.2]), np.eye(3) * 0.04),
        Segment("top", 1, "spherical", np.array([0.0, 0.0, 0.4]), 2.0,
                np.array([0.0, 0.0, 0.15]), np.eye(3) * 0.03),
    ]
    return ArticulatedModel("chain3", segs)


# -- forward kinematics ------------------------------------------------------

def test_fk_pendulum_zero(pendulum1):
    pose = pendulum1.zero_pose(root_position=(0.0, 0.0, 1.5))
    tip = point_world(pendulum1, pose, 0, np.array([0.0, 0.0, -L1]))
    assert np.allclose(tip, [0.0, 0.0, 1.5 - L1])


def test_fk_humanoid_zero_pose_offsets(humanoid):
    pose = humanoid.zero_pose(root_position=(0.0, 0.0, 0.97))
    _, p = forward_kinematics(humanoid, pose)
    # with identity rotations, joint positions are cumulative local offsets
    expect = np.zeros((humanoid.n_segments, 3))
    expect[0] = (0.0, 0.0, 0.97)
    for i in range(1, humanoid.n_segments):
        expect[i] = expect[humanoid.parent[i]] + humanoid.offsets[i]
    assert np.allclose(p, expect)


def test_fk_double_pendulum_right_angle(pendulum2):
    # first joint at 90 deg, second at 0: both links point along -x
    pose = Pose(np.zeros(3), [np.pi / 2, 0.0])
    R, p = forward_kinematics(pendulum2, pose)
    assert np.allclose(p[1], rotation_y(np.pi / 2) @ [0, 0, -L1], atol=1e-12)
    tip = point_world(pendulum2, pose, 1, np.array([0.0, 0.0, -L2]))
    assert np.allclose(tip, [-(L1 + L2), 0.0, 0.0], atol=1e-12)


def test_fk_dimension_mismatch(pendulum2):
    bad = Pose(np.zeros(3), [0.0])
    with pytest.raises(DynamicsError):
        forward_kinematics(pendulum2, bad)


# -- mass matrix -------------------------------------------------------------

def test_mass_matrix_point_mass():
    model = point_mass_model()
    M = mass_matrix(model, model.zero_pose())
    assert np.allclose(M[:3, :3], 2.5 * np.eye(3))
    assert np.allclose(M[:3, 3:], 0.0)
    assert np.allclose(M[3:, 3:], 1e-3 * np.eye(3))


def test_mass_matrix_single_pendulum(pendulum1):
    rng = np.random.default_rng(0)
    for _ in range(5):
        pose = Pose(np.zeros(3), [float(rng.uniform(-np.pi, np.pi))])
        M = mass_matrix(pendulum1, pose)
        assert abs(M[0, 0] - (M1 * C1 ** 2 + I1)) < 1e-12


def test_mass_matrix_double_pendulum_oracle(pendulum2):
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.uniform(-np.pi, np.pi, 2)
        pose = Pose(np.zeros(3), list(q))
        M = mass_matrix(pendulum2, pose)
        _, M_ref = two_link_oracle(q, np.zeros(2), np.zeros(2))
        assert np.max(np.abs(M - M_ref)) < 1e-12


def test_mass_matrix_spd_random_poses(pendulum1, pendulum2, humanoid):
    rng = np.random.default_rng(2)
    for model in (pendulum1, pendulum2, humanoid):
        for _ in range(10):
            pose = random_pose(model, rng)
            M = mass_matrix(model, pose)
            assert np.allclose(M, M.T, atol=1e-10)
            assert np.linalg.eigvalsh(M)[0] > 0.0
            if model.joint_types[0] == "free":
                assert np.allclose(M[:3, :3], model.total_mass * np.eye(3),
                                   atol=1e-10)


def test_mass_matrix_matches_kinetic_energy(humanoid):
    rng = np.random.default_rng(3)
    for _ in range(5):
        pose, vel = random_state(humanoid, rng)
        M = mass_matrix(humanoid, pose)
        assert abs(0.5 * vel @ M @ vel - kinetic_energy(humanoid, pose, vel)) < 1e-8


# -- bias forces -------------------------------------------------------------

def test_bias_hanging_rest(pendulum1):
    pose = Pose(np.zeros(3), [0.0])
    assert abs(bias_forces(pendulum1, pose, np.zeros(1))[0]) < 1e-12


def test_bias_gravity_moment(pendulum1):
    pose = Pose(np.zeros(3), [np.pi / 2])
    tau = bias_forces(pendulum1, pose, np.zeros(1))
    assert abs(tau[0] - M1 * G * C1) < 1e-10


def test_bias_energy_gradient_oracle(pendulum2):
    # Lagrangian identity on true coordinates:
    #   bias - G = Mdot qd - 1/2 d(qd^T M qd)/dq
    rng = np.random.default_rng(4)
    eps = 1e-6
    for _ in range(10):
        q = rng.uniform(-np.pi, np.pi, 2)
        qd = rng.standard_normal(2)
        pose = Pose(np.zeros(3), list(q))
        grav = bias_forces(pendulum2, pose, np.zeros(2))
        coriolis = bias_forces(pendulum2, pose, qd) - grav

        dke = np.zeros(2)
        for k in range(2):
            dq = np.zeros(2)
            dq[k] = eps
            ke_p = kinetic_energy(pendulum2, Pose(np.zeros(3), list(q + dq)), qd)
            ke_m = kinetic_energy(pendulum2, Pose(np.zeros(3), list(q - dq)), qd)
            dke[k] = (ke_p - ke_m) / (2 * eps)
        Mp = mass_matrix(pendulum2, Pose(np.zeros(3), list(q + eps * qd)))
        Mm = mass_matrix(pendulum2, Pose(np.zeros(3), list(q - eps * qd)))
        mdot_qd = (Mp - Mm) / (2 * eps) @ qd
        assert np.max(np.abs(coriolis - (mdot_qd - dke))) < 1e-6


def test_bias_power_identity(humanoid):
    # qd^T Mdot qd = 2 qd^T (bias - G) holds in any velocity chart
    rng = np.random.default_rng(5)
    eps = 1e-5
    for _ in range(5):
        pose, vel = random_state(humanoid, rng)
        grav = bias_forces(humanoid, pose, np.zeros(humanoid.ndof))
        coriolis = bias_forces(humanoid, pose, vel) - grav
        Mp = mass_matrix(humanoid, integrate_pose(humanoid, pose, vel, eps))
        Mm = mass_matrix(humanoid, integrate_pose(humanoid, pose, vel, -eps))
        lhs = vel @ ((Mp - Mm) / (2 * eps)) @ vel
        assert abs(lhs - 2.0 * (vel @ coriolis)) < 1e-8 * max(1.0, abs(lhs))


# -- inverse dynamics --------------------------------------------------------

def test_id_static_supported_chain():
    model = vertical_chain_model()
    pose = model.zero_pose()
    zeros = np.zeros(model.ndof)
    lam = [(0, np.zeros(3), np.array([0.0, 0.0, model.total_mass * G]))]
    tau = inverse_dynamics(model, pose, zeros, zeros, lam)
    assert np.max(np.abs(tau)) < 1e-10


def test_id_free_fall_consistency(humanoid):
    rng = np.random.default_rng(6)
    pose, vel = random_state(humanoid, rng)
    acc = forward_dynamics(humanoid, pose, vel, np.zeros(humanoid.ndof))
    tau = inverse_dynamics(humanoid, pose, vel, acc)
    assert np.max(np.abs(tau)) < 1e-8


def test_id_double_pendulum_sinusoid_oracle(pendulum2):
    # prescribed trajectory: q(t) = A sin(w t + phase)
    A = np.array([1.1, 0.7])
    w = np.array([2.0, 3.1])
    ph = np.array([0.3, -1.0])
    for t in np.linspace(0.0, 2.0, 101):
        q = A * np.sin(w * t + ph)
        qd = A * w * np.cos(w * t + ph)
        qdd = -A * w ** 2 * np.sin(w * t + ph)
        tau = inverse_dynamics(pendulum2, Pose(np.zeros(3), list(q)), qd, qdd)
        ref, _ = two_link_oracle(q, qd, qdd)
        assert np.max(np.abs(tau - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))


def test_id_linearity_superposition(humanoid):
    rng = np.random.default_rng(7)
    pose, vel = random_state(humanoid, rng)
    qdd1 = rng.standard_normal(humanoid.ndof)
    qdd2 = rng.standard_normal(humanoid.ndof)
    lam = [(3, rng.standard_normal(3), rng.standard_normal(3) * 50)]
    a, b = 1.7, -0.6

    def ID(qdd, ext):
        return inverse_dynamics(humanoid, pose, vel, qdd, ext)

    lhs = ID(a * qdd1 + b * qdd2, lam)
    rhs = (a * ID(qdd1, None) + b * ID(qdd2, None) + ID(np.zeros(humanoid.ndof), lam)
           - (a + b) * ID(np.zeros(humanoid.ndof), None))
    assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_id_matrix_form_cross_check(pendulum2, humanoid):
    rng = np.random.default_rng(8)
    for model in (pendulum2, humanoid):
        for _ in range(5):
            pose, vel = random_state(model, rng)
            acc = rng.standard_normal(model.ndof)
            lam = [(model.n_segments - 1, rng.standard_normal(3),
                    rng.standard_normal(3) * 100)]
            t1 = inverse_dynamics(model, pose, vel, acc, lam)
            t2 = inverse_dynamics_matrix(model, pose, vel, acc, lam)
            scale = max(1.0, np.max(np.abs(t1)))
            assert np.max(np.abs(t1 - t2)) < 1e-9 * scale


def test_id_invalid_external_segment(pendulum1):
    pose = pendulum1.zero_pose()
    with pytest.raises(DynamicsError):
        inverse_dynamics(pendulum1, pose, np.zeros(1), np.zeros(1),
                         [(5, np.zeros(3), np.ones(3))])


# -- forward dynamics --------------------------------------------------------

def test_fd_pendulum_equilibrium(pendulum1):
    pose = Pose(np.zeros(3), [0.0])
    acc = forward_dynamics(pendulum1, pose, np.zeros(1), np.zeros(1))
    assert abs(acc[0]) < 1e-12


def test_fd_pendulum_horizontal(pendulum1):
    pose = Pose(np.zeros(3), [np.pi / 2])
    acc = forward_dynamics(pendulum1, pose, np.zeros(1), np.zeros(1))
    expect = -M1 * G * C1 / (M1 * C1 ** 2 + I1)
    assert abs(acc[0] - expect) < 1e-10


def test_fd_id_roundtrip_random(pendulum1, pendulum2, humanoid):
    rng = np.random.default_rng(9)
    for model in (pendulum1, pendulum2, humanoid):
        for _ in range(20):
            pose, vel = random_state(model, rng)
            tau = rng.standard_normal(model.ndof) * 10
            lam = [(rng.integers(model.n_segments), rng.standard_normal(3),
                    rng.standard_normal(3) * 40)]
            acc = forward_dynamics(model, pose, vel, tau, lam)
            back = inverse_dynamics(model, pose, vel, acc, lam)
            scale = max(1.0, np.max(np.abs(tau)))
            assert np.max(np.abs(back - tau)) < 1e-6 * scale
            # and the other direction
            qdd = rng.standard_normal(model.ndof)
            tau2 = inverse_dynamics(model, pose, vel, qdd, lam)
            acc2 = forward_dynamics(model, pose, vel, tau2, lam)
            assert np.max(np.abs(acc2 - qdd)) < 1e-6 * max(1.0, np.max(np.abs(qdd)))


# -- contact jacobian --------------------------------------------------------

def test_contact_jacobian_root_only():
    model = point_mass_model()
    rng = np.random.default_rng(10)
    pose = random_pose(model, rng, root_position=[0.2, -0.1, 0.5])
    local = np.array([0.1, 0.2, -0.3])
    J = contact_jacobian(model, pose, 0, local)
    assert np.allclose(J[:, :3], np.eye(3))
    x = point_world(model, pose, 0, local)
    R, p = forward_kinematics(model, pose)
    for k in range(3):
        a = R[0][:, k]
        assert np.allclose(J[:, 3 + k], np.cross(a, x - p[0]))


def test_contact_jacobian_pendulum_tip(pendulum1):
    theta = 0.6
    pose = Pose(np.zeros(3), [theta])
    J = contact_jacobian(pendulum1, pose, 0, np.array([0.0, 0.0, -L1]))
    # d tip / d theta for tip = R_y(theta) (0,0,-L)
    expect = np.array([-L1 * np.cos(theta), 0.0, L1 * np.sin(theta)])
    assert np.allclose(J[:, 0], expect, atol=1e-12)


def test_contact_jacobian_finite_difference(humanoid):
    rng = np.random.default_rng(11)
    eps = 1e-6
    for _ in range(5):
        pose, vel = random_state(humanoid, rng)
        seg = int(rng.integers(humanoid.n_segments))
        local = rng.standard_normal(3) * 0.1
        J = contact_jacobian(humanoid, pose, seg, local)
        xp = point_world(humanoid, integrate_pose(humanoid, pose, vel, eps), seg, local)
        xm = point_world(humanoid, integrate_pose(humanoid, pose, vel, -eps), seg, local)
        fd = (xp - xm) / (2 * eps)
        assert np.max(np.abs(J @ vel - fd)) < 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_contact_jacobian_invalid_segment(pendulum1):
    with pytest.raises(DynamicsError):
        contact_jacobian(pendulum1, pendulum1.zero_pose(), 3, np.zeros(3))
