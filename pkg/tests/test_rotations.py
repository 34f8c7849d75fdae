import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from invdyn.rotations import (DegenerateRotationError, decode_6d, encode_6d,
                              exp_so3, log_so3, rotation_z, slerp)


def random_rotations(n, seed=0):
    return Rotation.random(n, random_state=seed).as_matrix()


def test_decode_identity():
    assert np.allclose(decode_6d([1, 0, 0, 0, 1, 0]), np.eye(3))


def test_decode_scale_invariance():
    assert np.allclose(decode_6d([2, 0, 0, 0, 3, 0]), np.eye(3))


def test_roundtrip_rz30():
    R = rotation_z(np.deg2rad(30))
    assert np.max(np.abs(decode_6d(encode_6d(R)) - R)) < 1e-12


def test_roundtrip_random():
    for R in random_rotations(50):
        back = decode_6d(encode_6d(R))
        assert np.max(np.abs(back - R)) < 1e-12
        assert abs(np.linalg.det(back) - 1.0) < 1e-9


def test_decoded_orthonormal_from_noise():
    rng = np.random.default_rng(3)
    for _ in range(50):
        R = decode_6d(rng.standard_normal(6))
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
        assert np.linalg.det(R) > 0.999


def test_degenerate_inputs_raise():
    with pytest.raises(DegenerateRotationError):
        decode_6d([0, 0, 0, 0, 1, 0])
    with pytest.raises(DegenerateRotationError):
        decode_6d([1, 0, 0, 2, 0, 0])


def test_exp_log_roundtrip():
    rng = np.random.default_rng(4)
    for _ in range(50):
        d = rng.standard_normal(3)
        # stay inside the principal ball, |w| < pi, where log is the inverse
        w = d / np.linalg.norm(d) * rng.uniform(1e-4, 3.1)
        assert np.max(np.abs(log_so3(exp_so3(w)) - w)) < 1e-9


def test_log_near_pi():
    w = np.array([0.0, 0.0, np.pi - 1e-7])
    back = log_so3(exp_so3(w))
    assert np.max(np.abs(back - w)) < 1e-6


def test_slerp_endpoints_and_midpoint():
    Ra, Rb = random_rotations(2, seed=9)
    assert np.allclose(slerp(Ra, Rb, 0.0), Ra)
    assert np.max(np.abs(slerp(Ra, Rb, 1.0) - Rb)) < 1e-12
    Rm = slerp(Ra, Rb, 0.5)
    # midpoint is equidistant along the geodesic
    da = np.linalg.norm(log_so3(Ra.T @ Rm))
    db = np.linalg.norm(log_so3(Rm.T @ Rb))
    assert abs(da - db) < 1e-9
