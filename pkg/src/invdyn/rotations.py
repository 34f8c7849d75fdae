"""Rotation utilities: 6d encoding, exponential/log maps, interpolation.

The 6d representation stores the first two columns of a rotation matrix,
concatenated as (col0, col1).  Decoding runs Gram-Schmidt, so any pair of
non-degenerate vectors maps to a valid rotation; this makes it a continuous
parameterization of SO(3) suitable for regression targets.
"""

import numpy as np


class DegenerateRotationError(ValueError):
    """Raised when a 6d input cannot be orthonormalized."""


def skew(v):
    """3x3 cross-product matrix of v."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def cross(a, b):
    # np.cross has high per-call overhead; this is used in inner loops.
    return np.array((
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ))


def decode_6d(r6):
    """Decode a 6-vector (first two rotation columns) into a 3x3 rotation.

    Gram-Schmidt makes the result orthonormal and right-handed; the input is
    scale-invariant.  Raises DegenerateRotationError for near-zero or
    near-parallel columns.
    """
    r6 = np.asarray(r6, dtype=float)
    if r6.shape != (6,):
        raise ValueError(f"expected 6-vector, got shape {r6.shape}")
    a1, a2 = r6[:3], r6[3:]
    n1 = np.linalg.norm(a1)
    if n1 <= 1e-8:
        raise DegenerateRotationError("first column is near zero")
    b1 = a1 / n1
    a2p = a2 - (b1 @ a2) * b1
    n2 = np.linalg.norm(a2p)
    if n2 <= 1e-8:
        raise DegenerateRotationError("columns are near parallel")
    b2 = a2p / n2
    b3 = cross(b1, b2)
    return np.column_stack((b1, b2, b3))


def encode_6d(R):
    """Inverse of decode_6d for orthonormal R: concatenated first two columns."""
    R = np.asarray(R, dtype=float)
    return np.concatenate((R[:, 0], R[:, 1]))


def exp_so3(w):
    """Rodrigues' formula: rotation matrix for rotation vector w."""
    w = np.asarray(w, dtype=float)
    theta = np.sqrt(w @ w)
    K = skew(w)
    if theta < 1e-8:
        # second-order series, exact enough below the threshold
        return np.eye(3) + K + 0.5 * (K @ K)
    A = np.sin(theta) / theta
    B = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + A * K + B * (K @ K)


def log_so3(R):
    """Rotation vector of R; robust near 0 and pi."""
    R = np.asarray(R, dtype=float)
    tr = np.clip((np.trace(R) - 1.0) * 0.5, -1.0, 1.0)
    theta = np.arccos(tr)
    if theta < 1e-7:
        # w ~ vee(R - R^T)/2 to first order
        return 0.5 * np.array((R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]))
    if theta > np.pi - 1e-5:
        # near pi the off-diagonal formula loses precision; use the outer
        # product form R ~ 2 aa^T - I with axis a
        S = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diag(S)))
        a = S[:, k] / np.sqrt(max(S[k, k], 1e-12))
        a = a / np.linalg.norm(a)
        # fix the sign using the skew part
        v = np.array((R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]))
        if v @ a < 0.0:
            a = -a
        return theta * a
    s = 0.5 / np.sin(theta)
    return theta * s * np.array((R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]))


def slerp(Ra, Rb, s):
    """Geodesic interpolation from Ra (s=0) to Rb (s=1)."""
    return Ra @ exp_so3(s * log_so3(Ra.T @ Rb))


def rotation_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
