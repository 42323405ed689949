"""Conversions between axis-angle vectors, rotation matrices and Euler angles.

The axis-angle ("exponential map") encoding is a 3-vector whose direction is
the rotation axis and whose magnitude is the rotation angle; the canonical
range of the angle is [0, pi]. The Euler convention used everywhere in this
package is intrinsic z-y-x (yaw, pitch, roll):

    R = Rz(yaw) @ Ry(pitch) @ Rx(roll)

with pitch restricted to [-pi/2, pi/2]. All functions are pure, operate in
double precision, and are safe to call concurrently.
"""

import numpy as np

from .errors import InvalidInputError

# Below this rotation angle the sin(t)/t style terms are replaced by their
# first-order limits.
SMALL_ANGLE = 1e-8
# Within this margin of pi the antisymmetric part of the matrix degenerates
# and the axis is recovered from the symmetric part instead.
NEAR_PI_MARGIN = 1e-4
# Tolerance on R^T R = I and det(R) = 1 when validating rotation matrices.
ORTHONORMALITY_TOL = 1e-9
# |R[2,0]| at or above 1 - this value counts as gimbal lock (pitch = +-pi/2).
GIMBAL_LOCK_TOL = 1e-9


def _skew(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def check_rotmat(m) -> np.ndarray:
    """Validate that ``m`` is a proper 3x3 rotation matrix and return it.

    Raises:
        InvalidInputError: if ``m`` is not finite, not orthonormal within
            ``ORTHONORMALITY_TOL``, or has determinant != +1.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise InvalidInputError("rotation matrix must be a finite 3x3 array")
    ortho_err = np.max(np.abs(m.T @ m - np.eye(3)))
    det_err = abs(np.linalg.det(m) - 1.0)
    if ortho_err > ORTHONORMALITY_TOL or det_err > ORTHONORMALITY_TOL:
        raise InvalidInputError(
            "matrix is not a rotation (orthonormality error %.3e, "
            "determinant error %.3e)" % (ortho_err, det_err))
    return m


def expmap_to_rotmat(r) -> np.ndarray:
    """Rotation matrix for a rotation of ``|r|`` radians about axis ``r/|r|``.

    Uses the Rodrigues formula; for ``|r| < SMALL_ANGLE`` the first-order
    approximation ``I + skew(r)`` is used, which makes the round trip with
    :func:`rotmat_to_expmap` exact for tiny rotations.

    Args:
        r: (3,) axis-angle vector.

    Returns:
        (3, 3) rotation matrix.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3,) or not np.all(np.isfinite(r)):
        raise InvalidInputError("axis-angle vector must be a finite 3-vector")
    theta = np.linalg.norm(r)
    if theta < SMALL_ANGLE:
        return np.eye(3) + _skew(r)
    k = _skew(r / theta)
    return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)


def rotmat_to_expmap(m) -> np.ndarray:
    """Axis-angle vector of a rotation matrix, with angle in [0, pi].

    The angle comes from ``atan2(|antisymmetric part|, (trace-1)/2)``, which
    is well conditioned over the whole range. Near pi the axis is recovered
    from the symmetric part of the matrix; exactly at pi, where both signs of
    the axis encode the same rotation, the sign making the largest-magnitude
    component positive is returned.

    Args:
        m: (3, 3) rotation matrix.

    Returns:
        (3,) axis-angle vector, inverse of :func:`expmap_to_rotmat` on the
        canonical domain.
    """
    m = check_rotmat(m)
    w = 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    s = np.linalg.norm(w)              # sin(theta); >= 0 for theta in [0, pi]
    c = 0.5 * (np.trace(m) - 1.0)      # cos(theta)
    theta = np.arctan2(s, c)
    if theta < SMALL_ANGLE:
        return w
    if theta < np.pi - NEAR_PI_MARGIN:
        return (theta / s) * w
    # Near pi: (R + R^T)/2 = I + (1-cos)(nn^T - I), so nn^T is recoverable
    # even though the antisymmetric part has vanished.
    outer = (0.5 * (m + m.T) - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(outer)))
    axis = outer[:, k] / np.sqrt(max(outer[k, k], np.finfo(np.float64).tiny))
    axis = axis / np.linalg.norm(axis)
    if s > 1e-12:
        if np.dot(axis, w) < 0.0:
            axis = -axis
    else:
        j = int(np.argmax(np.abs(axis)))
        if axis[j] < 0.0:
            axis = -axis
    return theta * axis


def rotmat_to_euler(m) -> np.ndarray:
    """Intrinsic z-y-x Euler angles (yaw, pitch, roll) of a rotation matrix.

    At gimbal lock (``|m[2,0]| >= 1 - GIMBAL_LOCK_TOL``, i.e. pitch at
    +-pi/2) yaw and roll share one degree of freedom; yaw is pinned to 0 and
    roll absorbs the combined rotation, so the returned angles still
    reconstruct the input matrix.

    Args:
        m: (3, 3) rotation matrix.

    Returns:
        (3,) array (yaw, pitch, roll) with pitch in [-pi/2, pi/2].
    """
    m = check_rotmat(m)
    if abs(m[2, 0]) >= 1.0 - GIMBAL_LOCK_TOL:
        pitch = np.arctan2(-m[2, 0], np.hypot(m[0, 0], m[1, 0]))
        if m[2, 0] < 0.0:        # pitch +pi/2: matrix depends on roll - yaw
            roll = np.arctan2(m[0, 1], m[1, 1])
        else:                    # pitch -pi/2: matrix depends on roll + yaw
            roll = np.arctan2(-m[0, 1], m[1, 1])
        return np.array([0.0, pitch, roll])
    yaw = np.arctan2(m[1, 0], m[0, 0])
    pitch = np.arctan2(-m[2, 0], np.hypot(m[0, 0], m[1, 0]))
    roll = np.arctan2(m[2, 1], m[2, 2])
    return np.array([yaw, pitch, roll])


def euler_to_rotmat(e) -> np.ndarray:
    """Rotation matrix from intrinsic z-y-x Euler angles (yaw, pitch, roll)."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (3,) or not np.all(np.isfinite(e)):
        raise InvalidInputError("euler angles must be a finite 3-vector")
    cz, sz = np.cos(e[0]), np.sin(e[0])
    cy, sy = np.cos(e[1]), np.sin(e[1])
    cx, sx = np.cos(e[2]), np.sin(e[2])
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return rz @ ry @ rx


def expmap_to_euler(r) -> np.ndarray:
    """Euler angles (yaw, pitch, roll) of an axis-angle vector."""
    return rotmat_to_euler(expmap_to_rotmat(r))
