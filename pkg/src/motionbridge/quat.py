"""Unit-quaternion helpers.

Quaternions are plain numpy arrays in (w, x, y, z) component order; this
convention is used in memory and in every file format. q and -q encode the
same rotation, and all distance operations treat them as equal.
"""

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

# Below this sin(theta), SLERP falls back to normalized lerp.
_SLERP_EPS = 1e-7


def normalize(q: np.ndarray) -> np.ndarray:
    """Return q scaled to unit norm.

    Raises ValueError for near-zero input, which has no direction.
    """
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero quaternion")
    return q / n


def _ensure_unit(q: np.ndarray) -> np.ndarray:
    """Like normalize, but leaves already-unit input bit-identical."""
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero quaternion")
    if abs(n - 1.0) > 1e-9:
        return q / n
    return q


def multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product q1 * q2."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Quaternion for a rotation of `angle` radians about `axis`."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def rotation_distance(q1: np.ndarray, q2: np.ndarray) -> float:
    """Geodesic arc length between two rotations, in [0, pi].

    The absolute dot product picks the shortest arc, so q and -q are the
    same rotation. Slightly off-unit inputs are renormalized through the
    norm product; the dot is clamped before arccos to absorb rounding.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    n1 = float(np.linalg.norm(q1))
    n2 = float(np.linalg.norm(q2))
    if n1 < 1e-12 or n2 < 1e-12:
        raise ValueError("rotation_distance requires nonzero quaternions")
    d = abs(float(np.dot(q1, q2)) / (n1 * n2))
    return 2.0 * float(np.arccos(min(d, 1.0)))


def slerp(q1: np.ndarray, q2: np.ndarray, tau: float) -> np.ndarray:
    """Spherical linear interpolation from q1 to q2 at parameter tau.

    q2 is negated first when the dot product is negative so the path takes
    the shortest arc. Endpoints are returned exactly; a nearly-degenerate
    arc (sin(theta) < 1e-7) falls back to normalized linear interpolation.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    q1 = _ensure_unit(q1)
    q2 = _ensure_unit(q2)
    dot = float(np.dot(q1, q2))
    if dot < 0.0:
        q2 = -q2
        dot = -dot
    if tau == 0.0:
        return q1.copy()
    if tau == 1.0:
        return q2.copy()
    theta = float(np.arccos(min(dot, 1.0)))
    sin_theta = np.sin(theta)
    if sin_theta < _SLERP_EPS:
        return normalize((1.0 - tau) * q1 + tau * q2)
    out = (np.sin((1.0 - tau) * theta) * q1 + np.sin(tau * theta) * q2) / sin_theta
    return normalize(out)


def to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix for q, assuming q is unit norm.

    The polynomial form is evaluated as-is for non-unit input; gradient
    code relies on that (finite differences perturb off the sphere).
    """
    w, x, y, z = q
    return np.array([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])


def matrix_jacobian(q: np.ndarray) -> np.ndarray:
    """Partial derivatives of to_matrix(q), shape (4, 3, 3).

    Entry [k] is dR/dq_k for components ordered (w, x, y, z).
    """
    w, x, y, z = q
    dw = np.array([
        [0.0, -2 * z, 2 * y],
        [2 * z, 0.0, -2 * x],
        [-2 * y, 2 * x, 0.0],
    ])
    dx = np.array([
        [0.0, 2 * y, 2 * z],
        [2 * y, -4 * x, -2 * w],
        [2 * z, 2 * w, -4 * x],
    ])
    dy = np.array([
        [-4 * y, 2 * x, 2 * w],
        [2 * x, 0.0, 2 * z],
        [-2 * w, 2 * z, -4 * y],
    ])
    dz = np.array([
        [-4 * z, -2 * w, 2 * x],
        [2 * w, -4 * z, 2 * y],
        [2 * x, 2 * y, 0.0],
    ])
    return np.stack([dw, dx, dy, dz])
