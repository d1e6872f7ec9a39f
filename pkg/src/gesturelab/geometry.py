"""Small 3-D vector helpers used by the tracking features and the
synthetic generator."""

import numpy as np


def unit(v):
    """Return v / ||v||. Raises ValueError for near-zero input."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero vector")
    return v / n


def rotation_matrix(axis, angle):
    """Right-handed rotation of `angle` radians about `axis` (Rodrigues)."""
    x, y, z = unit(axis)
    c = np.cos(angle)
    s = np.sin(angle)
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def random_rotation(rng, angle_sigma):
    """Rotation by a Gaussian angle about a uniformly random axis."""
    if angle_sigma == 0.0:
        return np.eye(3)
    axis = rng.normal(size=3)
    while np.linalg.norm(axis) < 1e-12:
        axis = rng.normal(size=3)
    angle = rng.normal(0.0, angle_sigma)
    return rotation_matrix(axis, angle)
