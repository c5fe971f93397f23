"""Benchmark geometries and particle file input.

The three named geometries are ellipsoid surfaces inscribed in their
bounding boxes (sphere 64x64x64, oblate 6.4x64x64, prolate 6.4x6.4x64),
sampled uniformly with respect to surface area; the octree always works on
the enclosing 64-cube.  Particle files are whitespace-separated text with
one ``x y z [w]`` row per particle (missing weights default to 1).
"""

from __future__ import annotations

import numpy as np

from .interp import AffineMap

__all__ = ["GEOMETRY_HALF_AXES", "gen_geometry", "read_particle_file", "bounding_cube"]

GEOMETRY_HALF_AXES = {
    "sphere": (32.0, 32.0, 32.0),
    "oblate": (3.2, 32.0, 32.0),
    "prolate": (3.2, 3.2, 32.0),
}

_BOX_HALF_WIDTH = 32.0


def gen_geometry(kind: str, n: int, seed: int) -> tuple[np.ndarray, AffineMap]:
    """Sample n points uniformly on an ellipsoid surface, with its octree box.

    Sampling rejects points drawn uniformly on the unit sphere with
    probability proportional to the local area distortion of the map
    u -> (a u1, b u2, c u3), which makes the accepted points uniform with
    respect to the ellipsoid's surface area.  Deterministic per seed.
    """
    if kind not in GEOMETRY_HALF_AXES:
        raise ValueError(
            f"unknown geometry {kind!r}; expected one of {sorted(GEOMETRY_HALF_AXES)}"
        )
    if n < 1:
        raise ValueError(f"particle count must be >= 1, got {n}")
    a = np.asarray(GEOMETRY_HALF_AXES[kind])
    rng = np.random.default_rng(seed)
    # area density on the unit sphere for the ellipsoid map, up to a*b*c
    density_max = 1.0 / np.min(a)
    out = np.empty((n, 3))
    filled = 0
    while filled < n:
        m = max(2 * (n - filled), 128)
        u = rng.standard_normal((m, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        density = np.sqrt(np.sum((u / a) ** 2, axis=1))
        keep = rng.uniform(0.0, density_max, m) < density
        pts = u[keep] * a
        take = min(len(pts), n - filled)
        out[filled:filled + take] = pts[:take]
        filled += take
    bbox = AffineMap((0.0, 0.0, 0.0), _BOX_HALF_WIDTH)
    return out, bbox


def read_particle_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``x y z [w]`` rows; returns (points, weights)."""
    data = np.atleast_2d(np.loadtxt(path))
    if data.shape[1] == 3:
        return data, np.ones(len(data))
    if data.shape[1] == 4:
        return data[:, :3].copy(), data[:, 3].copy()
    raise ValueError(
        f"particle file must have 3 or 4 columns, got {data.shape[1]}"
    )


def bounding_cube(points, margin: float = 1e-9) -> AffineMap:
    """Smallest axis-aligned cube containing the points, with a tiny margin."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    low = pts.min(axis=0)
    high = pts.max(axis=0)
    center = 0.5 * (low + high)
    half = 0.5 * float(np.max(high - low))
    half = half * (1.0 + margin) if half > 0 else 1.0
    return AffineMap(tuple(center), half)
