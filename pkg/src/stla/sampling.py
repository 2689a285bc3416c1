"""Deterministic quasi-random sampling helpers.

Everything downstream that samples (bound estimation, structural
dependence checks, the direction oracle in the tests) goes through these
so a single seed makes whole runs reproducible byte for byte.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc


def sobol_unit(n_points, dim, seed=0):
    """Sobol points in [0,1)^dim; n_points rounded up to a power of two."""
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = max(1, int(np.ceil(np.log2(max(n_points, 2)))))
    pts = sampler.random_base2(m)
    return pts[:n_points]

def unit_directions(n_points, dim, seed=0):
    """Quasi-random points on the unit sphere S^{dim-1}."""
    if dim == 1:
        signs = np.where(np.arange(n_points) % 2 == 0, 1.0, -1.0)
        return signs.reshape(-1, 1)
    u = sobol_unit(n_points, dim, seed=seed)
    # inverse-CDF map to Gaussians, then normalize
    from scipy.special import ndtri
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return g / norms


def ball_mesh(center, radius, n_points, seed=0):
    """Quasi-random mesh of the closed ball B_radius(center)."""
    center = np.asarray(center, dtype=float)
    dim = center.shape[0]
    u = sobol_unit(n_points, dim + 1, seed=seed)
    dirs = unit_directions(n_points, dim, seed=seed + 1)
    radii = radius * u[:, -1] ** (1.0 / dim)
    return center + dirs * radii.reshape(-1, 1)


def circle_directions(n_points):
    """Evenly spaced directions on S^1 (deterministic, no seed)."""
    ang = 2.0 * np.pi * np.arange(n_points) / n_points
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)
