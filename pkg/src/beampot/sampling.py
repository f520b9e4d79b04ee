"""Concentric sampling of strain states.

States are factorized into uniformly distributed unit directions and an
amplitude ladder, p = t N, then perturbed by a random fraction of their norm
along a fresh random direction. Perturbed states are filtered against
per-component limits and an impenetrability check at the corners of the
section's bounding square.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from beampot.core import SectionGeometry, StrainState, as_strain_vector

# component limits for a beam of length 10 under full-turn bending/twist,
# 20% compression, or 50% elongation
DEFAULT_LIMITS = np.array(
    [
        [-0.2, 0.2],
        [-0.2, 0.2],
        [-0.2, 0.5],
        [-2.0 * np.pi / 10.0, 2.0 * np.pi / 10.0],
        [-2.0 * np.pi / 10.0, 2.0 * np.pi / 10.0],
        [-2.0 * np.pi / 10.0, 2.0 * np.pi / 10.0],
    ]
)


def _default_amplitudes() -> np.ndarray:
    return np.linspace(0.02, 0.6, 31)


@dataclass(frozen=True)
class SamplingConfig:
    n_directions: int = 64
    amplitudes: np.ndarray = field(default_factory=_default_amplitudes)
    perturbation: float = 0.1
    limits: np.ndarray = field(default_factory=lambda: DEFAULT_LIMITS.copy())
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=float))
        object.__setattr__(self, "limits", np.asarray(self.limits, dtype=float))
        if self.perturbation < 0.0:
            raise ValueError("perturbation must be non-negative")
        if self.limits.shape != (6, 2):
            raise ValueError("limits must be a (6, 2) array of per-component bounds")


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sample_directions(n: int, dim: int = 6, seed: int = 0, iterations: int = 200) -> np.ndarray:
    """Well-separated unit directions via pairwise-repulsion descent.

    Seeded Gaussian draws are normalized to the sphere and relaxed by
    gradient steps on the Riesz (inverse-distance) pair energy, renormalizing
    after every step. Near-duplicate pairs (cosine above 0.999) are re-drawn
    and relaxed again.
    """
    if n < 2:
        raise ValueError("need at least two directions")
    rng = np.random.default_rng(seed)
    points = _unit_rows(rng.standard_normal((n, dim)))

    def relax(pts: np.ndarray, steps: int) -> np.ndarray:
        for _ in range(steps):
            diff = pts[:, None, :] - pts[None, :, :]
            dist2 = np.einsum("ijk,ijk->ij", diff, diff)
            np.fill_diagonal(dist2, np.inf)
            # gradient of sum 1/|xi - xj|: repulsion along the difference
            force = (diff / dist2[..., None] ** 1.5).sum(axis=1)
            # project onto the tangent space, step a fraction of the current
            # nearest-neighbor separation along the normalized force
            force -= np.einsum("ij,ij->i", force, pts)[:, None] * pts
            scale = np.linalg.norm(force, axis=1, keepdims=True)
            scale[scale == 0.0] = 1.0
            step = 0.2 * np.sqrt(dist2.min(axis=1))[:, None]
            pts = _unit_rows(pts + step * force / scale)
        return pts

    points = relax(points, iterations)
    for _ in range(20):
        cosines = points @ points.T
        np.fill_diagonal(cosines, -1.0)
        dup = np.argwhere(cosines > 0.999)
        if dup.size == 0:
            break
        for i in set(dup[:, 0]):
            points[i] = _unit_rows(rng.standard_normal((1, dim)))[0]
        points = relax(points, 50)
    return points


def admissible(p, geom: SectionGeometry) -> bool:
    """Impenetrability at the four corners of the section's bounding square.

    The rigid deformation gradient is rank-one in the fiber direction, so
    det F = 1 + eps3 + (kappa x Xhat)_3 at each corner (+-R, +-R).
    """
    pv = as_strain_vector(p)
    r = geom.outer_radius
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            xhat = np.array([sx * r, sy * r, 0.0])
            det = 1.0 + pv[2] + np.cross(pv[3:], xhat)[2]
            if det <= 0.0:
                return False
    return True


def build_paths(cfg: SamplingConfig, geom: SectionGeometry | None = None) -> list:
    """Concentric load paths: one per direction, ordered by amplitude.

    Each state t*N is perturbed by |p| * eps along a fresh random unit
    direction, then filtered against the component limits (and, when a
    geometry is given, the corner impenetrability check). Paths may come out
    empty. Identical seeds give identical paths.
    """
    directions = sample_directions(cfg.n_directions, seed=cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    amplitudes = np.sort(cfg.amplitudes)
    lo, hi = cfg.limits[:, 0], cfg.limits[:, 1]

    paths = []
    for direction in directions:
        states = []
        for t in amplitudes:
            p = t * direction
            if cfg.perturbation > 0.0:
                n_rand = rng.standard_normal(6)
                n_rand /= np.linalg.norm(n_rand)
                p = p + np.linalg.norm(p) * cfg.perturbation * n_rand
            if np.any(p < lo) or np.any(p > hi):
                continue
            if geom is not None and not admissible(p, geom):
                continue
            states.append(StrainState.from_vector(p))
        paths.append(states)
    return paths
