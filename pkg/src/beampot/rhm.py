"""Hyperelastic beam model with rigid cross-section.

The beam potential is the strain energy density of the base material
integrated over the section with the rigid deformation gradient; forces and
moments follow as

    n = int P E3 dA,   m = int X x P E3 dA.

Because the section is forbidden to contract laterally, the axial and
bending responses carry the constrained modulus 2 mu + lam of the base
material rather than Young's modulus; the shear response is stiffer than
the shear-corrected linear model by 1/k. Both effects vanish only for the
twist entry.
"""

from __future__ import annotations

import numpy as np

from beampot.core import MaterialParams, StressResultants, as_strain_vector
from beampot.continuum import ImpenetrabilityError, nh_energy_batch, nh_stress_batch
from beampot.mesh import CrossSectionMesh

_QUAD_RULES = ("centroid", "three-point")


def quadrature_points(mesh: CrossSectionMesh, rule: str = "centroid"):
    """Quadrature points and weights over the mesh triangles.

    Returns (points (Q,2), weights (Q,), triangle_index (Q,)). The centroid
    rule uses one point per triangle; the three-point rule the edge-midpoint
    rule, exact for quadratics.
    """
    if rule not in _QUAD_RULES:
        raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {_QUAD_RULES}")
    verts = mesh.nodes[mesh.triangles]  # (M, 3, 2)
    areas = mesh.areas()
    if rule == "centroid":
        points = verts.mean(axis=1)
        weights = areas
        tri_index = np.arange(mesh.n_triangles)
    else:
        mids = 0.5 * (verts + np.roll(verts, -1, axis=1))  # (M, 3, 2)
        points = mids.reshape(-1, 2)
        weights = np.repeat(areas / 3.0, 3)
        tri_index = np.repeat(np.arange(mesh.n_triangles), 3)
    return points, weights, tri_index


def _rigid_defgrads(pv: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Rigid-section deformation gradients at a batch of in-plane points."""
    q = points.shape[0]
    xhat = np.zeros((q, 3))
    xhat[:, :2] = points
    fiber = pv[:3] + np.cross(np.broadcast_to(pv[3:], (q, 3)), xhat)
    f = np.broadcast_to(np.eye(3), (q, 3, 3)).copy()
    f[:, :, 2] += fiber
    return f


def rhm_evaluate(
    p, mesh: CrossSectionMesh, mat: MaterialParams, rule: str = "centroid"
) -> tuple[float, StressResultants]:
    """Beam potential and stress resultants of the rigid-section model.

    Raises ImpenetrabilityError identifying the quadrature point if the
    deformation gradient determinant is non-positive anywhere.
    """
    pv = as_strain_vector(p)
    points, weights, tri_index = quadrature_points(mesh, rule)
    f = _rigid_defgrads(pv, points)
    jac = np.linalg.det(f)
    bad = jac <= 0.0
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ImpenetrabilityError(
            f"det F = {jac[i]:.3e} <= 0 at quadrature point {i} "
            f"(triangle {tri_index[i]}, X = {points[i]})"
        )
    psi = float(weights @ nh_energy_batch(f, mat))
    traction = nh_stress_batch(f, mat)[:, :, 2]  # P E3 per point
    n = weights @ traction
    xhat = np.zeros((points.shape[0], 3))
    xhat[:, :2] = points
    m = weights @ np.cross(xhat, traction)
    return psi, StressResultants(n=n, m=m)
