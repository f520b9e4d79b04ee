"""Neo-Hookean base material and beam-induced deformation gradients.

The deformation gradient of a rigid cross-section at in-plane position X is
F = I + (eps + kappa x X) (x) E3, with the rotation factor dropped since it
does not affect the strain energy. For a deformable section the in-plane
columns come from the gradient of the deformed embedding.

The strain energy is

    psi = mu/2 (I1 - log(J^2) - 3) + lam/8 log(J^2)^2

with I1 = tr(F^T F) and J = det F. First Piola-Kirchhoff stress and its
tangent are implemented in closed form; the tangent is needed at every
quadrature point of the warping Newton solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from beampot.core import MaterialParams, as_strain_vector

_JACOBIAN_FLOOR = 1e-12

_EYE3 = np.eye(3)
# delta_ik delta_jl as a fourth-order tensor, the derivative of F by itself
_IDENTITY4 = np.einsum("ik,jl->ijkl", _EYE3, _EYE3)


class ImpenetrabilityError(ValueError):
    """Raised when a deformation gradient has a non-positive determinant."""


@dataclass(frozen=True)
class CrossSectionPoint:
    """Material point of the cross-section with its deformed embedding.

    ``position`` is the reference in-plane location, ``deformed`` the mapped
    3D position and ``grad`` the 3x2 gradient of the deformed embedding with
    respect to the in-plane coordinates. The rigid embedding has
    deformed = (X1, X2, 0) and grad = [[1,0],[0,1],[0,0]].
    """

    position: np.ndarray
    deformed: np.ndarray
    grad: np.ndarray

    @classmethod
    def rigid(cls, position) -> "CrossSectionPoint":
        position = np.asarray(position, dtype=float)
        deformed = np.array([position[0], position[1], 0.0])
        grad = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        return cls(position=position, deformed=deformed, grad=grad)


def defgrad_rigid(p, position) -> np.ndarray:
    """Deformation gradient of a rigid section at in-plane position (X1, X2)."""
    pv = as_strain_vector(p)
    xhat = np.array([position[0], position[1], 0.0])
    fiber = pv[:3] + np.cross(pv[3:], xhat)
    f = _EYE3.copy()
    f[:, 2] += fiber
    return f


def defgrad_deformable(p, point: CrossSectionPoint) -> np.ndarray:
    """Deformation gradient for a deformed section embedding.

    F = (eps + kappa x Xhat + E3) (x) E3 + dXhat/dX_alpha (x) E_alpha.
    Reduces to ``defgrad_rigid`` for the rigid embedding.
    """
    pv = as_strain_vector(p)
    f = np.empty((3, 3))
    f[:, :2] = point.grad
    f[:, 2] = pv[:3] + np.cross(pv[3:], point.deformed)
    f[2, 2] += 1.0
    return f


def nh_energy(f, mat: MaterialParams) -> float:
    """Neo-Hookean strain energy density; requires det F > 0."""
    f = np.asarray(f, dtype=float)
    jac = np.linalg.det(f)
    if jac <= _JACOBIAN_FLOOR:
        raise ImpenetrabilityError(f"det F = {jac:.3e} is not positive")
    i1 = float(np.tensordot(f, f))
    log_j2 = 2.0 * np.log(jac)
    return 0.5 * mat.mu_bar * (i1 - log_j2 - 3.0) + 0.125 * mat.lam_bar * log_j2**2


def nh_stress(f, mat: MaterialParams) -> np.ndarray:
    """First Piola-Kirchhoff stress P = mu (F - F^-T) + lam/2 log(J^2) F^-T."""
    f = np.asarray(f, dtype=float)
    jac = np.linalg.det(f)
    if jac <= _JACOBIAN_FLOOR:
        raise ImpenetrabilityError(f"det F = {jac:.3e} is not positive")
    f_inv_t = np.linalg.inv(f).T
    log_j2 = 2.0 * np.log(jac)
    return mat.mu_bar * (f - f_inv_t) + 0.5 * mat.lam_bar * log_j2 * f_inv_t


def nh_tangent(f, mat: MaterialParams) -> np.ndarray:
    """Exact fourth-order tangent dP/dF as a (3,3,3,3) array.

    A_ijkl = mu d_ik d_jl + lam B_ij B_kl + (mu - lam/2 log J^2) B_il B_kj
    with B = F^-T.
    """
    f = np.asarray(f, dtype=float)
    jac = np.linalg.det(f)
    if jac <= _JACOBIAN_FLOOR:
        raise ImpenetrabilityError(f"det F = {jac:.3e} is not positive")
    b = np.linalg.inv(f).T
    log_j2 = 2.0 * np.log(jac)
    gamma = mat.mu_bar - 0.5 * mat.lam_bar * log_j2
    return (
        mat.mu_bar * _IDENTITY4
        + mat.lam_bar * np.einsum("ij,kl->ijkl", b, b)
        + gamma * np.einsum("il,kj->ijkl", b, b)
    )


def nh_energy_batch(f, mat: MaterialParams) -> np.ndarray:
    """Vectorized strain energy for a stack of deformation gradients (...,3,3)."""
    jac = np.linalg.det(f)
    if np.any(jac <= _JACOBIAN_FLOOR):
        idx = int(np.argmax(jac <= _JACOBIAN_FLOOR))
        raise ImpenetrabilityError(f"det F = {jac.flat[idx]:.3e} at entry {idx}")
    i1 = np.einsum("...ij,...ij->...", f, f)
    log_j2 = 2.0 * np.log(jac)
    return 0.5 * mat.mu_bar * (i1 - log_j2 - 3.0) + 0.125 * mat.lam_bar * log_j2**2


def nh_stress_batch(f, mat: MaterialParams) -> np.ndarray:
    """Vectorized first Piola-Kirchhoff stress for a stack of gradients."""
    jac = np.linalg.det(f)
    if np.any(jac <= _JACOBIAN_FLOOR):
        idx = int(np.argmax(jac <= _JACOBIAN_FLOOR))
        raise ImpenetrabilityError(f"det F = {jac.flat[idx]:.3e} at entry {idx}")
    b = np.swapaxes(np.linalg.inv(f), -1, -2)
    log_j2 = 2.0 * np.log(jac)
    return mat.mu_bar * (f - b) + 0.5 * mat.lam_bar * log_j2[..., None, None] * b


def nh_tangent_batch(f, mat: MaterialParams) -> np.ndarray:
    """Vectorized tangent dP/dF, shape (..., 3, 3, 3, 3)."""
    jac = np.linalg.det(f)
    if np.any(jac <= _JACOBIAN_FLOOR):
        idx = int(np.argmax(jac <= _JACOBIAN_FLOOR))
        raise ImpenetrabilityError(f"det F = {jac.flat[idx]:.3e} at entry {idx}")
    b = np.swapaxes(np.linalg.inv(f), -1, -2)
    log_j2 = 2.0 * np.log(jac)
    gamma = mat.mu_bar - 0.5 * mat.lam_bar * log_j2
    out = np.einsum("...ij,...kl->...ijkl", b, b)
    out *= mat.lam_bar
    out += gamma[..., None, None, None, None] * np.einsum("...il,...kj->...ijkl", b, b)
    out += mat.mu_bar * _IDENTITY4
    return out
