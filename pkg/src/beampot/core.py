"""Shared domain types, section geometry, and the linear elastic beam model.

Strain states are six-vectors (eps1, eps2, eps3, kappa1, kappa2, kappa3):
two shear strains and the axial stretch, followed by two bending curvatures
and the twist. Stress resultants use the conjugate ordering
(n1, n2, n3, m1, m2, m3). Units are carried implicitly in a consistent
system; no unit checking is performed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_SHEAR_CORRECTION = 5.0 / 6.0


@dataclass(frozen=True)
class StrainState:
    """Beam strain measures: shear/axial strains and curvatures/twist."""

    eps: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eps", np.asarray(self.eps, dtype=float))
        object.__setattr__(self, "kappa", np.asarray(self.kappa, dtype=float))
        if self.eps.shape != (3,) or self.kappa.shape != (3,):
            raise ValueError("eps and kappa must be 3-vectors")
        if not (np.isfinite(self.eps).all() and np.isfinite(self.kappa).all()):
            raise ValueError("strain components must be finite")

    @classmethod
    def from_vector(cls, p) -> "StrainState":
        p = np.asarray(p, dtype=float)
        if p.shape != (6,):
            raise ValueError("strain vector must have 6 components")
        return cls(eps=p[:3], kappa=p[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.eps, self.kappa])

    @classmethod
    def zero(cls) -> "StrainState":
        return cls(eps=np.zeros(3), kappa=np.zeros(3))


@dataclass(frozen=True)
class StressResultants:
    """Section forces (n1, n2 shear, n3 normal) and moments (m1, m2 bending, m3 twist)."""

    n: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n", np.asarray(self.n, dtype=float))
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))
        if self.n.shape != (3,) or self.m.shape != (3,):
            raise ValueError("n and m must be 3-vectors")

    @classmethod
    def from_vector(cls, q) -> "StressResultants":
        q = np.asarray(q, dtype=float)
        if q.shape != (6,):
            raise ValueError("stress vector must have 6 components")
        return cls(n=q[:3], m=q[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.n, self.m])


@dataclass(frozen=True)
class SectionGeometry:
    """Circular or ring-shaped cross-section with outer radius and inner radius."""

    outer_radius: float
    inner_radius: float = 0.0

    def __post_init__(self):
        if not self.outer_radius > self.inner_radius >= 0.0:
            raise ValueError(
                f"need outer_radius > inner_radius >= 0, got "
                f"R={self.outer_radius}, R_i={self.inner_radius}"
            )

    @property
    def ratio(self) -> float:
        """Inner-to-outer radius ratio, in [0, 1)."""
        return self.inner_radius / self.outer_radius


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic elastic base material given by Young's modulus and Poisson's ratio."""

    youngs: float
    poisson: float
    shear_correction: tuple = field(default=(DEFAULT_SHEAR_CORRECTION, DEFAULT_SHEAR_CORRECTION))

    def __post_init__(self):
        if self.youngs <= 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.youngs}")
        if not -1.0 < self.poisson < 0.5:
            raise ValueError(f"Poisson's ratio must lie in (-1, 0.5), got {self.poisson}")

    @property
    def shear_modulus(self) -> float:
        return self.youngs / (2.0 * (1.0 + self.poisson))

    @property
    def mu_bar(self) -> float:
        """First Lame parameter of the base material (equals the shear modulus)."""
        return self.shear_modulus

    @property
    def lam_bar(self) -> float:
        """Second Lame parameter, 2*mu*nu/(1-2*nu)."""
        return 2.0 * self.mu_bar * self.poisson / (1.0 - 2.0 * self.poisson)


def as_strain_vector(p) -> np.ndarray:
    """Coerce a StrainState or array-like into a plain 6-vector."""
    if isinstance(p, StrainState):
        return p.as_vector()
    p = np.asarray(p, dtype=float)
    if p.shape != (6,):
        raise ValueError("strain must be a StrainState or a 6-vector")
    return p


def section_properties(geom: SectionGeometry) -> tuple[float, float, float, float]:
    """Area, two principal second moments, and polar moment of the section.

    A = pi (R^2 - R_i^2), I1 = I2 = pi (R^4 - R_i^4) / 4, J = I1 + I2.
    """
    R, Ri = geom.outer_radius, geom.inner_radius
    area = np.pi * (R**2 - Ri**2)
    inertia = np.pi * (R**4 - Ri**4) / 4.0
    return area, inertia, inertia, 2.0 * inertia


def lem_stiffness(geom: SectionGeometry, mat: MaterialParams) -> np.ndarray:
    """Constant 6x6 constitutive matrix of the linear elastic model.

    Block-diagonal with diag(k1 G A, k2 G A, E A) and diag(E I1, E I2, G J);
    the strain-curvature coupling block is zero.
    """
    area, i1, i2, polar = section_properties(geom)
    E, G = mat.youngs, mat.shear_modulus
    k1, k2 = mat.shear_correction
    return np.diag([k1 * G * area, k2 * G * area, E * area, E * i1, E * i2, G * polar])


def lem_potential(p, geom: SectionGeometry, mat: MaterialParams) -> float:
    """Quadratic beam potential 1/2 p^T C p of the linear elastic model."""
    pv = as_strain_vector(p)
    c = lem_stiffness(geom, mat)
    return 0.5 * float(pv @ c @ pv)


def lem_stress(p, geom: SectionGeometry, mat: MaterialParams) -> StressResultants:
    """Linear stress resultants q = C p."""
    pv = as_strain_vector(p)
    q = lem_stiffness(geom, mat) @ pv
    return StressResultants.from_vector(q)
