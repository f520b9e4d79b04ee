"""Constitutive modeling toolkit for geometrically exact beams.

Provides a linear elastic reference model, hyperelastic section models with
rigid and deformable (warping FEM) cross-sections, neural beam potentials
with exact derivatives, Sobolev-style calibration, and a static solver for
Cosserat rods consuming any of these constitutive laws.
"""

from beampot.core import (
    MaterialParams,
    SectionGeometry,
    StrainState,
    StressResultants,
    lem_potential,
    lem_stiffness,
    lem_stress,
    section_properties,
)
from beampot.mesh import CrossSectionMesh, load_mesh, mesh_section, save_mesh
from beampot.pann import PannModel, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "CrossSectionMesh",
    "MaterialParams",
    "PannModel",
    "SectionGeometry",
    "StrainState",
    "StressResultants",
    "lem_potential",
    "lem_stiffness",
    "lem_stress",
    "load_mesh",
    "load_model",
    "mesh_section",
    "save_mesh",
    "save_model",
    "section_properties",
]
