import numpy as np
import pytest

from beampot.continuum import ImpenetrabilityError
from beampot.core import MaterialParams, SectionGeometry, section_properties
from beampot.mesh import mesh_section
from beampot.rhm import rhm_evaluate

GEOM = SectionGeometry(1.0)
MAT = MaterialParams(70.0, 0.4)
MESH = mesh_section(GEOM, 800)


def test_zero_state():
    psi, q = rhm_evaluate(np.zeros(6), MESH, MAT)
    assert psi == 0.0
    assert np.all(q.as_vector() == 0.0)


def test_pure_shear_exact():
    # P is constant over the section for pure shear, so quadrature is exact:
    # n1 = mu * eps1 * A
    psi, q = rhm_evaluate([0.2, 0, 0, 0, 0, 0], MESH, MAT)
    area = MESH.areas().sum()
    assert q.n[0] == pytest.approx(25.0 * 0.2 * area, rel=1e-12)
    assert q.n[0] == pytest.approx(15.708, rel=5e-3)


def test_small_axial_constrained_modulus():
    # a rigid section cannot contract laterally, so the axial tangent is the
    # constrained modulus 2 mu + lam = 150, not Young's modulus 70
    eps3 = 1e-4
    _, q = rhm_evaluate([0, 0, eps3, 0, 0, 0], MESH, MAT)
    area, _, _, _ = section_properties(GEOM)
    constrained = 2.0 * MAT.mu_bar + MAT.lam_bar
    assert constrained == pytest.approx(150.0)
    assert q.n[2] == pytest.approx(constrained * area * eps3, rel=5e-3)


def test_small_twist_matches_lem():
    kappa3 = 0.01
    _, q = rhm_evaluate([0, 0, 0, 0, 0, kappa3], MESH, MAT)
    _, _, _, polar = section_properties(GEOM)
    mesh_polar = (MESH.areas() * (MESH.centroids() ** 2).sum(axis=1)).sum()
    assert q.m[2] == pytest.approx(25.0 * kappa3 * mesh_polar, rel=1e-12)
    assert q.m[2] == pytest.approx(25.0 * polar * kappa3, rel=2e-2)


def test_stress_is_gradient_of_energy():
    rng = np.random.default_rng(7)
    h = 1e-6
    for _ in range(10):
        p = rng.uniform(-0.1, 0.1, 6)
        psi, q = rhm_evaluate(p, MESH, MAT)
        fd = np.empty(6)
        for i in range(6):
            dp = np.zeros(6)
            dp[i] = h
            fd[i] = (rhm_evaluate(p + dp, MESH, MAT)[0] - rhm_evaluate(p - dp, MESH, MAT)[0]) / (2 * h)
        q = q.as_vector()
        assert np.abs(q - fd).max() <= 1e-5 * max(np.abs(q).max(), 1.0)


def test_mesh_refinement_convergence():
    # halving the element size (4x the count) changes the integral < 0.5%
    p = np.array([0.1, 0, 0.1, 0.3, 0, 0.3])
    psi_coarse, _ = rhm_evaluate(p, mesh_section(GEOM, 1600), MAT)
    psi_fine, _ = rhm_evaluate(p, mesh_section(GEOM, 6400), MAT)
    assert abs(psi_fine - psi_coarse) <= 0.005 * abs(psi_fine)


def test_three_point_rule():
    p = np.array([0.05, -0.02, 0.08, 0.2, -0.1, 0.15])
    psi1, q1 = rhm_evaluate(p, MESH, MAT, rule="centroid")
    psi3, q3 = rhm_evaluate(p, MESH, MAT, rule="three-point")
    assert psi3 == pytest.approx(psi1, rel=0.02)
    assert np.allclose(q1.as_vector(), q3.as_vector(), rtol=0.02, atol=1e-6)
    with pytest.raises(ValueError):
        rhm_evaluate(p, MESH, MAT, rule="nope")


def test_inadmissible_state_reported():
    with pytest.raises(ImpenetrabilityError) as err:
        rhm_evaluate([0, 0, -1.2, 0, 0, 0], MESH, MAT)
    assert "quadrature point" in str(err.value)
