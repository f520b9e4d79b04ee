import numpy as np
import pytest

from beampot.core import (
    MaterialParams,
    SectionGeometry,
    StrainState,
    lem_potential,
    lem_stiffness,
    lem_stress,
    section_properties,
)

GEOM = SectionGeometry(1.0)
MAT = MaterialParams(70.0, 0.4)


def test_section_properties_full_disc():
    area, i1, i2, polar = section_properties(GEOM)
    assert area == pytest.approx(np.pi)
    assert i1 == pytest.approx(np.pi / 4.0) == i2
    assert polar == pytest.approx(np.pi / 2.0)


def test_section_properties_annulus():
    area, i1, _, _ = section_properties(SectionGeometry(1.0, 0.5))
    assert area == pytest.approx(np.pi * 0.75)
    assert i1 == pytest.approx(np.pi * (1.0 - 0.5**4) / 4.0)
    assert i1 == pytest.approx(0.73631077818510780, rel=1e-12)


def test_section_properties_thin_ring_limit():
    area, i1, _, polar = section_properties(SectionGeometry(1.0, 1.0 - 1e-12))
    assert 0.0 < area < 1e-10
    assert 0.0 < i1 < 1e-10
    assert polar > 0.0


def test_invalid_geometry_rejected():
    with pytest.raises(ValueError):
        SectionGeometry(1.0, 1.0)
    with pytest.raises(ValueError):
        SectionGeometry(0.5, 0.7)
    with pytest.raises(ValueError):
        SectionGeometry(1.0, -0.1)


def test_material_params():
    assert MAT.shear_modulus == pytest.approx(25.0)
    assert MAT.lam_bar == pytest.approx(2.0 * 25.0 * 0.4 / 0.2)
    with pytest.raises(ValueError):
        MaterialParams(-1.0, 0.3)
    with pytest.raises(ValueError):
        MaterialParams(70.0, 0.5)


def test_lem_potential_values():
    assert lem_potential(np.zeros(6), GEOM, MAT) == 0.0
    # pure shear: 1/2 (5/6 G A) eps1^2
    psi = lem_potential([0.1, 0, 0, 0, 0, 0], GEOM, MAT)
    assert psi == pytest.approx(0.5 * (5.0 / 6.0) * 25.0 * np.pi * 0.01, rel=1e-12)
    assert psi == pytest.approx(0.32724923474893686, rel=1e-12)


def test_lem_stress_values():
    q = lem_stress(np.zeros(6), GEOM, MAT)
    assert np.all(q.as_vector() == 0.0)
    q = lem_stress([0, 0, 0.1, 0, 0, 0], GEOM, MAT)
    assert q.n[2] == pytest.approx(70.0 * np.pi * 0.1, rel=1e-12)
    assert q.n[2] == pytest.approx(21.991148575128552, rel=1e-12)
    q = lem_stress([0.1, 0, 0, 0, 0, 0], GEOM, MAT)
    assert q.n[0] == pytest.approx(6.5449846949787372, rel=1e-12)
    assert np.abs(np.concatenate([q.n[1:], q.m])).max() == 0.0
    q = lem_stress([0, 0, 0, 0.3, 0, 0], GEOM, MAT)
    assert q.m[0] == pytest.approx(70.0 * np.pi / 4.0 * 0.3, rel=1e-12)
    assert q.m[0] == pytest.approx(16.493361431346415, rel=1e-12)


def test_lem_stiffness_structure():
    c = lem_stiffness(GEOM, MAT)
    assert np.allclose(c, c.T)
    assert np.allclose(c - np.diag(np.diag(c)), 0.0)
    diag = np.diag(c)
    expected = [
        5.0 / 6.0 * 25.0 * np.pi,
        5.0 / 6.0 * 25.0 * np.pi,
        70.0 * np.pi,
        70.0 * np.pi / 4.0,
        70.0 * np.pi / 4.0,
        25.0 * np.pi / 2.0,
    ]
    assert diag == pytest.approx(expected, rel=1e-12)


def test_stress_is_gradient_of_potential():
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(100):
        p = rng.uniform(-0.5, 0.5, 6)
        q = lem_stress(p, GEOM, MAT).as_vector()
        fd = np.empty(6)
        for i in range(6):
            dp = np.zeros(6)
            dp[i] = h
            fd[i] = (
                lem_potential(p + dp, GEOM, MAT) - lem_potential(p - dp, GEOM, MAT)
            ) / (2.0 * h)
        assert np.abs(q - fd).max() <= 1e-6 * max(np.abs(q).max(), 1.0)


def test_stiffness_is_jacobian_of_stress():
    rng = np.random.default_rng(5)
    c = lem_stiffness(GEOM, MAT)
    h = 1e-6
    for _ in range(10):
        p = rng.uniform(-0.5, 0.5, 6)
        fd = np.empty((6, 6))
        for i in range(6):
            dp = np.zeros(6)
            dp[i] = h
            fd[:, i] = (
                lem_stress(p + dp, GEOM, MAT).as_vector()
                - lem_stress(p - dp, GEOM, MAT).as_vector()
            ) / (2.0 * h)
        assert np.abs(c - fd).max() <= 1e-6 * np.abs(c).max()


def test_quadratic_scaling():
    rng = np.random.default_rng(6)
    for _ in range(20):
        p = rng.uniform(-0.5, 0.5, 6)
        alpha = rng.uniform(0.1, 3.0)
        assert lem_potential(alpha * p, GEOM, MAT) == pytest.approx(
            alpha**2 * lem_potential(p, GEOM, MAT), rel=1e-12
        )


def test_strain_state_round_trip():
    p = StrainState(eps=[0.1, 0.2, 0.3], kappa=[0.4, 0.5, 0.6])
    assert np.array_equal(p.as_vector(), [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert np.array_equal(StrainState.from_vector(p.as_vector()).eps, p.eps)
    with pytest.raises(ValueError):
        StrainState(eps=[np.inf, 0, 0], kappa=[0, 0, 0])
