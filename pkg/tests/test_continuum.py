import numpy as np
import pytest

from beampot.continuum import (
    CrossSectionPoint,
    ImpenetrabilityError,
    defgrad_deformable,
    defgrad_rigid,
    nh_energy,
    nh_energy_batch,
    nh_stress,
    nh_stress_batch,
    nh_tangent,
    nh_tangent_batch,
)
from beampot.core import MaterialParams
from beampot.rotations import exp_so3

MAT = MaterialParams(70.0, 0.4)


def test_defgrad_rigid_identity():
    assert np.allclose(defgrad_rigid(np.zeros(6), [0.3, -0.7]), np.eye(3))


def test_defgrad_rigid_axial():
    f = defgrad_rigid([0, 0, 0.1, 0, 0, 0], [0.0, 0.0])
    assert f[2, 2] == pytest.approx(1.1)
    assert np.linalg.det(f) == pytest.approx(1.1)


def test_defgrad_rigid_bending_sign_convention():
    # kappa1 = 0.3 at X = (0, 1): kappa x Xhat = (0.3,0,0) x (0,1,0) = (0,0,0.3)
    f = defgrad_rigid([0, 0, 0, 0.3, 0, 0], [0.0, 1.0])
    assert f[2, 2] == pytest.approx(1.3)
    f = defgrad_rigid([0, 0, 0, 0.3, 0, 0], [0.0, -1.0])
    assert f[2, 2] == pytest.approx(0.7)


def test_defgrad_deformable_reduces_to_rigid():
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = rng.uniform(-0.3, 0.3, 6)
        x = rng.uniform(-1, 1, 2)
        rigid = defgrad_rigid(p, x)
        deformable = defgrad_deformable(p, CrossSectionPoint.rigid(x))
        assert np.allclose(rigid, deformable, atol=1e-15)


def test_defgrad_deformable_pure_warping():
    # out-of-plane warping gradient enters as du3/dXalpha in the third row
    grad = np.array([[1.0, 0.0], [0.0, 1.0], [0.2, -0.1]])
    point = CrossSectionPoint(
        position=np.array([0.5, 0.5]),
        deformed=np.array([0.5, 0.5, 0.03]),
        grad=grad,
    )
    f = defgrad_deformable(np.zeros(6), point)
    expected = np.eye(3)
    expected[2, :2] = [0.2, -0.1]
    assert np.allclose(f, expected)


def test_nh_normalization():
    assert nh_energy(np.eye(3), MAT) == 0.0
    assert np.allclose(nh_stress(np.eye(3), MAT), 0.0)


def test_nh_simple_shear_energy():
    f = np.eye(3)
    f[0, 2] = 0.1
    assert np.linalg.det(f) == pytest.approx(1.0)
    assert nh_energy(f, MAT) == pytest.approx(25.0 / 2.0 * 0.01, rel=1e-12)


def test_nh_stress_matches_energy_gradient():
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(20):
        f = np.eye(3) + rng.uniform(-0.15, 0.15, (3, 3))
        if np.linalg.det(f) < 0.3:
            continue
        p = nh_stress(f, MAT)
        fd = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                df = np.zeros((3, 3))
                df[i, j] = h
                fd[i, j] = (nh_energy(f + df, MAT) - nh_energy(f - df, MAT)) / (2 * h)
        assert np.abs(p - fd).max() <= 1e-6 * np.abs(p).max()


def test_nh_tangent_matches_stress_jacobian():
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(5):
        f = np.eye(3) + rng.uniform(-0.15, 0.15, (3, 3))
        if np.linalg.det(f) < 0.3:
            continue
        a = nh_tangent(f, MAT)
        fd = np.empty((3, 3, 3, 3))
        for k in range(3):
            for l in range(3):
                df = np.zeros((3, 3))
                df[k, l] = h
                fd[:, :, k, l] = (nh_stress(f + df, MAT) - nh_stress(f - df, MAT)) / (2 * h)
        assert np.abs(a - fd).max() <= 1e-5 * np.abs(a).max()


def test_nh_rotation_invariance():
    rng = np.random.default_rng(3)
    f = np.eye(3) + rng.uniform(-0.1, 0.1, (3, 3))
    base = nh_energy(f, MAT)
    for _ in range(20):
        rot = exp_so3(rng.uniform(-np.pi, np.pi, 3))
        assert nh_energy(rot @ f, MAT) == pytest.approx(base, abs=1e-10)


def test_nh_rejects_inverted_state():
    f = np.diag([1.0, 1.0, -0.5])
    with pytest.raises(ImpenetrabilityError):
        nh_energy(f, MAT)
    with pytest.raises(ImpenetrabilityError):
        nh_stress(f, MAT)
    with pytest.raises(ImpenetrabilityError):
        nh_tangent(f, MAT)


def test_batch_consistency():
    rng = np.random.default_rng(4)
    fs = np.eye(3) + rng.uniform(-0.1, 0.1, (7, 3, 3))
    energies = nh_energy_batch(fs, MAT)
    stresses = nh_stress_batch(fs, MAT)
    tangents = nh_tangent_batch(fs, MAT)
    for k in range(7):
        assert energies[k] == pytest.approx(nh_energy(fs[k], MAT), rel=1e-14)
        assert np.allclose(stresses[k], nh_stress(fs[k], MAT), atol=1e-14)
        assert np.allclose(tangents[k], nh_tangent(fs[k], MAT), atol=1e-12)
