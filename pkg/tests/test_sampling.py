import numpy as np
import pytest

from beampot.core import SectionGeometry
from beampot.sampling import (
    DEFAULT_LIMITS,
    SamplingConfig,
    admissible,
    build_paths,
    sample_directions,
)

GEOM = SectionGeometry(1.0)


def min_pairwise_angle(v):
    c = v @ v.T
    np.fill_diagonal(c, -1.0)
    return np.degrees(np.arccos(np.clip(c.max(), -1.0, 1.0)))


def test_directions_unit_norm():
    v = sample_directions(16, seed=0)
    assert np.abs(np.linalg.norm(v, axis=1) - 1.0).max() < 1e-12


def test_two_directions_well_separated():
    v = sample_directions(2, seed=3)
    assert abs(v[0] @ v[1]) <= 1.0  # antipodal or otherwise separated
    assert v[0] @ v[1] < 0.999


def test_directions_beat_iid_separation():
    optimized, iid = [], []
    for seed in range(10):
        optimized.append(min_pairwise_angle(sample_directions(64, seed=seed)))
        rng = np.random.default_rng(1000 + seed)
        u = rng.standard_normal((64, 6))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        iid.append(min_pairwise_angle(u))
    assert np.median(optimized) > np.median(iid)


def test_directions_balanced():
    v = sample_directions(64, seed=1)
    assert np.linalg.norm(v.mean(axis=0)) < 0.15


def test_directions_deterministic():
    assert np.array_equal(sample_directions(32, seed=9), sample_directions(32, seed=9))


def test_admissible_examples():
    assert admissible(np.zeros(6), GEOM)
    assert admissible([0, 0, -0.99, 0, 0, 0], GEOM)  # det = 0.01 > 0
    assert not admissible([0, 0, -1.1, 0, 0, 0], GEOM)
    # full-turn bending of the L=10 beam: det = 1 +- 0.628 at the corners
    assert admissible([0, 0, 0, 2 * np.pi / 10, 0, 0], GEOM)
    assert not admissible([0, 0, -0.5, 2 * np.pi / 10, 0, 0], GEOM)


def test_build_paths_unperturbed():
    cfg = SamplingConfig(n_directions=4, amplitudes=np.array([0.1, 0.2]), perturbation=0.0, seed=2)
    paths = build_paths(cfg)
    directions = sample_directions(4, seed=2)
    for direction, path in zip(directions, paths):
        for state, t in zip(path, [0.1, 0.2]):
            assert np.allclose(state.as_vector(), t * direction, atol=1e-15)


def test_build_paths_perturbation_norm():
    cfg = SamplingConfig(
        n_directions=8,
        amplitudes=np.array([0.3]),
        perturbation=0.1,
        seed=4,
        limits=np.array([[-10, 10]] * 6, dtype=float),
    )
    for path in build_paths(cfg):
        for state in path:
            norm = np.linalg.norm(state.as_vector())
            assert 0.9 * 0.3 - 1e-12 <= norm <= 1.1 * 0.3 + 1e-12


def test_build_paths_respect_limits_and_admissibility():
    cfg = SamplingConfig(n_directions=32, perturbation=0.1, seed=5)
    lo, hi = DEFAULT_LIMITS[:, 0], DEFAULT_LIMITS[:, 1]
    for path in build_paths(cfg, geom=GEOM):
        for state in path:
            p = state.as_vector()
            assert np.all(p >= lo - 1e-12) and np.all(p <= hi + 1e-12)
            assert admissible(p, GEOM)


def test_build_paths_deterministic():
    cfg = SamplingConfig(n_directions=6, perturbation=0.1, seed=11)
    a = build_paths(cfg, geom=GEOM)
    b = build_paths(cfg, geom=GEOM)
    assert len(a) == len(b)
    for pa, pb in zip(a, b):
        assert len(pa) == len(pb)
        for sa, sb in zip(pa, pb):
            assert np.array_equal(sa.as_vector(), sb.as_vector())


def test_directions_independent_of_amplitudes():
    cfg_a = SamplingConfig(n_directions=6, amplitudes=np.array([0.1]), perturbation=0.0, seed=7)
    cfg_b = SamplingConfig(n_directions=6, amplitudes=np.array([0.05, 0.15]), perturbation=0.0, seed=7)
    paths_a = build_paths(cfg_a)
    paths_b = build_paths(cfg_b)
    for pa, pb in zip(paths_a, paths_b):
        da = pa[0].as_vector() / np.linalg.norm(pa[0].as_vector())
        db = pb[0].as_vector() / np.linalg.norm(pb[0].as_vector())
        assert np.allclose(da, db, atol=1e-12)


def test_invalid_config_rejected():
    with pytest.raises(ValueError):
        SamplingConfig(perturbation=-0.1)
    with pytest.raises(ValueError):
        sample_directions(1)
