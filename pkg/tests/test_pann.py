import numpy as np
import pytest

from beampot.core import MaterialParams, SectionGeometry, lem_stress
from beampot.pann import (
    Layer,
    PannModel,
    load_model,
    mlp_eval,
    new_model,
    pann_energy,
    pann_evaluate,
    pann_stiffness,
    pann_stress,
    reflect,
    save_model,
    scaled_eval,
    softplus_stable,
    ti_invariants,
)

ALL_VARIANTS = [("plain", False), ("sym", False), ("ti", False),
                ("plain", True), ("sym", True), ("ti", True)]


def test_softplus_values():
    v, d1, d2 = softplus_stable(np.array([0.0, 50.0, -50.0, 700.0]))
    assert v[0] == pytest.approx(np.log(2.0))
    assert v[1] == pytest.approx(50.0)
    assert v[2] == pytest.approx(0.0, abs=1e-20)
    assert np.isfinite(v[3]) and v[3] == pytest.approx(700.0)
    assert d1[0] == pytest.approx(0.5)
    assert d2[0] == pytest.approx(0.25)


def test_mlp_zero_weights():
    layers = [
        Layer(np.zeros((4, 6)), np.zeros(4)),
        Layer(np.zeros((1, 4)), np.array([2.0])),
    ]
    value, grad, hess = mlp_eval(layers, np.ones(6))
    assert value == pytest.approx(2.0)
    assert np.all(grad == 0.0)
    assert np.all(hess == 0.0)


def test_mlp_single_neuron_composition():
    w1 = np.zeros((1, 6))
    w1[0, 0] = 1.0
    layers = [Layer(w1, np.zeros(1)), Layer(np.array([[1.0]]), np.zeros(1))]
    x = np.array([0.7, 0, 0, 0, 0, 0])
    value, grad, _ = mlp_eval(layers, x)
    sp, logistic, _ = softplus_stable(np.array([0.7]))
    assert value == pytest.approx(sp[0])
    assert grad[0] == pytest.approx(logistic[0])


def test_mlp_derivatives_match_fd():
    rng = np.random.default_rng(0)
    model = new_model("plain", hidden=(32,), seed=2)
    x = rng.uniform(-1, 1, 6)
    value, grad, hess = mlp_eval(model.layers, x)
    h = 1e-6
    fd_grad = np.empty(6)
    fd_hess = np.empty((6, 6))
    for i in range(6):
        dx = np.zeros(6)
        dx[i] = h
        vp, gp, _ = mlp_eval(model.layers, x + dx)
        vm, gm, _ = mlp_eval(model.layers, x - dx)
        fd_grad[i] = (vp - vm) / (2 * h)
        fd_hess[:, i] = (gp - gm) / (2 * h)
    assert np.abs(grad - fd_grad).max() <= 1e-6 * max(np.abs(grad).max(), 1.0)
    assert np.abs(hess - fd_hess).max() <= 1e-4 * max(np.abs(hess).max(), 1.0)


@pytest.mark.parametrize("variant,parameterized", ALL_VARIANTS)
def test_normalization_exact(variant, parameterized):
    model = new_model(variant, hidden=(16, 8), parameterized=parameterized, seed=1)
    ratios = np.linspace(0.0, 0.5, 11) if parameterized else [None]
    for ratio in ratios:
        assert pann_energy(model, np.zeros(6), ratio) == 0.0
        assert np.linalg.norm(pann_stress(model, np.zeros(6), ratio).as_vector()) < 1e-12


@pytest.mark.parametrize("variant,parameterized", ALL_VARIANTS)
def test_derivatives_match_fd(variant, parameterized):
    rng = np.random.default_rng(3)
    model = new_model(variant, hidden=(8, 8), parameterized=parameterized, seed=4)
    ratio = 0.25 if parameterized else None
    h = 1e-6
    for _ in range(5):
        p = rng.uniform(-0.4, 0.4, 6)
        if variant == "sym" and abs(p[0] + p[1] + p[3] + p[4]) < 0.05:
            p[0] += 0.1  # stay away from the reflection hyperplane
        q = pann_stress(model, p, ratio).as_vector()
        c = pann_stiffness(model, p, ratio)
        fd_q = np.empty(6)
        fd_c = np.empty((6, 6))
        for i in range(6):
            dp = np.zeros(6)
            dp[i] = h
            fd_q[i] = (pann_energy(model, p + dp, ratio) - pann_energy(model, p - dp, ratio)) / (2 * h)
            fd_c[:, i] = (
                pann_stress(model, p + dp, ratio).as_vector()
                - pann_stress(model, p - dp, ratio).as_vector()
            ) / (2 * h)
        assert np.abs(q - fd_q).max() <= 1e-6 * max(np.abs(q).max(), 1e-3)
        assert np.abs(c - fd_c).max() <= 1e-5 * max(np.abs(c).max(), 1e-3)
        assert np.abs(c - c.T).max() < 1e-12 * max(np.abs(c).max(), 1.0)


def test_reflect_rules():
    pt, flipped = reflect([0.1, -0.2, 0.3, 0.4, -0.5, 0.6])
    assert flipped
    assert np.allclose(pt, [-0.1, 0.2, 0.3, -0.4, 0.5, 0.6])
    # exactly on the hyperplane: unchanged (the >= branch)
    pt, flipped = reflect([0.1, -0.1, 0.5, 0.2, -0.2, 0.3])
    assert not flipped
    assert np.allclose(pt, [0.1, -0.1, 0.5, 0.2, -0.2, 0.3])
    # idempotent after one application
    pt2, flipped2 = reflect(pt)
    assert not flipped2
    assert np.array_equal(pt, pt2)


def test_point_symmetry_exact():
    model = new_model("sym", hidden=(16,), seed=5)
    rng = np.random.default_rng(6)
    flip = np.array([-1.0, -1.0, 1.0, -1.0, -1.0, 1.0])
    for _ in range(10):
        p = rng.uniform(-0.5, 0.5, 6)
        assert pann_energy(model, p * flip) == pann_energy(model, p)
        q = pann_stress(model, p).as_vector()
        q_r = pann_stress(model, p * flip).as_vector()
        assert np.array_equal(q_r, q * flip)
        c = pann_stiffness(model, p)
        c_r = pann_stiffness(model, p * flip)
        assert np.allclose(c_r, np.diag(flip) @ c @ np.diag(flip), atol=0.0)


def test_ti_invariant_examples():
    inv, _, _ = ti_invariants([0, 0, 2.0, 0, 0, 3.0])
    assert np.allclose(inv, [0, 2.0, 0, 0, 0, 9.0, 0])
    inv, _, _ = ti_invariants([1, 0, 0, 0, 1, 0])
    assert inv[4] == pytest.approx(1.0)
    rng = np.random.default_rng(20)
    for _ in range(20):
        inv, _, _ = ti_invariants(rng.uniform(-1, 1, 6))
        assert np.all(inv[[0, 2, 3, 5]] >= 0.0)


def test_ti_invariant_derivatives_fd():
    rng = np.random.default_rng(7)
    h = 1e-7
    p = rng.uniform(-1, 1, 6)
    _, jac, hess = ti_invariants(p)
    for i in range(6):
        dp = np.zeros(6)
        dp[i] = h
        ip, jp, _ = ti_invariants(p + dp)
        im, jm, _ = ti_invariants(p - dp)
        assert np.abs(jac[:, i] - (ip - im) / (2 * h)).max() < 1e-8
        assert np.abs(hess[:, :, i] - (jp - jm) / (2 * h)).max() < 1e-6


def test_ti_symmetries():
    model = new_model("ti", hidden=(8,), seed=8)
    rng = np.random.default_rng(9)
    flip = np.array([-1.0, -1.0, 1.0, -1.0, -1.0, 1.0])
    for _ in range(20):
        p = rng.uniform(-0.5, 0.5, 6)
        angle = rng.uniform(0, 2 * np.pi)
        base = pann_energy(model, p)
        assert pann_energy(model, p * flip) == pytest.approx(base, abs=1e-10)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        p_rot = p.copy()
        p_rot[:2] = rot @ p[:2]
        p_rot[3:5] = rot @ p[3:5]
        assert pann_energy(model, p_rot) == pytest.approx(base, abs=1e-10)


def test_scaled_eval_identity_and_normalization():
    model = new_model("sym", hidden=(8,), seed=10)
    rng = np.random.default_rng(11)
    p = rng.uniform(-0.3, 0.3, 6)
    psi, q, c = scaled_eval(model, p, 1.0)
    psi0, q0, c0 = pann_evaluate(model, p)
    assert psi == psi0 and np.array_equal(q, q0) and np.array_equal(c, c0)
    psi_z, q_z, _ = scaled_eval(model, np.zeros(6), 0.3)
    assert psi_z == 0.0
    assert np.linalg.norm(q_z) < 1e-12
    with pytest.raises(ValueError):
        scaled_eval(model, p, -1.0)


def test_scaled_eval_exact_scaling_law():
    model = new_model("sym", hidden=(8,), seed=12)
    rng = np.random.default_rng(13)
    for lam in (0.1, 0.5, 2.0):
        p_scaled = rng.uniform(-0.2, 0.2, 6)
        p_ref = p_scaled.copy()
        p_ref[3:] *= lam
        psi_l, q_l, c_l = scaled_eval(model, p_scaled, lam)
        psi, q, c = pann_evaluate(model, p_ref)
        assert psi_l == lam**2 * psi
        assert np.array_equal(q_l[:3], lam**2 * q[:3])
        assert np.array_equal(q_l[3:], lam**3 * q[3:])
        assert np.allclose(c_l[:3, :3], lam**2 * c[:3, :3], atol=0.0)
        assert np.allclose(c_l[3:, 3:], lam**4 * c[3:, 3:], atol=0.0)


def test_scaled_bending_reproduces_moment_of_inertia_law():
    # fit the linear-elastic response on pure bending, then check that the
    # scaled model reproduces the R^4 dependence of the bending stiffness
    from beampot.data import Dataset, DatasetRow
    from beampot.training import TrainConfig, train

    geom = SectionGeometry(1.0)
    mat = MaterialParams(70.0, 0.4)
    ds = Dataset()
    for k, kappa in enumerate(np.linspace(-0.3, 0.3, 41)):
        p = np.array([0, 0, 0, kappa, 0, 0])
        ds.rows.append(
            DatasetRow(p=p, q=lem_stress(p, geom, mat).as_vector(), psi=0.0,
                       radius=1.0, ratio=0.0, path_id=k, step_id=0)
        )
    # inverse-mean-square weight on the live component; the dead components
    # of this synthetic path would otherwise hit the degenerate floor
    msq = np.mean([r.q[3] ** 2 for r in ds.rows])
    weights = {(1.0, 0.0): np.array([1, 1, 1, 1 / msq, 1, 1])}
    model = new_model("plain", hidden=(32,), seed=14)
    fitted, _ = train(
        model, ds, None,
        TrainConfig(max_epochs=8000, batch_size=4, seed=14),
        weights=weights,
    )
    lam, kappa_scaled = 0.1, 1.0
    _, q_l, _ = scaled_eval(fitted, [0, 0, 0, kappa_scaled, 0, 0], lam)
    expected = 70.0 * np.pi / 4.0 * lam**4 * kappa_scaled  # E I(lam R) kappa
    assert q_l[3] == pytest.approx(expected, rel=0.02)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(15)
    for variant, parameterized in ALL_VARIANTS[:4]:
        model = new_model(variant, hidden=(8, 4), parameterized=parameterized, seed=16)
        path = tmp_path / f"{variant}_{parameterized}.json"
        save_model(model, path)
        loaded = load_model(path)
        for _ in range(100):
            p = rng.uniform(-0.5, 0.5, 6)
            ratio = rng.uniform(0.0, 0.5) if parameterized else None
            assert pann_energy(loaded, p, ratio) == pann_energy(model, p, ratio)
            assert np.array_equal(
                pann_stress(loaded, p, ratio).as_vector(),
                pann_stress(model, p, ratio).as_vector(),
            )


def test_load_rejects_bad_files(tmp_path):
    model = new_model("sym", hidden=(4,), seed=17)
    path = tmp_path / "model.json"
    save_model(model, path)
    text = path.read_text()
    truncated = tmp_path / "truncated.json"
    truncated.write_text(text[: len(text) // 2])
    with pytest.raises(ValueError):
        load_model(truncated)
    import json

    payload = json.loads(text)
    payload["variant"] = "unheard-of"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(payload))
    with pytest.raises(ValueError):
        load_model(bad)


def test_parameterized_model_requires_ratio():
    model = new_model("sym", hidden=(4,), parameterized=True, seed=18)
    with pytest.raises(ValueError):
        pann_energy(model, np.zeros(6), None)


def test_offsets_refresh_after_weight_change():
    model = new_model("plain", hidden=(4,), seed=19)
    model.layers[0].weight += 0.5
    model.refresh_offsets()
    assert pann_energy(model, np.zeros(6)) == 0.0
    assert np.linalg.norm(pann_stress(model, np.zeros(6)).as_vector()) < 1e-12
