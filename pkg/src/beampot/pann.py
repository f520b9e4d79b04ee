"""Neural beam potentials with built-in normalization and symmetry.

A scalar feed-forward network (softplus hidden layers, linear output) maps a
strain-derived input to the potential. Projection terms subtract the
network's value and the linear part of its input response at zero strain so
energy and stress vanish in the reference state by construction:

    psi(p) = N(x(p)) - N(x0) - g0 . L x(p),   g0 = grad N(x0),

where x(p) is the variant's input map with strain-Jacobian J(p) = dx/dp and
L masks the input slots that are linear in the strain at zero:

    plain:  x = p                                   (L = identity)
    sym:    x = reflected p, hyperplane test        (L = identity)
    ti:     x = seven axis-rotation invariants      (L keeps only eps3)

The ti variant needs no projection for the other slots since those
invariants are at least quadratic. The stress projection lives in input
space; for the point-symmetric variant this makes the offset follow the
reflection, which keeps q(p) exactly point-symmetric. Stress resultants
q = J(p)^T (grad N(x) - L g0) and the stiffness Hessian are exact layered
chain-rule derivatives, never numerical.

Ring-parameterized models append the section ratio P to x (zero Jacobian
row, masked from L), making the projection offsets P-dependent. Geometric
scaling by lambda evaluates the reference model at (eps, lambda*kappa) and
scales energy, forces, moments, and stiffness blocks by lambda^2,
lambda^2/lambda^3, and lambda^2..lambda^4.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from beampot.core import StressResultants, as_strain_vector

VARIANTS = ("plain", "sym", "ti")
MODEL_FORMAT_VERSION = 1

_EYE6 = np.eye(6)


def softplus_stable(x):
    """Softplus with first and second derivatives, safe for large |x|.

    Value computed as max(x, 0) + log1p(exp(-|x|)); the derivatives are the
    logistic function and its derivative.
    """
    x = np.asarray(x, dtype=float)
    value = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    d1 = expit(x)
    return value, d1, d1 * (1.0 - d1)


@dataclass
class Layer:
    weight: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)

    def copy(self) -> "Layer":
        return Layer(self.weight.copy(), self.bias.copy())


def init_layers(dims, seed: int = 0) -> list:
    """Uniform Glorot initialization for the given layer dimension chain."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(
            Layer(
                weight=rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                bias=np.zeros(fan_out),
            )
        )
    return layers


def mlp_eval(layers, x) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, input-gradient, and input-Hessian of the scalar network.

    Propagates the Jacobian and Hessian of every layer output with respect
    to the network input through the affine and softplus maps; all
    derivatives are exact.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    if layers[0].weight.shape[1] != d:
        raise ValueError(
            f"input dimension {d} does not match first layer ({layers[0].weight.shape[1]})"
        )
    a = x
    ja = np.eye(d)
    ha = np.zeros((d, d, d))
    for k, layer in enumerate(layers):
        z = layer.weight @ a + layer.bias
        jz = layer.weight @ ja
        hz = np.einsum("ij,jkl->ikl", layer.weight, ha)
        if k < len(layers) - 1:
            s0, s1, s2 = softplus_stable(z)
            a = s0
            ja = s1[:, None] * jz
            ha = s1[:, None, None] * hz + s2[:, None, None] * jz[:, :, None] * jz[:, None, :]
        else:
            a, ja, ha = z, jz, hz
    if a.size != 1:
        raise ValueError("network output must be scalar")
    return float(a[0]), ja[0], ha[0]


def batch_value_and_grad(layers, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Network values and input-gradients for a batch of inputs (B, d)."""
    activations = [x]
    logistic = []
    a = x
    for layer in layers[:-1]:
        z = a @ layer.weight.T + layer.bias
        a = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
        logistic.append(expit(z))
        activations.append(a)
    out = layers[-1]
    values = (a @ out.weight.T + out.bias)[:, 0]
    g = np.broadcast_to(out.weight, (x.shape[0], out.weight.shape[1]))
    for layer, s1 in zip(reversed(layers[:-1]), reversed(logistic)):
        g = (g * s1) @ layer.weight
    return values, g


# -- variant input maps ---------------------------------------------------------


def reflect(p) -> tuple[np.ndarray, bool]:
    """Map a strain state to its point-symmetry representative.

    The hyperplane functional f = eps1 + eps2 + kappa1 + kappa2 selects the
    half-space: for f < 0 the components (eps1, eps2, kappa1, kappa2) are
    negated, otherwise the state is returned unchanged. The same sign
    pattern applies to (n1, n2, m1, m2) of the resulting stresses and to the
    mixed stiffness blocks.
    """
    pv = as_strain_vector(p).copy()
    if pv[0] + pv[1] + pv[3] + pv[4] < 0.0:
        pv[[0, 1, 3, 4]] *= -1.0
        return pv, True
    return pv, False


_SYM_SIGNS = np.array([-1.0, -1.0, 1.0, -1.0, -1.0, 1.0])


def ti_invariants(p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Transversely isotropic invariants with Jacobian (7,6) and Hessians (7,6,6)."""
    pv = as_strain_vector(p)
    e1, e2, e3, k1, k2, k3 = pv
    s = e1 * k1 + e2 * k2
    inv = np.array([e1**2 + e2**2, e3, s**2, k1**2 + k2**2, e1 * k2 - e2 * k1, k3**2, s * k3])

    ds = np.array([k1, k2, 0.0, e1, e2, 0.0])
    jac = np.zeros((7, 6))
    jac[0] = [2 * e1, 2 * e2, 0, 0, 0, 0]
    jac[1, 2] = 1.0
    jac[2] = 2.0 * s * ds
    jac[3] = [0, 0, 0, 2 * k1, 2 * k2, 0]
    jac[4] = [k2, -k1, 0.0, -e2, e1, 0.0]
    jac[5, 5] = 2.0 * k3
    jac[6] = k3 * ds
    jac[6, 5] += s

    hs = np.zeros((6, 6))
    hs[0, 3] = hs[3, 0] = 1.0
    hs[1, 4] = hs[4, 1] = 1.0

    hess = np.zeros((7, 6, 6))
    hess[0, 0, 0] = hess[0, 1, 1] = 2.0
    hess[2] = 2.0 * np.outer(ds, ds) + 2.0 * s * hs
    hess[3, 3, 3] = hess[3, 4, 4] = 2.0
    hess[4, 0, 4] = hess[4, 4, 0] = 1.0
    hess[4, 1, 3] = hess[4, 3, 1] = -1.0
    hess[5, 5, 5] = 2.0
    hess[6] = k3 * hs
    hess[6, :, 5] += ds
    hess[6, 5, :] += ds
    return inv, jac, hess


@dataclass
class PannModel:
    """Neural beam potential: architecture, weights, and projection offsets.

    ``p_value`` is the section ratio the model was trained for; when
    ``parameterized`` the ratio is a runtime input instead and the offsets
    are computed per query. Offsets must be refreshed after any weight
    change; construction does this automatically.
    """

    variant: str
    layers: list
    parameterized: bool = False
    r_ref: float = 1.0
    p_value: float = 0.0
    norm_energy: float | None = None
    norm_stress: np.ndarray | None = None
    _offset_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        dims = self.layer_dims()
        expected = self.strain_input_dim() + (1 if self.parameterized else 0)
        if dims[0] != expected:
            raise ValueError(f"first layer expects {dims[0]} inputs, variant needs {expected}")
        if dims[-1] != 1:
            raise ValueError("output layer must be scalar")
        self.refresh_offsets()

    def strain_input_dim(self) -> int:
        return 7 if self.variant == "ti" else 6

    def layer_dims(self) -> list:
        return [self.layers[0].weight.shape[1]] + [l.weight.shape[0] for l in self.layers]

    # -- input map -------------------------------------------------------------

    def strain_input(self, pv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Variant input x(p) and its strain-Jacobian dx/dp (without P slot)."""
        if self.variant == "plain":
            return pv, _EYE6
        if self.variant == "sym":
            ref, flipped = reflect(pv)
            jac = np.diag(_SYM_SIGNS) if flipped else _EYE6
            return ref, jac
        inv, jac, _ = ti_invariants(pv)
        return inv, jac

    def network_input(self, pv: np.ndarray, ratio: float | None) -> tuple[np.ndarray, np.ndarray]:
        """Full network input and (d_in, 6) Jacobian, appending P if parameterized."""
        x, jac = self.strain_input(pv)
        if self.parameterized:
            if ratio is None:
                raise ValueError("parameterized model needs the section ratio P")
            x = np.concatenate([x, [float(ratio)]])
            jac = np.vstack([jac, np.zeros((1, 6))])
        elif ratio is not None and not np.isclose(ratio, self.p_value):
            raise ValueError(
                f"model was built for P = {self.p_value}, got P = {ratio}"
            )
        return x, jac

    # -- projection offsets ------------------------------------------------------

    def linear_mask(self) -> np.ndarray:
        """Indicator of the input slots that are linear in the strain at zero."""
        mask = np.zeros(self.layers[0].weight.shape[1])
        if self.variant == "ti":
            mask[1] = 1.0  # only the eps3 invariant is linear
        else:
            mask[:6] = 1.0
        return mask

    def _compute_offsets(self, ratio: float | None) -> tuple[float, np.ndarray]:
        """Zero-state value and the masked input-space gradient L g0."""
        x0, _ = self.network_input(np.zeros(6), ratio)
        value, grad, _ = mlp_eval(self.layers, x0)
        return value, self.linear_mask() * grad

    def refresh_offsets(self) -> None:
        """Recompute the stored offsets from the current weights."""
        self._offset_cache.clear()
        if self.parameterized:
            self.norm_energy = None
            self.norm_stress = None
            return
        value, g0 = self._compute_offsets(None)
        self.norm_energy = -value
        # only the axial slot carries a projection for the invariant variant
        self.norm_stress = np.array([g0[1]]) if self.variant == "ti" else g0[:6].copy()

    def offsets(self, ratio: float | None) -> tuple[float, np.ndarray]:
        """Zero-state network value and masked input-space offset for P."""
        if not self.parameterized:
            g0 = np.zeros(self.layers[0].weight.shape[1])
            if self.variant == "ti":
                g0[1] = self.norm_stress[0]
            else:
                g0[:6] = self.norm_stress
            return -self.norm_energy, g0
        key = float(ratio)
        if key not in self._offset_cache:
            self._offset_cache[key] = self._compute_offsets(key)
        return self._offset_cache[key]


def pann_energy(model: PannModel, p, ratio: float | None = None) -> float:
    """Projected potential; exactly zero at p = 0 for every admissible P."""
    pv = as_strain_vector(p)
    x, _ = model.network_input(pv, ratio)
    value0, g0 = model.offsets(ratio)
    a = x
    for layer in model.layers[:-1]:
        z = layer.weight @ a + layer.bias
        a = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    out = model.layers[-1]
    return float((out.weight @ a + out.bias)[0]) - value0 - float(g0 @ x)


def pann_stress(model: PannModel, p, ratio: float | None = None) -> StressResultants:
    """Stress resultants as the exact gradient of the projected potential."""
    pv = as_strain_vector(p)
    x, jac = model.network_input(pv, ratio)
    _, g0 = model.offsets(ratio)
    _, grad, _ = mlp_eval(model.layers, x)
    return StressResultants.from_vector(jac.T @ (grad - g0))


def pann_stiffness(model: PannModel, p, ratio: float | None = None) -> np.ndarray:
    """Exact 6x6 Hessian of the projected potential; symmetric by construction."""
    pv = as_strain_vector(p)
    x, jac = model.network_input(pv, ratio)
    _, g0 = model.offsets(ratio)
    _, grad, hess = mlp_eval(model.layers, x)
    c = jac.T @ hess @ jac
    if model.variant == "ti":
        _, _, inv_hess = ti_invariants(pv)
        shifted = (grad - g0)[:7]
        c = c + np.einsum("k,kij->ij", shifted, inv_hess)
    return c


def pann_evaluate(
    model: PannModel, p, ratio: float | None = None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Energy, stress vector, and stiffness in one pass."""
    pv = as_strain_vector(p)
    x, jac = model.network_input(pv, ratio)
    value0, g0 = model.offsets(ratio)
    value, grad, hess = mlp_eval(model.layers, x)
    psi = value - value0 - float(g0 @ x)
    q = jac.T @ (grad - g0)
    c = jac.T @ hess @ jac
    if model.variant == "ti":
        _, _, inv_hess = ti_invariants(pv)
        shifted = (grad - g0)[:7]
        c = c + np.einsum("k,kij->ij", shifted, inv_hess)
    return psi, q, c


def scaled_eval(
    model: PannModel, p_scaled, lam: float, ratio: float | None = None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Evaluate a geometrically scaled section through the reference model.

    The reference strain is (eps, lam * kappa); energy scales by lam^2,
    forces by lam^2, moments by lam^3, and the stiffness blocks by
    lam^2, lam^3, lam^4.
    """
    if lam <= 0.0:
        raise ValueError(f"scaling factor must be positive, got {lam}")
    pv = as_strain_vector(p_scaled).copy()
    pv[3:] *= lam
    psi, q, c = pann_evaluate(model, pv, ratio)
    q_out = np.concatenate([lam**2 * q[:3], lam**3 * q[3:]])
    c_out = np.empty((6, 6))
    c_out[:3, :3] = lam**2 * c[:3, :3]
    c_out[:3, 3:] = lam**3 * c[:3, 3:]
    c_out[3:, :3] = lam**3 * c[3:, :3]
    c_out[3:, 3:] = lam**4 * c[3:, 3:]
    return lam**2 * psi, q_out, c_out


# -- persistence -----------------------------------------------------------------


def save_model(model: PannModel, path) -> None:
    payload = {
        "version": MODEL_FORMAT_VERSION,
        "variant": model.variant,
        "layer_dims": model.layer_dims(),
        "weights": [layer.weight.ravel().tolist() for layer in model.layers],
        "biases": [layer.bias.tolist() for layer in model.layers],
        "norm_energy": model.norm_energy,
        "norm_stress": None if model.norm_stress is None else model.norm_stress.tolist(),
        "R_ref": model.r_ref,
        "P_mode": "input" if model.parameterized else "fixed",
        "P_value": model.p_value,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path) -> PannModel:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"model file {path} is truncated or not valid JSON: {exc}") from exc
    for key in ("version", "variant", "layer_dims", "weights", "biases", "P_mode"):
        if key not in payload:
            raise ValueError(f"model file {path} lacks required field {key!r}")
    if payload["version"] != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {payload['version']}")
    if payload["variant"] not in VARIANTS:
        raise ValueError(f"unknown variant {payload['variant']!r} in {path}")
    if payload["P_mode"] not in ("input", "fixed"):
        raise ValueError(f"unknown P_mode {payload['P_mode']!r} in {path}")
    dims = payload["layer_dims"]
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = np.array(payload["weights"][k], dtype=float)
        b = np.array(payload["biases"][k], dtype=float)
        if w.size != fan_in * fan_out or b.size != fan_out:
            raise ValueError(f"layer {k} in {path} has inconsistent dimensions")
        layers.append(Layer(weight=w.reshape(fan_out, fan_in), bias=b))
    model = PannModel(
        variant=payload["variant"],
        layers=layers,
        parameterized=payload["P_mode"] == "input",
        r_ref=float(payload.get("R_ref", 1.0)),
        p_value=float(payload.get("P_value", 0.0)),
    )
    return model


def new_model(
    variant: str = "sym",
    hidden=(32,),
    parameterized: bool = False,
    seed: int = 0,
    r_ref: float = 1.0,
    p_value: float = 0.0,
) -> PannModel:
    """Fresh Glorot-initialized model of the requested architecture."""
    d_in = (7 if variant == "ti" else 6) + (1 if parameterized else 0)
    dims = [d_in, *hidden, 1]
    return PannModel(
        variant=variant,
        layers=init_layers(dims, seed=seed),
        parameterized=parameterized,
        r_ref=r_ref,
        p_value=p_value,
    )
