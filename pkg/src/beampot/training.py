"""Calibration of neural beam potentials on stress-resultant data.

The loss is a weighted squared error over predicted stress resultants,

    L = 1/(6 n) sum_i sum_j w_ij sum_k | q_i^jk - q_i(p^jk) |^2,

with one weight per stress component and (R, P) group and n the number of
groups. Since the prediction is the gradient of the network with respect to
its inputs, the loss is a Sobolev-type objective: its parameter gradient
requires mixed second derivatives of the layered map. These are computed in
closed form by differentiating the forward tangent sweep

    phi(x, u) = u . grad_x N(x)

with respect to every weight and bias (reverse pass over the tangent
computation), which also covers the parameter dependence of the stress
projection offsets (a phi term evaluated at the zero-strain input).
Optimization uses Adam with shuffled mini-batches; the returned model
carries the weights with the best recorded validation loss.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from beampot.data import Dataset, compute_weights
from beampot.pann import Layer, PannModel, batch_value_and_grad

_SUPPORTED_DEPTH = 2  # hidden layers; the closed-form sweep is depth-checked


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer protocol: Adam with mini-batches and a tail decay.

    The learning rate stays at its initial value for ``lr_hold_frac`` of the
    epoch budget and then decays exponentially to ``lr_decay_to`` times the
    initial value; a constant rate leaves a mini-batch noise floor well
    above the reachable fit. Set ``lr_decay_to`` to 1 for a constant rate.
    """

    learning_rate: float = 0.002
    batch_size: int = 32
    max_epochs: int = 10000
    patience: int = 500
    seed: int = 0
    lr_hold_frac: float = 0.6
    lr_decay_to: float = 0.01

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.max_epochs, self.patience) <= 0:
            raise ValueError("training configuration values must be positive")
        if not 0.0 <= self.lr_hold_frac <= 1.0 or not 0.0 < self.lr_decay_to <= 1.0:
            raise ValueError("invalid learning-rate schedule")


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    final_train_loss: float = np.nan
    final_val_loss: float = np.nan
    wall_time: float = 0.0


@dataclass
class PreparedData:
    """Dataset rows mapped to network inputs for fast batched evaluation.

    ``jac`` holds the per-row effective Jacobian mapping strain variations
    to input variations, including the variant map and any geometric
    scaling; ``zero_index`` keys each row to its zero-strain input (one per
    section ratio). ``mask`` selects the input slots whose zero-state
    gradient is projected out of the stress prediction.
    """

    x: np.ndarray  # (n, d_in)
    jac: np.ndarray  # (n, d_in, 6)
    targets: np.ndarray  # (n, 6)
    weights: np.ndarray  # (n, 6) per-row loss weights
    zero_index: np.ndarray  # (n,)
    zero_x: np.ndarray  # (g, d_in)
    mask: np.ndarray  # (d_in,)
    n_groups: int

    def __len__(self):
        return self.x.shape[0]


# columnwise powers of lam in the effective Jacobian lam^2 J(p_ref) D_lam
_LAM_EXP = np.array([2.0, 2.0, 2.0, 3.0, 3.0, 3.0])


def prepare_rows(model: PannModel, ds: Dataset, weights: dict) -> PreparedData:
    """Precompute network inputs, Jacobians, and weights for a dataset.

    Rows whose radius differs from the model's reference radius are fed
    through the scaling map: the reference strain is (eps, lam kappa) with
    lam = R / R_ref, and the prediction is scaled componentwise, which shows
    up here as a lam^2 diag(1,1,1,lam,lam,lam) factor in the Jacobian.
    """
    if not ds.rows:
        raise ValueError("empty dataset")
    xs, jacs, zero_keys = [], [], []
    targets = np.array([row.q for row in ds.rows])
    w_rows = np.empty((len(ds.rows), 6))
    zero_map: dict = {}
    for k, row in enumerate(ds.rows):
        if row.group not in weights:
            raise ValueError(f"no loss weight for group {row.group}")
        w_rows[k] = weights[row.group]
        lam = row.radius / model.r_ref
        ratio = row.ratio if model.parameterized else None
        pv = row.p.copy()
        pv[3:] *= lam
        x, jac_strain = model.network_input(pv, ratio)
        xs.append(x)
        jacs.append(jac_strain * (lam**_LAM_EXP)[None, :] if lam != 1.0 else jac_strain)
        if ratio not in zero_map:
            x0, _ = model.network_input(np.zeros(6), ratio)
            zero_map[ratio] = (len(zero_map), x0)
        zero_keys.append(zero_map[ratio][0])
    return PreparedData(
        x=np.array(xs),
        jac=np.array(jacs),
        targets=targets,
        weights=w_rows,
        zero_index=np.array(zero_keys, dtype=np.int64),
        zero_x=np.array([v[1] for v in zero_map.values()]),
        mask=model.linear_mask(),
        n_groups=len(ds.groups()),
    )


def _predict(layers, data: PreparedData, idx=None) -> np.ndarray:
    """Predicted stress resultants for the selected rows."""
    if idx is None:
        idx = slice(None)
    _, grads = batch_value_and_grad(layers, data.x[idx])
    _, grads0 = batch_value_and_grad(layers, data.zero_x)
    shifted = grads - (data.mask * grads0)[data.zero_index[idx]]
    return np.einsum("rdi,rd->ri", data.jac[idx], shifted)


def _loss_from_errors(err: np.ndarray, weights: np.ndarray, n_groups: int) -> float:
    return float((weights * err**2).sum() / (6.0 * n_groups))


def sobolev_loss(model: PannModel, ds: Dataset, weights: dict | None = None) -> float:
    """Weighted stress-error loss of a model over a dataset."""
    if weights is None:
        weights = compute_weights(ds)
    data = prepare_rows(model, ds, weights)
    err = _predict(model.layers, data) - data.targets
    return _loss_from_errors(err, data.weights, data.n_groups)


# -- closed-form parameter gradient ----------------------------------------------


def _phi_param_grad(layers, x: np.ndarray, u: np.ndarray) -> list:
    """Parameter gradient of sum_rows u_r . grad_x N(x_r).

    Forward pass propagates the directional tangent (zdot, adot) alongside
    the activations; the reverse pass accumulates exact adjoints of both
    streams into per-layer (dW, db) pairs. Softplus first and second
    derivatives enter through the tangent of the activation.
    """
    acts = [x]
    tangents = [u]
    s1_list, s2_list, zdot_list = [], [], []
    a, adot = x, u
    for layer in layers[:-1]:
        z = a @ layer.weight.T + layer.bias
        zdot = adot @ layer.weight.T
        s1 = expit(z)
        s2 = s1 * (1.0 - s1)
        a = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
        adot = s1 * zdot
        acts.append(a)
        tangents.append(adot)
        s1_list.append(s1)
        s2_list.append(s2)
        zdot_list.append(zdot)

    out = layers[-1]
    grads = [None] * len(layers)
    grads[-1] = (tangents[-1].sum(axis=0)[None, :], np.zeros(1))
    a_bar = np.zeros_like(acts[-1])
    adot_bar = np.broadcast_to(out.weight, tangents[-1].shape).copy()

    for h in range(len(layers) - 2, -1, -1):
        s1, s2, zdot = s1_list[h], s2_list[h], zdot_list[h]
        z_bar = s1 * a_bar + s2 * zdot * adot_bar
        zdot_bar = s1 * adot_bar
        grads[h] = (
            z_bar.T @ acts[h] + zdot_bar.T @ tangents[h],
            z_bar.sum(axis=0),
        )
        layer = layers[h]
        a_bar = z_bar @ layer.weight
        adot_bar = zdot_bar @ layer.weight
    return grads


def _loss_and_grad(layers, data: PreparedData, idx) -> tuple[float, list]:
    err = _predict(layers, data, idx) - data.targets[idx]
    w = data.weights[idx]
    loss = _loss_from_errors(err, w, data.n_groups)

    v = (2.0 / (6.0 * data.n_groups)) * w * err  # (B, 6)
    u_rows = np.einsum("rdi,ri->rd", data.jac[idx], v)
    # projection offset: the same directions, masked and pooled per ratio
    u_zero = np.zeros_like(data.zero_x)
    np.add.at(u_zero, data.zero_index[idx], u_rows)
    u_zero = -data.mask * u_zero

    x_all = np.vstack([data.x[idx], data.zero_x])
    u_all = np.vstack([u_rows, u_zero])
    return loss, _phi_param_grad(layers, x_all, u_all)


def loss_param_gradient(
    model: PannModel, data: PreparedData, idx=None
) -> tuple[float, list]:
    """Batch loss and its exact gradient over every weight and bias.

    The residual enters twice: through the gradient of the network at the
    row inputs and, with opposite sign, through the stress projection
    offset at the zero-strain inputs (accumulated per offset group since
    phi is linear in the direction).
    """
    if len(model.layers) - 1 > _SUPPORTED_DEPTH:
        raise ValueError(f"parameter gradients support at most {_SUPPORTED_DEPTH} hidden layers")
    if idx is None:
        idx = np.arange(len(data))
    return _loss_and_grad(model.layers, data, idx)


# -- Adam -------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_layers(cls, layers) -> "AdamState":
        return cls(
            m=[(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in layers],
            v=[(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in layers],
        )


def adam_step(state: AdamState, layers, grads, lr: float) -> None:
    """One Adam update in place: moment accumulation with bias correction."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for layer, (gw, gb), (mw, mb), (vw, vb) in zip(layers, grads, state.m, state.v):
        mw *= b1
        mw += (1.0 - b1) * gw
        mb *= b1
        mb += (1.0 - b1) * gb
        vw *= b2
        vw += (1.0 - b2) * gw**2
        vb *= b2
        vb += (1.0 - b2) * gb**2
        layer.weight -= lr * (mw / c1) / (np.sqrt(vw / c2) + state.eps)
        layer.bias -= lr * (mb / c1) / (np.sqrt(vb / c2) + state.eps)


# -- training loop ----------------------------------------------------------------


def train(
    model: PannModel,
    train_ds: Dataset,
    val_ds: Dataset | None,
    cfg: TrainConfig | None = None,
    weights: dict | None = None,
) -> tuple[PannModel, TrainReport]:
    """Calibrate the model; returns the best-validation snapshot and a report.

    Loss weights default to the training set's inverse mean squares and are
    reused for the validation loss. Without a validation set there is no
    early stopping and the final weights are returned. Deterministic for a
    fixed seed and single-threaded execution.
    """
    cfg = cfg or TrainConfig()
    if weights is None:
        weights = compute_weights(train_ds)
    data = prepare_rows(model, train_ds, weights)
    val_data = prepare_rows(model, val_ds, weights) if val_ds is not None else None

    rng = np.random.default_rng(cfg.seed)
    layers = [l.copy() for l in model.layers]
    adam = AdamState.for_layers(layers)
    report = TrainReport()
    best_val = np.inf
    best_layers = [l.copy() for l in layers]
    started = time.perf_counter()

    if len(layers) - 1 > _SUPPORTED_DEPTH:
        raise ValueError(f"training supports at most {_SUPPORTED_DEPTH} hidden layers")
    n = len(data)
    hold = int(cfg.lr_hold_frac * cfg.max_epochs)
    gamma = cfg.lr_decay_to ** (1.0 / max(cfg.max_epochs - hold, 1))
    lr = cfg.learning_rate
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = _loss_and_grad(layers, data, idx)
            adam_step(adam, layers, grads, lr)
            epoch_loss += loss * idx.size
        if epoch >= hold:
            lr *= gamma
        report.train_loss.append(epoch_loss / n)

        if val_data is not None:
            err = _predict(layers, val_data) - val_data.targets
            val_loss = _loss_from_errors(err, val_data.weights, val_data.n_groups)
            report.val_loss.append(val_loss)
            if val_loss < best_val:
                best_val = val_loss
                report.best_epoch = epoch
                best_layers = [l.copy() for l in layers]
            elif epoch - report.best_epoch >= cfg.patience:
                break
        else:
            report.best_epoch = epoch
            best_layers = layers

    final = PannModel(
        variant=model.variant,
        layers=[l.copy() for l in best_layers],
        parameterized=model.parameterized,
        r_ref=model.r_ref,
        p_value=model.p_value,
    )
    report.final_train_loss = sobolev_loss(final, train_ds, weights)
    if val_ds is not None:
        report.final_val_loss = sobolev_loss(final, val_ds, weights)
    report.wall_time = time.perf_counter() - started
    return final, report


def reflected_dataset(ds: Dataset) -> Dataset:
    """Point-symmetric image of a dataset: negate (eps1, eps2, kappa1, kappa2)
    and the conjugate (n1, n2, m1, m2)."""
    from beampot.data import DatasetRow

    flip = np.array([-1.0, -1.0, 1.0, -1.0, -1.0, 1.0])
    out = Dataset()
    for row in ds.rows:
        out.rows.append(
            DatasetRow(
                p=row.p * flip,
                q=row.q * flip,
                psi=row.psi,
                radius=row.radius,
                ratio=row.ratio,
                path_id=row.path_id,
                step_id=row.step_id,
            )
        )
    return out
