"""Static solver for geometrically exact rods with pluggable section laws.

The rod is discretized with two-node elements whose kinematics come from
the relative pose of the end nodes: with R_rel = R1^T R2 and the chord
d = R1^T (r2 - r1),

    kappa = log(R_rel) / h,      eps = J_l(theta)^-1 d / h - E3,

both constant along the element (the interpolation is the geodesic of the
pose group). Constant-strain elements represent helical states, and in
particular pure-moment bending, exactly; the element energy h psi(p) is
then exact as well, so equilibrium states of the continuum that lie in the
interpolation space solve the discrete problem to Newton tolerance.

Internal forces are the analytic gradient of the element energy through
the log-map tangents; element tangent stiffness is assembled by central
differences of that force (the residual itself stays exact). Nodal
rotations are stored as unit quaternions, updated multiplicatively and
renormalized every Newton step. Load stepping with bisection handles the
strongly nonlinear regimes (post-buckling).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from beampot.core import (
    MaterialParams,
    SectionGeometry,
    StrainState,
    lem_stiffness,
)
from beampot.pann import PannModel, pann_evaluate, scaled_eval
from beampot.rotations import (
    d_left_jacobian_inv_apply,
    exp_so3,
    left_jacobian_inv,
    log_so3,
    quat_from_rotvec,
    quat_identity,
    quat_multiply,
    quat_normalize,
    quat_to_rot,
    right_jacobian_inv,
    skew,
)


class BeamConvergenceError(RuntimeError):
    pass


class LemConstitutive:
    """Linear elastic section law: q = C p with the constant LEM matrix."""

    def __init__(self, geom: SectionGeometry, mat: MaterialParams):
        self.stiffness = lem_stiffness(geom, mat)

    def evaluate(self, p: np.ndarray):
        q = self.stiffness @ p
        return 0.5 * float(p @ q), q, self.stiffness


class PannConstitutive:
    """Neural beam potential as a section law, optionally geometrically scaled."""

    def __init__(self, model: PannModel, ratio: float | None = None, lam: float = 1.0):
        self.model = model
        self.ratio = ratio
        self.lam = lam

    def evaluate(self, p: np.ndarray):
        if self.lam != 1.0:
            return scaled_eval(self.model, p, self.lam, self.ratio)
        return pann_evaluate(self.model, p, self.ratio)


@dataclass
class BeamState:
    """Nodal centerline positions, orientations, and the arc-length grid."""

    positions: np.ndarray  # (N, 3)
    quaternions: np.ndarray  # (N, 4) unit, scalar first
    grid: np.ndarray  # (N,) strictly increasing arc length

    def copy(self) -> "BeamState":
        return BeamState(self.positions.copy(), self.quaternions.copy(), self.grid.copy())

    def rotation(self, node: int) -> np.ndarray:
        return quat_to_rot(self.quaternions[node])


def straight_state(length: float, n_elements: int) -> BeamState:
    grid = np.linspace(0.0, length, n_elements + 1)
    positions = np.zeros((n_elements + 1, 3))
    positions[:, 2] = grid
    quats = np.tile(quat_identity(), (n_elements + 1, 1))
    return BeamState(positions, quats, grid)


def initial_state(length: float, n_elements: int, pre_curvature: np.ndarray) -> BeamState:
    """Stress-free reference: straight, or a shallow arc for pre-curved rods.

    The arc has the prescribed constant curvature, so together with the
    matching curvature offset in the section law the initial state carries
    no stress; the geometric bow seeds a deterministic buckling direction.
    """
    if not np.any(pre_curvature):
        return straight_state(length, n_elements)
    state = straight_state(length, n_elements)
    kappa = np.asarray(pre_curvature, dtype=float)
    e3 = np.array([0.0, 0.0, 1.0])
    for node, s in enumerate(state.grid):
        rot = exp_so3(kappa * s)
        state.quaternions[node] = quat_from_rotvec(log_so3(rot))
        # integrate r' = R e3 for constant curvature: r = J_l(kappa s) (s e3)
        angle = kappa * s
        state.positions[node] = _left_jacobian(angle) @ (s * e3)
    return state


def _left_jacobian(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi)
    k = skew(phi)
    if angle < 1e-6:
        return np.eye(3) + 0.5 * k + (k @ k) / 6.0
    a = (1.0 - np.cos(angle)) / angle**2
    b = (angle - np.sin(angle)) / angle**3
    return np.eye(3) + a * k + b * (k @ k)


@dataclass(frozen=True)
class BeamBVP:
    """Clamped-left rod with a dead tip load or a prescribed tip displacement.

    ``tip_displacement`` moves the right end by the given vector over the
    load steps with its rotation clamped; otherwise the dead force/moment
    pair is ramped. ``pre_curvature`` shifts the stress-free curvature.
    """

    length: float
    n_elements: int = 16
    tip_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tip_moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tip_displacement: np.ndarray | None = None
    pre_curvature: np.ndarray = field(default_factory=lambda: np.zeros(3))
    load_steps: int = 10

    def __post_init__(self):
        if self.length <= 0 or self.n_elements < 1 or self.load_steps < 1:
            raise ValueError("invalid beam discretization or load stepping")


def element_strains(state: BeamState, element: int) -> np.ndarray:
    """Constant strain measures (eps, kappa) of one element."""
    n1, n2 = element, element + 1
    h = state.grid[n2] - state.grid[n1]
    r1 = quat_to_rot(state.quaternions[n1])
    r2 = quat_to_rot(state.quaternions[n2])
    rel = r1.T @ r2
    theta = log_so3(rel)
    d = r1.T @ (state.positions[n2] - state.positions[n1])
    eps = left_jacobian_inv(theta) @ d / h - np.array([0.0, 0.0, 1.0])
    return np.concatenate([eps, theta / h])


def strain_from_state(state: BeamState, s: float) -> StrainState:
    """Strain measures at arc-length position s (element-wise constant)."""
    if not state.grid[0] <= s <= state.grid[-1]:
        raise ValueError(f"s = {s} outside the rod [{state.grid[0]}, {state.grid[-1]}]")
    element = min(int(np.searchsorted(state.grid, s, side="right")) - 1, len(state.grid) - 2)
    element = max(element, 0)
    return StrainState.from_vector(element_strains(state, element))


def _element_force(state: BeamState, element: int, constitutive, kappa0: np.ndarray):
    """Analytic gradient of the element energy; returns (force (12,), psi, p)."""
    n1, n2 = element, element + 1
    h = state.grid[n2] - state.grid[n1]
    r1 = quat_to_rot(state.quaternions[n1])
    r2 = quat_to_rot(state.quaternions[n2])
    rel = r1.T @ r2
    theta = log_so3(rel)
    d = r1.T @ (state.positions[n2] - state.positions[n1])
    jl_inv = left_jacobian_inv(theta)
    eps = jl_inv @ d / h - np.array([0.0, 0.0, 1.0])
    kappa = theta / h

    p = np.concatenate([eps, kappa - kappa0])
    psi, q, _ = constitutive.evaluate(p)
    n_res, m_res = q[:3], q[3:]

    jr_inv = right_jacobian_inv(theta)
    a_th1 = -jr_inv @ rel.T  # d theta / d phi1
    a_th2 = jr_inv
    d_map = d_left_jacobian_inv_apply(theta, d) / h

    b = jl_inv @ r1.T / h
    de_r1, de_r2 = -b, b
    de_f1 = jl_inv @ skew(d) / h + d_map @ a_th1
    de_f2 = d_map @ a_th2

    force = np.empty(12)
    force[0:3] = h * (de_r1.T @ n_res)
    force[3:6] = h * (de_f1.T @ n_res + a_th1.T @ m_res / h)
    force[6:9] = h * (de_r2.T @ n_res)
    force[9:12] = h * (de_f2.T @ n_res + a_th2.T @ m_res / h)
    return force, h * psi, p


_FD_STEP = 1e-6


def _perturbed(state: BeamState, element: int, dof: int, sign: float) -> BeamState:
    out = state.copy()
    node = element + dof // 6
    local = dof % 6
    if local < 3:
        out.positions[node, local] += sign * _FD_STEP
    else:
        dphi = np.zeros(3)
        dphi[local - 3] = sign * _FD_STEP
        out.quaternions[node] = quat_normalize(
            quat_multiply(out.quaternions[node], quat_from_rotvec(dphi))
        )
    return out


def _element_tangent(state: BeamState, element: int, constitutive, kappa0):
    """Central-difference Jacobian of the analytic element force."""
    k = np.empty((12, 12))
    for dof in range(12):
        fp, _, _ = _element_force(_perturbed(state, element, dof, +1.0), element, constitutive, kappa0)
        fm, _, _ = _element_force(_perturbed(state, element, dof, -1.0), element, constitutive, kappa0)
        k[:, dof] = (fp - fm) / (2.0 * _FD_STEP)
    return k


@dataclass
class StepRecord:
    state: BeamState
    load_factor: float
    reaction_force: np.ndarray
    reaction_moment: np.ndarray
    internal_energy: float
    external_work: float
    tip_strains: np.ndarray


@dataclass
class BvpResult:
    steps: list

    @property
    def final(self) -> BeamState:
        return self.steps[-1].state


def _assemble(state, bvp, constitutive, load_factor):
    n_nodes = len(state.grid)
    residual = np.zeros(6 * n_nodes)
    energy = 0.0
    for e in range(n_nodes - 1):
        force, psi_e, _ = _element_force(state, e, constitutive, bvp.pre_curvature)
        residual[6 * e : 6 * e + 12] += force
        energy += psi_e
    tip = n_nodes - 1
    if bvp.tip_displacement is None:
        residual[6 * tip : 6 * tip + 3] -= load_factor * bvp.tip_force
        r_tip = state.rotation(tip)
        residual[6 * tip + 3 : 6 * tip + 6] -= r_tip.T @ (load_factor * bvp.tip_moment)
    return residual, energy


def _tangent(state, bvp, constitutive, load_factor):
    n_nodes = len(state.grid)
    k = np.zeros((6 * n_nodes, 6 * n_nodes))
    for e in range(n_nodes - 1):
        ke = _element_tangent(state, e, constitutive, bvp.pre_curvature)
        k[6 * e : 6 * e + 12, 6 * e : 6 * e + 12] += ke
    if bvp.tip_displacement is None and np.any(bvp.tip_moment):
        tip = n_nodes - 1
        r_tip = state.rotation(tip)
        sl = slice(6 * tip + 3, 6 * tip + 6)
        k[sl, sl] -= skew(r_tip.T @ (load_factor * bvp.tip_moment))
    return k


def _free_dofs(bvp, n_nodes: int) -> np.ndarray:
    fixed = set(range(6))  # clamp at s = 0
    if bvp.tip_displacement is not None:
        fixed.update(range(6 * (n_nodes - 1), 6 * n_nodes))  # fully guided tip
    return np.array([d for d in range(6 * n_nodes) if d not in fixed], dtype=np.int64)


def _newton(state, bvp, constitutive, load_factor, free, tol_ref, max_iter=30):
    residual, energy = _assemble(state, bvp, constitutive, load_factor)
    norm0 = np.linalg.norm(residual[free])
    tol = 1e-8 * max(norm0, tol_ref)
    for _ in range(max_iter):
        norm = np.linalg.norm(residual[free])
        if norm <= tol:
            return state, residual, energy
        k = _tangent(state, bvp, constitutive, load_factor)
        step = np.linalg.solve(k[np.ix_(free, free)], -residual[free])
        full = np.zeros(6 * len(state.grid))
        full[free] = step
        for node in range(len(state.grid)):
            state.positions[node] += full[6 * node : 6 * node + 3]
            dphi = full[6 * node + 3 : 6 * node + 6]
            if np.any(dphi):
                state.quaternions[node] = quat_normalize(
                    quat_multiply(state.quaternions[node], quat_from_rotvec(dphi))
                )
        residual, energy = _assemble(state, bvp, constitutive, load_factor)
    norm = np.linalg.norm(residual[free])
    if norm <= tol:
        return state, residual, energy
    raise BeamConvergenceError(
        f"no convergence at load factor {load_factor:.4f} (|r| = {norm:.3e}, tol = {tol:.3e})"
    )


def solve_bvp(bvp: BeamBVP, constitutive, max_bisections: int = 4) -> BvpResult:
    """Incremental Newton solution over the load steps.

    Failed steps are bisected up to ``max_bisections`` levels. Records per
    step: state, constraint reactions (at the moving end under displacement
    control, at the clamp otherwise), internal energy, and the accumulated
    external work of the tip load (trapezoidal in the tip motion).
    """
    state = initial_state(bvp.length, bvp.n_elements, bvp.pre_curvature)
    n_nodes = bvp.n_elements + 1
    free = _free_dofs(bvp, n_nodes)
    tol_ref = max(
        np.linalg.norm(bvp.tip_force),
        np.linalg.norm(bvp.tip_moment) / bvp.length * bvp.n_elements,
        1e-6,
    )

    result = BvpResult(steps=[])
    work = 0.0
    prev_factor = 0.0
    prev_tip_r = state.positions[-1].copy()
    prev_tip_rot = quat_to_rot(state.quaternions[-1])
    targets = [(k + 1) / bvp.load_steps for k in range(bvp.load_steps)]

    def apply_tip_displacement(factor_from, factor_to):
        if bvp.tip_displacement is None:
            return
        delta = (factor_to - factor_from) * np.asarray(bvp.tip_displacement)
        state.positions[-1] += delta

    def attempt(factor_from, factor_to, depth):
        nonlocal state
        saved = state.copy()
        try:
            apply_tip_displacement(factor_from, factor_to)
            return _newton(state, bvp, constitutive, factor_to, free, tol_ref)
        except BeamConvergenceError:
            state = saved
            if depth >= max_bisections:
                raise
            mid = 0.5 * (factor_from + factor_to)
            attempt(factor_from, mid, depth + 1)
            return attempt(mid, factor_to, depth + 1)

    for factor in targets:
        _, residual, energy = attempt(prev_factor, factor, 0)

        tip_r = state.positions[-1].copy()
        tip_rot = quat_to_rot(state.quaternions[-1])
        if bvp.tip_displacement is None:
            f_mid = 0.5 * (prev_factor + factor)
            work += f_mid * bvp.tip_force @ (tip_r - prev_tip_r)
            dw_spatial = log_so3(tip_rot @ prev_tip_rot.T)
            work += f_mid * bvp.tip_moment @ dw_spatial
        prev_tip_r, prev_tip_rot, prev_factor = tip_r, tip_rot, factor

        if bvp.tip_displacement is None:
            node = 0  # internal force held by the clamp
        else:
            node = n_nodes - 1  # constraint force at the guided end
        reaction = residual[6 * node : 6 * node + 6].copy()
        result.steps.append(
            StepRecord(
                state=state.copy(),
                load_factor=factor,
                reaction_force=reaction[:3],
                reaction_moment=quat_to_rot(state.quaternions[node]) @ reaction[3:],
                internal_energy=energy,
                external_work=work,
                tip_strains=element_strains(state, bvp.n_elements - 1),
            )
        )
    return result


def apply_rigid_motion(state: BeamState, rotation: np.ndarray, translation: np.ndarray) -> BeamState:
    """Superpose a rigid motion; the discrete strains are unchanged by it."""
    out = state.copy()
    out.positions = state.positions @ rotation.T + translation
    q_rot = _rot_to_quat(rotation)
    for i in range(out.quaternions.shape[0]):
        out.quaternions[i] = quat_normalize(quat_multiply(q_rot, state.quaternions[i]))
    return out


def _rot_to_quat(rot: np.ndarray) -> np.ndarray:
    return quat_from_rotvec(log_so3(rot))
