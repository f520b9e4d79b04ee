"""Cross-sectional warping problem: constrained energy minimization by FEM.

For a given strain state the deformed cross-section embedding Xhat minimizes
the integrated strain energy of the base material subject to constraints that
pin the rigid-body modes: the section's center of mass stays at the origin
(three translational constraints) and the local frame stays aligned with the
principal axes (four rotational constraints with integrands

    (Xhat2 Xhat3, Xhat1 Xhat3, Xhat1 Xhat2, atan2 difference to reference)

enforced with Lagrange multipliers lam in R^3 and mu in R^4). The discrete
saddle problem couples nodal embeddings (linear triangles, one-point
quadrature) with the seven global multipliers and is solved by Newton
iteration on the full KKT system with a direct sparse factorization.

The objective is invariant under superposed rotations, so the rotation
factor of the deformation gradient is set to the identity throughout.

Beam potential and stress resultants follow from the converged embedding by
quadrature:

    psi = int psibar dA,  n = int P E3 dA,  m = int Xhat x P E3 dA.

The angle-difference integrand is undefined at the section origin; its
contribution is dropped on triangles incident to the center node of a full
disc. The remaining area still controls in-plane rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from beampot.core import MaterialParams, StrainState, StressResultants, as_strain_vector
from beampot.continuum import nh_energy_batch, nh_stress_batch, nh_tangent_batch
from beampot.mesh import CrossSectionMesh

_ALL_ROTATIONAL = (1, 2, 3, 4)

# constant Hessians of the three product-of-coordinates constraint integrands
_H_PRODUCTS = np.zeros((3, 3, 3))
_H_PRODUCTS[0, 1, 2] = _H_PRODUCTS[0, 2, 1] = 1.0
_H_PRODUCTS[1, 0, 2] = _H_PRODUCTS[1, 2, 0] = 1.0
_H_PRODUCTS[2, 0, 1] = _H_PRODUCTS[2, 1, 0] = 1.0


class WarpingConvergenceError(RuntimeError):
    """Newton iteration failed; carries the last residual norm."""

    def __init__(self, message: str, residual_norm: float):
        super().__init__(message)
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class WarpingConfig:
    """Solver tolerances and constraint selection.

    ``tol_rel`` bounds the residual norm relative to the first iterate; an
    absolute floor of tol_rel * (shear modulus x area) guards the already
    converged case. ``rotational_constraints`` selects which of the four
    rotational integrands are active (1-based).
    """

    tol_rel: float = 1e-9
    max_iterations: int = 50
    max_halvings: int = 20
    rotational_constraints: tuple = _ALL_ROTATIONAL


@dataclass
class WarpingSolution:
    """Converged (or last-iterate) state of the warping problem."""

    xhat: np.ndarray  # (N, 3) deformed embedding per node
    lam: np.ndarray  # (3,) translational multipliers
    mu: np.ndarray  # (4,) rotational multipliers (inactive entries zero)
    converged: bool
    residual_norm: float
    iterations: int = 0


def _wrap_angle(d: np.ndarray) -> np.ndarray:
    """Wrap angle differences into (-pi, pi]."""
    return d - 2.0 * np.pi * np.ceil((d - np.pi) / (2.0 * np.pi))


class WarpingProblem:
    """Warping solver bound to one mesh and material.

    Precomputes the static FEM arrays (shape-function gradients, areas,
    sparsity pattern) so repeated solves along a load path are cheap.
    """

    def __init__(
        self,
        mesh: CrossSectionMesh,
        mat: MaterialParams,
        config: WarpingConfig | None = None,
    ):
        self.mesh = mesh
        self.mat = mat
        self.config = config or WarpingConfig()
        rot = tuple(sorted(set(self.config.rotational_constraints)))
        if not rot or any(c not in _ALL_ROTATIONAL for c in rot):
            raise ValueError(f"rotational constraints must be a subset of {_ALL_ROTATIONAL}")
        self._rot_active = np.array([c - 1 for c in rot], dtype=np.int64)

        tris = mesh.triangles
        verts = mesh.nodes[tris]  # (M, 3, 2)
        e1 = verts[:, 1] - verts[:, 0]
        e2 = verts[:, 2] - verts[:, 0]
        self.areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])  # (M,)
        if np.any(self.areas <= 0.0):
            raise ValueError("mesh has non-positively oriented triangles")
        self.centroids = verts.mean(axis=1)  # (M, 2) reference centroids
        self.ref_angle = np.arctan2(self.centroids[:, 1], self.centroids[:, 0])

        # gradients of the linear shape functions, (M, 3 nodes, 2)
        grads = np.empty((tris.shape[0], 3, 2))
        x, y = verts[..., 0], verts[..., 1]
        two_a = (2.0 * self.areas)[:, None]
        grads[..., 0] = (np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)) / two_a
        grads[..., 1] = (np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)) / two_a
        self.grads = grads
        # same gradients padded to 3-vectors for deformation-gradient columns
        self.grads3 = np.zeros((tris.shape[0], 3, 3))
        self.grads3[..., :2] = grads

        if mesh.origin_node is not None:
            self.origin_tri = np.any(tris == mesh.origin_node, axis=1)
        else:
            self.origin_tri = np.zeros(tris.shape[0], dtype=bool)
        # weights for the angle constraint: active area only
        self.angle_weight = np.where(self.origin_tri, 0.0, self.areas)
        if 4 in self.config.rotational_constraints and self.angle_weight.sum() == 0.0:
            raise ValueError(
                "angle constraint has no support: every triangle touches the center node"
            )

        self.n_nodes = mesh.n_nodes
        self.n_mult = 3 + self._rot_active.size
        self.n_dof = 3 * self.n_nodes + self.n_mult
        self._force_scale = self.mat.mu_bar * float(self.areas.sum())
        self._build_sparsity()

    # -- static sparsity pattern -------------------------------------------------

    def _build_sparsity(self):
        tris = self.mesh.triangles
        m = tris.shape[0]
        dof = 3 * tris[:, :, None] + np.arange(3)[None, None, :]  # (M, 3, 3)
        dof = dof.reshape(m, 9)
        rows_xx = np.repeat(dof, 9, axis=1)  # (M, 81)
        cols_xx = np.tile(dof, (1, 9))
        self._rows_xx = rows_xx.ravel()
        self._cols_xx = cols_xx.ravel()

        base = 3 * self.n_nodes
        mult_cols = base + np.arange(self.n_mult)
        rows_xm = np.repeat(dof, self.n_mult, axis=1).ravel()
        cols_xm = np.tile(mult_cols, (m, 9)).ravel()
        self._rows_coupling = np.concatenate([rows_xm, cols_xm])
        self._cols_coupling = np.concatenate([cols_xm, rows_xm])

    # -- kinematics ---------------------------------------------------------------

    def identity_solution(self) -> WarpingSolution:
        xhat = np.zeros((self.n_nodes, 3))
        xhat[:, :2] = self.mesh.nodes
        return WarpingSolution(
            xhat=xhat, lam=np.zeros(3), mu=np.zeros(4), converged=False, residual_norm=np.inf
        )

    def deformation_gradients(self, pv: np.ndarray, xhat: np.ndarray) -> np.ndarray:
        """Per-triangle deformation gradient at the centroid, (M, 3, 3)."""
        tris = self.mesh.triangles
        xh = xhat[tris]  # (M, 3 nodes, 3)
        f = np.einsum("taj,tak->tjk", xh, self.grads3)  # in-plane columns
        xc = xh.mean(axis=1)
        f[:, :, 2] = pv[:3] + np.cross(pv[3:], xc)
        f[:, 2, 2] += 1.0
        return f

    def _min_det(self, pv: np.ndarray, xhat: np.ndarray) -> float:
        return float(np.linalg.det(self.deformation_gradients(pv, xhat)).min())

    # -- residual and tangent -----------------------------------------------------

    def _constraint_terms(self, xhat: np.ndarray):
        """Centroid values, gradients and weights of the active constraints."""
        tris = self.mesh.triangles
        xc = xhat[tris].mean(axis=1)  # (M, 3)
        x1, x2, x3 = xc[:, 0], xc[:, 1], xc[:, 2]
        m = xc.shape[0]

        values = np.empty((m, 4))
        values[:, 0] = x2 * x3
        values[:, 1] = x1 * x3
        values[:, 2] = x1 * x2
        with np.errstate(invalid="ignore", divide="ignore"):
            values[:, 3] = _wrap_angle(np.arctan2(x2, x1) - self.ref_angle)
        values[self.origin_tri, 3] = 0.0

        grads = np.zeros((m, 4, 3))
        grads[:, 0, 1] = x3
        grads[:, 0, 2] = x2
        grads[:, 1, 0] = x3
        grads[:, 1, 2] = x1
        grads[:, 2, 0] = x2
        grads[:, 2, 1] = x1
        r2 = x1**2 + x2**2
        with np.errstate(invalid="ignore", divide="ignore"):
            grads[:, 3, 0] = np.where(self.origin_tri, 0.0, -x2 / r2)
            grads[:, 3, 1] = np.where(self.origin_tri, 0.0, x1 / r2)
        return xc, values, grads

    def residual(self, pv: np.ndarray, sol: WarpingSolution) -> np.ndarray:
        """Gradient of the discrete Lagrangian at the given state."""
        r, _ = self._residual_impl(pv, sol, with_matrix=False)
        return r

    def _residual_impl(self, pv: np.ndarray, sol: WarpingSolution, with_matrix: bool):
        mesh, mat = self.mesh, self.mat
        tris = mesh.triangles
        m = tris.shape[0]
        areas = self.areas
        rot = self._rot_active

        f = self.deformation_gradients(pv, sol.xhat)
        stress = nh_stress_batch(f, mat)
        xc, cons_val, cons_grad = self._constraint_terms(sol.xhat)

        # force density on the embedding: (P E3) x kappa + lam + sum mu_c grad(m_c)
        w = np.cross(stress[:, :, 2], pv[3:]) + sol.lam
        mu_active = sol.mu[rot]
        w = w + np.einsum("c,tck->tk", mu_active, cons_grad[:, rot, :])

        r = np.zeros(self.n_dof)
        # nodal contributions: centroid weight 1/3 per node plus the gradient term
        nodal = areas[:, None, None] * (
            w[:, None, :] / 3.0 + np.einsum("tia,tba->tbi", stress[:, :, :2], self.grads)
        )  # (M, 3 nodes, 3)
        np.add.at(r, (3 * tris[:, :, None] + np.arange(3)).ravel(), nodal.ravel())

        base = 3 * self.n_nodes
        r[base : base + 3] = areas @ xc
        cons_weights = np.where(
            rot[None, :] == 3, self.angle_weight[:, None], areas[:, None]
        )  # (M, n_rot)
        r[base + 3 :] = np.einsum("tc,tc->c", cons_weights, cons_val[:, rot])

        if not with_matrix:
            return r, None

        tangent = nh_tangent_batch(f, mat)

        # dF/dv for a unit nodal perturbation: (M, 3 nodes, 3, 3, 3)
        kx = np.array(
            [
                [0.0, -pv[5], pv[4]],
                [pv[5], 0.0, -pv[3]],
                [-pv[4], pv[3], 0.0],
            ]
        )
        d = np.zeros((m, 3, 3, 3, 3))
        d[:, :, :, 2, :] = kx[None, None, :, :] / 3.0
        eye = np.eye(3)
        d += np.einsum("ik,taj->taijk", eye, self.grads3)

        blocks = np.einsum("taijk,tijmn,tbmnl->takbl", d, tangent, d, optimize=True)

        # second derivative of the constraint term mu . m
        hmu = np.zeros((m, 3, 3))
        for idx, c in enumerate(rot):
            if c < 3:
                hmu += mu_active[idx] * _H_PRODUCTS[c]
            else:
                x1, x2 = xc[:, 0], xc[:, 1]
                r2 = x1**2 + x2**2
                with np.errstate(invalid="ignore", divide="ignore"):
                    r4 = r2**2
                    h11 = np.where(self.origin_tri, 0.0, 2.0 * x1 * x2 / r4)
                    h12 = np.where(self.origin_tri, 0.0, (x2**2 - x1**2) / r4)
                hmu[:, 0, 0] += mu_active[idx] * h11
                hmu[:, 0, 1] += mu_active[idx] * h12
                hmu[:, 1, 0] += mu_active[idx] * h12
                hmu[:, 1, 1] -= mu_active[idx] * h11
        blocks += hmu[:, None, :, None, :] / 9.0

        blocks *= areas[:, None, None, None, None]
        data_xx = blocks.ravel()

        # coupling blocks: translations then active rotational constraints
        coup = np.zeros((m, 3, 3, self.n_mult))
        coup[:, :, :, :3] = (areas[:, None, None, None] / 3.0) * eye[None, None, :, :]
        for idx, c in enumerate(rot):
            wgt = self.angle_weight if c == 3 else areas
            coup[:, :, :, 3 + idx] = (wgt[:, None, None] / 3.0) * cons_grad[:, None, c, :]
        data_coup = coup.reshape(m, -1).ravel()

        data = np.concatenate([data_xx, data_coup, data_coup])
        rows = np.concatenate([self._rows_xx, self._rows_coupling])
        cols = np.concatenate([self._cols_xx, self._cols_coupling])
        kkt = sp.coo_matrix((data, (rows, cols)), shape=(self.n_dof, self.n_dof)).tocsc()
        return r, kkt

    # -- Newton driver ------------------------------------------------------------

    def solve(self, p, init: WarpingSolution | None = None) -> WarpingSolution:
        """Newton iteration from the identity embedding or a warm start."""
        pv = as_strain_vector(p)
        cfg = self.config
        start = init if init is not None else self.identity_solution()
        sol = WarpingSolution(
            xhat=start.xhat.copy(), lam=start.lam.copy(), mu=start.mu.copy(),
            converged=False, residual_norm=np.inf,
        )
        if self._min_det(pv, sol.xhat) <= 0.0:
            raise WarpingConvergenceError(
                "initial embedding violates impenetrability", np.inf
            )

        r = self.residual(pv, sol)
        norm0 = float(np.linalg.norm(r))
        tol = max(cfg.tol_rel * norm0, cfg.tol_rel * self._force_scale)
        rot = self._rot_active

        for iteration in range(cfg.max_iterations):
            norm = float(np.linalg.norm(r))
            if norm <= tol:
                sol.converged = True
                sol.residual_norm = norm
                sol.iterations = iteration
                return sol

            _, kkt = self._residual_impl(pv, sol, with_matrix=True)
            step = spla.splu(kkt).solve(-r)
            dx = step[: 3 * self.n_nodes].reshape(-1, 3)
            dlam = step[3 * self.n_nodes : 3 * self.n_nodes + 3]
            dmu = step[3 * self.n_nodes + 3 :]

            alpha = 1.0
            for _ in range(cfg.max_halvings + 1):
                trial = sol.xhat + alpha * dx
                if self._min_det(pv, trial) > 0.0:
                    break
                alpha *= 0.5
            else:
                raise WarpingConvergenceError(
                    f"element inversion persists after {cfg.max_halvings} halvings", norm
                )
            sol.xhat += alpha * dx
            sol.lam += alpha * dlam
            sol.mu[rot] += alpha * dmu
            r = self.residual(pv, sol)

        norm = float(np.linalg.norm(r))
        if norm <= tol:
            sol.converged = True
            sol.residual_norm = norm
            sol.iterations = cfg.max_iterations
            return sol
        raise WarpingConvergenceError(
            f"no convergence in {cfg.max_iterations} iterations "
            f"(|G| = {norm:.3e}, tol = {tol:.3e})",
            norm,
        )

    def resultants(self, sol: WarpingSolution, p) -> tuple[float, StressResultants]:
        """Beam potential and stress resultants of the converged embedding."""
        if not sol.converged:
            raise ValueError("warping solution is not converged")
        pv = as_strain_vector(p)
        f = self.deformation_gradients(pv, sol.xhat)
        psi = float(self.areas @ nh_energy_batch(f, self.mat))
        traction = nh_stress_batch(f, self.mat)[:, :, 2]
        n = self.areas @ traction
        xc = sol.xhat[self.mesh.triangles].mean(axis=1)
        m = self.areas @ np.cross(xc, traction)
        return psi, StressResultants(n=n, m=m)

    def constraint_residuals(self, sol: WarpingSolution) -> tuple[np.ndarray, np.ndarray]:
        """Integrals of the translational and rotational constraint integrands."""
        xc, cons_val, _ = self._constraint_terms(sol.xhat)
        translational = self.areas @ xc
        rotational = np.empty(4)
        rotational[:3] = self.areas @ cons_val[:, :3]
        rotational[3] = self.angle_weight @ cons_val[:, 3]
        return translational, rotational


def solve_warping(
    p,
    mesh: CrossSectionMesh,
    mat: MaterialParams,
    init: WarpingSolution | None = None,
    config: WarpingConfig | None = None,
) -> WarpingSolution:
    """One-off warping solve; see WarpingProblem for repeated solves."""
    return WarpingProblem(mesh, mat, config).solve(p, init=init)


def dhm_resultants(
    sol: WarpingSolution, p, mesh: CrossSectionMesh, mat: MaterialParams
) -> tuple[float, StressResultants]:
    """Beam potential and stress resultants from a converged warping solution."""
    return WarpingProblem(mesh, mat).resultants(sol, p)


@dataclass
class PathRow:
    state: StrainState
    psi: float
    q: StressResultants


@dataclass
class PathTrace:
    rows: list = field(default_factory=list)
    truncated: bool = False

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def trace_load_path(
    path,
    mesh: CrossSectionMesh,
    mat: MaterialParams,
    config: WarpingConfig | None = None,
    max_bisections: int = 4,
) -> PathTrace:
    """Solve a sequence of strain states with warm starting.

    Each state is started from the previous converged solution. When a step
    fails to converge, it is bisected up to ``max_bisections`` levels; the
    midpoints only aid continuation and are not emitted. If a state remains
    unreachable the path is truncated there (error if it is the first state).
    """
    problem = WarpingProblem(mesh, mat, config)
    trace = PathTrace()
    prev = problem.identity_solution()

    def advance(prev_sol, prev_pv, target_pv, depth):
        try:
            return problem.solve(target_pv, init=prev_sol)
        except WarpingConvergenceError:
            if depth >= max_bisections:
                raise
            mid_pv = 0.5 * (prev_pv + target_pv)
            mid_sol = advance(prev_sol, prev_pv, mid_pv, depth + 1)
            return advance(mid_sol, mid_pv, target_pv, depth + 1)

    prev_pv = np.zeros(6)
    for k, state in enumerate(path):
        pv = as_strain_vector(state)
        try:
            sol = advance(prev, prev_pv, pv, 0)
        except WarpingConvergenceError:
            if k == 0:
                raise
            trace.truncated = True
            break
        psi, q = problem.resultants(sol, pv)
        trace.rows.append(PathRow(state=StrainState.from_vector(pv), psi=psi, q=q))
        prev, prev_pv = sol, pv
    return trace
