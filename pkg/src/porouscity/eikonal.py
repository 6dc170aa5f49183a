"""Routing potential and desired speed from a linearized Eikonal problem.

The nonlinear travel-cost equation is regularized and transformed with an
exponential change of variable, leaving a screened-Poisson problem for the
auxiliary field psi.  A negative forcing pulls psi toward 1 at the city
attraction point; the potential phi = -eta ln(psi) then has its minimum
there, and the desired traffic speed follows the negative potential gradient
at the density-limited transport cost.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags as sparse_diag

from . import fem
from .mesh import Mesh

_LOGGER = logging.getLogger(__name__)


@dataclass
class EikonalConfig:
    """Regularization and clamping knobs for the potential solve.

    forcing is the attraction field G <= 0 (a warning is logged otherwise);
    u_max / rho_max define the transport cost f(rho).
    """

    forcing: np.ndarray
    u_max: float = 50.0
    rho_max: float = 2000.0
    eta: float = 1.0                # km
    psi_floor: float = 1e-12
    f_floor_fraction: float = 1e-3
    grad_tol: float = 1e-10
    tol: float = 1e-10              # linear-solve relative residual

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 < self.psi_floor < 1:
            raise ValueError("psi_floor must lie in (0, 1)")
        if not 0 < self.f_floor_fraction < 1:
            raise ValueError("f_floor_fraction must lie in (0, 1)")
        g = np.asarray(self.forcing)
        if (g > 0).any():
            _LOGGER.warning(
                "attraction forcing is positive at %d nodes (max %.3e)",
                int((g > 0).sum()), float(g.max()),
            )


@dataclass
class PotentialSolution:
    psi: np.ndarray
    phi: np.ndarray
    grad_phi: np.ndarray  # (n_v, 2) recovered nodal gradient


def transport_cost(rho, u_max, rho_max, f_floor_fraction=1e-3) -> np.ndarray:
    """Density-limited achievable speed, clamped away from zero.

    f = max(u_max (1 - rho/rho_max), u_max * f_floor_fraction); the clamp
    also covers rho > rho_max, keeping 1/f^2 finite.
    """
    f = u_max * (1.0 - np.asarray(rho, dtype=float) / rho_max)
    return np.maximum(f, u_max * f_floor_fraction)


def solve_screened_poisson(
    mesh: Mesh, rho, config: EikonalConfig, psi0=None
) -> np.ndarray:
    """Solve (eta^2 K + M_{1/f^2}) psi = -b(G) with Neumann conditions.

    K is the unweighted stiffness (cached on the mesh), M_{1/f^2} the mass
    weighted by the squared reciprocal transport cost and lumped: on meshes
    without obtuse triangles the lumped operator is an M-matrix, so psi
    stays nonnegative even where the reaction layer is under-resolved (the
    consistent form rings negative next to saturated-density zones).  The
    system is SPD; psi0 warm-starts the CG iteration.
    """
    k = mesh.cache.get("eikonal_stiffness")
    if k is None:
        k = fem.assemble_weighted_stiffness(mesh, np.ones(mesh.n_nodes))
        mesh.cache["eikonal_stiffness"] = k
    f = transport_cost(rho, config.u_max, config.rho_max, config.f_floor_fraction)
    m = sparse_diag(fem.lump(fem.assemble_weighted_mass(mesh, 1.0 / f ** 2)))
    rhs = -fem.assemble_load(mesh, np.asarray(config.forcing, dtype=float))
    a = (config.eta ** 2 * k + m).tocsr()
    psi = fem.solve_spd(a, rhs, tol=config.tol, x0=psi0)
    n_neg = int((psi < 0).sum())
    if n_neg:
        _LOGGER.warning(
            "psi negative at %d nodes (min %.3e); clamped in the potential",
            n_neg, float(psi.min()),
        )
    return psi


def potential_and_gradient(mesh: Mesh, psi, config: EikonalConfig) -> PotentialSolution:
    """phi = -eta ln(max(psi, psi_floor)) plus recovered nodal gradient.

    The nodal gradient is the area-weighted average of the element-constant
    P1 gradients over each node's star (exact for linear fields).
    """
    psi_c = np.maximum(np.asarray(psi, dtype=float), config.psi_floor)
    phi = -config.eta * np.log(psi_c)

    tri = mesh.triangles
    elem_grad = np.einsum("tk,tkd->td", phi[tri], mesh.grads)  # (n_t, 2)
    num = np.zeros((mesh.n_nodes, 2))
    den = np.bincount(tri.ravel(), weights=np.repeat(mesh.areas, 3),
                      minlength=mesh.n_nodes)
    w = mesh.areas[:, None] * elem_grad
    for k in range(3):
        np.add.at(num, tri[:, k], w)
    grad_phi = num / den[:, None]
    return PotentialSolution(psi=psi_c, phi=phi, grad_phi=grad_phi)


def desired_speed(rho, potential: PotentialSolution, config: EikonalConfig) -> np.ndarray:
    """v = -f(rho) grad(phi)/||grad(phi)||, zero where the gradient vanishes."""
    g = potential.grad_phi
    norm = np.linalg.norm(g, axis=1)
    f = transport_cost(rho, config.u_max, config.rho_max, config.f_floor_fraction)
    v = np.zeros_like(g)
    ok = norm >= config.grad_tol
    v[ok] = -(f[ok] / norm[ok])[:, None] * g[ok]
    return v


class EikonalSolver:
    """Stateful wrapper: cached operators, warm starts, forcing calibration.

    calibrate() rescales the forcing so that max(psi) is exactly 1 for the
    calibration density (the system is linear in G, so the rescale is exact);
    later densities keep max(psi) near 1.
    """

    def __init__(self, mesh: Mesh, config: EikonalConfig):
        self.mesh = mesh
        self.config = config
        self._psi_prev: np.ndarray | None = None

    def calibrate(self, rho) -> float:
        psi = solve_screened_poisson(self.mesh, rho, self.config)
        peak = float(psi.max())
        if peak <= 0:
            _LOGGER.warning("calibration found max psi = %.3e; forcing unscaled", peak)
            return 1.0
        self.config.forcing = np.asarray(self.config.forcing) / peak
        self._psi_prev = psi / peak
        return 1.0 / peak

    def solve(self, rho) -> PotentialSolution:
        psi = solve_screened_poisson(self.mesh, rho, self.config, psi0=self._psi_prev)
        self._psi_prev = psi
        return potential_and_gradient(self.mesh, psi, self.config)

    def desired_speed(self, rho, potential: PotentialSolution) -> np.ndarray:
        return desired_speed(rho, potential, self.config)
