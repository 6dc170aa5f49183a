"""Semi-discrete right-hand sides of the coupled density/momentum system.

Density:   d(rho)/dt = M_eps^-1 { [C(u) - B_out(u) - R_nu - K_kappa] rho + b }
Momentum:  d(u_k)/dt = M^-1 { [-Conv(u) - M/tau - R_visc - D_darcy - F_forch(u)] u_k
                              - c^2 a(rho, u) + c^2 b_out(rho, u) + (M v_k)/tau }

Mass matrices are lumped (row sums) for the explicit march, which makes the
discrete mass budget exact: summing the density equation against the all-ones
vector leaves injection - parking - outer outflux only, since the convection
and stiffness operators annihilate constants.

The viscous boundary integral is dropped on both boundary segments (natural
condition everywhere); the pressure boundary vector on the outer limit is
retained.  Element-mean densities in the porous corrections are floored at
rho_floor to keep 1/rho finite in the nearly empty downtown.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import fem
from .errors import NonFiniteInput
from .mesh import Mesh
from .scenario import Scenario


@dataclass
class PhysicalParams:
    """Momentum-equation constants (units in km, h, veh)."""

    c2: float = 1e-4            # pressure correction, km^3/(veh h)
    permeability: float = 1e-4  # K, km^2
    forchheimer: float = 0.1    # F, dimensionless
    nu: float = 1.25            # density diffusion, km^2/h
    mu: float = 3.6e-8          # viscosity, km^2/h
    tau: float = 0.009          # relaxation time, h
    rho_floor: float = 1.0      # veh/km^2, floor for 1/rho divisions

    def __post_init__(self):
        for name in ("c2", "permeability", "forchheimer", "nu", "mu", "tau",
                     "rho_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class DensityRhs(NamedTuple):
    drho: np.ndarray
    injection_rate: float   # 1^T b(q), veh/h
    parking_rate: float     # 1^T K_kappa rho, veh/h
    outflux_rate: float     # 1^T B_out(u) rho, veh/h


class ClampReport(NamedTuple):
    n_rho_clamped: int
    mass_added: float       # veh restored by the density floor
    n_speed_capped: int


class Workspace:
    """Cached operators for one (mesh, scenario, params) triple.

    Scenario-fixed matrices are assembled once; velocity- and density-
    dependent ones are refilled each stage through the mesh's shared
    sparse pattern.
    """

    def __init__(self, mesh: Mesh, scenario: Scenario, params: PhysicalParams):
        self.mesh = mesh
        self.scenario = scenario
        self.params = params

        eps = scenario.eps
        ones = np.ones(mesh.n_nodes)
        self.mass_plain = fem.assemble_weighted_mass(mesh, ones)
        self.lumped_m = fem.lump(self.mass_plain)
        self.lumped_me = fem.lump(fem.assemble_weighted_mass(mesh, eps))
        self.stiff_nu = fem.assemble_weighted_stiffness(mesh, eps * params.nu)
        self.mass_kappa = fem.assemble_weighted_mass(mesh, eps * scenario.kappa)
        self.inv_eps = 1.0 / eps
        self._tri = mesh.triangles

    # -- density ------------------------------------------------------------

    def density_rhs(self, rho, u, demand) -> DensityRhs:
        """Nodal d(rho)/dt plus the three budget rates of this evaluation."""
        _check_finite(rho, u)
        conv = fem.assemble_convection(self.mesh, u)
        b_out = fem.assemble_outer_boundary_mass(self.mesh, u)
        b = self.mass_plain @ demand  # exact load of the linear demand field
        parking = self.mass_kappa @ rho
        outflux = b_out @ rho
        rhs = conv @ rho - outflux - self.stiff_nu @ rho - parking + b
        return DensityRhs(
            drho=rhs / self.lumped_me,
            injection_rate=float(b.sum()),
            parking_rate=float(parking.sum()),
            outflux_rate=float(outflux.sum()),
        )

    # -- momentum -----------------------------------------------------------

    def momentum_rhs(self, rho, u, v_des) -> np.ndarray:
        """Nodal d(u)/dt, shape (n_v, 2)."""
        _check_finite(rho, u, v_des)
        p = self.params
        mesh = self.mesh
        rho_bar = np.maximum(
            rho[self._tri].mean(axis=1), p.rho_floor
        )  # element means, floored

        # trial-differentiated convection: transpose of the density form
        conv = fem.assemble_convection(mesh, u, c=self.inv_eps).T.tocsr()
        visc = fem.assemble_weighted_stiffness(
            mesh, np.full(mesh.n_nodes, p.mu), elem_scale=1.0 / rho_bar
        )
        darcy = fem.assemble_weighted_mass(
            mesh, self.scenario.eps, elem_scale=p.mu / (rho_bar * p.permeability)
        )
        u_bar = u[self._tri].mean(axis=1)                     # centroid velocity
        forch = fem.assemble_weighted_mass(
            mesh,
            self.scenario.eps,
            elem_scale=(p.forchheimer / np.sqrt(p.permeability))
            * np.linalg.norm(u_bar, axis=1),
        )

        # pressure volume vector: same scalar enters both components
        press = np.bincount(
            self._tri.ravel(),
            weights=(
                (rho_bar * mesh.areas)[:, None]
                * np.einsum("tkd,td->tk", mesh.grads, u_bar)
            ).ravel(),
            minlength=mesh.n_nodes,
        )
        press_bnd = fem.assemble_outer_boundary_load(mesh, rho, u)

        du = np.empty_like(u)
        for k in range(2):
            drag = (
                conv @ u[:, k]
                + (self.mass_plain @ u[:, k]) / p.tau
                + visc @ u[:, k]
                + darcy @ u[:, k]
                + forch @ u[:, k]
            )
            relax = (self.mass_plain @ v_des[:, k]) / p.tau
            du[:, k] = (-drag - p.c2 * press + p.c2 * press_bnd + relax) / self.lumped_m
        return du


def _check_finite(*arrays):
    for a in arrays:
        if not np.isfinite(a).all():
            raise NonFiniteInput("non-finite field passed to an RHS evaluation")


def apply_slip_projection(u: np.ndarray, mesh: Mesh) -> np.ndarray:
    """Remove the normal component of u at wall nodes (idempotent)."""
    if len(mesh.wall_nodes) == 0:
        return u
    un = (u[mesh.wall_nodes] * mesh.wall_normals).sum(axis=1)
    u = u.copy()
    u[mesh.wall_nodes] -= un[:, None] * mesh.wall_normals
    return u


def clamp_state(rho, u, u_cap, lumped_me, policy="floor"):
    """Apply the configured positivity/speed clamps.

    policy "off" returns the inputs untouched; "floor" raises negative
    densities to zero and caps the speed magnitude at u_cap (2 U_max at the
    call sites), reporting how much was altered.
    """
    if policy == "off":
        return rho, u, ClampReport(0, 0.0, 0)
    if policy != "floor":
        raise ValueError(f"unknown clamp policy '{policy}'")
    neg = rho < 0.0
    n_neg = int(neg.sum())
    mass_added = float((lumped_me[neg] * -rho[neg]).sum()) if n_neg else 0.0
    if n_neg:
        rho = np.maximum(rho, 0.0)
    speed = np.linalg.norm(u, axis=1)
    fast = speed > u_cap
    n_fast = int(fast.sum())
    if n_fast:
        u = u.copy()
        u[fast] *= (u_cap / speed[fast])[:, None]
    return rho, u, ClampReport(n_neg, mass_added, n_fast)
