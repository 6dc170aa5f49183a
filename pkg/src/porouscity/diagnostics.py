"""Integral budgets and congestion/speed metrics over simulation snapshots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh


@dataclass
class BudgetRow:
    """Per-step bookkeeping of the nonconservative car balance.

    residual = d/dt(streets_total) - injection + parking + outflux, with the
    time derivative as a forward difference and the rates stage-averaged by
    the integrator; evaluated with the same discrete operators the solver
    uses, it vanishes to round-off when clamping is off.
    """

    t: float
    streets_total: float        # 1^T M_eps rho, veh
    injection_rate: float       # veh/h
    parking_rate: float         # veh/h
    outflux_rate: float         # veh/h
    residual: float             # veh/h
    rho_min: float
    rho_mean: float
    rho_max: float
    speed_min: float
    speed_mean: float
    speed_max: float
    rho_min_preclamp: float
    clamp_mass: float           # veh restored by the density floor this step

    HEADER = ("t,streets_total,injection_rate,parking_rate,outflux_rate,"
              "residual,rho_min,rho_mean,rho_max,speed_min,speed_mean,"
              "speed_max,rho_min_preclamp,clamp_mass")

    def csv(self) -> str:
        vals = (self.t, self.streets_total, self.injection_rate,
                self.parking_rate, self.outflux_rate, self.residual,
                self.rho_min, self.rho_mean, self.rho_max, self.speed_min,
                self.speed_mean, self.speed_max, self.rho_min_preclamp,
                self.clamp_mass)
        return ",".join(f"{v:.17g}" for v in vals)


@dataclass
class CongestionMetrics:
    congested_area: float   # km^2 of triangles with mean rho above threshold
    mean_speed: float       # area-weighted centroid speed over the region
    threshold: float


def streets_total(rho, lumped_me, node_mask=None) -> float:
    """Cars on the streets: 1^T M_eps rho with the lumped mass."""
    if node_mask is None:
        return float(lumped_me @ rho)
    return float(lumped_me[node_mask] @ rho[node_mask])


def congestion_metrics(
    rho, u, mesh: Mesh, rho_max, threshold=0.75, region_mask=None
) -> CongestionMetrics:
    """Congested area and mean traffic speed.

    A triangle is congested when its mean nodal density exceeds
    threshold * rho_max; region_mask (per triangle) restricts the speed
    average, defaulting to the whole domain.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    tri = mesh.triangles
    rho_bar = rho[tri].mean(axis=1)
    congested = float(mesh.areas[rho_bar > threshold * rho_max].sum())
    speed_bar = np.linalg.norm(u[tri].mean(axis=1), axis=1)
    if region_mask is None:
        region_mask = np.ones(mesh.n_triangles, dtype=bool)
    w = mesh.areas[region_mask]
    mean_speed = float((w * speed_bar[region_mask]).sum() / w.sum())
    return CongestionMetrics(congested, mean_speed, threshold)


def budget_row(
    t_new, dt, total_old, total_new_preclamp, total_new, rates, rho, u,
    rho_min_preclamp, clamp_mass,
) -> BudgetRow:
    """Assemble one diagnostics row from the stage-averaged rates.

    rates = (injection, parking, outflux) averaged over the scheme stages;
    the residual uses the pre-clamp total so the discrete identity is exact
    regardless of the clamp policy.
    """
    inj, park, out = rates
    residual = (total_new_preclamp - total_old) / dt - inj + park + out
    speed = np.linalg.norm(u, axis=1)
    return BudgetRow(
        t=t_new,
        streets_total=total_new,
        injection_rate=inj,
        parking_rate=park,
        outflux_rate=out,
        residual=residual,
        rho_min=float(rho.min()),
        rho_mean=float(rho.mean()),
        rho_max=float(rho.max()),
        speed_min=float(speed.min()),
        speed_mean=float(speed.mean()),
        speed_max=float(speed.max()),
        rho_min_preclamp=rho_min_preclamp,
        clamp_mass=clamp_mass,
    )
