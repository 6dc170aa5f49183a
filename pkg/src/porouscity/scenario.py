"""Concentric-city input fields: porosity, initial density, parking, demand.

All spatial fields are Gaussian bumps (or a ring bell, for the demand
amplitude) centered on the city attraction point, mirroring a city whose
building density peaks downtown and fades toward the limits.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidPreset, PorosityOutOfRange
from .mesh import Mesh

POROSITY_MIN = 0.38
POROSITY_MAX = 0.82

PRESET_EPS_CENTER = {"dense": 0.38, "disperse": 0.62}


@dataclass
class ScenarioConfig:
    """Preset name plus the shape parameters of the concentric fields.

    Width parameters are fractions of the domain radius (the largest node
    distance from the attraction point).
    """

    preset: str = "dense"
    u_max: float = 50.0            # km/h
    rho_max: float = 2000.0        # veh/km^2
    eps_center: float | None = None  # None: taken from the preset
    eps_max: float = 0.82
    eps_width_frac: float = 1.0 / 3.0
    rho0_center: float = 50.0      # veh/km^2
    rho0_far: float = 1000.0
    rho0_width_frac: float = 1.0 / 3.0
    kappa_max: float = 18.0        # 1/h
    kappa_width_frac: float = 1.0 / 3.0
    kappa_eps_peak: float = 7.0    # target max(eps*kappa) at kappa_max = 18
    q0: float = 0.0                # veh/km^2/h demand amplitude (0: no demand)
    q_ring_frac: float = 0.6
    q_width_frac: float = 1.0 / 6.0
    sigma_g: float = 0.5           # attraction forcing width, km
    center: tuple[float, float] | None = None  # None: domain centroid


@dataclass
class Scenario:
    """Built nodal fields and physical constants of one city configuration."""

    eps: np.ndarray          # porosity, dimensionless
    kappa: np.ndarray        # absorption rate, 1/h
    rho0: np.ndarray         # initial density, veh/km^2
    q_max: np.ndarray        # demand amplitude, veh/km^2/h
    forcing: np.ndarray      # attraction forcing G, normalized to min -1
    center: np.ndarray       # attraction point, km
    radius: float            # domain radius, km
    u_max: float
    rho_max: float
    config: ScenarioConfig = field(repr=False, default=None)

    def demand_at(self, phi, t: float) -> np.ndarray:
        """Full source field (1 - eps) q at time t.

        The travel-cost factor clamp(1 - phi/phi_max, 0, 1) vanishes in the
        remote parts of the city and grows toward the attraction point.
        """
        if not self.q_max.any():
            return np.zeros_like(self.eps)
        g = demand_profile(t)
        if g == 0.0:
            return np.zeros_like(self.eps)
        phi = np.asarray(phi, dtype=float)
        phi_max = float(phi.max())
        if phi_max <= 0.0:
            cost = np.zeros_like(phi)
        else:
            cost = np.clip(1.0 - phi / phi_max, 0.0, 1.0)
        return (1.0 - self.eps) * self.q_max * cost * g


def gaussian_bump(mesh: Mesh, center, value_at_center, value_far, width) -> np.ndarray:
    """value_far + (value_at_center - value_far) exp(-|x-c|^2 / (2 width^2))."""
    if width <= 0:
        raise ValueError("width must be positive")
    d2 = ((mesh.nodes - np.asarray(center)) ** 2).sum(axis=1)
    return value_far + (value_at_center - value_far) * np.exp(-d2 / (2.0 * width ** 2))


def demand_profile(t: float) -> float:
    """Rush-valley demand modulation g(t) in [0, 1].

    Linear ramp 0 -> 1 over the first hour, rush plateau during the second,
    decline to the 0.2 valley level over the third, flat afterwards.
    """
    return float(np.interp(t, [0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 1.0, 0.2]))


def domain_center(mesh: Mesh) -> np.ndarray:
    """Area-weighted centroid of the triangulation."""
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    return (mesh.areas[:, None] * centroids).sum(axis=0) / mesh.areas.sum()


def build_scenario(mesh: Mesh, cfg: ScenarioConfig) -> Scenario:
    """Construct all concentric fields for a preset (dense | disperse | custom)."""
    cfg = replace(cfg)
    if cfg.preset not in ("dense", "disperse", "custom"):
        raise InvalidPreset(f"unknown preset '{cfg.preset}'")
    eps_c = cfg.eps_center
    if eps_c is None:
        if cfg.preset == "custom":
            raise InvalidPreset("preset 'custom' requires eps_center")
        eps_c = PRESET_EPS_CENTER[cfg.preset]
    if cfg.preset != "custom" and not (
        POROSITY_MIN - 1e-12 <= eps_c <= cfg.eps_max <= POROSITY_MAX + 1e-12
    ):
        raise PorosityOutOfRange(
            f"need {POROSITY_MIN} <= eps_center <= eps_max <= {POROSITY_MAX}, "
            f"got eps_center={eps_c}, eps_max={cfg.eps_max}"
        )
    if not 0.0 < eps_c <= 1.0 or not 0.0 < cfg.eps_max <= 1.0:
        raise PorosityOutOfRange("porosity must lie in (0, 1]")

    center = np.asarray(
        cfg.center if cfg.center is not None else domain_center(mesh), dtype=float
    )
    r = np.linalg.norm(mesh.nodes - center, axis=1)
    radius = float(r.max())

    eps = gaussian_bump(mesh, center, eps_c, cfg.eps_max, cfg.eps_width_frac * radius)
    rho0 = gaussian_bump(
        mesh, center, cfg.rho0_center, cfg.rho0_far, cfg.rho0_width_frac * radius
    )

    # Parking absorption: Gaussian at the center, rescaled so the effective
    # street-side rate eps*kappa peaks at kappa_eps_peak when kappa_max = 18.
    # The calibration always uses the baseline (densest admissible) porosity:
    # parking capacity belongs to the buildings and must not change between
    # the dense and disperse porosity scenarios.
    kappa_raw = np.exp(-(r ** 2) / (2.0 * (cfg.kappa_width_frac * radius) ** 2))
    eps_ref = gaussian_bump(
        mesh, center, POROSITY_MIN, cfg.eps_max, cfg.eps_width_frac * radius
    )
    peak_target = cfg.kappa_eps_peak * (cfg.kappa_max / 18.0)
    raw_peak = float((eps_ref * kappa_raw).max())
    kappa = (peak_target / raw_peak) * kappa_raw if raw_peak > 0 else kappa_raw * 0.0

    # Demand amplitude: bell on a ring around the center.
    ring = np.exp(
        -((r - cfg.q_ring_frac * radius) ** 2)
        / (2.0 * (cfg.q_width_frac * radius) ** 2)
    )
    q_max = cfg.q0 * ring

    forcing = -np.exp(-(r ** 2) / (2.0 * cfg.sigma_g ** 2))
    forcing /= -forcing.min()  # normalized to a nodal minimum of exactly -1

    return Scenario(
        eps=eps,
        kappa=kappa,
        rho0=rho0,
        q_max=q_max,
        forcing=forcing,
        center=center,
        radius=radius,
        u_max=cfg.u_max,
        rho_max=cfg.rho_max,
        config=cfg,
    )
