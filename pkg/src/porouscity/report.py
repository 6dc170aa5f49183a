"""Matplotlib figure rendering for runs and field dumps.

Every CLI path that writes delimited output can also render the matching
color maps / time series to PNG files next to it.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np

from .mesh import Mesh

_DPI = 150


def _triangulation(mesh: Mesh) -> mtri.Triangulation:
    return mtri.Triangulation(
        mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles
    )


def field_map(mesh: Mesh, values, title, path, cmap="viridis",
              vmin=None, vmax=None) -> str:
    """Nodal scalar field as a shaded triangle map."""
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    tpc = ax.tripcolor(_triangulation(mesh), values, shading="gouraud",
                       cmap=cmap, vmin=vmin, vmax=vmax)
    fig.colorbar(tpc, ax=ax, shrink=0.9)
    ax.set_title(title)
    ax.set_xlabel("x [km]")
    ax.set_ylabel("y [km]")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def vector_map(mesh: Mesh, vec, title, path, stride=4) -> str:
    """Nodal vector field as a quiver plot over the speed magnitude."""
    speed = np.linalg.norm(vec, axis=1)
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    tpc = ax.tripcolor(_triangulation(mesh), speed, shading="gouraud",
                       cmap="viridis")
    fig.colorbar(tpc, ax=ax, shrink=0.9, label="speed [km/h]")
    pick = np.arange(0, mesh.n_nodes, stride)
    ax.quiver(mesh.nodes[pick, 0], mesh.nodes[pick, 1],
              vec[pick, 0], vec[pick, 1], color="white", width=2e-3)
    ax.set_title(title)
    ax.set_xlabel("x [km]")
    ax.set_ylabel("y [km]")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def budget_series(rows, path) -> str:
    """Streets total and exchange rates against time."""
    t = [r.t for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.5, 6.0), sharex=True)
    ax1.plot(t, [r.streets_total for r in rows], color="tab:blue")
    ax1.set_ylabel("cars on streets [veh]")
    ax1.grid(alpha=0.3)
    ax2.plot(t, [r.injection_rate for r in rows], label="injection")
    ax2.plot(t, [r.parking_rate for r in rows], label="parking")
    ax2.plot(t, [r.outflux_rate for r in rows], label="boundary outflux")
    ax2.set_xlabel("t [h]")
    ax2.set_ylabel("rate [veh/h]")
    ax2.legend(loc="best", fontsize=8)
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def run_figures(outdir, mesh: Mesh, state, vdes_norm, rows) -> list[str]:
    """End-of-run report: final density / speed maps plus the budget series."""
    os.makedirs(outdir, exist_ok=True)
    speed = np.linalg.norm(state.u, axis=1)
    paths = [
        field_map(mesh, state.rho, f"traffic density at t = {state.t:.3g} h",
                  os.path.join(outdir, "density_final.png"), cmap="inferno"),
        field_map(mesh, speed, f"traffic speed at t = {state.t:.3g} h",
                  os.path.join(outdir, "speed_final.png")),
        field_map(mesh, vdes_norm, "desired speed magnitude",
                  os.path.join(outdir, "desired_speed_final.png")),
    ]
    if rows:
        paths.append(budget_series(rows, os.path.join(outdir, "budget.png")))
    return paths


def eikonal_figures(outdir, mesh: Mesh, phi, v_des) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    return [
        field_map(mesh, phi, "routing potential",
                  os.path.join(outdir, "potential.png"), cmap="magma"),
        vector_map(mesh, v_des, "desired speed",
                   os.path.join(outdir, "desired_speed.png")),
    ]


def scenario_figures(outdir, mesh: Mesh, scn) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    return [
        field_map(mesh, scn.eps, "porosity",
                  os.path.join(outdir, "porosity.png"), cmap="cividis"),
        field_map(mesh, scn.rho0, "initial density",
                  os.path.join(outdir, "initial_density.png"), cmap="inferno"),
        field_map(mesh, scn.eps * scn.kappa, "absorption rate (streets side)",
                  os.path.join(outdir, "absorption.png")),
        field_map(mesh, scn.forcing, "attraction forcing",
                  os.path.join(outdir, "forcing.png"), cmap="magma_r"),
        field_map(mesh, (1.0 - scn.eps) * scn.q_max, "peak traffic demand",
                  os.path.join(outdir, "demand_amplitude.png")),
    ]
