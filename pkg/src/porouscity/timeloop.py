"""Explicit time marching of the coupled density/momentum/potential system.

Each step re-solves the routing potential, once per stage, and advances with
the optimal two-stage strong-stability-preserving Runge-Kutta scheme
(Shu-Osher): predictor y* = y + dt f(y), corrector
y_next = (y + y*)/2 + (dt/2) f(y*).  The velocity is slip-projected after
every stage so wall nodes keep a tangential flow.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics
from .dynamics import PhysicalParams, Workspace, apply_slip_projection, clamp_state
from .eikonal import EikonalConfig, EikonalSolver, PotentialSolution
from .errors import NonFiniteInput, NonFiniteState
from .mesh import Mesh
from .scenario import Scenario

_LOGGER = logging.getLogger(__name__)


@dataclass
class TimeConfig:
    dt: float = 5e-4            # h
    t_end: float = 0.5          # h
    snapshot_stride: int = 100  # steps between stored snapshots
    scheme: str = "ssp2"        # ssp2 | euler
    eikonal_every: int = 1      # potential re-solve period, in steps
    clamp_policy: str = "floor"  # floor | off

    def __post_init__(self):
        if not 0 < self.dt <= self.t_end:
            raise ValueError("need 0 < dt <= t_end")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.scheme not in ("ssp2", "euler"):
            raise ValueError(f"unknown scheme '{self.scheme}'")

    def n_steps(self) -> int:
        """T/dt, rounded up (with a warning) when not within 1e-9 of an integer."""
        ratio = self.t_end / self.dt
        if abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio):
            return int(round(ratio))
        n = int(np.ceil(ratio))
        _LOGGER.warning(
            "t_end = %g is not a multiple of dt = %g; running %d steps to t = %g",
            self.t_end, self.dt, n, n * self.dt,
        )
        return n


@dataclass
class SimulationState:
    t: float
    rho: np.ndarray
    u: np.ndarray
    potential: PotentialSolution | None = None
    injected: float = 0.0   # cumulative veh
    parked: float = 0.0
    outflux: float = 0.0
    step_index: int = 0

    def copy(self) -> "SimulationState":
        return replace(self, rho=self.rho.copy(), u=self.u.copy())


def ssp2_step(y, t, dt, f):
    """One SSP(2,2) step of dy/dt = f(y, t) on a plain array."""
    y_star = y + dt * f(y, t)
    return 0.5 * (y + y_star) + 0.5 * dt * f(y_star, t + dt)


def euler_step(y, t, dt, f):
    return y + dt * f(y, t)


class Stepper:
    """Bundles the per-run machinery: workspace, potential solver, clamps."""

    def __init__(
        self,
        mesh: Mesh,
        scenario: Scenario,
        params: PhysicalParams,
        eikonal_config: EikonalConfig,
        time_config: TimeConfig,
    ):
        self.mesh = mesh
        self.scenario = scenario
        self.params = params
        self.time_config = time_config
        self.ws = Workspace(mesh, scenario, params)
        self.eik = EikonalSolver(mesh, eikonal_config)
        self.eik.calibrate(scenario.rho0)
        self._h_min = mesh.h_min()
        self._cfl_warned = False

    def initial_state(self) -> SimulationState:
        rho = self.scenario.rho0.copy()
        u = np.zeros((self.mesh.n_nodes, 2))
        state = SimulationState(t=0.0, rho=rho, u=u)
        state.potential = self.eik.solve(rho)
        return state

    def _stage(self, rho, u, t, potential=None):
        """Evaluate (F, G) at one stage, re-solving the potential by default."""
        if potential is None:
            potential = self.eik.solve(rho)
        v_des = self.eik.desired_speed(rho, potential)
        demand = self.scenario.demand_at(potential.phi, t)
        den = self.ws.density_rhs(rho, u, demand)
        du = self.ws.momentum_rhs(rho, u, v_des)
        return den, du, potential

    def step(self, state: SimulationState):
        """Advance one dt; returns (new_state, BudgetRow)."""
        dt = self.time_config.dt
        rho_n, u_n, t = state.rho, state.u, state.t
        reuse = (
            state.potential
            if state.step_index % self.time_config.eikonal_every != 0
            else None
        )

        den1, du1, pot1 = self._stage(rho_n, u_n, t, potential=reuse)
        if self.time_config.scheme == "euler":
            rho_new = rho_n + dt * den1.drho
            u_new = apply_slip_projection(u_n + dt * du1, self.mesh)
            rates = (den1.injection_rate, den1.parking_rate, den1.outflux_rate)
            pot_last = pot1
        else:
            rho_star = rho_n + dt * den1.drho
            u_star = apply_slip_projection(u_n + dt * du1, self.mesh)
            den2, du2, pot2 = self._stage(rho_star, u_star, t + dt, potential=reuse)
            rho_new = 0.5 * (rho_n + rho_star) + 0.5 * dt * den2.drho
            u_new = apply_slip_projection(
                0.5 * (u_n + u_star) + 0.5 * dt * du2, self.mesh
            )
            rates = (
                0.5 * (den1.injection_rate + den2.injection_rate),
                0.5 * (den1.parking_rate + den2.parking_rate),
                0.5 * (den1.outflux_rate + den2.outflux_rate),
            )
            pot_last = pot2

        rho_min_preclamp = float(rho_new.min())
        total_preclamp = diagnostics.streets_total(rho_new, self.ws.lumped_me)
        rho_new, u_new, clamp = clamp_state(
            rho_new, u_new, 2.0 * self.scenario.u_max, self.ws.lumped_me,
            self.time_config.clamp_policy,
        )

        if not (np.isfinite(rho_new).all() and np.isfinite(u_new).all()):
            raise NonFiniteState(
                f"non-finite state after step {state.step_index} (t = {t:.6g} h): "
                f"rho range [{np.nanmin(rho_new):.3g}, {np.nanmax(rho_new):.3g}], "
                f"|u| max {np.nanmax(np.abs(u_new)):.3g}"
            )

        speed_max = float(np.linalg.norm(u_new, axis=1).max())
        if not self._cfl_warned and dt * speed_max / self._h_min > 0.5:
            _LOGGER.warning(
                "CFL guard: dt * max|u| / h_min = %.3g > 0.5 at t = %.4g h",
                dt * speed_max / self._h_min, t + dt,
            )
            self._cfl_warned = True

        new_state = SimulationState(
            t=t + dt,
            rho=rho_new,
            u=u_new,
            potential=pot_last,
            injected=state.injected + dt * rates[0],
            parked=state.parked + dt * rates[1],
            outflux=state.outflux + dt * rates[2],
            step_index=state.step_index + 1,
        )
        row = diagnostics.budget_row(
            t_new=new_state.t,
            dt=dt,
            total_old=diagnostics.streets_total(state.rho, self.ws.lumped_me),
            total_new_preclamp=total_preclamp,
            total_new=diagnostics.streets_total(rho_new, self.ws.lumped_me),
            rates=rates,
            rho=rho_new,
            u=u_new,
            rho_min_preclamp=rho_min_preclamp,
            clamp_mass=clamp.mass_added,
        )
        return new_state, row


@dataclass
class SimulationResult:
    snapshots: list[tuple[int, SimulationState]]
    rows: list[diagnostics.BudgetRow]
    stepper: Stepper = field(repr=False, default=None)


def run_simulation(
    mesh: Mesh,
    scenario: Scenario,
    params: PhysicalParams,
    eikonal_config: EikonalConfig,
    time_config: TimeConfig,
    on_snapshot=None,
    on_row=None,
) -> SimulationResult:
    """March the system from rho0, u = 0 to t_end.

    Snapshots (immutable copies) are kept every snapshot_stride steps plus
    the final step; one diagnostics row is kept per step.  The optional
    callbacks stream snapshots/rows as they are produced.
    """
    stepper = Stepper(mesh, scenario, params, eikonal_config, time_config)
    state = stepper.initial_state()
    n = time_config.n_steps()

    snapshots: list[tuple[int, SimulationState]] = []
    rows: list[diagnostics.BudgetRow] = []

    def emit(step_idx: int, st: SimulationState):
        snap = st.copy()
        snapshots.append((step_idx, snap))
        if on_snapshot:
            on_snapshot(step_idx, snap)

    emit(0, state)
    for k in range(1, n + 1):
        try:
            state, row = stepper.step(state)
        except (NonFiniteInput, NonFiniteState) as exc:
            raise NonFiniteState(f"step {k}/{n}: {exc}") from exc
        rows.append(row)
        if on_row:
            on_row(row)
        if k % time_config.snapshot_stride == 0 or k == n:
            emit(k, state)
    return SimulationResult(snapshots=snapshots, rows=rows, stepper=stepper)
