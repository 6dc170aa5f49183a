"""Command-line entry points: run, validate-mesh, eikonal-only, scenario-dump."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import output, report
from .config import Config, parse_config
from .eikonal import EikonalConfig, EikonalSolver
from .errors import PorousCityError
from .mesh import load_msh, validate_mesh
from .scenario import build_scenario
from .timeloop import run_simulation

_LOGGER = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porouscity",
        description="Finite-element traffic flow on an urban porous medium",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a full simulation")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--output", help="override output.dir")
    run_p.add_argument("--figures", dest="figures", action="store_true",
                       default=None, help="force figure rendering on")
    run_p.add_argument("--no-figures", dest="figures", action="store_false",
                       help="force figure rendering off")

    val_p = sub.add_parser("validate-mesh", help="print a mesh quality report")
    val_p.add_argument("--mesh", required=True)
    val_p.add_argument("--outer-groups", default="outer")
    val_p.add_argument("--wall-groups", default="wall*")

    eik_p = sub.add_parser("eikonal-only",
                           help="solve the routing potential once from rho0")
    eik_p.add_argument("--config", required=True)
    eik_p.add_argument("--output", help="override output.dir")

    dump_p = sub.add_parser("scenario-dump",
                            help="write all scenario fields as CSV")
    dump_p.add_argument("--config", required=True)
    dump_p.add_argument("--output", help="override output.dir")
    return parser


def _load_problem(cfg: Config):
    mesh = load_msh(cfg.mesh_path, cfg.outer_patterns(), cfg.wall_patterns())
    scn = build_scenario(mesh, cfg.scenario)
    eik_cfg = EikonalConfig(
        forcing=scn.forcing,
        u_max=scn.u_max,
        rho_max=scn.rho_max,
        eta=cfg.eikonal.eta,
        psi_floor=cfg.eikonal.psi_floor,
        f_floor_fraction=cfg.eikonal.f_floor_fraction,
        grad_tol=cfg.eikonal.grad_tol,
        tol=cfg.eikonal.tol,
    )
    return mesh, scn, eik_cfg


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.output:
        cfg.output.dir = args.output
    if args.figures is not None:
        cfg.output.figures = args.figures
    mesh, scn, eik_cfg = _load_problem(cfg)
    outdir = cfg.output.dir

    writer = output.DiagnosticsWriter(outdir)
    snap_count = 0

    def on_snapshot(step, state):
        nonlocal snap_count
        pot = state.potential
        v_des = stepper_eik_vdes(state)
        output.write_snapshot(
            outdir, step, mesh, state.rho, state.u, pot.phi,
            np.linalg.norm(v_des, axis=1), cfg.output.format,
        )
        snap_count += 1

    # the desired-speed field of a snapshot reuses the state's potential
    eik_for_snap = EikonalSolver(mesh, eik_cfg)

    def stepper_eik_vdes(state):
        return eik_for_snap.desired_speed(state.rho, state.potential)

    try:
        result = run_simulation(
            mesh, scn, cfg.physics, eik_cfg, cfg.time,
            on_snapshot=on_snapshot, on_row=writer.write,
        )
    finally:
        writer.close()

    final = result.snapshots[-1][1]
    print(f"run complete: t = {final.t:.6g} h, {len(result.rows)} steps, "
          f"{snap_count} snapshots -> {outdir}")
    print(f"streets total {result.rows[-1].streets_total:.6g} veh, "
          f"injected {final.injected:.6g}, parked {final.parked:.6g}, "
          f"outflux {final.outflux:.6g}")
    if cfg.output.figures:
        v_des = stepper_eik_vdes(final)
        report.run_figures(outdir, mesh, final,
                           np.linalg.norm(v_des, axis=1), result.rows)
    return 0


def _cmd_validate_mesh(args) -> int:
    patterns = tuple(p.strip() for p in args.outer_groups.split(","))
    walls = tuple(p.strip() for p in args.wall_groups.split(","))
    mesh = load_msh(args.mesh, patterns, walls)
    rep = validate_mesh(mesh)
    print(rep)
    return 0 if rep.passed else 1


def _cmd_eikonal_only(args) -> int:
    cfg = parse_config(args.config)
    if args.output:
        cfg.output.dir = args.output
    mesh, scn, eik_cfg = _load_problem(cfg)
    solver = EikonalSolver(mesh, eik_cfg)
    solver.calibrate(scn.rho0)
    pot = solver.solve(scn.rho0)
    v_des = solver.desired_speed(scn.rho0, pot)
    vnorm = np.linalg.norm(v_des, axis=1)
    output.write_snapshot(
        cfg.output.dir, 0, mesh, scn.rho0,
        np.zeros((mesh.n_nodes, 2)), pot.phi, vnorm, cfg.output.format,
    )
    print(f"potential range [{pot.phi.min():.6g}, {pot.phi.max():.6g}]")
    print(f"max desired speed {vnorm.max():.6g} km/h (U_max = {scn.u_max:g})")
    if cfg.output.figures:
        report.eikonal_figures(cfg.output.dir, mesh, pot.phi, v_des)
    return 0


def _cmd_scenario_dump(args) -> int:
    cfg = parse_config(args.config)
    if args.output:
        cfg.output.dir = args.output
    mesh, scn, _ = _load_problem(cfg)
    import os

    os.makedirs(cfg.output.dir, exist_ok=True)
    path = os.path.join(cfg.output.dir, "scenario.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,x,y,eps,kappa,rho0,qmax,G\n")
        for i in range(mesh.n_nodes):
            fh.write(
                f"{i},{mesh.nodes[i, 0]:.17g},{mesh.nodes[i, 1]:.17g},"
                f"{scn.eps[i]:.17g},{scn.kappa[i]:.17g},{scn.rho0[i]:.17g},"
                f"{scn.q_max[i]:.17g},{scn.forcing[i]:.17g}\n"
            )
    print(f"scenario fields -> {path}")
    print(f"porosity range [{scn.eps.min():.4g}, {scn.eps.max():.4g}], "
          f"max eps*kappa = {(scn.eps * scn.kappa).max():.4g} 1/h")
    if cfg.output.figures:
        report.scenario_figures(cfg.output.dir, mesh, scn)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "validate-mesh": _cmd_validate_mesh,
    "eikonal-only": _cmd_eikonal_only,
    "scenario-dump": _cmd_scenario_dump,
}


def cli_main(argv=None) -> int:
    """Dispatch a CLI invocation; returns the process exit code.

    Exit codes: 0 success, 1 any module error (one-line cause on stderr),
    2 bad arguments (from argparse).
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (PorousCityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
