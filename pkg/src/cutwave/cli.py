"""Command line interface.

Subcommands:
  converge  - refinement studies, writes convergence.csv plus figures
  cutsweep  - small-cut robustness sweep, writes cutsweep.csv plus figures
  run       - time-domain simulation with VTK + figure snapshots
  quadtest  - dump cut-cell quadrature rules as CSV for inspection

Configuration files are plain ``key = value`` lines with ``#`` comments;
unknown keys are hard errors with line numbers.  Defaults reproduce the
reference setup: sandstone/granite materials, unit cavity radius,
omega = pi, end time 2.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import analysis, figures, output
from .forms import Material, PenaltyConfig
from .geometry import CircleLevelSet, GeometryError
from .quadrature import (QuadratureError, cut_cell_surface_rule,
                         cut_cell_volume_rule, full_cell_rule)
from .system import (assemble, export_triplets, set_initial_conditions,
                     simulate, stable_time_step)


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    problem: str = "single"
    order: int = 2
    cells: int = 24
    t_end: float = 2.0
    safety: float = 0.2
    omega: float = math.pi
    radius: float = 1.0
    interface_offset: float = analysis.default_interface_offset()
    rho1: float = 1.0
    lambda1: float = 1.1429
    mu1: float = 1.0
    rho2: float = 1.1154
    lambda2: float = 2.6182
    mu2: float = 1.8
    quad_degree: int = 0
    gamma_dirichlet: float = 0.0
    gamma_interface: float = 0.0
    gamma_mass1: float = -1.0
    gamma_mass2: float = -1.0
    gamma_stiffness1: float = -1.0
    gamma_stiffness2: float = -1.0
    snapshot_times: tuple = (0.5, 1.0, 1.5, 2.0)
    sample_resolution: int = 101

    def material(self, i: int) -> Material:
        if i == 1:
            return Material(self.rho1, self.lambda1, self.mu1)
        return Material(self.rho2, self.lambda2, self.mu2)

    def penalty(self) -> PenaltyConfig | None:
        """Penalty overrides; sentinel values mean 'use the formulas'."""
        m1, m2 = self.material(1), self.material(2)
        base = PenaltyConfig.defaults(self.order, m1,
                                      m2 if self.problem == "interface"
                                      else None)
        gm = list(base.gamma_mass)
        ga = list(base.gamma_stiffness)
        if self.gamma_mass1 >= 0.0:
            gm[0] = self.gamma_mass1
        if self.gamma_mass2 >= 0.0:
            gm[1] = self.gamma_mass2
        if self.gamma_stiffness1 >= 0.0:
            ga[0] = self.gamma_stiffness1
        if self.gamma_stiffness2 >= 0.0:
            ga[1] = self.gamma_stiffness2
        return PenaltyConfig(
            gamma_dirichlet=self.gamma_dirichlet or base.gamma_dirichlet,
            gamma_interface=self.gamma_interface or base.gamma_interface,
            gamma_mass=tuple(gm), gamma_stiffness=tuple(ga),
            kappa=base.kappa)


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines into a RunConfig."""
    cfg = RunConfig()
    types = {f.name: type(getattr(cfg, f.name))
             for f in dataclass_fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        try:
            if types[key] is tuple:
                parsed = tuple(float(v) for v in value.split(",") if v.strip())
            elif types[key] is int:
                parsed = int(value)
            elif types[key] is float:
                parsed = float(value)
            else:
                parsed = value
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': {exc}")
        setattr(cfg, key, parsed)
    if cfg.problem not in ("single", "interface"):
        raise ConfigError(f"problem must be 'single' or 'interface', "
                          f"got '{cfg.problem}'")
    if not 1 <= cfg.order <= 5:
        raise ConfigError(f"order must be in 1..5, got {cfg.order}")
    return cfg


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text())


def _executor(args):
    if args.deterministic or args.threads <= 1:
        return None
    return ThreadPoolExecutor(max_workers=args.threads)


def _parse_orders(text: str) -> list[int]:
    try:
        orders = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"bad --orders list: {text!r}")
    if not orders or any(not 1 <= p <= 5 for p in orders):
        raise ConfigError(f"orders must be in 1..5: {text!r}")
    return orders


def cmd_converge(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    orders = _parse_orders(args.orders)
    cfg = _load_config(args.config)
    scenarios = (["single", "interface", "static"]
                 if args.scenario == "all" else [args.scenario])
    executor = _executor(args)
    records = []
    for scen in scenarios:
        recs = analysis.convergence_study(
            scen, orders, refinements=args.refinements,
            t_end=cfg.t_end, safety=cfg.safety,
            quad_degree=cfg.quad_degree or None, executor=executor)
        records.extend(recs)
        figures.convergence_figure(recs, out / f"convergence_{scen}.png")
    if executor is not None:
        executor.shutdown()
    output.write_convergence_csv(records, out / "convergence.csv")
    for r in records:
        print(f"{r.scenario} p={r.p} h={r.h:.5g} dofs={r.dofs} "
              f"l2={r.l2_error:.4e} h1={r.h1_error:.4e} "
              f"order={r.fitted_order:.3f}")
    return 0


def cmd_cutsweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    orders = _parse_orders(args.orders)
    fractions = np.logspace(-1, -10, 10)
    problems = (["single", "interface"] if args.problem == "both"
                else [args.problem])
    executor = _executor(args)
    records = []
    for p in orders:
        recs_p = []
        for problem in problems:
            recs = analysis.cut_sweep(problem, p, fractions,
                                      stabilize=not args.no_stabilization,
                                      executor=executor)
            recs_p.extend(recs)
        figures.cutsweep_figure(recs_p, out / f"cutsweep_p{p}.png")
        records.extend(recs_p)
    if executor is not None:
        executor.shutdown()
    output.write_cutsweep_csv(records, out / "cutsweep.csv")
    if args.dump_matrices:
        for problem in problems:
            for p in orders:
                frac = fractions[0]
                if problem == "single":
                    prob = analysis.sweep_single_problem(
                        frac, p, stabilize=not args.no_stabilization)
                else:
                    prob = analysis.sweep_interface_problem(
                        frac, p, stabilize=not args.no_stabilization)
                system = assemble(prob)
                tag = f"{problem}_p{p}"
                export_triplets(system.mass, out / f"mass_{tag}.txt")
                export_triplets(system.stiffness,
                                out / f"stiffness_{tag}.txt")
    for r in records:
        print(f"{r.problem} p={r.p} hcut/h={r.fraction:.1e} "
              f"cond(M)={r.cond_mass:.4e} cond(A)={r.cond_stiffness:.4e} "
              f"cfl={r.cfl:.6f}")
    return 0


def cmd_run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _load_config(args.config)
    qd = cfg.quad_degree or None
    if cfg.problem == "single":
        prob, exact = analysis.single_wave_problem(
            cfg.cells, cfg.order, material=cfg.material(1), omega=cfg.omega,
            radius=cfg.radius, quad_degree=qd, penalty=cfg.penalty())
        ic_u = [exact.displacement]
        ic_v = [exact.velocity]
    else:
        prob, exact = analysis.interface_wave_problem(
            cfg.cells, cfg.order, cfg.interface_offset,
            mat_in=cfg.material(1), mat_out=cfg.material(2), omega=cfg.omega,
            quad_degree=qd, penalty=cfg.penalty())
        sides = [exact.side(1), exact.side(2)]
        ic_u = [s.displacement for s in sides]
        ic_v = [s.velocity for s in sides]
    system = assemble(prob)
    if args.dump_matrices:
        export_triplets(system.mass, out / "mass.txt")
        export_triplets(system.stiffness, out / "stiffness.txt")
    state = set_initial_conditions(
        system,
        [lambda q, f=f: f(q, 0.0) for f in ic_u],
        [lambda q, f=f: f(q, 0.0) for f in ic_v])
    dt = stable_time_step(system, cfg.safety)
    times = sorted(t for t in cfg.snapshot_times if 0.0 < t <= cfg.t_end)
    print(f"{cfg.problem}: {system.n_dofs} dofs, dt={dt:.5g}, "
          f"T={cfg.t_end}")
    for idx, t_snap in enumerate(times, start=1):
        state = simulate(system, state, t_snap, dt)
        origin, spacing, values = output.sample_field_magnitude(
            system, state.xi, cfg.sample_resolution)
        stem = f"snapshot_{idx:04d}"
        output.write_vtk_structured(
            out / f"{stem}.vtk", f"displacement magnitude t={state.t:.6f}",
            origin, spacing, values)
        figures.snapshot_figure(origin, spacing, values, state.t,
                                out / f"{stem}.png")
        print(f"wrote {stem} at t={state.t:.4f}")
    if state.t < cfg.t_end:
        state = simulate(system, state, cfg.t_end, dt)
    return 0


def cmd_quadtest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    degree = args.degree
    phi = CircleLevelSet((0.0, 0.0), 1.0)
    bounds = (0.3, 0.5, 1.3, 1.5)  # genuinely cut by the unit circle
    vol_in = cut_cell_volume_rule(bounds, phi, "inside", degree)
    vol_out = cut_cell_volume_rule(bounds, phi, "outside", degree)
    surf = cut_cell_surface_rule(bounds, phi, degree)
    full = full_cell_rule(bounds, degree)
    output.write_rule_csv(vol_in, out / "volume_inside.csv")
    output.write_rule_csv(vol_out, out / "volume_outside.csv")
    output.write_rule_csv(surf, out / "surface.csv")
    output.write_rule_csv(full, out / "full_cell.csv")
    a_in = vol_in.weights.sum()
    a_out = vol_out.weights.sum()
    cell_area = (bounds[2] - bounds[0]) * (bounds[3] - bounds[1])
    print(f"cell {bounds}: inside {a_in:.12f} + outside {a_out:.12f} "
          f"= {a_in + a_out:.12f} (cell area {cell_area})")
    print(f"surface length {surf.weights.sum():.12f}, "
          f"{surf.n} points, wrote rules to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutwave",
        description="cut finite element solver for the elastic wave "
                    "equation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", default=None,
                        help="key = value configuration file")
        sp.add_argument("--out", metavar="DIR", default="out",
                        help="output directory")
        sp.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker threads across study configurations")
        sp.add_argument("--deterministic", action="store_true",
                        help="force sequential, reproducible execution")

    sp = sub.add_parser("converge", help="refinement study")
    common(sp)
    sp.add_argument("--orders", default="1,2,3", metavar="LIST",
                    help="comma-separated element orders")
    sp.add_argument("--refinements", type=int, default=3, metavar="N")
    sp.add_argument("--scenario", default="all",
                    choices=["single", "interface", "static", "all"])
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("cutsweep", help="small-cut robustness sweep")
    common(sp)
    sp.add_argument("--orders", default="2", metavar="LIST")
    sp.add_argument("--problem", default="both",
                    choices=["single", "interface", "both"])
    sp.add_argument("--no-stabilization", action="store_true",
                    help="disable the jump penalty (diagnostic)")
    sp.add_argument("--dump-matrices", action="store_true",
                    help="export assembled operators as triplet text")
    sp.set_defaults(func=cmd_cutsweep)

    sp = sub.add_parser("run", help="time-domain simulation with snapshots")
    common(sp)
    sp.add_argument("--dump-matrices", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("quadtest", help="dump cut quadrature rules")
    common(sp)
    sp.add_argument("--degree", type=int, default=6)
    sp.set_defaults(func=cmd_quadtest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GeometryError, QuadratureError, ValueError,
            ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
