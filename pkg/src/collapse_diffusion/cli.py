"""Command-line entry point: ``collapse-diffusion <command> [options]``.

Grids and paths are written as CSV (a ``#`` comment line with argv and
seed, then a header), reports as JSON. Energy commands work in units with
E0 = 1 and the elapsed time set to 1, so ``--dtm`` is D t / m in units of
E0 and ``--hubble-t`` is kappa t.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import analytics, fokker_planck, phase, qmupl, relativistic, stats, units
from .units import DomainError

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def write_csv(path, header, rows, argv, seed=None):
    fh = _open_out(path)
    try:
        fh.write(f"# argv: {' '.join(argv)} | seed: {seed if seed is not None else 'n/a'}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def write_json(path, obj):
    fh = _open_out(path)
    try:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _params(args):
    if getattr(args, "params", None):
        return units.load_params(args.params)
    return units.parse_params({})


# --- commands -------------------------------------------------------------------

def cmd_table1(args, argv):
    pf = _params(args)
    rows = units.table1(pf.species, pf.csl)
    write_csv(args.out, ("name", "sigma_inf_m", "t_loc_s", "sigma_inf", "t_loc"),
              [(n, s, t, units.format_length(s), units.format_duration(t)) for n, s, t in rows],
              argv)


def cmd_simulate_qmupl(args, argv):
    cfg = qmupl.QmuplConfig(D=args.d, dt=args.dt, n_grid=args.grid, t_max=args.tmax)
    seeds = [args.seed + i for i in range(args.seeds)]
    traces = qmupl.ensemble(cfg, seeds, record_every=args.record_every)
    rows = []
    for s, tr in zip(seeds, traces):
        for t, var_x, cr, mx, mp in tr:
            rows.append((s, t, var_x, cr, mx, mp))
    write_csv(args.out, ("seed", "t", "var_x", "curvature_ratio", "mean_x", "mean_p"), rows,
              argv, args.seed)


def cmd_simulate_phase(args, argv):
    n_steps = max(1, int(round(args.tmax / args.dt)))
    record = max(1, n_steps // args.records)
    out = phase.simulate_ensemble(args.d, 1.0, args.dt, n_steps, args.paths, seed=args.seed,
                                  record_every=record)
    rows = [(*r, 2 * args.d * r[0], 3 * args.d * r[0]) for r in out["moments"]]
    write_csv(args.out, (*phase.MOMENT_COLUMNS, "var_P_expected", "mean_E_expected"), rows,
              argv, args.seed)


def cmd_simulate_energy(args, argv):
    dt = None if args.scheme == "exact" and args.steps is None else 1.0 / (args.steps or 200)
    E = relativistic.terminal_energies(args.e0, args.dtm, 1.0, args.hubble_t, 1.0, args.paths,
                                       seed=args.seed, scheme=args.scheme, dt=dt)
    write_csv(args.out, ("path", "E"), enumerate(E), argv, args.seed)


def _cir(args):
    if not args.dtm > 0:
        raise DomainError("--dtm must be positive")
    return analytics.CirParams.from_groups(args.dtm, args.hubble_t)


def cmd_density(args, argv):
    cir = _cir(args)
    kind = "asymptotic" if args.asymptotic else "stationary" if args.stationary else "transition"
    if kind == "stationary" and not cir.kappa > 0:
        raise DomainError("stationary law needs --hubble-t > 0")
    g = analytics.density_grid(args.e0, cir, n=args.points, kind=kind)
    write_csv(args.out, ("energy", "density", "log_density"),
              zip(g.energies, g.density, g.log_density), argv)


def cmd_pde(args, argv):
    cir = _cir(args)
    steps = args.steps or 2000
    g = fokker_planck.solve_forward(args.e0, args.dtm, 1.0, args.hubble_t, 1.0,
                                    {"cells": args.cells}, dt=1.0 / steps)
    exact = analytics.transition_density(g.energies, args.e0, cir)
    write_csv(args.out, ("energy", "density", "transition_density"),
              zip(g.energies, g.p, exact), argv)


def _read_samples(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(io.StringIO("".join(lines)))
    col = "E" if "E" in reader.fieldnames else reader.fieldnames[-1]
    return np.array([float(r[col]) for r in reader])


def cmd_compare(args, argv):
    cir = _cir(args)
    samples = stats.SampleSet(_read_samples(args.samples))
    if args.against == "analytic":
        cdf = analytics.transition_cdf(args.e0, cir)
    else:
        g = fokker_planck.solve_forward(args.e0, args.dtm, 1.0, args.hubble_t, 1.0,
                                        {"cells": args.cells}, dt=1.0 / 2000)
        c = np.concatenate([[0.0], np.cumsum(g.p * g.widths)])
        faces = g.faces

        def cdf(x):
            return np.interp(x, faces, c)
    report = stats.ks_test(samples, cdf)
    mean, var = analytics.transition_moments(args.e0, cir)
    report.moments = stats.moment_compare(samples, mean, var)
    out = report.as_dict()
    out["against"] = args.against
    write_json(args.out, out)


def estimate_report(pf: units.ParamFile, species_name="proton"):
    consts = units.SI
    matches = [s for s in pf.species if s.name.lower().startswith(species_name.lower())]
    sp = matches[0] if matches else units.ParticleSpecies("proton", consts.nucleon_mass)
    t = units.UNIVERSE_AGE_S
    report = {"species": sp.name, "mass_kg": sp.mass, "t_s": t,
              "lambda_alpha": pf.csl.lambda_alpha, "hubble": pf.cosmology.hubble}
    D = units.diffusion_coefficient(pf.csl, consts, sp.mass)
    if D == 0:
        report.update(collapse=False, D=0.0, sigma_inf=None, t_loc=None, omega=None,
                      Dt_over_m=0.0,
                      note="no collapse: no steady-state width, no energy diffusion")
    else:
        mc2 = sp.mass * consts.c ** 2
        report.update(
            collapse=True, D=D,
            sigma_inf=units.steady_state_width(D, sp.mass, consts),
            sigma_inf_text=units.format_length(units.steady_state_width(D, sp.mass, consts)),
            t_loc=units.localization_time(D, sp.mass, consts),
            t_loc_text=units.format_duration(units.localization_time(D, sp.mass, consts)),
            # omega in inverse joules and in units of 1/(m c^2)
            omega=pf.cosmology.hubble * sp.mass / D,
            omega_mc2=pf.cosmology.hubble * sp.mass / D * mc2,
            Dt_over_m=units.energy_gain_estimate(pf.csl, consts, sp.mass, t),
        )
    for key, csl in (("grw", units.GRW), ("cub", units.CUB)):
        computed = units.energy_gain_estimate(csl, consts, sp.mass, t)
        quoted = units.QUOTED_DT_OVER_M[key]
        gap = math.log10(quoted / computed)
        report[f"Dt_over_m_{key}"] = computed
        report[f"Dt_over_m_{key}_quoted"] = quoted
        report[f"Dt_over_m_{key}_log10_gap"] = gap
        report[f"Dt_over_m_{key}_status"] = (
            "documented discrepancy" if abs(gap) >= 1 else "consistent to order of magnitude")
    report["units"] = {"Dt_over_m": "m c^2", "sigma_inf": "m", "t_loc": "s"}
    return report


def cmd_estimate(args, argv):
    write_json(args.out, estimate_report(_params(args), args.species))


# --- parser ---------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="collapse-diffusion",
                description="Spontaneous-localization energy diffusion toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, fn, help_, seeded=False):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--params", help="JSON parameter file")
        sp.add_argument("--out", help="output path (default stdout)")
        if seeded:
            sp.add_argument("--seed", type=_u64, default=0)
        sp.set_defaults(func=fn)
        return sp

    def energy_args(sp):
        sp.add_argument("--e0", type=float, default=1.0)
        sp.add_argument("--dtm", type=float, required=True, help="D t / m in units of E0")
        sp.add_argument("--hubble-t", type=float, default=0.0, help="kappa t")

    add("table1", cmd_table1, "steady-state widths and localization times")

    sp = add("simulate-qmupl", cmd_simulate_qmupl, "wave-packet localization runs", True)
    sp.add_argument("--d", type=float, default=1.0)
    sp.add_argument("--grid", type=int, default=2048)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--tmax", type=float, default=5.0)
    sp.add_argument("--seeds", type=int, default=1)
    sp.add_argument("--record-every", type=int, default=50)

    sp = add("simulate-phase", cmd_simulate_phase, "phase-space diffusion ensemble", True)
    sp.add_argument("--d", type=float, default=1.0)
    sp.add_argument("--paths", type=int, default=10000)
    sp.add_argument("--dt", type=float, default=0.01)
    sp.add_argument("--tmax", type=float, default=1.0)
    sp.add_argument("--records", type=int, default=10)

    sp = add("simulate-energy", cmd_simulate_energy, "energy diffusion ensemble", True)
    energy_args(sp)
    sp.add_argument("--paths", type=int, default=10000)
    sp.add_argument("--scheme", choices=relativistic.SCHEMES, default="exact")
    sp.add_argument("--steps", type=int, default=None, help="time steps (truncation scheme)")

    sp = add("density", cmd_density, "tabulated transition density")
    energy_args(sp)
    grp = sp.add_mutually_exclusive_group()
    grp.add_argument("--asymptotic", action="store_true")
    grp.add_argument("--stationary", action="store_true")
    sp.add_argument("--points", type=int, default=2001)

    sp = add("pde", cmd_pde, "finite-volume forward-equation solve")
    energy_args(sp)
    sp.add_argument("--cells", type=int, default=4000)
    sp.add_argument("--steps", type=int, default=None)

    sp = add("compare", cmd_compare, "KS and moment report for a sample CSV")
    energy_args(sp)
    sp.add_argument("--samples", required=True)
    sp.add_argument("--against", choices=("analytic", "pde"), default="analytic")
    sp.add_argument("--cells", type=int, default=4000)

    sp = add("estimate", cmd_estimate, "derived-quantity report (sigma_inf, t_loc, Dt/m)")
    sp.add_argument("--species", default="proton")
    return p


def _u64(s):
    v = int(s)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args, argv)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def main():
    sys.exit(dispatch())
