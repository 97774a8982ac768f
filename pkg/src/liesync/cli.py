"""Command-line interface: ``liesync {run,verify,sweep,pls,check-phi}``.

Exit codes: 0 success, 1 unexpected error, 2 usage or scenario error,
3 blowup event, 4 chart violation, 5 verify-block failure.  The default
output directory is ``$LIESYNC_OUT`` (falling back to ``./liesync_out``).
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, pls
from .groups import ConfigurationError, make_group
from .interactions import check_hypothesis_H, get_phi, phi_catalog
from .scenario import (
    EXIT_ERROR,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFY,
    ScenarioError,
    build,
    load_scenario,
    load_suite,
    run_scenario,
    suite_names,
)

ENV_OUT = "LIESYNC_OUT"
SWEEP_PARAMS = ("kappa", "N", "radius", "h_norm")


def _out_dir(args, name: str) -> Path:
    base = args.out or os.environ.get(ENV_OUT) or "liesync_out"
    return Path(base) / name if not args.out else Path(base)


def _print_checks(name, result):
    for c in result.checks:
        print(f"[{name}] {c.line()}")


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    out = _out_dir(args, sc.name)
    res = run_scenario(sc, out_dir=out, fmt=args.format, seed_override=args.seed_override)
    _print_checks(sc.name, res)
    ev = res.context.traj.event
    if ev is not None:
        print(f"[{sc.name}] event {ev.kind} at t={ev.t_detected:.6g} (last valid t={ev.t_last_valid:.6g}): {ev.reason}")
    print(f"[{sc.name}] wrote {out} exit={res.exit_code}")
    return res.exit_code


def cmd_verify(args) -> int:
    names = list(args.suites)
    if args.all:
        names = suite_names()
    if not names or any(not n for n in names):
        print("verify: give at least one suite name (or --all); available: "
              + ", ".join(suite_names()), file=sys.stderr)
        return EXIT_USAGE
    scenarios = [load_suite(n) for n in names]

    def one(sc):
        out = _out_dir(args, sc.name) if args.out or os.environ.get(ENV_OUT) else None
        return run_scenario(sc, out_dir=out, seed_override=args.seed_override)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(one, scenarios))
    failed = 0
    for sc, res in zip(scenarios, results):
        _print_checks(sc.name, res)
        failed += sum(not c.passed for c in res.checks)
    total = sum(len(r.checks) for r in results)
    print(f"{total - failed}/{total} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def _sweep_variant(sc, param, value):
    if param == "kappa":
        return replace(sc, kappa=float(value))
    if param == "N":
        return replace(sc, N=int(value))
    if param == "radius":
        ini = dict(sc.initial)
        key = "diameter" if ini.get("kind") == "random_diameter" else "radius"
        ini[key] = float(value)
        return replace(sc, initial=ini)
    if param == "h_norm":
        h = dict(sc.hamiltonians)
        h["norm"] = float(value)
        return replace(sc, hamiltonians=h)
    raise ScenarioError(f"sweep parameter must be one of {SWEEP_PARAMS}")


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ScenarioError(f"--values: cannot parse {args.values!r}") from None
    if not values:
        raise ScenarioError("--values: need at least one value")
    if args.param == "kappa" and args.relative:
        # values are multiples of ||H||_inf
        h = build(sc)[1].h_inf
        values = [v * h for v in values]
    variants = [_sweep_variant(sc, args.param, v) for v in values]

    def one(v_sc):
        res = run_scenario(v_sc, seed_override=args.seed_override, diagnostics=True)
        spec = res.context.spec
        traj = res.context.traj
        diam = analysis.diameter(spec.group, traj.final.elements)
        y = analysis.y_inf_series(spec.group, traj)
        ok = np.isfinite(y) & (y > 0)
        try:
            rate = analysis.fit_decay_rate(traj.times[ok], y[ok]).rate
        except analysis.FitError:
            rate = float("nan")
        locked = float("nan")
        if args.pls:
            try:
                locked = pls.locked_diameter(pls.solve_pls(spec, seed=args.seed_override or 1), spec.group)
            except pls.SolverError:
                pass
        ev = traj.event.kind if traj.event else "none"
        return diam, rate, locked, ev, res.exit_code

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(pool.map(one, variants))
    out = _out_dir(args, f"{sc.name}_sweep_{args.param}")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([args.param, "final_diameter", "y_inf_rate", "locked_diameter", "event", "exit_code"])
        for v, (diam, rate, locked, ev, code) in zip(values, rows):
            w.writerow(["%.17g" % v, "%.17g" % diam, "%.17g" % rate, "%.17g" % locked, ev, code])
            print(f"{args.param}={v:g} final_diameter={diam:.6g} rate={rate:.6g} locked_diameter={locked:.6g} event={ev}")
    locked = np.array([r[2] for r in rows])
    if args.param == "kappa" and len(values) > 1 and np.all(np.isfinite(locked)) and np.all(locked > 0):
        slope = np.polyfit(np.log(values), np.log(locked), 1)[0]
        print(f"log-log slope of locked diameter vs kappa: {slope:.4f}")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_pls(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seed_override is not None:
        from .scenario import _override_seeds

        sc = _override_seeds(sc, args.seed_override)
    _, spec, _, _ = build(sc)
    try:
        sol = pls.solve_pls(spec, seed=args.seed, tol=args.tol)
    except pls.SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    g = spec.group
    np.set_printoptions(precision=12, suppress=False)
    print(f"group = {sc.family}{sc.d}")
    print(f"N = {spec.N}")
    print(f"kappa = {spec.kappa!r}")
    print(f"gauge = {sol.gauge}")
    print(f"residual = {sol.residual:.3e}")
    print(f"iterations = {sol.iterations}")
    print(f"locked_diameter = {pls.locked_diameter(sol, g)!r}")
    print(f"Lambda_coords = {g.coords(sol.Lambda).tolist()}")
    for i, X in enumerate(sol.elements):
        print(f"X{i + 1} =\n{X}")
    out = _out_dir(args, sc.name)
    out.mkdir(parents=True, exist_ok=True)
    pls.save_pls(out / "pls.json", sol, spec)
    print(f"wrote {out / 'pls.json'}")
    return EXIT_OK


def cmd_check_phi(args) -> int:
    if args.list:
        for phi in phi_catalog():
            print(f"{phi.id}: {', '.join(phi.families)}")
        return EXIT_OK
    if not args.phi or not args.group:
        print("check-phi: --phi and --group are required (or --list)", file=sys.stderr)
        return EXIT_USAGE
    entry = make_group(args.group, args.d)
    rep = check_hypothesis_H(get_phi(args.phi), entry)
    spec = ", ".join(f"{z.real:.6g}{z.imag:+.3g}j" for z in rep.spectrum)
    print(f"phi = {args.phi}")
    print(f"group = {args.group}{args.d}")
    print(f"pass = {str(rep.passed).lower()}")
    print(f"phi(e) = {rep.phi_at_identity:.3e}")
    print(f"spectrum = [{spec}]")
    if rep.reason:
        print(f"reason = {rep.reason}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liesync", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help=f"output directory (default ${ENV_OUT} or ./liesync_out)")
    common.add_argument("--threads", type=int, default=1, metavar="N")
    common.add_argument("--seed-override", type=int, default=None, metavar="K")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="integrate a scenario and write artifacts")
    r.add_argument("--scenario", required=True, metavar="PATH")
    r.add_argument("--format", choices=("csv", "binary"), default="csv")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", parents=[common], help="run bundled verification suites")
    v.add_argument("suites", nargs="*", help="suite names or scenario files")
    v.add_argument("--all", action="store_true", help="run every bundled suite")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", parents=[common], help="run a scenario over parameter values")
    s.add_argument("--scenario", required=True, metavar="PATH")
    s.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--relative", action="store_true", help="kappa values are multiples of ||H||_inf")
    s.add_argument("--pls", action="store_true", help="also solve for the locked state per value")
    s.set_defaults(func=cmd_sweep)

    q = sub.add_parser("pls", parents=[common], help="solve and print a phase-locked state")
    q.add_argument("--scenario", required=True, metavar="PATH")
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--tol", type=float, default=1e-10)
    q.set_defaults(func=cmd_pls)

    c = sub.add_parser("check-phi", parents=[common], help="hypothesis (H) report for an interaction")
    c.add_argument("--phi")
    c.add_argument("--group", help="group id: circle, u, su, gl_c, sl_c, so")
    c.add_argument("--d", type=int, default=2)
    c.add_argument("--list", action="store_true", help="list the interaction catalog")
    c.set_defaults(func=cmd_check_phi)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ScenarioError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level reporter
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
