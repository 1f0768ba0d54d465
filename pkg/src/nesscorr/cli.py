"""Command-line front door.

Subcommands: density, correlation, stationary, occupation, simulate,
verify, decay-study.  Exit codes: 0 pass, 1 check failure, 2 usage or
config error.  The default output directory comes from NESSCORR_OUTDIR.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import verification as vf
from .correlation import evolve_coupled, zero_field
from .density import constant_field, evolve_density, stationary_density
from .io import (
    default_out_dir,
    fmt_float,
    load_experiment_config,
    resolve_profile,
    write_density_csv,
    write_estimate_csv,
    write_report,
    write_triangle_csv,
)
from .models import (
    BEPSpec,
    GLSpec,
    PilesSpec,
    RateFamilySpec,
    UnsupportedError,
    UsageError,
    irw,
    sep,
    sip,
)
from .walks import (
    occupation_time_closed,
    occupation_time_solve,
    stationary_correlation_closed,
    stationary_correlation_solve,
)

__all__ = ["main"]


def _add_model_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=["sep", "sip", "irw", "rate_family",
                                       "gl", "bep", "piles"])
    g.add_argument("--N", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--c", type=float)
    g.add_argument("--d", type=float)
    g.add_argument("--lambda-", "--lambda-minus", dest="lam_minus", type=float,
                   default=1.0)
    g.add_argument("--lambda+", "--lambda-plus", dest="lam_plus", type=float,
                   default=1.0)
    g.add_argument("--rho-", "--rho-minus", dest="rho_minus", type=float)
    g.add_argument("--rho+", "--rho-plus", dest="rho_plus", type=float)
    g.add_argument("--phi-", "--phi-minus", dest="phi_minus", type=float)
    g.add_argument("--phi+", "--phi-plus", dest="phi_plus", type=float)
    g.add_argument("--T-", "--T-minus", dest="t_minus", type=float)
    g.add_argument("--T+", "--T-plus", dest="t_plus", type=float)
    g.add_argument("--beta-", "--beta-minus", dest="beta_minus", type=float)
    g.add_argument("--beta+", "--beta-plus", dest="beta_plus", type=float)
    g.add_argument("--boundary-mode", choices=["generator", "paper"],
                   default="generator")


def _spec_from_args(args) -> object:
    if args.model is None or args.N is None:
        raise UsageError("--model and --N are required (or pass --config)")
    N = args.N

    def need(name, value):
        if value is None:
            raise UsageError(f"model {args.model!r} requires --{name}")
        return value

    if args.model in ("sep", "sip"):
        alpha = need("alpha", args.alpha)
        maker = sep if args.model == "sep" else sip
        return maker(N, alpha, args.lam_minus, args.lam_plus,
                     need("rho-", args.rho_minus), need("rho+", args.rho_plus))
    if args.model == "irw":
        return irw(N, args.c if args.c is not None else 1.0,
                   args.lam_minus, args.lam_plus,
                   need("rho-", args.rho_minus), need("rho+", args.rho_plus))
    if args.model == "rate_family":
        return RateFamilySpec(N, need("c", args.c), need("d", args.d),
                              args.lam_minus, args.lam_plus,
                              need("rho-", args.rho_minus),
                              need("rho+", args.rho_plus))
    if args.model == "gl":
        return GLSpec(N, need("phi-", args.phi_minus), need("phi+", args.phi_plus))
    if args.model == "bep":
        return BEPSpec(N, need("alpha", args.alpha), need("T-", args.t_minus),
                       need("T+", args.t_plus), args.boundary_mode)
    return PilesSpec(N, int(need("alpha", args.alpha)),
                     need("beta-", args.beta_minus), need("beta+", args.beta_plus),
                     args.boundary_mode)


def _outpath(args, default_name: str) -> Path:
    out_dir = Path(args.out_dir) if args.out_dir else default_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / (args.out or default_name)


def _load_cfg(args):
    if args.config:
        return load_experiment_config(args.config)
    return None


def cmd_density(args) -> int:
    cfg = _load_cfg(args)
    spec = cfg["spec"] if cfg else _spec_from_args(args)
    if args.stationary:
        field = stationary_density(spec)
    else:
        t = cfg["t"] if cfg else args.t
        prof = resolve_profile(spec, cfg["profile"] if cfg else args.initial)
        field = evolve_density(spec, prof, t)
    path = _outpath(args, "density.csv")
    write_density_csv(path, field)
    if args.plot:
        from . import plotting

        plotting.plot_density(str(path) + ".png", field)
    print(f"wrote {path}")
    return 0


def cmd_correlation(args) -> int:
    cfg = _load_cfg(args)
    spec = cfg["spec"] if cfg else _spec_from_args(args)
    t = cfg["t"] if cfg else args.t
    prof = resolve_profile(spec, cfg["profile"] if cfg else args.initial)
    phi0 = zero_field(spec)
    _, phi = evolve_coupled(spec, phi0, prof, t)
    path = _outpath(args, "correlation.csv")
    write_triangle_csv(path, phi, spec)
    if args.plot:
        from . import plotting

        plotting.plot_triangle(str(path) + ".png", phi)
    print(f"wrote {path}")
    return 0


def cmd_stationary(args) -> int:
    cfg = _load_cfg(args)
    spec = cfg["spec"] if cfg else _spec_from_args(args)
    phi = stationary_correlation_solve(spec)
    path = _outpath(args, "stationary.csv")
    if args.closed_form:
        closed = stationary_correlation_closed(spec)
        mask = ~phi.geom.is_boundary
        if phi.diagonal_mode == "excluded":
            mask = mask & ~phi.geom.is_diagonal
        maxdiff = float(np.max(np.abs(phi.values[mask] - closed.values[mask])))
        lines = ["x,y,value,closed_form"]
        for (x, y, v) in phi.triangle_table():
            lines.append(f"{x},{y},{fmt_float(v)},{fmt_float(closed.value(x, y))}")
        path.write_text("\n".join(lines) + "\n")
        print(f"max |solve - closed| = {fmt_float(maxdiff)}")
    else:
        write_triangle_csv(path, phi, spec)
    if args.plot:
        from . import plotting

        plotting.plot_triangle(str(path) + ".png", phi)
    print(f"wrote {path}")
    return 0


def cmd_occupation(args) -> int:
    cfg = _load_cfg(args)
    if cfg:
        spec = cfg["spec"]
    elif args.model:
        spec = _spec_from_args(args)
    else:
        if args.N is None or args.c is None or args.d is None:
            raise UsageError("occupation needs --N, --c, --d (or --model/--config)")
        if args.d < 0:
            hi = -args.c / args.d
            rho_m, rho_p = 0.2 * hi, 0.7 * hi
        else:
            rho_m, rho_p = 0.2, 0.7
        spec = RateFamilySpec(args.N, args.c, args.d, args.lam_minus,
                              args.lam_plus, rho_m, rho_p)
    tfield = occupation_time_solve(spec)
    path = _outpath(args, "occupation.csv")
    lines = ["x,y,value"] if not args.closed_form else ["x,y,value,closed_form"]
    closed = None
    if args.closed_form:
        if not isinstance(spec, RateFamilySpec):
            raise UnsupportedError("--closed-form applies to the rate family")
        if spec.lam_minus != 1.0 or spec.lam_plus != 1.0:
            raise UnsupportedError(
                "closed occupation time requires lambda_- = lambda_+ = 1")
        closed = occupation_time_closed(spec.N, spec.c, spec.d)
    geom = tfield.geom
    maxdiff = 0.0
    for i in np.flatnonzero(~geom.is_boundary):
        x, y = int(geom.xs[i]), int(geom.ys[i])
        if closed is None:
            lines.append(f"{x},{y},{fmt_float(tfield.values[i])}")
        else:
            cv = closed.values[i]
            maxdiff = max(maxdiff, abs(cv - tfield.values[i]))
            lines.append(f"{x},{y},{fmt_float(tfield.values[i])},{fmt_float(cv)}")
    path.write_text("\n".join(lines) + "\n")
    if closed is not None:
        print(f"max |solve - closed| = {fmt_float(maxdiff)}")
    print(f"wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    from . import montecarlo as mc

    cfg = _load_cfg(args)
    if cfg:
        spec, t, M, seed = cfg["spec"], cfg["t"], cfg["M"], cfg["seed"]
        family = cfg["family"]
        profile = resolve_profile(spec, cfg["profile"])
        dt = cfg["dt"] if cfg["dt"] else 1e-3
    else:
        spec = _spec_from_args(args)
        t, M, seed, dt = args.t, args.M, args.seed, args.dt
        family = args.initial_family
        profile = resolve_profile(spec, args.initial)
    if family is None:
        family = {"sep": "binomial", "sip": "negative-binomial",
                  "irw": "poisson", "rate_family": "deterministic",
                  "gl": "gaussian", "bep": "gamma",
                  "piles": "negative-binomial"}[spec.kind]
    if M < 2:
        raise UsageError("simulate requires --M >= 2")
    if args.jobs:
        mc.set_threads(args.jobs)
    est = mc.estimate_fields(spec, profile, family, t, M, seed, dt=dt)
    path = _outpath(args, "simulate.csv")
    write_estimate_csv(path, est)
    if not args.no_plot:
        from . import plotting

        plotting.plot_estimate(str(path) + ".png", est)
    print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    cfg = _load_cfg(args)
    spec = cfg["spec"] if cfg else (_spec_from_args(args) if args.model else None)
    checks = []
    suites = set(args.suite)
    if "all" in suites:
        suites = {"closure", "duality", "max-principle", "closed-form"}
    if "closure" in suites:
        target = spec if spec is not None else sep(5, 1, rho_minus=0.2, rho_plus=0.7)
        if isinstance(target, (GLSpec, BEPSpec)):
            raise UsageError("closure verification runs on the jump models")
        cap = args.cap
        if isinstance(target, RateFamilySpec) and target.d < 0:
            cap = None
        checks.append(vf.check_closure(target, cap, times=(0.05, 0.2),
                                       tol=args.tolerance or 1e-8))
    if "duality" in suites:
        target = spec if spec is not None else sip(3, 1, rho_minus=0.2, rho_plus=0.7)
        if isinstance(target, (GLSpec, BEPSpec)):
            checks.append(vf.check_operator_duality(target))
        else:
            checks.append(vf.check_duality(target, args.cap,
                                           tol=args.tolerance or 1e-10))
            checks.append(vf.check_operator_duality(target))
    if "max-principle" in suites:
        c = spec.c if isinstance(spec, RateFamilySpec) else 1.0
        d = spec.d if isinstance(spec, RateFamilySpec) else -1.0
        N = spec.N if spec is not None else 16
        checks.append(vf.check_max_principle(N, c, d, n_random=args.samples,
                                             seed=args.seed))
    if "closed-form" in suites:
        targets = [spec] if spec is not None else [
            sep(8, 1, rho_minus=0.0001, rho_plus=0.9999)]
        for tg in targets:
            if isinstance(tg, RateFamilySpec):
                checks.append(vf.check_closed_form(tg, "occupation", tol=1e-12))
                if tg.lam_minus == 1.0 and tg.lam_plus == 1.0:
                    checks.append(vf.check_closed_form(tg, "stationary"))
            else:
                checks.append(vf.check_closed_form(tg, "stationary"))
    passed = all(c["passed"] for c in checks)
    report = {"passed": passed, "checks": checks}
    path = _outpath(args, "verify.json")
    write_report(path, report)
    for c in checks:
        flag = "PASS" if c["passed"] else "FAIL"
        print(f"[{flag}] {c['name']}: metric={c['metric']:.3e} "
              f"tol={c['tolerance']:.3e}")
    print(f"wrote {path}")
    return 0 if passed else 1


def cmd_decay_study(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    if args.N is None:
        args.N = min(sizes)
    base = _spec_from_args(args)

    def make(N):
        kw = {f.name: getattr(base, f.name) for f in dataclasses.fields(base)}
        kw["N"] = N
        return type(base)(**kw)

    res = vf.decay_study(make, sizes, t=None if args.stationary else args.t)
    path = _outpath(args, "decay.csv")
    lines = ["N,max_abs"]
    for N, m in zip(res["sizes"], res["maxima"]):
        lines.append(f"{N},{fmt_float(m)}")
    path.write_text("\n".join(lines) + "\n")
    report = dict(res)
    report["model"] = base.kind
    report["mode"] = "stationary" if args.stationary else f"t={args.t}"
    jpath = Path(str(path).replace(".csv", "") + ".json")
    write_report(jpath, report)
    if not args.no_plot:
        from . import plotting

        plotting.plot_decay(str(path) + ".png", res["sizes"], res["maxima"],
                            res["slope"], res["intercept"])
    print(f"slope = {fmt_float(res['slope'])}")
    print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nesscorr",
        description="Solvers and simulators for two-point correlations of "
                    "boundary-driven lattice models.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_model=True):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--out", help="output file name")
        p.add_argument("--out-dir", default=os.environ.get("NESSCORR_OUTDIR"),
                       help="output directory (default: NESSCORR_OUTDIR or cwd)")
        p.add_argument("--jobs", type=int, default=os.cpu_count(),
                       help="worker threads for simulation commands")
        p.add_argument("--seed", type=int, default=0)
        if with_model:
            _add_model_flags(p)

    p = sub.add_parser("density", help="mean profile (evolved or stationary)")
    common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--stationary", action="store_true")
    p.add_argument("--initial", default="stationary",
                   help="'stationary', a number, or ignored with --config")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("correlation", help="evolved pair field (triangle CSV)")
    common(p)
    p.add_argument("--t", type=float, required=False, default=0.0)
    p.add_argument("--initial", default="stationary",
                   help="profile of the product initial measure")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_correlation)

    p = sub.add_parser("stationary", help="stationary pair field")
    common(p)
    p.add_argument("--closed-form", action="store_true")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("occupation", help="occupation time of the source set")
    common(p)
    p.add_argument("--closed-form", action="store_true")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_occupation)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble estimate")
    common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--M", type=int, default=10000)
    p.add_argument("--dt", type=float, default=1e-3,
                   help="microscopic Euler-Maruyama step (diffusions)")
    p.add_argument("--initial", default="stationary")
    p.add_argument("--initial-family", default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run verification suites")
    common(p)
    p.add_argument("--suite", action="append", required=True,
                   choices=["closure", "duality", "max-principle",
                            "closed-form", "all"])
    p.add_argument("--cap", type=int, default=8)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("decay-study", help="max |phi| vs N with log-log fit")
    common(p)
    p.add_argument("--sizes", default="8,16,32,64,128",
                   help="comma-separated N values (flag --N is ignored)")
    p.add_argument("--stationary", action="store_true")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_decay_study)

    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnsupportedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
