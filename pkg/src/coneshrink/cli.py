"""Command-line surface: catalog, coeffs, solve, verify, export.

Exit codes are a stable contract:
  0 success, 2 family constraint violation, 3 precision exhausted,
  4 solver failure, 5 verification failure, 6 I/O failure.

A flat key=value config file mirrors the long flags; explicit flags win.
CONESHRINK_PRECISION overrides the default working precision (bits).
"""

import argparse
import json
import os
import sys

import numpy as np

from . import geometry, ivp, series as series_mod
from .catalog import (
    COT_SUM,
    EQ030_LITERAL,
    CurvatureProfile,
    builtin_catalog,
    make_family,
    mean_curvature,
)
from .errors import (
    ConeShrinkError,
    ConstraintViolation,
    ExportIOError,
    NotMeanConvex,
    PrecisionExhausted,
)
from .numutil import atomic_write_text, decimal_str

EXIT_OK = 0
EXIT_CONSTRAINT = 2
EXIT_PRECISION = 3
EXIT_SOLVER = 4
EXIT_VERIFY = 5
EXIT_IO = 6

DEFAULT_EPS_LIST = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


def _default_precision():
    env = os.environ.get("CONESHRINK_PRECISION")
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return 53


def _read_config_file(path):
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConeShrinkError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _family_from_args(args):
    m_minus = args.m_minus if args.m_minus is not None else args.m
    m_plus = args.m_plus if args.m_plus is not None else args.m
    if m_minus is None or m_plus is None:
        raise ConstraintViolation("missing_multiplicity",
                                  "supply --m or both --m-minus and --m-plus")
    return make_family(args.g, int(m_minus), int(m_plus), args.n, args.theta1)


def _add_family_flags(p):
    p.add_argument("--g", type=int, required=False)
    p.add_argument("--m", type=int, default=None, help="both multiplicities at once")
    p.add_argument("--m-minus", dest="m_minus", type=int, default=None)
    p.add_argument("--m-plus", dest="m_plus", type=int, default=None)
    p.add_argument("--n", type=int)
    p.add_argument("--theta1", type=float)


def _add_common_flags(p):
    p.add_argument("--config", default=None, help="flat key=value file; flags override")
    p.add_argument("--precision", type=int, default=None, help="working precision, bits")
    p.add_argument("--K", type=int, default=40, help="series order")
    p.add_argument("--N", type=int, default=8, help="correction order")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--profile-mode", dest="profile_mode",
                   choices=["cot_sum", "eq030"], default="cot_sum")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=["csv", "json", "obj"], default="csv")
    p.add_argument("--jobs", type=int, default=1)


def _apply_config_file(args, subparser):
    if not getattr(args, "config", None):
        return args
    file_vals = _read_config_file(args.config)
    # flags given on the command line win; a value still at its default (or
    # None) is eligible for replacement from the file
    actions = {a.dest: a for a in subparser._actions if a.dest != "help"}
    for key, raw in file_vals.items():
        if key not in actions:
            raise ConeShrinkError(f"{args.config}: unknown key {key!r}")
        action = actions[key]
        current = getattr(args, key, None)
        if current == action.default or current is None:
            typ = action.type
            if isinstance(action.default, bool) or action.const is True:
                setattr(args, key, raw.lower() in ("1", "true", "yes"))
            elif typ in (int, float):
                setattr(args, key, typ(float(raw)) if typ is int else typ(raw))
            else:
                setattr(args, key, raw)
    return args


def _mode(args):
    return EQ030_LITERAL if args.profile_mode == "eq030" else COT_SUM


def _emit(path, text):
    try:
        atomic_write_text(path, text)
    except OSError as exc:
        raise ExportIOError(path, exc) from exc


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def cmd_catalog(args):
    if args.check:
        spec = {}
        for token in args.check:
            if "=" not in token:
                print(f"catalog --check: expected key=value, got {token!r}", file=sys.stderr)
                return EXIT_CONSTRAINT
            k, v = token.split("=", 1)
            spec[k.strip()] = v.strip()
        try:
            g = int(spec["g"])
            n = int(spec["n"])
            theta1 = float(spec["theta1"])
            m_minus = int(spec.get("m_minus", spec.get("m", 0)))
            m_plus = int(spec.get("m_plus", spec.get("m", 0)))
            fam = make_family(g, m_minus, m_plus, n, theta1)
        except KeyError as exc:
            print(f"catalog --check: missing field {exc}", file=sys.stderr)
            return EXIT_CONSTRAINT
        except (ConstraintViolation, NotMeanConvex) as exc:
            print(f"constraint violation: {exc}", file=sys.stderr)
            return EXIT_CONSTRAINT
        h0 = float(mean_curvature(CurvatureProfile(fam), 0.0))
        print(f"valid family: g={fam.g} m_minus={fam.m_minus} m_plus={fam.m_plus} "
              f"n={fam.n} theta1={fam.theta1!r}")
        print(f"d_focal = {fam.d_focal!r}")
        print(f"d0 = {fam.d0!r}")
        print(f"H(0) = {h0!r}")
        return EXIT_OK
    print(f"{'name':<16}{'g':>3}{'m-':>4}{'m+':>4}{'n':>4}  "
          f"{'theta1':<22}{'d0':<22}{'H(0)':<22}")
    for name, fam in builtin_catalog().items():
        h0 = float(mean_curvature(CurvatureProfile(fam), 0.0))
        print(f"{name:<16}{fam.g:>3}{fam.m_minus:>4}{fam.m_plus:>4}{fam.n:>4}  "
              f"{fam.theta1:<22.17g}{fam.d0:<22.17g}{h0:<22.17g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# coeffs
# ---------------------------------------------------------------------------

def cmd_coeffs(args):
    fam = _family_from_args(args)
    prec = args.precision if args.precision is not None else _default_precision()
    try:
        fs = series_mod.compute_coefficients(fam, args.K, prec, profile_mode=_mode(args))
    except PrecisionExhausted as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    record = series_mod.series_to_json_dict(fs)
    if args.corrections:
        corr = series_mod.compute_epsilon_corrections(fam, args.N, prec, series=fs)
        record["B"] = [decimal_str(b, prec) for b in corr.B]
    if args.gevrey:
        rep = series_mod.gevrey_diagnostics(fs)
        record["gevrey_report"] = {
            "C_est": rep.C_est, "verdict": rep.verdict,
            "max_late": rep.max_late, "median_late": rep.median_late,
            "median_mid": rep.median_mid,
        }
    text = json.dumps(record, indent=2)
    if args.out and args.out != "-":
        os.makedirs(args.out, exist_ok=True)
        if args.format == "csv":
            lines = ["k,A_k"] + [f"{k + 1},{v}" for k, v in enumerate(record["A"])]
            _emit(os.path.join(args.out, "coeffs.csv"), "\n".join(lines) + "\n")
        _emit(os.path.join(args.out, "coeffs.json"), text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _parse_d_target(expr, fam):
    if expr is None:
        return None
    expr = expr.strip()
    if expr.startswith("d0"):
        rest = expr[2:].replace(" ", "")
        return fam.d0 + (float(rest) if rest else 0.0)
    return float(expr)


def cmd_solve(args):
    fam = _family_from_args(args)
    prec = args.precision if args.precision is not None else _default_precision()
    config = ivp.SolverConfig(tol=args.tol, profile_mode=_mode(args),
                              series_K=args.K if args.K else 36,
                              correction_N=args.N,
                              precision_bits=prec)
    d_target = _parse_d_target(args.to_d, fam)
    out = args.out
    os.makedirs(out, exist_ok=True)
    try:
        fs = series_mod.compute_coefficients(fam, config.series_K, config.series_prec,
                                             profile_mode=config.profile_mode)
    except PrecisionExhausted as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    try:
        prof_s = ivp.integrate_gamma(fam, fs, config)
        prof_d = ivp.to_d_profile(prof_s, fam)
        prof_ext = ivp.continue_phi(prof_d, fam, d_target=d_target, config=config)
    except ConeShrinkError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    shr = geometry.shrinker_residual(prof_ext, fam)
    energy_col = prof_s["energy_residual"]
    max_energy = (float(np.nanmax(np.abs(energy_col)))
                  if np.any(np.isfinite(energy_col)) else None)

    summary = {
        "family": fam.as_dict(),
        "profile_mode": config.profile_mode,
        "tol": config.tol,
        "d0": fam.d0,
        "d_focal": fam.d_focal,
        "s_end": prof_s.meta["s_end"],
        "s_bootstrap": prof_s.meta.get("s_b"),
        "d_handoff": prof_ext.meta["d_h"],
        "d_target": prof_ext.meta["d_target"],
        "max_energy_residual": max_energy,
        "max_eq130_residual": shr.max_abs,
        "max_eq350_drift": prof_ext.meta["max_identity_drift"],
        "overlap_max_diff": prof_ext.meta["overlap_max_diff"],
    }
    if args.eps_study:
        study = ivp.epsilon_convergence_study(fam, config, DEFAULT_EPS_LIST,
                                              series=fs, jobs=args.jobs)
        summary["eps_study"] = {
            "eps": list(study.eps_list),
            "errors": list(study.errors),
            "slope": study.slope,
            "monotone": study.monotone,
        }
    try:
        ivp.write_profile_csv(prof_s, os.path.join(out, "s_side.csv"))
        ivp.write_profile_csv(prof_ext, os.path.join(out, "d_side.csv"))
        _emit(os.path.join(out, "summary.json"),
              json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except ExportIOError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_s_side(prof, fam, thresholds):
    failures = []
    s = prof["s"]
    gam, dgam, d2gam = prof["gamma"], prof["dgamma"], prof["d2gamma"]
    rep = ivp.energy_residual(prof, fam)
    ok = rep.max_abs <= thresholds["energy_residual"]
    print(f"monitor energy_residual: max {rep.max_abs:.3e} "
          f"(threshold {thresholds['energy_residual']:.1e}) {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("energy_residual")
    profile_eq = CurvatureProfile(fam, prof.meta.get("profile_mode", COT_SUM))
    resid = np.array([
        abs(ivp.equation_residual(si, gi, di, d2i, 0.0, profile_eq))
        for si, gi, di, d2i in zip(s, gam, dgam, d2gam)
    ])
    scale = 1.0 + np.abs(d2gam)
    worst = float(np.max(resid / scale))
    ok = worst <= thresholds["ode_residual"]
    print(f"monitor ode_residual: max {worst:.3e} "
          f"(threshold {thresholds['ode_residual']:.1e}) {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("ode_residual")
    mono = bool(np.all(np.diff(gam) > 0) and np.all(dgam > 0))
    print(f"monitor monotonicity: {'PASS' if mono else 'FAIL'}")
    if not mono:
        failures.append("monotonicity")
    return failures


def _verify_d_side(prof, fam, thresholds):
    failures = []
    d, phi, dphi, g = prof["d"], prof["phi"], prof["dphi"], prof["g"]
    g_ok = float(np.max(np.abs(g - np.exp(-2 * phi))))
    ok = g_ok <= thresholds["g_consistency"]
    print(f"monitor g_consistency: max {g_ok:.3e} "
          f"(threshold {thresholds['g_consistency']:.1e}) {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("g_consistency")
    # equation residual with phi'' taken from the Hermite slope of dphi
    d2 = np.gradient(dphi, d)
    prof_eq = CurvatureProfile(fam, prof.meta.get("profile_mode", COT_SUM))
    h_vals = np.array([float(mean_curvature(prof_eq, dv)) for dv in d])
    eq130 = d2 / (1 + dphi ** 2) + dphi * h_vals - fam.n + 0.5 * np.exp(2 * phi)
    worst = float(np.max(np.abs(eq130[1:-1])))
    ok = worst <= thresholds["eq130_residual"]
    print(f"monitor eq130_residual (finite-difference phi''): max {worst:.3e} "
          f"(threshold {thresholds['eq130_residual']:.1e}) {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("eq130_residual")
    drift_col = prof["eq350_drift"]
    ok = float(np.max(np.abs(drift_col))) <= thresholds["eq350_drift"]
    print(f"monitor eq350_drift: max {float(np.max(np.abs(drift_col))):.3e} "
          f"(threshold {thresholds['eq350_drift']:.1e}) {'PASS' if ok else 'FAIL'}")
    if not ok:
        failures.append("eq350_drift")
    return failures


def cmd_verify(args):
    summary_path = args.summary or os.path.join(os.path.dirname(os.path.abspath(args.profile)),
                                                "summary.json")
    try:
        with open(summary_path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
    except OSError as exc:
        print(f"i/o failure reading {summary_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    f = summary["family"]
    fam = make_family(f["g"], f["m_minus"], f["m_plus"], f["n"], f["theta1"])
    try:
        prof = ivp.read_profile_csv(args.profile, fam)
    except OSError as exc:
        print(f"i/o failure reading {args.profile}: {exc}", file=sys.stderr)
        return EXIT_IO
    prof.meta["profile_mode"] = summary.get("profile_mode", COT_SUM)
    thresholds = {
        "energy_residual": args.energy_threshold,
        "ode_residual": args.ode_threshold,
        "g_consistency": 1e-12,
        "eq130_residual": args.eq130_threshold,
        "eq350_drift": args.drift_threshold,
    }
    if prof.side == ivp.S_SIDE:
        failures = _verify_s_side(prof, fam, thresholds)
    else:
        failures = _verify_d_side(prof, fam, thresholds)
    if failures:
        print(f"verification failed: {', '.join(failures)}", file=sys.stderr)
        return EXIT_VERIFY
    print("verification passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def cmd_export(args):
    summary_path = args.summary or os.path.join(os.path.dirname(os.path.abspath(args.profile)),
                                                "summary.json")
    try:
        with open(summary_path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
        f = summary["family"]
        fam = make_family(f["g"], f["m_minus"], f["m_plus"], f["n"], f["theta1"])
        prof = ivp.read_profile_csv(args.profile, fam)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    if prof.side != ivp.D_SIDE:
        print("export needs a d-side profile", file=sys.stderr)
        return EXIT_SOLVER
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.format == "obj":
            res = geometry.export_mesh(prof, fam, os.path.join(args.out, "end.obj"),
                                       resolution=args.resolution)
            print(f"wrote {res.path} ({res.vertex_count} vertices, "
                  f"{res.face_count} faces, discrete residual {res.discrete_residual})")
        else:
            path = os.path.join(args.out, f"profile.{args.format}")
            geometry.export_profile(prof, path, format=args.format)
            print(f"wrote {path}")
    except ExportIOError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConeShrinkError as exc:
        print(f"export failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="coneshrink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    registry = {}

    p_cat = sub.add_parser("catalog", help="list built-in families or --check one")
    p_cat.add_argument("--check", nargs="*", default=None,
                       metavar="key=value", help="validate a family tuple")
    p_cat.set_defaults(func=cmd_catalog)

    p_coef = sub.add_parser("coeffs", help="series coefficients, corrections, Gevrey report")
    _add_family_flags(p_coef)
    _add_common_flags(p_coef)
    p_coef.add_argument("--gevrey", action="store_true")
    p_coef.add_argument("--corrections", action="store_true")
    p_coef.set_defaults(func=cmd_coeffs)

    p_solve = sub.add_parser("solve", help="integrate, convert, continue, write artifacts")
    _add_family_flags(p_solve)
    _add_common_flags(p_solve)
    p_solve.add_argument("--to-d", dest="to_d", default=None,
                         help="continuation target, e.g. 'd0+0.05' or a number")
    p_solve.add_argument("--eps-study", dest="eps_study", action="store_true")
    p_solve.set_defaults(func=cmd_solve)

    p_ver = sub.add_parser("verify", help="recompute monitors from a stored profile")
    p_ver.add_argument("profile")
    p_ver.add_argument("--summary", default=None)
    p_ver.add_argument("--energy-threshold", type=float, default=1e-6)
    p_ver.add_argument("--ode-threshold", type=float, default=1e-8)
    p_ver.add_argument("--eq130-threshold", type=float, default=0.05)
    p_ver.add_argument("--drift-threshold", type=float, default=1e-5)
    p_ver.set_defaults(func=cmd_verify)

    p_exp = sub.add_parser("export", help="profile CSV/JSON or OBJ mesh")
    p_exp.add_argument("profile")
    p_exp.add_argument("--summary", default=None)
    p_exp.add_argument("--out", default=".")
    p_exp.add_argument("--format", choices=["csv", "json", "obj"], default="csv")
    p_exp.add_argument("--resolution", type=int, default=64)
    p_exp.set_defaults(func=cmd_export)
    registry.update(catalog=p_cat, coeffs=p_coef, solve=p_solve,
                    verify=p_ver, export=p_exp)
    return parser, registry


def main(argv=None) -> int:
    parser, registry = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "config"):
        args = _apply_config_file(args, registry[args.command])
    try:
        return args.func(args)
    except (ConstraintViolation, NotMeanConvex) as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except PrecisionExhausted as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except ExportIOError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConeShrinkError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
