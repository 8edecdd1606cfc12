"""Command line interface.

Exit codes: 0 success or all checks pass, 2 a check fails, 3 configuration
error.
"""

import argparse
import json
import math
import sys

import numpy as np

from .asymptotics import amplitude_asymptotic, amplitude_bound, period_asymptotic, period_bounds
from .config import load_config
from .exceptions import ConfigError, GlaciaError
from .experiments import (
    SweepSpec,
    csv_text,
    fit_correction_power_law,
    report_text,
    reproduce_report,
    run_sweep,
    run_timeseries,
    sweep_csv,
)
from .full_model import find_critical_points, nullcline_table
from .parametrization import dimensionalize
from .reduced_model import check_assumptions

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 2, 3


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "value"):
        return obj.value
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _emit(args, payload, text: str | None = None):
    if args.json or text is None:
        out = json.dumps(payload, indent=2, default=_json_default)
    else:
        out = text
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    else:
        print(out)


def cmd_analyze(args, cfg):
    full = cfg.full_params()
    if args.mu is not None:
        full = full.with_mu(args.mu)
    reports = find_critical_points(full)
    if args.nullclines:
        rows = nullcline_table(full, np.linspace(args.theta_min, args.theta_max, args.nullcline_points))
        header = ["theta", "h", "k_plus", "k_minus"]
        with open(args.nullclines, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text(header, [[r[k] for k in header] for r in rows]))
    payload = {
        "mu": full.mu,
        "kappa": float(full.kappa(1.0)),
        "critical_points": [r.to_dict() for r in reports],
    }
    if args.dimensional:
        ds = cfg.scales
        for row, r in zip(payload["critical_points"], reports):
            row["T_kelvin"] = float(dimensionalize(r.location.theta, "theta", ds))
            row["L_meters"] = float(dimensionalize(r.location.lam, "lambda", ds))
    lines = [f"mu = {full.mu:.6g}, {len(reports)} critical point(s)"]
    for r in reports:
        mc = "-" if r.mu_critical is None else f"{r.mu_critical:.6g}" + (" hopf" if r.hopf else "")
        lines.append(
            f"  theta={r.location.theta:.10g} lambda={r.location.lam:.10g} [{r.branch.value}] "
            f"{r.classification.value} (tr={r.trace:.4g}, det={r.determinant:.4g}, mu_c={mc})"
        )
    if not reports:
        lines.append("  no nullcline intersections (snow line too high or nullclines disjoint)")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_reduce(args, cfg):
    rp = cfg.reduced_params()
    payload = rp.to_dict()
    _emit(args, payload, json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_assumptions(args, cfg):
    rp = cfg.reduced_params()
    if args.nu is not None:
        rp = rp.with_nu(args.nu)
    rep = check_assumptions(rp)
    payload = rep.to_dict()
    lines = [f"{k}: {v}" for k, v in payload.items() if k != "messages"] + [f"  {m}" for m in rep.messages]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_simulate(args, cfg):
    rp = cfg.reduced_params()
    if args.nu is not None:
        rp = rp.with_nu(args.nu)
    ts = run_timeseries(
        rp,
        args.t_span,
        samples=args.samples,
        dimensional=args.dimensional,
        scales=cfg.scales,
        xi_sum=cfg.xi_sum,
    )
    text = ts.csv()
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_period(args, cfg):
    rp = cfg.reduced_params()
    nu = args.nu if args.nu is not None else rp.nu
    rp = rp.with_nu(nu)
    pe = period_asymptotic(rp)
    tm, tp = period_bounds(rp)
    amp = amplitude_asymptotic(rp)
    payload = {
        "nu": nu,
        "leading": pe.leading,
        "correction_coeff": pe.correction_coeff,
        "total": float(pe.total(nu)),
        "t_minus": tm,
        "t_plus": tp,
        "airy_zeta": pe.airy_zeta,
        "ax_leading": amp.ax_leading,
        "ax_correction": amp.ax_correction,
        "ay_leading": amp.ay_leading,
        "amplitude_bound": amplitude_bound(rp),
    }
    keys = ("leading", "total", "t_minus", "t_plus")
    if args.dimensional:
        ds = cfg.scales
        payload["dimensional_years"] = {k: float(dimensionalize(payload[k], "t", ds, cfg.xi_sum)) for k in keys}
    lines = [f"nu = {nu:.6g}"]
    for k in ("leading", "correction_coeff", "total", "t_minus", "t_plus"):
        line = f"{k:>16} = {payload[k]:.10g}"
        if args.dimensional and k in keys:
            line += f"   ({payload['dimensional_years'][k] / 1e3:.4g} kyr)"
        lines.append(line)
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_sweep(args, cfg):
    rp = cfg.reduced_params()
    block = dict(cfg.sweep)
    for key in ("nu_min", "nu_max", "points", "spacing"):
        val = getattr(args, key)
        if val is not None:
            block[key] = val
    if args.no_measure:
        block["measure"] = False
    block.setdefault("nu_min", 1e2)
    block.setdefault("nu_max", 1e6)
    try:
        spec = SweepSpec(**block)
    except TypeError as exc:
        raise ConfigError("sweep keys are nu_min, nu_max, points, spacing, measure, asymptotic", str(exc)) from exc
    rows = run_sweep(spec, rp)
    text = sweep_csv(rows)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    try:
        fit = fit_correction_power_law(rows, correction_coeff=period_asymptotic(rp).correction_coeff)
        print(f"# slope {fit.slope:.6g}, prefactor ratio {fit.prefactor_ratio:.6g} ({fit.used} rows)", file=sys.stderr)
    except (ValueError, GlaciaError):
        pass
    return EXIT_OK if not any(r.error for r in rows) else EXIT_FAIL


def cmd_report(args, cfg):
    rep = reproduce_report(cfg, include_sweep=not args.no_sweep)
    _emit(args, rep, report_text(rep))
    return EXIT_OK if rep["all_pass"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config path or bundled name (default: paper-reduced)")
    common.add_argument("--output", default=None, help="write output to this file")
    common.add_argument("--json", action="store_true", help="machine-readable JSON output")
    common.add_argument("--dimensional", action="store_true", help="report years, kelvin and metres")

    parser = argparse.ArgumentParser(prog="glacia", description="Conceptual ice-age oscillator toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="critical points of the full model")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--nullclines", default=None, help="also write theta,h,k_plus,k_minus to this CSV")
    p.add_argument("--theta-min", dest="theta_min", type=float, default=0.5)
    p.add_argument("--theta-max", dest="theta_max", type=float, default=2.5)
    p.add_argument("--nullcline-points", dest="nullcline_points", type=int, default=401)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reduce", parents=[common], help="reduced coefficients as JSON")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("assumptions", parents=[common], help="relaxation-cycle preconditions")
    p.add_argument("--nu", type=float, default=None)
    p.set_defaults(func=cmd_assumptions)

    p = sub.add_parser("simulate", parents=[common], help="reduced-model time series as CSV")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--t-span", type=float, default=20.0, help="duration in reduced time units")
    p.add_argument("--samples", type=int, default=2001)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("period", parents=[common], help="asymptotic period, amplitudes and bounds")
    p.add_argument("--nu", type=float, default=None)
    p.set_defaults(func=cmd_period)

    p = sub.add_parser("sweep", parents=[common], help="period sweep over nu as CSV")
    p.add_argument("--nu-min", dest="nu_min", type=float, default=None)
    p.add_argument("--nu-max", dest="nu_max", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--spacing", choices=["log", "linear"], default=None)
    p.add_argument("--no-measure", action="store_true", help="asymptotic columns only")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="headline checks with pass/fail verdicts")
    p.add_argument("--no-sweep", action="store_true", help="skip the slow power-law sweep")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "t_span", None) is not None and not (math.isfinite(args.t_span) and args.t_span >= 0):
            raise ConfigError("--t-span >= 0", f"got {args.t_span!r}")
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GlaciaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
