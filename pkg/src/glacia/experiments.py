"""Experiment orchestration: nu sweeps, time series, CSV output and the summary report."""

import csv
import io
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from enum import Enum

import numpy as np

from .asymptotics import amplitude_asymptotic, period_asymptotic, period_bounds
from .dynamics import IntegratorConfig, Method, integrate, measure_limit_cycle, reduced_field, stiff_config
from .exceptions import ConfigError, GlaciaError
from .full_model import FullParams, full_rhs
from .parametrization import DerivedScales, dimensionalize
from .reduced_model import critical_point, critical_point_approx, find_folds, reduced_jacobian

WORKERS_ENV = "GLACIA_WORKERS"
CSV_FLOAT = ".17g"


class Spacing(str, Enum):
    LOG = "log"
    LINEAR = "linear"


class NuBelowCriticalWarning(UserWarning):
    """Sweep starts below the Hopf threshold, where no cycle exists."""


@dataclass(frozen=True)
class SweepSpec:
    nu_min: float
    nu_max: float
    points: int = 9
    spacing: Spacing = Spacing.LOG
    measure: bool = True
    asymptotic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "spacing", Spacing(self.spacing))
        if not (self.nu_min > 0 and self.nu_max >= self.nu_min):
            raise ConfigError("0 < nu_min <= nu_max", f"got {self.nu_min!r}, {self.nu_max!r}")
        if int(self.points) != self.points or self.points < 2:
            raise ConfigError("points >= 2", f"got {self.points!r}")

    def grid(self) -> np.ndarray:
        if self.spacing is Spacing.LOG:
            return np.logspace(math.log10(self.nu_min), math.log10(self.nu_max), int(self.points))
        return np.linspace(self.nu_min, self.nu_max, int(self.points))


@dataclass(frozen=True)
class SweepRow:
    nu: float
    period_measured: float | None
    period_asymptotic: float | None
    period_leading: float | None
    t_minus: float | None
    t_plus: float | None
    amplitude_x_measured: float | None
    amplitude_y_measured: float | None
    converged: bool
    error: str = ""


SWEEP_COLUMNS = [f.name for f in fields(SweepRow)]


def _worker_count(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} is a positive integer", f"got {env!r}") from None
    return max(1, min(os.cpu_count() or 1, 8))


def _sweep_row(args) -> SweepRow:
    rp, nu, measure, asymptotic, cfg = args
    rp = rp.with_nu(float(nu))
    leading = total = tm = tp = None
    measured = ax = ay = None
    converged = False
    errors = []
    if asymptotic:
        try:
            pe = period_asymptotic(rp)
            leading, total = pe.leading, float(pe.total(nu))
            tm, tp = period_bounds(rp)
        except GlaciaError as exc:
            errors.append(f"asymptotic: {exc}")
    if measure:
        try:
            run_cfg = cfg or stiff_config(nu)
            m = measure_limit_cycle(rp, run_cfg)
            measured, ax, ay, converged = m.period, m.amplitude_x, m.amplitude_y, m.converged
        except GlaciaError as exc:
            errors.append(f"measure: {exc}")
    return SweepRow(float(nu), measured, total, leading, tm, tp, ax, ay, converged, "; ".join(errors))


def run_sweep(spec: SweepSpec, rp, cfg: IntegratorConfig | None = None, workers: int | None = None) -> list[SweepRow]:
    """One row per grid value of ``nu``, in grid order.

    Rows are independent and may run in worker processes (``GLACIA_WORKERS``
    caps the count). A failing row records its error instead of aborting.
    With ``cfg=None`` each row picks the explicit method below ``nu = 1e3``
    and Radau above.
    """
    try:
        nu_c = critical_point(rp).nu_c
    except GlaciaError:
        nu_c = math.nan
    if np.isfinite(nu_c) and spec.nu_min < nu_c:
        warnings.warn(f"nu_min={spec.nu_min:g} is below nu_c={nu_c:.6g}", NuBelowCriticalWarning, stacklevel=2)
    jobs = [(rp, float(nu), spec.measure, spec.asymptotic, cfg) for nu in spec.grid()]
    n = _worker_count(workers)
    if n == 1 or len(jobs) == 1:
        return [_sweep_row(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
        return list(pool.map(_sweep_row, jobs))


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    prefactor: float
    prefactor_ratio: float
    used: int


def fit_correction_power_law(rows, period_tol: float = 1e-6, correction_coeff: float | None = None) -> PowerLawFit:
    """Least-squares slope of ``log(measured - leading)`` against ``log nu``.

    Rows whose difference is below ``10 * period_tol`` (relative) are noise
    and skipped. ``prefactor_ratio`` compares the fitted prefactor with the
    predicted correction coefficient when one is given.
    """
    xs, ys = [], []
    for r in rows:
        if r.period_measured is None or r.period_leading is None or not r.converged:
            continue
        diff = r.period_measured - r.period_leading
        if diff <= 10.0 * period_tol * r.period_measured:
            continue
        xs.append(math.log(r.nu))
        ys.append(math.log(diff))
    if len(xs) < 2:
        raise ValueError("need at least two rows above the noise floor for a fit")
    slope, intercept = np.polyfit(xs, ys, 1)
    pref = math.exp(intercept)
    ratio = pref / correction_coeff if correction_coeff else math.nan
    return PowerLawFit(float(slope), pref, ratio, len(xs))


# -- CSV ---------------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), CSV_FLOAT)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))


def read_csv(path_or_text, from_text: bool = False):
    """Header and rows with numeric cells as floats, empty cells as None."""
    text = path_or_text if from_text else open(path_or_text, encoding="utf-8").read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for raw in reader:
        row = []
        for cell in raw:
            if cell == "":
                row.append(None)
            elif cell in ("true", "false"):
                row.append(cell == "true")
            else:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
        rows.append(row)
    return header, rows


def sweep_csv(rows) -> str:
    return csv_text(SWEEP_COLUMNS, [[getattr(r, c) for c in SWEEP_COLUMNS] for r in rows])


# -- time series --------------------------------------------------------------------------


@dataclass
class TimeSeries:
    header: list
    data: np.ndarray

    def csv(self) -> str:
        return csv_text(self.header, self.data.tolist())


def run_timeseries(
    params,
    duration: float,
    samples: int = 2001,
    dimensional: bool = False,
    scales: DerivedScales | None = None,
    xi_sum: float | None = None,
    initial_state=None,
    cfg: IntegratorConfig | None = None,
) -> TimeSeries:
    """Trajectory on a uniform output grid for a reduced or a full-model config.

    Reduced runs report ``t,x,y``; full-model runs ``tau,theta,lambda``. In
    dimensional mode both become ``t_years,T_kelvin,L_meters``.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    full = isinstance(params, FullParams)
    if full:
        if initial_state is None:
            raise ValueError("full-model time series need an initial state (theta, lambda)")
        rhs = lambda t, s: full_rhs(s, params)
        jac = None
        cfg = cfg or IntegratorConfig(method=Method.RADAU if params.mu >= 1e3 else Method.DOPRI5)
        state0 = tuple(map(float, initial_state))
        header = ["tau", "theta", "lambda"]
    else:
        rhs, jac = reduced_field(params)
        cfg = cfg or stiff_config(params.nu)
        if initial_state is None:
            from .dynamics import default_seed

            initial_state = default_seed(params)
        state0 = tuple(map(float, initial_state))
        header = ["t", "x", "y"]
    if duration == 0:
        data = np.array([[0.0, *state0]])
    else:
        traj = integrate(rhs, state0, (0.0, float(duration)), cfg, jac=jac)
        ts = np.linspace(0.0, float(duration), max(int(samples), 2))
        data = np.column_stack([ts, traj(ts)])
    if dimensional:
        if scales is None:
            raise ValueError("dimensional output needs DerivedScales")
        if full:
            t = dimensionalize(data[:, 0], "tau", scales)
            lam = dimensionalize(data[:, 2], "lambda", scales)
        else:
            if xi_sum is None:
                raise ValueError("dimensional reduced output needs xi_sum")
            t = dimensionalize(data[:, 0], "t", scales, xi_sum)
            lam = dimensionalize(data[:, 2], "y", scales, xi_sum)
        temp = dimensionalize(data[:, 1], "theta", scales)
        data = np.column_stack([t, temp, lam])
        header = ["t_years", "T_kelvin", "L_meters"]
    return TimeSeries(header, data)


def rise_fraction(t, y) -> float:
    """Mean fraction of each cycle during which ``y`` increases.

    Cycles are delimited by successive minima of ``y``.
    """
    t, y = np.asarray(t), np.asarray(y)
    dy = np.diff(y)
    minima = [i for i in range(1, len(y) - 1) if y[i] <= y[i - 1] and y[i] < y[i + 1]]
    if len(minima) < 2:
        raise ValueError("need at least one complete cycle")
    fracs = []
    for a, b in zip(minima, minima[1:]):
        seg_dt = np.diff(t[a : b + 1])
        rising = dy[a:b] > 0
        fracs.append(float(seg_dt[rising].sum() / seg_dt.sum()))
    return float(np.mean(fracs))


# -- summary report -----------------------------------------------------------------------


@dataclass
class CriterionResult:
    id: str
    name: str
    target: str
    computed: object
    tolerance: str
    verdict: str
    detail: str = ""
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _years(value, cfg):
    return float(dimensionalize(value, "t", cfg.scales, cfg.xi_sum))


def _run(cid, name, target, tolerance, fn):
    t0 = time.perf_counter()
    try:
        computed, ok, detail = fn()
        verdict = {True: "pass", False: "fail", None: "not applicable"}[ok]
    except Exception as exc:  # a failed sub-computation fails only its criterion
        computed, verdict, detail = None, "fail", f"{type(exc).__name__}: {exc}"
    return CriterionResult(cid, name, target, computed, tolerance, verdict, detail, time.perf_counter() - t0)


def reproduce_report(config, include_sweep: bool = True) -> dict:
    """Evaluate the headline quantitative checks on a configuration.

    Returns a JSON-ready dict with one entry per check (target, computed
    value, tolerance, verdict) and an overall flag.
    """
    from .config import GlaciaConfig, load_config

    cfg = config if isinstance(config, GlaciaConfig) else load_config(config)
    rp = cfg.reduced_params()
    results = []

    def nu_c():
        cp = critical_point(rp)
        return {"nu_c": cp.nu_c, "nu_c_printed": cp.nu_c_printed}, 0.05 <= cp.nu_c <= 0.2, ""

    results.append(_run("1", "Hopf threshold nu_c", "0.1", "[0.05, 0.2]", nu_c))

    def bounds():
        tm, tp = (_years(v, cfg) for v in period_bounds(rp))
        ok = 81e3 <= tm <= 110e3 and 106e3 <= tp <= 144e3
        return {"t_minus_years": tm, "t_plus_years": tp}, ok, ""

    results.append(_run("2", "period bounds", "T- 95.8 kyr, T+ 125 kyr", "T- in [81,110] kyr, T+ in [106,144] kyr", bounds))

    def period10():
        m = measure_limit_cycle(rp.with_nu(10.0), stiff_config(10.0))
        yrs = _years(m.period, cfg)
        return {"period": m.period, "period_years": yrs}, 103e3 <= yrs <= 139e3, ""

    results.append(_run("3", "period at nu = 10", "121 kyr", "[103, 139] kyr", period10))

    def sweep():
        spec = SweepSpec(1e2, 1e6, 5, Spacing.LOG, True, True)
        nu_c_val = critical_point(rp).nu_c
        if spec.nu_min < nu_c_val:
            return None, None, f"nu_min below nu_c={nu_c_val:.4g}"
        rows = run_sweep(spec, rp)
        pe = period_asymptotic(rp)
        fit = fit_correction_power_law(rows, correction_coeff=pe.correction_coeff)
        by_nu = {round(math.log10(r.nu)): r for r in rows}
        rel = lambda r: abs(r.period_asymptotic - r.period_measured) / r.period_measured
        e2, e4 = rel(by_nu[2]), rel(by_nu[4])
        ok = abs(fit.slope + 2.0 / 3.0) <= 0.05 and e2 <= 0.05 and e4 <= 0.01
        return {"slope": fit.slope, "prefactor_ratio": fit.prefactor_ratio, "rel_err_nu1e2": e2, "rel_err_nu1e4": e4}, ok, ""

    if include_sweep:
        results.append(_run("4", "nu^(-2/3) power law", "slope -2/3", "+-0.05; 5% at 1e2, 1% at 1e4", sweep))

    def sandwich():
        tm, tp = period_bounds(rp)
        lead = period_asymptotic(rp).leading
        return {"t_minus": tm, "leading": lead, "t_plus": tp}, tm <= lead <= tp, ""

    results.append(_run("5", "bounds sandwich the leading period", "T- <= leading <= T+", "exact", sandwich))

    def prop1():
        est = critical_point_approx(rp)
        xc = critical_point(rp).x
        err = abs(est.estimate - xc)
        return {"estimate": est.estimate, "x_c": xc, "error": err, "bound": est.bound}, err <= est.bound and err <= 1e-2, ""

    results.append(_run("6", "critical point estimate", "error ~3e-4", "<= C(x+-x-)^3 and <= 1e-2", prop1))

    def hopf():
        cp = critical_point(rp)
        nu = 1.05 * cp.nu_c
        J = reduced_jacobian((cp.x, cp.y), rp.with_nu(nu))
        im = abs(np.linalg.eigvals(J).imag).max()
        predicted = float(2.0 * math.pi / im)
        m = measure_limit_cycle(rp.with_nu(nu), IntegratorConfig(), max_returns=200)
        yrs = _years(m.period, cfg)
        ok = abs(m.period - predicted) <= 0.5 * predicted and 0.8e5 <= yrs <= 4e5
        return {"measured": m.period, "predicted": predicted, "period_years": yrs}, ok, ""

    results.append(_run("8", "period near the Hopf point", "200 kyr", "+-50% of 2 pi / Im r; [0.8, 4] x 1e5 yr", hopf))

    verdicts = [r.verdict for r in results]
    return {
        "config": cfg.source,
        "criteria": [r.to_dict() for r in results],
        "all_pass": all(v != "fail" for v in verdicts),
    }


def report_text(report: dict) -> str:
    lines = [f"configuration: {report['config']}"]
    for c in report["criteria"]:
        lines.append(f"[{c['verdict'].upper():>14}] {c['id']:>2} {c['name']}: {c['computed']}  (target {c['target']}, tol {c['tolerance']})")
        if c["detail"]:
            lines.append(f"                   {c['detail']}")
    lines.append("overall: " + ("PASS" if report["all_pass"] else "FAIL"))
    return "\n".join(lines)


def amplitude_summary(rp) -> dict:
    return amplitude_asymptotic(rp).to_dict() | {"folds": find_folds(rp)._asdict()}
