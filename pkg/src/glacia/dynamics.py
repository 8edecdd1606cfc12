"""Planar ODE integration, section crossings and limit-cycle measurement.

The default integrator is a Dormand-Prince 5(4) pair with PI step-size
control and the fourth-order continuous extension. For very stiff runs
(large ``nu``) ``method="radau"`` delegates to SciPy's implicit Radau IIA
solver; the choice is explicit, never automatic.
"""

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .exceptions import AssumptionError, ConvergenceError, DomainError, IntegrationError
from .reduced_model import check_assumptions, critical_point, find_folds


class Method(str, Enum):
    DOPRI5 = "dopri5"
    RADAU = "radau"


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.inf
    max_steps: int = 10**8
    stiffness_guard: bool = False
    method: Method = Method.DOPRI5
    first_step: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


class StiffnessWarning(UserWarning):
    """Step sizes collapsed relative to the integration span."""


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# continuous extension (Hairer, Norsett & Wanner)
_D = (
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)


class _DopriSegment:
    __slots__ = ("t0", "h", "r1", "r2", "r3", "r4", "r5")

    def __init__(self, t0, h, r1, r2, r3, r4, r5):
        self.t0, self.h = t0, h
        self.r1, self.r2, self.r3, self.r4, self.r5 = r1, r2, r3, r4, r5

    def __call__(self, t):
        s = (t - self.t0) / self.h
        s1 = 1.0 - s
        return tuple(
            a + s * (b + s1 * (c + s * (d + s1 * e)))
            for a, b, c, d, e in zip(self.r1, self.r2, self.r3, self.r4, self.r5)
        )


class Trajectory:
    """Accepted mesh with a piecewise continuous interpolant."""

    def __init__(self, ts, ys, segments, stats=None):
        self.t = np.asarray(ts, dtype=float)
        self.y = np.asarray(ys, dtype=float)
        self._segments = segments
        self.stats = stats or {}

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def _segment_index(self, t):
        i = bisect_right(self.t, t) - 1
        return min(max(i, 0), len(self._segments) - 1)

    def __call__(self, t):
        """State at time ``t`` (scalar) or an array of shape (len(t), 2)."""
        if np.ndim(t) == 0:
            t = float(t)
            if not (self.t[0] - 1e-12 * max(1.0, abs(self.t[0])) <= t <= self.t[-1] + 1e-12 * max(1.0, abs(self.t[-1]))):
                raise ValueError(f"t={t!r} outside [{self.t[0]!r}, {self.t[-1]!r}]")
            if not self._segments:
                return np.array(self.y[0])
            return np.asarray(self._segments[self._segment_index(t)](t), dtype=float)
        return np.array([self(tt) for tt in np.asarray(t, dtype=float)])

    def segment(self, i):
        return self._segments[i]

    def __len__(self):
        return len(self.t)


class _ScipySegment:
    __slots__ = ("interp",)

    def __init__(self, interp):
        self.interp = interp

    def __call__(self, t):
        return tuple(self.interp(t))


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol, order=5):
    scale = [atol + abs(v) * rtol for v in y0]
    d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(y0, scale)) / len(y0))
    d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(f0, scale)) / len(y0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = tuple(v + direction * h0 * f for v, f in zip(y0, f0))
    f1 = rhs(t0 + direction * h0, y1)
    d2 = math.sqrt(sum(((a - b) / s) ** 2 for a, b, s in zip(f1, f0, scale)) / len(y0)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / order)
    return min(100 * h0, h1)


def _dopri5(rhs, t_span, y0, cfg: IntegratorConfig, monitor=None) -> Trajectory:
    t0, t1 = map(float, t_span)
    direction = 1.0 if t1 >= t0 else -1.0
    y = tuple(float(v) for v in y0)
    n = len(y)
    try:
        f = tuple(rhs(t0, y))
    except DomainError as exc:
        raise IntegrationError(f"initial state rejected: {exc}", t0, y) from exc
    ts, ys, segs = [t0], [y], []
    if t1 == t0:
        return Trajectory(ts, ys, segs, {"accepted": 0, "rejected": 0})
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    span = abs(t1 - t0)
    h_max = min(cfg.max_step, span)
    h = cfg.first_step or _initial_step(rhs, t0, y, f, direction, rtol, atol)
    h = min(abs(h), h_max)
    beta = 0.04
    expo1 = 0.2 - 0.75 * beta
    safe, facc1, facc2 = 0.9, 1.0 / 0.2, 1.0 / 10.0
    facold = 1e-4
    t = t0
    accepted = rejected = domain_rejects = 0
    h_min_seen = math.inf
    reject_last = False
    a, c, e, dd = _A, _C, _E, _D
    while direction * (t1 - t) > 0:
        if accepted + rejected >= cfg.max_steps:
            raise IntegrationError(f"max_steps={cfg.max_steps} exceeded at t={t!r}", t, y)
        if h < 16 * abs(t) * 2.2e-16 + 1e-300:
            raise IntegrationError(f"step size underflow at t={t!r}", t, y)
        if direction * (t + direction * h - t1) > 0:
            h = abs(t1 - t)
        hs = direction * h
        k = [f]
        try:
            for s in range(1, 7):
                ai = a[s]
                yi = tuple(y[j] + hs * sum(ai[m] * k[m][j] for m in range(s)) for j in range(n))
                k.append(tuple(rhs(t + c[s] * hs, yi)))
        except DomainError:
            # a stage left the domain (e.g. y < 0): shrink and retry
            domain_rejects += 1
            rejected += 1
            if domain_rejects > 60:
                raise IntegrationError(f"state persistently leaves the model domain near t={t!r}", t, y)
            h *= 0.25
            reject_last = True
            continue
        y_new = yi
        err = 0.0
        for j in range(n):
            sk = atol + rtol * max(abs(y[j]), abs(y_new[j]))
            ej = hs * sum(e[m] * k[m][j] for m in range(7))
            err += (ej / sk) ** 2
        err = math.sqrt(err / n)
        fac11 = err**expo1 if err > 0 else 0.0
        fac = fac11 / facold**beta if err > 0 else 0.0
        fac = max(facc2, min(facc1, fac / safe)) if err > 0 else facc2
        h_new = h / fac
        if err <= 1.0:
            facold = max(err, 1e-4)
            f_new = k[6]
            r1 = y
            r2 = tuple(y_new[j] - y[j] for j in range(n))
            r3 = tuple(hs * f[j] - r2[j] for j in range(n))
            r4 = tuple(r2[j] - hs * f_new[j] - r3[j] for j in range(n))
            r5 = tuple(hs * sum(dd[m] * k[m][j] for m in range(7)) for j in range(n))
            segs.append(_DopriSegment(t, hs, r1, r2, r3, r4, r5))
            t_prev = t
            t = t + hs if direction * (t1 - (t + hs)) > 1e-15 * span else t1
            y, f = y_new, f_new
            ts.append(t)
            ys.append(y)
            accepted += 1
            domain_rejects = 0
            h_min_seen = min(h_min_seen, h)
            if monitor is not None and monitor(t_prev, t, y) is False:
                break
            if reject_last:
                h_new = min(h_new, h)
            reject_last = False
            h = min(h_new, h_max)
        else:
            h = h / min(facc1, fac11 / safe)
            reject_last = True
            rejected += 1
    stats = {"accepted": accepted, "rejected": rejected, "h_min": h_min_seen}
    if cfg.stiffness_guard and accepted and h_min_seen < 1e-9 * span:
        warnings.warn(
            f"step size collapsed to {h_min_seen:.3g} over a span of {span:.3g}; consider method='radau'",
            StiffnessWarning,
            stacklevel=3,
        )
    return Trajectory(ts, ys, segs, stats)


def _radau(rhs, t_span, y0, cfg: IntegratorConfig, jac=None) -> Trajectory:
    t0, t1 = map(float, t_span)
    if t0 == t1:
        return Trajectory([t0], [tuple(y0)], [], {"accepted": 0, "rejected": 0})
    failure = {}

    def fun(t, y):
        try:
            return rhs(t, y)
        except DomainError as exc:
            failure["exc"] = exc
            # pushes the Newton iteration back without crashing the solver
            return (math.nan, math.nan)

    sol = solve_ivp(
        fun,
        (t0, t1),
        np.asarray(y0, dtype=float),
        method="Radau",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        dense_output=True,
        jac=jac,
        first_step=cfg.first_step,
    )
    if sol.status != 0:
        last_t = float(sol.t[-1]) if len(sol.t) else t0
        last_y = tuple(sol.y[:, -1]) if sol.y.size else tuple(y0)
        raise IntegrationError(f"Radau failed: {sol.message} ({failure.get('exc', '')})", last_t, last_y)
    segs = [_ScipySegment(p) for p in sol.sol.interpolants]
    return Trajectory(sol.t, sol.y.T, segs, {"accepted": int(len(sol.t) - 1), "nfev": int(sol.nfev)})


def integrate(rhs: Callable, y0, t_span, cfg: IntegratorConfig | None = None, monitor=None, jac=None) -> Trajectory:
    """Integrate ``state' = rhs(t, state)`` over ``t_span`` with dense output.

    ``monitor(t_prev, t, state)`` is called after each accepted step of the
    explicit method; returning ``False`` stops integration early.

    Raises:
        IntegrationError: step budget exhausted, step-size underflow, or the
            state repeatedly leaving the model domain. Carries the last
            accepted state.
    """
    cfg = cfg or IntegratorConfig()
    if cfg.method is Method.RADAU:
        return _radau(rhs, t_span, y0, cfg, jac=jac)
    return _dopri5(rhs, t_span, y0, cfg, monitor=monitor)


# -- section crossings ----------------------------------------------------------------


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"
    BOTH = "both"


@dataclass(frozen=True)
class Crossing:
    t: float
    direction: Direction
    grazing: bool = False


def detect_crossings(traj: Trajectory, event: Callable, direction="both") -> list[Crossing]:
    """Sign changes of ``event(state)`` along ``traj``, refined on the interpolant.

    Each step is subdivided into four sub-intervals so that a double
    crossing inside one long step is not missed. Sampled extrema of the event
    that stay on one side of zero are refined as well; if the true extremum
    crosses, the hidden pair is recovered. A crossing pair closer than the
    resolution ``1e-6 max(1, |t|)`` is reported with ``grazing=True``.
    """
    direction = Direction(direction)
    sub = 4
    ts, vs = [float(traj.t[0])], [float(event(traj.y[0]))]
    for i in range(len(traj.t) - 1):
        seg = traj.segment(i)
        t_a, t_b = traj.t[i], traj.t[i + 1]
        for k in range(1, sub + 1):
            tt = t_a + (t_b - t_a) * k / sub if k < sub else t_b
            ts.append(float(tt))
            vs.append(float(event(seg(tt))))
    ev = lambda t: float(event(traj(t)))
    root = lambda lo, hi: brentq(ev, lo, hi, xtol=1e-14 * max(1.0, abs(hi)), rtol=1e-15, maxiter=200)
    found = []
    for k in range(len(ts) - 1):
        pv, v = vs[k], vs[k + 1]
        if (pv < 0.0 <= v) or (pv > 0.0 >= v):
            found.append((ts[k + 1] if v == 0.0 else root(ts[k], ts[k + 1]), Direction.UP if v > pv else Direction.DOWN))
    for k in range(1, len(ts) - 1):
        a, b, c = vs[k - 1], vs[k], vs[k + 1]
        if not (a * b > 0 and b * c > 0 and abs(b) <= abs(a) and abs(b) <= abs(c)):
            continue
        sgn = 1.0 if b > 0 else -1.0
        ext = minimize_scalar(lambda t: sgn * ev(t), bounds=(ts[k - 1], ts[k + 1]), method="bounded", options={"xatol": 1e-14})
        if sgn * ev(ext.x) >= 0.0:
            continue
        first, second = (Direction.DOWN, Direction.UP) if sgn > 0 else (Direction.UP, Direction.DOWN)
        found.append((root(ts[k - 1], ext.x), first))
        found.append((root(ext.x, ts[k + 1]), second))
    found.sort(key=lambda p: p[0])
    out = [Crossing(t, d) for t, d in found if direction is Direction.BOTH or direction is d]
    # flag near-coincident opposite crossings as grazing
    flagged = []
    for j, cr in enumerate(out):
        graze = False
        for other in (out[j - 1] if j else None, out[j + 1] if j + 1 < len(out) else None):
            if other is not None and other.direction is not cr.direction and abs(other.t - cr.t) < 1e-6 * max(1.0, abs(cr.t)):
                graze = True
        flagged.append(Crossing(cr.t, cr.direction, graze) if graze else cr)
    return flagged


# -- limit cycle --------------------------------------------------------------------------


@dataclass
class LimitCycleMeasurement:
    period: float
    amplitude_x: float
    amplitude_y: float
    crossings: list
    converged: bool
    samples: np.ndarray = field(repr=False)
    intervals: list = field(default_factory=list, repr=False)
    nu: float = math.nan

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "period": self.period,
            "amplitude_x": self.amplitude_x,
            "amplitude_y": self.amplitude_y,
            "converged": self.converged,
            "crossings": list(self.crossings),
        }


def reduced_field(rp):
    """Scalar vector field and Jacobian closures for the reduced system."""
    f, df, g, dg = rp.scalar_kernels()
    nu = rp.nu
    sqrt = math.sqrt

    def rhs(t, s):
        x, y = s
        if y < 0.0:
            raise DomainError(f"y={y!r} < 0")
        return (nu * (f(x) - y), sqrt(y) * (g(x) - y))

    def jac(t, s):
        x, y = s
        sq = sqrt(max(y, 1e-300))
        return np.array([[nu * df(x), -nu], [sq * dg(x), (g(x) - y) / (2.0 * sq) - sq]])

    return rhs, jac


def default_seed(rp):
    folds = find_folds(rp)
    cp = critical_point(rp, folds=folds)
    return (cp.x + 0.1 * (folds.x_plus - folds.x_minus), float(rp.f(cp.x)))


def measure_limit_cycle(
    rp,
    cfg: IntegratorConfig | None = None,
    seed_state=None,
    transient_returns: int = 5,
    average_over: int = 3,
    period_tol: float = 1e-6,
    max_returns: int = 50,
    sample_points: int = 2001,
    check: bool = True,
) -> LimitCycleMeasurement:
    """Period and amplitudes of the attracting cycle on the section ``x = x_c``.

    Integrates in chunks until ``transient_returns`` upward crossings have
    been discarded and the mean of the last ``average_over`` return
    intervals agrees with the previous mean to ``period_tol`` (relative).

    Raises:
        AssumptionError: the configuration admits no relaxation cycle.
        ConvergenceError: no convergence within ``max_returns`` crossings;
            the interval history is attached.
    """
    cfg = cfg or IntegratorConfig()
    if check:
        report = check_assumptions(rp)
        if not report.ok:
            raise AssumptionError("limit cycle preconditions fail: " + "; ".join(report.messages))
    xc = critical_point(rp).x
    state = tuple(seed_state) if seed_state is not None else default_seed(rp)
    rhs, jac = reduced_field(rp)
    event = lambda s: s[0] - xc
    # chunk length: a generous guess of one period, refined as crossings come in
    chunk = 20.0
    t = 0.0
    crossings: list[float] = []
    pieces: list[Trajectory] = []
    last_mean = None
    converged = False
    while len(crossings) < max_returns:
        traj = integrate(rhs, state, (t, t + chunk), cfg, jac=jac)
        pieces.append(traj)
        for cr in detect_crossings(traj, event, Direction.UP):
            if not crossings or cr.t - crossings[-1] > 1e-9 * max(1.0, cr.t):
                crossings.append(cr.t)
        state = tuple(traj.y[-1])
        t = traj.t_end
        if len(pieces) > 3:
            pieces = pieces[-3:]
        usable = crossings[transient_returns:]
        intervals = np.diff(usable)
        if len(intervals) >= average_over + 1:
            mean = float(np.mean(intervals[-average_over:]))
            prev = float(np.mean(intervals[-average_over - 1 : -1]))
            last_mean = mean
            if abs(mean - prev) <= period_tol * mean:
                converged = True
                break
            chunk = max(2.0 * mean, 1.0)
        elif len(intervals):
            chunk = max(2.0 * float(intervals[-1]), 1.0)
    if not converged:
        raise ConvergenceError(
            f"period did not settle to {period_tol:g} within {max_returns} returns", np.diff(crossings)
        )
    # sample the final full cycle on the retained pieces
    t_a, t_b = crossings[-2], crossings[-1]

    def at(tt):
        for p in pieces:
            if p.t_start <= tt <= p.t_end:
                return p(tt)
        raise ValueError("sample outside retained trajectory")

    ts = np.linspace(t_a, t_b, sample_points)
    pts = np.array([at(tt) for tt in ts])
    # extrema: dense grid plus every mesh point within the cycle
    mesh_pts = [p.y[(p.t >= t_a) & (p.t <= t_b)] for p in pieces]
    allpts = np.vstack([pts] + [m for m in mesh_pts if len(m)])
    samples = np.column_stack([ts, pts])
    return LimitCycleMeasurement(
        period=last_mean,
        amplitude_x=float(allpts[:, 0].max() - allpts[:, 0].min()),
        amplitude_y=float(allpts[:, 1].max() - allpts[:, 1].min()),
        crossings=list(crossings),
        converged=True,
        samples=samples,
        intervals=list(np.diff(crossings)),
        nu=rp.nu,
    )


def stiff_config(nu: float, rel_tol: float = 1e-10, abs_tol: float = 1e-12) -> IntegratorConfig:
    """Integrator choice by regime: explicit below ``nu = 1e3``, Radau above."""
    method = Method.RADAU if nu >= 1e3 else Method.DOPRI5
    return IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, method=method)
