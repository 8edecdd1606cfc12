"""Rescaled slow-fast system ``x' = nu (f(x) - y)``, ``y' = sqrt(y) (g(x) - y)``.

``f`` is the S-shaped temperature nullcline and ``g`` the sigmoid ice
nullcline. Everything downstream (folds, branch inverses, the critical point
and its Hopf threshold, the period asymptotics) works on any object exposing
the nullcline interface below, so user-supplied pairs are accepted wherever a
:class:`ReducedParams` is.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .exceptions import AssumptionError, ConfigError, DomainError, NullclineRangeError
from .full_model import FullParams
from .parametrization import ContinentalMode
from .sigmoids import (
    SigmoidFamily,
    deriv_inverse,
    max_slope,
    scalar_sigmoid,
    scalar_sigmoid_deriv,
    sigmoid,
    sigmoid_deriv,
)

SCAN_CELLS = 1024


@dataclass(frozen=True)
class ReducedParams:
    a: float
    b: float
    c: float
    d: float
    nu: float
    x_alpha: float
    x_xi: float
    delta_alpha: float
    delta_xi: float
    sigmoid_family: SigmoidFamily = SigmoidFamily.TANH

    def __post_init__(self):
        object.__setattr__(self, "sigmoid_family", SigmoidFamily(self.sigmoid_family))
        if not self.b > 0:
            raise ConfigError("b > 0", f"got {self.b!r}")
        if not self.c > 0:
            raise ConfigError("c > 0", f"got {self.c!r}")
        if not (0.0 <= self.d < 1.0):
            raise ConfigError("0 <= d < 1", f"got {self.d!r}")
        if not self.nu > 0:
            raise ConfigError("nu > 0", f"got {self.nu!r}")
        if not (self.delta_alpha > 0 and self.delta_xi > 0):
            raise ConfigError("steepness parameters > 0")

    def validate(self) -> "ReducedParams":
        """Also require the two-fold condition ``delta_alpha < c * max sigma'``."""
        if not self.has_folds:
            raise ConfigError(
                "delta_alpha < c * max sigma' (f has a minimum and a maximum)",
                f"delta_alpha={self.delta_alpha!r}, c*max={self.c * max_slope(self.sigmoid_family):.6g}",
            )
        return self

    def with_nu(self, nu: float) -> "ReducedParams":
        return replace(self, nu=nu)

    @property
    def has_folds(self) -> bool:
        return self.delta_alpha < self.c * max_slope(self.sigmoid_family)

    # nullcline interface

    def f(self, x):
        u = (np.asarray(x, dtype=float) - self.x_alpha) / self.delta_alpha
        return (self.a + self.c * sigmoid(self.sigmoid_family, u) - x) / self.b

    def df(self, x):
        u = (np.asarray(x, dtype=float) - self.x_alpha) / self.delta_alpha
        return (self.c / self.delta_alpha * sigmoid_deriv(self.sigmoid_family, u) - 1.0) / self.b

    def d2f(self, x):
        u = (np.asarray(x, dtype=float) - self.x_alpha) / self.delta_alpha
        return self.c / self.delta_alpha**2 * sigmoid_deriv(self.sigmoid_family, u, 2) / self.b

    def d3f(self, x):
        u = (np.asarray(x, dtype=float) - self.x_alpha) / self.delta_alpha
        return self.c / self.delta_alpha**3 * sigmoid_deriv(self.sigmoid_family, u, 3) / self.b

    def g(self, x):
        u = (np.asarray(x, dtype=float) - self.x_xi) / self.delta_xi
        return 1.0 + self.d * sigmoid(self.sigmoid_family, u)

    def dg(self, x):
        u = (np.asarray(x, dtype=float) - self.x_xi) / self.delta_xi
        return self.d / self.delta_xi * sigmoid_deriv(self.sigmoid_family, u)

    def d2g(self, x):
        u = (np.asarray(x, dtype=float) - self.x_xi) / self.delta_xi
        return self.d / self.delta_xi**2 * sigmoid_deriv(self.sigmoid_family, u, 2)

    def d3g(self, x):
        u = (np.asarray(x, dtype=float) - self.x_xi) / self.delta_xi
        return self.d / self.delta_xi**3 * sigmoid_deriv(self.sigmoid_family, u, 3)

    @property
    def f_inflection(self) -> float:
        return self.x_alpha

    @property
    def g_inflection(self) -> float:
        return self.x_xi

    @property
    def window(self) -> tuple[float, float]:
        return self.x_alpha - 10.0 * self.delta_alpha, self.x_alpha + 10.0 * self.delta_alpha

    def closed_form_folds(self):
        if not self.has_folds:
            raise AssumptionError(
                "f has no folds: need delta_alpha < c * max sigma' "
                f"(delta_alpha/c = {self.delta_alpha / self.c:.6g}, max sigma' = {max_slope(self.sigmoid_family):.6g})"
            )
        u = float(deriv_inverse(self.sigmoid_family, self.delta_alpha / self.c))
        return self.x_alpha - self.delta_alpha * u, self.x_alpha + self.delta_alpha * u

    def scalar_kernels(self):
        """Closures (f, f', g, g') on Python floats, for the integrators."""
        s = scalar_sigmoid(self.sigmoid_family)
        sp = scalar_sigmoid_deriv(self.sigmoid_family)
        a, b, c, d = self.a, self.b, self.c, self.d
        xa, da, xx, dx = self.x_alpha, self.delta_alpha, self.x_xi, self.delta_xi
        return (
            lambda x: (a + c * s((x - xa) / da) - x) / b,
            lambda x: (c / da * sp((x - xa) / da) - 1.0) / b,
            lambda x: 1.0 + d * s((x - xx) / dx),
            lambda x: d / dx * sp((x - xx) / dx),
        )

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "d": self.d,
            "nu": self.nu,
            "x_alpha": self.x_alpha,
            "x_xi": self.x_xi,
            "delta_alpha": self.delta_alpha,
            "delta_xi": self.delta_xi,
            "sigmoid_family": self.sigmoid_family.value,
        }


def _central(fn, h):
    return lambda x: (fn(x + h) - fn(x - h)) / (2.0 * h)


class NullclinePair:
    """User-supplied ``f`` (one minimum, one maximum) and sigmoid-like ``g``.

    Missing derivatives fall back to central differences.
    """

    def __init__(
        self,
        f: Callable,
        g: Callable,
        nu: float,
        window: tuple[float, float],
        df: Callable | None = None,
        d2f: Callable | None = None,
        d3f: Callable | None = None,
        dg: Callable | None = None,
        d3g: Callable | None = None,
        f_inflection: float | None = None,
        g_inflection: float | None = None,
    ):
        self.f, self.g, self.nu = f, g, float(nu)
        self.window = tuple(map(float, window))
        self.df = df or _central(f, 1e-6)
        self.d2f = d2f or _central(self.df, 1e-5)
        self.d3f = d3f or _central(self.d2f, 1e-4)
        self.dg = dg or _central(g, 1e-6)
        self.d2g = _central(self.dg, 1e-5)
        self.d3g = d3g or _central(self.d2g, 1e-4)
        self._f_inflection = f_inflection
        self._g_inflection = g_inflection

    def with_nu(self, nu: float) -> "NullclinePair":
        other = object.__new__(NullclinePair)
        other.__dict__.update(self.__dict__)
        other.nu = float(nu)
        return other

    def closed_form_folds(self):
        return None

    @property
    def f_inflection(self) -> float:
        if self._f_inflection is None:
            lo, hi = find_folds(self)[:2]
            self._f_inflection = brentq(self.d2f, lo, hi, xtol=1e-14)
        return self._f_inflection

    @property
    def g_inflection(self) -> float:
        if self._g_inflection is None:
            # steepest point of g on the scan window
            xs = np.linspace(*self.window, 4 * SCAN_CELLS + 1)
            self._g_inflection = float(xs[np.argmax([self.dg(x) for x in xs])])
        return self._g_inflection

    def scalar_kernels(self):
        return self.f, self.df, self.g, self.dg


# -- reduction -------------------------------------------------------------------


def reduce_from_full(full: FullParams, nu: float | None = None) -> ReducedParams:
    """Reduced coefficients of a full-model configuration.

    Needs the linear continental albedo and a vanishing snow-line height. The
    bifurcation parameter is ``sqrt(2 S) gamma alpha1 mu / 16`` with
    ``S = xi_minus + xi_plus``; this makes the temperature equation an exact
    rescaling of the full one. ``nu`` overrides it.
    """
    p = full.feedback
    if p.continental_mode is not ContinentalMode.LINEAR:
        raise ConfigError("reduction requires continental_mode = linear")
    if not full.kappa.is_zero:
        raise ConfigError("reduction requires kappa = 0", f"got {full.kappa!r}")
    g = full.gamma
    S = p.xi_sum
    a = 1.0 - full.beta - g * p.alpha0 - 0.5 * (1.0 - g) * (p.alpha_minus + p.alpha_plus)
    b = g * p.alpha1 * S / 8.0
    c = 0.5 * (1.0 - g) * (p.alpha_minus - p.alpha_plus)
    d = (p.xi_plus - p.xi_minus) / S
    if nu is None:
        nu = math.sqrt(2.0 * S) * g * p.alpha1 * full.mu / 16.0
    return ReducedParams(
        a=a,
        b=b,
        c=c,
        d=d,
        nu=nu,
        x_alpha=p.theta_alpha,
        x_xi=p.theta_xi,
        delta_alpha=p.delta_alpha,
        delta_xi=p.delta_xi,
        sigmoid_family=p.sigmoid_family,
    )


def full_to_reduced_state(theta, lam, xi_sum: float):
    return theta, 8.0 * lam / xi_sum


def reduced_to_full_state(x, y, xi_sum: float):
    return x, xi_sum * y / 8.0


def time_scale_factor(xi_sum: float) -> float:
    """d t / d tau between reduced and full-model times."""
    return math.sqrt(2.0 * xi_sum)


# -- vector field ------------------------------------------------------------------


def f_eval(x, rp):
    return rp.f(x)


def g_eval(x, rp):
    return rp.g(x)


def reduced_rhs(state, rp) -> tuple[float, float]:
    x, y = state
    if y < 0:
        raise DomainError(f"y must be non-negative, got {y!r}")
    return float(rp.nu * (rp.f(x) - y)), float(math.sqrt(y) * (rp.g(x) - y))


def reduced_jacobian(state, rp) -> np.ndarray:
    x, y = state
    if y <= 0:
        raise DomainError("Jacobian needs y > 0")
    sq = math.sqrt(y)
    return np.array(
        [
            [rp.nu * float(rp.df(x)), -rp.nu],
            [sq * float(rp.dg(x)), (float(rp.g(x)) - y) / (2.0 * sq) - sq],
        ]
    )


# -- folds and branches ----------------------------------------------------------------


class FoldData(NamedTuple):
    x_minus: float
    x_plus: float
    f_at_minus: float
    f_at_plus: float
    x_tilde_minus: float
    x_tilde_plus: float


def _scan_sign_changes(fn, lo, hi, cells):
    xs = np.linspace(lo, hi, cells + 1)
    vals = np.array([float(fn(x)) for x in xs])
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    return xs, vals, idx


def _fold_abscissae(rp, cells: int = SCAN_CELLS):
    closed = rp.closed_form_folds()
    if closed is not None:
        return closed
    lo, hi = rp.window
    for _ in range(4):
        xs, vals, idx = _scan_sign_changes(rp.df, lo, hi, cells)
        if len(idx) == 2 and vals[idx[0]] < 0 < vals[idx[0] + 1]:
            roots = [brentq(rp.df, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15) for i in idx]
            return roots[0], roots[1]
        # widen once in case a fold sits outside the window
        width = hi - lo
        lo, hi = lo - width, hi + width
    raise AssumptionError(
        f"f' must change sign exactly twice (minimum then maximum) on the scan window; found {len(idx)}"
    )


def _expand_bracket(fn, start, step, w, max_doublings=200):
    x = start
    for _ in range(max_doublings):
        x_new = x + step
        if (fn(x_new) - w) * (fn(start) - w) <= 0:
            return (x, x_new) if step > 0 else (x_new, x)
        x = x_new
        step *= 2.0
    raise NullclineRangeError("could not bracket the branch inverse")


def branch_inverse(w: float, branch: str, rp, folds: FoldData | None = None) -> float:
    """Abscissa on a stable branch of ``f`` where ``f(x) = w``.

    ``s_minus`` is ``f`` restricted to ``(-inf, x_minus]`` with range
    ``[f(x_minus), inf)``; ``s_plus`` is ``f`` on ``[x_plus, inf)`` with range
    ``(-inf, f(x_plus)]``.

    Raises:
        NullclineRangeError: if ``w`` is outside the branch range.
    """
    if folds is None:
        xm, xp = _fold_abscissae(rp)
    else:
        xm, xp = folds.x_minus, folds.x_plus
    step = max(rp.window[1] - rp.window[0], 1e-3) * 0.05
    if branch == "s_minus":
        edge = float(rp.f(xm))
        if w < edge - 1e-14 * max(1.0, abs(edge)):
            raise NullclineRangeError(f"w={w:.17g} below the s_minus range [{edge:.17g}, inf)")
        if w <= edge:
            return float(xm)
        lo, hi = _expand_bracket(rp.f, xm, -step, w)
    elif branch == "s_plus":
        edge = float(rp.f(xp))
        if w > edge + 1e-14 * max(1.0, abs(edge)):
            raise NullclineRangeError(f"w={w:.17g} above the s_plus range (-inf, {edge:.17g}]")
        if w >= edge:
            return float(xp)
        lo, hi = _expand_bracket(rp.f, xp, step, w)
    else:
        raise ValueError("branch must be 's_minus' or 's_plus'")
    return brentq(lambda x: float(rp.f(x)) - w, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def find_folds(rp) -> FoldData:
    """Minimum ``x_minus`` and maximum ``x_plus`` of ``f`` with their landing points.

    Raises:
        AssumptionError: if ``f`` does not have exactly one minimum and one
            maximum (``delta_alpha >= c * max sigma'`` for the sigmoid form).
    """
    xm, xp = _fold_abscissae(rp)
    fm, fp = float(rp.f(xm)), float(rp.f(xp))
    if not (xm < xp and fm < fp):
        raise AssumptionError("folds out of order: expected a minimum left of a maximum")
    partial = FoldData(xm, xp, fm, fp, np.nan, np.nan)
    xt_minus = branch_inverse(fm, "s_plus", rp, partial)
    xt_plus = branch_inverse(fp, "s_minus", rp, partial)
    return FoldData(xm, xp, fm, fp, xt_minus, xt_plus)


# -- critical point ----------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedCriticalPoint:
    x: float
    y: float
    nu_c: float

    @property
    def nu_c_printed(self) -> float:
        """Alternative closed form (3/2)sqrt(f)/f', 3/2 times the trace-zero threshold."""
        return 1.5 * self.nu_c

    def __iter__(self):
        return iter((self.x, self.y, self.nu_c))


def critical_point(rp, cells: int = SCAN_CELLS, folds: FoldData | None = None) -> ReducedCriticalPoint:
    """Unique intersection of ``f`` and ``g`` between the folds.

    ``nu_c = sqrt(y_c) / f'(x_c)`` is where the Jacobian trace
    ``nu f'(x_c) - sqrt(y_c)`` changes sign (Hopf bifurcation).

    Raises:
        AssumptionError: if there is not exactly one intersection.
    """
    folds = folds or find_folds(rp)
    gap = lambda x: float(rp.f(x)) - float(rp.g(x))
    xs, vals, idx = _scan_sign_changes(gap, folds.x_minus, folds.x_plus, cells)
    exact = np.nonzero(vals[1:-1] == 0.0)[0]
    if len(idx) + len(exact) != 1:
        raise AssumptionError(
            f"expected exactly one critical point between the folds, found {len(idx) + len(exact)}"
        )
    if len(exact):
        xc = float(xs[exact[0] + 1])
    else:
        i = idx[0]
        xc = brentq(gap, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15)
    yc = float(rp.f(xc))
    slope = float(rp.df(xc))
    nu_c = math.sqrt(yc) / slope if slope > 0 and yc > 0 else float("nan")
    return ReducedCriticalPoint(xc, yc, nu_c)


@dataclass(frozen=True)
class CriticalPointEstimate:
    estimate: float
    bound: float
    C: float


def critical_point_approx(rp, samples: int = 1000) -> CriticalPointEstimate:
    """Intersection of the tangent lines of ``f`` and ``g`` at their inflections.

    ``bound = C (x_plus - x_minus)^3`` with ``C`` one third of the largest
    third derivative magnitude of ``f`` or ``g`` between the folds.
    """
    folds = find_folds(rp)
    xa, xx = rp.f_inflection, rp.g_inflection
    fpa, gpx = float(rp.df(xa)), float(rp.dg(xx))
    est = (float(rp.g(xx)) - float(rp.f(xa)) + gpx * xx - fpa * xa) / (gpx - fpa)
    grid = np.linspace(folds.x_minus, folds.x_plus, samples)
    f3 = np.max(np.abs([float(rp.d3f(x)) for x in grid]))
    g3 = np.max(np.abs([float(rp.d3g(x)) for x in grid]))
    C = float(max(f3, g3)) / 3.0
    return CriticalPointEstimate(float(est), C * (folds.x_plus - folds.x_minus) ** 3, C)


@dataclass(frozen=True)
class AssumptionReport:
    folds_exist: bool
    left_fold_above_g: bool
    right_fold_below_g: bool
    unstable_critical_point: bool
    limit_cycle: bool
    nu: float
    nu_c: float | None = None
    x_c: float | None = None
    messages: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return all(
            (
                self.folds_exist,
                self.left_fold_above_g,
                self.right_fold_below_g,
                self.unstable_critical_point,
                self.limit_cycle,
            )
        )

    def to_dict(self) -> dict:
        return {
            "folds_exist": self.folds_exist,
            "left_fold_above_g": self.left_fold_above_g,
            "right_fold_below_g": self.right_fold_below_g,
            "unstable_critical_point": self.unstable_critical_point,
            "limit_cycle": self.limit_cycle,
            "nu": self.nu,
            "nu_c": self.nu_c,
            "x_c": self.x_c,
            "ok": self.ok,
            "messages": list(self.messages),
        }


def check_assumptions(rp) -> AssumptionReport:
    """Evaluate the conditions for a unique unstable point and a limit cycle."""
    msgs = []
    try:
        folds = find_folds(rp)
    except AssumptionError as exc:
        return AssumptionReport(False, False, False, False, False, rp.nu, messages=(str(exc),))
    left = folds.f_at_minus > float(rp.g(folds.x_minus))
    right = folds.f_at_plus < float(rp.g(folds.x_plus))
    if not left:
        msgs.append("f(x_minus) <= g(x_minus)")
    if not right:
        msgs.append("f(x_plus) >= g(x_plus)")
    try:
        cp = critical_point(rp, folds=folds)
    except AssumptionError as exc:
        msgs.append(str(exc))
        return AssumptionReport(True, left, right, False, False, rp.nu, messages=tuple(msgs))
    fpc, gpc = float(rp.df(cp.x)), float(rp.dg(cp.x))
    unstable = gpc > fpc > 0
    if not unstable:
        msgs.append(f"need g'(x_c) > f'(x_c) > 0, got {gpc:.6g}, {fpc:.6g}")
    cycle = bool(np.isfinite(cp.nu_c) and rp.nu > cp.nu_c)
    if not cycle:
        msgs.append(f"nu={rp.nu:.6g} not above nu_c={cp.nu_c:.6g}")
    return AssumptionReport(True, left, right, unstable, cycle, rp.nu, cp.nu_c, cp.x, tuple(msgs))
