"""The two-dimensional temperature / ice-extent model and its stability theory.

State variables are the nondimensional temperature ``theta`` and the ice
extent ``lam``. Critical points are located as intersections of the closed
form nullclines and classified from the analytic Jacobian.
"""

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .exceptions import DomainError, NoIceSheetError, NullclineRangeError
from .parametrization import (
    BetaConvention,
    FeedbackParams,
    KappaProfile,
    ModelConstants,
    alpha_c,
    alpha_c_deriv,
    alpha_c_inverse,
    alpha_o,
    alpha_o_deriv,
    derive_scales,
    lambda0_dkappa,
    lambda0_dlambda,
    lambda0_eval,
    xi_deriv,
    xi_eval,
)

CRITICAL_RESIDUAL_TOL = 1e-8


class FullState(NamedTuple):
    theta: float
    lam: float


class Branch(str, Enum):
    K_PLUS = "k_plus"
    K_MINUS = "k_minus"


class StabilityClass(str, Enum):
    STABLE_NODE = "stable node"
    STABLE_FOCUS = "stable focus"
    UNSTABLE_NODE = "unstable node"
    UNSTABLE_FOCUS = "unstable focus"
    SADDLE = "saddle"
    DEGENERATE = "degenerate"

    @property
    def is_stable(self) -> bool:
        return self in (StabilityClass.STABLE_NODE, StabilityClass.STABLE_FOCUS)


class CriticalPointProximityWarning(UserWarning):
    """Nullclines nearly tangent: roots may be lost or duplicated."""


@dataclass(frozen=True)
class FullParams:
    feedback: FeedbackParams = field(default_factory=FeedbackParams)
    gamma: float = 0.3
    beta: float = 4.0 * -267.96 / 1361.0
    mu: float = 1.0
    kappa: KappaProfile = field(default_factory=KappaProfile)

    @classmethod
    def from_constants(
        cls,
        mc: ModelConstants,
        feedback: FeedbackParams,
        kappa: KappaProfile | None = None,
        beta_convention=BetaConvention.CORRECTED,
        mu: float | None = None,
    ) -> "FullParams":
        ds = derive_scales(mc, kappa, beta_convention)
        return cls(
            feedback=feedback,
            gamma=mc.gamma,
            beta=ds.beta,
            mu=ds.mu if mu is None else mu,
            kappa=ds.kappa,
        )

    def with_mu(self, mu: float) -> "FullParams":
        return replace(self, mu=mu)


@dataclass(frozen=True)
class ValidityReport:
    not_stagnant: bool
    within_max_size: bool
    snowline_consistent: bool

    @property
    def ok(self) -> bool:
        return self.not_stagnant and self.within_max_size and self.snowline_consistent


@dataclass(frozen=True)
class CriticalPointReport:
    location: FullState
    branch: Branch
    trace: float
    determinant: float
    eigenvalues: tuple[complex, complex]
    classification: StabilityClass
    mu_critical: float | None
    h_slope: float
    k_slope: float
    hopf: bool = False

    def to_dict(self) -> dict:
        return {
            "theta": self.location.theta,
            "lambda": self.location.lam,
            "branch": self.branch.value,
            "trace": self.trace,
            "determinant": self.determinant,
            "eigenvalues": [[r.real, r.imag] for r in self.eigenvalues],
            "classification": self.classification.value,
            "mu_critical": self.mu_critical,
            "h_slope": self.h_slope,
            "k_slope": self.k_slope,
            "hopf": self.hopf,
        }


# -- vector field ------------------------------------------------------------


def _unpack(state):
    theta, lam = state
    return float(theta), float(lam)


def full_rhs(state, params: FullParams) -> tuple[float, float]:
    """Rates (dtheta/dtau, dlambda/dtau) at ``state``."""
    theta, lam = _unpack(state)
    if lam < 0:
        raise DomainError(f"ice extent must be non-negative, got {lam!r}")
    p = params.feedback
    F = params.mu * (
        1.0 - params.beta - params.gamma * alpha_c(lam, p) - (1.0 - params.gamma) * alpha_o(theta, p) - theta
    )
    xi = xi_eval(theta, p)
    G = np.sqrt(lam) * ((1.0 + xi) * lambda0_eval(lam, params.kappa(theta)) - 1.0)
    return float(F), float(G)


def jacobian(state, params: FullParams) -> np.ndarray:
    """Analytic Jacobian of :func:`full_rhs`; requires ``lam > 0``."""
    theta, lam = _unpack(state)
    if lam <= 0:
        raise DomainError("Jacobian needs a strictly positive ice extent")
    p = params.feedback
    g = params.gamma
    kappa = params.kappa(theta)
    xi = xi_eval(theta, p)
    l0 = lambda0_eval(lam, kappa)
    sq = np.sqrt(lam)
    F_theta = -params.mu * ((1.0 - g) * alpha_o_deriv(theta, p) + 1.0)
    F_lam = -params.mu * g * alpha_c_deriv(lam, p)
    dl0_dtheta = lambda0_dkappa(lam, kappa) * params.kappa.deriv(theta)
    G_theta = sq * (xi_deriv(theta, p) * l0 + (1.0 + xi) * dl0_dtheta)
    G_lam = ((1.0 + xi) * l0 - 1.0) / (2.0 * sq) + sq * (1.0 + xi) * lambda0_dlambda(lam, kappa)
    return np.array([[F_theta, F_lam], [G_theta, G_lam]], dtype=float)


def check_validity(state, params: FullParams) -> ValidityReport:
    """Physical validity flags of a state (stagnation, size, snow line)."""
    theta, lam = _unpack(state)
    kappa = float(params.kappa(theta))
    try:
        not_stagnant = bool(lambda0_eval(lam, kappa) >= 0.0)
    except DomainError:
        not_stagnant = False
    snowline_ok = True if kappa >= 0 else (2.0 * lam + kappa >= 0.0)
    return ValidityReport(not_stagnant, lam <= 1.0, bool(snowline_ok))


# -- nullclines ----------------------------------------------------------------


def required_continental_albedo(theta, params: FullParams):
    p = params.feedback
    g = params.gamma
    return (1.0 - params.beta - (1.0 - g) * alpha_o(theta, p) - theta) / g


def theta_nullcline(theta: float, params: FullParams) -> float:
    """Ice extent h(theta) on which the temperature tendency vanishes.

    Raises:
        NullclineRangeError: if no ice extent yields the required albedo.
    """
    return alpha_c_inverse(float(required_continental_albedo(theta, params)), params.feedback)


def theta_nullcline_slope(theta: float, params: FullParams) -> float:
    p = params.feedback
    h = theta_nullcline(theta, params)
    return float(
        -((1.0 - params.gamma) * alpha_o_deriv(theta, p) + 1.0) / (params.gamma * alpha_c_deriv(h, p))
    )


def kappa_bound(theta, params: FullParams):
    """Largest snow-line height for which an ice sheet can exist at ``theta``."""
    xi = xi_eval(theta, params.feedback)
    return 0.25 * xi / (2.0 + xi)


def lambda_nullcline(theta: float, branch, params: FullParams) -> float:
    """Ice extent k(theta) on the requested branch of the ice nullcline.

    Raises:
        NoIceSheetError: when the snow line is too high for any equilibrium
            ice sheet at this temperature.
    """
    branch = Branch(branch)
    xi = float(xi_eval(theta, params.feedback))
    kappa = float(params.kappa(theta))
    r = 1.0 + 2.0 / xi
    disc = 1.0 - 4.0 * r * kappa
    if disc < 0:
        raise NoIceSheetError(
            f"kappa={kappa:.6g} exceeds xi/(4(2+xi))={0.25 * xi / (2 + xi):.6g} at theta={theta:.6g}"
        )
    root = np.sqrt(disc)
    sign = 1.0 if branch is Branch.K_PLUS else -1.0
    return float(0.5 * (1.0 + xi) * xi / (2.0 + xi) ** 2 * (1.0 - 2.0 * r * kappa + sign * root))


def lambda_nullcline_slope(theta: float, branch, params: FullParams) -> float:
    """dk/dtheta via the implicit function theorem on G(theta, k(theta)) = 0."""
    lam = lambda_nullcline(theta, branch, params)
    if lam <= 0:
        # k_minus vanishes identically when kappa is zero
        if params.kappa.is_zero:
            return 0.0
        raise DomainError("nullcline slope undefined at zero ice extent")
    J = jacobian((theta, lam), params)
    G_theta, G_lam = J[1]
    if G_lam == 0.0:
        return float("inf")
    return float(-G_theta / G_lam)


def nullcline_table(params: FullParams, thetas) -> list[dict]:
    """Rows ``theta, h, k_plus, k_minus`` with ``None`` where undefined."""
    rows = []
    for th in np.asarray(thetas, dtype=float):
        row = {"theta": float(th), "h": None, "k_plus": None, "k_minus": None}
        try:
            row["h"] = theta_nullcline(th, params)
        except NullclineRangeError:
            pass
        for br in Branch:
            try:
                row[br.value] = lambda_nullcline(th, br, params)
            except NoIceSheetError:
                pass
        rows.append(row)
    return rows


# -- critical points -------------------------------------------------------------


def _branch_gap(theta, branch, params):
    try:
        return theta_nullcline(theta, params) - lambda_nullcline(theta, branch, params)
    except NullclineRangeError:
        return np.nan


def find_critical_points(
    params: FullParams,
    theta_window: tuple[float, float] = (0.5, 2.5),
    cells: int = 512,
    xtol: float = 1e-12,
) -> list[CriticalPointReport]:
    """All nullcline intersections in ``theta_window``, classified.

    The gap h - k is scanned on a uniform grid and every sign change is
    refined with Brent's method. Near-tangencies (a tiny local extremum of
    the gap without a sign change, or two roots in adjacent cells) trigger a
    :class:`CriticalPointProximityWarning`.
    """
    lo, hi = map(float, theta_window)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError("theta_window must be a finite increasing interval")
    cells = max(int(cells), 512)
    grid = np.linspace(lo, hi, cells + 1)
    spacing = (hi - lo) / cells
    reports = []
    for branch in Branch:
        if branch is Branch.K_MINUS and params.kappa.is_zero:
            # k_minus collapses onto lambda = 0, outside the model domain
            continue
        gap = np.array([_branch_gap(th, branch, params) for th in grid])
        scale = np.nanmax(np.abs(gap)) if np.any(np.isfinite(gap)) else 1.0
        roots = []
        for i in range(cells):
            a, b = gap[i], gap[i + 1]
            if not (np.isfinite(a) and np.isfinite(b)):
                continue
            if a == 0.0:
                roots.append(grid[i])
            elif a * b < 0:
                roots.append(brentq(_branch_gap, grid[i], grid[i + 1], args=(branch, params), xtol=xtol, rtol=1e-15))
        if np.isfinite(gap[-1]) and gap[-1] == 0.0:
            roots.append(grid[-1])
        touch_tol = 1e-6 * max(scale, 1e-300)
        for i in range(1, cells):
            a, b, c = gap[i - 1], gap[i], gap[i + 1]
            if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
                continue
            extremum = (abs(b) <= abs(a)) and (abs(b) <= abs(c)) and a * c > 0 and a * b > 0
            if not extremum:
                continue
            # the grid value overestimates the gap near a touch; refine the extremum
            refined = minimize_scalar(
                lambda th: abs(_branch_gap(th, branch, params)),
                bounds=(grid[i - 1], grid[i + 1]),
                method="bounded",
                options={"xatol": 1e-12},
            )
            if np.isfinite(refined.fun) and refined.fun < touch_tol:
                warnings.warn(
                    f"nullclines h and {branch.value} nearly tangent near theta={grid[i]:.6g}",
                    CriticalPointProximityWarning,
                    stacklevel=2,
                )
        for r0, r1 in zip(roots, roots[1:]):
            if r1 - r0 < 2.0 * spacing:
                warnings.warn(
                    f"two critical points on {branch.value} within {r1 - r0:.3g} near theta={r0:.6g}",
                    CriticalPointProximityWarning,
                    stacklevel=2,
                )
        for th in roots:
            lam = lambda_nullcline(th, branch, params)
            if lam <= 0:
                continue
            reports.append(classify_stability(FullState(th, lam), params, branch=branch))
    reports.sort(key=lambda r: r.location.theta)
    return reports


def _eigenvalues(tr: float, det: float) -> tuple[complex, complex]:
    root = np.sqrt(complex(tr * tr - 4.0 * det))
    return 0.5 * (tr + root), 0.5 * (tr - root)


def _classify(tr: float, det: float, scale: float) -> StabilityClass:
    tiny = 1e-12 * max(scale, 1e-300)
    if abs(det) <= tiny**2 or abs(tr) <= tiny and det > 0:
        return StabilityClass.DEGENERATE
    if det < 0:
        return StabilityClass.SADDLE
    disc = tr * tr - 4.0 * det
    if tr < 0:
        return StabilityClass.STABLE_NODE if disc >= 0 else StabilityClass.STABLE_FOCUS
    return StabilityClass.UNSTABLE_NODE if disc >= 0 else StabilityClass.UNSTABLE_FOCUS


def _nearest_branch(point: FullState, params: FullParams) -> Branch:
    best, dist = Branch.K_PLUS, np.inf
    for br in Branch:
        try:
            d = abs(lambda_nullcline(point.theta, br, params) - point.lam)
        except NoIceSheetError:
            continue
        if d < dist:
            best, dist = br, d
    return best


def classify_stability(
    point,
    params: FullParams,
    branch: Branch | None = None,
    residual_tol: float = CRITICAL_RESIDUAL_TOL,
) -> CriticalPointReport:
    """Trace, determinant, eigenvalues and stability class at a critical point.

    Raises:
        ValueError: if ``point`` is not a critical point to ``residual_tol``.
    """
    point = FullState(*_unpack(point))
    F, G = full_rhs(point, params)
    # relative to the size of the individual terms of the temperature balance
    if abs(F) > residual_tol * max(1.0, params.mu) or abs(G) > residual_tol:
        raise ValueError(f"not a critical point: residuals ({F:.3g}, {G:.3g})")
    if branch is None:
        branch = _nearest_branch(point, params)
    J = jacobian(point, params)
    tr = float(np.trace(J))
    det = float(np.linalg.det(J))
    scale = float(np.max(np.abs(J)))
    eig = _eigenvalues(tr, det)
    h_slope = theta_nullcline_slope(point.theta, params)
    try:
        k_slope = lambda_nullcline_slope(point.theta, branch, params)
    except DomainError:
        k_slope = float("nan")
    mu_c = None
    hopf = False
    if branch is Branch.K_PLUS and h_slope > 0:
        try:
            mu_c = mu_critical(point, params)
        except ZeroDivisionError:
            mu_c = None
        # det J keeps its sign in mu; a complex pair crosses only when det > 0,
        # which on this branch means dh/dtheta < dk/dtheta
        hopf = mu_c is not None and mu_c > 0 and det > 0
    return CriticalPointReport(
        location=point,
        branch=branch,
        trace=tr,
        determinant=det,
        eigenvalues=eig,
        classification=_classify(tr, det, scale),
        mu_critical=mu_c,
        h_slope=h_slope,
        k_slope=k_slope,
        hopf=hopf,
    )


def mu_critical(point, params: FullParams) -> float:
    """Thermal stiffness at which the Jacobian trace vanishes.

    The trace is ``-mu*X + G_lam`` with ``X = (1-gamma) alpha_o' + 1``, so the
    threshold is ``G_lam / X``.

    Raises:
        ZeroDivisionError: when ``X`` vanishes at the point.
    """
    theta, lam = _unpack(point)
    X = (1.0 - params.gamma) * float(alpha_o_deriv(theta, params.feedback)) + 1.0
    if abs(X) < 1e-14:
        raise ZeroDivisionError("degenerate denominator: (1-gamma) alpha_o' + 1 = 0")
    G_lam = jacobian(point, params)[1, 1]
    return float(G_lam / X)


def trace_at(point, params: FullParams, mu: float) -> float:
    return float(np.trace(jacobian(point, params.with_mu(mu))))


def report_to_json_ready(reports) -> list[dict]:
    return [r.to_dict() for r in reports]
