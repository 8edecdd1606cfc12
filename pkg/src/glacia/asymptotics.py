"""Large-``nu`` period and amplitude of the relaxation cycle, with elementary bounds.

All routines accept a :class:`~glacia.reduced_model.ReducedParams` or any
nullcline pair with the same interface.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .exceptions import AssumptionError, DomainError, SingularIntegrandError
from .reduced_model import FoldData, branch_inverse, check_assumptions, find_folds

# smallest positive zeta with Ai(-zeta) = 0
AIRY_ZETA = 2.338107410459767

PRECHECK_POINTS = 64


def phi(u: float, v: float, w: float) -> float:
    """``ln(((sqrt v - sqrt w)(sqrt u + sqrt w)) / ((sqrt u - sqrt w)(sqrt v + sqrt w))) / sqrt w``.

    Equals the integral of ``1 / (sqrt(s) (w - s))`` from ``v`` to ``u``.
    Differences of square roots are formed as ``(v - w) / (sqrt v + sqrt w)``
    so nearly equal arguments do not cancel.

    Raises:
        DomainError: for negative arguments or a non-positive log argument
            (``w`` between ``u`` and ``v``).
    """
    if u < 0 or v < 0 or w <= 0:
        raise DomainError(f"phi needs u, v >= 0 and w > 0, got ({u!r}, {v!r}, {w!r})")
    su, sv, sw = math.sqrt(u), math.sqrt(v), math.sqrt(w)
    dv = (v - w) / (sv + sw)
    du = (u - w) / (su + sw)
    if dv == 0.0 or du == 0.0 or (dv > 0) != (du > 0):
        raise DomainError(f"phi log argument non-positive for ({u!r}, {v!r}, {w!r})")
    return (math.log(abs(dv)) - math.log(abs(du)) + math.log(su + sw) - math.log(sv + sw)) / sw


def _branch_name(branch) -> str:
    name = str(getattr(branch, "value", branch))
    if name in ("+", "plus"):
        return "s_plus"
    if name in ("-", "minus"):
        return "s_minus"
    if name not in ("s_plus", "s_minus"):
        raise ValueError("branch must be 's_plus' or 's_minus'")
    return name


def _denominator(w, branch, rp, folds):
    return float(rp.g(branch_inverse(w, branch, rp, folds))) - w


def quad_I(branch, u: float, v: float, rp, folds: FoldData | None = None, epsrel: float = 1e-10, limit: int = 200) -> float:
    """Integral of ``1 / (sqrt(w) (g(f_branch^{-1}(w)) - w))`` from ``u`` to ``v``.

    Adaptive Gauss-Kronrod quadrature. The denominator is sampled at 64
    points first and must keep one sign away from zero.

    Raises:
        SingularIntegrandError: the denominator vanishes or changes sign.
        NullclineRangeError: ``[u, v]`` leaves the branch range.
    """
    branch = _branch_name(branch)
    if u == v:
        return 0.0
    folds = folds or find_folds(rp)
    lo, hi = min(u, v), max(u, v)
    if lo <= 0:
        raise DomainError("integration interval must lie in w > 0")
    scale = max(1.0, abs(hi))
    samples = np.linspace(lo, hi, PRECHECK_POINTS)
    den = np.array([_denominator(w, branch, rp, folds) for w in samples])
    if np.any(np.abs(den) < 1e-12 * scale) or not (np.all(den > 0) or np.all(den < 0)):
        raise SingularIntegrandError(
            f"g(f^-1(w)) - w vanishes on [{lo:.6g}, {hi:.6g}] for branch {branch} "
            f"(min |den| = {np.min(np.abs(den)):.3g})"
        )

    def integrand(w):
        return 1.0 / (math.sqrt(w) * _denominator(w, branch, rp, folds))

    val, err = quad(integrand, u, v, epsabs=0.0, epsrel=epsrel, limit=limit)
    return float(val)


@dataclass(frozen=True)
class PeriodExpansion:
    leading: float
    correction_coeff: float
    airy_zeta: float = AIRY_ZETA
    i_plus: float = math.nan
    i_minus: float = math.nan
    fold_group_minus: float = math.nan
    fold_group_plus: float = math.nan

    def total(self, nu):
        """Leading term plus the ``nu^(-2/3)`` correction."""
        return self.leading + np.asarray(nu, dtype=float) ** (-2.0 / 3.0) * self.correction_coeff

    def correction(self, nu):
        return np.asarray(nu, dtype=float) ** (-2.0 / 3.0) * self.correction_coeff

    def to_dict(self) -> dict:
        return {
            "leading": self.leading,
            "correction_coeff": self.correction_coeff,
            "airy_zeta": self.airy_zeta,
            "i_plus": self.i_plus,
            "i_minus": self.i_minus,
        }


@dataclass(frozen=True)
class AmplitudeExpansion:
    ax_leading: float
    ax_correction: float
    ay_leading: float

    def ax_total(self, nu):
        return self.ax_leading + np.asarray(nu, dtype=float) ** (-2.0 / 3.0) * self.ax_correction

    def to_dict(self) -> dict:
        return {"ax_leading": self.ax_leading, "ax_correction": self.ax_correction, "ay_leading": self.ay_leading}


def _require(rp):
    rep = check_assumptions(rp)
    geometry = rep.folds_exist and rep.left_fold_above_g and rep.right_fold_below_g and rep.unstable_critical_point
    if not geometry:
        raise AssumptionError("relaxation-cycle geometry fails: " + "; ".join(rep.messages))


def period_asymptotic(rp, folds: FoldData | None = None, check: bool = True, epsrel: float = 1e-10) -> PeriodExpansion:
    """Leading period ``I+ + I-`` and the coefficient of ``nu^(-2/3)``."""
    if check:
        _require(rp)
    fd = folds or find_folds(rp)
    xm, xp, fm, fp = fd.x_minus, fd.x_plus, fd.f_at_minus, fd.f_at_plus
    i_plus = quad_I("s_plus", fm, fp, rp, fd, epsrel=epsrel)
    i_minus = quad_I("s_minus", fp, fm, rp, fd, epsrel=epsrel)
    gm, gp = float(rp.g(xm)), float(rp.g(xp))
    f2m, f2p = float(rp.d2f(xm)), float(rp.d2f(xp))
    group_m = 1.0 / np.cbrt(0.5 * f2m * math.sqrt(fm) * (fm - gm)) * (
        1.0 + (fm - gm) / (float(rp.g(fd.x_tilde_minus)) - fm)
    )
    group_p = 1.0 / np.cbrt(0.5 * f2p * math.sqrt(fp) * (fp - gp)) * (
        1.0 + (gp - fp) / (fp - float(rp.g(fd.x_tilde_plus)))
    )
    return PeriodExpansion(
        leading=i_plus + i_minus,
        correction_coeff=float(AIRY_ZETA * (group_m + group_p)),
        i_plus=i_plus,
        i_minus=i_minus,
        fold_group_minus=float(group_m),
        fold_group_plus=float(group_p),
    )


def amplitude_asymptotic(rp, folds: FoldData | None = None, check: bool = True) -> AmplitudeExpansion:
    if check:
        _require(rp)
    fd = folds or find_folds(rp)
    xm, xp, fm, fp = fd.x_minus, fd.x_plus, fd.f_at_minus, fd.f_at_plus
    gm, gp = float(rp.g(xm)), float(rp.g(xp))
    plus = np.cbrt(2.0 * fp * (fp - gp) ** 2 / float(rp.d2f(xp))) / float(rp.df(fd.x_tilde_plus))
    minus = np.cbrt(2.0 * fm * (fm - gm) ** 2 / float(rp.d2f(xm))) / float(rp.df(fd.x_tilde_minus))
    return AmplitudeExpansion(
        ax_leading=fd.x_tilde_minus - fd.x_tilde_plus,
        ax_correction=float(AIRY_ZETA * (plus - minus)),
        ay_leading=fp - fm,
    )


def period_bounds(rp, folds: FoldData | None = None, d: float | None = None) -> tuple[float, float]:
    """Elementary bounds ``(T_minus, T_plus)`` on the leading-order period.

    ``T_minus`` only uses the fold ordinates and the limits ``1 -+ d`` of
    ``g``. For a user pair without a ``d`` attribute pass ``d`` explicitly.
    """
    fd = folds or find_folds(rp)
    fm, fp = fd.f_at_minus, fd.f_at_plus
    if d is None:
        d = getattr(rp, "d", None)
        if d is None:
            raise ValueError("d is required for a nullcline pair without a 'd' attribute")
    t_minus = phi(fm, fp, 1.0 - d) + phi(fp, fm, 1.0 + d)
    t_plus = phi(fm, fp, float(rp.g(fd.x_minus))) + phi(fp, fm, float(rp.g(fd.x_plus)))
    return t_minus, t_plus


def amplitude_bound(rp, folds: FoldData | None = None) -> float:
    """Upper bound ``2c + b (f(x_plus) - f(x_minus))`` on the x-amplitude."""
    fd = folds or find_folds(rp)
    return 2.0 * rp.c + rp.b * (fd.f_at_plus - fd.f_at_minus)
