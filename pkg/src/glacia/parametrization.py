"""Physical constants, feedback parametrizations and unit conversion.

The model works in nondimensional variables: temperature ``theta``, southward
ice extent ``lambda`` and time ``tau``. :func:`derive_scales` turns the
dimensional constants into the nondimensional groups and the conversion
factors used by :func:`dimensionalize`.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import ConfigError, DomainError, NullclineRangeError
from .sigmoids import SigmoidFamily, sigmoid, sigmoid_deriv, sigmoid_inverse

SECONDS_PER_YEAR = 365.25 * 86400.0

# Largest physically attainable nondimensional ice extent on the model's
# equilibria; bounds the linear continental albedo check.
LAMBDA_PHYSICAL_MAX = 2.0 / 9.0


class ContinentalMode(str, Enum):
    SIGMOID = "sigmoid"
    LINEAR = "linear"


class BetaConvention(str, Enum):
    # beta = 4A/Q, balances the temperature equation near theta ~ 1.4 when A < 0
    CORRECTED = "corrected"
    # beta = -4A/Q, the opposite-sign variant that is positive for the Kelvin-convention A
    PRINTED = "printed"


@dataclass(frozen=True)
class ModelConstants:
    """Dimensional constants. Defaults are the typical values of the model."""

    Q: float = 1361.0  # W m^-2
    A: float = -267.96  # W m^-2
    B: float = 1.74  # W m^-2 K^-1
    gamma: float = 0.3
    tau0: float = 0.3e5  # Pa
    rho_i: float = 0.92e3  # kg m^-3
    grav: float = 9.81  # m s^-2
    s: float = 0.4e-3
    m: float = 0.5  # m yr^-1
    c_heat: float = 1.0e7  # J m^-2 K^-1
    h0: float = 1.2e3  # m

    def __post_init__(self):
        for name in ("Q", "B", "tau0", "rho_i", "grav", "s", "m", "c_heat"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"{name} > 0", f"got {value!r}")
        if not (0.0 < self.gamma < 1.0):
            raise ConfigError("0 < gamma < 1", f"got {self.gamma!r}")
        if not np.isfinite(self.A):
            raise ConfigError("A finite", f"got {self.A!r}")

    @property
    def H2(self) -> float:
        """Squared ice-height scale 4 tau0 / (3 rho_i g), in metres."""
        return 4.0 * self.tau0 / (3.0 * self.rho_i * self.grav)


@dataclass(frozen=True)
class KappaProfile:
    """Nondimensional snow-line height, affine and nondecreasing in theta."""

    value: float = 0.0
    slope: float = 0.0
    theta_ref: float = 0.0

    def __post_init__(self):
        if self.slope < 0:
            raise ConfigError("kappa nondecreasing in theta (slope >= 0)", f"got slope={self.slope!r}")

    def __call__(self, theta):
        return self.value + self.slope * (np.asarray(theta, dtype=float) - self.theta_ref)

    def deriv(self, theta):
        return self.slope + 0.0 * np.asarray(theta, dtype=float)

    @property
    def is_zero(self) -> bool:
        return self.value == 0.0 and self.slope == 0.0


@dataclass(frozen=True)
class DerivedScales:
    H2: float
    beta: float
    mu: float
    kappa: KappaProfile
    theta_per_kelvin: float
    lambda_per_meter: float
    tau_per_year: float


@dataclass(frozen=True)
class FeedbackParams:
    """Continental and oceanic albedo and the accumulation/ablation ratio.

    In ``linear`` continental mode ``alpha1`` is the slope of the albedo in
    the ice extent; in ``sigmoid`` mode it is the upper limit.
    """

    sigmoid_family: SigmoidFamily = SigmoidFamily.TANH
    continental_mode: ContinentalMode = ContinentalMode.LINEAR
    alpha0: float = 0.25
    alpha1: float = 1.0
    lambda_alpha: float = 0.1
    delta_lambda: float = 0.05
    alpha_minus: float = 0.6
    alpha_plus: float = 0.22
    theta_alpha: float = 1.4
    delta_alpha: float = 0.15
    xi_minus: float = 0.1
    xi_plus: float = 0.5
    theta_xi: float = 1.39
    delta_xi: float = 0.025

    def __post_init__(self):
        object.__setattr__(self, "sigmoid_family", SigmoidFamily(self.sigmoid_family))
        object.__setattr__(self, "continental_mode", ContinentalMode(self.continental_mode))
        for name in ("delta_lambda", "delta_alpha", "delta_xi"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} > 0 (steepness)", f"got {getattr(self, name)!r}")
        if not (0.0 <= self.alpha0 <= self.alpha1 <= 1.0):
            raise ConfigError("0 <= alpha0 <= alpha1 <= 1", f"got {self.alpha0!r}, {self.alpha1!r}")
        if self.continental_mode is ContinentalMode.LINEAR:
            top = self.alpha0 + self.alpha1 * LAMBDA_PHYSICAL_MAX
            if top > 1.0:
                raise ConfigError(
                    "continental albedo in [0, 1] on the physical domain",
                    f"alpha0 + alpha1*{LAMBDA_PHYSICAL_MAX:.4f} = {top:.4f}",
                )
        if not (self.alpha_minus >= self.alpha_plus):
            raise ConfigError("alpha_minus >= alpha_plus", f"got {self.alpha_minus!r}, {self.alpha_plus!r}")
        if not (0.0 <= self.alpha_plus and self.alpha_minus <= 1.0):
            raise ConfigError("oceanic albedo limits in [0, 1]")
        if not (0.0 < self.xi_minus <= self.xi_plus):
            raise ConfigError("0 < xi_minus <= xi_plus", f"got {self.xi_minus!r}, {self.xi_plus!r}")

    @property
    def xi_sum(self) -> float:
        return self.xi_minus + self.xi_plus


# -- feedback functions ------------------------------------------------------


def alpha_c(lam, p: FeedbackParams):
    """Continental albedo as a nondecreasing function of ice extent."""
    lam = np.asarray(lam, dtype=float)
    if p.continental_mode is ContinentalMode.LINEAR:
        out = p.alpha0 + p.alpha1 * lam
    else:
        u = (lam - p.lambda_alpha) / p.delta_lambda
        out = 0.5 * (p.alpha0 + p.alpha1 + (p.alpha1 - p.alpha0) * sigmoid(p.sigmoid_family, u))
    return out[()] if np.ndim(out) == 0 else out


def alpha_c_deriv(lam, p: FeedbackParams):
    lam = np.asarray(lam, dtype=float)
    if p.continental_mode is ContinentalMode.LINEAR:
        out = p.alpha1 + 0.0 * lam
    else:
        u = (lam - p.lambda_alpha) / p.delta_lambda
        out = 0.5 * (p.alpha1 - p.alpha0) / p.delta_lambda * sigmoid_deriv(p.sigmoid_family, u)
    return out[()] if np.ndim(out) == 0 else out


def alpha_c_range(p: FeedbackParams) -> tuple[float, float]:
    """Closed range of albedo values that :func:`alpha_c_inverse` accepts."""
    if p.continental_mode is ContinentalMode.LINEAR:
        return p.alpha0, p.alpha0 + p.alpha1
    return p.alpha0, p.alpha1


def alpha_c_inverse(albedo: float, p: FeedbackParams) -> float:
    """Ice extent with the given continental albedo.

    Raises:
        NullclineRangeError: if the albedo is outside the attainable range.
    """
    lo, hi = alpha_c_range(p)
    if p.continental_mode is ContinentalMode.LINEAR:
        if not (lo <= albedo <= hi) or p.alpha1 == 0.0:
            raise NullclineRangeError(f"albedo {albedo:.6g} outside [{lo:.6g}, {hi:.6g}]")
        return (albedo - p.alpha0) / p.alpha1
    if not (lo < albedo < hi):
        raise NullclineRangeError(f"albedo {albedo:.6g} outside ({lo:.6g}, {hi:.6g})")
    v = (2.0 * albedo - p.alpha0 - p.alpha1) / (p.alpha1 - p.alpha0)
    return float(p.lambda_alpha + p.delta_lambda * sigmoid_inverse(p.sigmoid_family, v))


def alpha_o(theta, p: FeedbackParams):
    """Oceanic albedo, nonincreasing in temperature."""
    u = (np.asarray(theta, dtype=float) - p.theta_alpha) / p.delta_alpha
    return 0.5 * (p.alpha_plus + p.alpha_minus + (p.alpha_plus - p.alpha_minus) * sigmoid(p.sigmoid_family, u))


def alpha_o_deriv(theta, p: FeedbackParams):
    u = (np.asarray(theta, dtype=float) - p.theta_alpha) / p.delta_alpha
    return 0.5 * (p.alpha_plus - p.alpha_minus) / p.delta_alpha * sigmoid_deriv(p.sigmoid_family, u)


def xi_eval(theta, p: FeedbackParams):
    """Ratio of accumulation to ablation, nondecreasing in temperature."""
    u = (np.asarray(theta, dtype=float) - p.theta_xi) / p.delta_xi
    return 0.5 * (p.xi_plus + p.xi_minus + (p.xi_plus - p.xi_minus) * sigmoid(p.sigmoid_family, u))


def xi_deriv(theta, p: FeedbackParams):
    u = (np.asarray(theta, dtype=float) - p.theta_xi) / p.delta_xi
    return 0.5 * (p.xi_plus - p.xi_minus) / p.delta_xi * sigmoid_deriv(p.sigmoid_family, u)


# -- snow line ---------------------------------------------------------------
#
# lambda0 = (-(k + l + 1/2) + sqrt(k + 2l + 1/4)) / l is evaluated in the
# rationalized form N/D below, which has no cancellation as l -> 0.


def _lambda0_parts(lam, kappa):
    lam = np.asarray(lam, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(lam < 0):
        raise DomainError("ice extent must be non-negative")
    rad = kappa + 2.0 * lam + 0.25
    if np.any(rad < 0):
        raise DomainError("snow line undefined: kappa + 2*lambda + 1/4 < 0")
    S = np.sqrt(rad)
    with np.errstate(divide="ignore", invalid="ignore"):
        k2_over_l = np.where(kappa == 0.0, 0.0, kappa * kappa / lam)
        k2_over_l2 = np.where(kappa == 0.0, 0.0, kappa * kappa / (lam * lam))
        k_over_l = np.where(kappa == 0.0, 0.0, kappa / lam)
    N = 1.0 - lam - 2.0 * kappa - k2_over_l
    D = S + kappa + lam + 0.5
    return lam, kappa, S, N, D, k2_over_l2, k_over_l


def lambda0_eval(lam, kappa):
    """Fractional position of the accumulation/ablation boundary on the sheet."""
    _, _, _, N, D, _, _ = _lambda0_parts(lam, kappa)
    out = N / D
    return out[()] if np.ndim(out) == 0 else out


def lambda0_dlambda(lam, kappa):
    """Partial derivative of the snow-line position with respect to extent."""
    _, _, S, N, D, k2_over_l2, _ = _lambda0_parts(lam, kappa)
    dN = -1.0 + k2_over_l2
    dD = 1.0 / S + 1.0
    out = (dN * D - N * dD) / (D * D)
    return out[()] if np.ndim(out) == 0 else out


def lambda0_dkappa(lam, kappa):
    """Partial derivative of the snow-line position with respect to kappa."""
    _, _, S, N, D, _, k_over_l = _lambda0_parts(lam, kappa)
    dN = -2.0 - 2.0 * k_over_l
    dD = 0.5 / S + 1.0
    out = (dN * D - N * dD) / (D * D)
    return out[()] if np.ndim(out) == 0 else out


# -- scales ------------------------------------------------------------------


def derive_scales(
    mc: ModelConstants,
    kappa_profile: KappaProfile | None = None,
    beta_convention: BetaConvention | str = BetaConvention.CORRECTED,
    beta_override: float | None = None,
) -> DerivedScales:
    """Nondimensional groups and conversion factors from dimensional constants.

    ``kappa_profile`` defaults to the constant s*h0/H^2.
    """
    H2 = mc.H2
    if beta_override is not None:
        beta = float(beta_override)
    elif BetaConvention(beta_convention) is BetaConvention.CORRECTED:
        beta = 4.0 * mc.A / mc.Q
    else:
        beta = -4.0 * mc.A / mc.Q
    m_per_second = mc.m / SECONDS_PER_YEAR
    mu = 1.5 * mc.B * H2 / (m_per_second * mc.s * mc.c_heat)
    if kappa_profile is None:
        kappa_profile = KappaProfile(value=mc.s * mc.h0 / H2)
    return DerivedScales(
        H2=H2,
        beta=beta,
        mu=mu,
        kappa=kappa_profile,
        theta_per_kelvin=4.0 * mc.B / mc.Q,
        lambda_per_meter=mc.s**2 / H2,
        tau_per_year=(2.0 / 3.0) * mc.m * mc.s / H2,
    )


_KINDS = ("theta", "lambda", "tau", "t", "y")


def _factor(kind: str, ds: DerivedScales, xi_sum: float | None) -> float:
    """Multiplier taking a nondimensional quantity of ``kind`` to SI/years."""
    if kind == "theta":
        return 1.0 / ds.theta_per_kelvin
    if kind == "lambda":
        return 1.0 / ds.lambda_per_meter
    if kind == "tau":
        return 1.0 / ds.tau_per_year
    if kind in ("t", "y"):
        if xi_sum is None or xi_sum <= 0:
            raise ValueError(f"kind {kind!r} needs the positive sum xi_minus + xi_plus")
        if kind == "t":
            return 1.0 / (np.sqrt(2.0 * xi_sum) * ds.tau_per_year)
        return xi_sum / 8.0 / ds.lambda_per_meter
    raise ValueError(f"unknown kind {kind!r}; expected one of {_KINDS}")


def dimensionalize(value, kind: str, ds: DerivedScales, xi_sum: float | None = None):
    """Convert a nondimensional quantity to physical units.

    Kinds: ``theta`` -> K, ``lambda`` -> m, ``tau`` -> yr, and for the reduced
    system ``t`` -> yr and ``y`` -> m (both need ``xi_sum``).
    """
    return np.asarray(value, dtype=float) * _factor(kind, ds, xi_sum)


def nondimensionalize(value, kind: str, ds: DerivedScales, xi_sum: float | None = None):
    """Inverse of :func:`dimensionalize`."""
    return np.asarray(value, dtype=float) / _factor(kind, ds, xi_sum)
