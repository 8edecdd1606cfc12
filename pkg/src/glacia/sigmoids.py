"""Odd sigmoid families normalized to the limits -1 and +1.

Every family exposes its value, first three derivatives, the inverse of the
function itself, and the inverse of its derivative on the non-negative half
line. The last one locates the folds of an S-shaped nullcline in closed form.
"""

import math
from enum import Enum

import numpy as np
from scipy import special

_TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)


class SigmoidFamily(str, Enum):
    TANH = "tanh"
    LOGISTIC = "logistic"
    ALGEBRAIC = "algebraic"
    ERF = "erf"


def _sech2(u):
    # 1 - tanh(u)^2 without cancellation in the tails
    e = np.exp(-2.0 * np.abs(u))
    return 4.0 * e / (1.0 + e) ** 2


def _sech2_scalar(u):
    e = math.exp(-2.0 * abs(u))
    return 4.0 * e / (1.0 + e) ** 2


def _family(family) -> SigmoidFamily:
    return family if isinstance(family, SigmoidFamily) else SigmoidFamily(family)


def sigmoid(family, u):
    """Evaluate the sigmoid. Odd, increasing, with values in (-1, 1)."""
    fam = _family(family)
    u = np.asarray(u, dtype=float)
    if fam is SigmoidFamily.TANH:
        out = np.tanh(u)
    elif fam is SigmoidFamily.LOGISTIC:
        # 2/(1 + exp(-u)) - 1, written without overflow
        out = np.tanh(0.5 * u)
    elif fam is SigmoidFamily.ALGEBRAIC:
        out = u / np.hypot(1.0, u)
    else:
        out = special.erf(u)
    return out[()] if out.ndim == 0 else out


def sigmoid_deriv(family, u, order: int = 1):
    """Analytic derivative of order 1, 2 or 3."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    fam = _family(family)
    u = np.asarray(u, dtype=float)
    if fam in (SigmoidFamily.TANH, SigmoidFamily.LOGISTIC):
        scale = 1.0 if fam is SigmoidFamily.TANH else 0.5
        t = np.tanh(scale * u)
        s1 = _sech2(scale * u)
        if order == 1:
            out = scale * s1
        elif order == 2:
            out = scale**2 * (-2.0 * t * s1)
        else:
            out = scale**3 * s1 * (6.0 * t * t - 2.0)
    elif fam is SigmoidFamily.ALGEBRAIC:
        q = 1.0 + u * u
        if order == 1:
            out = q**-1.5
        elif order == 2:
            out = -3.0 * u * q**-2.5
        else:
            out = (12.0 * u * u - 3.0) * q**-3.5
    else:
        s1 = _TWO_OVER_SQRT_PI * np.exp(-u * u)
        if order == 1:
            out = s1
        elif order == 2:
            out = -2.0 * u * s1
        else:
            out = (4.0 * u * u - 2.0) * s1
    return out[()] if out.ndim == 0 else out


def max_slope(family) -> float:
    """Maximum of the first derivative (attained at u = 0)."""
    return float(sigmoid_deriv(family, 0.0))


def sigmoid_inverse(family, v):
    """Inverse of the sigmoid on (-1, 1)."""
    fam = _family(family)
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) >= 1.0):
        raise ValueError("sigmoid inverse is defined on the open interval (-1, 1)")
    if fam is SigmoidFamily.TANH:
        out = np.arctanh(v)
    elif fam is SigmoidFamily.LOGISTIC:
        out = 2.0 * np.arctanh(v)
    elif fam is SigmoidFamily.ALGEBRAIC:
        out = v / np.sqrt((1.0 - v) * (1.0 + v))
    else:
        out = special.erfinv(v)
    return out[()] if out.ndim == 0 else out


def deriv_inverse(family, y):
    """Non-negative u with sigma'(u) = y, for 0 < y <= max_slope(family)."""
    fam = _family(family)
    y = np.asarray(y, dtype=float)
    top = max_slope(fam)
    if np.any(y <= 0.0) or np.any(y > top):
        raise ValueError(f"derivative level must lie in (0, {top:.6g}]")
    if fam is SigmoidFamily.TANH:
        out = np.arctanh(np.sqrt(1.0 - y))
    elif fam is SigmoidFamily.LOGISTIC:
        out = 2.0 * np.arctanh(np.sqrt(np.clip(1.0 - 2.0 * y, 0.0, None)))
    elif fam is SigmoidFamily.ALGEBRAIC:
        out = np.sqrt(np.clip(y ** (-2.0 / 3.0) - 1.0, 0.0, None))
    else:
        out = np.sqrt(np.clip(np.log(_TWO_OVER_SQRT_PI / y), 0.0, None))
    return out[()] if out.ndim == 0 else out


def scalar_sigmoid(family):
    """Fast scalar (math-module) version of :func:`sigmoid` for ODE kernels."""
    fam = _family(family)
    if fam is SigmoidFamily.TANH:
        return math.tanh
    if fam is SigmoidFamily.LOGISTIC:
        return lambda u: math.tanh(0.5 * u)
    if fam is SigmoidFamily.ALGEBRAIC:
        return lambda u: u / math.hypot(1.0, u)
    return math.erf


def scalar_sigmoid_deriv(family):
    """Fast scalar first derivative."""
    fam = _family(family)
    if fam is SigmoidFamily.TANH:
        return _sech2_scalar
    if fam is SigmoidFamily.LOGISTIC:
        return lambda u: 0.5 * _sech2_scalar(0.5 * u)
    if fam is SigmoidFamily.ALGEBRAIC:
        return lambda u: (1.0 + u * u) ** -1.5
    return lambda u: _TWO_OVER_SQRT_PI * math.exp(-u * u)
