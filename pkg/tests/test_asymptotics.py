import math

import numpy as np
import pytest

from conftest import cubic_pair
from glacia.asymptotics import (
    AIRY_ZETA,
    amplitude_asymptotic,
    amplitude_bound,
    period_asymptotic,
    period_bounds,
    phi,
    quad_I,
)
from glacia.exceptions import AssumptionError, DomainError, SingularIntegrandError
from glacia.reduced_model import NullclinePair, find_folds


def airy_ai_series(x, terms=60):
    c1 = 1.0 / (3 ** (2 / 3) * math.gamma(2 / 3))
    c2 = 1.0 / (3 ** (1 / 3) * math.gamma(1 / 3))
    f = g = 0.0
    tf, tg = 1.0, x
    for k in range(terms):
        f += tf
        g += tg
        tf *= x**3 / ((3 * k + 2) * (3 * k + 3))
        tg *= x**3 / ((3 * k + 3) * (3 * k + 4))
    return c1 * f - c2 * g


def first_airy_zero():
    lo, hi = -2.5, -2.2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (airy_ai_series(mid) > 0) == (airy_ai_series(lo) > 0):
            lo = mid
        else:
            hi = mid
    return -0.5 * (lo + hi)


def shifted_pair(amp):
    base = cubic_pair()
    return NullclinePair(
        f=base.f,
        g=lambda x: 1.0 + amp * math.tanh(x / 0.3),
        nu=10.0,
        window=(-3.0, 3.0),
        df=base.df,
        d2f=base.d2f,
        d3f=base.d3f,
        f_inflection=0.0,
        g_inflection=0.0,
    )


def test_airy_constant_against_series():
    assert AIRY_ZETA == pytest.approx(first_airy_zero(), abs=1e-12)


def test_phi_degenerate_and_domain():
    assert phi(0.7, 0.7, 2.0) == 0.0
    with pytest.raises(DomainError):
        phi(0.5, 1.5, 1.0)
    with pytest.raises(DomainError):
        phi(-0.1, 1.5, 2.0)


def test_phi_matches_direct_integral():
    u, v, w = 1.5, 0.5, 3.0
    x, wt = np.polynomial.legendre.leggauss(64)
    s = 0.5 * (u - v) * x + 0.5 * (u + v)
    direct = 0.5 * (u - v) * np.sum(wt / (np.sqrt(s) * (w - s)))
    assert phi(u, v, w) == pytest.approx(direct, rel=1e-13)


def test_phi_nearly_equal_arguments_stable():
    w = 2.0
    a = phi(1.0 + 1e-12, 1.0, w)
    assert a == pytest.approx(1e-12 / (w - 1.0), rel=1e-6)


def test_quad_constant_g_reduces_to_phi():
    pair = NullclinePair(f=cubic_pair().f, g=lambda x: 3.0, nu=10.0, window=(-3.0, 3.0), df=cubic_pair().df)
    fd = find_folds(pair)
    got = quad_I("s_plus", fd.f_at_minus, fd.f_at_plus, pair, fd)
    assert got == pytest.approx(phi(fd.f_at_plus, fd.f_at_minus, 3.0), rel=1e-10)
    assert quad_I("plus", 0.9, 0.9, pair, fd) == 0.0


def test_quad_singular_integrand():
    pair = NullclinePair(f=cubic_pair().f, g=lambda x: 1.0, nu=10.0, window=(-3.0, 3.0))
    with pytest.raises(SingularIntegrandError):
        quad_I("s_plus", 0.5, 1.5, pair)


def test_quad_subdivision_invariance(rp):
    fd = find_folds(rp)
    mid = 0.37 * fd.f_at_minus + 0.63 * fd.f_at_plus
    for br in ("s_plus", "s_minus"):
        whole = quad_I(br, fd.f_at_minus, fd.f_at_plus, rp, fd)
        split = quad_I(br, fd.f_at_minus, mid, rp, fd) + quad_I(br, mid, fd.f_at_plus, rp, fd)
        assert whole == pytest.approx(split, rel=1e-9)


def test_calibrated_expansion(rp):
    pe = period_asymptotic(rp)
    assert pe.leading == pytest.approx(3.6012264861, rel=1e-9)
    assert pe.correction_coeff == pytest.approx(1.7714594082, rel=1e-9)
    assert pe.correction_coeff > 0
    assert pe.total(1e3) == pytest.approx(pe.leading + 0.01 * pe.correction_coeff)
    assert pe.i_plus > 0 and pe.i_minus > 0


def test_cubic_leading_period_against_x_quadrature():
    pair = cubic_pair()
    fd = find_folds(pair)

    def along(x0, x1):
        # substitute w = f(x) on the stable branch; Gauss-Legendre in x
        x, wt = np.polynomial.legendre.leggauss(80)
        xs = 0.5 * (x1 - x0) * x + 0.5 * (x1 + x0)
        fv = np.array([pair.f(t) for t in xs])
        gv = np.array([pair.g(t) for t in xs])
        dfv = np.array([pair.df(t) for t in xs])
        return 0.5 * (x1 - x0) * np.sum(wt * dfv / (np.sqrt(fv) * (gv - fv)))

    oracle = along(fd.x_tilde_minus, fd.x_plus) + along(fd.x_tilde_plus, fd.x_minus)
    assert period_asymptotic(pair).leading == pytest.approx(oracle, rel=1e-9)


def test_bounds_sandwich_leading_period(rp, admissible_sets):
    for p in [rp, *admissible_sets]:
        lead = period_asymptotic(p).leading
        lo, hi = period_bounds(p)
        assert lo <= lead <= hi


def test_bounds_need_d_for_pairs(cubic):
    with pytest.raises(ValueError):
        period_bounds(cubic)
    lo, hi = period_bounds(cubic, d=0.8)
    assert lo <= period_asymptotic(cubic).leading <= hi


def test_upper_bound_diverges_near_fold_contact():
    # f(x_plus) = 1.5 and g(1) -> 1.5 as amp -> 0.5 / tanh(1/0.3)
    limit = 0.5 / math.tanh(1 / 0.3)
    ups = [period_bounds(shifted_pair(limit + eps), d=limit + eps)[1] for eps in (1e-2, 1e-4, 1e-6)]
    assert ups[0] < ups[1] < ups[2]
    assert ups[2] - ups[1] == pytest.approx(ups[1] - ups[0], rel=0.05)


def test_geometry_failure_raises():
    with pytest.raises(AssumptionError):
        period_asymptotic(shifted_pair(0.4))


def test_amplitudes(rp, admissible_sets):
    amp = amplitude_asymptotic(rp)
    fd = find_folds(rp)
    assert amp.ax_leading == pytest.approx(fd.x_tilde_minus - fd.x_tilde_plus)
    assert amp.ay_leading == pytest.approx(fd.f_at_plus - fd.f_at_minus)
    assert amp.ax_leading == pytest.approx(0.213137, abs=5e-7)
    assert amp.ay_leading == pytest.approx(0.851713, abs=5e-7)
    for p in [rp, *admissible_sets]:
        assert amplitude_asymptotic(p).ax_leading <= amplitude_bound(p)
    assert amplitude_bound(rp) == pytest.approx(0.285164, abs=5e-7)


def test_cubic_amplitudes(cubic):
    amp = amplitude_asymptotic(cubic)
    assert amp.ax_leading == pytest.approx(4.0, abs=1e-12)
    assert amp.ay_leading == pytest.approx(1.0, abs=1e-12)
