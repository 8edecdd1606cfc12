import dataclasses
import warnings

import numpy as np
import pytest

from glacia.exceptions import DomainError, NoIceSheetError, NullclineRangeError
from glacia.full_model import (
    Branch,
    CriticalPointProximityWarning,
    FullParams,
    StabilityClass,
    check_validity,
    classify_stability,
    find_critical_points,
    full_rhs,
    jacobian,
    kappa_bound,
    lambda_nullcline,
    lambda_nullcline_slope,
    mu_critical,
    nullcline_table,
    theta_nullcline,
    theta_nullcline_slope,
    trace_at,
)
from glacia.parametrization import KappaProfile


@pytest.fixture(scope="module")
def fp(calibrated_cfg):
    return calibrated_cfg.full_params()


def fd_jacobian(state, params, h=1e-7):
    J = np.zeros((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        up = np.array(full_rhs(np.asarray(state) + e, params))
        dn = np.array(full_rhs(np.asarray(state) - e, params))
        J[:, j] = (up - dn) / (2 * h)
    return J


def test_rhs_rejects_negative_extent(fp):
    with pytest.raises(DomainError):
        full_rhs((1.4, -1e-3), fp)


@pytest.mark.parametrize("theta", np.linspace(1.3, 1.5, 11))
def test_theta_nullcline_residual(fp, theta):
    h = theta_nullcline(theta, fp)
    F, _ = full_rhs((theta, h), fp)
    assert abs(F) / fp.mu < 1e-12


@pytest.mark.parametrize("theta", np.linspace(1.3, 1.55, 11))
def test_lambda_nullcline_residual(fp, theta):
    k = lambda_nullcline(theta, "k_plus", fp)
    _, G = full_rhs((theta, k), fp)
    assert abs(G) < 1e-12


def test_k_plus_limit(fp):
    # the algebraic sigmoid saturates slowly
    assert lambda_nullcline(1e4, Branch.K_PLUS, fp) == pytest.approx(0.12, abs=1e-9)
    assert lambda_nullcline(1.4, Branch.K_MINUS, fp) == 0.0


def test_k_minus_with_snow_line():
    p = FullParams(kappa=KappaProfile(value=0.01))
    th = 1.5
    lo = lambda_nullcline(th, "k_minus", p)
    hi = lambda_nullcline(th, "k_plus", p)
    assert 0 < lo < hi
    for lam in (lo, hi):
        assert abs(full_rhs((th, lam), p)[1]) < 1e-12


def test_no_ice_sheet_above_kappa_bound():
    p = FullParams(kappa=KappaProfile(value=0.2))
    assert kappa_bound(1.4, p) < 0.2
    with pytest.raises(NoIceSheetError):
        lambda_nullcline(1.4, "k_plus", p)


def test_theta_nullcline_out_of_range(fp):
    with pytest.raises(NullclineRangeError):
        theta_nullcline(5.0, fp)


@pytest.mark.parametrize("theta", [1.33, 1.39, 1.42, 1.47, 1.52])
def test_nullcline_slopes_match_differences(fp, theta):
    d = 1e-6
    fd_h = (theta_nullcline(theta + d, fp) - theta_nullcline(theta - d, fp)) / (2 * d)
    fd_k = (lambda_nullcline(theta + d, "k_plus", fp) - lambda_nullcline(theta - d, "k_plus", fp)) / (2 * d)
    assert theta_nullcline_slope(theta, fp) == pytest.approx(fd_h, rel=1e-6)
    assert lambda_nullcline_slope(theta, "k_plus", fp) == pytest.approx(fd_k, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("kappa", [0.0, 0.01])
def test_jacobian_matches_differences(fp, kappa):
    p = dataclasses.replace(fp.with_mu(3.0), kappa=KappaProfile(value=kappa, slope=0.02, theta_ref=1.4))
    for state in [(1.38, 0.07), (1.45, 0.11), (1.5, 0.2)]:
        np.testing.assert_allclose(jacobian(state, p), fd_jacobian(state, p), rtol=1e-6, atol=1e-8)


def test_calibrated_critical_points(fp):
    reps = find_critical_points(fp)
    assert [r.classification for r in reps] == [
        StabilityClass.UNSTABLE_NODE,
        StabilityClass.SADDLE,
        StabilityClass.STABLE_NODE,
    ]
    assert all(r.branch is Branch.K_PLUS for r in reps)
    first = reps[0]
    assert first.location.theta == pytest.approx(1.3907216, abs=1e-6)
    assert first.hopf and first.h_slope < first.k_slope
    assert not reps[1].hopf
    assert reps[2].mu_critical is None


def test_eigenvalues_satisfy_characteristic_identity(fp):
    for r in find_critical_points(fp.with_mu(2.0)):
        l1, l2 = r.eigenvalues
        assert (l1 + l2).real == pytest.approx(r.trace, rel=1e-10, abs=1e-12)
        assert (l1 * l2).real == pytest.approx(r.determinant, rel=1e-10, abs=1e-12)
        J = jacobian(r.location, fp.with_mu(2.0))
        assert r.trace == pytest.approx(np.trace(J))


def test_trace_vanishes_at_mu_critical(fp):
    r = find_critical_points(fp)[0]
    mc = mu_critical(r.location, fp)
    assert abs(trace_at(r.location, fp, mc)) < 1e-12
    below = classify_stability(r.location, fp.with_mu(0.9 * mc))
    above = classify_stability(r.location, fp.with_mu(1.1 * mc))
    # strong ocean-albedo feedback: faster temperature relaxation destabilizes
    assert below.trace < 0 < above.trace
    assert below.determinant > 0 and above.determinant > 0


def test_classify_rejects_non_critical(fp):
    with pytest.raises(ValueError):
        classify_stability((1.4, 0.05), fp)


def test_single_critical_point_configuration(calibrated_cfg):
    # halving both precipitation ratios moves k+ below the fold region of h
    fb = dataclasses.replace(calibrated_cfg.feedback, xi_minus=0.05, xi_plus=0.25)
    p = dataclasses.replace(calibrated_cfg.full_params(), feedback=fb, mu=50.0)
    reps = find_critical_points(p)
    assert len(reps) == 1
    assert reps[0].branch is Branch.K_PLUS
    assert reps[0].classification is StabilityClass.STABLE_NODE
    assert reps[0].location.theta == pytest.approx(1.50230, abs=1e-4)


def test_proximity_warning_near_tangency(fp):
    from scipy.optimize import minimize_scalar

    r0, r1 = (r.location.theta for r in find_critical_points(fp)[:2])
    gap = lambda th: theta_nullcline(th, fp) - lambda_nullcline(th, "k_plus", fp)
    ext = minimize_scalar(lambda th: -abs(gap(th)), bounds=(r0, r1), method="bounded", options={"xatol": 1e-10})
    # lowering h by dbeta / (gamma alpha_c') = gap makes the two roots merge
    dbeta = fp.gamma * fp.feedback.alpha1 * gap(ext.x)
    tangent = dataclasses.replace(fp, beta=fp.beta + dbeta * (1 - 1e-9))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        find_critical_points(tangent)
    assert any(issubclass(w.category, CriticalPointProximityWarning) for w in rec)
    with warnings.catch_warnings():
        warnings.simplefilter("error", CriticalPointProximityWarning)
        find_critical_points(fp)


def test_validity_flags():
    p = FullParams(kappa=KappaProfile(value=-0.05))
    assert check_validity((1.4, 0.1), p).ok
    rep = check_validity((1.4, 0.01), p)
    assert not rep.snowline_consistent
    assert not check_validity((1.4, 1.5), FullParams()).within_max_size
    stag = check_validity((1.4, 0.05), FullParams(kappa=KappaProfile(value=0.3)))
    assert not stag.not_stagnant


def test_nullcline_table_marks_gaps(fp):
    rows = nullcline_table(fp, [1.4, 5.0])
    assert rows[0]["h"] is not None
    assert rows[1]["h"] is None
    assert rows[1]["k_plus"] == pytest.approx(0.12, abs=1e-5)


def test_mu_critical_maps_near_reduced_threshold(calibrated_cfg, fp):
    from glacia.reduced_model import critical_point, reduce_from_full

    hopf = [r for r in find_critical_points(fp) if r.hopf]
    assert len(hopf) == 1
    mapped = reduce_from_full(fp.with_mu(hopf[0].mu_critical)).nu
    nu_c = critical_point(calibrated_cfg.reduced_params()).nu_c
    # the reduction drops an O(lambda^1.5) term of the ice equation, so the
    # thresholds agree only to leading order
    assert 0.5 < nu_c / mapped < 2.0
    assert abs(hopf[0].location.theta - critical_point(calibrated_cfg.reduced_params()).x) < 5e-3
