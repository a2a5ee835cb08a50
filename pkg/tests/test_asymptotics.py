import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewal_cma.asymptotics import (
    AsymptoticCov,
    CovMethod,
    NoRootInBracket,
    autocovariances,
    default_tail_K,
    efficiency_csv,
    efficiency_threshold,
    estimator_variances,
    expected_product4,
    f_covariance,
    fourth_moment,
    gamma_ou_exp,
    kappa_f,
    sigma2_eff,
    sigma2_mean,
    w11_closed,
    w_matrix,
    z_matrix,
)
from renewal_cma.kernel import OU, TruncatedOU, ZeroKernel
from renewal_cma.levy import BrownianMotion, CompoundPoissonNormal
from renewal_cma.renewal import Deterministic, Exponential, GammaWaiting

pos = st.floats(0.05, 10)


# ---------------------------------------------------------------------------
# closed forms


def test_gamma_ou_exp_values():
    assert gamma_ou_exp(1, 1, 1, 0) == 0.5
    assert gamma_ou_exp(1, 1, 1, 1) == 0.25
    assert gamma_ou_exp(2, 0.3, 4, 0) == gamma_ou_exp(2, 7.0, 4, 0) == 1.0


def test_w11_values():
    assert w11_closed(1, 1, 3) == pytest.approx(11 / 12)
    assert w11_closed(1, 1, 5) == pytest.approx(13 / 12)
    assert w11_closed(1, 1, 4) == pytest.approx(1.0)
    assert w11_closed(1e-12, 2.0, 4) == pytest.approx(0.0, abs=1e-10)


def test_estimator_variances_example():
    p = estimator_variances(1, 1, 3)
    assert p.var_a_star == pytest.approx(44 / 3)
    assert p.var_a_hat == pytest.approx(41 / 3)
    assert p.var_a_eq == pytest.approx(math.e**2 - 1)
    assert p.sigma2_eff == pytest.approx(2.139, abs=1e-3)


@given(a=pos, lam=pos, eta=st.floats(3, 30))
def test_variances_nonnegative(a, lam, eta):
    # every Levy driver has eta >= 3; below that the formulas can turn negative
    p = estimator_variances(a, lam, eta)
    assert p.var_a_star >= 0 and p.var_a_hat >= 0 and p.var_a_eq >= 0


@given(a=pos, lam=pos, eta=st.floats(1, 30))
def test_variance_identity(a, lam, eta):
    p = estimator_variances(a, lam, eta)
    assert p.var_a_hat == pytest.approx(p.var_a_star - a**2, rel=1e-12, abs=1e-12)


@given(a=pos, lam=pos)
def test_efficiency_worse_with_kurtosis(a, lam):
    assert sigma2_eff(a, lam, 5.0) >= sigma2_eff(a, lam, 3.0)


def test_sigma2_eff_limit_and_crossing():
    assert sigma2_eff(1e-6, 1.0, 3.0) == pytest.approx(1.0, abs=1e-4)
    assert sigma2_eff(2.5755, 1.0, 3.0) == pytest.approx(1.0, abs=1e-3)
    assert np.all(np.isfinite(sigma2_eff(np.geomspace(1e-4, 100, 500), 0.05, 3.0)))


@pytest.mark.parametrize("lam,eta,expected", [(0.05, 3, 0.1288), (1, 4, 2.7965), (2, 5, 6.5465)])
def test_threshold_examples(lam, eta, expected):
    assert efficiency_threshold(lam, eta) == pytest.approx(expected, abs=5e-4)


def test_threshold_no_root():
    with pytest.raises(NoRootInBracket):
        efficiency_threshold(1.0, 3.0, a_max=1.0)


def test_efficiency_csv():
    text = efficiency_csv([estimator_variances(1, 1, 3)])
    header, row = text.splitlines()
    assert header == "a,lambda,eta,var_a_star,var_a_hat,var_a_eq,sigma2_eff"
    assert float(row.split(",")[3]) == pytest.approx(44 / 3)


# ---------------------------------------------------------------------------
# sample mean


def test_sigma2_mean_ou_exponential():
    exact = sigma2_mean(OU(1.0), Exponential(1.0), BrownianMotion(), exact=True)
    assert exact.value == pytest.approx(1.5, abs=1e-7)
    mc = sigma2_mean(OU(1.0), Exponential(1.0), BrownianMotion(), mc_samples=20_000, rng=np.random.default_rng(1))
    assert abs(mc.value - 1.5) < 4 * mc.std_error
    assert mc.tail_K == 27 and mc.truncation_bound < 1e-7


def test_sigma2_mean_deterministic():
    res = sigma2_mean(OU(1.0), Deterministic(1.0), BrownianMotion())
    assert res.value == pytest.approx(0.5 * (1 + 2 * math.exp(-1) / (1 - math.exp(-1))), abs=1e-7)
    assert res.value == pytest.approx(1.0820, abs=1e-4) and res.std_error == 0


def test_sigma2_mean_gamma_waiting():
    scheme, sigma2 = GammaWaiting(2.0, 3.0), 2.0
    phi = float(scheme.laplace(1.0))
    res = sigma2_mean(OU(1.0), scheme, BrownianMotion(sigma2), rng=np.random.default_rng(2))
    assert abs(res.value - sigma2 / 2 * (1 + 2 * phi / (1 - phi))) < 4 * res.std_error


def test_sigma2_mean_zero_kernel():
    assert sigma2_mean(ZeroKernel(), Exponential(1.0), BrownianMotion(), rng=0).value == 0.0


def test_default_tail_K():
    K, ratio = default_tail_K(OU(1.0), Exponential(1.0))
    assert K == 27 and ratio == 0.5
    K, _ = default_tail_K(TruncatedOU(1.0, 60.0), Deterministic(1.0))
    assert K == 19


# ---------------------------------------------------------------------------
# fourth moments


def test_fourth_moment_gaussian():
    assert fourth_moment(OU(1.0), BrownianMotion(), 0, 0, 0, 0) == pytest.approx(0.75)


def test_fourth_moment_compound_poisson_value():
    # sigma^4 = 9: (eta - 3) sigma^4 / 4 + 3 sigma^4 / 4
    assert fourth_moment(OU(1.0), CompoundPoissonNormal(3, 1), 0, 0, 0, 0) == pytest.approx(9.0)


@settings(max_examples=30, deadline=None)
@given(x=st.lists(st.floats(-3, 3), min_size=4, max_size=4), perm=st.permutations(range(4)))
def test_fourth_moment_permutation_symmetric(x, perm):
    k, d = OU(0.7), CompoundPoissonNormal(2, 1)
    assert fourth_moment(k, d, *[x[i] for i in perm]) == pytest.approx(fourth_moment(k, d, *x), rel=1e-9)


def test_expected_product4_trivial_cases():
    k, d = OU(1.0), CompoundPoissonNormal(3, 1)
    assert expected_product4(k, d, Exponential(1.0), 0, 0, 0).value == fourth_moment(k, d, 0, 0, 0, 0)
    res = expected_product4(k, d, Deterministic(0.5), 1, 2, 4)
    assert res.std_error == 0 and res.value == pytest.approx(fourth_moment(k, d, 0, 0.5, 1.0, 2.0))


def test_expected_product4_against_direct_simulation():
    rng = np.random.default_rng(3)
    n = 10**6
    x0 = rng.normal(0, math.sqrt(0.5), n)
    w = rng.exponential(1.0, n)
    x1 = np.exp(-w) * x0 + np.sqrt(-np.expm1(-2 * w) / 2) * rng.normal(size=n)
    prod = x0**2 * x1**2
    est = expected_product4(OU(1.0), BrownianMotion(), Exponential(1.0), 0, 1, 1, rng=np.random.default_rng(4))
    se = math.hypot(prod.std() / math.sqrt(n), est.std_error)
    assert abs(prod.mean() - est.value) < 4 * se


def test_kappa_quartic_vanishes_for_brownian():
    res = kappa_f(OU(1.0), BrownianMotion(), Exponential(1.0), 1, 2, 3, mc_samples=1000, rng=np.random.default_rng(5))
    assert res.quartic_term == 0.0
    res = kappa_f(OU(1.0), CompoundPoissonNormal(1, 1), Exponential(1.0), 1, 2, 3, mc_samples=1000, rng=np.random.default_rng(5))
    assert res.quartic_term > 0


def test_f_covariance_inside_range_nonzero():
    est = f_covariance(OU(1.0), Exponential(1.0), 2, 0, 1, mc_samples=50_000, rng=np.random.default_rng(6))
    assert est.value > 6 * est.std_error


# ---------------------------------------------------------------------------
# Z and W


@pytest.mark.parametrize("a,lam,eta", [(1, 1, 3), (0.5, 2, 4), (2, 0.5, 6), (3, 1, 9)])
def test_closed_route_reproduces_w11(a, lam, eta):
    driver = BrownianMotion() if eta == 3 else CompoundPoissonNormal(3 / (eta - 3), 1)
    cov = z_matrix(OU(a), driver, Exponential(lam), 2)
    assert cov.method is CovMethod.CLOSED_FORM_OU_EXP
    cov = w_matrix(cov, cov.gamma[0], cov.rho)
    assert cov.W[0, 0] == pytest.approx(w11_closed(a, lam, eta), rel=1e-8)
    np.testing.assert_allclose(cov.gamma, [gamma_ou_exp(a, lam, driver.moments()[0], h) for h in range(3)])


@pytest.mark.parametrize("driver", [BrownianMotion(), CompoundPoissonNormal(1, 1)])
def test_equidistant_w11(driver):
    # lattice OU: W11 = 1 - exp(-2) whatever the driver's kurtosis
    for method in ("closed_form_ou_exp", "numeric"):
        cov = z_matrix(OU(1.0), driver, Deterministic(1.0), 1, method=method)
        cov = w_matrix(cov, cov.gamma[0], cov.rho)
        assert cov.W[0, 0] == pytest.approx(1 - math.exp(-2), rel=1e-8)


def test_closed_route_symmetric_and_nonnegative():
    cov = z_matrix(OU(0.7), CompoundPoissonNormal(2, 1), GammaWaiting(2.0, 1.5), 3)
    np.testing.assert_allclose(cov.Z, cov.Z.T, rtol=1e-10)
    assert np.all(np.diag(cov.Z) >= 0)
    cov = w_matrix(cov, cov.gamma[0], cov.rho)
    np.testing.assert_allclose(cov.W, cov.W.T, rtol=1e-10)
    assert np.all(np.linalg.eigvalsh(cov.W) > -1e-10)


@pytest.mark.parametrize("scheme", [Exponential(1.0), GammaWaiting(3.0, 2.0)], ids=["exp", "gamma"])
def test_numeric_route_agrees_with_closed(scheme):
    kernel, driver = OU(1.0), CompoundPoissonNormal(1.5, 1.0)
    closed = z_matrix(kernel, driver, scheme, 2)
    num = z_matrix(kernel, driver, scheme, 2, mc_samples=20_000, rng=np.random.default_rng(7), method="numeric")
    assert num.method is CovMethod.NUMERIC
    assert np.all(np.abs(num.Z - closed.Z) <= 4 * num.Z_error + 1e-12)
    assert np.all(np.abs(num.Z - num.Z.T) <= 4 * np.hypot(num.Z_error, num.Z_error.T))


def test_numeric_route_for_truncated_kernel():
    kernel, driver, scheme = TruncatedOU(1.0, 30.0), BrownianMotion(), Exponential(1.0)
    num = z_matrix(kernel, driver, scheme, 1, mc_samples=10_000, rng=np.random.default_rng(8))
    assert num.method is CovMethod.NUMERIC
    ref = z_matrix(OU(1.0), driver, scheme, 1)
    assert np.all(np.abs(num.Z - ref.Z) <= 4 * num.Z_error + 1e-8)


def test_deterministic_scheme_has_no_covariance_term():
    # the kappa sum alone must give Z for lattice sampling
    kernel, driver, scheme = OU(1.0), CompoundPoissonNormal(1, 1), Deterministic(1.0)
    cov = z_matrix(kernel, driver, scheme, 1, method="numeric")
    for p in range(2):
        for q in range(2):
            total = sum(kappa_f(kernel, driver, scheme, p, k, k + q).value for k in range(-cov.tail_K - q, cov.tail_K + 1))
            assert cov.Z[p, q] == pytest.approx(total, rel=1e-10)
    assert np.all(cov.Z_error == 0)


def test_w_matrix_collapse():
    Z = np.diag([2.0, 3.0, 5.0])
    cov = AsymptoticCov(2, Z, CovMethod.NUMERIC, np.array([2.0, 0.0, 0.0]), 1, 0.0)
    W = w_matrix(cov, 2.0, [0.0, 0.0]).W
    np.testing.assert_allclose(W, np.diag([3.0, 5.0]) / 4)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), h=st.integers(1, 4))
def test_w_matrix_symmetric_for_symmetric_z(seed, h):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(h + 1, h + 1))
    cov = AsymptoticCov(h, A + A.T, CovMethod.NUMERIC, np.ones(h + 1), 1, 0.0)
    W = w_matrix(cov, 1.3, rng.uniform(-1, 1, h)).W
    np.testing.assert_allclose(W, W.T, atol=1e-12)


def test_w_matrix_needs_enough_rho():
    cov = z_matrix(OU(1.0), BrownianMotion(), Exponential(1.0), 2)
    with pytest.raises(ValueError):
        w_matrix(cov, cov.gamma[0], [0.5])


def test_autocovariances_general_scheme():
    g = autocovariances(OU(2.0), BrownianMotion(3.0), GammaWaiting(2.0, 1.0), 2)
    np.testing.assert_allclose(g, [0.75, 0.75 / 9, 0.75 / 81])
    assert autocovariances(TruncatedOU(1.0, 5.0), BrownianMotion(), Exponential(1.0), 1) is None
