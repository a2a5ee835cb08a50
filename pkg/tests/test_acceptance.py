"""Acceptance criteria 1-9.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion. Tolerances are fixed by the criteria, not tuned.
"""

import json
import math

import numpy as np
import pytest
from scipy import stats

from renewal_cma.asymptotics import (
    autocovariances,
    efficiency_threshold,
    estimator_variances,
    f_covariance,
    fourth_moment,
    gamma_ou_exp,
    kappa_f,
    pair_product_expectations,
    w11_closed,
    w_matrix,
    z_matrix,
)
from renewal_cma.cli import main
from renewal_cma.config import ExperimentConfig
from renewal_cma.estimators import estimate_a_star
from renewal_cma.experiments import run_clt_acf, run_clt_mean, run_estimator_study
from renewal_cma.kernel import OU, bilinear_F, truncate
from renewal_cma.levy import BrownianMotion, CompoundPoissonNormal
from renewal_cma.renewal import Exponential
from renewal_cma.simulate import simulate_cma_grid, simulate_ou, stationary_ou_draws

BAND = 0.15

# ---------------------------------------------------------------------------
# 1. threshold table

TABLE = {
    0.05: (0.1288, 0.1294, 0.1300),
    0.5: (1.2878, 1.3455, 1.3983),
    1.0: (2.5755, 2.7965, 2.9814),
    2.0: (5.1509, 5.9627, 6.5465),
}


@pytest.mark.criterion(1)
@pytest.mark.parametrize("lam", sorted(TABLE))
@pytest.mark.parametrize("j,eta", list(enumerate((3.0, 4.0, 5.0))))
def test_threshold_table(lam, j, eta):
    assert abs(efficiency_threshold(lam, eta) - TABLE[lam][j]) <= 5e-4


# ---------------------------------------------------------------------------
# 2. closed-form spine


@pytest.mark.criterion(2)
def test_w11_eleven_twelfths():
    assert w11_closed(1, 1, 3) == pytest.approx(11 / 12, abs=1e-15)


@pytest.mark.criterion(2)
def test_variance_identity_on_random_grid():
    rng = np.random.default_rng(20)
    for a, lam, eta in zip(rng.uniform(0.01, 10, 200), rng.uniform(0.01, 10, 200), rng.uniform(1, 20, 200)):
        p = estimator_variances(a, lam, eta)
        assert p.var_a_hat == pytest.approx(p.var_a_star - a**2, rel=1e-12, abs=1e-12)


@pytest.mark.criterion(2)
def test_gamma_round_trip_through_a_star():
    rng = np.random.default_rng(21)
    for a, lam in zip(rng.uniform(0.01, 10, 200), rng.uniform(0.01, 10, 200)):
        rho = gamma_ou_exp(a, lam, 1.0, 1) / gamma_ou_exp(a, lam, 1.0, 0)
        assert estimate_a_star(rho, lam) == pytest.approx(a, rel=1e-12)


# ---------------------------------------------------------------------------
# 3. quadrature oracle


@pytest.mark.criterion(3)
def test_bilinear_F_quadrature_matches_ou_closed_form():
    rng = np.random.default_rng(3)
    for a, s, t in zip(rng.uniform(0.1, 5, 100), rng.uniform(-5, 5, 100), rng.uniform(-5, 5, 100)):
        exact = math.exp(-a * abs(t - s)) / (2 * a)
        assert abs(float(bilinear_F(OU(a), s, t, method="quadrature")) - exact) < 1e-8
        assert abs(float(bilinear_F(OU(a), s, t)) - exact) < 1e-8


# ---------------------------------------------------------------------------
# 4. fourth moment


@pytest.mark.criterion(4)
def test_fourth_moment_required_value():
    # Expected to fail: the criterion asks for 27, but the formula with
    # sigma^4 = 9 and int f^4 = 1/4 gives 9/4 + 27/4 = 9, which the
    # sibling test confirms by simulation.
    assert fourth_moment(OU(1.0), CompoundPoissonNormal(3, 1), 0, 0, 0, 0) == pytest.approx(27, rel=1e-9)


@pytest.mark.criterion(4)
def test_fourth_moment_matches_monte_carlo():
    x = stationary_ou_draws(1.0, CompoundPoissonNormal(3, 1), 10**6, np.random.default_rng(4))
    x4 = x**4
    se = x4.std(ddof=1) / math.sqrt(x4.size)
    analytic = fourth_moment(OU(1.0), CompoundPoissonNormal(3, 1), 0, 0, 0, 0)
    assert abs(x4.mean() - analytic) < 4 * se


# ---------------------------------------------------------------------------
# 5-7. Monte Carlo CLT studies


def _cfg(**kw):
    return ExperimentConfig.from_dict(kw)


@pytest.mark.criterion(5)
def test_clt_mean():
    res = run_clt_mean(_cfg(experiment="clt_mean", n=2000, replications=500, seed=5)).report["results"]
    assert res["predicted_variance"] == pytest.approx(1.5, abs=4 * res["predicted_std_error"] + 1e-6)
    assert 0.85 <= res["empirical_variance"] / 1.5 <= 1.15
    assert res["ks_pvalue"] >= 0.01


@pytest.mark.criterion(6)
@pytest.mark.parametrize(
    "driver,w11",
    [({"type": "brownian"}, 11 / 12), ({"type": "compound_poisson_normal", "jump_rate": 3, "jump_variance": 1}, 1.0)],
    ids=["eta3", "eta4"],
)
def test_clt_rho(driver, w11):
    cfg = _cfg(experiment="clt_acf", driver=driver, n=5000, replications=500, h_max=1, seed=6)
    res = run_clt_acf(cfg).report["results"]
    assert res["W"][0][0] == pytest.approx(w11, rel=1e-9)
    assert abs(res["empirical_W"][0][0] / w11 - 1) <= BAND


@pytest.mark.criterion(7)
def test_estimator_study():
    res = run_estimator_study(_cfg(experiment="estimator_study", n=5000, replications=500, seed=7)).report["results"]
    targets = {"a_star": 44 / 3, "a_hat": 41 / 3, "a_eq": math.e**2 - 1}
    for name, target in targets.items():
        assert res[name]["failures"] == 0
        assert abs(res[name]["empirical_variance"] / target - 1) <= BAND, name
    assert res["ordering_eq_hat_star"]
    assert res["sigma2_eff"] == pytest.approx(2.139, abs=1e-3)


# ---------------------------------------------------------------------------
# 8. numeric Z/W vs closed form


@pytest.mark.criterion(8)
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("lam", [0.5, 1.0])
@pytest.mark.parametrize("eta", [3.0, 4.0])
def test_numeric_w11(a, lam, eta):
    # compound Poisson with unit jump variance has eta = 3 + 3/c
    driver = BrownianMotion() if eta == 3 else CompoundPoissonNormal(3.0 / (eta - 3), 1.0)
    kernel, scheme = OU(a), Exponential(lam)
    seed = int(1000 * a + 100 * lam + eta)
    cov = z_matrix(kernel, driver, scheme, 1, mc_samples=20_000, rng=np.random.default_rng(seed), method="numeric")
    gamma = autocovariances(kernel, driver, scheme, 1)
    cov = w_matrix(cov, gamma[0], gamma[1:] / gamma[0])
    assert abs(cov.W[0, 0] - w11_closed(a, lam, eta)) <= 3 * cov.W_error[0, 0]


# ---------------------------------------------------------------------------
# 9. property suites


@pytest.mark.criterion(9)
@pytest.mark.parametrize("lmn", [(1, 1, 2), (1, 2, 4), (2, 3, 3), (0, 1, 3)])
def test_pair_product_splits(lmn):
    res = pair_product_expectations(OU(1.0), Exponential(1.0), *lmn, mc_samples=50_000, rng=np.random.default_rng(91))
    se = math.hypot(res.joint.std_error, res.split.std_error)
    assert abs(res.joint.value - res.split.value) <= 4 * se


@pytest.mark.criterion(9)
@pytest.mark.parametrize("p,k,q", [(1, 1, 1), (1, 3, 2), (2, -2, 2), (2, -4, 1), (0, 0, 2)])
def test_covariance_vanishes_outside_range(p, k, q):
    assert k >= p or k <= -q
    est = f_covariance(OU(1.0), Exponential(1.0), p, k, q, mc_samples=50_000, rng=np.random.default_rng(92))
    assert abs(est.value) <= 4 * est.std_error


@pytest.mark.criterion(9)
def test_truncation_convergence_of_kappa():
    kernel, driver, scheme = OU(1.0), CompoundPoissonNormal(1.0, 1.0), Exponential(1.0)
    full = kappa_f(kernel, driver, scheme, 1, 2, 3, mc_samples=5000, rng=np.random.default_rng(93)).value
    errors = [
        abs(kappa_f(truncate(kernel, m), driver, scheme, 1, 2, 3, mc_samples=5000, rng=np.random.default_rng(93)).value - full)
        for m in (5, 10, 20, 40)
    ]
    assert all(e1 >= e2 for e1, e2 in zip(errors, errors[1:]))
    assert errors[-1] < 1e-12 < errors[0]


@pytest.mark.criterion(9)
def test_strict_stationarity():
    # Y_1 and Y_30 share one law: compare across independent paths
    rng = np.random.default_rng(94)
    paths = [simulate_ou(1.0, CompoundPoissonNormal(1.0, 1.0), Exponential(1.0), 30, rng) for _ in range(2000)]
    first = np.array([p.values[0] for p in paths])
    last = np.array([p.values[-1] for p in paths])
    assert stats.ks_2samp(first, last).pvalue >= 0.01
    gauss = [simulate_ou(1.0, BrownianMotion(), Exponential(1.0), 30, rng).values[-1] for _ in range(2000)]
    assert stats.kstest(gauss, "norm", args=(0.0, math.sqrt(0.5))).pvalue >= 0.01


@pytest.mark.criterion(9)
def test_exact_and_grid_simulators_agree():
    rng = np.random.default_rng(95)
    R = 1500
    exact = np.array([simulate_ou(1.0, BrownianMotion(), Exponential(1.0), 2, rng).values for _ in range(R)])
    grid = np.array(
        [simulate_cma_grid(OU(1.0), BrownianMotion(), Exponential(1.0), 2, 0.01, 16.0, rng).values for _ in range(R)]
    )
    assert stats.ks_2samp(exact[:, 0], grid[:, 0]).pvalue >= 0.01
    pe, pg = exact[:, 0] * exact[:, 1], grid[:, 0] * grid[:, 1]
    assert abs(pe.mean() - pg.mean()) <= 4 * math.hypot(pe.std() / math.sqrt(R), pg.std() / math.sqrt(R))


SMALL_CONFIGS = {
    "clt_mean": {"n": 200, "replications": 12},
    "clt_acf": {"n": 200, "replications": 12, "h_max": 2, "mc_samples": 2000},
    "estimator_study": {"n": 200, "replications": 12},
    "efficiency_table": {},
    "efficiency_curves": {"a_grid": {"min": 0.01, "max": 5, "points": 20}},
    "path_dump": {"n": 10, "replications": 3},
}


def _strip_execution(report: dict) -> dict:
    cfg = dict(report["config"])
    cfg.pop("threads")
    cfg.pop("output_dir")
    return {**report, "config": cfg}


@pytest.mark.criterion(9)
@pytest.mark.parametrize("experiment", sorted(SMALL_CONFIGS))
def test_cli_outputs_reproducible_across_threads(experiment, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL_CONFIGS[experiment]))
    outs = []
    for threads in (1, 2):
        out = tmp_path / f"t{threads}"
        assert main([experiment, "--config", str(cfg), "--seed", "11", "--threads", str(threads), "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert files == sorted(p.name for p in outs[1].iterdir())
    for name in files:
        a, b = (o / name for o in outs)
        if name == "report.json":
            assert _strip_execution(json.loads(a.read_text())) == _strip_execution(json.loads(b.read_text()))
        else:
            assert a.read_bytes() == b.read_bytes(), name
