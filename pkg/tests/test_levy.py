import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewal_cma.levy import BrownianMotion, CompoundPoissonNormal, GammaDifference, driver_from_config

DRIVERS = [BrownianMotion(2.0), CompoundPoissonNormal(3.0, 0.5), GammaDifference(2.0, 1.5)]


def test_moment_closed_forms():
    assert BrownianMotion(2.0).moments() == (2.0, 3.0)
    assert CompoundPoissonNormal(3, 1).moments() == pytest.approx((3.0, 4.0))
    assert GammaDifference(2.0, 1.0).moments() == pytest.approx((4.0, 4.5))


@pytest.mark.parametrize("driver", DRIVERS, ids=lambda d: type(d).__name__)
def test_increment_moments_match(driver):
    sigma2, eta = driver.moments()
    x = driver.sample_increment(1.0, np.random.default_rng(1), size=400_000)
    assert x.mean() == pytest.approx(0.0, abs=5 * math.sqrt(sigma2 / x.size))
    assert x.var() == pytest.approx(sigma2, rel=0.02)
    assert np.mean(x**4) / x.var() ** 2 == pytest.approx(eta, rel=0.06)


@pytest.mark.parametrize("driver", DRIVERS, ids=lambda d: type(d).__name__)
def test_weighted_integral_isometry(driver):
    a, dt = 0.7, 1.3
    sigma2, _ = driver.moments()
    x = driver.sample_weighted_integral(a, dt, np.random.default_rng(2), size=200_000)
    assert x.var() == pytest.approx(sigma2 * -math.expm1(-2 * a * dt) / (2 * a), rel=0.02)


@pytest.mark.parametrize("driver", DRIVERS, ids=lambda d: type(d).__name__)
def test_zero_length_is_zero(driver):
    rng = np.random.default_rng(3)
    assert driver.sample_increment(0.0, rng) == 0.0
    assert driver.sample_weighted_integral(1.0, 0.0, rng) == 0.0


@given(
    rate=st.floats(0.1, 20), var=st.floats(0.1, 5), shape=st.floats(0.1, 10), scale=st.floats(0.1, 5)
)
def test_kurtosis_at_least_gaussian(rate, var, shape, scale):
    for d in (CompoundPoissonNormal(rate, var), GammaDifference(shape, scale)):
        sigma2, eta = d.moments()
        assert sigma2 > 0 and eta >= 3


@settings(max_examples=25, deadline=None)
@given(dt=st.floats(0.0, 3.0), size=st.integers(1, 5))
def test_sample_shapes(dt, size):
    rng = np.random.default_rng(4)
    for d in DRIVERS:
        out = d.sample_increment(dt, rng, size=size)
        assert out.shape == (size,) and np.all(np.isfinite(out))
        out = d.sample_weighted_integral(0.5, np.full(size, dt), rng)
        assert out.shape == (size,)


@pytest.mark.parametrize("driver", DRIVERS, ids=lambda d: type(d).__name__)
def test_config_round_trip(driver):
    assert driver_from_config(driver.to_config()) == driver


@pytest.mark.parametrize(
    "cfg",
    [{"type": "cauchy"}, {"type": "brownian", "variance_rate": -1}, {"type": "compound_poisson_normal", "jump_rate": 0}],
)
def test_bad_configs_rejected(cfg):
    with pytest.raises(ValueError):
        driver_from_config(cfg)


def test_negative_dt_rejected():
    with pytest.raises(ValueError):
        BrownianMotion().sample_increment(-1.0, np.random.default_rng(0))
