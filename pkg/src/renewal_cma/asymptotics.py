"""Asymptotic variances for renewal-sampled moving averages.

Notation: ``F(s, t) = int f(u + s) f(u + t) du``, ``sigma2 = E L_1^2`` and
``eta = E L_1^4 / sigma2^2``. Expectations over renewal times use two-sided
sequences ``... < T_{-1} < T_0 = 0 < T_1 < ...`` built from i.i.d. waiting
times, so every index in ``Z`` sums may be negative.

Two routes compute the autocovariance covariance matrix ``Z``:

* ``closed_form_ou_exp`` for the (untruncated) OU kernel. Each expectation is
  ``E exp(-a sum_e c_e W_e)`` for non-negative integer weights on the waiting
  times between indices, which factorises into Laplace transforms of ``W``.
  Exact up to the ``k``-sum truncation, for every waiting-time law here.
* ``numeric``: Monte Carlo over renewal sequences with product integrals from
  :mod:`.kernel`; standard errors by batch means.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize

from .kernel import OU, Kernel, bilinear_F, decay_check, product_integral
from .levy import LevyDriver
from .renewal import Deterministic, RenewalScheme

__all__ = [
    "CovMethod",
    "AsymptoticCov",
    "EfficiencyPoint",
    "MCEstimate",
    "MeanVariance",
    "NoRootInBracket",
    "gamma_ou_exp",
    "w11_closed",
    "estimator_variances",
    "sigma2_eff",
    "efficiency_threshold",
    "efficiency_csv",
    "sigma2_mean",
    "default_tail_K",
    "fourth_moment",
    "expected_product4",
    "pair_product_expectations",
    "f_covariance",
    "kappa_f",
    "z_matrix",
    "w_matrix",
    "autocovariances",
]

TAIL_TOL = 1e-8
DEFAULT_MC = 20_000
DEFAULT_BATCHES = 20


class NoRootInBracket(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# OU kernel with exponential waiting times: closed forms


def gamma_ou_exp(a: float, lam: float, sigma2: float, h: int) -> float:
    """``E(Y_0 Y_h) = sigma2 / (2a) * (lam / (a + lam))^h``."""
    if h < 0:
        raise ValueError("lag must be non-negative")
    return sigma2 / (2 * a) * (lam / (a + lam)) ** h


def w11_closed(a, lam, eta):
    """Asymptotic variance of ``sqrt(n) (rho*(1) - rho(1))`` for OU under Poisson sampling."""
    a = np.asarray(a, dtype=float)
    out = (lam / (lam + 2 * a) - lam**2 / (lam + a) ** 2) * ((eta - 3) * a + 3) + 2 * a / (lam + 2 * a)
    return float(out) if out.ndim == 0 else out


def sigma2_eff(a, lam, eta):
    """Variance of the renewal estimator ``a_hat`` over that of the lattice estimator at ``delta = 1/lam``."""
    a = np.asarray(a, dtype=float)
    var_hat = (lam + a) ** 4 * w11_closed(a, lam, eta) / lam**2 - a**2
    with np.errstate(over="ignore"):
        # the lattice variance overflows to inf for a >> lam, sending the ratio to 0
        out = var_hat / (lam**2 * np.expm1(2 * a / lam))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EfficiencyPoint:
    a: float
    lam: float
    eta: float
    var_a_star: float
    var_a_hat: float
    var_a_eq: float
    sigma2_eff: float

    CSV_HEADER = "a,lambda,eta,var_a_star,var_a_hat,var_a_eq,sigma2_eff"

    def csv_row(self) -> str:
        return ",".join(
            repr(float(v))
            for v in (self.a, self.lam, self.eta, self.var_a_star, self.var_a_hat, self.var_a_eq, self.sigma2_eff)
        )


def estimator_variances(a: float, lam: float, eta: float) -> EfficiencyPoint:
    """Asymptotic variances of ``sqrt(n)(a* - a)``, ``sqrt(n)(a_hat - a)`` and the lattice estimator.

    Any ``eta >= 1`` is accepted, but Lévy drivers always have ``eta >= 3``
    (the fourth cumulant is ``int x^4 nu(dx) >= 0``); below 3 the renewal
    variances can come out negative.
    """
    if not (a > 0 and lam > 0):
        raise ValueError("a and lambda must be positive")
    if eta < 1:
        raise ValueError("eta must be >= 1")
    var_star = (lam + a) ** 4 * w11_closed(a, lam, eta) / lam**2
    var_hat = var_star - a**2
    var_eq = lam**2 * math.expm1(2 * a / lam)
    return EfficiencyPoint(a, lam, eta, var_star, var_hat, var_eq, var_hat / var_eq)


def efficiency_threshold(lam: float, eta: float, a_max: float = 100.0, tol: float = 1e-6) -> float:
    """Smallest ``a`` in ``(0, a_max]`` with ``sigma2_eff(a) <= 1``.

    A log-spaced scan brackets the first crossing and bisection refines it.
    """
    if not lam > 0 or eta < 1:
        raise ValueError("need lambda > 0 and eta >= 1")
    grid = np.geomspace(min(1e-4 * lam, a_max / 10), a_max, 4000)
    vals = sigma2_eff(grid, lam, eta) - 1.0
    below = np.flatnonzero(vals <= 0)
    if below.size == 0:
        raise NoRootInBracket(f"sigma2_eff stays above 1 on (0, {a_max}] for lambda={lam}, eta={eta}")
    i = below[0]
    if i == 0:
        raise NoRootInBracket(f"sigma2_eff is already <= 1 at a={grid[0]:.3g}; no crossing to bracket")
    return optimize.bisect(lambda x: sigma2_eff(x, lam, eta) - 1.0, grid[i - 1], grid[i], xtol=tol)


def efficiency_csv(points: Sequence[EfficiencyPoint]) -> str:
    return "\n".join([EfficiencyPoint.CSV_HEADER] + [p.csv_row() for p in points]) + "\n"


# ---------------------------------------------------------------------------
# Monte Carlo helpers


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float

    def __iter__(self):
        return iter((self.value, self.std_error))


def _mc(values: np.ndarray) -> MCEstimate:
    values = np.asarray(values, dtype=float)
    se = values.std(ddof=1) / math.sqrt(values.size) if values.size > 1 else 0.0
    return MCEstimate(float(values.mean()), float(se))


def _rng(rng) -> np.random.Generator:
    if rng is None:
        raise ValueError("a numpy Generator (or seed) is required for Monte Carlo estimates")
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class _TwoSided:
    """Independent draws of ``(T_lo, ..., T_hi)`` with ``T_0 = 0``, one row per draw."""

    def __init__(self, scheme: RenewalScheme, lo: int, hi: int, size: int, rng: np.random.Generator):
        lo, hi = min(lo, 0), max(hi, 0)
        self.lo = lo
        self.times = np.zeros((size, hi - lo + 1))
        if hi > 0:
            fwd = np.asarray(scheme.sample_waiting(rng, size=(size, hi)), dtype=float)
            self.times[:, 1 - lo :] = np.cumsum(fwd, axis=1)
        if lo < 0:
            back = np.asarray(scheme.sample_waiting(rng, size=(size, -lo)), dtype=float)
            self.times[:, : -lo][:, ::-1] = -np.cumsum(back, axis=1)

    def __call__(self, j: int) -> np.ndarray:
        return self.times[:, j - self.lo]


def _is_exact_scheme(scheme) -> bool:
    return isinstance(scheme, Deterministic)


def fourth_moment(kernel: Kernel, driver: LevyDriver, r, s, t, v):
    """``E(X_r X_s X_t X_v)``: cumulant term plus the three pairings."""
    sigma2, eta = driver.moments()
    pairs = (
        bilinear_F(kernel, r, s) * bilinear_F(kernel, t, v)
        + bilinear_F(kernel, r, t) * bilinear_F(kernel, s, v)
        + bilinear_F(kernel, r, v) * bilinear_F(kernel, s, t)
    )
    out = sigma2**2 * pairs
    if eta != 3:
        out = out + (eta - 3) * sigma2**2 * product_integral(kernel, (r, s, t, v))
    return out


def expected_product4(
    kernel: Kernel,
    driver: LevyDriver,
    scheme: RenewalScheme,
    l: int,
    m: int,
    n: int,
    mc_samples: int = DEFAULT_MC,
    rng=None,
) -> MCEstimate:
    """``E(Y_0 Y_l Y_m Y_n)`` for ``0 <= l <= m <= n``, averaging over renewal draws."""
    if not 0 <= l <= m <= n:
        raise ValueError("need 0 <= l <= m <= n")
    if n == 0 or _is_exact_scheme(scheme):
        d = 0.0 if n == 0 else scheme.delta
        return MCEstimate(float(fourth_moment(kernel, driver, 0.0, l * d, m * d, n * d)), 0.0)
    T = _TwoSided(scheme, 0, n, mc_samples, _rng(rng))
    values = fourth_moment(kernel, driver, 0.0, T(l), T(m), T(n))
    if not np.all(np.isfinite(values)):
        from .renewal import NonFiniteSample

        raise NonFiniteSample("non-finite conditional fourth moment")
    return _mc(values)


@dataclass(frozen=True)
class PairProducts:
    joint: MCEstimate
    split: MCEstimate


def pair_product_expectations(
    kernel: Kernel, scheme: RenewalScheme, l: int, m: int, n: int, mc_samples: int = DEFAULT_MC, rng=None
) -> PairProducts:
    """``E[F(0,T_l) F(T_m,T_n)]`` jointly and as ``E F(0,T_l) * E F(0,T_{n-m})`` from independent draws.

    For ``0 <= l <= m <= n`` the two agree because the waiting times in
    ``(0, l]`` and ``(m, n]`` are disjoint.
    """
    gen = _rng(rng)
    T = _TwoSided(scheme, min(0, l, m, n), max(0, l, m, n), mc_samples, gen)
    joint = _mc(bilinear_F(kernel, 0.0, T(l)) * bilinear_F(kernel, T(m), T(n)))
    A = _mc(bilinear_F(kernel, 0.0, scheme.sample_times_at(l, gen, mc_samples)))
    B = _mc(bilinear_F(kernel, 0.0, scheme.sample_times_at(n - m, gen, mc_samples)))
    se = math.sqrt((A.std_error * B.value) ** 2 + (B.std_error * A.value) ** 2 + (A.std_error * B.std_error) ** 2)
    return PairProducts(joint, MCEstimate(A.value * B.value, se))


def f_covariance(
    kernel: Kernel, scheme: RenewalScheme, p: int, k: int, q: int, mc_samples: int = DEFAULT_MC, rng=None
) -> MCEstimate:
    """``Cov(F(0, T_p), F(T_k, T_{k+q}))`` over two-sided renewal draws."""
    T = _TwoSided(scheme, min(0, k), max(p, k + q), mc_samples, _rng(rng))
    A = bilinear_F(kernel, 0.0, T(p))
    B = bilinear_F(kernel, T(k), T(k + q))
    prod = (A - A.mean()) * (B - B.mean())
    n = prod.size
    return MCEstimate(float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n)))


@dataclass(frozen=True)
class KappaEstimate:
    value: float
    std_error: float
    quartic_term: float


def _kappa_samples(kernel, sigma2, eta, T, k, l, m):
    """Per-draw integrand of kappa_f(k, l, m); returns (total, quartic part)."""
    s4 = sigma2**2
    Tk, Tl, Tm = T(k), T(l), T(m)
    pair = s4 * (
        bilinear_F(kernel, 0.0, Tl) * bilinear_F(kernel, Tk, Tm)
        + bilinear_F(kernel, 0.0, Tm) * bilinear_F(kernel, Tk, Tl)
    )
    if eta == 3:
        quartic = np.zeros_like(pair)
    else:
        quartic = (eta - 3) * s4 * product_integral(kernel, (0.0, Tk, Tl, Tm))
    return pair + quartic, quartic


def kappa_f(
    kernel: Kernel,
    driver: LevyDriver,
    scheme: RenewalScheme,
    k: int,
    l: int,
    m: int,
    mc_samples: int = DEFAULT_MC,
    rng=None,
) -> KappaEstimate:
    """Fourth-order term ``kappa_f(k, l, m)``; indices may be negative."""
    sigma2, eta = driver.moments()
    idx = (0, k, l, m)
    if _is_exact_scheme(scheme):
        d = scheme.delta
        T = lambda j: np.array([j * d])  # noqa: E731
        total, quartic = _kappa_samples(kernel, sigma2, eta, T, k, l, m)
        return KappaEstimate(float(total[0]), 0.0, float(quartic[0]))
    T = _TwoSided(scheme, min(idx), max(idx), mc_samples, _rng(rng))
    total, quartic = _kappa_samples(kernel, sigma2, eta, T, k, l, m)
    est = _mc(total)
    return KappaEstimate(est.value, est.std_error, float(np.mean(quartic)))


# ---------------------------------------------------------------------------
# sample mean


@dataclass(frozen=True)
class MeanVariance:
    value: float
    std_error: float
    tail_K: int
    truncation_bound: float

    def __iter__(self):
        return iter((self.value, self.std_error))


def default_tail_K(
    kernel: Kernel,
    scheme: RenewalScheme,
    rng=None,
    tol: float = TAIL_TOL,
    k_max: int = 2000,
    samples: int = 2000,
) -> tuple[int, float]:
    """Smallest ``K`` with ``|E F(0, T_K)| < tol * F(0, 0)``, and the decay ratio at ``K``.

    Exact for OU kernels and deterministic schemes, Monte Carlo otherwise.
    Warns and returns ``k_max`` when the criterion is never met.
    """
    f00 = float(bilinear_F(kernel, 0.0, 0.0))
    if f00 == 0:
        return 1, 0.0
    if isinstance(kernel, OU):
        r = float(scheme.laplace(kernel.a))
        K = max(1, math.ceil(math.log(tol) / math.log(r))) if r > 0 else 1
        return K, r
    gen = None if _is_exact_scheme(scheme) else _rng(rng)
    t = np.zeros(1 if gen is None else samples)
    prev = f00
    for K in range(1, k_max + 1):
        t = t + (scheme.delta if gen is None else scheme.sample_waiting(gen, size=t.size))
        cur = abs(float(np.mean(bilinear_F(kernel, 0.0, t))))
        if cur < tol * f00:
            return K, (cur / prev if prev > 0 else 0.0)
        prev = cur
    warnings.warn(
        f"E F(0, T_K) has not decayed below {tol:g} * F(0,0) by K={k_max}; truncating there",
        RuntimeWarning,
        stacklevel=2,
    )
    return k_max, 1.0


def sigma2_mean(
    kernel: Kernel,
    scheme: RenewalScheme,
    driver: LevyDriver,
    tail_K: int | None = None,
    mc_samples: int = DEFAULT_MC,
    rng=None,
    exact: bool = False,
) -> MeanVariance:
    """Asymptotic variance of ``sqrt(n) * mean(Y)``.

    ``sigma2 * [F(0,0) + 2 sum_{k=1}^{K} E F(0, T_k)]``. Each expectation goes
    through :meth:`expect_over_renewals` (exact quadrature when ``exact=True``
    and the scheme supports it). The reported truncation bound assumes
    geometric decay of the summands beyond ``K``.
    """
    report = decay_check(kernel, "sample_mean") if _has_envelope(kernel) else None
    if report is not None and not report.passed:
        warnings.warn("kernel does not satisfy the sufficient decay condition for the mean CLT", RuntimeWarning, stacklevel=2)
    sigma2, _ = driver.moments()
    f00 = float(bilinear_F(kernel, 0.0, 0.0))
    if f00 == 0:
        return MeanVariance(0.0, 0.0, 0, 0.0)
    gen = None if (exact or _is_exact_scheme(scheme)) else _rng(rng)
    ratio = None
    if tail_K is None:
        tail_K, ratio = default_tail_K(kernel, scheme, gen)
    total, var = f00, 0.0
    last = 0.0
    for k in range(1, tail_K + 1):
        mean, se = scheme.expect_over_renewals(k, lambda t: bilinear_F(kernel, 0.0, t), mc_samples, gen, exact=exact)
        prev, last = last, mean
        total += 2 * mean
        var += 4 * se**2
    if ratio is None:
        ratio = abs(last / prev) if prev else 0.0
    bound = 2 * abs(last) * ratio / (1 - ratio) if ratio < 1 else math.inf
    return MeanVariance(sigma2 * total, sigma2 * math.sqrt(var), tail_K, sigma2 * bound)


def _has_envelope(kernel) -> bool:
    return getattr(kernel, "envelope", None) is not None or kernel.analytic_envelope is not None


# ---------------------------------------------------------------------------
# Z and W matrices


class CovMethod(str, enum.Enum):
    CLOSED_FORM_OU_EXP = "closed_form_ou_exp"
    NUMERIC = "numeric"


@dataclass(frozen=True, eq=False)
class AsymptoticCov:
    """``Z`` for lags ``0..h`` and, once :func:`w_matrix` ran, ``W`` for lags ``1..h``.

    ``gamma`` holds the autocovariances ``gamma(0..h)`` computed alongside ``Z``.
    Error fields are batch-means standard errors (``None`` for exact routes).
    """

    h: int
    Z: np.ndarray
    method: CovMethod
    gamma: np.ndarray
    tail_K: int
    truncation_bound: float
    Z_error: np.ndarray | None = None
    W: np.ndarray | None = None
    W_error: np.ndarray | None = None
    batch_Z: np.ndarray | None = field(default=None, repr=False)

    @property
    def rho(self) -> np.ndarray:
        """Autocorrelations at lags ``1..h``."""
        return self.gamma[1:] / self.gamma[0]


def _laplace_expectation(scheme: RenewalScheme, a: float, segments) -> float:
    """``E exp(-a sum |T_j - T_i|)`` over ``(i, j)`` pairs; each waiting time factorises."""
    counts: Counter = Counter()
    for i, j in segments:
        lo, hi = min(i, j), max(i, j)
        for e in range(lo + 1, hi + 1):
            counts[e] += 1
    out = 1.0
    for c in counts.values():
        out *= float(scheme.laplace(a * c))
    return out


def _z_closed_ou(kernel: OU, sigma2: float, eta: float, scheme, h: int, K: int):
    a = kernel.a
    s4 = sigma2**2
    lap = lambda *segs: _laplace_expectation(scheme, a, segs)  # noqa: E731
    phi = float(scheme.laplace(a))
    gamma = np.array([sigma2 / (2 * a) * phi**p for p in range(h + 1)])
    Z = np.zeros((h + 1, h + 1))
    boundary = 0.0
    for p in range(h + 1):
        for q in range(h + 1):
            total = 0.0
            for k in range(-K - q, K + 1):
                idx = (0, p, k, k + q)
                lo = min(idx)
                # F(x, y) = exp(-a|x - y|) / 2a, quartic = exp(-a sum (t_i - min)) / 4a
                pair = s4 / (4 * a * a) * (lap((0, k), (p, k + q)) + lap((0, k + q), (p, k)))
                quartic = (eta - 3) * s4 / (4 * a) * lap(*[(lo, j) for j in idx]) if eta != 3 else 0.0
                term = pair + quartic
                total += term
                if k in (-K - q, K):
                    boundary = max(boundary, abs(term))
            for k in range(-q + 1, p):
                total += s4 / (4 * a * a) * (lap((0, p), (k, k + q)) - phi**p * phi**q)
            Z[p, q] = total
    bound = 2 * boundary * phi / (1 - phi) if phi < 1 else math.inf
    return Z, gamma, bound


def _z_numeric(kernel, sigma2, eta, scheme, h, K, mc_samples, batches, gen):
    s4 = sigma2**2
    nb = max(1, mc_samples // batches)
    N = nb * batches
    T = _TwoSided(scheme, -K - h, K + 2 * h, N, gen)
    Fp = [bilinear_F(kernel, 0.0, T(p)) for p in range(h + 1)]
    gamma_draws = sigma2 * np.stack(Fp)
    kappa_sum = np.zeros((h + 1, h + 1, N))
    cov_parts: dict[tuple[int, int], list[tuple[np.ndarray, np.ndarray]]] = {}
    boundary = 0.0
    for p in range(h + 1):
        for q in range(h + 1):
            acc = np.zeros(N)
            for k in range(-K - q, K + 1):
                term, _ = _kappa_samples(kernel, sigma2, eta, T, p, k, k + q)
                acc += term
                if k in (-K - q, K):
                    boundary = max(boundary, abs(float(term.mean())))
            kappa_sum[p, q] = acc
            cov_parts[p, q] = [(Fp[p], bilinear_F(kernel, T(k), T(k + q))) for k in range(-q + 1, p)]

    def assemble(sl):
        Z = kappa_sum[:, :, sl].mean(axis=2)
        for (p, q), parts in cov_parts.items():
            for A, B in parts:
                a_, b_ = A[sl], B[sl]
                Z[p, q] += s4 * (np.mean(a_ * b_) - a_.mean() * b_.mean())
        return Z, gamma_draws[:, sl].mean(axis=1)

    Z, gamma = assemble(slice(None))
    batch = np.stack([assemble(slice(b * nb, (b + 1) * nb))[0] for b in range(batches)])
    Z_err = batch.std(axis=0, ddof=1) / math.sqrt(batches) if batches > 1 else None
    return Z, gamma, Z_err, batch, boundary


def z_matrix(
    kernel: Kernel,
    driver: LevyDriver,
    scheme: RenewalScheme,
    h: int,
    mc_samples: int = DEFAULT_MC,
    tail_K: int | None = None,
    rng=None,
    method: CovMethod | str = "auto",
    batches: int = DEFAULT_BATCHES,
) -> AsymptoticCov:
    """Limit of ``n Cov(gamma*_n(p), gamma*_n(q))`` for ``p, q = 0..h``.

    ``Z_pq = sum_k kappa_f(p, k, k+q) + sigma2^2 sum_{k=-q+1}^{p-1} Cov(F(0,T_p), F(T_k, T_{k+q}))``
    with the ``k``-sum cut to ``-K-q <= k <= K``. ``method="auto"`` picks the
    closed route for OU kernels and Monte Carlo otherwise.
    """
    if h < 0:
        raise ValueError("h must be non-negative")
    if _has_envelope(kernel):
        report = decay_check(kernel, "autocovariance")
        if not report.passed:
            warnings.warn(
                "kernel does not satisfy the sufficient decay condition for the autocovariance CLT",
                RuntimeWarning,
                stacklevel=2,
            )
    sigma2, eta = driver.moments()
    if method == "auto":
        method = CovMethod.CLOSED_FORM_OU_EXP if isinstance(kernel, OU) else CovMethod.NUMERIC
    method = CovMethod(method)
    gen = None if _is_exact_scheme(scheme) else (_rng(rng) if method is CovMethod.NUMERIC else None)
    ratio = None
    if tail_K is None:
        tail_K, ratio = default_tail_K(kernel, scheme, gen if gen is not None else (rng or 0))

    if method is CovMethod.CLOSED_FORM_OU_EXP:
        if not isinstance(kernel, OU):
            raise ValueError("the closed-form route needs an untruncated OU kernel")
        Z, gamma, bound = _z_closed_ou(kernel, sigma2, eta, scheme, h, tail_K)
        return AsymptoticCov(h, Z, method, gamma, tail_K, bound)

    if _is_exact_scheme(scheme):
        # no randomness in the renewal times: one draw is exact
        Z, gamma, _, _, boundary = _z_numeric(kernel, sigma2, eta, scheme, h, tail_K, 1, 1, None)
        Z_err, batch = np.zeros_like(Z), None
    else:
        Z, gamma, Z_err, batch, boundary = _z_numeric(kernel, sigma2, eta, scheme, h, tail_K, mc_samples, batches, gen)
    if ratio is None:
        ratio = 1.0
    bound = 2 * boundary * ratio / (1 - ratio) if ratio < 1 else math.inf
    return AsymptoticCov(h, Z, method, gamma, tail_K, bound, Z_err, batch_Z=batch)


def _w_from_z(Z: np.ndarray, gamma0: float, rho: np.ndarray) -> np.ndarray:
    r = np.concatenate([[1.0], rho])
    h = Z.shape[0] - 1
    W = np.empty((h, h))
    for p in range(1, h + 1):
        for q in range(1, h + 1):
            W[p - 1, q - 1] = (Z[p, q] - r[p] * Z[0, q] - r[q] * Z[p, 0] + r[p] * r[q] * Z[0, 0]) / gamma0**2
    return W


def w_matrix(cov: AsymptoticCov, gamma0: float, rho: Sequence[float]) -> AsymptoticCov:
    """Asymptotic covariance of ``sqrt(n)(rho*(p) - rho(p))``, ``p = 1..h``.

    ``rho`` lists ``rho(1), ..., rho(h)``. Returns a copy of ``cov`` with ``W``
    (indexed so that ``W[0, 0]`` is the lag-one variance) filled in.
    """
    if not gamma0 > 0:
        raise ValueError("gamma0 must be positive")
    rho = np.asarray(rho, dtype=float)[: cov.h]
    if rho.size < cov.h:
        raise ValueError(f"need {cov.h} autocorrelations, got {rho.size}")
    W = _w_from_z(cov.Z, gamma0, rho)
    W_err = None
    if cov.batch_Z is not None and cov.batch_Z.shape[0] > 1:
        batch_W = np.stack([_w_from_z(Zb, gamma0, rho) for Zb in cov.batch_Z])
        W_err = batch_W.std(axis=0, ddof=1) / math.sqrt(batch_W.shape[0])
    elif cov.Z_error is not None:
        W_err = np.zeros_like(W)
    return replace(cov, W=W, W_error=W_err)


def autocovariances(kernel: Kernel, driver: LevyDriver, scheme: RenewalScheme, h: int) -> np.ndarray | None:
    """Exact ``gamma(0..h) = sigma2 E F(0, T_p)`` for OU kernels; ``None`` otherwise."""
    if not isinstance(kernel, OU):
        return None
    sigma2, _ = driver.moments()
    phi = float(scheme.laplace(kernel.a))
    return np.array([sigma2 / (2 * kernel.a) * phi**p for p in range(h + 1)])
