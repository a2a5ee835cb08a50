"""Waiting-time laws and renewal sampling times.

``T_0 = 0`` and ``T_n = W_1 + ... + W_n`` with i.i.d. positive waiting times.
Only the forward branch is generated for paths; the asymptotics module builds
two-sided sequences itself from :meth:`sample_waiting`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Union

import numpy as np
from scipy import integrate, stats

__all__ = [
    "Exponential",
    "Deterministic",
    "GammaWaiting",
    "RenewalScheme",
    "NonFiniteSample",
    "RenewalExpectation",
    "scheme_from_config",
]


class NonFiniteSample(ArithmeticError):
    """A Monte Carlo integrand returned NaN or infinity."""


@dataclass(frozen=True)
class RenewalExpectation:
    mean: float
    std_error: float

    def __iter__(self):
        return iter((self.mean, self.std_error))


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


class _Scheme:
    """Shared renewal machinery; subclasses provide the waiting-time law."""

    def sample_waiting(self, rng: np.random.Generator, size=None) -> np.ndarray:
        raise NotImplementedError

    def mean_waiting(self) -> float:
        raise NotImplementedError

    def laplace(self, s):
        """``E exp(-s W)`` for ``s >= 0``."""
        raise NotImplementedError

    def law(self):
        """Frozen scipy distribution of one waiting time."""
        raise NotImplementedError

    def sample_renewal_times(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Return ``(T_1, ..., T_n)``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return np.cumsum(self.sample_waiting(rng, size=n))

    def sample_times_at(self, k: int, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` independent draws of ``T_k``."""
        if k == 0:
            return np.zeros(size)
        return self.sample_waiting(rng, size=(size, k)).sum(axis=1)

    def expect_over_renewals(
        self,
        k: int,
        g: Callable[[np.ndarray], np.ndarray],
        samples: int = 10_000,
        rng: np.random.Generator | None = None,
        exact: bool = False,
    ) -> RenewalExpectation:
        """Estimate ``E g(T_k)``.

        ``g`` must accept a 1-d array of times. Monte Carlo by default; with
        ``exact=True`` an Exponential scheme integrates ``g`` against the
        ``Gamma(k, lambda)`` density by quadrature instead.
        """
        if k < 0:
            raise ValueError("k must be >= 0")
        if exact:
            return self._expect_exact(k, g)
        if rng is None:
            raise ValueError("rng is required for Monte Carlo expectations")
        values = np.asarray(g(self.sample_times_at(k, rng, samples)), dtype=float)
        if not np.all(np.isfinite(values)):
            raise NonFiniteSample(f"g(T_{k}) produced non-finite values")
        se = values.std(ddof=1) / math.sqrt(values.size) if values.size > 1 else 0.0
        return RenewalExpectation(float(values.mean()), float(se))

    def _expect_exact(self, k: int, g) -> RenewalExpectation:
        raise ValueError(f"exact renewal expectations are not available for {type(self).__name__}")


@dataclass(frozen=True)
class Exponential(_Scheme):
    """Poisson sampling: ``W ~ Exp(lam)``."""

    lam: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", _positive("lambda", self.lam))

    def sample_waiting(self, rng, size=None):
        return rng.exponential(1.0 / self.lam, size=size)

    def mean_waiting(self) -> float:
        return 1.0 / self.lam

    def laplace(self, s):
        return self.lam / (self.lam + np.asarray(s, dtype=float))

    def law(self):
        return stats.expon(scale=1.0 / self.lam)

    def _expect_exact(self, k, g):
        if k == 0:
            value = float(np.asarray(g(np.zeros(1)), dtype=float)[0])
            return RenewalExpectation(value, 0.0)
        density = stats.gamma(k, scale=1.0 / self.lam).pdf

        def integrand(t):
            return float(np.asarray(g(np.array([t])), dtype=float)[0]) * density(t)

        value, err = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
        if not math.isfinite(value):
            raise NonFiniteSample(f"quadrature of g against T_{k} density is not finite")
        return RenewalExpectation(value, err)

    def to_config(self) -> dict[str, Any]:
        return {"type": "exponential", "lambda": self.lam}


@dataclass(frozen=True)
class Deterministic(_Scheme):
    """Equidistant sampling: ``W = delta`` surely."""

    delta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta", _positive("delta", self.delta))

    def sample_waiting(self, rng, size=None):
        return np.full(size, self.delta) if size is not None else self.delta

    def mean_waiting(self) -> float:
        return self.delta

    def laplace(self, s):
        return np.exp(-np.asarray(s, dtype=float) * self.delta)

    def sample_renewal_times(self, n, rng=None):
        if n < 1:
            raise ValueError("n must be >= 1")
        return self.delta * np.arange(1, n + 1, dtype=float)

    def expect_over_renewals(self, k, g, samples=1, rng=None, exact=False):
        if k < 0:
            raise ValueError("k must be >= 0")
        value = float(np.asarray(g(np.array([k * self.delta])), dtype=float)[0])
        if not math.isfinite(value):
            raise NonFiniteSample(f"g(T_{k}) is not finite")
        return RenewalExpectation(value, 0.0)

    def to_config(self) -> dict[str, Any]:
        return {"type": "deterministic", "delta": self.delta}


@dataclass(frozen=True)
class GammaWaiting(_Scheme):
    """``W ~ Gamma(shape, rate)``."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def sample_waiting(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)

    def mean_waiting(self) -> float:
        return self.shape / self.rate

    def laplace(self, s):
        return (self.rate / (self.rate + np.asarray(s, dtype=float))) ** self.shape

    def law(self):
        return stats.gamma(self.shape, scale=1.0 / self.rate)

    def to_config(self) -> dict[str, Any]:
        return {"type": "gamma", "shape": self.shape, "rate": self.rate}


RenewalScheme = Union[Exponential, Deterministic, GammaWaiting]


def scheme_from_config(cfg: dict[str, Any]) -> RenewalScheme:
    """Build a scheme from ``{"type": "exponential", "lambda": 1.0}`` style dicts."""
    cfg = dict(cfg)
    kind = cfg.pop("type", None)
    if kind == "exponential":
        if "lambda" in cfg:
            cfg["lam"] = cfg.pop("lambda")
        builder = Exponential
    elif kind == "deterministic":
        builder = Deterministic
    elif kind == "gamma":
        builder = GammaWaiting
    else:
        raise ValueError(f"unknown renewal type {kind!r}; expected exponential, deterministic or gamma")
    try:
        return builder(**cfg)
    except TypeError as exc:
        raise ValueError(f"bad parameters for renewal scheme {kind!r}: {exc}") from None
