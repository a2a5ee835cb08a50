"""Centered Lévy drivers with exact increment sampling.

Every driver exposes the two moment quantities the asymptotic theory needs,
``sigma2 = E(L_1^2)`` and ``eta = E(L_1^4) / sigma2^2``, together with samplers
for plain increments and for the exponentially weighted innovation
``int_0^dt exp(-a (dt - s)) dL_s`` used by the OU recursion.

All randomness comes from an explicitly passed ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

__all__ = [
    "BrownianMotion",
    "CompoundPoissonNormal",
    "GammaDifference",
    "LevyDriver",
    "GAMMA_SUBSTEPS_PER_UNIT",
    "driver_from_config",
]

# Euler substeps per unit time for GammaDifference weighted integrals.
GAMMA_SUBSTEPS_PER_UNIT = 256


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def _broadcast(dt, size) -> np.ndarray:
    dt = np.asarray(dt, dtype=float)
    if not np.all(dt >= 0):
        raise ValueError("time increments must be non-negative and finite")
    if size is None:
        return dt
    size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    return np.broadcast_to(dt, np.broadcast_shapes(dt.shape, size))


def _out(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def _weighted_variance(a: float, dt: np.ndarray) -> np.ndarray:
    # int_0^dt exp(-2 a (dt - s)) ds
    return -np.expm1(-2.0 * a * dt) / (2.0 * a)


@dataclass(frozen=True)
class BrownianMotion:
    """Brownian motion with ``Var(L_t) = variance_rate * t``."""

    variance_rate: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "variance_rate", _positive("variance_rate", self.variance_rate))

    def moments(self) -> tuple[float, float]:
        return self.variance_rate, 3.0

    def sample_increment(self, dt, rng: np.random.Generator, size=None):
        dt = _broadcast(dt, size)
        return _out(rng.standard_normal(dt.shape) * np.sqrt(self.variance_rate * dt))

    def sample_weighted_integral(self, a: float, dt, rng: np.random.Generator, size=None):
        dt = _broadcast(dt, size)
        var = self.variance_rate * _weighted_variance(a, dt)
        return _out(rng.standard_normal(dt.shape) * np.sqrt(var))

    def to_config(self) -> dict[str, Any]:
        return {"type": "brownian", "variance_rate": self.variance_rate}


@dataclass(frozen=True)
class CompoundPoissonNormal:
    """Compound Poisson process with ``N(0, jump_variance)`` jumps.

    Symmetric jumps make the process centered without a compensator, and the
    kurtosis is ``eta = 3 + 3 / jump_rate``.
    """

    jump_rate: float
    jump_variance: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "jump_rate", _positive("jump_rate", self.jump_rate))
        object.__setattr__(self, "jump_variance", _positive("jump_variance", self.jump_variance))

    def moments(self) -> tuple[float, float]:
        return self.jump_rate * self.jump_variance, 3.0 + 3.0 / self.jump_rate

    def sample_increment(self, dt, rng: np.random.Generator, size=None):
        dt = _broadcast(dt, size)
        counts = rng.poisson(self.jump_rate * dt)
        # sum of k iid N(0, v) jumps is N(0, k v)
        return _out(rng.standard_normal(dt.shape) * np.sqrt(self.jump_variance * counts))

    def sample_weighted_integral(self, a: float, dt, rng: np.random.Generator, size=None):
        """Exact draw of ``sum_j exp(-a (dt - tau_j)) J_j`` over the jumps in ``[0, dt]``."""
        dt = _broadcast(dt, size)
        flat_dt = dt.ravel()
        counts = rng.poisson(self.jump_rate * flat_dt)
        total = int(counts.sum())
        weight2 = np.zeros(flat_dt.shape)
        if total:
            owner = np.repeat(np.arange(flat_dt.size), counts)
            # dt - tau is uniform on [0, dt]
            lag = rng.random(total) * flat_dt[owner]
            weight2 = np.bincount(owner, weights=np.exp(-2.0 * a * lag), minlength=flat_dt.size)
        out = rng.standard_normal(flat_dt.shape) * np.sqrt(self.jump_variance * weight2)
        return _out(out.reshape(dt.shape))

    def to_config(self) -> dict[str, Any]:
        return {
            "type": "compound_poisson_normal",
            "jump_rate": self.jump_rate,
            "jump_variance": self.jump_variance,
        }


@dataclass(frozen=True)
class GammaDifference:
    """Difference of two independent gamma subordinators with equal parameters.

    ``L_t = G_t - G'_t`` where ``G_t ~ Gamma(shape * t, rate)``. The difference is
    centered by symmetry; ``sigma2 = 2 shape / rate^2`` and ``eta = 3 + 3 / shape``.
    Weighted integrals are approximated on a left-point Euler grid with
    :data:`GAMMA_SUBSTEPS_PER_UNIT` substeps per unit time, so they are not exact.
    """

    shape: float
    rate: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def moments(self) -> tuple[float, float]:
        return 2.0 * self.shape / self.rate**2, 3.0 + 3.0 / self.shape

    def sample_increment(self, dt, rng: np.random.Generator, size=None):
        dt = _broadcast(dt, size)
        scale = 1.0 / self.rate
        return _out(_gamma(rng, self.shape * dt, scale) - _gamma(rng, self.shape * dt, scale))

    def sample_weighted_integral(self, a: float, dt, rng: np.random.Generator, size=None):
        dt = _broadcast(dt, size)
        flat_dt = dt.ravel()
        steps = np.where(flat_dt > 0, np.maximum(1, np.ceil(flat_dt * GAMMA_SUBSTEPS_PER_UNIT)), 0).astype(int)
        owner = np.repeat(np.arange(flat_dt.size), steps)
        h = np.divide(flat_dt, steps, out=np.zeros_like(flat_dt), where=steps > 0)[owner]
        # index of each substep within its own interval
        first = np.cumsum(steps) - steps
        j = np.arange(owner.size) - first[owner]
        dl = self.sample_increment(h, rng) if owner.size else np.zeros(0)
        weights = np.exp(-a * (flat_dt[owner] - j * h))
        out = np.bincount(owner, weights=weights * dl, minlength=flat_dt.size)
        return _out(out.reshape(dt.shape))

    def to_config(self) -> dict[str, Any]:
        return {"type": "gamma_difference", "shape": self.shape, "rate": self.rate}


def _gamma(rng: np.random.Generator, k: np.ndarray, scale: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    out = np.zeros(k.shape)
    pos = k > 0
    out[pos] = rng.gamma(k[pos], scale)
    return out


LevyDriver = Union[BrownianMotion, CompoundPoissonNormal, GammaDifference]


def driver_from_config(cfg: dict[str, Any]) -> LevyDriver:
    """Build a driver from ``{"type": "brownian", "variance_rate": 1.0}`` style dicts."""
    cfg = dict(cfg)
    kind = cfg.pop("type", None)
    builders = {
        "brownian": BrownianMotion,
        "compound_poisson_normal": CompoundPoissonNormal,
        "gamma_difference": GammaDifference,
    }
    if kind not in builders:
        raise ValueError(f"unknown driver type {kind!r}; expected one of {sorted(builders)}")
    try:
        return builders[kind](**cfg)
    except TypeError as exc:
        raise ValueError(f"bad parameters for driver {kind!r}: {exc}") from None
