"""Sample moments of a sampled path and the OU mean-reversion estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .simulate import SampledPath

__all__ = [
    "AcfEstimate",
    "EmptyPath",
    "PathTooShort",
    "RhoOutOfRange",
    "sample_mean",
    "acf",
    "estimate_a_star",
    "estimate_a_hat",
    "estimate_a_eq",
]


class EmptyPath(ValueError):
    pass


class PathTooShort(ValueError):
    pass


class RhoOutOfRange(ArithmeticError):
    """Lag-one autocorrelation outside ``(0, 1]``, where the estimators are undefined."""


def _values(path) -> np.ndarray:
    if isinstance(path, SampledPath):
        return path.values
    return np.asarray(path, dtype=float)


def sample_mean(path) -> float:
    """``(1/n) sum Y_k`` over the whole path."""
    y = _values(path)
    if y.size == 0:
        raise EmptyPath("cannot average an empty path")
    return float(y.mean())


@dataclass(frozen=True, eq=False)
class AcfEstimate:
    """Autocovariances at lags ``0..h_max`` in the two conventions.

    ``gamma_star[h] = (1/n) sum_{k=1}^{n} Y_k Y_{k+h}`` reads past index ``n``;
    ``gamma_hat[h] = (1/n) sum_{k=1}^{n-h} (Y_k - mean)(Y_{k+h} - mean)`` stays within it.
    The ``rho`` arrays are indexed by lag, so ``rho_star[0] == 1``. They are
    ``None`` when the lag-zero value vanishes.
    """

    h_max: int
    n: int
    mean: float
    gamma_star: np.ndarray
    gamma_hat: np.ndarray
    rho_star: np.ndarray | None
    rho_hat: np.ndarray | None

    @property
    def degenerate(self) -> bool:
        return self.rho_star is None or self.rho_hat is None

    def to_csv(self, path: str | Path) -> None:
        def fmt(arr, h):
            return "" if arr is None else repr(float(arr[h]))

        rows = ["lag,gamma_star,gamma_hat,rho_star,rho_hat"]
        for h in range(self.h_max + 1):
            rows.append(
                f"{h},{float(self.gamma_star[h])!r},{float(self.gamma_hat[h])!r},"
                f"{fmt(self.rho_star, h)},{fmt(self.rho_hat, h)}"
            )
        Path(path).write_text("\n".join(rows) + "\n")


def acf(path, h_max: int, n: int | None = None) -> AcfEstimate:
    """Sample autocovariances and autocorrelations up to lag ``h_max``.

    ``n`` defaults to ``len(path) - h_max`` so that every lag of ``gamma_star``
    averages exactly ``n`` products.
    """
    y = _values(path)
    if h_max < 0:
        raise ValueError("h_max must be non-negative")
    if y.size < h_max + 2:
        raise PathTooShort(f"path of length {y.size} is too short for h_max={h_max}")
    if n is None:
        n = y.size - h_max
    if n < 1 or n + h_max > y.size:
        raise PathTooShort(f"need n + h_max <= {y.size}, got n={n}, h_max={h_max}")

    head = y[:n]
    mean = float(head.mean())
    centered = head - mean
    gamma_star = np.array([np.dot(head, y[h : h + n]) / n for h in range(h_max + 1)])
    gamma_hat = np.array(
        [np.dot(centered[: n - h], centered[h:]) / n if h < n else 0.0 for h in range(h_max + 1)]
    )
    rho_star = gamma_star / gamma_star[0] if gamma_star[0] > 0 else None
    rho_hat = gamma_hat / gamma_hat[0] if gamma_hat[0] > 0 else None
    return AcfEstimate(h_max, n, mean, gamma_star, gamma_hat, rho_star, rho_hat)


def _rho1(est) -> float:
    if isinstance(est, AcfEstimate):
        if est.rho_star is None or est.h_max < 1:
            raise RhoOutOfRange("lag-one autocorrelation is undefined for this estimate")
        rho = float(est.rho_star[1])
    else:
        rho = float(est)
    if not (0.0 < rho <= 1.0):
        raise RhoOutOfRange(f"rho*(1) = {rho} is outside (0, 1]")
    return rho


def estimate_a_star(est, lam: float) -> float:
    """``lam * (1/rho*(1) - 1)`` with the sampling intensity known.

    ``est`` is an :class:`AcfEstimate` or the lag-one autocorrelation itself.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return lam * (1.0 / _rho1(est) - 1.0)


def estimate_a_hat(est, waiting_times) -> float:
    """As :func:`estimate_a_star` with ``lam`` replaced by ``1 / mean(waiting_times)``."""
    w = np.asarray(waiting_times, dtype=float)
    if w.size == 0 or not np.all(w > 0):
        raise ValueError("waiting times must be non-empty and positive")
    return estimate_a_star(est, 1.0 / w.mean())


def estimate_a_eq(est, delta: float) -> float:
    """``-log(rho*(1)) / delta`` for a path observed on the lattice ``delta * k``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return -math.log(_rho1(est)) / delta
