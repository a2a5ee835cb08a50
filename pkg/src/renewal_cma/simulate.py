"""Sampled paths ``Y_n = X_{T_n}`` of Lévy-driven moving averages."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .kernel import Kernel, bilinear_F, truncate
from .levy import BrownianMotion, LevyDriver
from .renewal import RenewalScheme

__all__ = [
    "Method",
    "PathMeta",
    "SampledPath",
    "GridTooCoarse",
    "simulate_ou",
    "simulate_cma_grid",
    "as_rng",
    "warmup_horizon",
    "stationary_ou_draws",
]

# the grid must resolve the truncation window with at least this many steps
MIN_STEPS_PER_WINDOW = 64
TAIL_MASS_TOL = 1e-6
WARMUP_DECAY = 1e-8


class GridTooCoarse(ValueError):
    pass


class Method(str, enum.Enum):
    EXACT_OU = "exact_ou"
    GRID = "grid"


@dataclass(frozen=True)
class PathMeta:
    seed: int | None
    method: Method
    grid_step: float | None = None
    warmup_horizon: float = 0.0
    replication: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        return d


@dataclass(frozen=True, eq=False)
class SampledPath:
    times: np.ndarray
    values: np.ndarray
    meta: PathMeta

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("observation times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def waiting_times(self) -> np.ndarray:
        """``W_k = T_k - T_{k-1}`` with ``T_0 = 0``."""
        return np.diff(self.times, prepend=0.0)

    def scaled(self, c: float) -> "SampledPath":
        return SampledPath(self.times, c * self.values, self.meta)

    def to_csv(self, path: str | Path) -> Path:
        """Write ``t,y`` rows plus a ``<name>.meta.json`` sidecar; returns the sidecar path."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["t,y"] + [f"{t!r},{y!r}" for t, y in zip(self.times.tolist(), self.values.tolist())]
        path.write_text("\n".join(lines) + "\n")
        sidecar = path.with_suffix(".meta.json")
        sidecar.write_text(json.dumps(self.meta.to_dict(), indent=2, sort_keys=True) + "\n")
        return sidecar

    @classmethod
    def from_csv(cls, path: str | Path) -> "SampledPath":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        sidecar = path.with_suffix(".meta.json")
        if sidecar.exists():
            raw = json.loads(sidecar.read_text())
            meta = PathMeta(
                seed=raw.get("seed"),
                method=Method(raw["method"]),
                grid_step=raw.get("grid_step"),
                warmup_horizon=raw.get("warmup_horizon", 0.0),
                replication=raw.get("replication"),
            )
        else:
            meta = PathMeta(seed=None, method=Method.GRID)
        return cls(data[:, 0], data[:, 1], meta)


def as_rng(rng) -> tuple[np.random.Generator, int | None]:
    """Accept a Generator or an integer seed; return the generator and the seed if known."""
    if isinstance(rng, np.random.Generator):
        return rng, None
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng)), int(rng)
    raise TypeError("rng must be a numpy Generator or an integer seed")


def warmup_horizon(a: float, scheme: RenewalScheme) -> float:
    """Horizon ``H`` with ``exp(-a H) <= 1e-8`` and at least 20 mean waiting times."""
    return max(-math.log(WARMUP_DECAY) / a, 20.0 * scheme.mean_waiting())


def stationary_ou_draws(a: float, driver: LevyDriver, size: int, rng, chunk: int = 100_000) -> np.ndarray:
    """Independent draws of the stationary OU marginal ``X_0``, generated in chunks."""
    if not a > 0:
        raise ValueError("a must be positive")
    gen, _ = as_rng(rng)
    sigma2, _ = driver.moments()
    if isinstance(driver, BrownianMotion):
        return gen.normal(0.0, math.sqrt(sigma2 / (2 * a)), size=size)
    horizon = -math.log(WARMUP_DECAY) / a
    parts = [driver.sample_weighted_integral(a, horizon, gen, size=min(chunk, size - i)) for i in range(0, size, chunk)]
    return np.concatenate(parts) if parts else np.empty(0)


def simulate_ou(
    a: float,
    driver: LevyDriver,
    scheme: RenewalScheme,
    n: int,
    rng,
    h_max: int = 0,
) -> SampledPath:
    """Exact-in-law OU path at renewal times.

    Uses ``X_{T_k} = exp(-a W_k) X_{T_{k-1}} + innovation_k``. The value at
    ``T_0 = 0`` is drawn from the stationary law for Brownian drivers and by a
    warm-up innovation over :func:`warmup_horizon` otherwise. Emits ``n + h_max``
    observations so that lag-``h_max`` statistics can use exactly ``n`` products.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if n < 1 or h_max < 0:
        raise ValueError("need n >= 1 and h_max >= 0")
    gen, seed = as_rng(rng)
    total = n + h_max
    waits = np.asarray(scheme.sample_waiting(gen, size=total), dtype=float)
    sigma2, _ = driver.moments()
    if isinstance(driver, BrownianMotion):
        horizon = 0.0
        x = gen.normal(0.0, math.sqrt(sigma2 / (2 * a)))
    else:
        horizon = warmup_horizon(a, scheme)
        x = driver.sample_weighted_integral(a, horizon, gen)
    innovations = driver.sample_weighted_integral(a, waits, gen).tolist()
    decay = np.exp(-a * waits).tolist()
    values = np.empty(total)
    for k in range(total):
        x = decay[k] * x + innovations[k]
        values[k] = x
    return SampledPath(np.cumsum(waits), values, PathMeta(seed, Method.EXACT_OU, None, horizon))


def simulate_cma_grid(
    kernel: Kernel,
    driver: LevyDriver,
    scheme: RenewalScheme,
    n: int,
    grid_step: float,
    truncation_m: float,
    rng,
    h_max: int = 0,
) -> SampledPath:
    """Riemann-sum approximation ``Y_n = sum_j f_m(T_n - s_j) dL_j`` on one shared grid.

    The grid covers ``[T_1 - m/2, T_N + m/2]`` with left-point increments, so every
    observation reads the same driver realization. ``grid_step`` must not exceed
    ``truncation_m / 64`` and the truncation must keep all but ``1e-6`` of the
    kernel's squared mass.
    """
    if not (grid_step > 0 and truncation_m > 0):
        raise ValueError("grid_step and truncation_m must be positive")
    if grid_step > truncation_m / MIN_STEPS_PER_WINDOW:
        raise GridTooCoarse(
            f"grid_step {grid_step} exceeds truncation_m/{MIN_STEPS_PER_WINDOW} = "
            f"{truncation_m / MIN_STEPS_PER_WINDOW}"
        )
    if n < 1 or h_max < 0:
        raise ValueError("need n >= 1 and h_max >= 0")
    gen, seed = as_rng(rng)
    kernel_m = truncate(kernel, truncation_m)
    mass = float(bilinear_F(kernel, 0.0, 0.0))
    if mass > 0:
        lost = (mass - float(bilinear_F(kernel_m, 0.0, 0.0))) / mass
        if lost > TAIL_MASS_TOL:
            raise ValueError(
                f"truncation_m={truncation_m} drops {lost:.3g} of the kernel's squared mass "
                f"(limit {TAIL_MASS_TOL})"
            )

    total = n + h_max
    times = scheme.sample_renewal_times(total, gen)
    half = truncation_m / 2
    start = times[0] - half
    n_grid = int(math.ceil((times[-1] + half - start) / grid_step)) + 1
    increments = driver.sample_increment(grid_step, gen, size=n_grid)
    grid = start + grid_step * np.arange(n_grid)

    values = np.zeros(total)
    if mass > 0:
        lo_k, hi_k = kernel_m.support
        for i, t in enumerate(times):
            # f_m(t - s) != 0 needs t - hi <= s <= t - lo
            j0 = max(0, int(math.floor((t - hi_k - start) / grid_step)))
            j1 = min(n_grid, int(math.ceil((t - lo_k - start) / grid_step)) + 1)
            values[i] = np.dot(kernel_m(t - grid[j0:j1]), increments[j0:j1])
    return SampledPath(times, values, PathMeta(seed, Method.GRID, grid_step, 0.0))
