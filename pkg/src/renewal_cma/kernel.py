"""Moving-average kernels and their product integrals.

A kernel ``f`` enters the process as ``X_t = int f(t - s) dL_s``. Everything the
second- and fourth-order theory needs is an integral of shifted products,

    ``I(s_1, ..., s_k) = int f(u + s_1) ... f(u + s_k) du``,

with ``k = 2`` giving the bilinear form ``F(s, t)`` and ``k = 4`` the cumulant
integral. OU shapes have closed forms; all other shapes use piecewise
quadrature over the intersection of the shifted supports.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "Envelope",
    "Kernel",
    "OU",
    "TruncatedOU",
    "PolyDecay",
    "Tabulated",
    "Truncated",
    "ZeroKernel",
    "Purpose",
    "CheckReport",
    "QuadratureNotConverged",
    "EnvelopeMissing",
    "product_integral",
    "bilinear_F",
    "truncate",
    "decay_check",
    "kernel_from_config",
    "load_tabulated",
    "ENVELOPE_NODES",
]

QUAD_TOL = 1e-10

# Log-spaced check points for envelope verification, mirrored to negative u.
_POS_NODES = np.logspace(-6, 6, 10_000)
ENVELOPE_NODES = np.concatenate([-_POS_NODES[::-1], [0.0], _POS_NODES])

# 3-point Gauss-Legendre integrates polynomials up to degree 5 exactly.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)


class QuadratureNotConverged(ArithmeticError):
    pass


class EnvelopeMissing(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    """Bound ``|f(u)| <= K * min(|u|^-alpha, 1)``."""

    K: float
    alpha: float

    def __post_init__(self) -> None:
        if not (self.K > 0 and self.alpha > 0):
            raise ValueError("envelope needs K > 0 and alpha > 0")

    def __call__(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        with np.errstate(divide="ignore"):
            return self.K * np.minimum(np.power(u, -self.alpha), 1.0)


class Kernel:
    """Base class. Subclasses set ``support``, ``breakpoints`` and ``_eval``."""

    support: tuple[float, float]
    # interior points where f is not smooth; quadrature splits there
    breakpoints: tuple[float, ...] = ()
    # piecewise linear kernels get exact Gauss-Legendre instead of adaptive quad
    piecewise_linear: bool = False

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.support
        inside = (s >= lo) & (s <= hi)
        out = np.zeros(s.shape)
        if np.any(inside):
            out[inside] = self._eval(s[inside])
        return float(out) if out.ndim == 0 else out

    def _eval(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def closed_product(self, shifts: Sequence[np.ndarray]) -> np.ndarray | None:
        """Closed-form product integral, or ``None`` when unavailable."""
        return None

    @property
    def analytic_envelope(self) -> Envelope | None:
        return None

    def truncate(self, m: float) -> "Kernel":
        return Truncated(self, m)

    def to_config(self) -> dict[str, Any]:
        raise NotImplementedError


def _envelope_field(value) -> Envelope | None:
    if value is None or isinstance(value, Envelope):
        return value
    return Envelope(**value)


def _exp_product(a: float, cut: float, shifts: Sequence[np.ndarray]) -> np.ndarray:
    """``int prod_i g(u + s_i) du`` for ``g(s) = exp(-a s) 1[0 <= s <= cut]``."""
    s = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in shifts])
    k = len(s)
    stacked = np.stack(s)
    smin = stacked.min(axis=0)
    smax = stacked.max(axis=0)
    # integrand is exp(-a (k u + sum s)) on [-min s, cut - max s]
    spread = (stacked - smin).sum(axis=0)
    width = cut - (smax - smin)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(-a * spread) * -np.expm1(-a * k * np.maximum(width, 0.0)) / (a * k)
    out = np.where(width > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OU(Kernel):
    """``f(s) = exp(-a s)`` for ``s >= 0``."""

    a: float
    envelope: Envelope | None = None
    breakpoints: tuple[float, ...] = field(default=(0.0,), init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError("OU kernel needs a > 0")
        object.__setattr__(self, "envelope", _envelope_field(self.envelope))

    @property
    def support(self):
        return (0.0, math.inf)

    def _eval(self, s):
        return np.exp(-self.a * s)

    def closed_product(self, shifts):
        return _exp_product(self.a, math.inf, shifts)

    @property
    def analytic_envelope(self):
        # sup_u u^2 exp(-a u) = (2 / (a e))^2
        return Envelope(max(1.0, (2.0 / (self.a * math.e)) ** 2), 2.0)

    def truncate(self, m):
        return TruncatedOU(self.a, m, envelope=self.envelope)

    def to_config(self):
        return {"type": "ou", "a": self.a}


@dataclass(frozen=True)
class TruncatedOU(Kernel):
    """OU kernel times the indicator of ``[-m/2, m/2]``."""

    a: float
    m: float
    envelope: Envelope | None = None

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.m > 0):
            raise ValueError("TruncatedOU needs a > 0 and m > 0")
        object.__setattr__(self, "envelope", _envelope_field(self.envelope))

    @property
    def support(self):
        return (0.0, self.m / 2)

    @property
    def breakpoints(self):
        return (0.0, self.m / 2)

    def _eval(self, s):
        return np.exp(-self.a * s)

    def closed_product(self, shifts):
        return _exp_product(self.a, self.m / 2, shifts)

    @property
    def analytic_envelope(self):
        return OU(self.a).analytic_envelope

    def truncate(self, m):
        return TruncatedOU(self.a, min(m, self.m), envelope=self.envelope)

    def to_config(self):
        return {"type": "truncated_ou", "a": self.a, "m": self.m}


@dataclass(frozen=True)
class PolyDecay(Kernel):
    """Symmetric ``f(s) = K * min(|s|^-alpha, 1)``; square integrable iff ``alpha > 1/2``."""

    K: float
    alpha: float
    breakpoints: tuple[float, ...] = field(default=(-1.0, 1.0), init=False, repr=False)

    def __post_init__(self) -> None:
        if not (self.K > 0 and self.alpha > 0):
            raise ValueError("PolyDecay needs K > 0 and alpha > 0")

    @property
    def support(self):
        return (-math.inf, math.inf)

    @property
    def envelope(self):
        return Envelope(self.K, self.alpha)

    def _eval(self, s):
        with np.errstate(divide="ignore"):
            return self.K * np.minimum(np.power(np.abs(s), -self.alpha), 1.0)

    def to_config(self):
        return {"type": "poly_decay", "K": self.K, "alpha": self.alpha}


@dataclass(frozen=True, eq=False)
class Tabulated(Kernel):
    """Linear interpolation through ``(s_i, f_i)``, zero outside ``[s_0, s_last]``."""

    s: np.ndarray
    f: np.ndarray
    envelope: Envelope | None = None
    source: str | None = None
    piecewise_linear: bool = field(default=True, init=False, repr=False)

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if s.ndim != 1 or s.shape != f.shape or s.size < 2:
            raise ValueError("tabulated kernel needs two equal-length columns with at least 2 rows")
        if not np.all(np.diff(s) > 0):
            raise ValueError("tabulated grid must be strictly increasing")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(f))):
            raise ValueError("tabulated kernel values must be finite")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "envelope", _envelope_field(self.envelope))

    @property
    def support(self):
        return (float(self.s[0]), float(self.s[-1]))

    @property
    def breakpoints(self):
        return tuple(self.s.tolist())

    def _eval(self, s):
        return np.interp(s, self.s, self.f)

    def to_config(self):
        cfg: dict[str, Any] = {"type": "tabulated"}
        if self.source is not None:
            cfg["path"] = self.source
        else:
            cfg["s"] = self.s.tolist()
            cfg["f"] = self.f.tolist()
        return cfg


@dataclass(frozen=True)
class Truncated(Kernel):
    """Any kernel times the indicator of ``[-m/2, m/2]``."""

    base: Kernel
    m: float

    def __post_init__(self) -> None:
        if not self.m > 0:
            raise ValueError("truncation width m must be positive")

    @property
    def support(self):
        lo, hi = self.base.support
        return (max(lo, -self.m / 2), min(hi, self.m / 2))

    @property
    def breakpoints(self):
        return tuple(self.base.breakpoints) + (-self.m / 2, self.m / 2)

    @property
    def piecewise_linear(self):
        return self.base.piecewise_linear

    @property
    def envelope(self):
        return getattr(self.base, "envelope", None)

    @property
    def analytic_envelope(self):
        return self.base.analytic_envelope

    def _eval(self, s):
        return np.asarray(self.base(s), dtype=float)

    def truncate(self, m):
        return Truncated(self.base, min(m, self.m))

    def to_config(self):
        return {"type": "truncated", "base": self.base.to_config(), "m": self.m}


@dataclass(frozen=True)
class ZeroKernel(Kernel):
    """The zero function, support ``[0, 0]``."""

    envelope: Envelope | None = None

    @property
    def support(self):
        return (0.0, 0.0)

    def _eval(self, s):
        return np.zeros(np.shape(s))

    def closed_product(self, shifts):
        out = np.zeros(np.broadcast(*[np.asarray(x) for x in shifts]).shape)
        return float(out) if out.ndim == 0 else out

    @property
    def analytic_envelope(self):
        return Envelope(1.0, 2.0)

    def truncate(self, m):
        return self

    def to_config(self):
        return {"type": "zero"}


# ---------------------------------------------------------------------------
# product integrals


def _quad_product(kernel: Kernel, shifts: tuple[float, ...], tol: float) -> float:
    lo_k, hi_k = kernel.support
    lo = max(lo_k - s for s in shifts)
    hi = min(hi_k - s for s in shifts)
    if not lo < hi:
        return 0.0
    cuts = {b - s for b in kernel.breakpoints for s in shifts}
    edges = [lo] + sorted(c for c in cuts if lo < c < hi) + [hi]

    def integrand(u):
        val = 1.0
        for s in shifts:
            val *= kernel(u + s)
        return val

    if kernel.piecewise_linear:
        a = np.asarray(edges[:-1])
        b = np.asarray(edges[1:])
        mid, half = (a + b) / 2, (b - a) / 2
        u = mid[:, None] + half[:, None] * _GL_X[None, :]
        vals = np.ones(u.shape)
        for s in shifts:
            vals *= kernel(u + s)
        return float(np.sum(half[:, None] * _GL_W[None, :] * vals))

    total = 0.0
    piece_tol = tol / max(1, len(edges) - 1)
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            res = integrate.quad(integrand, a, b, epsabs=piece_tol, epsrel=1e-12, limit=400, full_output=1)
        value, err = res[0], res[1]
        if len(res) > 3 and err > piece_tol * 10 and err > 1e-12 * abs(value):
            raise QuadratureNotConverged(
                f"product integral on [{a}, {b}] with shifts {shifts} did not converge: "
                f"estimate {value}, error {err}"
            )
        total += value
    return total


def product_integral(kernel: Kernel, shifts: Sequence, method: str = "auto", tol: float = QUAD_TOL):
    """``int prod_i f(u + shifts[i]) du``, vectorized over broadcast shift arrays.

    ``method`` is ``"auto"`` (closed form when the shape has one), ``"closed"``
    or ``"quadrature"``.
    """
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method != "quadrature":
        closed = kernel.closed_product(shifts)
        if closed is not None:
            return closed
        if method == "closed":
            raise ValueError(f"{type(kernel).__name__} has no closed-form product integral")
    arrays = np.broadcast_arrays(*[np.asarray(s, dtype=float) for s in shifts])
    out = np.empty(arrays[0].shape)
    for idx in np.ndindex(out.shape):
        out[idx] = _quad_product(kernel, tuple(float(a[idx]) for a in arrays), tol)
    return float(out) if out.ndim == 0 else out


def bilinear_F(kernel: Kernel, s, t, method: str = "auto"):
    """``F(s, t) = int f(u + s) f(u + t) du``."""
    return product_integral(kernel, (s, t), method=method)


def truncate(kernel: Kernel, m: float) -> Kernel:
    if not m > 0:
        raise ValueError("truncation width m must be positive")
    return kernel.truncate(m)


# ---------------------------------------------------------------------------
# decay conditions


class Purpose(enum.Enum):
    SAMPLE_MEAN = "sample_mean"
    AUTOCOVARIANCE = "autocovariance"

    @property
    def alpha_threshold(self) -> float:
        return 1.0 if self is Purpose.SAMPLE_MEAN else 0.5


@dataclass(frozen=True)
class CheckReport:
    purpose: Purpose
    envelope: Envelope
    condition_holds: bool
    envelope_verified: bool
    violations: int
    worst_ratio: float

    @property
    def passed(self) -> bool:
        return self.condition_holds and self.envelope_verified


def decay_check(kernel: Kernel, purpose: Purpose | str) -> CheckReport:
    """Check the polynomial-decay sufficient condition for the mean or autocovariance CLT.

    Needs ``|f(u)| <= K min(|u|^-alpha, 1)`` with ``alpha > 1`` for the sample mean
    and ``alpha > 1/2`` for autocovariances. The inequality is verified only at
    :data:`ENVELOPE_NODES` (10^4 log-spaced points on ``[1e-6, 1e6]``, mirrored,
    plus 0). A failed report is advisory; the condition is sufficient, not necessary.
    """
    purpose = Purpose(purpose)
    env = getattr(kernel, "envelope", None) or kernel.analytic_envelope
    if env is None:
        raise EnvelopeMissing(f"{type(kernel).__name__} kernel has no envelope; supply one")
    values = np.abs(kernel(ENVELOPE_NODES))
    bound = env(ENVELOPE_NODES)
    bad = values > bound * (1 + 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, values / bound, np.where(values > 0, np.inf, 0.0))
    return CheckReport(
        purpose=purpose,
        envelope=env,
        condition_holds=env.alpha > purpose.alpha_threshold,
        envelope_verified=not bool(bad.any()),
        violations=int(bad.sum()),
        worst_ratio=float(ratio.max()),
    )


# ---------------------------------------------------------------------------
# configuration


def load_tabulated(path: str | Path, envelope: Envelope | dict | None = None) -> Tabulated:
    """Read a two-column ``s,f`` CSV; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ValueError(f"{path}: malformed row {i + 1}: {row!r}") from None
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two rows of s,f")
    return Tabulated(data[:, 0], data[:, 1], envelope=_envelope_field(envelope), source=str(path))


def kernel_from_config(cfg: dict[str, Any], base_dir: str | Path | None = None) -> Kernel:
    """Build a kernel from ``{"type": "ou", "a": 1.0}`` style dicts.

    Tabulated paths are resolved relative to ``base_dir`` when given.
    """
    cfg = dict(cfg)
    kind = cfg.pop("type", None)
    env = cfg.pop("envelope", None)
    try:
        if kind == "ou":
            return OU(cfg.pop("a"), envelope=env, **cfg)
        if kind == "truncated_ou":
            return TruncatedOU(cfg.pop("a"), cfg.pop("m"), envelope=env, **cfg)
        if kind == "poly_decay":
            return PolyDecay(**cfg)
        if kind == "zero":
            return ZeroKernel(**cfg)
        if kind == "truncated":
            return Truncated(kernel_from_config(cfg.pop("base"), base_dir), cfg.pop("m"), **cfg)
        if kind == "tabulated":
            if "path" in cfg:
                path = Path(cfg.pop("path"))
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                if cfg:
                    raise TypeError(f"unexpected keys {sorted(cfg)}")
                return load_tabulated(path, envelope=env)
            return Tabulated(cfg.pop("s"), cfg.pop("f"), envelope=env, **cfg)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad parameters for kernel {kind!r}: {exc}") from None
    raise ValueError(
        f"unknown kernel type {kind!r}; expected ou, truncated_ou, poly_decay, tabulated, truncated or zero"
    )
