"""Gaussian heat-kernel arithmetic and quadrature checks of its product identities.

The kernel is ``p_r(z) = exp(-z**2 / (2 r)) / sqrt(2 pi r)``, the transition
density of Brownian motion at time ``r``.  Products are formed in log space and
exponentiated last so that identities involving many small factors remain
checkable far into the tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import DomainError, QuadratureError

__all__ = [
    "InitialData",
    "heat_kernel",
    "log_heat_kernel",
    "convolve_initial",
    "product_identity_residual",
    "squared_kernel_mass",
    "squared_kernel_mass_quadrature",
    "squared_identity_residual",
    "TRUNCATION_SIGMAS",
    "normal_sf",
]

LOG_2PI = math.log(2.0 * math.pi)
EPS = np.finfo(float).eps

# Gaussian mass beyond 8 standard deviations is below 1e-15.
TRUNCATION_SIGMAS = 8.0


def _check_time(r):
    if np.any(np.asarray(r) <= 0):
        raise DomainError(f"heat kernel time must be positive, got {r!r}")


def log_heat_kernel(r, z):
    """Natural log of ``p_r(z)``; broadcasts over array arguments."""
    _check_time(r)
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    out = -0.5 * z * z / r - 0.5 * (LOG_2PI + np.log(r))
    return out if out.ndim else float(out)


def heat_kernel(r, z):
    """Heat kernel ``p_r(z)``.

    Raises DomainError when ``r <= 0``.

    >>> round(heat_kernel(1.0, 0.0), 10)
    0.3989422804
    """
    out = np.exp(log_heat_kernel(r, z))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class InitialData:
    """A bounded, non-random initial profile ``u0``.

    ``kind`` is one of ``constant`` (value ``level``), ``step`` (``level`` on
    ``(x0, inf)``, ``base`` below ``x0`` and their mean at ``x0``), ``bump`` (``base + level`` times a
    unit Gaussian bump of width ``width`` centred at ``x0``) or ``function``
    (an arbitrary vectorised callable with declared ``bounds``).
    """

    kind: str = "constant"
    level: float = 0.0
    base: float = 0.0
    x0: float = 0.0
    width: float = 1.0
    func: Callable | None = None
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "step", "bump", "function"):
            raise DomainError(f"unknown initial-data kind {self.kind!r}")
        if self.kind == "function" and (self.func is None or self.bounds is None):
            raise DomainError("function initial data needs func and bounds")

    @classmethod
    def constant(cls, rho):
        return cls("constant", level=float(rho))

    @classmethod
    def step(cls, level=1.0, x0=0.0, base=0.0):
        return cls("step", level=float(level), x0=float(x0), base=float(base))

    @classmethod
    def from_config(cls, cfg):
        if isinstance(cfg, (int, float)):
            return cls.constant(cfg)
        cfg = dict(cfg)
        kind = cfg.pop("kind", "constant")
        if kind == "function":
            raise DomainError("function initial data cannot come from a config file")
        return cls(kind, **{k: float(v) for k, v in cfg.items()})

    def to_config(self):
        if self.kind == "function":
            raise DomainError("function initial data is not serialisable")
        return {"kind": self.kind, "level": self.level, "base": self.base,
                "x0": self.x0, "width": self.width}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.level)
        if self.kind == "step":
            # the jump point takes the mean, i.e. the average over a cell centred on it
            mid = 0.5 * (self.level + self.base)
            return np.where(x > self.x0, self.level, np.where(x == self.x0, mid, self.base))
        if self.kind == "bump":
            return self.base + self.level * np.exp(-0.5 * ((x - self.x0) / self.width) ** 2)
        return np.asarray(self.func(x), dtype=float)

    @property
    def inf(self):
        """``rho``, the infimum of the profile."""
        if self.kind == "constant":
            return self.level
        if self.kind == "step":
            return min(self.level, self.base)
        if self.kind == "bump":
            return min(self.base, self.base + self.level)
        return self.bounds[0]

    @property
    def sup_norm(self):
        if self.kind == "constant":
            return abs(self.level)
        if self.kind == "step":
            return max(abs(self.level), abs(self.base))
        if self.kind == "bump":
            return max(abs(self.base), abs(self.base + self.level))
        return max(abs(self.bounds[0]), abs(self.bounds[1]))

    @property
    def breakpoints(self):
        return (self.x0,) if self.kind == "step" else ()


def convolve_initial(u0, t, x, quad_tol=1e-10, breakpoints: Sequence[float] = ()):
    """``(p_t * u0)(x)`` by adaptive Gauss-Kronrod quadrature.

    ``u0`` is an InitialData or a bounded callable.  The line is truncated at
    eight kernel widths around ``x``.  Discontinuities of ``u0`` should be
    listed in ``breakpoints`` (InitialData supplies its own).
    """
    _check_time(t)
    if isinstance(u0, InitialData):
        if u0.kind == "constant":
            return u0.level
        breakpoints = tuple(breakpoints) + u0.breakpoints
    half = TRUNCATION_SIGMAS * math.sqrt(t)
    lo, hi = x - half, x + half
    pts = sorted(b for b in breakpoints if lo < b < hi)

    def f(y):
        return heat_kernel(t, y - x) * float(np.asarray(u0(np.array([y])))[0])

    total, err = 0.0, 0.0
    edges = [lo, *pts, hi]
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=quad_tol, limit=200)
        total += val
        err += e
    if err > quad_tol * max(abs(total), 1e-300) * 10 and err > 1e-14:
        raise QuadratureError(
            f"initial-data convolution reached only {err:.3g} absolute error", achieved=err
        )
    return total


def product_identity_residual(t, s, x, y, z):
    """Relative residual of ``p_{t-s}(x-y) p_s(y-z) = p_t(x-z) p_{s(t-s)/t}(y-z-(s/t)(x-z))``.

    Returns ``|LHS - RHS| / max(LHS, eps)``.
    """
    if not 0 < s < t:
        raise DomainError(f"need 0 < s < t, got s={s!r}, t={t!r}")
    log_lhs = log_heat_kernel(t - s, x - y) + log_heat_kernel(s, y - z)
    log_rhs = log_heat_kernel(t, x - z) + log_heat_kernel(
        s * (t - s) / t, y - z - (s / t) * (x - z)
    )
    lhs = math.exp(log_lhs)
    if lhs >= EPS:
        return abs(math.expm1(log_rhs - log_lhs))
    return abs(lhs - math.exp(log_rhs)) / EPS


def squared_kernel_mass(t, r):
    """``int_0^r ds int dy p_{t-s}(y)^2 = sqrt(t/pi) - sqrt((t-r)/pi)`` for ``0 < r <= t``."""
    if not 0 < r <= t:
        raise DomainError(f"need 0 < r <= t, got r={r!r}, t={t!r}")
    return (math.sqrt(t) - math.sqrt(t - r)) / math.sqrt(math.pi)


def _squared_line_integral(tau, tol):
    half = TRUNCATION_SIGMAS * math.sqrt(tau)
    val, _ = integrate.quad(
        lambda y: heat_kernel(tau, y) ** 2, -half, half, epsabs=0.0, epsrel=tol, limit=200
    )
    return val


def squared_kernel_mass_quadrature(t, r, tol=1e-11):
    """Nested-quadrature cross-check of :func:`squared_kernel_mass`.

    Both the inner line integral and the outer time integral are done
    numerically; the outer integrand has an integrable singularity at
    ``s = t`` which QUADPACK's extrapolation absorbs.
    """
    if not 0 < r <= t:
        raise DomainError(f"need 0 < r <= t, got r={r!r}, t={t!r}")
    val, err = integrate.quad(
        lambda s: _squared_line_integral(t - s, tol) if s < t else 0.0,
        0.0, r, epsabs=0.0, epsrel=tol, limit=400,
    )
    if err > 1e3 * tol * abs(val):
        raise QuadratureError(f"squared kernel mass quadrature error {err:.3g}", achieved=err)
    return val


def squared_identity_residual(t, s, r, x, z, tol=1e-12):
    """Relative residual of the squared-kernel product identity.

    Compares the quadrature of ``int p_{t-s}(x-y)^2 p_{s-r}(y-z)^2 dy`` with
    ``sqrt((t-r) / (4 pi (t-s)(s-r))) p_{t-r}(x-z)^2``.  The integrand is
    divided by the closed form inside the log so that the computed ratio is
    O(1) regardless of how small both sides are.
    """
    if not 0 <= r < s < t:
        raise DomainError(f"need 0 <= r < s < t, got r={r!r}, s={s!r}, t={t!r}")
    a, b = t - s, s - r
    log_rhs = 0.5 * math.log((t - r) / (4.0 * math.pi * a * b)) + 2.0 * log_heat_kernel(
        t - r, x - z
    )
    # the integrand is a Gaussian in y centred between x and z
    centre = (b * x + a * z) / (a + b)
    width = math.sqrt(a * b / (2.0 * (a + b)))
    half = TRUNCATION_SIGMAS * 1.5 * width
    lo, hi = centre - half, centre + half

    def f(y):
        return math.exp(
            2.0 * log_heat_kernel(a, x - y) + 2.0 * log_heat_kernel(b, y - z) - log_rhs
        )

    ratio, err = integrate.quad(f, lo, hi, points=[centre], epsabs=0.0, epsrel=tol, limit=200)
    if err > 1e-6:
        raise QuadratureError(f"squared identity quadrature error {err:.3g}", achieved=err)
    return abs(ratio - 1.0)


def normal_sf(x):
    """Standard normal survival function."""
    return ndtr(-np.asarray(x, dtype=float))
