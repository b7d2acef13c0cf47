"""Drift and diffusion function specifications.

A drift ``b`` must be positive, nondecreasing and locally Lipschitz on the
whole line; a diffusion ``sigma`` must be Lipschitz and pinned between two
positive constants.  Families are named so that configuration files can refer
to them, and each drift family carries a certificate for the tail behaviour of
``1/b`` which decides the Osgood integral without guessing from samples.

Polynomial families use the positive part ``u+ = max(u, 0)`` so that, e.g.,
``power`` is ``offset + (u+)**p``: identical to ``1 + u**p`` on the half line
where the Osgood integral lives, and genuinely nondecreasing on all of R.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError

__all__ = [
    "DriftSpec",
    "DiffusionSpec",
    "OsgoodVerdict",
    "ValidationReport",
    "osgood_integral",
    "truncate",
    "validate",
    "validation_grid",
    "DRIFT_FAMILIES",
    "DIFFUSION_FAMILIES",
]

DRIFT_FAMILIES = ("constant", "affine", "power", "monomial", "exponential",
                  "logistic-cap", "table", "truncated")
DIFFUSION_FAMILIES = ("constant", "sine", "tanh", "table")

# (family, params) defaults when a config omits trailing parameters
_DEFAULT_PARAMS = {
    "constant": (1.0,),
    "affine": (1.0, 1.0),        # beta, offset
    "power": (2.0, 1.0),         # p, offset
    "monomial": (2.0, 1.0),      # p, kappa
    "exponential": (1.0, 1.0),   # rate, scale
    "logistic-cap": (1.0, 1.0),  # cap, rate
}


def _pos(u):
    return np.maximum(u, 0.0)


@dataclass(frozen=True)
class DriftSpec:
    """A named drift family with parameters.

    ``table`` drifts interpolate ``(u, b(u))`` pairs linearly and extend flat
    to the left; to the right they extend linearly with the last slope.
    ``truncated`` drifts wrap another spec in ``min(base(u), level)``.
    """

    family: str
    params: tuple = ()
    table: tuple | None = None
    base: "DriftSpec | None" = None
    level: float | None = None
    _p: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        if self.family not in DRIFT_FAMILIES:
            raise DomainError(f"unknown drift family {self.family!r}")
        params = tuple(float(v) for v in self.params)
        default = _DEFAULT_PARAMS.get(self.family, ())
        if len(params) > len(default) and self.family in _DEFAULT_PARAMS:
            raise DomainError(f"{self.family} takes at most {len(default)} parameters")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "_p", params + default[len(params):])
        if self.family == "table":
            if not self.table or len(self.table) < 2:
                raise DomainError("table drift needs at least two (u, b) pairs")
            tab = tuple(sorted((float(u), float(b)) for u, b in self.table))
            object.__setattr__(self, "table", tab)
        if self.family == "truncated" and (self.base is None or self.level is None):
            raise DomainError("truncated drift needs a base spec and a level")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        f, p = self.family, self._p
        with np.errstate(over="ignore"):
            if f == "constant":
                out = np.full_like(u, p[0])
            elif f == "affine":
                out = p[1] + p[0] * _pos(u)
            elif f == "power":
                out = p[1] + _pos(u) ** p[0]
            elif f == "monomial":
                out = p[1] * _pos(u) ** p[0]
            elif f == "exponential":
                out = p[1] * np.exp(p[0] * u)
            elif f == "logistic-cap":
                out = p[0] / (1.0 + np.exp(-p[1] * u))
            elif f == "table":
                us, bs = np.array(self.table).T
                slope = (bs[-1] - bs[-2]) / (us[-1] - us[-2])
                out = np.interp(u, us, bs)
                out = np.where(u > us[-1], bs[-1] + slope * (u - us[-1]), out)
            else:
                out = np.minimum(self.base(u), self.level)
        return out if out.ndim else float(out)

    def bnb_form(self, u):
        """``(b(u) + n - |b(u) - n|) / 2`` for a truncated spec.

        Evaluated in exact rational arithmetic and rounded once, so it agrees
        bit for bit with ``min(b(u), n)``; the naive float expression is off
        by a few ulps.
        """
        if self.family != "truncated":
            raise DomainError("bnb_form is defined for truncated drifts only")
        b = np.asarray(self.base(u), dtype=float)
        n = Fraction(self.level)
        flat = [float((Fraction(v) + n - abs(Fraction(v) - n)) / 2) if math.isfinite(v)
                else float(n) for v in b.ravel().tolist()]
        out = np.array(flat).reshape(b.shape)
        return out if out.ndim else float(out)

    @property
    def declared_global_lipschitz(self):
        """True when the family is globally Lipschitz by construction."""
        f, p = self.family, self._p
        if f in ("constant", "affine", "logistic-cap", "truncated"):
            return True
        if f in ("power", "monomial"):
            return p[0] == 1.0
        return False

    @property
    def positive_by_construction(self):
        """Families whose positivity survives floating-point underflow to 0."""
        f, p = self.family, self._p
        if f == "truncated":
            return self.level > 0 and self.base.positive_by_construction
        return (f == "exponential" and p[1] > 0) or (f == "logistic-cap" and p[0] > 0)

    def tail(self):
        """Tail certificate of ``1/b`` on ``[1, inf)``.

        Returns ``(status, description)`` with status ``finite``,
        ``divergent`` or ``undecided``.
        """
        f, p = self.family, self._p
        if f == "constant":
            return "divergent", f"b(y) = {p[0]:g} is bounded"
        if f == "affine":
            return "divergent", f"b(y) <= {p[0] + abs(p[1]):g} y for y >= 1"
        if f in ("power", "monomial"):
            kappa = 1.0 if f == "power" else p[1]
            if p[0] > 1.0:
                return "finite", f"b(y) >= {kappa:g} y^{p[0]:g} for y >= 0, exponent 1+{p[0] - 1:g}"
            return "divergent", f"b(y) <= {abs(p[1]) + kappa:g} y for y >= 1"
        if f == "exponential":
            if p[0] > 0:
                return "finite", f"b(y) >= {p[1] * p[0] ** 2 / 2:g} y^2 for y >= 0 (exp series)"
            return "divergent", "b(y) bounded for y >= 0"
        if f == "logistic-cap":
            return "divergent", f"b(y) <= {p[0]:g} is bounded"
        if f == "truncated":
            return "divergent", f"b(y) <= {self.level:g} is bounded"
        return "undecided", "table-backed drift: tail beyond the last entry is unknown"

    def to_config(self):
        if self.family == "truncated":
            return {"family": "truncated", "base": self.base.to_config(), "level": self.level}
        cfg = {"family": self.family, "params": list(self.params)}
        if self.table is not None:
            cfg["table"] = [list(row) for row in self.table]
        return cfg

    @classmethod
    def from_config(cls, cfg, location="drift"):
        if not isinstance(cfg, dict) or "family" not in cfg:
            raise ConfigError("expected an object with a 'family' key", location)
        unknown = set(cfg) - {"family", "params", "table", "base", "level"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", location)
        try:
            if cfg["family"] == "truncated":
                return truncate(cls.from_config(cfg.get("base"), location + ".base"),
                                float(cfg["level"]))
            table = cfg.get("table")
            return cls(cfg["family"], tuple(cfg.get("params", ())),
                       table=tuple(map(tuple, table)) if table else None)
        except ConfigError:
            raise
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), location) from exc


@dataclass(frozen=True)
class DiffusionSpec:
    """A diffusion coefficient with certified bounds ``0 < c1 <= sigma <= c2``."""

    family: str
    params: tuple = ()
    c1: float = 1.0
    c2: float = 1.0
    table: tuple | None = None

    def __post_init__(self):
        if self.family not in DIFFUSION_FAMILIES:
            raise DomainError(f"unknown diffusion family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if self.family == "table":
            if not self.table or len(self.table) < 2:
                raise DomainError("table diffusion needs at least two (u, sigma) pairs")
            object.__setattr__(self, "table",
                               tuple(sorted((float(u), float(s)) for u, s in self.table)))

    @classmethod
    def constant(cls, c):
        return cls("constant", (c,), c1=c, c2=c)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        p = self.params
        if self.family == "constant":
            out = np.full_like(u, p[0] if p else self.c1)
        elif self.family == "sine":
            out = p[0] + p[1] * np.sin(u)
        elif self.family == "tanh":
            out = p[0] + p[1] * np.tanh(u)
        else:
            us, ss = np.array(self.table).T
            out = np.interp(u, us, ss)
        return out if out.ndim else float(out)

    @property
    def lipschitz(self):
        p = self.params
        if self.family == "constant":
            return 0.0
        if self.family in ("sine", "tanh"):
            return abs(p[1])
        us, ss = np.array(self.table).T
        return float(np.max(np.abs(np.diff(ss) / np.diff(us))))

    @property
    def is_constant(self):
        return self.family == "constant"

    def to_config(self):
        cfg = {"family": self.family, "params": list(self.params), "c1": self.c1, "c2": self.c2}
        if self.table is not None:
            cfg["table"] = [list(row) for row in self.table]
        return cfg

    @classmethod
    def from_config(cls, cfg, location="diffusion"):
        if isinstance(cfg, (int, float)):
            return cls.constant(float(cfg))
        if not isinstance(cfg, dict) or "family" not in cfg:
            raise ConfigError("expected a number or an object with a 'family' key", location)
        unknown = set(cfg) - {"family", "params", "c1", "c2", "table"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", location)
        try:
            params = tuple(cfg.get("params", ()))
            if cfg["family"] == "constant" and "c1" not in cfg:
                c = float(params[0]) if params else 1.0
                return cls.constant(c)
            table = cfg.get("table")
            return cls(cfg["family"], params, c1=float(cfg["c1"]), c2=float(cfg["c2"]),
                       table=tuple(map(tuple, table)) if table else None)
        except (DomainError, KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError(str(exc), location) from exc


@dataclass(frozen=True)
class OsgoodVerdict:
    """Outcome of the Osgood test ``int_lower^inf dy / b(y) < inf``."""

    status: str  # "finite" | "divergent" | "undecided"
    value: float
    lower_limit: float
    tail_bound_used: str
    error: float = 0.0

    @property
    def finite(self):
        """True, False, or None when undecided."""
        return None if self.status == "undecided" else self.status == "finite"

    def to_dict(self):
        return {"status": self.status, "finite": self.finite,
                "value": self.value if math.isfinite(self.value) else "inf",
                "lower_limit": self.lower_limit, "tail_bound_used": self.tail_bound_used,
                "error": self.error}


def osgood_integral(b: DriftSpec, lower=1.0, tol=1e-10) -> OsgoodVerdict:
    """Decide and, when finite, evaluate ``int_lower^inf dy / b(y)``.

    The decision comes from the family's tail certificate; only then is the
    integral computed numerically (QUADPACK on the infinite range).
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    status, why = b.tail()
    if status != "finite":
        value = math.inf if status == "divergent" else math.nan
        return OsgoodVerdict(status, value, float(lower), why)
    with np.errstate(over="ignore"):
        val, err = integrate.quad(lambda y: 1.0 / b(y), lower, math.inf,
                                  epsabs=tol / 10, epsrel=0.0, limit=400)
    return OsgoodVerdict("finite", val, float(lower), why, error=err)


def truncate(b: DriftSpec, n) -> DriftSpec:
    """``b ∧ n``: globally Lipschitz, positive and nondecreasing whenever ``b`` is."""
    if not n > 0:
        raise DomainError(f"truncation level must be positive, got {n!r}")
    return DriftSpec("truncated", base=b, level=float(n))


def validation_grid(n=4096, extent=1e6, inner=1e-6):
    """Symmetric geometric grid on ``[-extent, extent]`` with ``n`` points."""
    half = np.geomspace(inner, extent, n // 2)
    return np.concatenate([-half[::-1], half])


@dataclass
class ValidationReport:
    accepted: bool
    checks: dict
    violations: list
    lipschitz_estimate: float
    local_lipschitz_estimate: float
    global_lipschitz: bool
    rejected_claims: list = field(default_factory=list)

    def to_dict(self):
        return {"accepted": self.accepted, "checks": self.checks,
                "rejected_claims": self.rejected_claims,
                "violations": self.violations,
                "lipschitz_estimate": _jsonable(self.lipschitz_estimate),
                "local_lipschitz_estimate": _jsonable(self.local_lipschitz_estimate),
                "global_lipschitz": self.global_lipschitz}


def _jsonable(x):
    return x if math.isfinite(x) else "inf"


def _difference_quotients(f, grid):
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.asarray(f(grid), dtype=float)
        q = np.abs(np.diff(v)) / np.diff(grid)
    q = np.where(np.isnan(q), np.inf, q)
    return v, q


def validate(spec, grid=None, compact=10.0, claim_global_lipschitz=False,
             max_violations=10) -> ValidationReport:
    """Sample-based check of the standing assumptions on a drift or diffusion.

    Drifts: positivity, monotonicity, finite difference quotients on
    ``[-compact, compact]`` (local Lipschitz) and, if the family claims it,
    bounded quotients on the whole grid.  Diffusions: ``c1 <= sigma <= c2``
    with ``c1 > 0`` and a finite global Lipschitz estimate.

    A drift only needs to be locally Lipschitz, so a failed
    ``claim_global_lipschitz`` is reported in ``rejected_claims`` without
    rejecting the drift itself.
    """
    grid = validation_grid() if grid is None else np.asarray(grid, dtype=float)
    local = np.linspace(-compact, compact, 2001)
    violations = []
    checks = {}
    values, quot = _difference_quotients(spec, grid)
    _, local_quot = _difference_quotients(spec, local)
    lip = float(np.max(quot))
    local_lip = float(np.max(local_quot))

    def flag(name, bad_idx, points, vals):
        checks[name] = not len(bad_idx)
        for i in bad_idx[:max_violations]:
            violations.append({"check": name, "u": float(points[i]), "value": float(vals[i])})

    if isinstance(spec, DriftSpec):
        with np.errstate(invalid="ignore"):
            decreasing = np.flatnonzero(np.diff(values) < 0)
        nonpositive = ~(values > 0)
        if spec.positive_by_construction:
            underflow = values == 0.0
            if underflow.any():
                checks["underflow_points"] = int(underflow.sum())
            nonpositive &= ~underflow
        flag("positive", np.flatnonzero(nonpositive), grid, values)
        flag("nondecreasing", decreasing, grid, values)
        checks["locally_lipschitz"] = bool(np.isfinite(local_lip))
        global_lip = bool(np.isfinite(lip))
    elif isinstance(spec, DiffusionSpec):
        checks["c1_positive"] = spec.c1 > 0 and spec.c1 <= spec.c2
        flag("lower_bound", np.flatnonzero(values < spec.c1), grid, values)
        flag("upper_bound", np.flatnonzero(values > spec.c2), grid, values)
        checks["global_lipschitz"] = bool(np.isfinite(lip))
        global_lip = checks["global_lipschitz"]
    else:
        raise DomainError(f"cannot validate {type(spec).__name__}")
    accepted = all(v for k, v in checks.items() if isinstance(v, bool))
    rejected = []
    if claim_global_lipschitz and not global_lip:
        rejected.append("global_lipschitz")
    return ValidationReport(accepted, checks, violations, lip, local_lip, global_lip, rejected)
