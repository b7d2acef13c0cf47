"""Hitting times for the comparison ODE ``G' = B(G)``, ``G(0) = A``.

If ``F(t) >= A + int_0^t B(F(s)) ds`` on ``[0, 2T]`` with
``T = int_A^N ds / B(s)``, then ``F >= N`` on ``[T, 2T]``.  This module
computes ``T``, integrates the extremal solution ``G`` and checks the lower
bound on sampled trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, QuadratureError, StepSizeError

__all__ = [
    "HittingProblem",
    "ComparisonTrajectory",
    "LowerBoundCheck",
    "hitting_time",
    "solve_comparison",
    "verify_lower_bound",
]


@dataclass(frozen=True)
class HittingProblem:
    """Rise of ``G' = scale * B(G)`` from level ``A`` to level ``N`` (possibly ``inf``)."""

    B: object
    A: float
    N: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.N > self.A >= 0):
            raise DomainError(f"need N > A >= 0, got A={self.A}, N={self.N}")
        if not self.scale > 0:
            raise DomainError("scale must be positive")
        probe = np.linspace(self.A, self.A + 1.0 if math.isinf(self.N) else self.N, 257)
        if np.any(~(np.asarray(self.B(probe)) > 0)):
            raise DomainError("B must be positive on [A, N]")

    def rate(self, g):
        return self.scale * float(self.B(g))


def _inverse_time(p: HittingProblem, lo, hi, tol):
    """``int_lo^hi ds / (scale * B(s))``."""
    if hi <= lo:
        return 0.0
    # geometric panels so that a peaked 1/B near lo is not missed on long ranges
    span = hi - lo
    if span > 2.0:
        edges = lo + np.concatenate([[0.0], np.geomspace(1.0, span, int(np.log2(span)) + 2)])
    else:
        edges = np.array([lo, hi])
    val, err = 0.0, 0.0
    with np.errstate(over="ignore"):
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(lambda s: 1.0 / p.rate(s), a, b,
                                  epsabs=0.0, epsrel=tol, limit=400)
            val += v
            err += e
    if err > max(100 * tol * abs(val), 1e-13):
        raise QuadratureError(f"hitting-time quadrature error {err:.3g}", achieved=err)
    return val


def hitting_time(p: HittingProblem, tol=1e-10):
    """``T = int_A^N ds / B(s)``; ``inf`` when ``N = inf`` and the tail diverges.

    For ``N = inf`` the decision uses the tail certificate of ``B`` (a
    :class:`~shelab.drift.DriftSpec`); an undecidable tail raises DomainError.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if math.isfinite(p.N):
        return _inverse_time(p, p.A, p.N, tol)
    tail = getattr(p.B, "tail", None)
    if tail is None:
        raise DomainError("N = inf needs a B with a tail certificate")
    status, _ = tail()
    if status == "divergent":
        return math.inf
    if status == "undecided":
        raise DomainError("tail of 1/B is undecided; cannot integrate to infinity")
    with np.errstate(over="ignore"):
        val, err = integrate.quad(lambda s: 1.0 / p.rate(s), p.A, math.inf,
                                  epsabs=tol / 10, epsrel=tol, limit=400)
    return val


@dataclass
class ComparisonTrajectory:
    """Lattice samples of ``G`` capped at ``N`` once reached."""

    t: np.ndarray
    G: np.ndarray
    N: float
    reached: bool
    hit_time: float | None
    switch_time: float | None = None

    def __len__(self):
        return len(self.t)


def _rk4(p, g, h):
    k1 = p.rate(g)
    k2 = p.rate(g + 0.5 * h * k1)
    k3 = p.rate(g + 0.5 * h * k2)
    k4 = p.rate(g + h * k3)
    return g + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def solve_comparison(p: HittingProblem, horizon, dt, tol=1e-12, max_refine=30):
    """Integrate ``G(t) = A + int_0^t B(G)`` on the lattice ``k dt <= horizon``.

    RK4 with substeps halved while ``B(G) h > 0.01 G``; once a full lattice
    step would raise ``G`` by more than 10% the solver switches to the
    inverse form ``t(G) = t_s + int_{G_s}^G ds / B(s)`` and solves for ``G``.
    The crossing of ``N`` is located with the same inverse form, so
    ``hit_time`` does not carry the lattice error.
    """
    if not (horizon > 0 and dt > 0):
        raise DomainError("horizon and dt must be positive")
    n_steps = int(math.floor(horizon / dt + 1e-9))
    t = dt * np.arange(n_steps + 1)
    G = np.empty(n_steps + 1)
    G[0] = p.A
    N = p.N
    g = p.A
    reached, hit_time, switch = False, None, None
    for k in range(1, n_steps + 1):
        if reached:
            G[k] = N
            continue
        if switch is None and p.rate(g) * dt > 0.1 * max(abs(g), 1.0):
            switch = (t[k - 1], g)
        if switch is None:
            sub, refine = 1, 0
            while p.rate(g) * dt / sub > 0.01 * max(abs(g), 1.0):
                sub *= 2
                refine += 1
                if refine > max_refine:
                    raise StepSizeError(f"step refinement limit reached at t={t[k - 1]:.6g}")
            h = dt / sub
            g_new = g
            for _ in range(sub):
                g_new = _rk4(p, g_new, h)
            if not math.isfinite(g_new):
                raise StepSizeError(f"non-finite RK4 step at t={t[k - 1]:.6g}")
        else:
            t_s, g_s = switch
            elapsed = t[k] - t_s
            if math.isfinite(N) and elapsed >= _inverse_time(p, g_s, N, tol):
                g_new = N
            else:
                upper = g_s + max(1.0, abs(g_s))
                while _inverse_time(p, g_s, upper, tol) < elapsed:
                    upper = g_s + 2 * (upper - g_s)
                    if upper > 1e300:
                        raise StepSizeError(f"solution escaped to infinity by t={t[k]:.6g}")
                g_new = optimize.brentq(lambda v: _inverse_time(p, g_s, v, tol) - elapsed,
                                        g_s, upper, xtol=1e-14 * upper, rtol=1e-15)
        if g_new >= N:
            hit_time = t[k - 1] + _inverse_time(p, g, N, tol)
            reached = True
            g_new = N
        G[k] = g = g_new
    return ComparisonTrajectory(t=t, G=G, N=N, reached=reached, hit_time=hit_time,
                                switch_time=None if switch is None else switch[0])


@dataclass
class LowerBoundCheck:
    """Outcome of :func:`verify_lower_bound`.

    ``holds`` is the conclusion ``inf_[T,2T] F >= N`` (up to ``tolerance``);
    ``status`` is ``confirmed`` when the hypothesis held and the conclusion
    followed, ``hypothesis-failed`` when the hypothesis broke at
    ``witness``, and ``counterexample`` when the hypothesis held but the
    conclusion did not.
    """

    holds: bool
    status: str
    witness: float | None
    T: float
    inf_on_window: float
    tolerance: float
    first_reach: float | None

    def __bool__(self):
        return self.holds


def verify_lower_bound(F, p: HittingProblem, t=None, tol=None) -> LowerBoundCheck:
    """Check the integral hypothesis and the ``[T, 2T]`` lower bound on a sampled ``F``.

    ``F`` is a ComparisonTrajectory or an array of samples on the lattice
    ``t``.  The hypothesis is tested in its capped form
    ``F(t) >= min(N, A + int_0^t B(min(F, N)) ds)`` (trapezoid rule), which
    every solution of the original inequality satisfies and which also holds
    for trajectories stored capped at ``N``.
    """
    if isinstance(F, ComparisonTrajectory):
        t, values = F.t, F.G
    else:
        if t is None:
            raise DomainError("sample times t are required for an array trajectory")
        t, values = np.asarray(t, dtype=float), np.asarray(F, dtype=float)
    if not math.isfinite(p.N):
        raise DomainError("verify_lower_bound needs a finite target level N")
    T = hitting_time(p)
    dt = float(np.max(np.diff(t)))
    if t[0] != 0.0 or t[-1] < 2 * T - 1e-12 * T:
        raise DomainError(f"trajectory covers [{t[0]}, {t[-1]}], need [0, {2 * T:.6g}]")
    N = p.N
    capped = np.minimum(values, N)
    rates = p.scale * np.asarray(p.B(capped), dtype=float)
    if tol is None:
        tol = N * 1e-6 + 10 * dt * float(np.max(rates))
    integral = integrate.cumulative_trapezoid(rates, t, initial=0.0)
    rhs = np.minimum(N, p.A + integral)
    bad = np.flatnonzero(values < rhs - tol)
    witness = float(t[bad[0]]) if len(bad) else None
    window = (t >= T - 1e-12 * T) & (t <= 2 * T + 1e-12 * T)
    inf_window = float(np.min(values[window]))
    holds = inf_window >= N - tol
    if len(bad):
        status = "hypothesis-failed"
    else:
        status = "confirmed" if holds else "counterexample"
        if not holds:
            witness = float(t[window][np.argmin(values[window])])
    reach = np.flatnonzero(values >= N - tol)
    first = float(t[reach[0]]) if len(reach) else None
    return LowerBoundCheck(holds, status, witness, T, inf_window, tol, first)
