"""Explicit finite-difference solver for ``du = (1/2) u'' dt + b(u) dt + sigma(u) W(dt dx)``.

One step is

    u_j <- (1 - lam) u_j + (lam/2)(u_{j+1} + u_{j-1}) + dt b(u_j) + sigma(u_j) dW_j / dx

with ``lam = dt / dx**2 <= 1``.  Written this way every operation is monotone
in ``u`` when ``sigma`` is constant, so the comparison property of the
continuous equation also holds exactly in floating point.

A truncation ladder solves the equation for the drifts ``b ^ n`` on one
shared noise lattice.  All levels are advanced together as rows of one
array; a single solve is the ladder with one level.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .convolution import layer_times
from .drift import DiffusionSpec, DriftSpec, truncate
from .errors import DomainError, InvariantError
from .kernel import InitialData, convolve_initial, heat_kernel
from .noise import GridSpec, generate_cells
from .ode import HittingProblem, hitting_time

__all__ = [
    "SpdeProblem",
    "Trajectory",
    "LadderResult",
    "ScanRow",
    "BlowupScan",
    "solve",
    "minimal_ladder",
    "blowup_scan",
    "mild_residual",
    "KERNEL_MASS",
    "DEFAULT_CEILING",
]

DEFAULT_CEILING = 1e12
# mass of the unit-time kernel on [0, 1/2]; the lower-bound constant of the
# drift comparison argument
KERNEL_MASS = float(ndtr(0.5) - 0.5)
_NOISE_BLOCK = 256  # time rows generated per noise block


@dataclass(frozen=True)
class SpdeProblem:
    """Drift, diffusion, initial data, lattice, boundary and seed of one run."""

    drift: DriftSpec
    diffusion: DiffusionSpec
    u0: InitialData
    grid: GridSpec
    boundary: str = "periodic"
    seed: int = 0
    stream: int = 0
    ceiling: float = DEFAULT_CEILING

    def __post_init__(self):
        if self.boundary not in ("periodic", "reflecting"):
            raise DomainError(f"unknown boundary {self.boundary!r}")
        if self.grid.dt > self.grid.dx**2 * (1 + 1e-12):
            raise DomainError(
                f"explicit scheme needs dt <= dx^2 (dt={self.grid.dt}, dx={self.grid.dx})"
            )
        if self.grid.n_x < 3:
            raise DomainError("the spatial lattice needs at least three nodes")
        if not self.ceiling > 0:
            raise DomainError("ceiling must be positive")

    @property
    def rho(self):
        return self.u0.inf

    @property
    def middle(self):
        """Index slice of the middle half of the domain, where statistics are taken."""
        n = self.grid.n_x
        return slice(n // 4, n - n // 4)

    def with_drift(self, drift):
        return SpdeProblem(drift, self.diffusion, self.u0, self.grid, self.boundary,
                           self.seed, self.stream, self.ceiling)

    def with_seed(self, seed, stream=None):
        return SpdeProblem(self.drift, self.diffusion, self.u0, self.grid, self.boundary,
                           int(seed), self.stream if stream is None else int(stream),
                           self.ceiling)

    def to_config(self):
        return {
            "drift": self.drift.to_config(),
            "diffusion": self.diffusion.to_config(),
            "u0": self.u0.to_config(),
            "grid": self.grid.to_config(),
            "boundary": self.boundary,
            "seed": self.seed,
            "stream": self.stream,
            "ceiling": self.ceiling,
        }


@dataclass
class Trajectory:
    """Solution frames every ``stride`` steps plus per-step summaries.

    ``sup`` and ``inf`` are taken over the middle half of the domain at
    every lattice time up to ``n_steps``.  When the ceiling is hit the run
    stops at that step; ``ceiling_hits`` lists the offending ``(t, x)``.
    """

    grid: GridSpec
    stride: int
    frames: np.ndarray
    frame_times: np.ndarray
    times: np.ndarray
    sup: np.ndarray
    inf: np.ndarray
    ceiling_hits: list = field(default_factory=list)

    @property
    def n_steps(self):
        return len(self.times) - 1

    @property
    def stopped(self):
        return bool(self.ceiling_hits)

    def frame_at(self, t):
        k = int(np.argmin(np.abs(self.frame_times - t)))
        if not math.isclose(self.frame_times[k], t, rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError(f"no stored frame at t={t}")
        return self.frames[k]

    def first_time_at_least(self, level):
        """First lattice time with ``sup >= level``, or None."""
        hit = np.flatnonzero(self.sup >= level)
        return float(self.times[hit[0]]) if len(hit) else None

    def save(self, prefix):
        """Write ``prefix.npy`` (frames) and ``prefix.csv`` (summary); returns both paths."""
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        npy = prefix.with_suffix(".npy")
        np.save(npy, self.frames)
        path = prefix.with_suffix(".csv")
        hit_steps = {int(round(t / self.grid.dt)) for t, _ in self.ceiling_hits}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t [time]", "sup_u [field]", "inf_u [field]", "ceiling_hit [flag]"])
            for k, (t, s, i) in enumerate(zip(self.times, self.sup, self.inf)):
                w.writerow([f"{t:.17g}", f"{s:.17g}", f"{i:.17g}", int(k in hit_steps)])
        return npy, path


def _laplace_neighbours(u, boundary):
    if boundary == "periodic":
        return np.roll(u, -1, axis=-1) + np.roll(u, 1, axis=-1)
    right = np.empty_like(u)
    left = np.empty_like(u)
    right[..., :-1] = u[..., 1:]
    right[..., -1] = u[..., -2]
    left[..., 1:] = u[..., :-1]
    left[..., 0] = u[..., 1]
    return right + left


def _require_lipschitz(drift):
    if not drift.declared_global_lipschitz:
        raise DomainError(
            f"drift family {drift.family!r} is only locally Lipschitz; truncate it first"
        )


def _run(p: SpdeProblem, drifts: Sequence[DriftSpec], stride=1, n_steps=None,
         monotone_tol=None):
    """Advance one row per drift on the shared noise of ``p``.

    With ``monotone_tol`` set, rows must be pointwise nondecreasing
    (``u[i] <= u[k] + tol (1 + |u|)`` for ``i < k``) at every live step.
    """
    for b in drifts:
        _require_lipschitz(b)
    g = p.grid
    n_steps = g.n_t if n_steps is None else n_steps
    if not 0 < n_steps <= g.n_t:
        raise DomainError(f"n_steps must be in [1, {g.n_t}]")
    if stride < 1:
        raise DomainError("stride must be at least 1")
    L = len(drifts)
    lam = g.dt / g.dx**2
    x = g.x
    u = np.tile(np.asarray(p.u0(x), dtype=float), (L, 1))
    mid = p.middle
    n_frames = n_steps // stride + 1
    frames = np.empty((L, n_frames, g.n_x))
    frames[:, 0] = u
    sup = np.full((L, n_steps + 1), np.nan)
    inf = np.full((L, n_steps + 1), np.nan)
    sup[:, 0] = u[:, mid].max(axis=1)
    inf[:, 0] = u[:, mid].min(axis=1)
    alive = np.ones(L, dtype=bool)
    last = np.full(L, n_steps)
    hits: list[list] = [[] for _ in range(L)]
    sigma_const = p.diffusion.is_constant
    sig_c = float(p.diffusion(0.0)) if sigma_const else None
    block = None
    for m in range(n_steps):
        if m % _NOISE_BLOCK == 0:
            stop = min(m + _NOISE_BLOCK, n_steps)
            block = generate_cells(g, p.seed, (m, stop), (0, g.n_x), stream=p.stream) / g.dx
        dw = block[m % _NOISE_BLOCK]
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = (1.0 - lam) * u + (0.5 * lam) * _laplace_neighbours(u, p.boundary)
            for i, b in enumerate(drifts):
                if alive[i]:
                    nxt[i] += g.dt * b(u[i])
            nxt += (sig_c * dw) if sigma_const else p.diffusion(u) * dw
        for i in np.flatnonzero(alive):
            row = nxt[i]
            if np.isnan(row).any():
                j = int(np.flatnonzero(np.isnan(row))[0])
                raise InvariantError(f"NaN in solution at step {m + 1}, node {j}",
                                     witness=(m + 1, j))
            over = np.flatnonzero(row >= p.ceiling)
            if len(over):
                t_hit = (m + 1) * g.dt
                hits[i] = [(t_hit, float(x[j])) for j in over]
                alive[i] = False
                last[i] = m
        u = np.where(alive[:, None], nxt, u)
        if monotone_tol is not None and L > 1:
            _check_monotone(u, alive, monotone_tol, m + 1)
        live = alive
        sup[live, m + 1] = u[live][:, mid].max(axis=1)
        inf[live, m + 1] = u[live][:, mid].min(axis=1)
        if (m + 1) % stride == 0:
            frames[:, (m + 1) // stride] = u
        if not alive.any():
            break
    out = []
    for i in range(L):
        k = last[i]
        nf = k // stride + 1
        out.append(Trajectory(grid=g, stride=stride, frames=frames[i, :nf].copy(),
                              frame_times=g.dt * stride * np.arange(nf),
                              times=g.dt * np.arange(k + 1), sup=sup[i, : k + 1].copy(),
                              inf=inf[i, : k + 1].copy(), ceiling_hits=hits[i]))
    return out


def _check_monotone(u, alive, tol, step):
    live = np.flatnonzero(alive)
    for a_i, a in enumerate(live):
        for b in live[a_i + 1:]:
            slack = tol * (1.0 + np.abs(u[b]))
            bad = np.flatnonzero(u[a] > u[b] + slack)
            if len(bad):
                j = int(bad[0])
                raise InvariantError(
                    f"ladder monotonicity broken between rows {a} and {b} at step {step}, "
                    f"node {j}: {u[a, j]!r} > {u[b, j]!r}",
                    witness=(step, j),
                )


def solve(p: SpdeProblem, stride=1, n_steps=None) -> Trajectory:
    """Solve on the whole lattice horizon; the drift must be globally Lipschitz."""
    return _run(p, [p.drift], stride=stride, n_steps=n_steps)[0]


def default_threshold(n):
    return n / 2.0


@dataclass
class LadderResult:
    """Trajectories for each truncation level, all driven by one noise lattice."""

    levels: np.ndarray
    trajectories: list
    thresholds: np.ndarray
    escalation: list

    def strictly_decreasing(self):
        """True when escalation times fall strictly with the level (unreached = inf)."""
        times = [math.inf if t is None else t for t in self.escalation]
        return all(a > b for a, b in zip(times[:-1], times[1:]))

    def sup_at(self, t):
        """``sup_x u^(n)(t)`` over the middle half, per level."""
        k = self.trajectories[0].grid.time_index(t)
        out = []
        for tr in self.trajectories:
            out.append(float(tr.sup[k]) if k <= tr.n_steps else math.inf)
        return np.array(out)


def minimal_ladder(p: SpdeProblem, levels: Sequence[float],
                   threshold_rule: Callable[[float], float] | None = None, stride=1,
                   tol_mono=1e-9, check_monotone=True, n_steps=None) -> LadderResult:
    """Solve with ``b ^ n`` for every ``n`` in ``levels`` on the noise of ``p``.

    Pointwise monotonicity in ``n`` is checked at every lattice cell while
    all rows are below the ceiling; a violation beyond
    ``tol_mono (1 + |u|)`` raises InvariantError with the offending cell.
    """
    levels = np.asarray(levels, dtype=float)
    if len(levels) == 0 or np.any(np.diff(levels) < 0) or np.any(levels <= 0):
        raise DomainError("levels must be positive and nondecreasing")
    rule = default_threshold if threshold_rule is None else threshold_rule
    drifts = [truncate(p.drift, n) for n in levels]
    trajs = _run(p, drifts, stride=stride, n_steps=n_steps,
                 monotone_tol=tol_mono if check_monotone else None)
    thresholds = np.array([rule(n) for n in levels], dtype=float)
    esc = [tr.first_time_at_least(th) for tr, th in zip(trajs, thresholds)]
    return LadderResult(levels=levels, trajectories=trajs, thresholds=thresholds, escalation=esc)


@dataclass
class ScanRow:
    level: float
    threshold: float
    tau: float | None
    prediction: float

    @property
    def reached(self):
        return self.tau is not None

    def to_dict(self):
        return {"level": self.level, "threshold": self.threshold, "reached": self.reached,
                "tau": self.tau,
                "osgood_prediction": None if math.isinf(self.prediction) else self.prediction}


@dataclass
class BlowupScan:
    rows: list
    M: float
    rho: float
    seed: int

    @property
    def taus(self):
        return [r.tau for r in self.rows]

    def to_dict(self):
        return {"seed": self.seed, "M": self.M, "rho": self.rho,
                "kernel_mass": KERNEL_MASS, "rows": [r.to_dict() for r in self.rows]}


def osgood_prediction(b, A, N, scale=KERNEL_MASS):
    """``int_A^N ds / (scale b(s))``; zero when ``N <= A``."""
    if not math.isfinite(N):
        return math.inf
    if N <= A:
        return 0.0
    return hitting_time(HittingProblem(b, A, N, scale=scale))


def blowup_scan(p: SpdeProblem, levels: Sequence[float],
                threshold_rule: Callable[[float], float] | None = None, M=1.0,
                check_monotone=True) -> BlowupScan:
    """First time ``sup_x u^(n) >= threshold(n)`` per level, with the ODE prediction.

    The prediction is the time for ``G' = l b(G)`` to rise from ``M + rho``
    to the threshold, where ``l`` is :data:`KERNEL_MASS`.
    """
    ladder = minimal_ladder(p, levels, threshold_rule, check_monotone=check_monotone,
                            stride=max(p.grid.n_t, 1))
    A = M + p.rho
    rows = [ScanRow(float(n), float(th), tau, osgood_prediction(p.drift, A, th))
            for n, th, tau in zip(ladder.levels, ladder.thresholds, ladder.escalation)]
    return BlowupScan(rows=rows, M=float(M), rho=float(p.rho), seed=p.seed)


def mild_residual(p: SpdeProblem, traj: Trajectory, t, x_index=None):
    """``u(t,x) - (p_t * u0)(x) - drift term - noise term`` on the lattice.

    Both integral terms are kernel-weighted sums over the cells ``s < t``
    with the isometric layer times; the trajectory must store every step.
    """
    if traj.stride != 1:
        raise DomainError("mild_residual needs a trajectory stored at every step")
    g = p.grid
    n = g.time_index(t)
    if not 1 <= n <= traj.n_steps:
        raise DomainError(f"t={t} outside the stored trajectory")
    j = g.n_x // 2 if x_index is None else int(x_index)
    x = g.x[j]
    tau = layer_times(g, n, "isometric")[:, None]
    d = g.x[None, :] - x
    if p.boundary == "periodic":
        d = (d + 0.5 * g.length) % g.length - 0.5 * g.length
    w = heat_kernel(tau, d)
    u_hist = traj.frames[:n]
    drift = float(np.sum(w * p.drift(u_hist)) * g.dt * g.dx)
    dw = generate_cells(g, p.seed, (0, n), (0, g.n_x), stream=p.stream)
    noise = float(np.sum(w * p.diffusion(u_hist) * dw))
    init = convolve_initial(p.u0, t, x)
    return float(traj.frames[n, j]) - init - drift - noise
