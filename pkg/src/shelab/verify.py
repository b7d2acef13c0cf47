"""Monte Carlo checks of tail, moment, covariance and growth statements for ``I_Z``.

For a constant integrand ``Z = c`` the convolution is a centred Gaussian
field with

    Cov[I(t1, x1), I(t2, x2)] = c^2 int_0^{min(t1,t2)} p_{t1+t2-2s}(x1 - x2) ds,

which supplies exact oracles for every statistic here.  Simultaneous checks
use 99% confidence with a Bonferroni split over the grid of checks.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, stats
from scipy.special import gamma, log_ndtr, ndtri

from .convolution import Integrand, sample_at_points, stochastic_convolution
from .errors import DomainError
from .kernel import TRUNCATION_SIGMAS, normal_sf
from .noise import GridSpec, generate

__all__ = [
    "SCHEMA_VERSION",
    "G_FUNCTIONS",
    "TailReport",
    "MomentReport",
    "CovarianceReport",
    "StationarityReport",
    "GrowthReport",
    "tail_report",
    "spatial_moment_report",
    "temporal_moment_report",
    "combined_modulus_report",
    "covariance_decay",
    "covariance_oracle",
    "increment_variance",
    "stationarity_test",
    "growth_scan",
    "lattice_for",
    "write_report",
]

SCHEMA_VERSION = 1
CONFIDENCE = 0.99

G_FUNCTIONS: dict[str, Callable] = {
    "identity": lambda v: v,
    "abs": np.abs,
    "relu": lambda v: np.maximum(v, 0.0),
    "tanh": np.tanh,
    "sin": np.sin,
    "zero": np.zeros_like,
}


# ---------------------------------------------------------------- oracles

def covariance_oracle(c, p, q):
    """Exact ``Cov[I(p), I(q)]`` for ``Z = c``; points are ``(t, x)``."""
    (t1, x1), (t2, x2) = p, q
    lo = min(t1, t2)
    if lo <= 0:
        return 0.0
    d = x1 - x2
    if abs(d) < 1e-200:
        d = 0.0  # the O(|d|) correction is far below double precision
    gap = abs(t1 - t2)
    if d == 0.0:
        # int_0^lo (2 pi (gap + 2u))^{-1/2} du in closed form
        val = (math.sqrt(gap + 2 * lo) - math.sqrt(gap)) / math.sqrt(2 * math.pi)
    else:
        # v = gap + 2u = w^2 turns p_v(d) dv / 2 into the bounded exp(-d^2 / 2w^2) dw / sqrt(2 pi)
        a, b = math.sqrt(gap), math.sqrt(gap + 2 * lo)
        # geometric panels from |d|, where the integrand rises from 0 to 1
        edges = [a] + [w for w in abs(d) * 2.0 ** np.arange(0, 64) if a < w < b] + [b]
        val = sum(integrate.quad(lambda w: math.exp(-0.5 * (d / w) ** 2) if w > 0 else 0.0,
                                 lo_w, hi_w, epsabs=1e-16, epsrel=1e-13, limit=200)[0]
                  for lo_w, hi_w in zip(edges[:-1], edges[1:]))
        val /= math.sqrt(2 * math.pi)
    return c * c * val


def increment_variance(c, p, q):
    """``Var[I(p) - I(q)]`` for ``Z = c``."""
    return (covariance_oracle(c, p, p) + covariance_oracle(c, q, q)
            - 2 * covariance_oracle(c, p, q))


def gaussian_abs_moment(var, k):
    """``E|X|^k`` for ``X ~ N(0, var)``."""
    return var ** (k / 2) * 2 ** (k / 2) * gamma((k + 1) / 2) / math.sqrt(math.pi)


def lattice_for(points, dt=None, dx=None):
    """A lattice covering the kernel support of every ``(t, x)`` in ``points``.

    ``dt`` defaults to the largest of ``0.02 / 2^k`` dividing every time;
    ``dx`` defaults to ``sqrt(dt) / 2``, which keeps the spatial Poisson
    error of the narrowest layer near ``1e-4``.
    """
    ts = [t for t, _ in points]
    xs = [x for _, x in points]
    if min(ts) <= 0:
        raise DomainError("evaluation times must be positive")
    if dt is None:
        dt = 0.02
        while not all(abs(t / dt - round(t / dt)) < 1e-9 for t in ts):
            dt /= 2
            if dt < 1e-7:
                raise DomainError(f"no dyadic time step divides the times {ts}")
    if dx is None:
        dx = math.sqrt(dt) / 2
    t_max = max(ts)
    half = TRUNCATION_SIGMAS * math.sqrt(t_max) + dx
    n_t = int(round(t_max / dt))
    x_lo = min(xs) - half
    n_x = int(math.ceil((max(xs) + half - x_lo) / dx)) + 1
    return GridSpec(dt=dt, dx=dx, n_t=n_t, n_x=n_x, x_min=x_lo)


# ---------------------------------------------------------------- reports

class _Report:
    schema = "report"

    def to_dict(self):
        d = _jsonable(asdict(self))
        return {"schema": self.schema, "schema_version": SCHEMA_VERSION, **d}

    def rows(self):  # pragma: no cover - overridden
        return [], []


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def write_report(report, prefix):
    """Write ``prefix.json`` and ``prefix.csv``; returns both paths."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    jpath = prefix.with_suffix(".json")
    tmp = jpath.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    tmp.replace(jpath)
    header, rows = report.rows()
    cpath = prefix.with_suffix(".csv")
    tmp = cpath.with_suffix(".csv.tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"# schema={report.schema} version={SCHEMA_VERSION}"])
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    tmp.replace(cpath)
    return jpath, cpath


@dataclass
class TailReport(_Report):
    """Empirical ``P{I(t,0) >= (t/pi)^{1/4} lambda}`` against the Gaussian oracle."""

    t: float
    c: float
    reps: int
    lambda_grid: list
    empirical: list
    wilson_low: list
    wilson_high: list
    oracle: list
    lower_bound: list
    upper_bound: list
    C1: float
    C2: float
    underpowered: list
    within: list
    confidence: float
    sample_variance: float
    oracle_variance: float
    schema = "tail"

    @property
    def passed(self):
        return all(w or u for w, u in zip(self.within, self.underpowered))

    def rows(self):
        header = ["lambda [1]", "empirical [prob]", "wilson_low [prob]", "wilson_high [prob]",
                  "oracle [prob]", "lower_bound [prob]", "upper_bound [prob]",
                  "underpowered [flag]", "within [flag]"]
        return header, list(zip(self.lambda_grid, self.empirical, self.wilson_low,
                                self.wilson_high, self.oracle, self.lower_bound,
                                self.upper_bound, self.underpowered, self.within))


def fitted_tail_constants(c, lam_max=50.0, n=20001):
    """Best constants ``C1 <= C2`` in ``C / (1 + l) exp(-l^2 / (2 c^2))`` around ``P(N(0,c^2) >= l)``."""
    lam = np.linspace(0.0, lam_max, n)
    log_ratio = log_ndtr(-lam / c) + np.log1p(lam) + lam**2 / (2 * c * c)
    ratio = np.exp(log_ratio)
    # the ratio tends to c / sqrt(2 pi) as l -> infinity
    limit = c / math.sqrt(2 * math.pi)
    return float(min(ratio.min(), limit)), float(max(ratio.max(), limit))


def tail_report(c, t, lambdas, reps, seed, dt=None, dx=None, rule="isometric",
                confidence=CONFIDENCE) -> TailReport:
    if reps < 1000:
        raise DomainError("tail_report needs at least 1000 replicates")
    if not c > 0:
        raise DomainError("c must be positive")
    lambdas = [float(v) for v in lambdas]
    grid = lattice_for([(t, 0.0)], dt=dt, dx=dx)
    samples = sample_at_points(Integrand.constant(c), grid, [(t, 0.0)], reps, seed, rule=rule)[:, 0]
    scale = (t / math.pi) ** 0.25
    level = 1 - (1 - confidence) / max(len(lambdas), 1)
    C1, C2 = fitted_tail_constants(c)
    emp, lo, hi, orc, lb, ub, under, within = [], [], [], [], [], [], [], []
    for lam in lambdas:
        k = int(np.count_nonzero(samples >= scale * lam))
        ci = stats.binomtest(k, reps).proportion_ci(level, method="wilson")
        o = float(normal_sf(lam / c))
        emp.append(k / reps)
        lo.append(float(ci.low))
        hi.append(float(ci.high))
        orc.append(o)
        shape = math.exp(-lam * lam / (2 * c * c)) / (1 + lam)
        lb.append(C1 * shape)
        ub.append(C2 * shape)
        under.append(reps * o < 10)
        within.append(ci.low <= o <= ci.high)
    return TailReport(t=t, c=c, reps=reps, lambda_grid=lambdas, empirical=emp, wilson_low=lo,
                      wilson_high=hi, oracle=orc, lower_bound=lb, upper_bound=ub, C1=C1, C2=C2,
                      underpowered=under, within=within, confidence=level,
                      sample_variance=float(np.var(samples)),
                      oracle_variance=c * c * math.sqrt(t / math.pi))


@dataclass
class MomentReport(_Report):
    """Normalised increment moments ``E|(I(p) - I(q)) / norm|^k`` with bootstrap upper limits."""

    direction: str
    c0: float
    reps: int
    k_list: list
    pairs: list
    separations: list
    empirical: list           # [pair][k]
    upper_limit: list         # [pair][k]
    oracle: list              # [pair][k], Gaussian moment for Z = c0
    bound: list               # [k]
    unstable: list            # [pair][k]
    confidence: float
    schema = "moments"

    @property
    def passed(self):
        return all(u <= self.bound[i] or bad
                   for ul, fl in zip(self.upper_limit, self.unstable)
                   for i, (u, bad) in enumerate(zip(ul, fl)))

    def rows(self):
        header = ["pair [index]", "separation [metric]", "k [1]", "empirical [moment]",
                  "upper_limit [moment]", "oracle [moment]", "bound [moment]", "unstable [flag]"]
        out = []
        for i, sep in enumerate(self.separations):
            for j, k in enumerate(self.k_list):
                out.append([i, sep, k, self.empirical[i][j], self.upper_limit[i][j],
                            self.oracle[i][j], self.bound[j], self.unstable[i][j]])
        return header, out


def _bootstrap_upper(values, level, seed):
    res = stats.bootstrap((values,), np.mean, confidence_level=level, n_resamples=2000,
                          method="percentile", alternative="less", batch=100,
                          random_state=np.random.default_rng(seed), vectorized=True)
    return float(res.confidence_interval.high)


def _moment_report(direction, c0, pairs, norms, k_list, reps, seed, bound_fn, dt, dx, Z):
    k_list = [float(k) for k in k_list]
    if any(k < 2 for k in k_list):
        raise DomainError("moment order k must be at least 2")
    Z = Integrand.constant(c0) if Z is None else Z
    if max(abs(Z.c1), abs(Z.c2)) > c0 * (1 + 1e-12):
        raise DomainError("integrand bound exceeds c0")
    points = sorted({pt for pair in pairs for pt in pair})
    index = {pt: i for i, pt in enumerate(points)}
    grid = lattice_for(points, dt=dt, dx=dx)
    samples = sample_at_points(Z, grid, points, reps, seed)
    level = 1 - (1 - CONFIDENCE) / (len(pairs) * len(k_list))
    emp, upper, orc, unstable = [], [], [], []
    for pi, ((p, q), norm) in enumerate(zip(pairs, norms)):
        inc = np.abs(samples[:, index[p]] - samples[:, index[q]]) / norm
        var = increment_variance(c0, p, q) / norm**2 if Z.kind == "constant" else math.nan
        row_e, row_u, row_o, row_f = [], [], [], []
        for ki, k in enumerate(k_list):
            vals = inc**k
            row_e.append(float(vals.mean()))
            row_u.append(_bootstrap_upper(vals, level, seed + 7919 * pi + ki))
            row_o.append(gaussian_abs_moment(var, k) if Z.kind == "constant"
                         else math.nan)
            row_f.append(bool(k > 8 or vals.max() > 0.1 * vals.sum()))
        emp.append(row_e)
        upper.append(row_u)
        orc.append(row_o)
        unstable.append(row_f)
    return MomentReport(direction=direction, c0=c0, reps=reps, k_list=k_list,
                        pairs=[list(map(list, pq)) for pq in pairs],
                        separations=[float(n) for n in norms], empirical=emp,
                        upper_limit=upper, oracle=orc, bound=[bound_fn(k) for k in k_list],
                        unstable=unstable, confidence=level)


def spatial_moment_report(c0, t, pairs, k_list, reps, seed, dt=None, dx=None, Z=None):
    """Spatial bound ``E|(I(t,x) - I(t,z)) / |x-z|^{1/2}|^k <= (2 c0^2 k)^{k/2}``."""
    pts = []
    norms = []
    for x, z in pairs:
        if x == z:
            raise DomainError("spatial pairs need x != z")
        pts.append(((float(t), float(x)), (float(t), float(z))))
        norms.append(abs(x - z) ** 0.5)
    return _moment_report("spatial", c0, pts, norms, k_list, reps, seed,
                          lambda k: (2 * c0 * c0 * k) ** (k / 2), dt, dx, Z)


def temporal_moment_report(c0, x, t_pairs, k_list, reps, seed, dt=None, dx=None, Z=None):
    """Bound ``E|(I(t+h,x) - I(t,x)) / h^{1/4}|^k <= (5 c0^2 k)^{k/2}``."""
    pts = []
    norms = []
    for t, s in t_pairs:
        if t == s:
            raise DomainError("temporal pairs need distinct times")
        pts.append(((float(t), float(x)), (float(s), float(x))))
        norms.append(abs(t - s) ** 0.25)
    return _moment_report("temporal", c0, pts, norms, k_list, reps, seed,
                          lambda k: (5 * c0 * c0 * k) ** (k / 2), dt, dx, Z)


def parabolic_metric(p, q):
    """``|dt|^{1/4} + |dx|^{1/2}``."""
    return abs(p[0] - q[0]) ** 0.25 + abs(p[1] - q[1]) ** 0.5


def combined_modulus_report(c0, window, k_list, reps, seed, dt=None, dx=None, Z=None):
    """Bound ``E|(I(p) - I(q)) / rho(p - q)|^k <= (13 c0)^k k^{k/2}`` over pairs in ``window``.

    ``window`` is a sequence of ``((t1, x1), (t2, x2))`` pairs.
    """
    pts = []
    norms = []
    for p, q in window:
        p = (float(p[0]), float(p[1]))
        q = (float(q[0]), float(q[1]))
        r = parabolic_metric(p, q)
        if r == 0:
            raise DomainError("combined pairs need distinct points")
        pts.append((p, q))
        norms.append(r)
    return _moment_report("combined", c0, pts, norms, k_list, reps, seed,
                          lambda k: (13 * c0) ** k * k ** (k / 2), dt, dx, Z)


@dataclass
class CovarianceReport(_Report):
    """Empirical ``Cov[g(I(t,x)), g(I(t,0))]`` with normal-approximation intervals."""

    t: float
    c: float
    reps: int
    x_list: list
    g_names: list
    empirical: list      # [g][x]
    half_width: list     # [g][x]
    oracle: list         # [x], identity g only
    within: list         # [g][x], identity: oracle inside the interval
    below_floor: list    # [g][x]: |empirical| <= half width
    confidence: float
    schema = "covariance"

    def rows(self):
        header = ["g [name]", "x [space]", "empirical [cov]", "half_width [cov]",
                  "oracle [cov]", "within [flag]", "below_floor [flag]"]
        out = []
        for gi, name in enumerate(self.g_names):
            for xi, x in enumerate(self.x_list):
                orc = self.oracle[xi] if name == "identity" else None
                out.append([name, x, self.empirical[gi][xi], self.half_width[gi][xi], orc,
                            self.within[gi][xi], self.below_floor[gi][xi]])
        return header, out


def covariance_decay(c, t, x_list, g_specs=("identity",), reps=10_000, seed=0,
                     dt=None, dx=None) -> CovarianceReport:
    names = []
    for g in g_specs:
        if g not in G_FUNCTIONS:
            raise DomainError(f"unknown g {g!r}; choose from {sorted(G_FUNCTIONS)}")
        names.append(g)
    x_list = [float(x) for x in x_list]
    points = [(float(t), 0.0)] + [(float(t), x) for x in x_list]
    grid = lattice_for(points, dt=dt, dx=dx)
    samples = sample_at_points(Integrand.constant(c), grid, points, reps, seed)
    level = 1 - (1 - CONFIDENCE) / (len(names) * len(x_list))
    z = float(ndtri(0.5 + level / 2))
    oracle = [covariance_oracle(c, (t, x), (t, 0.0)) for x in x_list]
    emp, hw, within, floor = [], [], [], []
    for name in names:
        g = G_FUNCTIONS[name]
        base = g(samples[:, 0])
        base = base - base.mean()
        re, rh, rw, rf = [], [], [], []
        for xi in range(len(x_list)):
            other = g(samples[:, xi + 1])
            prod = (other - other.mean()) * base
            cov = float(prod.sum() / (reps - 1))
            h = z * float(prod.std(ddof=1)) / math.sqrt(reps)
            re.append(cov)
            rh.append(h)
            rw.append(bool(abs(cov - oracle[xi]) <= h) if name == "identity" else None)
            rf.append(bool(abs(cov) <= h))
        emp.append(re)
        hw.append(rh)
        within.append(rw)
        floor.append(rf)
    return CovarianceReport(t=t, c=c, reps=reps, x_list=x_list, g_names=names, empirical=emp,
                            half_width=hw, oracle=oracle, within=within, below_floor=floor,
                            confidence=level)


@dataclass
class StationarityReport(_Report):
    t: float
    c: float
    reps: int
    shifts: list
    statistics: list
    p_values: list
    rejected: list
    alpha: float
    schema = "stationarity"

    @property
    def passed(self):
        return not any(self.rejected)

    def rows(self):
        header = ["shift [space]", "ks_statistic [1]", "p_value [prob]", "rejected [flag]"]
        return header, list(zip(self.shifts, self.statistics, self.p_values, self.rejected))


def stationarity_test(c, t, shifts, reps, seed, dt=None, dx=None) -> StationarityReport:
    """Two-sample KS tests of ``I(t, 0)`` against ``I(t, s)`` for each shift ``s``.

    The two samples of every test use disjoint noise streams, so they are
    independent as the test assumes.
    """
    shifts = [float(s) for s in shifts]
    points = [(float(t), 0.0)] + [(float(t), s) for s in shifts]
    grid = lattice_for(points, dt=dt, dx=dx)
    Z = Integrand.constant(c)
    base = sample_at_points(Z, grid, [points[0]], reps, seed)[:, 0]
    other = sample_at_points(Z, grid, points[1:], reps, seed, stream0=reps)
    alpha = (1 - CONFIDENCE) / max(len(shifts), 1)
    st, pv, rej = [], [], []
    for i in range(len(shifts)):
        res = stats.ks_2samp(base, other[:, i])
        st.append(float(res.statistic))
        pv.append(float(res.pvalue))
        rej.append(bool(res.pvalue < alpha))
    return StationarityReport(t=t, c=c, reps=reps, shifts=shifts, statistics=st, p_values=pv,
                              rejected=rej, alpha=alpha)


@dataclass
class GrowthReport(_Report):
    """Max over window positions of the window infimum, per domain length and seed."""

    a: float
    epsilon: float
    c1: float
    c2: float
    L_list: list
    seeds: list
    statistic: list    # [seed][L]
    n_windows: list    # [L]
    schema = "growth"

    def monotone(self):
        return [all(b >= a for a, b in zip(row[:-1], row[1:])) for row in self.statistic]

    def strict_gain(self, i=0, j=-1):
        """Per seed: statistic at ``L_list[j]`` strictly above that at ``L_list[i]``."""
        return [row[j] > row[i] for row in self.statistic]

    def medians(self):
        return np.median(np.asarray(self.statistic), axis=0).tolist()

    def rows(self):
        header = ["seed [index]"] + [f"L={L:g} [field]" for L in self.L_list]
        return header, [[s, *row] for s, row in zip(self.seeds, self.statistic)]


def window_infima(frames, epsilon, L_max):
    """Infimum of each window ``[c, c + eps^2]``, ``c = k eps^2``, over all frames."""
    w = epsilon**2
    n_win = int(math.floor(L_max / w + 1e-9))
    x = frames[0].x
    stack = np.stack([f.values for f in frames])
    col_min = stack.min(axis=0)
    out = np.empty(n_win)
    tol = 1e-9 * frames[0].grid.dx
    for k in range(n_win):
        sel = (x >= k * w - tol) & (x <= (k + 1) * w + tol)
        if not sel.any():
            raise DomainError(f"window {k} contains no lattice point")
        out[k] = col_min[sel].min()
    return out


def growth_scan(c1, c2, Z=None, a=1.0, epsilon=0.5, L_list=(10.0, 100.0, 1000.0), reps=100,
                seed=0, dt=None, dx=None) -> GrowthReport:
    """``max_{c <= L - eps^2} inf_{[a, a+eps^4] x [c, c+eps^2]} I_Z`` for each ``L``.

    Windows tile ``[0, L]`` from the left, so the statistic is nondecreasing
    in ``L`` on each noise realisation.  Replicate ``r`` uses noise stream
    ``r`` of ``seed``.  ``dt`` defaults to ``eps^4 / 4`` so the time window
    holds five lattice times.
    """
    if not (0 < c1 <= c2):
        raise DomainError("need 0 < c1 <= c2")
    if Z is None:
        if c1 == c2:
            Z = Integrand.constant(c1)
        else:
            Z = Integrand.function(lambda s, y: c1 + (c2 - c1) * 0.5 * (1 + np.sin(y)), c1, c2)
    L_list = sorted(float(L) for L in L_list)
    w = epsilon**2
    if L_list[0] < w * (1 - 1e-12):
        raise DomainError(f"window width {w} exceeds the domain length {L_list[0]}")
    dt = epsilon**4 / 4 if dt is None else dt
    dx = math.sqrt(dt) / 2 if dx is None else dx
    t_hi = a + epsilon**4
    n_t = int(round(t_hi / dt))
    if not math.isclose(n_t * dt, t_hi, rel_tol=1e-9):
        raise DomainError("a + eps^4 must be a multiple of dt")
    margin = TRUNCATION_SIGMAS * math.sqrt(t_hi) + dx
    n_x = int(math.ceil((L_list[-1] + 2 * margin) / dx)) + 1
    grid = GridSpec(dt=dt, dx=dx, n_t=n_t, n_x=n_x, x_min=-margin)
    m0 = grid.time_index(a) if abs(a / dt - round(a / dt)) < 1e-9 else int(math.ceil(a / dt))
    times = [m * dt for m in range(m0, n_t + 1) if m >= 1]
    counts = [int(math.floor(L / w + 1e-9)) for L in L_list]
    table = []
    for r in range(reps):
        noise = generate(grid, seed, stream=r)
        frames = [stochastic_convolution(Z, noise, t) for t in times]
        infima = window_infima(frames, epsilon, L_list[-1])
        running = np.maximum.accumulate(infima)
        table.append([float(running[n - 1]) for n in counts])
    return GrowthReport(a=a, epsilon=epsilon, c1=c1, c2=c2, L_list=L_list,
                        seeds=list(range(reps)), statistic=table, n_windows=counts)
