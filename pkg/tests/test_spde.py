import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shelab.drift import DiffusionSpec, DriftSpec, truncate
from shelab.errors import DomainError, InvariantError
from shelab.kernel import InitialData, convolve_initial
from shelab.noise import GridSpec
from shelab.spde import (
    KERNEL_MASS,
    SpdeProblem,
    blowup_scan,
    minimal_ladder,
    mild_residual,
    solve,
)

ONE = DiffusionSpec.constant(1.0)
ZERO = InitialData.constant(0.0)


def grid(dx=0.1, t_max=1.0, length=20.0):
    dt = dx * dx / 2
    return GridSpec(dt=dt, dx=dx, n_t=int(round(t_max / dt)), n_x=int(round(length / dx)),
                    x_min=-length / 2)


def problem(drift=None, sigma=ONE, u0=ZERO, g=None, seed=0, **kw):
    drift = DriftSpec("affine", (1.0,)) if drift is None else drift
    return SpdeProblem(drift, sigma, u0, grid() if g is None else g, seed=seed, **kw)


def test_kernel_mass_constant():
    # Phi(1/2) - Phi(0) from the error function
    assert KERNEL_MASS == pytest.approx(0.5 * math.erf(0.5 / math.sqrt(2)), rel=1e-14)
    assert KERNEL_MASS == pytest.approx(0.19146246127401312, rel=1e-14)


def test_cfl_enforced():
    g = GridSpec(dt=0.02, dx=0.1, n_t=10, n_x=50)
    with pytest.raises(DomainError):
        problem(g=g)


def test_locally_lipschitz_drift_rejected():
    with pytest.raises(DomainError):
        solve(problem(DriftSpec("power", (2.0,))))


def test_heat_equation_regression():
    p = problem(DriftSpec("constant", (1e-300,)), DiffusionSpec.constant(1e-12),
                InitialData.step(), g=grid(dx=0.05, t_max=0.25))
    tr = solve(p, stride=p.grid.n_t)
    u = tr.frames[-1]
    j0 = int(np.argmin(np.abs(p.grid.x)))
    assert abs(u[j0] - 0.5) <= 0.01
    for j in (j0 - 10, j0 + 10, j0 + 20):
        assert abs(u[j] - convolve_initial(InitialData.step(), 0.25, p.grid.x[j])) <= 0.01


def test_constant_drift_mean():
    beta, t = 1.5, 0.25
    g = grid(dx=0.1, t_max=t, length=6.0)
    vals = []
    for seed in range(1000):
        p = problem(DriftSpec("constant", (beta,)), DiffusionSpec.constant(0.7), g=g, seed=seed)
        vals.append(solve(p, stride=g.n_t).frames[-1, g.n_x // 2])
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - beta * t) <= 3 * se


def test_bit_identical_runs():
    p = problem(sigma=DiffusionSpec("sine", (1.5, 0.5), c1=1, c2=2), seed=42)
    a, b = solve(p), solve(p)
    assert np.array_equal(a.frames, b.frames)
    assert np.array_equal(a.sup, b.sup)


def test_reflecting_boundary_conserves_constant():
    p = problem(DriftSpec("constant", (1e-300,)), DiffusionSpec.constant(1e-300),
                InitialData.constant(2.0), boundary="reflecting")
    tr = solve(p, stride=50)
    assert np.allclose(tr.frames, 2.0, rtol=0, atol=1e-12)


def test_nan_reports_cell():
    u0 = InitialData("function", func=lambda x: np.where(np.isclose(x, 0.0), np.nan, 0.0),
                     bounds=(0.0, 0.0))
    with pytest.raises(InvariantError) as exc:
        solve(problem(u0=u0))
    m, j = exc.value.witness
    assert m == 1 and j in (99, 100, 101)


def test_ceiling_truncates():
    p = problem(DriftSpec("constant", (50.0,)), ceiling=5.0)
    tr = solve(p)
    assert tr.stopped and tr.ceiling_hits
    t_hit = tr.ceiling_hits[0][0]
    assert tr.times[-1] == pytest.approx(t_hit - p.grid.dt)
    assert np.all(tr.frames < 5.0)


def test_save_round_trip(tmp_path):
    p = problem(seed=3, g=grid(t_max=0.1))
    tr = solve(p, stride=5)
    npy, path = tr.save(tmp_path / "run")
    assert np.array_equal(np.load(npy), tr.frames)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "t [time]"
    assert [float(r[1]) for r in rows[1:]] == tr.sup.tolist()


def test_ladder_duplicate_levels_identical():
    p = problem(DriftSpec("power", (2.0,)), seed=1, g=grid(t_max=0.5))
    lad = minimal_ladder(p, [4.0, 4.0], stride=10)
    a, b = lad.trajectories
    assert np.array_equal(a.frames, b.frames)


def test_ladder_rejects_bad_levels():
    p = problem(DriftSpec("power", (2.0,)))
    for levels in ([4, 2], [], [0, 1]):
        with pytest.raises(DomainError):
            minimal_ladder(p, levels)


def test_ladder_violation_raises():
    p = problem(DriftSpec("power", (2.0,)), g=grid(t_max=0.1))
    with pytest.raises(InvariantError) as exc:
        minimal_ladder(p, [2.0, 2.0], tol_mono=-1.0)
    assert exc.value.witness[0] == 1


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.lists(st.floats(0.5, 30), min_size=2, max_size=4))
def test_ladder_monotone(seed, levels):
    p = problem(DriftSpec("power", (2.0,)), seed=seed, g=grid(t_max=0.5, length=8))
    lad = minimal_ladder(p, sorted(levels), stride=1)
    for lo, hi in zip(lad.trajectories[:-1], lad.trajectories[1:]):
        n = min(lo.n_steps, hi.n_steps)
        slack = 1e-9 * (1 + np.abs(hi.frames[: n + 1]))
        assert np.all(lo.frames[: n + 1] <= hi.frames[: n + 1] + slack)


def test_drift_comparison():
    g = grid(t_max=0.5)
    lo = solve(problem(DriftSpec("affine", (0.5,)), seed=11, g=g))
    hi = solve(problem(DriftSpec("affine", (1.0,)), seed=11, g=g))
    assert np.all(lo.frames <= hi.frames)


def test_scan_single_level_matches_solve():
    p = problem(DriftSpec("power", (2.0,)), seed=2, g=grid(t_max=2.0))
    scan = blowup_scan(p, [2.0])
    tr = solve(p.with_drift(truncate(p.drift, 2.0)))
    assert scan.rows[0].tau == tr.first_time_at_least(1.0)


def test_scan_unreachable_threshold():
    p = problem(DriftSpec("power", (2.0,)), seed=2, g=grid(t_max=0.5))
    scan = blowup_scan(p, [2, 4, 8], threshold_rule=lambda n: math.inf)
    assert all(not r.reached for r in scan.rows)
    assert all(math.isinf(r.prediction) for r in scan.rows)


def test_scan_prediction():
    p = problem(DriftSpec("power", (2.0,)), seed=2, g=grid(t_max=0.2))
    scan = blowup_scan(p, [16.0], M=1.0)
    # int_1^8 ds / (l (1 + s^2)) = (atan 8 - pi/4) / l
    expected = (math.atan(8.0) - math.pi / 4) / KERNEL_MASS
    assert scan.rows[0].prediction == pytest.approx(expected, rel=1e-9)


def test_scan_median_escalation():
    p = problem(DriftSpec("power", (2.0,)), g=grid(t_max=5.0))
    taus = []
    for seed in range(100):
        scan = blowup_scan(p.with_seed(seed), [16.0], check_monotone=False)
        taus.append(math.inf if scan.rows[0].tau is None else scan.rows[0].tau)
    med = float(np.median(taus))
    print(f"median escalation time of level 16 over 100 seeds: {med:.4g}")
    assert med < 5.0


def _median_residual(dx, seeds=12):
    g = grid(dx=dx, t_max=0.5, length=12)
    out = []
    sigma = DiffusionSpec("sine", (1.5, 0.5), c1=1, c2=2)
    for seed in range(seeds):
        p = problem(DriftSpec("affine", (1.0,)), sigma, InitialData.constant(0.5), g, seed)
        tr = solve(p)
        for j in np.linspace(g.n_x // 3, 2 * g.n_x // 3, 10).astype(int):
            out.append(abs(mild_residual(p, tr, 0.5, j)))
    return float(np.median(out))


def test_mild_residual_shrinks_under_refinement():
    coarse, fine = _median_residual(0.2), _median_residual(0.05)
    assert fine < coarse
    # expected rate dx^{1/2}: a factor near 2 for a fourfold refinement
    assert fine < 0.75 * coarse


def test_mild_residual_needs_every_step():
    p = problem(g=grid(t_max=0.1))
    with pytest.raises(DomainError):
        mild_residual(p, solve(p, stride=2), 0.1)
