"""Truncated-drift ladder on one noise realisation: ordering and escalation."""

from shelab.drift import DiffusionSpec, DriftSpec
from shelab.kernel import InitialData
from shelab.noise import GridSpec
from shelab.spde import SpdeProblem, blowup_scan, minimal_ladder

grid = GridSpec(dt=0.005, dx=0.1, n_t=2000, n_x=200, x_min=-10.0)
for name, b in [("1+u^2", DriftSpec("power", (2.0,))), ("1+u", DriftSpec("affine", (1.0,)))]:
    p = SpdeProblem(b, DiffusionSpec.constant(1.0), InitialData.constant(0.0), grid, seed=3)
    lad = minimal_ladder(p, [2, 4, 8, 16], threshold_rule=lambda n: 8.0, stride=200)
    sups = ", ".join(f"{s:.3f}" for s in lad.sup_at(1.0))
    esc = ", ".join("-" if e is None else f"{e:.3f}" for e in lad.escalation)
    print(f"b={name}: sup_x u at t=1 per level {sups}; first time sup >= 8: {esc}")

p = SpdeProblem(DriftSpec("power", (2.0,)), DiffusionSpec.constant(1.0),
                InitialData.constant(0.0), grid, seed=3)
scan = blowup_scan(p, [2, 4, 8, 16])
for row in scan.rows:
    tau = "not reached" if row.tau is None else f"{row.tau:.3f}"
    print(f"n={row.level:g}: sup >= {row.threshold:g} at {tau}; ODE prediction {row.prediction:.3f}")
